use std::collections::BTreeSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{ConlluSentence, CorpusError};

/// Dependency relations whose presence marks a clausal predicate with an
/// argument. Subtypes (`nsubj:pass`, `obl:tmod`) are reduced to the universal
/// relation before lookup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelationRuleSet {
    pub core_arguments: BTreeSet<String>,
    pub noncore_dependents: BTreeSet<String>,
}

impl Default for RelationRuleSet {
    fn default() -> Self {
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        RelationRuleSet {
            core_arguments: set(&["nsubj", "obj", "iobj", "csubj", "ccomp", "xcomp"]),
            noncore_dependents: set(&[
                "obl", "vocative", "expl", "dislocated", "advcl", "advmod", "discourse", "aux",
                "cop", "mark",
            ]),
        }
    }
}

impl RelationRuleSet {
    pub fn from_json<R: Read>(reader: R) -> Result<Self, CorpusError> {
        serde_json::from_reader(reader).map_err(|e| CorpusError::Rules(e.to_string()))
    }

    pub fn is_clausal(&self, relation: &str) -> bool {
        let base = universal_relation(relation);
        self.core_arguments.contains(base) || self.noncore_dependents.contains(base)
    }
}

fn universal_relation(relation: &str) -> &str {
    relation.split(':').next().unwrap_or(relation)
}

/// SU iff some relation is a core argument or non-core dependent.
pub fn classify_unit(sent: &ConlluSentence, rules: &RelationRuleSet) -> bool {
    sent.deprels.iter().any(|d| rules.is_clausal(&d.relation))
}
