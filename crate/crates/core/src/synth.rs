//! Synthetic web-style corpora.
//!
//! Produces a mix of ordinary sentences and the kinds of non-sentential
//! material found in email and forum text (timestamps, separator rules,
//! attachment lines, headings, address fragments). Useful for tests,
//! benchmarks and smoke runs when no treebank is at hand.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Unit;

const SUBJECTS: &[&str] = &[
    "I", "We", "The manager", "My brother", "She", "They", "Our team", "The dog", "He", "You",
    "The committee", "My neighbour", "Everyone", "The new intern", "Sara",
];
const VERBS: &[&str] = &[
    "bought", "reviewed", "sent", "liked", "fixed", "visited", "will call", "has finished",
    "forgot", "cleaned", "ordered", "cancelled", "needs", "found", "approved",
];
const OBJECTS: &[&str] = &[
    "the report", "a new car", "the files", "my email", "the old house", "this product",
    "the contract", "some pizza", "the schedule", "a ticket", "the invoice", "her bike",
];
const ADJUNCTS: &[&str] = &[
    "yesterday", "on Monday", "at the office", "for the meeting", "last week", "again",
    "before lunch", "in Houston", "after the call",
];
const QUESTIONS: &[&str] = &["Can you", "Did they", "Should we", "Could you", "Will she"];
const BASE_VERBS: &[&str] = &["send", "fix", "check", "review", "approve", "call about"];
const EXCLAIM: &[&str] = &["Thanks for the help", "Great job", "Happy birthday", "Good luck with the move"];
const WORDS: &[&str] = &["report", "final", "budget", "notes", "draft", "summary", "memo"];
const PLACES: &[&str] = &[
    "Sunshine Coast , British Columbia , Canada",
    "Houston , TX 77002",
    "1400 Smith Street",
    "Portland , Oregon",
];
const HEADINGS: &[&str] = &["Excerpt :", "Dear Sir / Madam ,", "Hi all ,", "Regards ,", "Subject : Re :", "Thanks ,"];
const MENU: &[&str] = &["Mixed Tempura", "Miso Soup", "Chicken Teriyaki", "Green Tea"];
const RULES: &[&str] = &["*~*~*~*~*~*~*", "=====", "-----", "----->===}*{===<----", "**********", "#####"];

/// Whitespace words with leading `(` and trailing punctuation split off and
/// attached without a space, the way treebanks tokenize.
pub fn tokenize(text: &str) -> Vec<(String, bool)> {
    const TRAILING: &[char] = &['.', ',', '!', '?', ':', ';', ')', '"'];
    let mut out: Vec<(String, bool)> = Vec::new();
    for word in text.split_whitespace() {
        let mut core = word;
        let mut lead = Vec::new();
        while core.len() > 1 && core.starts_with('(') {
            lead.push("(".to_string());
            core = &core[1..];
        }
        let mut trail = Vec::new();
        while core.chars().count() > 1 && core.ends_with(TRAILING) && core.chars().any(char::is_alphanumeric) {
            let c = core.chars().last().unwrap();
            trail.push(c.to_string());
            core = &core[..core.len() - c.len_utf8()];
        }
        for l in lead {
            out.push((l, false));
        }
        out.push((core.to_string(), true));
        for t in trail.into_iter().rev() {
            out.last_mut().unwrap().1 = false;
            out.push((t, true));
        }
    }
    if let Some(last) = out.last_mut() {
        last.1 = false;
    }
    out
}

fn unit(text: &str, is_su: bool) -> Unit {
    Unit::from_tokens(&tokenize(text), is_su)
}

fn pick<'a, R: Rng + ?Sized>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().unwrap()
}

pub fn sentence<R: Rng + ?Sized>(rng: &mut R) -> Unit {
    let kind = rng.random_range(0..10);
    let mut text = match kind {
        0 | 1 => format!("{} {} {}?", pick(rng, QUESTIONS), pick(rng, BASE_VERBS), pick(rng, OBJECTS)),
        2 => format!("{}!", pick(rng, EXCLAIM)),
        3 => format!(
            "{} {} {} and {} {} {}.",
            pick(rng, SUBJECTS),
            pick(rng, VERBS),
            pick(rng, OBJECTS),
            pick(rng, SUBJECTS).to_lowercase(),
            pick(rng, VERBS),
            pick(rng, OBJECTS)
        ),
        _ => {
            let mut s = format!("{} {} {}", pick(rng, SUBJECTS), pick(rng, VERBS), pick(rng, OBJECTS));
            if rng.random_bool(0.6) {
                s.push(' ');
                s.push_str(pick(rng, ADJUNCTS));
            }
            s.push('.');
            s
        }
    };
    // informal writing: lower-case start or a missing final mark
    if rng.random_bool(0.1) {
        text = text[..1].to_lowercase() + &text[1..];
    }
    if rng.random_bool(0.1) {
        text.pop();
    }
    unit(&text, true)
}

pub fn fragment<R: Rng + ?Sized>(rng: &mut R) -> Unit {
    let text = match rng.random_range(0..7) {
        0 => format!(
            "{:02}/{:02}/20{:02} {:02}:{:02} {}",
            rng.random_range(1..13),
            rng.random_range(1..29),
            rng.random_range(0..25),
            rng.random_range(1..13),
            rng.random_range(0..60),
            if rng.random_bool(0.5) { "AM" } else { "PM" }
        ),
        1 => pick(rng, RULES).to_string(),
        2 => {
            let f = format!("{}_{}.doc", pick(rng, WORDS), pick(rng, WORDS));
            format!("- {f} << File : {f} >>")
        }
        3 => pick(rng, PLACES).to_string(),
        4 => pick(rng, HEADINGS).to_string(),
        5 => format!("{} ..... {}.{:02}", pick(rng, MENU), rng.random_range(2..20), rng.random_range(0..100)),
        _ => format!("( Answered , {} Comments )", rng.random_range(0..9)),
    };
    unit(&text, false)
}

/// `n` units, each an NSU with probability `nsu_fraction`.
pub fn generate_units(n: usize, nsu_fraction: f64, seed: u64) -> Vec<Unit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            if rng.random_bool(nsu_fraction) {
                fragment(&mut rng)
            } else {
                sentence(&mut rng)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenization() {
        let toks = tokenize("Hi (there), you.");
        let words: Vec<&str> = toks.iter().map(|t| t.0.as_str()).collect();
        assert_eq!(words, vec!["Hi", "(", "there", ")", ",", "you", "."]);
        let u = Unit::from_tokens(&toks, true);
        assert_eq!(u.text, "Hi (there), you.");
    }

    #[test]
    fn units_are_valid_and_reproducible() {
        let a = generate_units(300, 0.3, 5);
        assert_eq!(a, generate_units(300, 0.3, 5));
        for u in &a {
            u.validate().unwrap();
            assert!(!u.is_empty());
        }
        let nsu = a.iter().filter(|u| !u.is_su).count();
        assert!((50..130).contains(&nsu), "{nsu}");
    }
}
