//! Templated desk-scale corpus over nonsense nouns.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::types::{CharSpan, Label, MarkedSentence, Source, Split};

const NOUNS: &[&str] = &[
    "blorf", "zindle", "quapper", "mirtle", "grolm", "spindex", "trovel", "wumble", "fesk",
    "plonth", "vardle", "skree", "nubbin", "jorple", "crandle", "yeltch", "dworp", "fizzet",
    "glimber", "hobrin", "kesp", "lunder", "marvet", "nolf", "oskin", "prindle", "queeb",
    "rutch", "sklorp", "tambet", "umbrix", "vonnel", "wexil", "yorble", "zanth", "brimmel",
    "clatch", "drubble", "eskel", "frindle",
];

const ADJECTIVES: &[&str] = &["red", "sudden", "tiny", "loud", "cold", "vast", "old", "bright"];

/// Template families model two distinct data distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateFamily {
    A,
    B,
}

impl TemplateFamily {
    /// `{1}` is the first event in the sentence, `{2}` the second.
    fn templates(self, label: Label) -> &'static [&'static str] {
        match (self, label) {
            (TemplateFamily::A, Label::CauseEffect) => &[
                "the {1} causes {2} .",
                "{1} resulted from the {2} .",
                "a {1} led to {2} .",
            ],
            (TemplateFamily::A, Label::Other) => &[
                "the {1} and {2} were observed .",
                "{1} is part of the {2} .",
            ],
            (TemplateFamily::B, Label::CauseEffect) => &[
                "yesterday the {1} triggered a {2} .",
                "{1} was produced by the {2} .",
                "because of {1} , the {2} appeared .",
            ],
            (TemplateFamily::B, Label::Other) => &[
                "the {1} sat next to a {2} .",
                "a {1} contains the {2} .",
                "{1} was seen with {2} today .",
            ],
        }
    }
}

fn event_phrase(rng: &mut ChaCha8Rng) -> String {
    let noun = NOUNS.choose(rng).expect("non-empty");
    if rng.gen_bool(0.3) {
        format!("{} {noun}", ADJECTIVES.choose(rng).expect("non-empty"))
    } else {
        noun.to_string()
    }
}

fn fill(template: &str, first: &str, second: &str) -> (String, CharSpan, CharSpan) {
    let (pre, rest) = template.split_once("{1}").expect("template has {1}");
    let (mid, post) = rest.split_once("{2}").expect("template has {2}");
    let mut text = String::new();
    text.push_str(pre);
    let a = text.chars().count();
    text.push_str(first);
    let e1 = CharSpan::new(a, a + first.chars().count());
    text.push_str(mid);
    let b = text.chars().count();
    text.push_str(second);
    let e2 = CharSpan::new(b, b + second.chars().count());
    text.push_str(post);
    (text, e1, e2)
}

/// Balanced synthetic corpus of `2 * n_per_class` records, deterministic in `seed`.
pub fn generate_synthetic(n_per_class: usize, seed: u64) -> Vec<MarkedSentence> {
    generate_synthetic_family(n_per_class, seed, TemplateFamily::A)
}

pub fn generate_synthetic_family(
    n_per_class: usize,
    seed: u64,
    family: TemplateFamily,
) -> Vec<MarkedSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * n_per_class);
    for i in 0..2 * n_per_class {
        let label = if i % 2 == 0 { Label::CauseEffect } else { Label::Other };
        let template = family.templates(label).choose(&mut rng).expect("non-empty");
        let first = event_phrase(&mut rng);
        let mut second = event_phrase(&mut rng);
        while second == first {
            second = event_phrase(&mut rng);
        }
        let (text, e1, e2) = fill(template, &first, &second);
        out.push(MarkedSentence {
            sentence_id: format!("syn-{seed}-{i}"),
            text,
            e1,
            e2,
            label,
            source: Source::Synthetic,
            split: Split::Train,
        });
    }
    out
}
