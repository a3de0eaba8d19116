//! Corpus curation: raw dataset parsers, binarization, event masking, ADE
//! lexicon annotation, statistics, and the unified line-delimited format.

pub mod ade;
pub mod curate;
pub mod io;
pub mod mask;
pub mod semeval;
pub mod stats;
pub mod synthetic;
pub mod types;

pub use ade::{
    annotate_negative, build_ade_lexicon, lexicon_matches, parse_ade, split_by_sentence_hash,
    AdeCorpus, AdeLexicon, AdeReport, ADE_TEST_FRACTION,
};
pub use curate::{curate_source, split_records, Curated, DataLayout};
pub use io::{export_records, import_records, read_records, write_records};
pub use mask::{is_masked, mask_events, MASK_TOKEN};
pub use semeval::{binarize_relation, parse_semeval2007, parse_semeval2007_file, parse_semeval2010};
pub use stats::{corpus_stats, CorpusStats, StatsReport, StatsRow};
pub use synthetic::{generate_synthetic, generate_synthetic_family, TemplateFamily};
pub use types::{strip_tags, CharSpan, Label, MarkedSentence, Source, Split, TagStyle};
