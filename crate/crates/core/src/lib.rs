//! Corpus refinement for image-comment datasets.
//!
//! The pipeline turns noisy user comments into
//!
//! 1. a filtered caption dataset, by scoring each comment with the negative
//!    log corpus probability of its noun unigrams and descriptor-object
//!    bigrams and discarding low scorers ([`informativeness`]);
//! 2. per-image topic distributions from LDA over image-level documents,
//!    usable as weak labels ([`lda`]);
//!
//! and provides the caption diversity and n-gram overlap metrics used to
//! evaluate captioning output ([`metrics`]).

pub mod corpus;
pub mod error;
pub mod informativeness;
pub mod lda;
pub mod metrics;
pub mod ngram;
pub mod persist;
pub mod synthetic;
pub mod text;

pub use corpus::{
    apply_decisions, load_corpus, load_corpus_with, parse_corpus, write_corpus,
    write_filtered_corpus, Comment, Corpus, FilterSummary, ImageEntry, LoadOptions, LoadedCorpus,
};
pub use error::{Error, Result};
pub use informativeness::{
    filter_corpus, filter_stats, score_comment, score_comment_with, FilterConfig, FilterDecision,
    FilterStats,
};
pub use lda::{
    assemble_documents, build_lda_vocab, train_lda, LdaConfig, LdaDocument, LdaVocabulary,
    TopicModel,
};
pub use ngram::{build_vocabulary, extract_ngrams, NGram, Normalization, Vocabulary};
pub use text::{normalize_text, tokenize, Tag, TaggedToken, Tagger};
