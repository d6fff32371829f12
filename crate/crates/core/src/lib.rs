//! Pain relevance and pain change classification for short clinical notes.
//!
//! The crate covers the whole path from raw note text to evaluated
//! classifiers: tokenization and stemming ([`textprep`]), chi-squared
//! n-gram selection ([`features`]), LDA topic features ([`topics`]), SMOTE
//! rebalancing ([`balance`]), four classifier families ([`models`]),
//! standard and graded ordinal metrics ([`eval`]) and the orchestration
//! behind the `painsift` command ([`pipeline`]).

pub mod balance;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod models;
pub mod pipeline;
pub mod textprep;
pub mod topics;
