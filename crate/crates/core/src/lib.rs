//! Automated Wordnet construction for a target language.
//!
//! Candidate synsets come from translating a word into English and collecting
//! every English synset of the translations. Each candidate is scored by the
//! cosine between its synset representation and the word's embedding. A
//! sparse-coding sense model (K-SVD over the embedding matrix) refines the
//! matching with a word-dependent cutoff and a synset-recovery pass.

pub mod builder;
pub mod cli;
pub mod embedder;
pub mod error;
pub mod evaluator;
pub mod lexicon;
pub mod linalg;
pub mod linker;
pub mod manifest;
pub mod ontology;
pub mod purifier;
pub mod wsi;

pub use error::{Error, Result};
pub use lexicon::{Embeddings, FrequencyTable, Vocabulary, WordId};
pub use ontology::{BilingualDict, OntologyDb, Pos, TranslatedGlossTable};
