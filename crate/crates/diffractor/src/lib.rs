//! Fast word-level metric-DP text obfuscation over one-dimensional word
//! lists.
//!
//! High-dimensional embedding models are linearized once into word lists by
//! greedy nearest-neighbor chaining; after that, privatizing a word is a
//! single draw of integer noise on its list index — no per-word
//! nearest-neighbor search. A word can be diffracted through several lists
//! at once, with exactly one candidate released.
//!
//! The crate also carries the apparatus needed to verify the mechanism:
//! exact output-distribution oracles, plausible-deniability statistics and a
//! throughput/memory benchmark harness with an MVC-style high-dimensional
//! baseline.

pub mod alloc_track;
pub mod bench;
pub mod config;
pub mod diffract;
pub mod embedding;
pub mod error;
pub mod eval;
mod knn;
pub mod list;
pub mod mechanisms;
pub mod mvc;
pub mod rng;
pub mod tokenize;

pub use config::RunConfig;
pub use diffract::{
    CasePolicy, ConfigTag, Diffractor, ListBank, OovPolicy, PerturbationRecord,
};
pub use embedding::{load_embeddings, EmbeddingModel, LoadOptions};
pub use error::{Error, Result};
pub use eval::{estimate_deniability, expected_n_w, DeniabilityAggregate, DeniabilityStats};
pub use list::{build_list, build_list_from, Backend, ListMeta, WordList};
pub use mechanisms::{MechanismConfig, MechanismKind};
pub use mvc::MvcMechanism;
pub use rng::SeedStream;
