//! Knowledge hypergraph extraction with an evolving skill library.
//!
//! The pipeline chunks a document, extracts entities and tiered hyperedges
//! through an LLM [`gateway`], and consolidates mentions into one
//! [`KnowledgeHypergraph`]. The [`trainer`] grows a [`skills::SkillLibrary`]
//! from rollouts scored against gold graphs, and the [`evaluator`] scores
//! graphs by optimal one-to-one matching.

pub mod chunker;
pub mod cli;
pub mod config;
pub mod consolidator;
pub mod error;
pub mod evaluator;
pub mod extractor;
pub mod gateway;
pub mod model;
pub mod pipeline;
pub mod prompts;
pub mod skills;
pub mod trainer;
pub mod util;

pub use error::{Error, Result};
pub use model::{Entity, GraphBuilder, Hyperedge, KnowledgeHypergraph, Tier};
