//! Emotion-then-detection transfer learning for machine-generated text
//! detection: label taxonomies, corpora, a small trainable backbone, the
//! seeded multi-run protocol and its evaluation.

pub mod backend;
pub mod corpora;
pub mod emotaxon;
pub mod evalkit;
pub mod seed;
pub mod trainer;
