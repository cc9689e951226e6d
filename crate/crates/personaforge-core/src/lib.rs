//! Core building blocks for Big Five personality simulation experiments with
//! language models.
//!
//! The crate is organized around one experiment pipeline:
//!
//! 1. [`questionnaire`] — administer a Likert questionnaire (BFI-44 by
//!    default) to a trait-prompted model and aggregate trait scores.
//! 2. [`generation`] — produce trait-conditioned free texts over score grids,
//!    temperature sweeps, and sampled full profiles, with trait-leakage
//!    masking.
//! 3. [`classifier`] — a clue-and-reasoning judge prompt plus tolerant JSON
//!    verdict parsing for scoring generated texts per trait.
//! 4. [`annotation`] — ingest and validate human rater files, vote on final
//!    scores, and compute inter-annotator agreement.
//! 5. [`metrics`] — reliability coefficients, Fleiss' kappa, weighted
//!    precision/recall/F1, confusion matrices, and bias detection.
//! 6. [`linguistics`] — from-scratch TF-IDF similarity with same-trait
//!    neighbor averaging and POS-grouped lexicon extraction.
//!
//! Model access goes through the [`provider::ChatProvider`] trait so every
//! stage runs identically against live HTTP APIs or the deterministic
//! scripted mock. The crate is `no_std` (with `alloc`); everything here is
//! pure computation, and all I/O lives in the companion CLI crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod annotation;
pub mod classifier;
pub mod domain;
pub mod generation;
pub mod linguistics;
pub mod metrics;
pub mod provider;
pub mod questionnaire;
pub mod rng;
pub mod template;
