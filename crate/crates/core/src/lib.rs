//! Toolkit for building hierarchically labeled machine-generated scientific
//! text datasets and for training and evaluating detectors that identify the
//! kind of tool (generation, paraphrase, translation) behind a passage.

pub mod assembly;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod detector;
pub mod experiments;
pub mod jsonl;
pub mod manifest;
pub mod metrics;
pub mod mockdata;
pub mod parallel;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod taxonomy;
