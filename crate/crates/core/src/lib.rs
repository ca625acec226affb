//! Corpus construction, tokenization and evaluation tools for training
//! text-to-speech models on forward, reversed and mismatched text/speech
//! directions.

pub mod audio;
pub mod corpus;
pub mod eval;
pub mod perceptual;
pub mod textnorm;
pub mod tokenize;
