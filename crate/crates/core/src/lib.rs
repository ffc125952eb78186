//! Compiler toolchain and deterministic runtime simulator for IoT
//! applications described in four small specification languages
//! (vocabulary, architecture, user interaction, deployment) plus a logic-rule
//! language for custom services.

pub mod codegen;
pub mod diag;
pub mod format;
pub mod layout;
pub mod linker;
pub mod mapper;
pub mod model;
pub mod parse;
pub mod pipeline;
pub mod sim;
pub mod validate;
