pub mod codec;
pub mod config;
pub mod equality;
pub mod fragments;
pub mod harness;
pub mod mockgen;
pub mod orchestrator;
pub mod pipeline;
pub mod support;
pub mod trace;
pub mod typeres;
