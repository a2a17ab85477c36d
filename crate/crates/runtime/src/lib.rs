//! An embedded interpreter for the dynamic-language subset that translated
//! fragments and generated mock tests are written in.
//!
//! The interpreter is single-threaded and deterministic: `print` output is
//! captured, every user-function call is logged, and host code can register
//! native modules before running anything.

pub mod ast;
pub mod builtins;
pub mod error;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod stdlib;
pub mod value;

pub use error::{Exc, RunError, SyntaxError};
pub use interp::{CallRecord, Interp, ModuleBuilder};
pub use value::{BuiltinType, Class, HashKey, ModuleObj, Value};
