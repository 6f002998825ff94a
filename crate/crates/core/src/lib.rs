//! Post-hoc answer attribution: decompose answers into information units and
//! map each unit to supporting sentences of the source document.

pub mod attribute;
pub mod datasets;
pub mod decompose;
pub mod eval;
pub mod gateway;
pub mod http;
pub mod lenient;
pub mod model;
pub mod registry;
pub mod retrieve;
pub mod text;

pub use model::*;
