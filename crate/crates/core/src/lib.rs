//! Symbolic variational calculus on jet bundles.

pub mod bundle;
pub mod commands;
pub mod dsl;
pub mod error;
pub mod expr;
pub mod fields;
pub mod forms;
pub mod jacobi;
pub mod noether;
pub mod oracle;
pub mod random;
pub mod report;
pub mod variational;

pub use bundle::{enumerate_multiindices, jet_order, BundleSpec, CancelToken, MultiIndex};
pub use error::{Error, Result};
pub use expr::{Atom, DefinedSymbol, Expr, Family, Func, JetVar, Names, RenderStyle, SymbolId, SymbolTable, VarKey};
