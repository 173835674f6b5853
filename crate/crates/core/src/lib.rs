//! Exact-arithmetic engine for classical and derived A-infinity structures
//! on finitely supported bigraded modules: the full bracket calculus with
//! Koszul signs, Hochschild cohomology in four flavors, Maurer-Cartan and
//! twisting-cochain checkers, perturbation and trivialization, a degreewise
//! extension solver for obstruction detection, Massey products and minimal
//! model transfer.

pub mod bigraded;
pub mod cochain;
pub mod error;
pub mod matrix;
pub mod ring;
pub mod hochschild;
pub mod snf;
pub mod structure;

pub use error::EngineError;
