//! Discrete heat kernel of `L = ½a²∂² + b∂` and the functionals
//! `H(t)`, `𝒢_T`, `𝒢_{T,α}` built from it.

mod generator;
mod semigroup;
mod table;

pub use generator::{build_generator, Advection, Boundary, OperatorSpec};
pub use semigroup::{Semigroup, SemigroupMethod};
pub use table::{KernelOptions, KernelTable, SmallTimeCheck};
