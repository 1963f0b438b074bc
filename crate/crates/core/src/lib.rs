//! Bit-exact low-precision formulations of RNS/NTT kernels used by lattice-based
//! homomorphic encryption.
//!
//! * [`modarith`]: moduli, Barrett/Montgomery/Shoup reduction, chunking.
//! * [`bat`]: offline compilation of known operands into dense `bp`-bit matrices.
//! * [`lpmm`]: the low-precision matrix engine (32-bit accumulators) and modular matmul.
//! * [`nttmat`]: reference NTTs and the layout-invariant 3-step negacyclic NTT.
//! * [`rnsconv`]: CRT, basis conversion, rescale and limb-wise addition.
//! * [`bench`]: parameter sets, verification runs, benchmarks and reports.

pub mod bat;
pub mod bench;
pub mod error;
pub mod lpmm;
pub mod matrix;
pub mod modarith;
pub mod nttmat;
pub mod rnsconv;

pub use error::{Error, Result};
pub use matrix::{ChunkMatrix, Matrix, ResidueMatrix};
pub use modarith::{Domain, Modulus, Reduction, Strategy};
