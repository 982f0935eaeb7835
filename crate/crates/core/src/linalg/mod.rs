mod cn;
mod csr;
mod krylov;

pub use cn::{stack, unstack, BoundaryPair, CnSystem, KronOperator};
pub use csr::CsrMatrix;
pub use krylov::{krylov_solve, KrylovSolution, LinearOperator, SolverOptions};
