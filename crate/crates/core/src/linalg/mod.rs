//! Small linear-algebra kernels shared by the FE and reduced-order code:
//! a CSR sparse matrix, reverse Cuthill-McKee ordering, a banded Cholesky
//! factorization and a few dense helpers on top of nalgebra.

mod band;
mod csr;
mod dense;

pub use band::{reverse_cuthill_mckee, BandCholesky};
pub use csr::{CsrMatrix, TripletBuilder};
pub use dense::{lower_triangular_inverse, orthonormalize_columns, sorted_symmetric_eigen};
