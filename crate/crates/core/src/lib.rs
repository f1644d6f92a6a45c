//! Koopman spectra of nonlinear infinite-dimensional systems from snapshot
//! data, and identification of PDE / graphon dynamics through the matrix
//! logarithm of the lifted Koopman matrix.
//!
//! The pipeline is:
//!
//! 1. [`simulate`] integrates a dictionary-defined model with the method of
//!    lines and records snapshot pairs `(u_k, φ^{t_s}(u_k))`.
//! 2. [`observables`] evaluates scalar functionals of the sampled fields.
//! 3. [`koopman`] assembles the data matrices, fits the Koopman matrix and
//!    extracts eigenvalues.
//! 4. [`identify`] recovers the dictionary coefficients from the first column
//!    of `log(U) / t_s`.

pub mod cli;
pub mod error;
pub mod fields;
pub mod identify;
pub mod koopman;
pub mod numkernel;
pub mod observables;
pub mod operators;
pub mod simulate;

pub use error::{Error, Result};
pub use fields::{Field, Grid1D};
pub use identify::{
    direct_identify, lifting_identify, reconstruct_operator, ts_convergence_study,
    ConvergenceReport, IdentificationResult,
};
pub use koopman::{build_data_matrices, edmd_fit, spectrum, KoopmanFit, SpectrumResult};
pub use observables::{FunctionalSpec, WeightSpec};
pub use operators::{Dictionary, KernelSpec, TermSpec};
pub use simulate::{
    generate_pairs, integrate, Boundary, InitialConditionFamily, Model, SnapshotDataset,
};
