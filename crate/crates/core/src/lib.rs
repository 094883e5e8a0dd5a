//! Partitioned Robin-Robin time stepping for coupled parabolic-parabolic
//! (`k = 1`) and parabolic-hyperbolic (`k = 2`) interface problems on the
//! unit square, discretized with P1 finite elements on node-matched meshes.
//!
//! The crate is organized bottom-up:
//!
//! * [`sparse`]: CSR storage, conjugate gradients, banded LU.
//! * [`mesh`]: the uniform and slanted-interface mesh families.
//! * [`fem`]: P1 assembly, traces, error norms.
//! * [`scheme`]: the loosely coupled stepper, the monolithic oracle and the
//!   discrete energy ledger.
//! * [`cases`]: manufactured solutions with synthesized data.
//! * [`cutoff`]: the cut-off function used in the error analysis, with its
//!   verification routines.
//! * [`harness`]: convergence studies, energy audits, CSV output.

pub mod cases;
pub mod cutoff;
pub mod error;
pub mod fem;
pub mod harness;
pub mod mesh;
pub mod scheme;
pub mod sparse;

pub use cases::{CaseName, ManufacturedCase};
pub use error::{
    CaseError, CutoffError, HarnessError, MeshError, SchemeError, SolveError, SparseError,
};
pub use fem::{DofMap, Field, TraceField};
pub use mesh::{
    slanted_interface_mesh, uniform_split_mesh, CoupledMesh, InterfaceGeometry, Subdomain,
};
pub use scheme::{
    EnergyLedger, MonolithicStepper, Operators, SchemeOrder, SchemeParams, SchemeState, Sources,
    ZeroSources,
};
pub use sparse::{solve_general, solve_spd, solve_spd_from, CsrMatrix, SolveReport};
