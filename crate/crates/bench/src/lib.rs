//! Fixtures shared by the benchmarks.

use rrsplit::harness::exact_initial_state;
use rrsplit::{
    uniform_split_mesh, CaseName, CoupledMesh, CsrMatrix, ManufacturedCase, Operators,
    SchemeParams, SchemeState,
};

/// A mesh, its operators and an exact initial state for one case.
pub struct Setup {
    pub case: ManufacturedCase,
    pub mesh: CoupledMesh,
    pub params: SchemeParams,
    pub ops: Operators,
    pub state: SchemeState,
}

impl Setup {
    /// Uniform mesh with `n` cells per side and step `1/n`.
    pub fn uniform(name: CaseName, n: usize) -> Self {
        let case = ManufacturedCase::new(name);
        let mesh = uniform_split_mesh(n).expect("valid resolution");
        let dt = 1.0 / n as f64;
        let params =
            SchemeParams::new(case.order, dt, 1.0, 1.0, 1.0, dt).expect("valid parameters");
        let ops = Operators::new(&mesh, &params);
        let state = exact_initial_state(&case, &mesh, &ops);
        Self {
            case,
            mesh,
            params,
            ops,
            state,
        }
    }

    /// Fluid mass plus stiffness, the typical SPD system of one half step.
    pub fn fluid_system(&self) -> CsrMatrix {
        self.ops
            .mass_f
            .linear_combination(1.0 / self.params.dt, &self.ops.stiff_f, self.params.nu_f)
            .expect("same shape")
    }
}
