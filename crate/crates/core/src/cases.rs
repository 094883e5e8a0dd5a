//! Manufactured solutions with hand-derived forcing and interface data.
//!
//! Every exact field here has the separable form `a * exp(r t) * shape(x)`
//! with `shape` either `sin(pi x1) sin(pi x2)` or `x1 (1 - x1) x2 (1 - x2)`,
//! so time derivatives, gradients and Laplacians are closed forms.
//! [`residual_oracle`] re-derives the PDE residuals by finite differences
//! from the fields alone, as an independent check on those closed forms.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::CaseError;
use crate::mesh::InterfaceGeometry;
use crate::scheme::{SchemeOrder, Sources};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseName {
    /// `k = 1`, horizontal interface, fluid and solid decaying at different
    /// rates (nonzero interface data).
    PpUniform,
    /// `k = 2`, horizontal interface, polynomial profile.
    PhUniform,
    /// `k = 1`, slanted interface, polynomial profile.
    PpSlanted,
    /// `k = 1`, horizontal interface, one smooth field across the interface.
    PpConforming,
    /// Identically zero solution.
    Zero,
}

impl CaseName {
    pub const ALL: [CaseName; 5] = [
        CaseName::PpUniform,
        CaseName::PhUniform,
        CaseName::PpSlanted,
        CaseName::PpConforming,
        CaseName::Zero,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseName::PpUniform => "pp_uniform",
            CaseName::PhUniform => "ph_uniform",
            CaseName::PpSlanted => "pp_slanted",
            CaseName::PpConforming => "pp_conforming",
            CaseName::Zero => "zero",
        }
    }
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseName {
    type Err = CaseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CaseName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CaseError::UnknownCase(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    SinSin,
    Bubble,
    Zero,
}

impl Shape {
    fn value(self, [x, y]: [f64; 2]) -> f64 {
        match self {
            Shape::SinSin => (PI * x).sin() * (PI * y).sin(),
            Shape::Bubble => x * (1.0 - x) * y * (1.0 - y),
            Shape::Zero => 0.0,
        }
    }

    fn gradient(self, [x, y]: [f64; 2]) -> [f64; 2] {
        match self {
            Shape::SinSin => [
                PI * (PI * x).cos() * (PI * y).sin(),
                PI * (PI * x).sin() * (PI * y).cos(),
            ],
            Shape::Bubble => [
                (1.0 - 2.0 * x) * y * (1.0 - y),
                x * (1.0 - x) * (1.0 - 2.0 * y),
            ],
            Shape::Zero => [0.0, 0.0],
        }
    }

    fn laplacian(self, p: [f64; 2]) -> f64 {
        let [x, y] = p;
        match self {
            Shape::SinSin => -2.0 * PI * PI * self.value(p),
            Shape::Bubble => -2.0 * y * (1.0 - y) - 2.0 * x * (1.0 - x),
            Shape::Zero => 0.0,
        }
    }
}

/// `amplitude * exp(rate * t) * shape(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Profile {
    amplitude: f64,
    rate: f64,
    shape: Shape,
}

impl Profile {
    const ZERO: Profile = Profile {
        amplitude: 0.0,
        rate: 0.0,
        shape: Shape::Zero,
    };

    fn amp(&self, t: f64) -> f64 {
        self.amplitude * (self.rate * t).exp()
    }

    fn value(&self, x: [f64; 2], t: f64) -> f64 {
        self.amp(t) * self.shape.value(x)
    }

    fn dt(&self, x: [f64; 2], t: f64) -> f64 {
        self.rate * self.value(x, t)
    }

    fn gradient(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let a = self.amp(t);
        self.shape.gradient(x).map(|g| a * g)
    }

    fn laplacian(&self, x: [f64; 2], t: f64) -> f64 {
        self.amp(t) * self.shape.laplacian(x)
    }

    fn time_derivative(&self) -> Profile {
        Profile {
            amplitude: self.amplitude * self.rate,
            ..*self
        }
    }
}

const POLY_AMPLITUDE: f64 = 1e-3;

/// A closed-form exact solution of the coupled problem together with the
/// forcing and interface data it induces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase {
    pub name: CaseName,
    pub order: SchemeOrder,
    pub geometry: InterfaceGeometry,
    pub nu_f: f64,
    pub nu_s: f64,
    u: Profile,
    w: Profile,
    q: Profile,
}

/// Looks a case up by its CLI name.
pub fn get_case(name: &str) -> Result<ManufacturedCase, CaseError> {
    Ok(ManufacturedCase::new(name.parse()?))
}

impl ManufacturedCase {
    /// The case with unit diffusion coefficients.
    pub fn new(name: CaseName) -> Self {
        let sine = |rate| Profile {
            amplitude: 1.0,
            rate,
            shape: Shape::SinSin,
        };
        let bubble = Profile {
            amplitude: POLY_AMPLITUDE,
            rate: 1.0,
            shape: Shape::Bubble,
        };
        let (order, geometry, u, w) = match name {
            CaseName::PpUniform => (
                SchemeOrder::BackwardEuler,
                InterfaceGeometry::UNIFORM,
                sine(-2.0 * PI * PI),
                sine(-2.0 * PI),
            ),
            CaseName::PhUniform => (
                SchemeOrder::Newmark,
                InterfaceGeometry::UNIFORM,
                bubble,
                bubble,
            ),
            CaseName::PpSlanted => (
                SchemeOrder::BackwardEuler,
                InterfaceGeometry::SLANTED,
                bubble,
                bubble,
            ),
            CaseName::PpConforming => (
                SchemeOrder::BackwardEuler,
                InterfaceGeometry::UNIFORM,
                sine(-1.0),
                sine(-1.0),
            ),
            CaseName::Zero => (
                SchemeOrder::BackwardEuler,
                InterfaceGeometry::UNIFORM,
                Profile::ZERO,
                Profile::ZERO,
            ),
        };
        let q = match order {
            SchemeOrder::BackwardEuler => w,
            SchemeOrder::Newmark => w.time_derivative(),
        };
        Self {
            name,
            order,
            geometry,
            nu_f: 1.0,
            nu_s: 1.0,
            u,
            w,
            q,
        }
    }

    /// Same fields, different diffusion coefficients (the forcing and flux
    /// data follow).
    pub fn with_coefficients(mut self, nu_f: f64, nu_s: f64) -> Self {
        self.nu_f = nu_f;
        self.nu_s = nu_s;
        self
    }

    pub fn u(&self, x: [f64; 2], t: f64) -> f64 {
        self.u.value(x, t)
    }

    pub fn grad_u(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.u.gradient(x, t)
    }

    pub fn w(&self, x: [f64; 2], t: f64) -> f64 {
        self.w.value(x, t)
    }

    pub fn grad_w(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.w.gradient(x, t)
    }

    pub fn q(&self, x: [f64; 2], t: f64) -> f64 {
        self.q.value(x, t)
    }

    /// `d_t u - nu_f lap u`.
    pub fn f_f(&self, x: [f64; 2], t: f64) -> f64 {
        self.u.dt(x, t) - self.nu_f * self.u.laplacian(x, t)
    }

    /// `d_t q - nu_s lap w`.
    pub fn f_s(&self, x: [f64; 2], t: f64) -> f64 {
        self.q.dt(x, t) - self.nu_s * self.w.laplacian(x, t)
    }

    /// Kinematic interface data `q - u`.
    pub fn g_d(&self, x: [f64; 2], t: f64) -> f64 {
        self.q(x, t) - self.u(x, t)
    }

    /// Flux interface data `nu_s grad w . n_s + nu_f grad u . n_f`.
    pub fn g_n(&self, x: [f64; 2], t: f64) -> f64 {
        let n = self.geometry.fluid_normal();
        let (gu, gw) = (self.grad_u(x, t), self.grad_w(x, t));
        self.nu_f * (gu[0] * n[0] + gu[1] * n[1]) - self.nu_s * (gw[0] * n[0] + gw[1] * n[1])
    }

    /// The multiplier as reference with each experiment.
    pub fn exact_multiplier(&self, [x1, x2]: [f64; 2], t: f64) -> f64 {
        match self.name {
            CaseName::PpUniform => PI * (-2.0 * PI * t).exp() * (PI * x1).sin() * (PI * x2).cos(),
            CaseName::PhUniform => POLY_AMPLITUDE * t.exp() * x1 * (1.0 - x1) * (1.0 - 2.0 * x2),
            CaseName::PpSlanted => {
                POLY_AMPLITUDE / 5f64.sqrt()
                    * t.exp()
                    * (2.0 * x1 * (1.0 - x1) * (1.0 - 2.0 * x2)
                        - (1.0 - 2.0 * x1) * x2 * (1.0 - x2))
            }
            CaseName::PpConforming | CaseName::Zero => self.l_consistent([x1, x2], t),
        }
    }

    /// `nu_f grad u . n_f`, the multiplier implied by the fluid field.
    pub fn l_consistent(&self, x: [f64; 2], t: f64) -> f64 {
        let n = self.geometry.fluid_normal();
        let g = self.grad_u(x, t);
        self.nu_f * (g[0] * n[0] + g[1] * n[1])
    }
}

impl Sources for ManufacturedCase {
    fn fluid_force(&self, x: [f64; 2], t: f64) -> f64 {
        self.f_f(x, t)
    }
    fn solid_force(&self, x: [f64; 2], t: f64) -> f64 {
        self.f_s(x, t)
    }
    fn kinematic_data(&self, x: [f64; 2], t: f64) -> f64 {
        self.g_d(x, t)
    }
    fn flux_data(&self, x: [f64; 2], t: f64) -> f64 {
        self.g_n(x, t)
    }
    fn is_homogeneous(&self) -> bool {
        self.name == CaseName::Zero
    }
}

/// Finite-difference step in space for [`residual_oracle`].
pub const ORACLE_SPACE_STEP: f64 = 1e-4;
/// Finite-difference step in time for [`residual_oracle`].
pub const ORACLE_TIME_STEP: f64 = 1e-5;

/// Largest residuals found by [`residual_oracle`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OracleResiduals {
    pub fluid_pde: f64,
    pub solid_pde: f64,
    pub kinematic: f64,
    pub flux: f64,
}

impl OracleResiduals {
    pub fn max(&self) -> f64 {
        self.fluid_pde
            .max(self.solid_pde)
            .max(self.kinematic)
            .max(self.flux)
    }

    pub fn interface_max(&self) -> f64 {
        self.kinematic.max(self.flux)
    }
}

fn fd_dt(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let k = ORACLE_TIME_STEP;
    (f(t + k) - f(t - k)) / (2.0 * k)
}

fn fd_laplacian(f: impl Fn([f64; 2]) -> f64, [x, y]: [f64; 2]) -> f64 {
    let h = ORACLE_SPACE_STEP;
    (f([x + h, y]) + f([x - h, y]) + f([x, y + h]) + f([x, y - h]) - 4.0 * f([x, y])) / (h * h)
}

fn fd_gradient(f: impl Fn([f64; 2]) -> f64, [x, y]: [f64; 2]) -> [f64; 2] {
    let h = ORACLE_SPACE_STEP;
    [
        (f([x + h, y]) - f([x - h, y])) / (2.0 * h),
        (f([x, y + h]) - f([x, y - h])) / (2.0 * h),
    ]
}

/// Checks the synthesized data against finite-difference derivatives of the
/// exact fields. Each sample point contributes a volume residual on the side
/// of the interface it lies on, and an interface residual at the interface
/// point with the same `x1`.
pub fn residual_oracle(
    case: &ManufacturedCase,
    sample_points: &[[f64; 2]],
    t: f64,
) -> OracleResiduals {
    let mut out = OracleResiduals::default();
    let n = case.geometry.fluid_normal();
    for &p in sample_points {
        if case.geometry.offset(p) < 0.0 {
            let r = fd_dt(|s| case.u(p, s), t)
                - case.nu_f * fd_laplacian(|x| case.u(x, t), p)
                - case.f_f(p, t);
            out.fluid_pde = out.fluid_pde.max(r.abs());
        } else {
            let r = fd_dt(|s| case.q(p, s), t)
                - case.nu_s * fd_laplacian(|x| case.w(x, t), p)
                - case.f_s(p, t);
            out.solid_pde = out.solid_pde.max(r.abs());
        }

        let on = [p[0], case.geometry.height_at(p[0])];
        let kin = case.q(on, t) - case.u(on, t) - case.g_d(on, t);
        out.kinematic = out.kinematic.max(kin.abs());
        let gu = fd_gradient(|x| case.u(x, t), on);
        let gw = fd_gradient(|x| case.w(x, t), on);
        let flux =
            case.nu_f * (gu[0] * n[0] + gu[1] * n[1]) - case.nu_s * (gw[0] * n[0] + gw[1] * n[1]);
        out.flux = out.flux.max((flux - case.g_n(on, t)).abs());
    }
    out
}
