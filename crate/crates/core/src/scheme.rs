//! The loosely coupled Robin-Robin stepper, the monolithic oracle, and the
//! discrete energy bookkeeping.
//!
//! One step of the splitting advances the solid first, using the fluid
//! interface values and multiplier from the previous level, and then the
//! fluid, which reads the fresh solid interface velocity. The multiplier is
//! updated coefficient-wise from the Robin coupling relation
//!
//! ```text
//! lambda^{n+1} = lambda^n - alpha * (u^{n+1} - d^{k-1} w^{n+1} + g_D^{n+1})   on the interface
//! ```
//!
//! which is exact because the multiplier space is the nodal trace space of
//! the matched interface mesh.
//!
//! With `k = 1` both subdomains use backward Euler (`q = w`). With `k = 2`
//! the solid is a wave equation in first-order form, advanced with the
//! midpoint Newmark member `(q^{n+1} + q^n)/2 = (w^{n+1} - w^n)/dt`, and `q`
//! is eliminated from the solid solve.

use std::fmt;
use std::io::{self, Write};

use crate::error::SchemeError;
use crate::fem::{
    assemble_interface_load, assemble_interface_mass, assemble_load, assemble_mass,
    assemble_stiffness, embed_interface_matrix, interpolate_trace, scatter_trace_add,
    trace_restrict, DofMap, Field, TraceField,
};
use crate::mesh::{CoupledMesh, Subdomain};
use crate::sparse::{solve_spd_from, BandedLu, CsrMatrix, DEFAULT_TOL};

/// Time discretization of the solid subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeOrder {
    /// `k = 1`: parabolic solid, backward Euler.
    BackwardEuler,
    /// `k = 2`: hyperbolic solid, midpoint Newmark.
    Newmark,
}

impl SchemeOrder {
    pub fn k(self) -> u8 {
        match self {
            SchemeOrder::BackwardEuler => 1,
            SchemeOrder::Newmark => 2,
        }
    }

    pub fn from_k(k: u8) -> Result<Self, SchemeError> {
        match k {
            1 => Ok(SchemeOrder::BackwardEuler),
            2 => Ok(SchemeOrder::Newmark),
            other => Err(SchemeError::InvalidParams(format!(
                "k must be 1 or 2, got {other}"
            ))),
        }
    }
}

impl fmt::Display for SchemeOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.k())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub order: SchemeOrder,
    pub dt: f64,
    /// Robin parameter.
    pub alpha: f64,
    pub nu_f: f64,
    pub nu_s: f64,
    pub t_final: f64,
    pub n_steps: usize,
}

impl SchemeParams {
    pub fn new(
        order: SchemeOrder,
        dt: f64,
        alpha: f64,
        nu_f: f64,
        nu_s: f64,
        t_final: f64,
    ) -> Result<Self, SchemeError> {
        for (name, v) in [
            ("dt", dt),
            ("alpha", alpha),
            ("nu_f", nu_f),
            ("nu_s", nu_s),
            ("t_final", t_final),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SchemeError::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let n_steps = (t_final / dt).round() as usize;
        if n_steps == 0 || (n_steps as f64 * dt - t_final).abs() > 1e-12 {
            return Err(SchemeError::InvalidParams(format!(
                "t_final = {t_final} is not an integer multiple of dt = {dt}"
            )));
        }
        Ok(Self {
            order,
            dt,
            alpha,
            nu_f,
            nu_s,
            t_final,
            n_steps,
        })
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

/// Discrete unknowns at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub step_index: usize,
    pub u: Field,
    pub w: Field,
    pub q: Field,
    pub lambda: TraceField,
}

impl SchemeState {
    pub fn zeros(ops: &Operators) -> Self {
        Self {
            step_index: 0,
            u: Field::zeros(&ops.dofs_f),
            w: Field::zeros(&ops.dofs_s),
            q: Field::zeros(&ops.dofs_s),
            lambda: TraceField::zeros(ops.mass_sigma.n_rows()),
        }
    }

    /// Plain-text checkpoint: the step index, then one line per coefficient
    /// vector (`name v0 v1 ...`).
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.step_index)?;
        for (name, values) in [
            ("u", &self.u.values),
            ("w", &self.w.values),
            ("q", &self.q.values),
            ("lambda", &self.lambda.values),
        ] {
            write!(w, "{name}")?;
            for v in values {
                write!(w, " {v:.17e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Volume forcing and interface data. All zero reproduces the homogeneous
/// coupled problem.
pub trait Sources: Sync {
    fn fluid_force(&self, x: [f64; 2], t: f64) -> f64;
    fn solid_force(&self, x: [f64; 2], t: f64) -> f64;
    /// `q - u` on the interface.
    fn kinematic_data(&self, x: [f64; 2], t: f64) -> f64;
    /// `nu_s grad w . n_s + nu_f grad u . n_f` on the interface.
    fn flux_data(&self, x: [f64; 2], t: f64) -> f64;
    /// When true the steppers skip all source assembly.
    fn is_homogeneous(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroSources;

impl Sources for ZeroSources {
    fn fluid_force(&self, _: [f64; 2], _: f64) -> f64 {
        0.0
    }
    fn solid_force(&self, _: [f64; 2], _: f64) -> f64 {
        0.0
    }
    fn kinematic_data(&self, _: [f64; 2], _: f64) -> f64 {
        0.0
    }
    fn flux_data(&self, _: [f64; 2], _: f64) -> f64 {
        0.0
    }
    fn is_homogeneous(&self) -> bool {
        true
    }
}

/// Assembled matrices for one mesh and parameter set.
#[derive(Debug, Clone)]
pub struct Operators {
    pub dofs_f: DofMap,
    pub dofs_s: DofMap,
    pub mass_f: CsrMatrix,
    pub stiff_f: CsrMatrix,
    pub mass_s: CsrMatrix,
    pub stiff_s: CsrMatrix,
    /// Interface mass over all interface nodes in trace order.
    pub mass_sigma: CsrMatrix,
    solid_lhs: CsrMatrix,
    fluid_lhs: CsrMatrix,
    params: SchemeParams,
}

impl Operators {
    pub fn new(mesh: &CoupledMesh, params: &SchemeParams) -> Self {
        let dofs_f = DofMap::new(mesh, Subdomain::Fluid);
        let dofs_s = DofMap::new(mesh, Subdomain::Solid);
        let mass_f = assemble_mass(mesh, &dofs_f);
        let stiff_f = assemble_stiffness(mesh, &dofs_f);
        let mass_s = assemble_mass(mesh, &dofs_s);
        let stiff_s = assemble_stiffness(mesh, &dofs_s);
        let mass_sigma = assemble_interface_mass(mesh);
        let sigma_f = embed_interface_matrix(&mass_sigma, &dofs_f);
        let sigma_s = embed_interface_matrix(&mass_sigma, &dofs_s);

        let SchemeParams {
            dt,
            alpha,
            nu_f,
            nu_s,
            ..
        } = *params;
        let combine = |a: &CsrMatrix, ca: f64, b: &CsrMatrix, cb: f64, c: &CsrMatrix, cc: f64| {
            a.linear_combination(ca, b, cb)
                .and_then(|ab| ab.linear_combination(1.0, c, cc))
                .expect("operators share the subdomain dof layout")
        };
        let solid_lhs = match params.order {
            SchemeOrder::BackwardEuler => {
                combine(&mass_s, 1.0 / dt, &stiff_s, nu_s, &sigma_s, alpha)
            }
            SchemeOrder::Newmark => combine(
                &mass_s,
                2.0 / (dt * dt),
                &stiff_s,
                0.5 * nu_s,
                &sigma_s,
                alpha / dt,
            ),
        };
        let fluid_lhs = combine(&mass_f, 1.0 / dt, &stiff_f, nu_f, &sigma_f, alpha);

        Self {
            dofs_f,
            dofs_s,
            mass_f,
            stiff_f,
            mass_s,
            stiff_s,
            mass_sigma,
            solid_lhs,
            fluid_lhs,
            params: *params,
        }
    }

    pub fn n_trace(&self) -> usize {
        self.mass_sigma.n_rows()
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    fn check_params(&self, params: &SchemeParams) -> Result<(), SchemeError> {
        let p = &self.params;
        if p.order != params.order
            || p.dt != params.dt
            || p.alpha != params.alpha
            || p.nu_f != params.nu_f
            || p.nu_s != params.nu_s
        {
            return Err(SchemeError::InvalidParams(
                "operators were assembled for different parameters".into(),
            ));
        }
        Ok(())
    }

    fn sigma_norm_sq(&self, trace: &[f64]) -> f64 {
        self.mass_sigma
            .quad_form(trace)
            .expect("trace length matches")
    }
}

fn check_len(a: &[f64], b: &[f64]) -> Result<(), SchemeError> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(SchemeError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        })
    }
}

/// `(v_new - v_old) / dt`.
pub fn ddt(v_new: &[f64], v_old: &[f64], dt: f64) -> Result<Vec<f64>, SchemeError> {
    check_len(v_new, v_old)?;
    Ok(v_new.iter().zip(v_old).map(|(a, b)| (a - b) / dt).collect())
}

/// `(v_new + v_old) / 2`.
pub fn avg(v_new: &[f64], v_old: &[f64]) -> Result<Vec<f64>, SchemeError> {
    check_len(v_new, v_old)?;
    Ok(v_new
        .iter()
        .zip(v_old)
        .map(|(a, b)| 0.5 * (a + b))
        .collect())
}

/// `(v_next - 2 v_cur + v_prev) / dt^2`.
pub fn ddt2(
    v_next: &[f64],
    v_cur: &[f64],
    v_prev: &[f64],
    dt: f64,
) -> Result<Vec<f64>, SchemeError> {
    check_len(v_next, v_cur)?;
    check_len(v_cur, v_prev)?;
    Ok(v_next
        .iter()
        .zip(v_cur)
        .zip(v_prev)
        .map(|((a, b), c)| (a - 2.0 * b + c) / (dt * dt))
        .collect())
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn matvec(m: &CsrMatrix, x: &[f64]) -> Vec<f64> {
    m.spmv(x).expect("operator and field dimensions agree")
}

fn kinematic_trace(mesh: &CoupledMesh, sources: &dyn Sources, t: f64, n: usize) -> Vec<f64> {
    if sources.is_homogeneous() {
        vec![0.0; n]
    } else {
        interpolate_trace(mesh, |x, t| sources.kinematic_data(x, t), t).values
    }
}

/// Solid half-step: returns `(w^{n+1}, q^{n+1})`.
pub fn solid_step(
    params: &SchemeParams,
    mesh: &CoupledMesh,
    ops: &Operators,
    state: &SchemeState,
    sources: &dyn Sources,
    t_next: f64,
) -> Result<(Field, Field), SchemeError> {
    ops.check_params(params)?;
    let SchemeParams {
        dt, alpha, nu_s, ..
    } = *params;
    let n_trace = ops.n_trace();
    let g_d = kinematic_trace(mesh, sources, t_next, n_trace);
    let u_trace = trace_restrict(&state.u, &ops.dofs_f).values;

    // Trace-space Robin data, tested against interface basis functions.
    let mut robin: Vec<f64> = (0..n_trace)
        .map(|i| alpha * (u_trace[i] + g_d[i]) - state.lambda.values[i])
        .collect();

    let mut rhs = match params.order {
        SchemeOrder::BackwardEuler => {
            let mut r = matvec(&ops.mass_s, &state.w.values);
            r.iter_mut().for_each(|v| *v /= dt);
            r
        }
        SchemeOrder::Newmark => {
            let w_trace = trace_restrict(&state.w, &ops.dofs_s).values;
            axpy(&mut robin, alpha / dt, &w_trace);
            let mw = matvec(&ops.mass_s, &state.w.values);
            let mq = matvec(&ops.mass_s, &state.q.values);
            let kw = matvec(&ops.stiff_s, &state.w.values);
            let mut r = vec![0.0; mw.len()];
            axpy(&mut r, 2.0 / (dt * dt), &mw);
            axpy(&mut r, 2.0 / dt, &mq);
            axpy(&mut r, -0.5 * nu_s, &kw);
            r
        }
    };
    let mut interface_rhs = matvec(&ops.mass_sigma, &robin);

    if !sources.is_homogeneous() {
        let force = match params.order {
            SchemeOrder::BackwardEuler => {
                assemble_load(mesh, &ops.dofs_s, |x, t| sources.solid_force(x, t), t_next)
            }
            SchemeOrder::Newmark => {
                let t_n = t_next - dt;
                assemble_load(
                    mesh,
                    &ops.dofs_s,
                    |x, t| 0.5 * (sources.solid_force(x, t) + sources.solid_force(x, t_n)),
                    t_next,
                )
            }
        };
        axpy(&mut rhs, 1.0, &force);
        let flux = assemble_interface_load(mesh, |x, t| sources.flux_data(x, t), t_next);
        axpy(&mut interface_rhs, 1.0, &flux);
    }
    scatter_trace_add(&interface_rhs, &ops.dofs_s, &mut rhs);

    let guess: Vec<f64> = match params.order {
        SchemeOrder::BackwardEuler => state.w.values.clone(),
        SchemeOrder::Newmark => state
            .w
            .values
            .iter()
            .zip(&state.q.values)
            .map(|(w, q)| w + dt * q)
            .collect(),
    };
    let (w_next, _) = solve_spd_from(&ops.solid_lhs, &rhs, Some(&guess), DEFAULT_TOL)
        .map_err(SchemeError::Solid)?;
    let q_next = match params.order {
        SchemeOrder::BackwardEuler => w_next.clone(),
        SchemeOrder::Newmark => w_next
            .iter()
            .zip(&state.w.values)
            .zip(&state.q.values)
            .map(|((wn1, wn), qn)| 2.0 / dt * (wn1 - wn) - qn)
            .collect(),
    };
    Ok((
        Field::new(Subdomain::Solid, w_next),
        Field::new(Subdomain::Solid, q_next),
    ))
}

/// Trace of `d^{k-1} w^{n+1}`: `w^{n+1}` for `k = 1`, `(w^{n+1} - w^n)/dt` for `k = 2`.
fn solid_velocity_trace(
    params: &SchemeParams,
    ops: &Operators,
    state: &SchemeState,
    w_next: &Field,
) -> Vec<f64> {
    let next = trace_restrict(w_next, &ops.dofs_s).values;
    match params.order {
        SchemeOrder::BackwardEuler => next,
        SchemeOrder::Newmark => {
            let prev = trace_restrict(&state.w, &ops.dofs_s).values;
            next.iter()
                .zip(&prev)
                .map(|(a, b)| (a - b) / params.dt)
                .collect()
        }
    }
}

/// Fluid half-step and multiplier update: returns `(u^{n+1}, lambda^{n+1})`.
/// Reads only `u^n`, `lambda^n` and the new solid values.
#[allow(clippy::too_many_arguments)]
pub fn fluid_step(
    params: &SchemeParams,
    mesh: &CoupledMesh,
    ops: &Operators,
    state: &SchemeState,
    w_next: &Field,
    _q_next: &Field,
    sources: &dyn Sources,
    t_next: f64,
) -> Result<(Field, TraceField), SchemeError> {
    ops.check_params(params)?;
    let SchemeParams { dt, alpha, .. } = *params;
    let n_trace = ops.n_trace();
    let g_d = kinematic_trace(mesh, sources, t_next, n_trace);
    let velocity = solid_velocity_trace(params, ops, state, w_next);

    let coupling: Vec<f64> = (0..n_trace)
        .map(|i| state.lambda.values[i] + alpha * (velocity[i] - g_d[i]))
        .collect();
    let mut rhs = matvec(&ops.mass_f, &state.u.values);
    rhs.iter_mut().for_each(|v| *v /= dt);
    scatter_trace_add(&matvec(&ops.mass_sigma, &coupling), &ops.dofs_f, &mut rhs);
    if !sources.is_homogeneous() {
        let force = assemble_load(mesh, &ops.dofs_f, |x, t| sources.fluid_force(x, t), t_next);
        axpy(&mut rhs, 1.0, &force);
    }

    let (u_next, _) = solve_spd_from(&ops.fluid_lhs, &rhs, Some(&state.u.values), DEFAULT_TOL)
        .map_err(SchemeError::Fluid)?;
    let u_next = Field::new(Subdomain::Fluid, u_next);
    let u_trace = trace_restrict(&u_next, &ops.dofs_f).values;
    let lambda = (0..n_trace)
        .map(|i| state.lambda.values[i] - alpha * (u_trace[i] - velocity[i] + g_d[i]))
        .collect();
    Ok((u_next, TraceField::new(lambda)))
}

/// One full splitting step: solid, then fluid and multiplier.
pub fn advance(
    params: &SchemeParams,
    mesh: &CoupledMesh,
    ops: &Operators,
    state: &SchemeState,
    sources: &dyn Sources,
) -> Result<SchemeState, SchemeError> {
    let t_next = params.time(state.step_index + 1);
    let (w, q) = solid_step(params, mesh, ops, state, sources, t_next)?;
    let (u, lambda) = fluid_step(params, mesh, ops, state, &w, &q, sources, t_next)?;
    Ok(SchemeState {
        step_index: state.step_index + 1,
        u,
        w,
        q,
        lambda,
    })
}

/// Stored energy `Z` of one time level.
pub fn energy_z(params: &SchemeParams, ops: &Operators, state: &SchemeState) -> f64 {
    let SchemeParams {
        dt, alpha, nu_s, ..
    } = *params;
    let k = params.order.k() as f64;
    let u_trace = trace_restrict(&state.u, &ops.dofs_f).values;
    0.5 * ops.mass_s.quad_form(&state.q.values).unwrap()
        + 0.5 * ops.mass_f.quad_form(&state.u.values).unwrap()
        + 0.5 * (k - 1.0) * nu_s * ops.stiff_s.quad_form(&state.w.values).unwrap()
        + 0.5 * dt * alpha * ops.sigma_norm_sq(&u_trace)
        + 0.5 * dt / alpha * ops.sigma_norm_sq(&state.lambda.values)
}

/// Dissipation `S^{n+1}` of the step from `prev` to `next`.
pub fn energy_s(
    params: &SchemeParams,
    ops: &Operators,
    prev: &SchemeState,
    next: &SchemeState,
) -> f64 {
    let SchemeParams {
        dt,
        alpha,
        nu_f,
        nu_s,
        ..
    } = *params;
    let k = params.order.k() as f64;
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
    let dq = diff(&next.q.values, &prev.q.values);
    let du = diff(&next.u.values, &prev.u.values);
    let q_mid = match params.order {
        SchemeOrder::BackwardEuler => next.q.clone(),
        SchemeOrder::Newmark => Field::new(
            Subdomain::Solid,
            avg(&next.q.values, &prev.q.values).unwrap(),
        ),
    };
    let jump = diff(
        &trace_restrict(&q_mid, &ops.dofs_s).values,
        &trace_restrict(&prev.u, &ops.dofs_f).values,
    );
    nu_f * dt * ops.stiff_f.quad_form(&next.u.values).unwrap()
        + (2.0 - k) * nu_s * dt * ops.stiff_s.quad_form(&next.w.values).unwrap()
        + 0.5 * (2.0 - k) * ops.mass_s.quad_form(&dq).unwrap()
        + 0.5 * ops.mass_f.quad_form(&du).unwrap()
        + 0.5 * dt * alpha * ops.sigma_norm_sq(&jump)
}

/// Per-level stored energies and per-step dissipations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    pub z: Vec<f64>,
    pub s: Vec<f64>,
}

impl EnergyLedger {
    /// `|Z^n + sum_{m<n} S^{m+1} - Z^0|` for every recorded level.
    pub fn defects(&self) -> Vec<f64> {
        let z0 = self.z.first().copied().unwrap_or(0.0);
        let mut cum = 0.0;
        let mut out = Vec::with_capacity(self.z.len());
        for (n, z) in self.z.iter().enumerate() {
            if n > 0 {
                cum += self.s[n - 1];
            }
            out.push((z + cum - z0).abs());
        }
        out
    }

    /// Largest defect relative to `max(Z^0, floor)`.
    pub fn max_relative_defect(&self, floor: f64) -> f64 {
        let scale = self.z.first().copied().unwrap_or(0.0).max(floor);
        self.defects().into_iter().fold(0.0, f64::max) / scale
    }

    /// CSV with columns `n,Z,S,Z_plus_cumS`; `S` is blank on level 0.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n,Z,S,Z_plus_cumS")?;
        let mut cum = 0.0;
        for (n, z) in self.z.iter().enumerate() {
            if n == 0 {
                writeln!(w, "0,{z:.17e},,{z:.17e}")?;
            } else {
                let s = self.s[n - 1];
                cum += s;
                writeln!(w, "{n},{z:.17e},{s:.17e},{:.17e}", z + cum)?;
            }
        }
        Ok(())
    }
}

/// A time-stepping method over the coupled unknowns.
pub trait Stepper {
    fn step(
        &self,
        params: &SchemeParams,
        mesh: &CoupledMesh,
        ops: &Operators,
        state: &SchemeState,
        sources: &dyn Sources,
    ) -> Result<SchemeState, SchemeError>;
}

/// The loosely coupled splitting.
#[derive(Debug, Clone, Copy, Default)]
pub struct RobinRobin;

impl Stepper for RobinRobin {
    fn step(
        &self,
        params: &SchemeParams,
        mesh: &CoupledMesh,
        ops: &Operators,
        state: &SchemeState,
        sources: &dyn Sources,
    ) -> Result<SchemeState, SchemeError> {
        advance(params, mesh, ops, state, sources)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_state: SchemeState,
    pub ledger: EnergyLedger,
}

/// Runs `params.n_steps` steps of the splitting from `initial`, calling
/// `observer` after every step with the new state and its time.
pub fn run(
    params: &SchemeParams,
    mesh: &CoupledMesh,
    ops: &Operators,
    sources: &dyn Sources,
    initial: SchemeState,
    observer: impl FnMut(&SchemeState, f64),
) -> Result<RunOutcome, SchemeError> {
    run_with(&RobinRobin, params, mesh, ops, sources, initial, observer)
}

/// [`run`] with an arbitrary stepper.
pub fn run_with<S: Stepper + ?Sized>(
    stepper: &S,
    params: &SchemeParams,
    mesh: &CoupledMesh,
    ops: &Operators,
    sources: &dyn Sources,
    initial: SchemeState,
    mut observer: impl FnMut(&SchemeState, f64),
) -> Result<RunOutcome, SchemeError> {
    ops.check_params(params)?;
    if params.order == SchemeOrder::BackwardEuler && initial.q.values != initial.w.values {
        return Err(SchemeError::InvalidParams("k = 1 requires q0 = w0".into()));
    }
    let mut ledger = EnergyLedger {
        z: vec![energy_z(params, ops, &initial)],
        s: Vec::with_capacity(params.n_steps),
    };
    let mut state = initial;
    for _ in 0..params.n_steps {
        let next = stepper.step(params, mesh, ops, &state, sources)?;
        ledger.s.push(energy_s(params, ops, &state, &next));
        ledger.z.push(energy_z(params, ops, &next));
        observer(&next, params.time(next.step_index));
        state = next;
    }
    Ok(RunOutcome {
        final_state: state,
        ledger,
    })
}

/// Initial multiplier: nodal interpolation of the exact flux at `t = 0`.
pub fn lambda0_from_exact<L>(exact_flux: L, mesh: &CoupledMesh) -> TraceField
where
    L: Fn([f64; 2], f64) -> f64,
{
    interpolate_trace(mesh, exact_flux, 0.0)
}

/// Strongly coupled oracle: the same time discretization on each side, but
/// the interface conditions imposed implicitly through a saddle system in
/// `(u, w, lambda)`. The multiplier lives on interface nodes that carry
/// dofs on both sides (the end points are excluded so the constraint is
/// well posed); the returned trace field reads zero at the end points.
#[derive(Debug, Clone)]
pub struct MonolithicStepper {
    params: SchemeParams,
    matrix: CsrMatrix,
    lu: BandedLu,
    /// Trace positions of the multiplier unknowns.
    mult_nodes: Vec<usize>,
    coupling_f: CsrMatrix,
    coupling_s: CsrMatrix,
    n_f: usize,
    n_s: usize,
}

impl MonolithicStepper {
    pub fn new(ops: &Operators, params: &SchemeParams) -> Result<Self, SchemeError> {
        ops.check_params(params)?;
        let SchemeParams { dt, nu_f, nu_s, .. } = *params;
        let (n_f, n_s) = (ops.dofs_f.n_dofs(), ops.dofs_s.n_dofs());
        let map_f = ops.dofs_f.interface_dofs();
        let map_s = ops.dofs_s.interface_dofs();
        let mult_nodes: Vec<usize> = (0..ops.n_trace())
            .filter(|&i| map_f[i].is_some() && map_s[i].is_some())
            .collect();
        let m = mult_nodes.len();
        let mut row_of = vec![None; ops.n_trace()];
        for (a, &i) in mult_nodes.iter().enumerate() {
            row_of[i] = Some(a);
        }
        let coupling = |map: &[Option<usize>], n: usize| {
            let entries: Vec<_> = ops
                .mass_sigma
                .triplets()
                .filter_map(|(i, j, v)| Some((row_of[i]?, map[j]?, v)))
                .collect();
            CsrMatrix::from_triplets(m, n, &entries).expect("indices in range")
        };
        let coupling_f = coupling(map_f, n_f);
        let coupling_s = coupling(map_s, n_s);

        let (mass_coef, stiff_coef, constraint_coef) = match params.order {
            SchemeOrder::BackwardEuler => (1.0 / dt, nu_s, 1.0),
            SchemeOrder::Newmark => (2.0 / (dt * dt), 0.5 * nu_s, 2.0 / dt),
        };
        let mut entries = Vec::new();
        let off_s = n_f;
        let off_l = n_f + n_s;
        for (i, j, v) in ops.mass_f.triplets() {
            entries.push((i, j, v / dt));
        }
        for (i, j, v) in ops.stiff_f.triplets() {
            entries.push((i, j, nu_f * v));
        }
        for (i, j, v) in ops.mass_s.triplets() {
            entries.push((off_s + i, off_s + j, mass_coef * v));
        }
        for (i, j, v) in ops.stiff_s.triplets() {
            entries.push((off_s + i, off_s + j, stiff_coef * v));
        }
        for (a, j, v) in coupling_f.triplets() {
            entries.push((j, off_l + a, -v));
            entries.push((off_l + a, j, -v));
        }
        for (a, j, v) in coupling_s.triplets() {
            entries.push((off_s + j, off_l + a, v));
            entries.push((off_l + a, off_s + j, constraint_coef * v));
        }
        let n = n_f + n_s + m;
        let matrix = CsrMatrix::from_triplets(n, n, &entries).expect("indices in range");
        let lu = BandedLu::factor(&matrix).map_err(SchemeError::Monolithic)?;
        Ok(Self {
            params: *params,
            matrix,
            lu,
            mult_nodes,
            coupling_f,
            coupling_s,
            n_f,
            n_s,
        })
    }

    pub fn system_matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// One implicit step to `t_next`.
    pub fn step_to(
        &self,
        mesh: &CoupledMesh,
        ops: &Operators,
        state: &SchemeState,
        sources: &dyn Sources,
        t_next: f64,
    ) -> Result<SchemeState, SchemeError> {
        let SchemeParams { dt, nu_s, .. } = self.params;
        let (n_f, n_s) = (self.n_f, self.n_s);
        let mut rhs = vec![0.0; n_f + n_s + self.mult_nodes.len()];

        let mut rhs_f = matvec(&ops.mass_f, &state.u.values);
        rhs_f.iter_mut().for_each(|v| *v /= dt);
        let mut rhs_s = match self.params.order {
            SchemeOrder::BackwardEuler => {
                let mut r = matvec(&ops.mass_s, &state.w.values);
                r.iter_mut().for_each(|v| *v /= dt);
                r
            }
            SchemeOrder::Newmark => {
                let mut r = vec![0.0; n_s];
                axpy(
                    &mut r,
                    2.0 / (dt * dt),
                    &matvec(&ops.mass_s, &state.w.values),
                );
                axpy(&mut r, 2.0 / dt, &matvec(&ops.mass_s, &state.q.values));
                axpy(&mut r, -0.5 * nu_s, &matvec(&ops.stiff_s, &state.w.values));
                r
            }
        };
        let mut rhs_l = match self.params.order {
            SchemeOrder::BackwardEuler => vec![0.0; self.mult_nodes.len()],
            SchemeOrder::Newmark => {
                let shift: Vec<f64> = state
                    .w
                    .values
                    .iter()
                    .zip(&state.q.values)
                    .map(|(w, q)| 2.0 / dt * w + q)
                    .collect();
                matvec(&self.coupling_s, &shift)
            }
        };
        if !sources.is_homogeneous() {
            axpy(
                &mut rhs_f,
                1.0,
                &assemble_load(mesh, &ops.dofs_f, |x, t| sources.fluid_force(x, t), t_next),
            );
            let force = match self.params.order {
                SchemeOrder::BackwardEuler => {
                    assemble_load(mesh, &ops.dofs_s, |x, t| sources.solid_force(x, t), t_next)
                }
                SchemeOrder::Newmark => {
                    let t_n = t_next - dt;
                    assemble_load(
                        mesh,
                        &ops.dofs_s,
                        |x, t| 0.5 * (sources.solid_force(x, t) + sources.solid_force(x, t_n)),
                        t_next,
                    )
                }
            };
            axpy(&mut rhs_s, 1.0, &force);
            let flux = assemble_interface_load(mesh, |x, t| sources.flux_data(x, t), t_next);
            scatter_trace_add(&flux, &ops.dofs_s, &mut rhs_s);
            let g_d = matvec(
                &ops.mass_sigma,
                &kinematic_trace(mesh, sources, t_next, ops.n_trace()),
            );
            for (a, &i) in self.mult_nodes.iter().enumerate() {
                rhs_l[a] += g_d[i];
            }
        }
        rhs[..n_f].copy_from_slice(&rhs_f);
        rhs[n_f..n_f + n_s].copy_from_slice(&rhs_s);
        rhs[n_f + n_s..].copy_from_slice(&rhs_l);

        let (x, _) = self
            .lu
            .solve_refined(&self.matrix, &rhs, DEFAULT_TOL)
            .map_err(SchemeError::Monolithic)?;
        let u = x[..n_f].to_vec();
        let w = x[n_f..n_f + n_s].to_vec();
        let mut lambda = vec![0.0; ops.n_trace()];
        for (a, &i) in self.mult_nodes.iter().enumerate() {
            lambda[i] = x[n_f + n_s + a];
        }
        let q = match self.params.order {
            SchemeOrder::BackwardEuler => w.clone(),
            SchemeOrder::Newmark => w
                .iter()
                .zip(&state.w.values)
                .zip(&state.q.values)
                .map(|((wn1, wn), qn)| 2.0 / dt * (wn1 - wn) - qn)
                .collect(),
        };
        Ok(SchemeState {
            step_index: state.step_index + 1,
            u: Field::new(Subdomain::Fluid, u),
            w: Field::new(Subdomain::Solid, w),
            q: Field::new(Subdomain::Solid, q),
            lambda: TraceField::new(lambda),
        })
    }

    /// Interface mismatch `<q - u, mu>` for every multiplier basis function.
    pub fn constraint_residual(&self, state: &SchemeState) -> Vec<f64> {
        let qs = matvec(&self.coupling_s, &state.q.values);
        let uf = matvec(&self.coupling_f, &state.u.values);
        qs.iter().zip(&uf).map(|(a, b)| a - b).collect()
    }
}

impl Stepper for MonolithicStepper {
    fn step(
        &self,
        params: &SchemeParams,
        mesh: &CoupledMesh,
        ops: &Operators,
        state: &SchemeState,
        sources: &dyn Sources,
    ) -> Result<SchemeState, SchemeError> {
        if *params != self.params {
            return Err(SchemeError::InvalidParams(
                "stepper built for different parameters".into(),
            ));
        }
        self.step_to(mesh, ops, state, sources, params.time(state.step_index + 1))
    }
}

/// One monolithic step with a freshly factored saddle system.
pub fn monolithic_step(
    params: &SchemeParams,
    mesh: &CoupledMesh,
    ops: &Operators,
    state: &SchemeState,
    sources: &dyn Sources,
    t_next: f64,
) -> Result<SchemeState, SchemeError> {
    MonolithicStepper::new(ops, params)?.step_to(mesh, ops, state, sources, t_next)
}

#[cfg(test)]
mod tests;
