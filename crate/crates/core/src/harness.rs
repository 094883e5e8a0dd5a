//! Convergence studies, energy audits and cut-off reports, with their CSV
//! and gnuplot output.

use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cases::{CaseName, ManufacturedCase};
use crate::cutoff::{self, AssumptionReport, CutoffConfig};
use crate::error::HarnessError;
use crate::fem::{h1_semi_error, interpolate, l2_error, Field, TraceField};
use crate::mesh::{
    slanted_interface_mesh, uniform_split_mesh, CoupledMesh, InterfaceGeometry, Subdomain,
};
use crate::scheme::{
    lambda0_from_exact, run_with, EnergyLedger, MonolithicStepper, Operators, RobinRobin,
    RunOutcome, SchemeOrder, SchemeParams, SchemeState, Stepper, ZeroSources,
};

/// How the mesh is tied to the time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshPolicy {
    /// `uniform_split_mesh(round(1/dt))`.
    HEqualsDt,
    /// `slanted_interface_mesh(log2(1/dt) - 2)`.
    SlantedLevels,
}

impl MeshPolicy {
    pub fn for_geometry(geometry: InterfaceGeometry) -> Self {
        match geometry {
            InterfaceGeometry::Horizontal { .. } => MeshPolicy::HEqualsDt,
            InterfaceGeometry::Slanted { .. } => MeshPolicy::SlantedLevels,
        }
    }

    pub fn build(self, dt: f64) -> Result<CoupledMesh, HarnessError> {
        match self {
            MeshPolicy::HEqualsDt => Ok(uniform_split_mesh((1.0 / dt).round() as usize)?),
            MeshPolicy::SlantedLevels => {
                let level = (1.0 / dt).log2().round() as i64 - 2;
                if level < 0 {
                    return Err(HarnessError::Config(format!(
                        "dt = {dt} is coarser than slanted level 0"
                    )));
                }
                Ok(slanted_interface_mesh(level as usize)?)
            }
        }
    }
}

/// Which solver advances the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    RobinRobin,
    Monolithic,
}

/// Error measures, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Norm {
    L2FinalU,
    L2FinalW,
    L2FinalQ,
    AccumGradU,
    AccumGradW,
}

impl Norm {
    pub const ALL: [Norm; 5] = [
        Norm::L2FinalU,
        Norm::L2FinalW,
        Norm::L2FinalQ,
        Norm::AccumGradU,
        Norm::AccumGradW,
    ];

    /// Column suffix in the CSV header.
    pub fn label(self) -> &'static str {
        match self {
            Norm::L2FinalU => "U",
            Norm::L2FinalW => "W",
            Norm::L2FinalQ => "Q",
            Norm::AccumGradU => "GradU",
            Norm::AccumGradW => "GradW",
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The norms reported for a case by default: `U`, `W`, plus `Q` for `k = 2`
/// and the accumulated gradients when `with_gradients` is set.
pub fn default_norms(order: SchemeOrder, with_gradients: bool) -> Vec<Norm> {
    let mut norms = vec![Norm::L2FinalU, Norm::L2FinalW];
    if order == SchemeOrder::Newmark {
        norms.push(Norm::L2FinalQ);
    }
    if with_gradients {
        norms.extend([Norm::AccumGradU, Norm::AccumGradW]);
    }
    norms
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub case: CaseName,
    /// Strictly decreasing.
    pub dt_list: Vec<f64>,
    pub final_time: f64,
    pub alpha: f64,
    pub nu_f: f64,
    pub nu_s: f64,
    pub mesh_policy: MeshPolicy,
    pub norms: Vec<Norm>,
    pub method: Method,
    pub output: Option<PathBuf>,
}

impl StudyConfig {
    /// Defaults: `T = 0.25`, unit coefficients, the case's natural mesh
    /// family, `U`/`W` (and `Q` for `k = 2`) final errors, Robin-Robin.
    pub fn new(case: CaseName, dt_list: Vec<f64>) -> Self {
        let c = ManufacturedCase::new(case);
        Self {
            case,
            dt_list,
            final_time: 0.25,
            alpha: 1.0,
            nu_f: 1.0,
            nu_s: 1.0,
            mesh_policy: MeshPolicy::for_geometry(c.geometry),
            norms: default_norms(c.order, false),
            method: Method::RobinRobin,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.dt_list.is_empty() {
            return Err(HarnessError::Config("empty dt list".into()));
        }
        if self.dt_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(HarnessError::Config(
                "dt list must be strictly decreasing".into(),
            ));
        }
        if self.norms.is_empty() {
            return Err(HarnessError::Config("no norms requested".into()));
        }
        let case = ManufacturedCase::new(self.case);
        if MeshPolicy::for_geometry(case.geometry) != self.mesh_policy {
            return Err(HarnessError::Config(format!(
                "mesh policy {:?} does not fit the interface of {}",
                self.mesh_policy, self.case
            )));
        }
        for &dt in &self.dt_list {
            SchemeParams::new(
                case.order,
                dt,
                self.alpha,
                self.nu_f,
                self.nu_s,
                self.final_time,
            )?;
        }
        Ok(())
    }

    fn case(&self) -> ManufacturedCase {
        ManufacturedCase::new(self.case).with_coefficients(self.nu_f, self.nu_s)
    }
}

/// Interpolated exact data at `t = 0`, with the multiplier taken as the
/// fluid flux `nu_f grad u . n_f`.
pub fn exact_initial_state(
    case: &ManufacturedCase,
    mesh: &CoupledMesh,
    ops: &Operators,
) -> SchemeState {
    let u = interpolate(mesh, &ops.dofs_f, |x, t| case.u(x, t), 0.0);
    let w = interpolate(mesh, &ops.dofs_s, |x, t| case.w(x, t), 0.0);
    let q = match case.order {
        SchemeOrder::BackwardEuler => w.clone(),
        SchemeOrder::Newmark => interpolate(mesh, &ops.dofs_s, |x, t| case.q(x, t), 0.0),
    };
    SchemeState {
        step_index: 0,
        u,
        w,
        q,
        lambda: lambda0_from_exact(|x, t| case.l_consistent(x, t), mesh),
    }
}

/// Everything produced by one manufactured-solution run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub mesh: CoupledMesh,
    pub ops: Operators,
    pub params: SchemeParams,
    pub outcome: RunOutcome,
    /// Final `L2` errors of `u`, `w`, `q`.
    pub final_l2: [f64; 3],
    /// `(dt sum_n |grad(exact - numerical)(t_n)|^2)^(1/2)` for `u` and `w`.
    pub accumulated_gradient: [f64; 2],
}

impl Simulation {
    pub fn error(&self, norm: Norm) -> f64 {
        match norm {
            Norm::L2FinalU => self.final_l2[0],
            Norm::L2FinalW => self.final_l2[1],
            Norm::L2FinalQ => self.final_l2[2],
            Norm::AccumGradU => self.accumulated_gradient[0],
            Norm::AccumGradW => self.accumulated_gradient[1],
        }
    }
}

/// Runs one manufactured case from exact initial data to `final_time`.
pub fn simulate(
    case: &ManufacturedCase,
    mesh: CoupledMesh,
    dt: f64,
    final_time: f64,
    alpha: f64,
    method: Method,
) -> Result<Simulation, HarnessError> {
    let params = SchemeParams::new(case.order, dt, alpha, case.nu_f, case.nu_s, final_time)?;
    let ops = Operators::new(&mesh, &params);
    let initial = exact_initial_state(case, &mesh, &ops);

    let mut grad_sq = [0.0; 2];
    let observer = |s: &SchemeState, t: f64| {
        let eu = h1_semi_error(&mesh, &ops.dofs_f, &s.u, |x, t| case.grad_u(x, t), t);
        let ew = h1_semi_error(&mesh, &ops.dofs_s, &s.w, |x, t| case.grad_w(x, t), t);
        grad_sq[0] += dt * eu * eu;
        grad_sq[1] += dt * ew * ew;
    };
    let stepper: Box<dyn Stepper> = match method {
        Method::RobinRobin => Box::new(RobinRobin),
        Method::Monolithic => Box::new(MonolithicStepper::new(&ops, &params)?),
    };
    let outcome = run_with(
        stepper.as_ref(),
        &params,
        &mesh,
        &ops,
        case,
        initial,
        observer,
    )?;

    let t = params.t_final;
    let s = &outcome.final_state;
    let final_l2 = [
        l2_error(&mesh, &ops.dofs_f, &s.u, |x, t| case.u(x, t), t),
        l2_error(&mesh, &ops.dofs_s, &s.w, |x, t| case.w(x, t), t),
        l2_error(&mesh, &ops.dofs_s, &s.q, |x, t| case.q(x, t), t),
    ];
    Ok(Simulation {
        mesh,
        ops,
        params,
        outcome,
        final_l2,
        accumulated_gradient: grad_sq.map(f64::sqrt),
    })
}

/// One row of a [`ConvergenceTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub dt: f64,
    /// One entry per table norm; NaN when the row failed.
    pub errors: Vec<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub case: CaseName,
    /// Sorted in CSV column order.
    pub norms: Vec<Norm>,
    pub rows: Vec<TableRow>,
}

impl ConvergenceTable {
    pub fn dts(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.dt).collect()
    }

    pub fn errors(&self, norm: Norm) -> Option<Vec<f64>> {
        let j = self.norms.iter().position(|n| *n == norm)?;
        Some(self.rows.iter().map(|r| r.errors[j]).collect())
    }

    /// Observed orders between adjacent rows; `None` on the first row and
    /// wherever an error is not positive.
    pub fn rates(&self, norm: Norm) -> Option<Vec<Option<f64>>> {
        Some(rates_between(&self.dts(), &self.errors(norm)?))
    }

    pub fn failures(&self) -> impl Iterator<Item = (f64, &str)> {
        self.rows
            .iter()
            .filter_map(|r| r.failure.as_deref().map(|f| (r.dt, f)))
    }

    /// Header `dt,errU,rateU,...`; six significant digits; undefined rates
    /// print as `nan`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "dt")?;
        for n in &self.norms {
            write!(w, ",err{0},rate{0}", n.label())?;
        }
        writeln!(w)?;
        let rates: Vec<Vec<Option<f64>>> = self
            .norms
            .iter()
            .map(|n| self.rates(*n).expect("norm is in the table"))
            .collect();
        for (i, row) in self.rows.iter().enumerate() {
            write!(w, "{}", sig6(row.dt))?;
            for (j, e) in row.errors.iter().enumerate() {
                write!(
                    w,
                    ",{},{}",
                    sig6(*e),
                    rates[j][i].map_or("nan".to_string(), sig6)
                )?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Six significant digits in scientific notation.
pub fn sig6(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.5e}")
    } else {
        "nan".into()
    }
}

/// `log2(e_prev / e_cur)` for a sequence of halved steps.
pub fn rates(errors: &[f64]) -> Vec<Option<f64>> {
    let dts: Vec<f64> = (0..errors.len()).map(|i| 0.5f64.powi(i as i32)).collect();
    rates_between(&dts, errors)
}

/// `ln(e_prev / e_cur) / ln(dt_prev / dt_cur)` between adjacent entries.
pub fn rates_between(dts: &[f64], errors: &[f64]) -> Vec<Option<f64>> {
    (0..errors.len())
        .map(|i| {
            if i == 0 || !(errors[i] > 0.0 && errors[i - 1] > 0.0) || !errors[i].is_finite() {
                return None;
            }
            Some((errors[i - 1] / errors[i]).ln() / (dts[i - 1] / dts[i]).ln())
        })
        .collect()
}

/// Runs every row of a study (in parallel) and collects the table in `dt`
/// order. A failing row is recorded with NaN errors and its message.
pub fn run_study(cfg: &StudyConfig) -> Result<ConvergenceTable, HarnessError> {
    cfg.validate()?;
    let case = cfg.case();
    let mut norms = cfg.norms.clone();
    norms.sort();
    norms.dedup();

    let rows =
        cfg.dt_list
            .par_iter()
            .map(|&dt| {
                let result = cfg.mesh_policy.build(dt).and_then(|mesh| {
                    simulate(&case, mesh, dt, cfg.final_time, cfg.alpha, cfg.method)
                });
                match result {
                    Ok(sim) => TableRow {
                        dt,
                        errors: norms.iter().map(|n| sim.error(*n)).collect(),
                        failure: None,
                    },
                    Err(e) => TableRow {
                        dt,
                        errors: vec![f64::NAN; norms.len()],
                        failure: Some(e.to_string()),
                    },
                }
            })
            .collect();
    Ok(ConvergenceTable {
        case: cfg.case,
        norms,
        rows,
    })
}

/// Final-time `L2` distance between the Robin-Robin and monolithic solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGap {
    pub dt: f64,
    pub u: f64,
    pub w: f64,
}

impl OracleGap {
    pub fn combined(&self) -> f64 {
        self.u.hypot(self.w)
    }
}

/// Runs both solvers on the same mesh and data and measures how far apart
/// they end up.
pub fn oracle_gap(cfg: &StudyConfig, dt: f64) -> Result<OracleGap, HarnessError> {
    let case = cfg.case();
    let mesh = cfg.mesh_policy.build(dt)?;
    let rr = simulate(
        &case,
        mesh.clone(),
        dt,
        cfg.final_time,
        cfg.alpha,
        Method::RobinRobin,
    )?;
    let mono = simulate(
        &case,
        mesh,
        dt,
        cfg.final_time,
        cfg.alpha,
        Method::Monolithic,
    )?;
    let dist = |m: &crate::sparse::CsrMatrix, a: &Field, b: &Field| {
        let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
        m.quad_form(&d).expect("same layout").max(0.0).sqrt()
    };
    let (a, b) = (&rr.outcome.final_state, &mono.outcome.final_state);
    Ok(OracleGap {
        dt,
        u: dist(&rr.ops.mass_f, &a.u, &b.u),
        w: dist(&rr.ops.mass_s, &a.w, &b.w),
    })
}

/// Parameters of an energy audit on `uniform_split_mesh(mesh_n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditConfig {
    pub order: SchemeOrder,
    pub dt: f64,
    pub n_steps: usize,
    pub alpha: f64,
    pub nu_f: f64,
    pub nu_s: f64,
    pub mesh_n: usize,
    pub seed: u64,
    /// Random initial data when true, zero data otherwise.
    pub random_data: bool,
}

impl AuditConfig {
    pub fn new(order: SchemeOrder, dt: f64, alpha: f64, seed: u64) -> Self {
        Self {
            order,
            dt,
            n_steps: 20,
            alpha,
            nu_f: 1.0,
            nu_s: 1.0,
            mesh_n: 8,
            seed,
            random_data: true,
        }
    }
}

pub const AUDIT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub config: AuditConfig,
    pub z0: f64,
    /// `max_n |Z^n + sum S - Z^0| / max(Z^0, tiny)`.
    pub max_relative_defect: f64,
    pub pass: bool,
    pub ledger: EnergyLedger,
}

/// Uniform `[-1, 1)` coefficients for every unknown, from a seeded ChaCha
/// stream (`q = w` for `k = 1`).
pub fn random_state(ops: &Operators, order: SchemeOrder, seed: u64) -> SchemeState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| {
        (0..n)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect::<Vec<f64>>()
    };
    let u = Field::new(Subdomain::Fluid, draw(ops.dofs_f.n_dofs()));
    let w = Field::new(Subdomain::Solid, draw(ops.dofs_s.n_dofs()));
    let q = match order {
        SchemeOrder::BackwardEuler => w.clone(),
        SchemeOrder::Newmark => Field::new(Subdomain::Solid, draw(ops.dofs_s.n_dofs())),
    };
    let lambda = TraceField::new(draw(ops.n_trace()));
    SchemeState {
        step_index: 0,
        u,
        w,
        q,
        lambda,
    }
}

/// Runs the splitting with zero sources and checks the discrete energy
/// balance at every step.
pub fn energy_audit(cfg: &AuditConfig) -> Result<AuditReport, HarnessError> {
    let mesh = uniform_split_mesh(cfg.mesh_n)?;
    let t_final = cfg.dt * cfg.n_steps as f64;
    let params = SchemeParams::new(cfg.order, cfg.dt, cfg.alpha, cfg.nu_f, cfg.nu_s, t_final)?;
    let ops = Operators::new(&mesh, &params);
    let initial = if cfg.random_data {
        random_state(&ops, cfg.order, cfg.seed)
    } else {
        SchemeState::zeros(&ops)
    };
    let outcome = run_with(
        &RobinRobin,
        &params,
        &mesh,
        &ops,
        &ZeroSources,
        initial,
        |_, _| {},
    )?;
    let z0 = outcome.ledger.z[0];
    let max_relative_defect = outcome.ledger.max_relative_defect(f64::MIN_POSITIVE);
    Ok(AuditReport {
        config: *cfg,
        z0,
        max_relative_defect,
        pass: max_relative_defect <= AUDIT_TOLERANCE,
        ledger: outcome.ledger,
    })
}

/// One line of a cut-off report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffRow {
    pub dt: f64,
    pub grad_energy: f64,
    pub closed_form: f64,
    /// `grad_energy / (1 + ln(1/dt))`.
    pub ratio: f64,
    pub trace_measure: f64,
    pub assumptions: AssumptionReport,
}

pub fn cutoff_report(dt_list: &[f64]) -> Result<Vec<CutoffRow>, HarnessError> {
    dt_list
        .iter()
        .map(|&dt| {
            let cfg =
                CutoffConfig::unchecked(dt).map_err(|e| HarnessError::Config(e.to_string()))?;
            let assumptions = cutoff::verify_assumptions(&cfg);
            Ok(CutoffRow {
                dt,
                grad_energy: assumptions.grad_energy,
                closed_form: cutoff::reference_closed_form(dt),
                ratio: assumptions.growth.measured,
                trace_measure: assumptions.trace_measure.measured,
                assumptions,
            })
        })
        .collect()
}

/// Least-squares slope of `grad_energy` against `ln(1/dt)`.
pub fn cutoff_log_slope(rows: &[CutoffRow]) -> f64 {
    let xs: Vec<f64> = rows.iter().map(|r| (1.0 / r.dt).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.grad_energy).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn write_cutoff_csv<W: Write>(rows: &[CutoffRow], mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "dt,grad_energy,closed_form,ratio,trace_measure,precondition,range_ok,boundary_ok,trace_ok,growth_ok"
    )?;
    for r in rows {
        let a = &r.assumptions;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            sig6(r.dt),
            sig6(r.grad_energy),
            sig6(r.closed_form),
            sig6(r.ratio),
            sig6(r.trace_measure),
            a.precondition,
            a.range.pass,
            a.boundary.pass,
            a.trace_measure.pass,
            a.growth.pass
        )?;
    }
    Ok(())
}

/// A gnuplot script plotting error columns of a convergence CSV on log-log
/// axes.
pub fn gnuplot_script(csv: &Path, norms: &[Norm], image: &Path) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set logscale xy\n");
    s.push_str("set key left top\n");
    s.push_str("set xlabel 'dt'\nset ylabel 'error'\n");
    s.push_str("set terminal pngcairo size 800,600\n");
    s.push_str(&format!("set output '{}'\n", image.display()));
    let plots: Vec<String> = norms
        .iter()
        .enumerate()
        .map(|(i, n)| {
            format!(
                "'{}' using 1:{} skip 1 with linespoints title 'err{}'",
                csv.display(),
                2 + 2 * i,
                n.label()
            )
        })
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}

/// `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>, HarnessError> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                return None;
            }
            Some(match line.split_once('=') {
                Some((k, v)) if !k.trim().is_empty() => {
                    Ok((k.trim().to_string(), v.trim().to_string()))
                }
                _ => Err(HarnessError::Config(format!(
                    "line {}: expected key=value, got {line:?}",
                    i + 1
                ))),
            })
        })
        .collect()
}

/// `dt_max, dt_max/2, ...` down to `dt_min` (inclusive up to rounding).
pub fn dyadic_steps(dt_max: f64, dt_min: f64) -> Result<Vec<f64>, HarnessError> {
    if !(dt_max > 0.0 && dt_min > 0.0 && dt_min <= dt_max) {
        return Err(HarnessError::Config(format!(
            "need 0 < dt_min <= dt_max, got {dt_min}, {dt_max}"
        )));
    }
    let mut out = vec![dt_max];
    while out.last().copied().unwrap_or(0.0) / 2.0 >= dt_min * (1.0 - 1e-9) {
        let next = out.last().copied().unwrap_or(0.0) / 2.0;
        out.push(next);
    }
    Ok(out)
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "robin-robin" | "rr" => Ok(Method::RobinRobin),
            "monolithic" => Ok(Method::Monolithic),
            other => Err(HarnessError::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_examples() {
        let r = rates(&[0.04, 0.02]);
        assert_eq!(r[0], None);
        assert!((r[1].unwrap() - 1.0).abs() < 1e-15);
        let r = rates(&[4.48e-6, 1.01e-6]);
        assert!((r[1].unwrap() - 2.149).abs() < 1e-3);
        assert_eq!(rates(&[3.0, 3.0])[1], Some(0.0));
        assert_eq!(rates(&[0.0, 1.0])[1], None);
        assert_eq!(rates(&[1.0, 0.0])[1], None);
    }

    #[test]
    fn csv_layout() {
        let table = ConvergenceTable {
            case: CaseName::PhUniform,
            norms: vec![Norm::L2FinalU, Norm::L2FinalW, Norm::L2FinalQ],
            rows: vec![
                TableRow {
                    dt: 0.25,
                    errors: vec![4e-6, 2e-6, 1e-5],
                    failure: None,
                },
                TableRow {
                    dt: 0.125,
                    errors: vec![2e-6, 1e-6, 5e-6],
                    failure: None,
                },
            ],
        };
        let csv = table.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "dt,errU,rateU,errW,rateW,errQ,rateQ");
        assert_eq!(
            lines[1],
            "2.50000e-1,4.00000e-6,nan,2.00000e-6,nan,1.00000e-5,nan"
        );
        assert_eq!(
            lines[2],
            "1.25000e-1,2.00000e-6,1.00000e0,1.00000e-6,1.00000e0,5.00000e-6,1.00000e0"
        );
    }

    #[test]
    fn dyadic_lists() {
        assert_eq!(
            dyadic_steps(0.25, 0.03125).unwrap(),
            vec![0.25, 0.125, 0.0625, 0.03125]
        );
        assert_eq!(dyadic_steps(0.5, 0.5).unwrap(), vec![0.5]);
        assert!(dyadic_steps(0.1, 0.2).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = StudyConfig::new(CaseName::PpConforming, vec![0.25, 0.125]);
        assert!(cfg.validate().is_ok());
        cfg.dt_list = vec![0.125, 0.25];
        assert!(cfg.validate().is_err());
        cfg.dt_list = vec![0.3];
        assert!(cfg.validate().is_err());
        let mut cfg = StudyConfig::new(CaseName::PpSlanted, vec![0.25]);
        assert_eq!(cfg.mesh_policy, MeshPolicy::SlantedLevels);
        cfg.mesh_policy = MeshPolicy::HEqualsDt;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn key_value_parsing() {
        let kv = parse_key_values("# header\ncase = ph_uniform\n\ndt=0.25 # trailing\n").unwrap();
        assert_eq!(
            kv,
            vec![
                ("case".into(), "ph_uniform".into()),
                ("dt".into(), "0.25".into())
            ]
        );
        assert!(parse_key_values("just words").is_err());
    }

    #[test]
    fn zero_case_is_exact() {
        let mut cfg = StudyConfig::new(CaseName::Zero, vec![0.25, 0.125]);
        cfg.norms = Norm::ALL.to_vec();
        let t = run_study(&cfg).unwrap();
        for n in Norm::ALL {
            let e = t.errors(n).unwrap();
            assert!(e.iter().all(|v| *v < 1e-12));
            assert!(t.rates(n).unwrap().iter().all(Option::is_none));
        }
    }

    #[test]
    fn study_is_deterministic() {
        let cfg = StudyConfig::new(CaseName::PpConforming, vec![0.25, 0.125]);
        let a = run_study(&cfg).unwrap().to_csv_string();
        let b = run_study(&cfg).unwrap().to_csv_string();
        assert_eq!(a, b);
    }

    #[test]
    fn audits() {
        let mut cfg = AuditConfig::new(SchemeOrder::BackwardEuler, 0.05, 1.0, 7);
        assert!(energy_audit(&cfg).unwrap().pass);
        cfg = AuditConfig::new(SchemeOrder::Newmark, 0.5, 10.0, 7);
        assert!(energy_audit(&cfg).unwrap().pass);
        cfg.random_data = false;
        let r = energy_audit(&cfg).unwrap();
        assert_eq!(r.z0, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn cutoff_rows() {
        let rows = cutoff_report(&[0.25, 0.125]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].trace_measure, 0.5);
        assert!(rows.iter().all(|r| r.ratio <= cutoff::GROWTH_BOUND));
        let mut buf = Vec::new();
        write_cutoff_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("dt,grad_energy,closed_form,ratio,trace_measure"));
    }

    #[test]
    fn gnuplot_references_csv() {
        let s = gnuplot_script(
            Path::new("out/table.csv"),
            &[Norm::L2FinalU, Norm::L2FinalW],
            Path::new("p.png"),
        );
        assert!(s.contains("'out/table.csv' using 1:2"));
        assert!(s.contains("using 1:4"));
        assert!(s.contains("set logscale xy"));
    }
}
