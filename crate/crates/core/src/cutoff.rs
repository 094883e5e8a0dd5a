//! The cut-off function on the model fluid domain `[0,1]^2`, where the
//! interface is the top edge `x2 = 1`.
//!
//! The lower half is split at `x1 = 1/2` into `K5` (left) and `K4` (right).
//! The upper half is split by the lines `x1 = D(x2)` and `1 - x1 = D(x2)`,
//! `D(x2) = 1 - (1 - dt) x2`, into the side strips `K1`, `K3` and the
//! central region `K2` where the function is identically one.

use std::fmt;

use crate::error::CutoffError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffConfig {
    dt: f64,
}

impl CutoffConfig {
    /// Requires `0 < dt < 1/2`.
    pub fn new(dt: f64) -> Result<Self, CutoffError> {
        if dt > 0.0 && dt < 0.5 {
            Ok(Self { dt })
        } else {
            Err(CutoffError::TimeStep(dt))
        }
    }

    /// Any `0 < dt < 1`; for [`verify_assumptions`] on out-of-range steps.
    pub fn unchecked(dt: f64) -> Result<Self, CutoffError> {
        if dt > 0.0 && dt < 1.0 {
            Ok(Self { dt })
        } else {
            Err(CutoffError::TimeStep(dt))
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn precondition_holds(&self) -> bool {
        self.dt < 0.5
    }

    fn c(&self) -> f64 {
        1.0 - self.dt
    }

    fn denominator(&self, x2: f64) -> f64 {
        1.0 - self.c() * x2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    K1,
    K2,
    K3,
    K4,
    K5,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = match self {
            Region::K1 => 1,
            Region::K2 => 2,
            Region::K3 => 3,
            Region::K4 => 4,
            Region::K5 => 5,
        };
        write!(f, "K{i}")
    }
}

fn check_point([x1, x2]: [f64; 2]) -> Result<(), CutoffError> {
    if (0.0..=1.0).contains(&x1) && (0.0..=1.0).contains(&x2) {
        Ok(())
    } else {
        Err(CutoffError::OutsideDomain(x1, x2))
    }
}

/// Region membership; ties resolve as `K1 > K3 > K4 > K5 > K2`.
pub fn classify(x: [f64; 2], cfg: &CutoffConfig) -> Result<Region, CutoffError> {
    check_point(x)?;
    let [x1, x2] = x;
    if x2 > 0.5 {
        let d = cfg.denominator(x2);
        if x1 <= d && x1 <= 0.5 {
            return Ok(Region::K1);
        }
        if 1.0 - x1 <= d && x1 > 0.5 {
            return Ok(Region::K3);
        }
        return Ok(Region::K2);
    }
    // x2 <= 1/2: K1/K3 can still claim the seam x2 = 1/2 only from above.
    if x1 >= 0.5 {
        Ok(Region::K4)
    } else {
        Ok(Region::K5)
    }
}

fn branch(region: Region, [x1, x2]: [f64; 2], cfg: &CutoffConfig) -> f64 {
    let c = cfg.c();
    match region {
        Region::K1 => x1 / cfg.denominator(x2),
        Region::K2 => 1.0,
        Region::K3 => (1.0 - x1) / cfg.denominator(x2),
        Region::K4 => 4.0 * x2 * (1.0 - x1) * c,
        Region::K5 => 4.0 * x1 * x2 * c,
    }
}

fn branch_gradient(region: Region, [x1, x2]: [f64; 2], cfg: &CutoffConfig) -> [f64; 2] {
    let c = cfg.c();
    let d = cfg.denominator(x2);
    match region {
        Region::K1 => [1.0 / d, x1 * c / (d * d)],
        Region::K2 => [0.0, 0.0],
        Region::K3 => [-1.0 / d, (1.0 - x1) * c / (d * d)],
        Region::K4 => [-4.0 * x2 * c, 4.0 * (1.0 - x1) * c],
        Region::K5 => [4.0 * x2 * c, 4.0 * x1 * c],
    }
}

/// The branch value before clamping.
pub fn phi_unclamped(x: [f64; 2], cfg: &CutoffConfig) -> Result<f64, CutoffError> {
    Ok(branch(classify(x, cfg)?, x, cfg))
}

/// The cut-off function, clamped to `[0, 1]`.
pub fn phi(x: [f64; 2], cfg: &CutoffConfig) -> Result<f64, CutoffError> {
    Ok(phi_unclamped(x, cfg)?.clamp(0.0, 1.0))
}

/// Gradient of the branch selected by [`classify`].
pub fn grad_phi(x: [f64; 2], cfg: &CutoffConfig) -> Result<[f64; 2], CutoffError> {
    Ok(branch_gradient(classify(x, cfg)?, x, cfg))
}

/// Length of `{x in Sigma : phi(x) != 1}`: the two end strips
/// `[0, dt)` and `(1 - dt, 1]`, each at most half of the interface.
pub fn trace_not_one_measure(cfg: &CutoffConfig) -> f64 {
    2.0 * cfg.dt.min(0.5)
}

/// Largest jump of `phi` across the seam `x2 = 1/2`, sampled at `n + 1`
/// points.
pub fn seam_jump(cfg: &CutoffConfig, n: usize) -> f64 {
    (0..=n)
        .map(|i| {
            let x1 = i as f64 / n as f64;
            let below = if x1 >= 0.5 { Region::K4 } else { Region::K5 };
            let above = classify([x1, 0.5 + 1e-15], cfg).expect("inside the square");
            (branch(below, [x1, 0.5], cfg) - branch(above, [x1, 0.5], cfg)).abs()
        })
        .fold(0.0, f64::max)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 0 { 1.0 } else { p1 };
                let pn1 = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
                let step = pn / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn integrate(rule: &[(f64, f64)], a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    rule.iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

fn sorted_breaks(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|p| *p > lo && *p < hi);
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    pts
}

/// `int_{[0,1]^2} |grad phi|^2` by piecewise tensor Gauss quadrature.
///
/// The outer `x2` integral is split where the region layout changes and is
/// graded geometrically towards `x2 = 1`, where the strips narrow to width
/// `dt` and the integrand grows like `1/D^2`. For each outer node the inner
/// `x1` integral is split at the region boundaries and each piece uses the
/// branch selected at its midpoint, on which the integrand is polynomial.
/// `quadrature_level` multiplies the number of outer subintervals by
/// `2^level`.
pub fn grad_energy(cfg: &CutoffConfig, quadrature_level: u32) -> f64 {
    let outer = gauss_legendre(8);
    let inner = gauss_legendre(4);
    let dt = cfg.dt;
    let c = cfg.c();
    let refine = 1usize << quadrature_level;

    let line = |x2: f64| -> f64 {
        let d = cfg.denominator(x2);
        let breaks = sorted_breaks(vec![0.5, d, 1.0 - d], 0.0, 1.0);
        breaks
            .windows(2)
            .map(|w| {
                let region = classify([0.5 * (w[0] + w[1]), x2], cfg).expect("inside the square");
                integrate(&inner, w[0], w[1], |x1| {
                    let g = branch_gradient(region, [x1, x2], cfg);
                    g[0] * g[0] + g[1] * g[1]
                })
            })
            .sum()
    };

    let mut x2_breaks = vec![0.0, 0.5];
    let x2_star = 1.0 / (2.0 * c);
    let uniform = |a: f64, b: f64, n: usize| (1..n).map(move |i| a + (b - a) * i as f64 / n as f64);
    if x2_star < 1.0 {
        x2_breaks.extend(uniform(0.5, x2_star, refine));
        x2_breaks.push(x2_star);
        // geometric in D from 1/2 down to dt, ratio 2^(-1/refine)
        let decades = (0.5 / dt).log2();
        let n = ((decades.ceil() as usize).max(1)) * refine;
        for i in 1..n {
            let d = 0.5 * (dt / 0.5f64).powf(i as f64 / n as f64);
            x2_breaks.push((1.0 - d) / c);
        }
    } else {
        x2_breaks.extend(uniform(0.5, 1.0, 2 * refine));
    }
    x2_breaks.push(1.0);
    let x2_breaks = sorted_breaks(x2_breaks, 0.0, 1.0);

    x2_breaks
        .windows(2)
        .map(|w| {
            if w[1] <= 0.5 {
                // polynomial integrand of degree 2 in each variable
                integrate(&inner, w[0], w[1], line)
            } else {
                integrate(&outer, w[0], w[1], line)
            }
        })
        .sum()
}

/// The reference closed form of the gradient energy.
pub fn reference_closed_form(dt: f64) -> f64 {
    let c = 1.0 - dt;
    (2.0 / c + 2.0 * c / 3.0) * (1.0 / (2.0 * dt)).ln() + 2.0 * c / 3.0 + 2.0 / (3.0 * c)
}

/// The coefficient of `ln(1/dt)` in the gradient energy.
pub fn log_coefficient(dt: f64) -> f64 {
    let c = 1.0 - dt;
    2.0 / c + 2.0 * c / 3.0
}

/// Upper bound enforced on `grad_energy / (1 + ln(1/dt))`.
pub const GROWTH_BOUND: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemCheck {
    pub pass: bool,
    pub measured: f64,
}

/// Outcome of [`verify_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    pub dt: f64,
    /// `dt < 1/2`.
    pub precondition: bool,
    /// `0 <= phi <= 1`; `measured` is the largest unclamped branch value.
    pub range: ItemCheck,
    /// `phi = 0` on the left, right and bottom edges; `measured` is the
    /// largest sampled `|phi|` there.
    pub boundary: ItemCheck,
    /// `|{phi != 1}|` on the interface equals `2 dt`; `measured` is that
    /// length.
    pub trace_measure: ItemCheck,
    /// `grad_energy / (1 + ln(1/dt)) <= GROWTH_BOUND`; `measured` is the ratio.
    pub growth: ItemCheck,
    pub grad_energy: f64,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.precondition
            && self.range.pass
            && self.boundary.pass
            && self.trace_measure.pass
            && self.growth.pass
    }
}

const SAMPLES: usize = 400;

/// Checks the four assumed properties of the cut-off function at one time
/// step, on dense samples where a property is pointwise.
pub fn verify_assumptions(cfg: &CutoffConfig) -> AssumptionReport {
    let grid = |i: usize| i as f64 / SAMPLES as f64;

    let mut max_unclamped = f64::NEG_INFINITY;
    let mut in_range = true;
    for i in 0..=SAMPLES {
        for j in 0..=SAMPLES {
            let x = [grid(i), grid(j)];
            max_unclamped = max_unclamped.max(phi_unclamped(x, cfg).expect("grid inside"));
            let p = phi(x, cfg).expect("grid inside");
            in_range &= (0.0..=1.0).contains(&p);
        }
    }

    let mut boundary_max: f64 = 0.0;
    for i in 0..=SAMPLES {
        let s = grid(i);
        for x in [[0.0, s], [1.0, s], [s, 0.0]] {
            boundary_max = boundary_max.max(phi(x, cfg).expect("edge inside").abs());
        }
    }

    let measure = trace_not_one_measure(cfg);
    let energy = grad_energy(cfg, 2);
    let ratio = energy / (1.0 + (1.0 / cfg.dt).ln());

    AssumptionReport {
        dt: cfg.dt,
        precondition: cfg.precondition_holds(),
        range: ItemCheck {
            pass: in_range,
            measured: max_unclamped,
        },
        boundary: ItemCheck {
            pass: boundary_max < 1e-12,
            measured: boundary_max,
        },
        trace_measure: ItemCheck {
            pass: measure == 2.0 * cfg.dt,
            measured: measure,
        },
        growth: ItemCheck {
            pass: ratio <= GROWTH_BOUND,
            measured: ratio,
        },
        grad_energy: energy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn cfg(dt: f64) -> CutoffConfig {
        CutoffConfig::new(dt).unwrap()
    }

    /// Exact integral for the reconstructed regions, summed strip by strip:
    /// lower quadrants, the band `1/2 < x2 < 1/(2c)` where the side strips
    /// meet at `x1 = 1/2`, and the graded strips up to the interface.
    fn exact_energy(dt: f64) -> f64 {
        let c = 1.0 - dt;
        let lower = 4.0 / 3.0 * c * c;
        let band =
            (2.0 - 2.0 / (1.0 + dt)) / (2.0 * c) + c / 72.0 * (8.0 - 8.0 / (1.0 + dt).powi(3));
        let strips = (1.0 / c + c / 3.0) * (1.0 / (2.0 * dt)).ln();
        lower + 2.0 * (band + strips)
    }

    #[test]
    fn rejects_large_steps() {
        assert!(CutoffConfig::new(0.5).is_err());
        assert!(CutoffConfig::new(0.0).is_err());
        assert!(CutoffConfig::unchecked(0.6).is_ok());
    }

    #[test]
    fn classification_examples() {
        let c = cfg(0.25);
        assert_eq!(classify([0.5, 0.9], &c).unwrap(), Region::K2);
        assert_eq!(classify([0.1, 1.0], &c).unwrap(), Region::K1);
        assert_eq!(classify([0.25, 0.25], &c).unwrap(), Region::K5);
        assert_eq!(classify([0.75, 0.25], &c).unwrap(), Region::K4);
        assert_eq!(classify([0.9, 1.0], &c).unwrap(), Region::K3);
        assert_eq!(classify([0.5, 0.5], &c).unwrap(), Region::K4);
        assert!(classify([1.1, 0.5], &c).is_err());
    }

    #[test]
    fn phi_examples() {
        let c = cfg(0.25);
        assert_eq!(phi([0.5, 0.9], &c).unwrap(), 1.0);
        for x2 in [0.0, 0.3, 0.5, 0.7, 1.0] {
            assert_eq!(phi([0.0, x2], &c).unwrap(), 0.0);
        }
        assert!((phi([0.125, 1.0], &c).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let c = cfg(0.25);
        assert_eq!(grad_phi([0.5, 0.9], &c).unwrap(), [0.0, 0.0]);
        let g = grad_phi([0.25, 0.25], &c).unwrap();
        assert!((g[0] - 0.75).abs() < 1e-15 && (g[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let h = 1e-7;
        let mut checked = 0;
        while checked < 1000 {
            let dt = [0.25, 0.125, 0.0625][checked % 3];
            let c = cfg(dt);
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let r = classify(x, &c).unwrap();
            let stencil = [
                [x[0] + h, x[1]],
                [x[0] - h, x[1]],
                [x[0], x[1] + h],
                [x[0], x[1] - h],
            ];
            if stencil
                .iter()
                .any(|p| classify(*p, &c).map(|q| q != r).unwrap_or(true))
            {
                continue;
            }
            let f = |p: [f64; 2]| branch(r, p, &c);
            let fd = [
                (f(stencil[0]) - f(stencil[1])) / (2.0 * h),
                (f(stencil[2]) - f(stencil[3])) / (2.0 * h),
            ];
            let g = grad_phi(x, &c).unwrap();
            assert!(
                (g[0] - fd[0]).abs() < 1e-6 && (g[1] - fd[1]).abs() < 1e-6,
                "{x:?} {g:?} {fd:?}"
            );
            checked += 1;
        }
    }

    #[test]
    fn trace_measure_is_two_dt() {
        assert_eq!(trace_not_one_measure(&cfg(0.25)), 0.5);
        assert_eq!(trace_not_one_measure(&cfg(0.125)), 0.25);
        let c = cfg(0.125);
        for i in 1..10_000 {
            let x1 = 0.125 + 0.75 * i as f64 / 10_000.0;
            assert_eq!(phi([x1, 1.0], &c).unwrap(), 1.0);
        }
        for i in 0..100 {
            let x1 = 0.125 * i as f64 / 100.0;
            assert!(phi([x1, 1.0], &c).unwrap() < 1.0);
            assert!(phi([1.0 - x1, 1.0], &c).unwrap() < 1.0);
        }
    }

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for n in [1, 2, 4, 8] {
            let rule = gauss_legendre(n);
            assert!((rule.iter().map(|r| r.1).sum::<f64>() - 2.0).abs() < 1e-14);
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 0 {
                2.0 / (deg + 1) as f64
            } else {
                0.0
            };
            let got: f64 = rule.iter().map(|&(x, w)| w * x.powi(deg as i32)).sum();
            assert!((got - exact).abs() < 1e-13, "n = {n}");
            let even = 2 * n - 2;
            let got: f64 = rule.iter().map(|&(x, w)| w * x.powi(even as i32)).sum();
            assert!((got - 2.0 / (even + 1) as f64).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn quadrature_matches_exact_integral() {
        for k in 2..=10 {
            let dt = 0.5f64.powi(k);
            let q = grad_energy(&cfg(dt), 1);
            let e = exact_energy(dt);
            assert!((q - e).abs() < 1e-8 * e, "dt = {dt}: {q} vs {e}");
        }
    }

    #[test]
    fn quadrature_levels_converge() {
        let c = cfg(0.25);
        let (a, b) = (grad_energy(&c, 2), grad_energy(&c, 3));
        assert!((a - b).abs() < 1e-4);
    }

    #[test]
    fn reference_closed_form_at_quarter() {
        let v = reference_closed_form(0.25);
        let expected = (8.0 / 3.0 + 0.5) * 2f64.ln() + 0.5 + 8.0 / 9.0;
        assert!((v - expected).abs() < 1e-14);
        assert!((v - 3.584).abs() < 1e-3);
    }

    #[test]
    fn growth_is_bounded_and_monotone() {
        let mut prev = 0.0;
        for k in 2..=10 {
            let dt = 0.5f64.powi(k);
            let e = grad_energy(&cfg(dt), 1);
            assert!(e / (1.0 + (1.0 / dt).ln()) <= GROWTH_BOUND);
            assert!(e > prev);
            prev = e;
        }
    }

    #[test]
    fn seam_jump_is_order_dt() {
        for k in 2..=8 {
            let dt = 0.5f64.powi(k);
            assert!(seam_jump(&cfg(dt), 1000) <= 3.0 * dt);
        }
    }

    #[test]
    fn assumptions_hold_at_eighth() {
        let r = verify_assumptions(&cfg(0.125));
        assert!(r.all_pass(), "{r:?}");
        assert!(r.boundary.measured < 1e-12);
        assert!(r.range.measured <= 1.0);
    }

    #[test]
    fn large_step_violates_precondition() {
        let r = verify_assumptions(&CutoffConfig::unchecked(0.6).unwrap());
        assert!(!r.precondition);
        assert!(!r.all_pass());
    }
}
