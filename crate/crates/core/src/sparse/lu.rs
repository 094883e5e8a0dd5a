use std::collections::VecDeque;

use super::{norm2, CsrMatrix, SolveReport};
use crate::error::{SolveError, SparseError};

/// Pivots below this fraction of `max |a_ij|` are treated as singular.
const SINGULAR_RATIO: f64 = 1e-14;
const MAX_REFINEMENT_STEPS: usize = 8;

/// LU factorization with partial pivoting of a band-reordered square matrix.
///
/// The matrix is symmetrically permuted with reverse Cuthill-McKee on the
/// pattern of `A + A^T` so the band stays narrow on mesh-like graphs. Row
/// interchanges widen the upper band to `kl + ku`, which the storage allows for.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    pivots: Vec<usize>,
    /// `perm[new] = old`.
    perm: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self, SolveError> {
        if a.n_rows() != a.n_cols() {
            return Err(SparseError::NotSquare {
                n_rows: a.n_rows(),
                n_cols: a.n_cols(),
            }
            .into());
        }
        let n = a.n_rows();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, j, _) in a.triplets() {
            let (pi, pj) = (inv[i], inv[j]);
            if pi > pj {
                kl = kl.max(pi - pj);
            } else {
                ku = ku.max(pj - pi);
            }
        }
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            band: vec![0.0; n * width],
            pivots: vec![0; n],
            perm,
        };
        for (i, j, v) in a.triplets() {
            let (pi, pj) = (inv[i], inv[j]);
            *lu.at_mut(pi, pj) += v;
        }

        let threshold = SINGULAR_RATIO * a.max_abs();
        for k in 0..n {
            let last_row = (k + kl).min(n.saturating_sub(1));
            let last_col = (k + kl + ku).min(n.saturating_sub(1));
            let mut p = k;
            let mut best = lu.at(k, k).abs();
            for i in k + 1..=last_row {
                let v = lu.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= threshold {
                return Err(SolveError::Singular {
                    step: k,
                    pivot: best,
                });
            }
            lu.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a_kj, a_pj) = (lu.at(k, j), lu.at(p, j));
                    *lu.at_mut(k, j) = a_pj;
                    *lu.at_mut(p, j) = a_kj;
                }
            }
            let pivot = lu.at(k, k);
            for i in k + 1..=last_row {
                let l = lu.at(i, k) / pivot;
                *lu.at_mut(i, k) = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let u = lu.at(k, j);
                        *lu.at_mut(i, j) -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.band[i * self.width + (j + self.kl - i)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.band[i * self.width + (j + self.kl - i)]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidth of the reordered matrix.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    /// One forward/backward substitution, no refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SparseError> {
        if b.len() != self.n {
            return Err(SparseError::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            if yk != 0.0 {
                let last = (k + self.kl).min(n - 1);
                for (i, yi) in y.iter_mut().enumerate().take(last + 1).skip(k + 1) {
                    *yi -= self.at(i, k) * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = y[k];
            let last = (k + self.kl + self.ku).min(n - 1);
            for (j, yj) in y.iter().enumerate().take(last + 1).skip(k + 1) {
                acc -= self.at(k, j) * yj;
            }
            y[k] = acc / self.at(k, k);
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }

    /// Solve followed by iterative refinement against the original matrix
    /// until the relative residual drops below `tol`.
    pub fn solve_refined(
        &self,
        a: &CsrMatrix,
        b: &[f64],
        tol: f64,
    ) -> Result<(Vec<f64>, SolveReport), SolveError> {
        let b_norm = norm2(b);
        let mut x = self.solve(b)?;
        let mut iterations = 1;
        let mut residual_norm;
        loop {
            let ax = a.spmv(&x)?;
            let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            residual_norm = if b_norm > 0.0 {
                norm2(&r) / b_norm
            } else {
                norm2(&r)
            };
            if residual_norm <= tol || iterations > MAX_REFINEMENT_STEPS {
                break;
            }
            let dx = self.solve(&r)?;
            x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
            iterations += 1;
        }
        let report = SolveReport {
            iterations,
            residual_norm,
            converged: residual_norm <= tol,
        };
        if report.converged {
            Ok((x, report))
        } else {
            Err(SolveError::NotConverged { best: x, report })
        }
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrized pattern; returns
/// `perm[new] = old`.
fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Repeated BFS to find a node of (nearly) maximal eccentricity in the
/// component of `seed`.
fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut current = seed;
    let mut last_depth = 0;
    for _ in 0..8 {
        let levels = bfs_levels(current, adj);
        let depth = levels.iter().filter_map(|l| *l).max().unwrap_or(0);
        if depth <= last_depth && current != seed {
            break;
        }
        last_depth = depth;
        let candidate = levels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(depth))
            .min_by_key(|(v, _)| (degree[*v], *v))
            .map(|(v, _)| v)
            .unwrap_or(current);
        if candidate == current {
            break;
        }
        current = candidate;
    }
    current
}

fn bfs_levels(start: usize, adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let d = level[v].unwrap();
        for &w in &adj[v] {
            if level[w].is_none() {
                level[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    level
}
