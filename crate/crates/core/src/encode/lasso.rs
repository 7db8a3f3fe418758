//! L1-penalized least squares for ranking binary features.
//!
//! Columns are standardized, the intercept is absorbed by centering `y`, and the
//! objective `(1/2n)‖y − Zw‖² + λ‖w‖₁` is minimized by cyclic coordinate descent
//! with soft-thresholding.

use super::{EncodeError, Result};

const GRID_POINTS: usize = 100;
const GRID_SPAN: f64 = 1e-4;
const TOLERANCE: f64 = 1e-8;
const MAX_SWEEPS: usize = 10_000;

/// Standardized design matrix and centered response.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    n: usize,
    p: usize,
    /// Column-major standardized values for non-constant columns.
    columns: Vec<Option<Vec<f64>>>,
    y: Vec<f64>,
}

/// Solution at one penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub lambda: f64,
    /// Coefficients on standardized columns.
    pub weights: Vec<f64>,
    pub sweeps: usize,
    /// Objective value after each full or active-set sweep.
    pub objective_trace: Vec<f64>,
}

impl LassoFit {
    pub fn nonzero(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

impl LassoProblem {
    /// `rows` are the n samples, each holding p binary features.
    pub fn new(rows: &[Vec<u8>], y: &[f64]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(EncodeError::Lasso(format!("need at least 2 samples, got {n}")));
        }
        if y.len() != n {
            return Err(EncodeError::Lasso(format!("{n} rows but {} targets", y.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(EncodeError::Lasso("targets must be finite".into()));
        }
        let p = rows[0].len();
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(EncodeError::Lasso(format!("row {i} has {} features, expected {p}", rows[i].len())));
        }
        let nf = n as f64;
        let columns: Vec<Option<Vec<f64>>> = (0..p)
            .map(|j| {
                let ones = rows.iter().filter(|r| r[j] != 0).count();
                if ones == 0 || ones == n {
                    return None;
                }
                let mean = ones as f64 / nf;
                let sd = (mean * (1.0 - mean)).sqrt();
                Some(rows.iter().map(|r| (f64::from(u8::from(r[j] != 0)) - mean) / sd).collect())
            })
            .collect();
        if columns.iter().all(Option::is_none) {
            return Err(EncodeError::Lasso("every feature column is constant".into()));
        }
        let mean_y = y.iter().sum::<f64>() / nf;
        Ok(LassoProblem {
            n,
            p,
            columns,
            y: y.iter().map(|v| v - mean_y).collect(),
        })
    }

    pub fn features(&self) -> usize {
        self.p
    }

    /// Smallest penalty with an all-zero solution, max_j |z_jᵀ(y − ȳ)|/n.
    pub fn lambda_max(&self) -> f64 {
        self.columns
            .iter()
            .flatten()
            .map(|z| dot(z, &self.y).abs() / self.n as f64)
            .fold(0.0, f64::max)
    }

    pub fn objective(&self, weights: &[f64], lambda: f64) -> f64 {
        let mut residual = self.y.clone();
        for (z, &w) in self.columns.iter().zip(weights) {
            if let (Some(z), true) = (z, w != 0.0) {
                residual.iter_mut().zip(z).for_each(|(r, zi)| *r -= w * zi);
            }
        }
        let rss: f64 = residual.iter().map(|r| r * r).sum();
        rss / (2.0 * self.n as f64) + lambda * weights.iter().map(|w| w.abs()).sum::<f64>()
    }

    /// Cyclic coordinate descent from zero. Full sweeps alternate with sweeps over
    /// the current nonzero set until a full sweep changes no coordinate by more
    /// than the tolerance.
    pub fn solve(&self, lambda: f64) -> LassoFit {
        let nf = self.n as f64;
        let mut w = vec![0.0; self.p];
        let mut residual = self.y.clone();
        let mut trace = vec![self.objective(&w, lambda)];
        let mut sweeps = 0;
        let update = |j: usize, w: &mut [f64], residual: &mut [f64]| -> f64 {
            let Some(z) = &self.columns[j] else { return 0.0 };
            let old = w[j];
            let rho = dot(z, residual) / nf + old;
            let new = soft_threshold(rho, lambda);
            if new != old {
                let delta = new - old;
                residual.iter_mut().zip(z).for_each(|(r, zi)| *r -= delta * zi);
                w[j] = new;
            }
            (new - old).abs()
        };
        'outer: while sweeps < MAX_SWEEPS {
            let mut max_change = 0.0_f64;
            for j in 0..self.p {
                max_change = max_change.max(update(j, &mut w, &mut residual));
            }
            sweeps += 1;
            trace.push(objective_from_residual(&residual, &w, lambda, nf));
            if max_change < TOLERANCE {
                break;
            }
            loop {
                if sweeps >= MAX_SWEEPS {
                    break 'outer;
                }
                let active: Vec<usize> = (0..self.p).filter(|&j| w[j] != 0.0).collect();
                let mut change = 0.0_f64;
                for j in active {
                    change = change.max(update(j, &mut w, &mut residual));
                }
                sweeps += 1;
                trace.push(objective_from_residual(&residual, &w, lambda, nf));
                if change < TOLERANCE {
                    break;
                }
            }
        }
        LassoFit {
            lambda,
            weights: w,
            sweeps,
            objective_trace: trace,
        }
    }

    /// Geometric penalty grid from λ_max down to λ_max·1e-4.
    pub fn lambda_grid(&self) -> Vec<f64> {
        let top = self.lambda_max();
        let ratio = GRID_SPAN.powf(1.0 / (GRID_POINTS - 1) as f64);
        (0..GRID_POINTS).map(|i| top * ratio.powi(i as i32)).collect()
    }
}

fn objective_from_residual(residual: &[f64], w: &[f64], lambda: f64, n: f64) -> f64 {
    let rss: f64 = residual.iter().map(|r| r * r).sum();
    rss / (2.0 * n) + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Indices of the `k` features with the largest |w| at the first grid penalty
/// (found by bisection) whose solution has at least `k` nonzeros. Ties go to the
/// lower index. If even the smallest grid penalty keeps fewer than `k` features,
/// that solution is used and zero-weight features fill in by index.
pub fn lasso_select(rows: &[Vec<u8>], y: &[f64], k: usize) -> Result<Vec<usize>> {
    let p = rows.first().map_or(0, Vec::len);
    if k == 0 || k > p {
        return Err(EncodeError::Lasso(format!("cannot select {k} of {p} features")));
    }
    let problem = LassoProblem::new(rows, y)?;
    let grid = problem.lambda_grid();
    let last = grid.len() - 1;
    let mut best = problem.solve(grid[last]);
    if best.nonzero() >= k {
        // invariant: solution at `lo` has < k nonzeros, at `hi` ≥ k
        let (mut lo, mut hi) = (0usize, last);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let fit = problem.solve(grid[mid]);
            if fit.nonzero() >= k {
                hi = mid;
                best = fit;
            } else {
                lo = mid;
            }
        }
    }
    // constant columns carry no information and rank after everything else
    let constant: Vec<bool> = (0..p)
        .map(|j| rows.iter().all(|r| r[j] == rows[0][j]))
        .collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        constant[a]
            .cmp(&constant[b])
            .then(
                best.weights[b]
                    .abs()
                    .partial_cmp(&best.weights[a].abs())
                    .expect("finite weights"),
            )
            .then(a.cmp(&b))
    });
    order.truncate(k);
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rows(n: usize, p: usize, seed: u64) -> Vec<Vec<u8>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..p).map(|_| rng.gen_range(0..2)).collect()).collect()
    }

    /// Exhaustive single-feature least squares: index with the highest R².
    fn best_single_feature(rows: &[Vec<u8>], y: &[f64]) -> usize {
        let n = rows.len() as f64;
        let my = y.iter().sum::<f64>() / n;
        let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
        (0..rows[0].len())
            .map(|j| {
                let x: Vec<f64> = rows.iter().map(|r| f64::from(r[j])).collect();
                let mx = x.iter().sum::<f64>() / n;
                let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
                let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
                let r2 = if sxx == 0.0 { 0.0 } else { sxy * sxy / (sxx * syy) };
                (j, r2)
            })
            .fold((0, -1.0), |best, (j, r2)| if r2 > best.1 { (j, r2) } else { best })
            .0
    }

    #[test]
    fn exact_column_is_selected_first() {
        let rows = random_rows(60, 12, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let j = 7;
        let y: Vec<f64> = rows.iter().map(|r| f64::from(r[j]) + 0.01 * rng.gen_range(-1.0..1.0)).collect();
        assert_eq!(best_single_feature(&rows, &y), j);
        assert_eq!(lasso_select(&rows, &y, 1).unwrap(), vec![j]);
    }

    #[test]
    fn selecting_all_features_returns_every_index() {
        let rows = random_rows(40, 6, 3);
        let y: Vec<f64> = rows.iter().map(|r| f64::from(r[0]) - 0.5 * f64::from(r[3])).collect();
        let mut sel = lasso_select(&rows, &y, 6).unwrap();
        sel.sort();
        assert_eq!(sel, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn constant_columns_fill_last() {
        let mut rows = random_rows(30, 4, 4);
        rows.iter_mut().for_each(|r| r[1] = 1);
        let y: Vec<f64> = rows.iter().map(|r| f64::from(r[2])).collect();
        let sel = lasso_select(&rows, &y, 4).unwrap();
        assert_eq!(sel[0], 2);
        assert_eq!(*sel.last().unwrap(), 1);
    }

    #[test]
    fn errors() {
        let rows = random_rows(10, 3, 5);
        let y = vec![0.0; 10];
        assert!(lasso_select(&rows, &y, 4).is_err());
        assert!(lasso_select(&rows, &y, 0).is_err());
        assert!(lasso_select(&rows[..1], &y[..1], 1).is_err());
        let constant = vec![vec![1u8, 0, 1]; 10];
        assert!(lasso_select(&constant, &y, 1).is_err());
    }

    #[test]
    fn objective_decreases_across_sweeps() {
        let rows = random_rows(80, 30, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().take(5).map(|&b| f64::from(b)).sum::<f64>() + rng.gen_range(-0.3..0.3))
            .collect();
        let problem = LassoProblem::new(&rows, &y).unwrap();
        for &lambda in problem.lambda_grid().iter().step_by(10) {
            let fit = problem.solve(lambda);
            for pair in fit.objective_trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "{pair:?}");
            }
            let direct = problem.objective(&fit.weights, lambda);
            assert!((direct - fit.objective_trace.last().unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn lambda_max_gives_empty_model() {
        let rows = random_rows(50, 10, 8);
        let y: Vec<f64> = rows.iter().map(|r| f64::from(r[4])).collect();
        let problem = LassoProblem::new(&rows, &y).unwrap();
        assert_eq!(problem.solve(problem.lambda_max()).nonzero(), 0);
        assert!(problem.solve(problem.lambda_max() * 0.9).nonzero() > 0);
    }

    #[test]
    fn deterministic_with_duplicate_columns() {
        let mut rows = random_rows(50, 8, 9);
        rows.iter_mut().for_each(|r| r[5] = r[2]);
        let y: Vec<f64> = rows.iter().map(|r| f64::from(r[2]) + 0.2 * f64::from(r[0])).collect();
        let a = lasso_select(&rows, &y, 3).unwrap();
        let b = lasso_select(&rows, &y, 3).unwrap();
        assert_eq!(a, b);
    }
}
