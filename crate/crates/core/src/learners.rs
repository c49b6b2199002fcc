//! Penalized logistic regression.
//!
//! Both penalties share one solver: an outer IRLS loop builds the quadratic
//! model of the mean negative log-likelihood at the current iterate, an inner
//! cyclic coordinate descent minimizes that model plus the penalty (ridge
//! shrinkage or soft-thresholding), and a backtracking line search on the true
//! objective keeps the objective trace non-increasing. The intercept is never
//! penalized. Coordinate order is fixed, so fits are bit-reproducible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Lower clamp for returned probabilities: 2^-53, so outputs stay in (0, 1).
const PROB_EPS: f64 = 1.0 / 9_007_199_254_740_992.0;
const MIN_CURVATURE: f64 = 1e-12;
const MAX_INNER_SWEEPS: usize = 10_000;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("targets must lie in [0, 1]")]
    InvalidTarget,
    #[error("penalty strength must be finite and non-negative, got {0}")]
    InvalidPenalty(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    L2 { strength: f64 },
    L1 { strength: f64 },
}

impl Regularization {
    fn parts(self) -> (f64, f64) {
        match self {
            Self::L2 { strength } => (0.0, strength),
            Self::L1 { strength } => (strength, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Stop once the optimality violation (gradient infinity-norm, or its
    /// subgradient analogue under L1) falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub regularization: Regularization,
    pub converged: bool,
    pub n_iterations: usize,
}

impl LinearModel {
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        predict_proba(self, x)
    }

    /// Indices with a non-zero weight.
    pub fn active_set(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&j| self.weights[j] != 0.0).collect()
    }
}

/// Logistic function clamped to `[2^-53, 1 - 2^-53]`.
pub fn sigmoid(z: f64) -> f64 {
    raw_sigmoid(z).clamp(PROB_EPS, 1.0 - PROB_EPS)
}

#[inline]
fn raw_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn predict_proba(model: &LinearModel, x: &[f64]) -> f64 {
    sigmoid(model.logit(x))
}

/// Fitted model plus the objective value after every accepted outer step.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: LinearModel,
    pub objective_trace: Vec<f64>,
}

/// Design matrix (stored by column) and targets, reusable across penalties.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    columns: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl LogisticProblem {
    pub fn new(x: &Matrix, y: &[f64]) -> Result<Self, FitError> {
        if x.rows() != y.len() {
            return Err(FitError::Shape(format!("{} rows but {} targets", x.rows(), y.len())));
        }
        if y.is_empty() {
            return Err(FitError::Shape("no samples".into()));
        }
        if !x.is_finite() {
            return Err(FitError::NonFinite("features"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite("targets"));
        }
        if y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(FitError::InvalidTarget);
        }
        Ok(Self { columns: x.columns(), targets: y.to_vec() })
    }

    /// Same design, new targets.
    pub fn with_targets(mut self, y: &[f64]) -> Result<Self, FitError> {
        if y.len() != self.targets.len() {
            return Err(FitError::Shape(format!("{} rows but {} targets", self.targets.len(), y.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite("targets"));
        }
        if y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(FitError::InvalidTarget);
        }
        self.targets = y.to_vec();
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    fn linear_predictor(&self, weights: &[f64], intercept: f64) -> Vec<f64> {
        let mut eta = vec![intercept; self.n_samples()];
        for (col, &w) in self.columns.iter().zip(weights) {
            if w != 0.0 {
                for (e, &v) in eta.iter_mut().zip(col) {
                    *e += w * v;
                }
            }
        }
        eta
    }

    fn loss_from_eta(&self, eta: &[f64]) -> f64 {
        let n = self.n_samples() as f64;
        eta.iter().zip(&self.targets).map(|(&e, &y)| softplus(e) - y * e).sum::<f64>() / n
    }

    fn penalty(weights: &[f64], reg: Regularization) -> f64 {
        let (l1, l2) = reg.parts();
        let mut p = 0.0;
        if l1 > 0.0 {
            p += l1 * weights.iter().map(|w| w.abs()).sum::<f64>();
        }
        if l2 > 0.0 {
            p += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
        }
        p
    }

    /// Mean negative log-likelihood plus penalty.
    pub fn objective(&self, weights: &[f64], intercept: f64, reg: Regularization) -> f64 {
        self.loss_from_eta(&self.linear_predictor(weights, intercept)) + Self::penalty(weights, reg)
    }

    /// Gradient of the smooth part (mean NLL plus any ridge term) with
    /// respect to `(weights, intercept)`.
    pub fn gradient(&self, weights: &[f64], intercept: f64, reg: Regularization) -> (Vec<f64>, f64) {
        let eta = self.linear_predictor(weights, intercept);
        let residual: Vec<f64> = eta.iter().zip(&self.targets).map(|(&e, &y)| raw_sigmoid(e) - y).collect();
        self.gradient_from_residual(&residual, weights, reg)
    }

    fn gradient_from_residual(&self, residual: &[f64], weights: &[f64], reg: Regularization) -> (Vec<f64>, f64) {
        let n = self.n_samples() as f64;
        let (_, l2) = reg.parts();
        let g = self
            .columns
            .iter()
            .zip(weights)
            .map(|(col, &w)| col.iter().zip(residual).map(|(v, r)| v * r).sum::<f64>() / n + l2 * w)
            .collect();
        (g, residual.iter().sum::<f64>() / n)
    }

    /// Infinity-norm of the (sub)gradient optimality violation.
    pub fn optimality_violation(&self, weights: &[f64], intercept: f64, reg: Regularization) -> f64 {
        let (g, g0) = self.gradient(weights, intercept, reg);
        Self::violation(&g, g0, weights, reg)
    }

    fn violation(g: &[f64], g0: f64, weights: &[f64], reg: Regularization) -> f64 {
        let (l1, _) = reg.parts();
        g.iter()
            .zip(weights)
            .map(|(&gj, &w)| {
                if l1 == 0.0 {
                    gj.abs()
                } else if w != 0.0 {
                    (gj + l1 * w.signum()).abs()
                } else {
                    (gj.abs() - l1).max(0.0)
                }
            })
            .fold(g0.abs(), f64::max)
    }

    /// Smallest L1 strength at which every weight is exactly zero.
    pub fn l1_critical_strength(&self) -> f64 {
        let n = self.n_samples() as f64;
        let mean = self.targets.iter().sum::<f64>() / n;
        self.columns
            .iter()
            .map(|col| (col.iter().zip(&self.targets).map(|(v, y)| v * (y - mean)).sum::<f64>() / n).abs())
            .fold(0.0, f64::max)
    }

    pub fn fit(
        &self,
        reg: Regularization,
        opts: &FitOptions,
        warm_start: Option<&LinearModel>,
    ) -> Result<FitOutcome, FitError> {
        let (l1, l2) = reg.parts();
        for s in [l1, l2] {
            if !s.is_finite() || s < 0.0 {
                return Err(FitError::InvalidPenalty(s));
            }
        }
        let n = self.n_samples();
        let d = self.n_features();
        let nf = n as f64;

        let (mut beta, mut b0) = match warm_start {
            Some(m) if m.weights.len() == d => (m.weights.clone(), m.intercept),
            _ => {
                let mean = (self.targets.iter().sum::<f64>() / nf).clamp(1e-6, 1.0 - 1e-6);
                (vec![0.0; d], (mean / (1.0 - mean)).ln())
            }
        };
        let mut eta = self.linear_predictor(&beta, b0);
        let mut objective = self.loss_from_eta(&eta) + Self::penalty(&beta, reg);
        let mut trace = vec![objective];

        let mut prob = vec![0.0; n];
        let mut residual = vec![0.0; n];
        let mut curvature = vec![0.0; n];
        let mut inner_res = vec![0.0; n];
        let mut diag = vec![0.0; d];
        let mut converged = false;
        let mut iterations = 0;

        for _ in 0..opts.max_iter {
            for i in 0..n {
                prob[i] = raw_sigmoid(eta[i]);
                residual[i] = prob[i] - self.targets[i];
            }
            let (g, g0) = self.gradient_from_residual(&residual, &beta, reg);
            if Self::violation(&g, g0, &beta, reg) < opts.tol {
                converged = true;
                break;
            }
            iterations += 1;

            // Quadratic model: (1/2N) sum w (z - d_b - x.d_beta)^2 + penalty(beta + d_beta)
            let mut sum_w = 0.0;
            for i in 0..n {
                let w = (prob[i] * (1.0 - prob[i])).max(MIN_CURVATURE);
                curvature[i] = w;
                inner_res[i] = -residual[i] / w;
                sum_w += w;
            }
            for (j, col) in self.columns.iter().enumerate() {
                diag[j] = col.iter().zip(&curvature).map(|(v, w)| w * v * v).sum::<f64>() / nf;
            }
            let mut target_beta = beta.clone();
            let mut delta_b = 0.0;
            let inner_tol = opts.tol * 1e-3;

            let sweep = |only_active: bool, target_beta: &mut [f64], delta_b: &mut f64, inner_res: &mut [f64]| {
                let mut max_change: f64 = 0.0;
                for j in 0..d {
                    if only_active && target_beta[j] == 0.0 {
                        continue;
                    }
                    let denom = diag[j] + l2;
                    let current = target_beta[j];
                    let new = if denom <= 0.0 {
                        0.0
                    } else {
                        let col = &self.columns[j];
                        let dot = col
                            .iter()
                            .zip(curvature.iter().zip(inner_res.iter()))
                            .map(|(v, (w, r))| v * w * r)
                            .sum::<f64>()
                            / nf;
                        let u = dot + diag[j] * current;
                        if l1 > 0.0 {
                            soft_threshold(u, l1) / denom
                        } else {
                            u / denom
                        }
                    };
                    let step = new - current;
                    if step != 0.0 {
                        for (r, &v) in inner_res.iter_mut().zip(&self.columns[j]) {
                            *r -= v * step;
                        }
                        target_beta[j] = new;
                        max_change = max_change.max(denom * step.abs());
                    }
                }
                let step_b = inner_res.iter().zip(&curvature).map(|(r, w)| r * w).sum::<f64>() / sum_w;
                if step_b != 0.0 {
                    for r in inner_res.iter_mut() {
                        *r -= step_b;
                    }
                    *delta_b += step_b;
                    max_change = max_change.max(sum_w / nf * step_b.abs());
                }
                max_change
            };

            let mut sweeps = 0;
            loop {
                sweeps += 1;
                let change = sweep(false, &mut target_beta, &mut delta_b, &mut inner_res);
                if change < inner_tol || sweeps >= MAX_INNER_SWEEPS {
                    break;
                }
                loop {
                    sweeps += 1;
                    let change = sweep(true, &mut target_beta, &mut delta_b, &mut inner_res);
                    if change < inner_tol || sweeps >= MAX_INNER_SWEEPS {
                        break;
                    }
                }
            }

            let dir_beta: Vec<f64> = target_beta.iter().zip(&beta).map(|(t, b)| t - b).collect();
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let cand_beta: Vec<f64> = if step == 1.0 {
                    target_beta.clone()
                } else {
                    beta.iter().zip(&dir_beta).map(|(b, d)| b + step * d).collect()
                };
                let cand_b0 = b0 + step * delta_b;
                let cand_eta = self.linear_predictor(&cand_beta, cand_b0);
                let cand_obj = self.loss_from_eta(&cand_eta) + Self::penalty(&cand_beta, reg);
                if cand_obj <= objective {
                    accepted = Some((cand_beta, cand_b0, cand_eta, cand_obj));
                    break;
                }
                step *= 0.5;
            }
            let Some((new_beta, new_b0, new_eta, new_obj)) = accepted else {
                break;
            };
            let stalled = new_beta == beta && new_b0 == b0;
            beta = new_beta;
            b0 = new_b0;
            eta = new_eta;
            objective = new_obj;
            trace.push(objective);
            if stalled {
                break;
            }
        }

        if !converged {
            converged = self.optimality_violation(&beta, b0, reg) < opts.tol;
        }
        if beta.iter().any(|w| !w.is_finite()) || !b0.is_finite() {
            return Err(FitError::NonFinite("fitted weights"));
        }
        Ok(FitOutcome {
            model: LinearModel { weights: beta, intercept: b0, regularization: reg, converged, n_iterations: iterations },
            objective_trace: trace,
        })
    }
}

#[inline]
fn soft_threshold(u: f64, lambda: f64) -> f64 {
    if u > lambda {
        u - lambda
    } else if u < -lambda {
        u + lambda
    } else {
        0.0
    }
}

/// Mean NLL + (l2/2)·‖w‖², intercept unpenalized. Targets may be soft labels in [0, 1].
pub fn fit_logistic_l2(x: &Matrix, y: &[f64], l2_strength: f64, opts: &FitOptions) -> Result<LinearModel, FitError> {
    Ok(LogisticProblem::new(x, y)?.fit(Regularization::L2 { strength: l2_strength }, opts, None)?.model)
}

/// Mean NLL + l1·‖w‖₁, intercept unpenalized; inactive weights are exactly zero.
pub fn fit_logistic_l1(x: &Matrix, y: &[f64], l1_strength: f64, opts: &FitOptions) -> Result<LinearModel, FitError> {
    Ok(LogisticProblem::new(x, y)?.fit(Regularization::L1 { strength: l1_strength }, opts, None)?.model)
}

pub fn labels_as_targets(y: &[u8]) -> Vec<f64> {
    y.iter().map(|&v| v as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, n: usize, d: usize) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let mut data = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let z: f64 = row.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + 0.3;
            y.push(if rng.random::<f64>() < raw_sigmoid(z) { 1.0 } else { 0.0 });
            data.extend(row);
        }
        (Matrix::new(n, d, data), y)
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        let p = sigmoid(40.0);
        assert!(p < 1.0 && p > 1.0 - 1e-15);
        let q = sigmoid(-800.0);
        assert!(q > 0.0 && q < 1e-15);
        assert!(softplus(800.0).is_finite() && softplus(-800.0) >= 0.0);
    }

    #[test]
    fn hand_set_model() {
        let m = LinearModel {
            weights: vec![2.0],
            intercept: -1.0,
            regularization: Regularization::L2 { strength: 0.0 },
            converged: true,
            n_iterations: 0,
        };
        assert!((m.predict_proba(&[1.0]) - 0.731_058_578_630_004_9).abs() < 1e-12);
        let zero = LinearModel { weights: vec![0.0], intercept: 0.0, ..m };
        assert_eq!(zero.predict_proba(&[3.0]), 0.5);
    }

    #[test]
    fn separable_one_d_gets_positive_weight() {
        let x = Matrix::from_rows(&[[-2.0], [-1.0], [-0.5], [0.5], [1.0], [2.0]]);
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let m = fit_logistic_l2(&x, &y, 1.0, &FitOptions::default()).unwrap();
        assert!(m.weights[0] > 0.0);
        assert!(m.converged);
    }

    #[test]
    fn heavy_ridge_gives_base_rate_intercept() {
        let (x, y) = random_problem(3, 80, 3);
        let m = fit_logistic_l2(&x, &y, 1e9, &FitOptions::default()).unwrap();
        let rate = y.iter().sum::<f64>() / y.len() as f64;
        assert!(m.weights.iter().all(|w| w.abs() < 1e-7));
        assert!((m.intercept - (rate / (1.0 - rate)).ln()).abs() < 1e-6);
    }

    #[test]
    fn l2_fit_reaches_tolerance() {
        for seed in 0..5 {
            let (x, y) = random_problem(seed, 120, 4);
            let problem = LogisticProblem::new(&x, &y).unwrap();
            let reg = Regularization::L2 { strength: 1.0 / 120.0 };
            let out = problem.fit(reg, &FitOptions::default(), None).unwrap();
            assert!(out.model.converged);
            assert!(problem.optimality_violation(&out.model.weights, out.model.intercept, reg) < 1e-8);
            assert!(out.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn l1_above_critical_value_is_all_zero() {
        let (x, y) = random_problem(9, 100, 5);
        let problem = LogisticProblem::new(&x, &y).unwrap();
        let lmax = problem.l1_critical_strength();
        let m = fit_logistic_l1(&x, &y, lmax * 1.001, &FitOptions::default()).unwrap();
        assert!(m.weights.iter().all(|&w| w == 0.0));
        assert!(m.active_set().is_empty());
        let m = fit_logistic_l1(&x, &y, lmax * 0.5, &FitOptions::default()).unwrap();
        assert!(!m.active_set().is_empty());
        assert!(m.converged);
    }

    #[test]
    fn l1_zero_matches_unpenalized_l2() {
        let (x, y) = random_problem(4, 150, 3);
        let a = fit_logistic_l1(&x, &y, 0.0, &FitOptions::default()).unwrap();
        let b = fit_logistic_l2(&x, &y, 0.0, &FitOptions::default()).unwrap();
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa - wb).abs() < 1e-6, "{wa} vs {wb}");
        }
        assert!((a.intercept - b.intercept).abs() < 1e-6);
    }

    #[test]
    fn unpenalized_separable_data_flags_non_convergence() {
        let x = Matrix::from_rows(&[[-1.0], [1.0]]);
        let opts = FitOptions { tol: 1e-8, max_iter: 3 };
        let m = fit_logistic_l2(&x, &[0.0, 1.0], 0.0, &opts).unwrap();
        assert!(!m.converged);
        assert_eq!(m.n_iterations, 3);
        assert!(m.weights[0] > 0.0);
    }

    #[test]
    fn input_validation() {
        let x = Matrix::from_rows(&[[f64::NAN]]);
        assert_eq!(fit_logistic_l2(&x, &[1.0], 1.0, &FitOptions::default()), Err(FitError::NonFinite("features")));
        let x = Matrix::from_rows(&[[1.0]]);
        assert_eq!(fit_logistic_l2(&x, &[2.0], 1.0, &FitOptions::default()), Err(FitError::InvalidTarget));
        assert!(matches!(fit_logistic_l2(&x, &[1.0, 0.0], 1.0, &FitOptions::default()), Err(FitError::Shape(_))));
        assert_eq!(fit_logistic_l1(&x, &[1.0], -1.0, &FitOptions::default()), Err(FitError::InvalidPenalty(-1.0)));
    }

    #[test]
    fn permutation_equivariance_and_determinism() {
        let (x, y) = random_problem(12, 90, 3);
        let perm = [2usize, 0, 1];
        let rows: Vec<Vec<f64>> = x.row_iter().map(|r| perm.iter().map(|&p| r[p]).collect()).collect();
        let xp = Matrix::from_rows(&rows);
        let a = fit_logistic_l2(&x, &y, 0.01, &FitOptions::default()).unwrap();
        let b = fit_logistic_l2(&xp, &y, 0.01, &FitOptions::default()).unwrap();
        for (k, &p) in perm.iter().enumerate() {
            assert!((b.weights[k] - a.weights[p]).abs() < 1e-7);
        }
        assert_eq!(a, fit_logistic_l2(&x, &y, 0.01, &FitOptions::default()).unwrap());
    }

    #[test]
    fn scaling_covariance_without_penalty() {
        let (x, y) = random_problem(21, 200, 2);
        let scaled: Vec<Vec<f64>> = x.row_iter().map(|r| vec![r[0] * 4.0, r[1]]).collect();
        let a = fit_logistic_l2(&x, &y, 0.0, &FitOptions::default()).unwrap();
        let b = fit_logistic_l2(&Matrix::from_rows(&scaled), &y, 0.0, &FitOptions::default()).unwrap();
        assert!(a.converged && b.converged);
        assert!((b.weights[0] * 4.0 - a.weights[0]).abs() < 1e-6);
        assert!((b.weights[1] - a.weights[1]).abs() < 1e-6);
    }
}
