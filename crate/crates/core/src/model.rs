//! Standardization, L2-regularized logistic regression and recursive feature
//! elimination.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::CATALOG_VERSION;

/// Gradient-norm tolerance a fit must reach to count as converged.
pub const GRAD_TOL: f64 = 1e-6;
pub const MAX_ITER: usize = 10_000;
/// Newton iterations stop early once the gradient is this small.
const TARGET_GRAD: f64 = 1e-11;
const ARMIJO_C: f64 = 1e-4;

/// Per-column z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Input columns kept, as indices into the fitted layout.
    pub columns: Vec<usize>,
    /// Zero-variance columns removed at fit time.
    pub dropped: Vec<String>,
}

impl Standardizer {
    /// Fits on complete rows; columns with zero sample variance are dropped.
    pub fn fit(names: &[String], rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Degenerate(format!(
                "standardizer needs at least 2 training rows, got {}",
                rows.len()
            )));
        }
        let n = rows.len() as f64;
        let mut s = Standardizer {
            names: Vec::new(),
            mean: Vec::new(),
            sd: Vec::new(),
            columns: Vec::new(),
            dropped: Vec::new(),
        };
        for (c, name) in names.iter().enumerate() {
            let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let ss: f64 = rows.iter().map(|r| (r[c] - mean).powi(2)).sum();
            let sd = (ss / (n - 1.0)).sqrt();
            if sd > 1e-12 * mean.abs() && sd.is_finite() {
                s.names.push(name.clone());
                s.mean.push(mean);
                s.sd.push(sd);
                s.columns.push(c);
            } else {
                log::warn!("dropping zero-variance feature {name}");
                s.dropped.push(name.clone());
            }
        }
        Ok(s)
    }

    /// Standardizes a row laid out like the fitting input.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(&c, (m, s))| (row[c] - m) / s)
            .collect()
    }

    /// Restricts to a subset of the kept columns (indices into `names`).
    /// The result standardizes rows laid out in subset order.
    fn restrict(&self, keep: &[usize]) -> Standardizer {
        Standardizer {
            names: keep.iter().map(|&i| self.names[i].clone()).collect(),
            mean: keep.iter().map(|&i| self.mean[i]).collect(),
            sd: keep.iter().map(|&i| self.sd[i]).collect(),
            columns: (0..keep.len()).collect(),
            dropped: self.dropped.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub diagnostics: FitDiagnostics,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn to_dense(x: &[Vec<f64>], p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), p, |i, j| x[i][j])
}

fn targets(y: &[bool]) -> DVector<f64> {
    DVector::from_iterator(y.len(), y.iter().map(|&v| if v { 1.0 } else { 0.0 }))
}

fn scores(x: &DMatrix<f64>, w: &DVector<f64>, b: f64) -> DVector<f64> {
    let mut z = x * w;
    z.add_scalar_mut(b);
    z
}

fn loss_at(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, b: f64, lambda: f64) -> f64 {
    let z = scores(x, w, b);
    let nll: f64 = z
        .iter()
        .zip(y.iter())
        .map(|(z, y)| softplus(*z) - y * z)
        .sum();
    nll / y.len() as f64 + 0.5 * lambda * w.norm_squared()
}

/// Loss and gradient; the gradient's last entry is the intercept component.
fn loss_grad_dense(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
    b: f64,
    lambda: f64,
) -> (f64, DVector<f64>, DVector<f64>) {
    let n = y.len() as f64;
    let z = scores(x, w, b);
    let nll: f64 = z
        .iter()
        .zip(y.iter())
        .map(|(z, y)| softplus(*z) - y * z)
        .sum();
    let prob = z.map(sigmoid);
    let resid = &prob - y;
    let gw = x.tr_mul(&resid) / n + w * lambda;
    let mut g = DVector::zeros(w.len() + 1);
    g.rows_mut(0, w.len()).copy_from(&gw);
    g[w.len()] = resid.sum() / n;
    (nll / n + 0.5 * lambda * w.norm_squared(), g, prob)
}

/// Mean negative log-likelihood plus `lambda / 2 * |w|^2` (intercept not
/// penalized), with its analytic gradient as `(d/dw, d/db)`.
pub fn logistic_loss_grad(
    coefficients: &[f64],
    intercept: f64,
    x: &[Vec<f64>],
    y: &[bool],
    lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let p = coefficients.len();
    let (loss, g, _) = loss_grad_dense(
        &to_dense(x, p),
        &targets(y),
        &DVector::from_column_slice(coefficients),
        intercept,
        lambda,
    );
    (loss, g.rows(0, p).iter().copied().collect(), g[p])
}

fn hessian(x: &DMatrix<f64>, prob: &DVector<f64>, lambda: f64) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mut xa = DMatrix::zeros(n, p + 1);
    for i in 0..n {
        let s = (prob[i] * (1.0 - prob[i])).sqrt();
        for j in 0..p {
            xa[(i, j)] = x[(i, j)] * s;
        }
        xa[(i, p)] = s;
    }
    let mut h = xa.tr_mul(&xa) / n as f64;
    for j in 0..p {
        h[(j, j)] += lambda;
    }
    h
}

fn fit_dense(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    init: Option<(&DVector<f64>, f64)>,
) -> (DVector<f64>, f64, FitDiagnostics) {
    let p = x.ncols();
    let (mut w, mut b) = match init {
        Some((w, b)) => (w.clone(), b),
        None => (DVector::zeros(p), 0.0),
    };
    let (mut loss, mut g, mut prob) = loss_grad_dense(x, y, &w, b, lambda);
    let mut iterations = 0;
    while iterations < MAX_ITER && g.norm() > TARGET_GRAD {
        iterations += 1;
        let h = hessian(x, &prob, lambda);
        let dir = match h.cholesky() {
            Some(ch) => -ch.solve(&g),
            None => -&g,
        };
        let slope = g.dot(&dir);
        // Newton decrement below rounding level: no further progress possible.
        if slope.partial_cmp(&(-1e-14 * loss.abs().max(1e-300))) != Some(std::cmp::Ordering::Less) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-16 {
            let wt = &w + dir.rows(0, p) * t;
            let bt = b + dir[p] * t;
            let lt = loss_at(x, y, &wt, bt, lambda);
            if lt < loss && lt <= loss + ARMIJO_C * t * slope {
                w = wt;
                b = bt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        (loss, g, prob) = loss_grad_dense(x, y, &w, b, lambda);
    }
    let grad_norm = g.norm();
    let diagnostics = FitDiagnostics {
        loss,
        grad_norm,
        iterations,
        converged: grad_norm <= GRAD_TOL,
    };
    (w, b, diagnostics)
}

/// Damped Newton minimization of the regularized loss from zero.
pub fn fit_logistic(x: &[Vec<f64>], y: &[bool], lambda: f64) -> LogisticFit {
    let p = x.first().map_or(0, Vec::len);
    let (w, b, diagnostics) = fit_dense(&to_dense(x, p), &targets(y), lambda, None);
    LogisticFit {
        coefficients: w.iter().copied().collect(),
        intercept: b,
        diagnostics,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfeResult {
    /// Surviving column indices in ascending order.
    pub selected: Vec<usize>,
    pub fit: LogisticFit,
}

/// Removes the smallest-|coefficient| column one at a time until `k` remain.
/// Ties drop the later column. The returned fit is on the survivors.
pub fn rfe(x: &[Vec<f64>], y: &[bool], lambda: f64, k: usize) -> RfeResult {
    let p = x.first().map_or(0, Vec::len);
    let full = to_dense(x, p);
    let yv = targets(y);
    if p < k {
        log::warn!("only {p} features available for top-{k} selection; keeping all");
    }
    let mut remaining: Vec<usize> = (0..p).collect();
    let mut warm: Option<(DVector<f64>, f64)> = None;
    loop {
        let xs = full.select_columns(&remaining);
        let (w, b, diag) = fit_dense(&xs, &yv, lambda, warm.as_ref().map(|(w, b)| (w, *b)));
        if remaining.len() <= k {
            return RfeResult {
                selected: remaining,
                fit: LogisticFit {
                    coefficients: w.iter().copied().collect(),
                    intercept: b,
                    diagnostics: diag,
                },
            };
        }
        let smallest = w.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let tie = smallest * (1.0 + 1e-9) + f64::MIN_POSITIVE;
        let worst = (0..w.len()).rev().find(|&j| w[j].abs() <= tie).unwrap_or(0);
        remaining.remove(worst);
        let kept: Vec<f64> = w
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != worst)
            .map(|(_, v)| *v)
            .collect();
        warm = Some((DVector::from_vec(kept), b));
    }
}

/// A fitted classifier over named raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub catalog_version: String,
    pub features: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Statistics for `features`, in the same order.
    pub standardizer: Standardizer,
    pub diagnostics: FitDiagnostics,
}

impl LogisticModel {
    /// Standardizes on the training rows, runs RFE to `k` features and keeps
    /// the final fit. Rows must be complete over `names`.
    pub fn train(
        names: &[String],
        rows: &[Vec<f64>],
        y: &[bool],
        lambda: f64,
        k: usize,
    ) -> Result<Self> {
        let st = Standardizer::fit(names, rows)?;
        let z: Vec<Vec<f64>> = rows.iter().map(|r| st.apply(r)).collect();
        let RfeResult { selected, fit } = rfe(&z, y, lambda, k);
        if !fit.diagnostics.converged {
            log::warn!(
                "logistic fit stopped after {} iterations with gradient norm {:.3e}",
                fit.diagnostics.iterations,
                fit.diagnostics.grad_norm
            );
        }
        let standardizer = st.restrict(&selected);
        Ok(LogisticModel {
            catalog_version: CATALOG_VERSION.to_string(),
            features: standardizer.names.clone(),
            coefficients: fit.coefficients,
            intercept: fit.intercept,
            lambda,
            standardizer,
            diagnostics: fit.diagnostics,
        })
    }

    /// Probability for raw values aligned with `features`.
    pub fn predict_one(&self, raw: &[f64]) -> f64 {
        let z = self.standardizer.apply(raw);
        sigmoid(
            self.intercept
                + z.iter()
                    .zip(&self.coefficients)
                    .map(|(a, b)| a * b)
                    .sum::<f64>(),
        )
    }
}

/// Probabilities for rows given by a column lookup; `None` marks a row that
/// lacks one of the model's features.
pub fn predict_proba<'a, I>(model: &LogisticModel, rows: I) -> Vec<Option<f64>>
where
    I: IntoIterator<Item = &'a dyn Fn(&str) -> Option<f64>>,
{
    rows.into_iter()
        .map(|get| {
            let raw: Option<Vec<f64>> = model.features.iter().map(|n| get(n)).collect();
            raw.map(|r| model.predict_one(&r))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y = (0..n).map(|_| rng.random_bool(0.4)).collect();
        (x, y)
    }

    #[test]
    fn standardizer_basics() {
        let names = vec!["a".to_string(), "b".to_string()];
        let rows = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&names, &rows).unwrap();
        assert_eq!(s.names, vec!["a"]);
        assert_eq!(s.dropped, vec!["b"]);
        assert_eq!(s.mean, vec![2.0]);
        assert_eq!(s.sd, vec![1.0]);
        let z: Vec<f64> = rows.iter().map(|r| s.apply(r)[0]).collect();
        assert_eq!(z, vec![-1.0, 0.0, 1.0]);
        assert_eq!(s.apply(&[10.0, 0.0]), vec![8.0]);
        assert!(Standardizer::fit(&names, &rows[..1]).is_err());
    }

    #[test]
    fn zero_model_loss_is_ln2() {
        let x = vec![vec![1.0], vec![-3.0], vec![0.5], vec![2.0]];
        let y = vec![true, false, true, false];
        let (loss, _, gb) = logistic_loss_grad(&[0.0], 0.0, &x, &y, 1.0);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(gb.abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (x, y) = random_instance(&mut rng, 15, 4);
            let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = rng.random_range(-1.0..1.0);
            let lambda = rng.random_range(0.0..2.0);
            let (_, gw, gb) = logistic_loss_grad(&w, b, &x, &y, lambda);
            let h = 1e-6;
            for j in 0..4 {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[j] += h;
                wm[j] -= h;
                let fd = (logistic_loss_grad(&wp, b, &x, &y, lambda).0
                    - logistic_loss_grad(&wm, b, &x, &y, lambda).0)
                    / (2.0 * h);
                assert!((fd - gw[j]).abs() < 1e-6);
            }
            let fd = (logistic_loss_grad(&w, b + h, &x, &y, lambda).0
                - logistic_loss_grad(&w, b - h, &x, &y, lambda).0)
                / (2.0 * h);
            assert!((fd - gb).abs() < 1e-6);
        }
    }

    #[test]
    fn heavy_penalty_leaves_base_rate_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (x, y) = random_instance(&mut rng, 40, 3);
        let fit = fit_logistic(&x, &y, 1e6);
        let rate = y.iter().filter(|v| **v).count() as f64 / y.len() as f64;
        assert!(fit.coefficients.iter().all(|c| c.abs() < 1e-5));
        assert!((fit.intercept - (rate / (1.0 - rate)).ln()).abs() < 1e-4);
    }

    #[test]
    fn zero_features_give_logit_base_rate() {
        let x = vec![Vec::new(); 10];
        let y: Vec<bool> = (0..10).map(|i| i < 3).collect();
        let fit = fit_logistic(&x, &y, 1.0);
        assert!(fit.diagnostics.converged);
        assert!((fit.intercept - (0.3f64 / 0.7).ln()).abs() < 1e-6);
    }

    #[test]
    fn separable_gives_positive_coefficient() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..10).map(|i| i >= 5).collect();
        let fit = fit_logistic(&x, &y, 0.01);
        assert!(fit.diagnostics.converged);
        assert!(fit.coefficients[0] > 0.0);
    }

    #[test]
    fn duplicated_columns_share_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (x, y) = random_instance(&mut rng, 30, 2);
        let xd: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0], r[1], r[0]]).collect();
        let fit = fit_logistic(&xd, &y, 0.5);
        assert!((fit.coefficients[0] - fit.coefficients[2]).abs() <= 1e-8);
    }

    #[test]
    fn loss_is_convex_along_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (x, y) = random_instance(&mut rng, 12, 3);
            let w1: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let w2: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (b1, b2) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let f = |w: &[f64], b| logistic_loss_grad(w, b, &x, &y, 0.3).0;
            for t in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let wt: Vec<f64> = w1
                    .iter()
                    .zip(&w2)
                    .map(|(a, b)| (1.0 - t) * a + t * b)
                    .collect();
                let lhs = f(&wt, (1.0 - t) * b1 + t * b2);
                let rhs = (1.0 - t) * f(&w1, b1) + t * f(&w2, b2);
                assert!(lhs <= rhs + 1e-9);
            }
        }
    }

    #[test]
    fn fits_are_deterministic_and_affine_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (x, y) = random_instance(&mut rng, 50, 3);
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let m1 = LogisticModel::train(&names, &x, &y, 1.0, 3).unwrap();
        assert_eq!(m1, LogisticModel::train(&names, &x, &y, 1.0, 3).unwrap());
        let xt: Vec<Vec<f64>> = x
            .iter()
            .map(|r| vec![r[0], 7.5 * r[1] - 40.0, r[2]])
            .collect();
        let m2 = LogisticModel::train(&names, &xt, &y, 1.0, 3).unwrap();
        for (r, rt) in x.iter().zip(&xt) {
            assert!((m1.predict_one(r) - m2.predict_one(rt)).abs() < 1e-6);
        }
    }

    #[test]
    fn rfe_identity_and_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, y) = random_instance(&mut rng, 40, 6);
        assert_eq!(rfe(&x, &y, 1.0, 6).selected, (0..6).collect::<Vec<_>>());
        let r = rfe(&x, &y, 1.0, 2);
        assert_eq!(r.selected.len(), 2);
        assert_eq!(r.fit.coefficients.len(), 2);
        assert_eq!(rfe(&x, &y, 1.0, 10).selected.len(), 6);
    }

    #[test]
    fn rfe_tie_drops_later_column() {
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i % 7) as f64 - 3.0, (i % 5) as f64, (i % 5) as f64])
            .collect();
        let y: Vec<bool> = (0..20).map(|i| i % 5 >= 3).collect();
        let r = rfe(&x, &y, 1.0, 2);
        assert_eq!(r.selected, vec![1, 2]);
        let r1 = rfe(&x, &y, 1.0, 1);
        assert_eq!(r1.selected, vec![1]);
    }

    #[test]
    fn prediction_properties() {
        let names: Vec<String> = vec!["a".into()];
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..10).map(|i| i % 3 == 0 || i > 6).collect();
        let m = LogisticModel::train(&names, &x, &y, 1.0, 1).unwrap();
        assert!(m.coefficients[0] > 0.0);
        let lo: &dyn Fn(&str) -> Option<f64> = &|_| Some(1.0);
        let hi: &dyn Fn(&str) -> Option<f64> = &|_| Some(2.0);
        let missing: &dyn Fn(&str) -> Option<f64> = &|_| None;
        let p = predict_proba(&m, [lo, hi, missing]);
        assert!(p[0].unwrap() < p[1].unwrap());
        assert!(p.iter().flatten().all(|v| *v > 0.0 && *v < 1.0));
        assert_eq!(p[2], None);
        let zero = LogisticModel {
            coefficients: vec![0.0],
            intercept: 0.0,
            ..m
        };
        assert_eq!(zero.predict_one(&[123.0]), 0.5);
    }
}
