//! Elastic-net penalised logistic regression.
//!
//! Minimises
//!
//! ```text
//! F(w, b) = (1/n) Σ [log(1 + exp(z_i)) - y_i z_i] + λ (α ‖w‖₁ + (1-α)/2 ‖w‖²),   z_i = b + x_i·w
//! ```
//!
//! with a proximal Newton method: each outer step solves the penalised
//! quadratic model by coordinate descent, then backtracks along the resulting
//! direction until the objective decreases sufficiently, so `F` never
//! increases between iterations. The intercept is not penalised.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Stop once the largest minimum-norm subgradient component is below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-6,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LogisticModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.intercept + dot(&self.weights, row)
    }

    /// Probability of the positive class.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub model: LogisticModel,
    /// Objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    pub alpha: f64,
    pub lambda: f64,
}

impl Penalty {
    fn l1(&self) -> f64 {
        self.lambda * self.alpha
    }

    fn l2(&self) -> f64 {
        self.lambda * (1.0 - self.alpha)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Elastic-net objective at `(w, b)`.
pub fn objective(x: &[Vec<f64>], y: &[f64], weights: &[f64], intercept: f64, penalty: Penalty) -> f64 {
    let n = x.len() as f64;
    let nll: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let z = intercept + dot(weights, row);
            softplus(z) - yi * z
        })
        .sum::<f64>()
        / n;
    let l1: f64 = weights.iter().map(|w| w.abs()).sum();
    let l2: f64 = weights.iter().map(|w| w * w).sum();
    nll + penalty.l1() * l1 + 0.5 * penalty.l2() * l2
}

/// Gradient of the smooth part (loss and L2 term) with respect to `w` and `b`.
fn smooth_gradient(x: &[Vec<f64>], y: &[f64], weights: &[f64], intercept: f64, penalty: Penalty) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut gw: Vec<f64> = weights.iter().map(|w| penalty.l2() * w).collect();
    let mut gb = 0.0;
    for (row, &yi) in x.iter().zip(y) {
        let r = (sigmoid(intercept + dot(weights, row)) - yi) / n;
        gb += r;
        for (g, xj) in gw.iter_mut().zip(row) {
            *g += r * xj;
        }
    }
    (gw, gb)
}

/// Gradient of the full objective where it is differentiable (all weights
/// non-zero); at zero weights the L1 term contributes nothing.
pub fn objective_gradient(
    x: &[Vec<f64>],
    y: &[f64],
    weights: &[f64],
    intercept: f64,
    penalty: Penalty,
) -> (Vec<f64>, f64) {
    let (mut gw, gb) = smooth_gradient(x, y, weights, intercept, penalty);
    for (g, w) in gw.iter_mut().zip(weights) {
        if *w != 0.0 {
            *g += penalty.l1() * w.signum();
        }
    }
    (gw, gb)
}

fn optimality(gw: &[f64], gb: f64, weights: &[f64], l1: f64) -> f64 {
    gw.iter()
        .zip(weights)
        .map(|(&g, &w)| {
            if w != 0.0 {
                (g + l1 * w.signum()).abs()
            } else {
                (g.abs() - l1).max(0.0)
            }
        })
        .fold(gb.abs(), f64::max)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn fit_logistic(x: &[Vec<f64>], y: &[f64], penalty: Penalty, options: &FitOptions) -> Result<LogisticFit> {
    let n = x.len();
    if n == 0 || y.len() != n {
        return Err(Error::Fit(format!("{n} rows but {} labels", y.len())));
    }
    if !(0.0..=1.0).contains(&penalty.alpha) || penalty.lambda < 0.0 {
        return Err(Error::Config(format!(
            "invalid penalty: alpha {} lambda {}",
            penalty.alpha, penalty.lambda
        )));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::Fit("rows of differing length".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite feature value".into()));
    }
    let positives = y.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == n || y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Fit("training labels must contain both classes".into()));
    }

    let l1 = penalty.l1();
    let l2 = penalty.l2();
    let mut w = vec![0.0; p];
    let base = positives as f64 / n as f64;
    let mut b = (base / (1.0 - base)).ln();
    let mut f_cur = objective(x, y, &w, b, penalty);
    let mut trace = vec![f_cur];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iter {
        let (gw, gb) = smooth_gradient(x, y, &w, b, penalty);
        if optimality(&gw, gb, &w, l1) < options.tol {
            converged = true;
            break;
        }
        iterations += 1;

        // curvature of the loss at the current point
        let h: Vec<f64> = x
            .iter()
            .map(|row| {
                let pr = sigmoid(b + dot(&w, row));
                (pr * (1.0 - pr)).max(1e-12) / n as f64
            })
            .collect();
        let diag: Vec<f64> = (0..p)
            .map(|j| x.iter().zip(&h).map(|(r, hi)| hi * r[j] * r[j]).sum::<f64>() + l2)
            .collect();
        let h_sum: f64 = h.iter().sum();

        // coordinate descent on the quadratic model; r_i = x̃_i · (z - current)
        let mut zw = w.clone();
        let mut zb = b;
        let mut r = vec![0.0; n];
        for _sweep in 0..500 {
            let mut max_change: f64 = 0.0;
            for j in 0..p {
                if diag[j] <= 0.0 {
                    continue;
                }
                let grad_j = gw[j] + x.iter().zip(&h).zip(&r).map(|((row, hi), ri)| hi * row[j] * ri).sum::<f64>()
                    + l2 * (zw[j] - w[j]);
                let new = soft_threshold(diag[j] * zw[j] - grad_j, l1) / diag[j];
                let delta = new - zw[j];
                if delta != 0.0 {
                    for (ri, row) in r.iter_mut().zip(x) {
                        *ri += delta * row[j];
                    }
                    zw[j] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
            let grad_b = gb + h.iter().zip(&r).map(|(hi, ri)| hi * ri).sum::<f64>();
            let delta = -grad_b / h_sum;
            if delta != 0.0 {
                for ri in r.iter_mut() {
                    *ri += delta;
                }
                zb += delta;
                max_change = max_change.max(delta.abs());
            }
            if max_change < 1e-13 {
                break;
            }
        }

        let dw: Vec<f64> = zw.iter().zip(&w).map(|(z, c)| z - c).collect();
        let db = zb - b;
        let l1_norm = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
        let decrease = dot(&gw, &dw) + gb * db + l1 * (l1_norm(&zw) - l1_norm(&w));
        if decrease >= 0.0 {
            // no descent direction left at machine precision
            converged = optimality(&gw, gb, &w, l1) < options.tol * 10.0;
            break;
        }

        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-16 {
            let cw: Vec<f64> = w.iter().zip(&dw).map(|(c, d)| c + step * d).collect();
            let cb = b + step * db;
            let f_new = objective(x, y, &cw, cb, penalty);
            if f_new <= f_cur + 1e-4 * step * decrease {
                accepted = Some((cw, cb, f_new));
                break;
            }
            step *= 0.5;
        }
        let Some((cw, cb, f_new)) = accepted else {
            break;
        };
        w = cw;
        b = cb;
        f_cur = f_new;
        trace.push(f_cur);
    }

    Ok(LogisticFit {
        model: LogisticModel {
            weights: w,
            intercept: b,
        },
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// Per-column centring and scaling fitted on training rows. Columns with zero
/// spread are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub keep: Vec<bool>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let p = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; p];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut sd = vec![0.0; p];
        for r in rows {
            for ((s, v), m) in sd.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let sd: Vec<f64> = sd.into_iter().map(f64::sqrt).collect();
        let keep = sd.iter().map(|&s| s > 1e-12).collect();
        Standardizer { mean, sd, keep }
    }

    /// Keeps every column unscaled.
    pub fn identity(p: usize) -> Self {
        Standardizer {
            mean: vec![0.0; p],
            sd: vec![1.0; p],
            keep: vec![true; p],
        }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .filter(|(j, _)| self.keep[*j])
            .map(|(j, v)| (v - self.mean[j]) / self.sd[j])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_one_d() {
        let x: Vec<Vec<f64>> = [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0].iter().map(|&v| vec![v]).collect();
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let fit = fit_logistic(&x, &y, Penalty { alpha: 0.5, lambda: 0.1 }, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let m = &fit.model;
        assert!(m.weights[0] > 0.0);
        let boundary = -m.intercept / m.weights[0];
        assert!(boundary > -1.0 && boundary < 1.0);
    }

    #[test]
    fn huge_penalty_gives_base_rate() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64 / 10.0]).collect();
        let y: Vec<f64> = (0..10).map(|i| if i >= 7 { 1.0 } else { 0.0 }).collect();
        let fit = fit_logistic(&x, &y, Penalty { alpha: 0.5, lambda: 1e6 }, &FitOptions::default()).unwrap();
        assert!(fit.model.weights.iter().all(|w| w.abs() < 1e-3));
        assert!((fit.model.intercept - (0.3f64 / 0.7).ln()).abs() < 1e-3);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            fit_logistic(&x, &[1.0, 1.0], Penalty { alpha: 0.5, lambda: 1.0 }, &FitOptions::default()),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let x = vec![vec![f64::NAN], vec![2.0]];
        assert!(fit_logistic(&x, &[0.0, 1.0], Penalty { alpha: 0.5, lambda: 1.0 }, &FitOptions::default()).is_err());
    }

    #[test]
    fn standardizer_drops_constant_columns() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&rows);
        assert_eq!(s.keep, vec![true, false]);
        assert_eq!(s.transform(&[3.0, 5.0]), vec![1.0]);
    }
}
