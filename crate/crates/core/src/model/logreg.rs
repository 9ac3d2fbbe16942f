//! Multinomial logistic regression fitted by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegOptions {
    /// Inverse L2 strength; the penalty is `||W||² / (2 C n)` on the mean loss.
    pub c: f64,
    pub max_iter: usize,
    /// Stop when the gradient's Euclidean norm falls below this.
    pub tol: f64,
}

impl Default for LogRegOptions {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegFit {
    /// `coef[class][feature]`, on z-scored inputs.
    pub coef: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LogRegFit {
    /// L2 norm of each feature's coefficient column.
    pub fn column_norms(&self) -> Vec<f64> {
        let f = self.coef.first().map_or(0, Vec::len);
        (0..f)
            .map(|j| self.coef.iter().map(|row| row[j] * row[j]).sum::<f64>().sqrt())
            .collect()
    }
}

/// Fits `n_classes × n_features` coefficients on z-scored copies of the
/// columns. Zero-variance columns standardize to zero.
pub fn train_logreg(columns: &[&[f64]], target: &[usize], n_classes: usize, opts: &LogRegOptions) -> Result<LogRegFit> {
    if n_classes < 2 {
        return Err(Error::TooFewClasses(n_classes));
    }
    let n = target.len();
    if n == 0 {
        return Err(Error::InvalidRequest("logistic regression needs rows".into()));
    }
    if let Some(&bad) = target.iter().find(|&&t| t >= n_classes) {
        return Err(Error::UnknownClass(bad));
    }
    let f = columns.len();
    let mut x = vec![0.0; n * f];
    for (j, col) in columns.iter().enumerate() {
        if col.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: col.len() });
        }
        if let Some(row) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                feature: format!("#{j}"),
                row,
            });
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        let constant = col.iter().all(|&v| v == col[0]) || sd <= 1e-14 * mean.abs();
        if !constant {
            for i in 0..n {
                x[i * f + j] = (col[i] - mean) / sd;
            }
        }
    }

    let k = n_classes;
    let nf = n as f64;
    let reg = 1.0 / (opts.c * nf);
    let step = 1.0 / (0.5 * max_gram_eigen(&x, n, f) + reg);

    let mut w = vec![0.0; k * f];
    let mut b = vec![0.0; k];
    let mut gw = vec![0.0; k * f];
    let mut gb = vec![0.0; k];
    let mut p = vec![0.0; k];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        gw.iter_mut().for_each(|v| *v = 0.0);
        gb.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let xi = &x[i * f..(i + 1) * f];
            for c in 0..k {
                p[c] = b[c] + dot(&w[c * f..(c + 1) * f], xi);
            }
            let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in p.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for c in 0..k {
                let e = p[c] / sum - if target[i] == c { 1.0 } else { 0.0 };
                gb[c] += e;
                let g = &mut gw[c * f..(c + 1) * f];
                for j in 0..f {
                    g[j] += e * xi[j];
                }
            }
        }
        let mut norm2 = 0.0;
        for (g, wv) in gw.iter_mut().zip(&w) {
            *g = *g / nf + reg * wv;
            norm2 += *g * *g;
        }
        for g in gb.iter_mut() {
            *g /= nf;
            norm2 += *g * *g;
        }
        if norm2.sqrt() < opts.tol {
            converged = true;
            break;
        }
        for (wv, g) in w.iter_mut().zip(&gw) {
            *wv -= step * g;
        }
        for (bv, g) in b.iter_mut().zip(&gb) {
            *bv -= step * g;
        }
        iterations += 1;
    }

    Ok(LogRegFit {
        coef: (0..k).map(|c| w[c * f..(c + 1) * f].to_vec()).collect(),
        intercept: b,
        iterations,
        converged,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Upper estimate of the largest eigenvalue of `[1 X]ᵀ[1 X] / n`, by power
/// iteration with a safety margin.
fn max_gram_eigen(x: &[f64], n: usize, f: usize) -> f64 {
    let d = f + 1;
    let mut gram = vec![0.0; d * d];
    for i in 0..n {
        let row = |j: usize| if j == 0 { 1.0 } else { x[i * f + j - 1] };
        for a in 0..d {
            let ra = row(a);
            for bcol in a..d {
                gram[a * d + bcol] += ra * row(bcol);
            }
        }
    }
    for a in 0..d {
        for bcol in a..d {
            gram[a * d + bcol] /= n as f64;
            gram[bcol * d + a] = gram[a * d + bcol];
        }
    }
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let mut next = vec![0.0; d];
        for a in 0..d {
            next[a] = dot(&gram[a * d..(a + 1) * d], &v);
        }
        let norm = dot(&next, &next).sqrt();
        if norm == 0.0 {
            break;
        }
        lambda = norm;
        v = next.into_iter().map(|e| e / norm).collect();
    }
    let trace: f64 = (0..d).map(|a| gram[a * d + a]).sum();
    (lambda * 1.05).min(trace).max(1e-12)
}
