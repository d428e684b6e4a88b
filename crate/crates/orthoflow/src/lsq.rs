//! Levenberg-Marquardt least squares with finite-difference Jacobians.
//!
//! Residual closures return `None` for infeasible points; such trial steps
//! are rejected and the damping is increased.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop once the residual norm is below this value.
    pub tol: f64,
    /// Stop once a step changes no coordinate by more than this.
    pub step_tol: f64,
    pub fd_step: f64,
    pub central: bool,
    pub lambda0: f64,
    pub parallel: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-12,
            step_tol: 1e-14,
            fd_step: 1e-7,
            central: false,
            lambda0: 1e-3,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LmStep {
    pub iteration: usize,
    pub residual: f64,
    pub lambda: f64,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LmReport {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<LmStep>,
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn jacobian<F>(f: &F, x: &[f64], r0: &[f64], opts: &LmOptions) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>> + Sync,
{
    let n = x.len();
    let column = |j: usize| -> Option<Vec<f64>> {
        let h = opts.fd_step * (1.0 + x[j].abs());
        let mut xp = x.to_vec();
        xp[j] += h;
        let rp = f(&xp)?;
        if opts.central {
            let mut xm = x.to_vec();
            xm[j] -= h;
            let rm = f(&xm)?;
            Some(rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        } else {
            Some(rp.iter().zip(r0).map(|(a, b)| (a - b) / h).collect())
        }
    };
    let cols: Vec<Option<Vec<f64>>> = if opts.parallel {
        (0..n).into_par_iter().map(column).collect()
    } else {
        (0..n).map(column).collect()
    };
    let mut jac = DMatrix::zeros(r0.len(), n);
    for (j, c) in cols.into_iter().enumerate() {
        let c = c?;
        for (i, v) in c.into_iter().enumerate() {
            jac[(i, j)] = v;
        }
    }
    Some(jac)
}

pub fn minimize<F>(f: F, x0: &[f64], opts: &LmOptions) -> LmReport
where
    F: Fn(&[f64]) -> Option<Vec<f64>> + Sync,
{
    minimize_with(f, x0, opts, |_, _| {})
}

/// As [`minimize`], calling `on_accept(x, r)` for the start point and each
/// accepted step, in order.
pub fn minimize_with<F, A>(f: F, x0: &[f64], opts: &LmOptions, mut on_accept: A) -> LmReport
where
    F: Fn(&[f64]) -> Option<Vec<f64>> + Sync,
    A: FnMut(&[f64], &[f64]),
{
    let mut x = x0.to_vec();
    let Some(mut r) = f(&x) else {
        return LmReport {
            x,
            residuals: vec![],
            residual_norm: f64::INFINITY,
            iterations: 0,
            converged: false,
            trace: vec![],
        };
    };
    on_accept(&x, &r);
    let mut cost = norm(&r);
    let mut lambda = opts.lambda0;
    let mut trace = vec![LmStep { iteration: 0, residual: cost, lambda, x: x.clone() }];
    let mut iterations = 0;
    let n = x.len();
    let mut converged = cost <= opts.tol;
    while !converged && iterations < opts.max_iter && n > 0 {
        iterations += 1;
        let Some(jac) = jacobian(&f, &x, &r, opts) else {
            break;
        };
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * rv;
        let mut accepted = false;
        let mut small_step = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(delta) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            let step = delta.iter().zip(&x).map(|(d, v)| d.abs() / (1.0 + v.abs())).fold(0.0, f64::max);
            match f(&trial) {
                Some(rt) if norm(&rt) < cost => {
                    x = trial;
                    r = rt;
                    cost = norm(&r);
                    on_accept(&x, &r);
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    small_step = step < opts.step_tol;
                    break;
                }
                _ => {
                    if step < opts.step_tol {
                        small_step = true;
                        break;
                    }
                    lambda *= 4.0;
                }
            }
        }
        trace.push(LmStep { iteration: iterations, residual: cost, lambda, x: x.clone() });
        converged = cost <= opts.tol;
        if !accepted || small_step {
            break;
        }
    }
    LmReport { x, residuals: r, residual_norm: cost, iterations, converged, trace }
}
