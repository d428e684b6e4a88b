//! The parameter problem: find prevertices whose normalized edge offsets
//! match a target.
//!
//! Polygons are symmetric under t -> -t with infinity and 0 fixed and one
//! point pinned at -1 (its mirror at +1). Unknowns are log-gaps, so the
//! ordering of prevertices is preserved for every value of the unknowns.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use super::integrate::Integrator;
use super::{edge_offsets, vertex_map, OrthodiskSpec};
use crate::error::{Error, Result};
use crate::lsq::{self, LmOptions};
use crate::polygon::ConformalPolygon;

/// Symmetric gauge with `outer` points left of -1 and `inner` points in (-1, 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetricGauge {
    pub outer: usize,
    pub inner: usize,
}

impl SymmetricGauge {
    pub fn dim(&self) -> usize {
        self.outer + self.inner
    }

    /// Number of finite prevertices: both halves, the pinned pair and 0.
    pub fn finite_count(&self) -> usize {
        2 * (self.outer + self.inner + 1) + 1
    }

    /// Left-half points in increasing order, ending with 0.
    fn left_half(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim());
        let mut outer = Vec::with_capacity(self.outer);
        let mut p = -1.0;
        for &u in &x[..self.outer] {
            p -= u.exp();
            outer.push(p);
        }
        outer.reverse();
        let w: Vec<f64> = std::iter::once(0.0).chain(x[self.outer..].iter().copied()).collect();
        let wmax = w.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = w.iter().map(|v| (v - wmax).exp()).collect();
        let total: f64 = e.iter().sum();
        let mut inner = Vec::with_capacity(self.inner);
        let mut p = -1.0;
        for g in &e[..self.inner] {
            p += g / total;
            inner.push(p);
        }
        let mut left = outer;
        left.push(-1.0);
        left.extend(inner);
        left.push(0.0);
        left
    }

    /// Finite prevertices for the unknowns `x`.
    pub fn prevertices(&self, x: &[f64]) -> Vec<f64> {
        let left = self.left_half(x);
        let mut t = left.clone();
        t.extend(left[..left.len() - 1].iter().rev().map(|v| -v));
        t
    }

    /// Inverse of [`prevertices`](Self::prevertices).
    pub fn unknowns(&self, t: &[f64]) -> Result<Vec<f64>> {
        if t.len() != self.finite_count() {
            return Err(Error::InvalidPolygon("prevertex count does not match gauge".into()));
        }
        let c = self.outer;
        if (t[c] + 1.0).abs() > 1e-12 || t[c + self.inner + 1].abs() > 1e-12 {
            return Err(Error::InvalidPolygon("polygon is not in gauge".into()));
        }
        let mut x = Vec::with_capacity(self.dim());
        let mut prev = -1.0;
        for k in (0..c).rev() {
            x.push((prev - t[k]).ln());
            prev = t[k];
        }
        let g0 = t[c + 1] - t[c];
        for k in 0..self.inner {
            x.push(((t[c + 2 + k] - t[c + 1 + k]) / g0).ln());
        }
        Ok(x)
    }

    /// Marked-point symmetry (finite points mirrored, infinity fixed).
    pub fn involution(&self) -> Vec<usize> {
        let n = self.finite_count();
        let mut s: Vec<usize> = (0..n).map(|k| n - 1 - k).collect();
        s.push(n);
        s
    }

    /// Gauge-normalized polygon for `x` carrying the given labels.
    pub fn polygon(&self, x: &[f64], labels: &[String]) -> Result<ConformalPolygon> {
        ConformalPolygon::new(self.prevertices(x), true, labels.to_vec())?.with_symmetry(self.involution())
    }
}

/// Normalized offset targets: `values[j]` is the target for
/// q[rows[j]] / sum(q[norm]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetTarget {
    pub rows: Vec<usize>,
    pub norm: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamSolution {
    pub spec: OrthodiskSpec,
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Offsets normalized so that the `norm` rows sum to one; also returns the sum.
pub fn normalized_offsets(spec: &OrthodiskSpec, norm: &[usize], integ: &Integrator) -> Result<(Vec<f64>, f64)> {
    let vm = vertex_map(spec, integ)?;
    let q = edge_offsets(spec, &vm)?;
    let s: f64 = norm.iter().map(|&k| q[k]).sum();
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::Geometry("normalization sum is not positive".into()));
    }
    Ok((q.iter().map(|v| v / s).collect(), s))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamOptions {
    pub lm: LmOptions,
    /// Required max-norm residual.
    pub tol: f64,
    pub order: usize,
}

impl Default for ParamOptions {
    fn default() -> Self {
        Self {
            lm: LmOptions { tol: 1e-13, max_iter: 80, ..LmOptions::default() },
            tol: 1e-8,
            order: super::quadrature::DEFAULT_ORDER,
        }
    }
}

/// Solves for gauge unknowns so that the normalized offsets hit `target`,
/// starting from `init`. The returned spec is rescaled so the normalization
/// rows sum to one.
pub fn solve_parameter_problem(
    exponents: &[i32],
    gauge: &SymmetricGauge,
    target: &OffsetTarget,
    init: &ConformalPolygon,
    opts: &ParamOptions,
) -> Result<ParamSolution> {
    let x0 = gauge.unknowns(&init.prevertices)?;
    solve_from(exponents, gauge, target, &init.labels, &x0, opts)
}

pub fn solve_from(
    exponents: &[i32],
    gauge: &SymmetricGauge,
    target: &OffsetTarget,
    labels: &[String],
    x0: &[f64],
    opts: &ParamOptions,
) -> Result<ParamSolution> {
    let integ = Integrator::with_order(opts.order);
    let spec_at = |x: &[f64]| -> Result<OrthodiskSpec> {
        let poly = gauge.polygon(x, labels)?;
        OrthodiskSpec::new(poly, exponents.to_vec(), C::new(1.0, 0.0))
    };
    let residual = |x: &[f64]| -> Option<Vec<f64>> {
        if x.iter().any(|v| !v.is_finite() || v.abs() > 40.0) {
            return None;
        }
        let spec = spec_at(x).ok()?;
        let (q, _) = normalized_offsets(&spec, &target.norm, &integ).ok()?;
        Some(target.rows.iter().zip(&target.values).map(|(&k, &v)| q[k] - v).collect())
    };
    let rep = lsq::minimize(residual, x0, &opts.lm);
    let maxres = rep.residuals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(maxres <= opts.tol) || rep.residuals.is_empty() && gauge.dim() > 0 {
        return Err(Error::NoConvergence { iterations: rep.iterations, residual: maxres });
    }
    let spec = spec_at(&rep.x)?;
    let (_, s) = normalized_offsets(&spec, &target.norm, &integ)?;
    Ok(ParamSolution {
        spec: spec.with_scale(C::new(1.0 / s, 0.0)),
        x: rep.x,
        residual: maxres,
        iterations: rep.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauge_round_trip() {
        let g = SymmetricGauge { outer: 2, inner: 3 };
        let x = vec![0.3, -0.2, 0.5, -1.0, 0.7];
        let t = g.prevertices(&x);
        assert_eq!(t.len(), g.finite_count());
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(t[2], -1.0);
        assert_eq!(t[6], 0.0);
        assert!(t.iter().zip(t.iter().rev()).all(|(a, b)| (a + b).abs() < 1e-15));
        let back = g.unknowns(&t).unwrap();
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn involution_reverses_order() {
        let g = SymmetricGauge { outer: 1, inner: 1 };
        let labels: Vec<String> = (0..8).map(|k| k.to_string()).collect();
        let p = g.polygon(&[0.0, 0.0], &labels).unwrap();
        assert_eq!(p.symmetry.as_ref().unwrap()[7], 7);
    }
}
