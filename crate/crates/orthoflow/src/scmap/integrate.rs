//! Adaptive straight-segment integration of integrands with algebraic
//! endpoint singularities.
//!
//! A segment is split until every piece is either regular (nearest
//! singularity at least one piece-length from its midpoint, integrated by
//! Gauss-Legendre) or has one singular endpoint and lies within half the
//! distance to the next singularity (integrated by Gauss-Jacobi).

use num_complex::Complex64 as C;

use super::quadrature::{rule, DEFAULT_ORDER};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Singularity {
    pub at: C,
    pub exponent: f64,
}

pub trait Integrand {
    fn eval(&self, z: C) -> C;
    fn singularities(&self) -> &[Singularity];
}

const MAX_PIECES: usize = 20_000;
const REGULAR_RATIO: f64 = 1.0;
const SINGULAR_RATIO: f64 = 0.5;

#[derive(Clone, Copy, Debug)]
pub struct Integrator {
    pub order: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { order: DEFAULT_ORDER }
    }
}

fn coincides(z: C, w: C) -> bool {
    (z - w).norm() <= 1e-13 * (1.0 + w.norm())
}

fn singular_at<I: Integrand + ?Sized>(f: &I, z: C) -> Option<usize> {
    f.singularities().iter().position(|s| coincides(z, s.at))
}

fn nearest<I: Integrand + ?Sized>(f: &I, z: C, skip: Option<usize>) -> f64 {
    f.singularities()
        .iter()
        .enumerate()
        .filter(|(k, _)| Some(*k) != skip)
        .map(|(_, s)| (s.at - z).norm())
        .fold(f64::INFINITY, f64::min)
}

impl Integrator {
    pub fn with_order(order: usize) -> Self {
        Self { order }
    }

    /// Integral of `f` over the straight segment from `a` to `b`.
    pub fn segment<I: Integrand + ?Sized>(&self, f: &I, a: C, b: C) -> Result<C> {
        let mut stack = vec![(a, b, singular_at(f, a), singular_at(f, b))];
        let mut total = C::new(0.0, 0.0);
        let mut pieces = 0usize;
        while let Some((a, b, sa, sb)) = stack.pop() {
            pieces += 1;
            if pieces > MAX_PIECES {
                return Err(Error::Path(format!("segment {a} -> {b} needs too many pieces")));
            }
            let h = b - a;
            let len = h.norm();
            if len == 0.0 {
                continue;
            }
            if len < 1e-14 * (1.0 + a.norm()) {
                return Err(Error::Path(format!("path passes through a prevertex near {a}")));
            }
            let mid = a + 0.5 * h;
            match (sa, sb) {
                (Some(_), Some(_)) => {
                    stack.push((a, mid, sa, None));
                    stack.push((mid, b, None, sb));
                }
                (Some(k), None) => {
                    if len <= SINGULAR_RATIO * nearest(f, a, Some(k)) {
                        total += self.jacobi(f, a, h, f.singularities()[k].exponent);
                    } else {
                        stack.push((a, mid, sa, None));
                        stack.push((mid, b, None, None));
                    }
                }
                (None, Some(k)) => {
                    if len <= SINGULAR_RATIO * nearest(f, b, Some(k)) {
                        total -= self.jacobi(f, b, -h, f.singularities()[k].exponent);
                    } else {
                        stack.push((a, mid, None, None));
                        stack.push((mid, b, None, sb));
                    }
                }
                (None, None) => {
                    let d = nearest(f, mid, None);
                    if d >= REGULAR_RATIO * len {
                        total += self.legendre(f, a, h);
                    } else {
                        if d < 1e-14 * (1.0 + mid.norm()) {
                            return Err(Error::Path(format!("path passes through a prevertex near {mid}")));
                        }
                        stack.push((a, mid, None, None));
                        stack.push((mid, b, None, None));
                    }
                }
            }
        }
        Ok(total)
    }

    /// Integral along a polyline.
    pub fn path<I: Integrand + ?Sized>(&self, f: &I, pts: &[C]) -> Result<C> {
        let mut total = C::new(0.0, 0.0);
        for w in pts.windows(2) {
            total += self.segment(f, w[0], w[1])?;
        }
        Ok(total)
    }

    fn legendre<I: Integrand + ?Sized>(&self, f: &I, a: C, h: C) -> C {
        let r = rule(self.order, 0.0);
        let sum: C = r.nodes.iter().zip(&r.weights).map(|(&s, &w)| f.eval(a + h * s) * w).sum();
        sum * h
    }

    /// h * int_0^1 f(a + s h) ds with f ~ s^beta at s = 0.
    fn jacobi<I: Integrand + ?Sized>(&self, f: &I, a: C, h: C, beta: f64) -> C {
        if beta == 0.0 {
            return self.legendre(f, a, h);
        }
        let r = rule(self.order, beta);
        let sum: C = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(&s, &w)| f.eval(a + h * s) * (w / s.powf(beta)))
            .sum();
        sum * h
    }
}
