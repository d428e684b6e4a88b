//! Shared test oracles.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Discrete extremal length of the arcs in the upper half-plane joining
/// (x0, x1) to (x2, x3), for increasing real x0..x3 (x3 may be infinite).
///
/// A real Moebius map takes the corners to -1/a, -a, a, 1/a with the same
/// cross ratio; the Cayley map then puts them at angles +-phi and pi +- phi
/// on the unit circle. The mixed problem u = 0 on one side, u = 1 on the
/// other, free elsewhere, is odd about the real diameter (u = 1/2 there) and
/// even about the imaginary one, so it is solved on the quarter disk
/// 0 <= arg w <= pi/2 with a polar triangle mesh graded toward the corner
/// and the rim. The capacity is four times the piecewise-linear Dirichlet
/// energy of the quarter; extremal length is its inverse.
pub fn grid_extremal_length(x: [f64; 4], angular: usize) -> f64 {
    let lambda = if x[3].is_infinite() {
        (x[1] - x[0]) / (x[2] - x[0])
    } else {
        (x[1] - x[0]) * (x[3] - x[2]) / ((x[2] - x[0]) * (x[3] - x[1]))
    };
    let a = ((1.0 - lambda.sqrt()) / (1.0 + lambda.sqrt())).sqrt();
    let phi = (2.0 * a).atan2(1.0 - a * a);
    let mesh = SectorMesh::new(phi, angular, angular / 4);
    1.0 / (4.0 * mesh.energy())
}

/// Richardson extrapolation of the grid oracle over three refinements.
pub fn grid_extremal_length_converged(x: [f64; 4], base: usize) -> (f64, f64) {
    let e: Vec<f64> = (0..3).map(|k| grid_extremal_length(x, base << k)).collect();
    let (d1, d2) = (e[1] - e[0], e[2] - e[1]);
    let ratio = d1 / d2;
    let extrapolated = if ratio > 1.0 && ratio.is_finite() { e[2] + d2 / (ratio - 1.0) } else { e[2] };
    (extrapolated, (extrapolated - e[2]).abs())
}

const GRADING: f64 = 2.0;

fn graded(s: f64) -> f64 {
    let (a, b) = (s.powf(GRADING), (1.0 - s).powf(GRADING));
    a / (a + b)
}

struct SectorMesh {
    points: Vec<[f64; 2]>,
    /// Fixed value per node, if any.
    fixed: Vec<Option<f64>>,
    triangles: Vec<[usize; 3]>,
}

impl SectorMesh {
    /// `angular` is the node count of the full circle at uniform spacing.
    fn new(phi: f64, angular: usize, radial: usize) -> Self {
        // Each arc between corners of the full circle is graded toward both
        // ends; the quarter keeps half of [-phi, phi] and half of [phi, pi - phi].
        let count = |len: f64| 2 * (((angular as f64) * len / (4.0 * PI)).ceil().max(4.0) as usize);
        let (c1, c2) = (count(2.0 * phi), count(PI - 2.0 * phi));
        let mut angles: Vec<f64> = (0..=c1 / 2).map(|i| 2.0 * phi * (graded(0.5 + i as f64 / c1 as f64) - 0.5)).collect();
        angles.extend((1..=c2 / 2).map(|i| 0.5 * PI + (PI - 2.0 * phi) * (graded(i as f64 / c2 as f64) - 0.5)));
        let m = angles.len();
        let mut points = vec![[0.0, 0.0]];
        let mut fixed = vec![Some(0.5)];
        for j in 1..=radial {
            let r = 1.0 - (1.0 - j as f64 / radial as f64).powf(GRADING);
            for (i, &t) in angles.iter().enumerate() {
                points.push([r * t.cos(), r * t.sin()]);
                fixed.push(if i == 0 {
                    Some(0.5)
                } else if j == radial && i >= c1 / 2 {
                    Some(0.0)
                } else {
                    None
                });
            }
        }
        let node = |j: usize, i: usize| 1 + (j - 1) * m + i;
        let mut triangles = Vec::new();
        for i in 0..m - 1 {
            triangles.push([0, node(1, i), node(1, i + 1)]);
        }
        for j in 1..radial {
            for i in 0..m - 1 {
                let (a, b, c, d) = (node(j, i), node(j, i + 1), node(j + 1, i), node(j + 1, i + 1));
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        Self { points, fixed, triangles }
    }

    /// Cotangent stiffness as symmetric edge weights.
    fn weights(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.points.len()];
        for t in &self.triangles {
            for k in 0..3 {
                let (i, j, o) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
                let (p, q, r) = (self.points[i], self.points[j], self.points[o]);
                let u = [p[0] - r[0], p[1] - r[1]];
                let v = [q[0] - r[0], q[1] - r[1]];
                let cot = (u[0] * v[0] + u[1] * v[1]) / (u[0] * v[1] - u[1] * v[0]).abs();
                adj[i].push((j, 0.5 * cot));
                adj[j].push((i, 0.5 * cot));
            }
        }
        for a in &mut adj {
            a.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(a.len());
            for &(j, w) in a.iter() {
                match merged.last_mut() {
                    Some(l) if l.0 == j => l.1 += w,
                    _ => merged.push((j, w)),
                }
            }
            *a = merged;
        }
        adj
    }

    /// Minimal Dirichlet energy by Jacobi-preconditioned conjugate gradients.
    fn energy(&self) -> f64 {
        let adj = self.weights();
        let n = self.points.len();
        let diag: Vec<f64> = adj.iter().map(|a| a.iter().map(|e| e.1).sum()).collect();
        let free: Vec<bool> = self.fixed.iter().map(Option::is_none).collect();
        let mut u: Vec<f64> = self.fixed.iter().map(|f| f.unwrap_or(0.5)).collect();
        // Residual of the free equations: r = -(K u)_free.
        let apply = |x: &[f64], out: &mut Vec<f64>, free_only: bool| {
            for i in 0..n {
                if !free[i] {
                    out[i] = 0.0;
                    continue;
                }
                let mut s = diag[i] * x[i];
                for &(j, w) in &adj[i] {
                    if !free_only || free[j] {
                        s -= w * x[j];
                    }
                }
                out[i] = s;
            }
        };
        let mut r = vec![0.0; n];
        apply(&u, &mut r, false);
        r.iter_mut().for_each(|v| *v = -*v);
        let mut z: Vec<f64> = (0..n).map(|i| if free[i] { r[i] / diag[i] } else { 0.0 }).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let r0 = rz.abs().sqrt();
        let mut kp = vec![0.0; n];
        for _ in 0..20 * n {
            apply(&p, &mut kp, true);
            let alpha = rz / p.iter().zip(&kp).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..n {
                u[i] += alpha * p[i];
                r[i] -= alpha * kp[i];
            }
            for i in 0..n {
                z[i] = if free[i] { r[i] / diag[i] } else { 0.0 };
            }
            let next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            if next.abs().sqrt() < 1e-10 * r0 {
                break;
            }
            let beta = next / rz;
            rz = next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let mut energy = 0.0;
        for (i, a) in adj.iter().enumerate() {
            for &(j, w) in a {
                if j > i {
                    energy += w * (u[i] - u[j]).powi(2);
                }
            }
        }
        energy
    }
}

/// Increasing quad with (x1 - x0)/(x2 - x0) = lambda when x3 is sent back
/// to infinity: the image of (0, lambda, 1, inf) under
/// z -> (alpha z + beta)/(z - pole), with pole < 0 and alpha (-pole) + beta < 0
/// so the order is kept.
pub fn mobius_quad(lambda: f64, alpha: f64, beta: f64, pole: f64) -> [f64; 4] {
    let f = |z: f64| (alpha * z + beta) / (z - pole);
    [f(0.0), f(lambda), f(1.0), alpha]
}

/// Largest gap between the developed turning angle at a finite vertex with
/// finite neighbours and pi (a_i + 2)/2 mod 2 pi.
pub fn turning_defect(spec: &orthoflow::scmap::OrthodiskSpec) -> f64 {
    let d = orthoflow::scmap::develop(spec).expect("develop");
    let m = spec.polygon.point_count();
    let mut worst = 0.0f64;
    for i in 0..m {
        let (Some(before), Some(after)) = (d.measured_direction((i + m - 1) % m), d.measured_direction(i)) else {
            continue;
        };
        let turn = (after / before).arg().rem_euclid(2.0 * PI);
        let law = (PI * f64::from(spec.exponent(i) + 2) / 2.0).rem_euclid(2.0 * PI);
        let gap = (turn - law).abs();
        worst = worst.max(gap.min(2.0 * PI - gap));
    }
    worst
}
