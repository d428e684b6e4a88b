//! Monodromy of Schwarz-Christoffel periods when one prevertex is carried
//! around its neighbour, and extremal-length rates along degenerating
//! coordinate paths.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::config::{Configuration, CycleSystem, GeometricCoordinates};
use crate::error::{Error, Result};
use crate::height::HeightEvaluator;
use crate::polygon::{quad_extremal_length, ConformalPolygon, Cycle};
use crate::scmap::quadrature;
use crate::scmap::OrthodiskSpec;

/// Minimum number of loop samples.
pub const MIN_SAMPLES: usize = 64;
/// Largest integrand argument change accepted between adjacent samples.
const BRANCH_STEP: f64 = PI / 2.0;
/// Contour chords stay below this fraction of the distance to the nearest
/// prevertex.
const CHORD_RATIO: f64 = 0.2;
const MAX_DEPTH: usize = 40;
const NODES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonodromyResult {
    pub spec: OrthodiskSpec,
    /// Index of the fixed prevertex t_j; t_{j+1} circles it.
    pub j: usize,
    pub delta0: f64,
    pub gamma_before: C,
    pub gamma_after: C,
    pub beta_before: C,
    pub beta_after: C,
    /// |F(gamma) after - before - 2 F(beta)|.
    pub shift_error: f64,
    /// |F(beta) after - before|.
    pub beta_error: f64,
    /// Change of F(gamma) - log(delta)/(pi i) F(beta) around the loop.
    pub closure_error: f64,
    /// (F(gamma) after - before) / (2 F(beta)).
    pub winding: C,
    pub samples: usize,
}

/// Integrand with complex prevertices; the branch is fixed by the caller.
struct Field {
    t: Vec<C>,
    alpha: Vec<f64>,
    scale: C,
}

impl Field {
    fn principal(&self, z: C) -> C {
        let mut s = C::new(0.0, 0.0);
        for (t, a) in self.t.iter().zip(&self.alpha) {
            s += (z - t).ln() * *a;
        }
        self.scale * s.exp()
    }

    /// Branch of the integrand at `z` closest in argument to `prev`.
    fn follow(&self, z: C, prev: C) -> Option<C> {
        let f = self.principal(z);
        let f = if (f * prev.conj()).re >= 0.0 { f } else { -f };
        ((f / prev).arg().abs() < BRANCH_STEP).then_some(f)
    }

    fn distance(&self, z: C) -> f64 {
        self.t.iter().map(|t| (z - t).norm()).fold(f64::INFINITY, f64::min)
    }
}

/// Integral of the field around the closed curve `curve(s)`, s in [0, 1],
/// with the branch `f0` at `curve(0)`. Chords are refined until short
/// relative to the distance to the prevertices. Returns the integral and
/// the branch found back at the start.
fn loop_integral(field: &Field, curve: &dyn Fn(f64) -> C, f0: C) -> Result<(C, C)> {
    let rule = quadrature::rule(NODES, 0.0);
    let mut nodes: Vec<(f64, f64)> = rule.nodes.iter().copied().zip(rule.weights.iter().copied()).collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut stack: Vec<(f64, f64, usize)> = (0..8).rev().map(|k| (k as f64 / 8.0, (k + 1) as f64 / 8.0, 0)).collect();
    let mut total = C::new(0.0, 0.0);
    let mut prev = f0;
    while let Some((s0, s1, depth)) = stack.pop() {
        let (z0, z1) = (curve(s0), curve(s1));
        let d = field.distance(z0).min(field.distance(z1));
        if (z1 - z0).norm() > CHORD_RATIO * d {
            if depth >= MAX_DEPTH {
                return Err(Error::Path("contour passes too close to a prevertex".into()));
            }
            let mid = 0.5 * (s0 + s1);
            stack.push((mid, s1, depth + 1));
            stack.push((s0, mid, depth + 1));
            continue;
        }
        let h = z1 - z0;
        for &(x, w) in &nodes {
            let f = field.follow(z0 + h * x, prev).ok_or_else(|| Error::Path("branch jump along contour".into()))?;
            total += f * h * w;
            prev = f;
        }
    }
    let back = field.follow(curve(0.0), prev).ok_or_else(|| Error::Path("branch jump closing contour".into()))?;
    Ok((total, back))
}

/// Rotation by `theta` inside radius r1 about `center`, tapering linearly
/// to the identity at r2.
fn twist(z: C, center: C, theta: f64, r1: f64, r2: f64) -> C {
    let w = z - center;
    let r = w.norm();
    let s = if r <= r1 {
        1.0
    } else if r >= r2 {
        0.0
    } else {
        (r2 - r) / (r2 - r1)
    };
    center + w * C::from_polar(1.0, theta * s)
}

/// Carries t_{j+1} = t_j + delta0 e^{i theta} once counterclockwise around
/// t_j and follows
/// F(gamma) and F(beta), each half the integral over a closed loop: gamma
/// crosses the edges t_{j-2}t_{j-1} and t_jt_{j+1}, beta surrounds t_j and
/// t_{j+1}. The gamma contour is dragged by the isotopy that moves t_{j+1}.
pub fn continue_loop(spec: &OrthodiskSpec, j: usize, delta0: f64) -> Result<MonodromyResult> {
    let t0 = &spec.polygon.prevertices;
    if j < 2 || j + 1 >= t0.len() {
        return Err(Error::Geometry(format!("vertex {j} needs two finite prevertices on each side")));
    }
    if !(delta0 > 0.0) {
        return Err(Error::Domain("loop radius must be positive".into()));
    }
    let tj = t0[j];
    let (r1, r2, rb) = (1.2 * delta0, 1.8 * delta0, 2.5 * delta0);
    for (k, &t) in t0.iter().enumerate() {
        if k != j && k != j + 1 && (t - tj).abs() < 4.0 * delta0 {
            return Err(Error::Geometry(format!("loop of radius {delta0} around vertex {j} reaches prevertex {k}")));
        }
    }
    let center = C::new(tj, 0.0);
    let left = 0.5 * (t0[j - 2] + t0[j - 1]);
    let right = tj + 0.5 * delta0;
    let (gc, gr) = (C::new(0.5 * (left + right), 0.0), 0.5 * (right - left));
    // Both circles start at their tops. Gamma runs clockwise (left edge to
    // right edge over the top); beta is the positively oriented boundary of
    // the disk holding t_j and t_{j+1}.
    let gamma_base = move |s: f64| gc + C::from_polar(gr, PI / 2.0 - 2.0 * PI * s);
    let beta_curve = move |s: f64| center + C::from_polar(rb, PI / 2.0 + 2.0 * PI * s);
    let alpha: Vec<f64> = spec.exponents.iter().map(|&a| 0.5 * f64::from(a)).collect();
    let field_at = |theta: f64| {
        let mut t: Vec<C> = t0.iter().map(|&x| C::new(x, 0.0)).collect();
        t[j + 1] = center + C::from_polar(delta0, theta);
        Field { t, alpha: alpha.clone(), scale: spec.scale }
    };
    // At theta = 0 all prevertices are real and the principal product is the
    // upper half-plane branch at both starting points.
    let start0 = field_at(0.0);
    let (mut fg, mut fb) = (start0.principal(gamma_base(0.0)), start0.principal(beta_curve(0.0)));
    let eval = |theta: f64, fg: C, fb: C| -> Result<(C, C, C, C)> {
        let field = field_at(theta);
        let fg = field.follow(gamma_base(0.0), fg).ok_or_else(|| Error::Path("branch jump at gamma base".into()))?;
        let fb = field.follow(beta_curve(0.0), fb).ok_or_else(|| Error::Path("branch jump at beta base".into()))?;
        let curve = |s: f64| twist(gamma_base(s), center, theta, r1, r2);
        let (ig, back_g) = loop_integral(&field, &curve, fg)?;
        let (ib, back_b) = loop_integral(&field, &beta_curve, fb)?;
        if (back_g - fg).norm() > 1e-9 * fg.norm() || (back_b - fb).norm() > 1e-9 * fb.norm() {
            return Err(Error::Path("integrand not single-valued on a loop".into()));
        }
        Ok((0.5 * ig, 0.5 * ib, fg, fb))
    };
    let (g0, b0, _, _) = eval(0.0, fg, fb)?;
    let mut theta = 0.0;
    let mut step = 2.0 * PI / MIN_SAMPLES as f64;
    let mut samples = 1;
    let mut last = (g0, b0);
    while theta < 2.0 * PI {
        let next = (theta + step).min(2.0 * PI);
        match eval(next, fg, fb) {
            Ok((g, b, nfg, nfb)) => {
                theta = next;
                fg = nfg;
                fb = nfb;
                last = (g, b);
                samples += 1;
            }
            Err(e) => {
                step *= 0.5;
                if step < 1e-6 {
                    return Err(e);
                }
            }
        }
    }
    let (g1, b1) = last;
    let corrected = |g: C, b: C, theta: f64| g - C::new(delta0.ln(), theta) / C::new(0.0, PI) * b;
    let mut t = t0.clone();
    t[j + 1] = tj + delta0;
    Ok(MonodromyResult {
        spec: spec.with_prevertices(t)?,
        j,
        delta0,
        gamma_before: g0,
        gamma_after: g1,
        beta_before: b0,
        beta_after: b1,
        shift_error: (g1 - g0 - 2.0 * b0).norm(),
        beta_error: (b1 - b0).norm(),
        closure_error: (corrected(g1, b1, 2.0 * PI) - corrected(g0, b0, 0.0)).norm(),
        winding: (g1 - g0) / (2.0 * b0),
        samples,
    })
}

/// One point of a degenerating coordinate path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub eps: f64,
    pub ext_gdh: f64,
    pub ext_ginv: f64,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeTable {
    pub cfg: Configuration,
    pub cycle: String,
    pub rows: Vec<ProbeRow>,
    /// Set when a parameter problem failed; rows past that point are absent.
    pub failure: Option<String>,
}

impl ProbeTable {
    pub fn truncated(&self) -> bool {
        self.failure.is_some()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eps,ext_gdh,ext_ginv,height")?;
        for r in &self.rows {
            writeln!(w, "{:e},{:e},{:e},{:e}", r.eps, r.ext_gdh, r.ext_ginv, r.height)?;
        }
        Ok(())
    }

    /// Rows sorted by decreasing eps.
    fn shrinking(&self) -> Vec<&ProbeRow> {
        let mut rows: Vec<&ProbeRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        rows
    }

    /// Height increases monotonically as eps shrinks once it exceeds
    /// `threshold`, and does exceed it.
    pub fn blows_up(&self, threshold: f64) -> bool {
        let rows = self.shrinking();
        let Some(start) = rows.iter().position(|r| r.height > threshold) else {
            return false;
        };
        rows[start..].windows(2).all(|w| w[1].height > w[0].height)
    }

    /// Least-squares slopes of ln Ext against ln|ln eps| for both domains,
    /// over rows with eps in [lo, hi].
    pub fn log_rates(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let rows: Vec<&ProbeRow> = self.rows.iter().filter(|r| r.eps >= lo && r.eps <= hi).collect();
        if rows.len() < 3 {
            return None;
        }
        let x: Vec<f64> = rows.iter().map(|r| r.eps.ln().abs().ln()).collect();
        let fit = |y: Vec<f64>| fit_slope(&x, &y);
        Some((fit(rows.iter().map(|r| r.ext_gdh.ln()).collect()), fit(rows.iter().map(|r| r.ext_ginv.ln()).collect())))
    }
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Coordinates at which the periods of `cycles` all vanish, one cycle per
/// coordinate. Periods are affine in the coordinates.
pub fn vanishing_point(cfg: &Configuration, cycles: &[Cycle]) -> Result<Vec<f64>> {
    let d = cfg.dim();
    if cycles.len() != d {
        return Err(Error::Config(format!("{cfg} needs {d} cycles to pin a boundary point")));
    }
    let value = |v: &[f64], c: &Cycle, dir: C| -> Result<f64> {
        let gc = GeometricCoordinates::new(*cfg, v.to_vec())?;
        Ok((gc.period(c)? * dir.conj()).re)
    };
    let zero = vec![0.0; d];
    let mut a = nalgebra::DMatrix::zeros(d, d);
    let mut b = nalgebra::DVector::zeros(d);
    for (i, c) in cycles.iter().enumerate() {
        // Direction of the period: the normal of its foot edges.
        let dir = GeometricCoordinates::new(*cfg, vec![1.0; d])?.period(c)?;
        let dir = if dir.norm() > 0.0 { dir / dir.norm() } else { C::new(1.0, 0.0) };
        let v0 = value(&zero, c, dir)?;
        b[i] = -v0;
        for k in 0..d {
            let mut e = zero.clone();
            e[k] = 1.0;
            a[(i, k)] = value(&e, c, dir)? - v0;
        }
    }
    let x = a.lu().solve(&b).ok_or_else(|| Error::Geometry("cycle periods do not pin a point".into()))?;
    Ok(x.iter().copied().collect())
}

/// Extremal lengths of `cycle` on both domains along the path
/// boundary + eps (base - boundary). Points are solved in order of
/// decreasing eps with warm starts, so the table does not depend on the
/// order of `schedule`.
pub fn rate_divergence_probe(
    cfg: &Configuration,
    cycle: &Cycle,
    base: &GeometricCoordinates,
    boundary: &[f64],
    schedule: &[f64],
) -> Result<ProbeTable> {
    if base.cfg != *cfg || boundary.len() != cfg.dim() {
        return Err(Error::Config(format!("probe coordinates do not match {cfg}")));
    }
    let ev = HeightEvaluator::with_cycles(*cfg, CycleSystem { cycles: vec![cycle.clone()], diagnostics: vec![] })?;
    let mut order: Vec<f64> = schedule.to_vec();
    order.sort_by(|a, b| b.total_cmp(a));
    order.dedup();
    let mut solved: Vec<ProbeRow> = Vec::new();
    let mut failure = None;
    for &eps in &order {
        let values: Vec<f64> = boundary.iter().zip(&base.values).map(|(z, b)| z + eps * (b - z)).collect();
        let gc = GeometricCoordinates::new(*cfg, values)?;
        let row = ev.solve_pair(&gc).and_then(|pair| {
            let rep = ev.report(&pair)?;
            ev.insert(pair);
            let c = &rep.cycles[0];
            Ok(ProbeRow { eps, ext_gdh: c.ext_gdh, ext_ginv: c.ext_ginv, height: c.height })
        });
        match row {
            Ok(r) => solved.push(r),
            Err(e) => {
                failure = Some(format!("eps {eps:e}: {e}"));
                break;
            }
        }
    }
    let rows = schedule.iter().filter_map(|&e| solved.iter().find(|r| r.eps == e).cloned()).collect();
    Ok(ProbeTable { cfg: *cfg, cycle: cycle.name.clone(), rows, failure })
}

/// Extremal length of arcs joining (-inf, 0) to (eps, 1) as eps shrinks,
/// with the least-squares slope of ln Ext against ln|ln eps|.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
}

pub fn ohtsuka_fit(lo: f64, hi: f64, samples: usize) -> Result<RateFit> {
    if !(lo > 0.0 && hi < 1.0 && lo < hi && samples >= 3) {
        return Err(Error::Domain("need 0 < lo < hi < 1 and at least 3 samples".into()));
    }
    let mut points = Vec::with_capacity(samples);
    for k in 0..samples {
        let eps = (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (samples - 1) as f64).exp();
        let poly = ConformalPolygon::unlabeled(vec![0.0, eps, 1.0], true)?;
        points.push((eps, quad_extremal_length(&poly, 3, 1)?));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln().abs().ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    Ok(RateFit { slope: fit_slope(&x, &y), points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(t: Vec<f64>, a: Vec<i32>) -> OrthodiskSpec {
        let poly = ConformalPolygon::unlabeled(t, true).unwrap();
        OrthodiskSpec::new(poly, a, C::new(1.0, 0.0)).unwrap()
    }

    #[test]
    fn loop_shift_is_twice_beta() {
        let s = spec(vec![-2.0, -1.0, 0.0, 0.01, 1.0, 2.5], vec![1, -1, 1, -3, 3, -1]);
        let r = continue_loop(&s, 2, 1e-2).unwrap();
        assert!(r.samples >= MIN_SAMPLES);
        assert!(r.shift_error < 1e-6 * r.beta_before.norm(), "{r:?}");
    }

    #[test]
    fn beta_is_invariant_and_log_combination_closes() {
        let s = spec(vec![-3.0, -1.5, -0.4, 0.3, 1.1, 2.0], vec![-1, 1, -3, 3, 1, -1]);
        let r = continue_loop(&s, 2, 1e-2).unwrap();
        assert!(r.beta_error < 1e-8, "{r:?}");
        assert!(r.closure_error < 1e-6, "{r:?}");
        assert!((r.winding - 1.0).norm() < 1e-5, "{r:?}");
    }

    #[test]
    fn winding_survives_halving_radius() {
        let s = spec(vec![-2.0, -1.0, 0.0, 0.01, 1.0, 2.5], vec![1, -1, 1, -3, 3, -1]);
        let a = continue_loop(&s, 2, 1e-2).unwrap();
        let b = continue_loop(&s, 2, 5e-3).unwrap();
        assert!((a.winding - b.winding).norm() < 1e-6);
        assert!(a.shift_error < 1e-8 * a.beta_before.norm() && b.shift_error < 1e-8 * b.beta_before.norm());
    }

    #[test]
    fn loop_reaching_another_prevertex_is_refused() {
        let s = spec(vec![-2.0, -1.0, 0.0, 0.01, 0.02, 2.5], vec![1, -1, 1, -3, 3, -1]);
        assert!(matches!(continue_loop(&s, 2, 1e-2), Err(Error::Geometry(_))));
        assert!(matches!(continue_loop(&s, 1, 1e-2), Err(Error::Geometry(_))));
    }

    #[test]
    fn quadrilateral_rate_matches_closed_form() {
        // Oracle: for (-inf, 0, eps, 1) the modulus is K(k')/K(k) with
        // k'^2 = eps, whose expansion gives pi / ln(16 / eps) + O(eps).
        let f = ohtsuka_fit(1e-6, 1e-2, 25).unwrap();
        for &(eps, ext) in &f.points {
            let oracle = std::f64::consts::PI / (16.0 / eps).ln();
            assert!((ext - oracle).abs() < 2.0 * eps, "{eps} {ext} {oracle}");
        }
        let x: Vec<f64> = f.points.iter().map(|p| p.0.ln().abs().ln()).collect();
        let y: Vec<f64> = f.points.iter().map(|p| (std::f64::consts::PI / (16.0 / p.0).ln()).ln()).collect();
        assert!((f.slope - fit_slope(&x, &y)).abs() < 1e-3);
        assert!((f.slope + 0.745_29).abs() < 1e-4, "{}", f.slope);
    }

    #[test]
    fn probe_is_order_independent_and_writes_csv() {
        use crate::config::{colored_cycles, retraction_point};
        let cfg = Configuration::new(1, 1);
        let cs = colored_cycles(&cfg).unwrap();
        let (y, b) = (cs.get("yellow").unwrap().clone(), cs.get("blue").unwrap().clone());
        let bd = vanishing_point(&cfg, &[y, b.clone()]).unwrap();
        let base = retraction_point(&cfg).unwrap();
        let sched = [0.3, 0.1, 0.03, 0.01];
        let fwd = rate_divergence_probe(&cfg, &b, &base, &bd, &sched).unwrap();
        let rev: Vec<f64> = sched.iter().rev().copied().collect();
        let bwd = rate_divergence_probe(&cfg, &b, &base, &bd, &rev).unwrap();
        assert!(!fwd.truncated());
        let mut back = bwd.rows.clone();
        back.reverse();
        assert_eq!(fwd.rows, back);
        assert!(fwd.rows.windows(2).all(|w| w[1].ext_gdh < w[0].ext_gdh && w[1].ext_ginv < w[0].ext_ginv));
        let mut csv = Vec::new();
        fwd.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("eps,ext_gdh,ext_ginv,height\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
