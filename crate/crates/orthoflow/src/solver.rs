//! Reflexive pairs: height minimization over geometric coordinates, the
//! dual period-residual formulation on a shared polygon, continuation
//! between configurations and the edge-push sign experiment.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{retraction_point, validate_coordinates, Configuration, GeometricCoordinates};
use crate::error::{Error, Result};
use crate::height::{HeightEvaluator, HeightReport, PairSolution};
use crate::lsq::{self, LmOptions};
use crate::polygon::{cycle_extremal_length_with, ConformalPolygon, Cycle};
use crate::scmap::integrate::Integrator;
use crate::scmap::param::normalized_offsets;
use crate::scmap::OrthodiskSpec;

/// Height below which a pair counts as reflexive.
pub const HEIGHT_TOL: f64 = 1e-6;
/// Conjugacy residual below which a pair counts as reflexive.
pub const CONJUGACY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub height: f64,
    pub residual: f64,
    pub coordinates: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    pub cfg: Configuration,
    pub gc: GeometricCoordinates,
    /// Gauge-normalized shared polygon.
    pub polygon: ConformalPolygon,
    /// Gauge unknowns of the shared polygon.
    pub x: Vec<f64>,
    pub spec_gdh: OrthodiskSpec,
    pub spec_ginv: OrthodiskSpec,
    pub height: f64,
    pub report: Option<HeightReport>,
    pub conjugacy_residual: f64,
    pub iterations: usize,
    pub reflexive: bool,
    pub trace: Vec<TraceEntry>,
}

impl SolveResult {
    /// Writes the trace as JSON lines.
    pub fn write_trace<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.trace {
            let line = serde_json::to_string(t).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    pub lm: LmOptions,
    pub height_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            lm: LmOptions { tol: 1e-11, max_iter: 100, fd_step: 1e-7, ..LmOptions::default() },
            height_tol: HEIGHT_TOL,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualOptions {
    pub lm: LmOptions,
    pub tol: f64,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self { lm: LmOptions { tol: 1e-14, max_iter: 100, ..LmOptions::default() }, tol: 1e-10 }
    }
}

/// Normalized offset differences of the two orthodisks on one polygon, one
/// entry per mirror pair of edges.
pub fn conjugacy_terms(cfg: &Configuration, poly: &ConformalPolygon, integ: &Integrator) -> Result<Vec<f64>> {
    let (s1, s2) = cfg.specs(poly)?;
    let norm = cfg.outer_edges();
    let (q1, _) = normalized_offsets(&s1, &norm, integ)?;
    let (q2, _) = normalized_offsets(&s2, &norm, integ)?;
    Ok(cfg.left_edges().iter().map(|&k| q1[k] - q2[k]).collect())
}

/// Largest normalized period mismatch between the Gdh periods and the
/// conjugated G^-1dh periods on a shared polygon.
pub fn conjugacy_residual(cfg: &Configuration, poly: &ConformalPolygon) -> Result<f64> {
    let r = conjugacy_terms(cfg, poly, &Integrator::default())?;
    Ok(r.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Largest prevertex difference between two gauge-normalized polygons.
pub fn prevertex_distance(a: &ConformalPolygon, b: &ConformalPolygon) -> f64 {
    a.prevertices.iter().zip(&b.prevertices).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Both specs on the shared polygon, scaled so the outer sheet has length one.
fn shared_specs(cfg: &Configuration, poly: &ConformalPolygon) -> Result<(OrthodiskSpec, OrthodiskSpec)> {
    let (s1, s2) = cfg.specs(poly)?;
    let integ = Integrator::default();
    let norm = cfg.outer_edges();
    let (_, a) = normalized_offsets(&s1, &norm, &integ)?;
    let (_, b) = normalized_offsets(&s2, &norm, &integ)?;
    Ok((s1.with_scale(num_complex::Complex64::new(1.0 / a, 0.0)), s2.with_scale(num_complex::Complex64::new(1.0 / b, 0.0))))
}

fn finish_pair(ev: &HeightEvaluator, pair: &PairSolution, iterations: usize, trace: Vec<TraceEntry>, tol: f64) -> Result<SolveResult> {
    let cfg = ev.cfg;
    let report = ev.report(pair)?;
    let x: Vec<f64> = pair.gdh.x.iter().zip(&pair.ginv.x).map(|(a, b)| 0.5 * (a + b)).collect();
    let polygon = cfg.polygon(&x)?;
    let conj = conjugacy_residual(&cfg, &polygon)?;
    let (spec_gdh, spec_ginv) = shared_specs(&cfg, &polygon)?;
    let height = report.total;
    Ok(SolveResult {
        cfg,
        gc: GeometricCoordinates::new(cfg, pair.gc.clone())?,
        polygon,
        x,
        spec_gdh,
        spec_ginv,
        height,
        report: Some(report),
        conjugacy_residual: conj,
        iterations,
        reflexive: height < tol && conj < CONJUGACY_TOL,
        trace,
    })
}

/// Least-squares descent of the height from `init`. A stall above the
/// threshold is returned with `reflexive == false`.
pub fn minimize_height(cfg: &Configuration, init: &GeometricCoordinates, opts: &SolveOptions) -> Result<SolveResult> {
    let ev = HeightEvaluator::new(*cfg)?;
    minimize_height_with(&ev, init, opts)
}

pub fn minimize_height_with(ev: &HeightEvaluator, init: &GeometricCoordinates, opts: &SolveOptions) -> Result<SolveResult> {
    let cfg = ev.cfg;
    if init.cfg != cfg {
        return Err(Error::Config(format!("initial coordinates belong to {}", init.cfg)));
    }
    if let Err(v) = validate_coordinates(init) {
        return Err(Error::Geometry(format!("initial coordinates inadmissible: {} violations", v.len())));
    }
    let first = ev.solve_pair(init)?;
    ev.insert(first);
    let mut trace = Vec::new();
    let mut iteration = 0;
    let rep = lsq::minimize_with(|x| ev.residuals(x), &init.values, &opts.lm, |x, r| {
        ev.commit(x);
        let h: f64 = r.iter().map(|v| v * v).sum();
        trace.push(TraceEntry { iteration, height: h, residual: h.sqrt(), coordinates: x.to_vec() });
        iteration += 1;
    });
    let gc = GeometricCoordinates::new(cfg, rep.x)?;
    let pair = ev.solve_pair(&gc)?;
    log::info!("{cfg}: height {:.3e} after {} iterations", rep.residual_norm.powi(2), rep.iterations);
    finish_pair(ev, &pair, rep.iterations, trace, opts.height_tol)
}

/// Height minimization from the retraction point.
pub fn solve(cfg: &Configuration, opts: &SolveOptions) -> Result<SolveResult> {
    if cfg.obstructed() {
        return Err(Error::Obstructed { m: cfg.m, n: cfg.n });
    }
    let init = if cfg.dim() == 0 { GeometricCoordinates::new(*cfg, vec![])? } else { retraction_point(cfg)? };
    minimize_height(cfg, &init, opts)
}

/// Least squares on the period mismatch over a shared symmetric polygon
/// with gauge unknowns `x0`.
pub fn minimize_period_residual(cfg: &Configuration, x0: &[f64], opts: &DualOptions) -> Result<SolveResult> {
    if x0.len() != cfg.dim() {
        return Err(Error::Config(format!("{cfg} needs {} polygon unknowns", cfg.dim())));
    }
    let integ = Integrator::default();
    let f = |x: &[f64]| -> Option<Vec<f64>> {
        if x.iter().any(|v| !v.is_finite() || v.abs() > 40.0) {
            return None;
        }
        let poly = cfg.polygon(x).ok()?;
        conjugacy_terms(cfg, &poly, &integ).ok()
    };
    let mut trace = Vec::new();
    let mut iteration = 0;
    let rep = lsq::minimize_with(f, x0, &opts.lm, |x, r| {
        let res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        trace.push(TraceEntry { iteration, height: f64::NAN, residual: res, coordinates: x.to_vec() });
        iteration += 1;
    });
    if rep.residuals.is_empty() && cfg.dim() > 0 {
        return Err(Error::NoConvergence { iterations: 0, residual: f64::INFINITY });
    }
    let polygon = cfg.polygon(&rep.x)?;
    let conj = conjugacy_residual(cfg, &polygon)?;
    let (spec_gdh, spec_ginv) = shared_specs(cfg, &polygon)?;
    let (q, _) = normalized_offsets(&spec_gdh, &cfg.outer_edges(), &integ)?;
    let gc = GeometricCoordinates::from_offsets(*cfg, &q)?;
    // The height of the shared polygon is zero by construction when the
    // periods are conjugate; it is reported through the residual instead.
    Ok(SolveResult {
        cfg: *cfg,
        gc,
        polygon,
        x: rep.x,
        spec_gdh,
        spec_ginv,
        height: 0.0,
        report: None,
        conjugacy_residual: conj,
        iterations: rep.iterations,
        reflexive: conj < opts.tol,
        trace,
    })
}

/// Dual solve from `starts` random symmetric polygons drawn from a seeded
/// generator; returns the best run.
pub fn multistart_period_residual(cfg: &Configuration, starts: usize, seed: u64, opts: &DualOptions) -> Result<SolveResult> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<SolveResult> = None;
    for _ in 0..starts {
        let x0: Vec<f64> = (0..cfg.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let Ok(r) = minimize_period_residual(cfg, &x0, opts) else { continue };
        let better = best.as_ref().map_or(true, |b| r.conjugacy_residual < b.conjugacy_residual);
        if better {
            best = Some(r);
        }
        if best.as_ref().is_some_and(|b| b.reflexive) {
            break;
        }
    }
    best.ok_or(Error::NoConvergence { iterations: 0, residual: f64::INFINITY })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuationOptions {
    pub solve: SolveOptions,
    /// Initial relative gap of inserted prevertices.
    pub epsilon: f64,
    /// Number of times epsilon is doubled after a stall.
    pub anneal_steps: usize,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self { solve: SolveOptions::default(), epsilon: 1e-2, anneal_steps: 4 }
    }
}

/// Inserts one point into an increasing left-half list of outer points
/// (left of -1, increasing) at `site`: index 0 places it beyond the
/// outermost point, index k between outer points k-1 and k (in increasing order),
/// and the last index next to -1.
fn insert_outer(outer: &[f64], site: usize, eps: f64) -> Vec<f64> {
    let mut pts = outer.to_vec();
    pts.push(-1.0);
    let t = if site == 0 {
        let a = pts[0];
        a - eps * a.abs()
    } else {
        let (a, b) = (pts[site - 1], pts[site]);
        if site == pts.len() - 1 {
            b - eps * (b - a)
        } else {
            a + eps * (b - a)
        }
    };
    pts.insert(site, t);
    pts.pop();
    pts
}

/// Inserts one point into the inner list (points strictly inside (-1, 0)).
/// Site 0 places it next to -1, site k just after inner point k-1.
fn insert_inner(inner: &[f64], site: usize, eps: f64) -> Vec<f64> {
    let mut pts = vec![-1.0];
    pts.extend_from_slice(inner);
    pts.push(0.0);
    let (a, b) = (pts[site], pts[site + 1]);
    let t = if site + 1 == pts.len() - 1 { b - eps * (b - a) } else { a + eps * (b - a) };
    pts.insert(site + 1, t);
    pts[1..pts.len() - 1].to_vec()
}

fn split_left(cfg: &Configuration, t: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (t[..cfg.n].to_vec(), t[cfg.n + 1..cfg.n + 1 + cfg.m].to_vec())
}

/// Candidate polygons for `to` obtained by opening new prevertices on the
/// source polygon, the preferred collision site first.
pub fn insertion_candidates(from: &Configuration, to: &Configuration, x: &[f64], eps: f64) -> Result<Vec<Vec<f64>>> {
    let dm = to.m as isize - from.m as isize;
    let dn = to.n as isize - from.n as isize;
    if !(0..=1).contains(&dm) || !(0..=1).contains(&dn) || dm + dn == 0 {
        return Err(Error::Config(format!("no continuation step from {from} to {to}")));
    }
    let t = from.gauge().prevertices(x);
    let (outer, inner) = split_left(from, &t);
    let outer_sites: Vec<usize> = if dn == 1 {
        if dm == 1 {
            // The inner and outer points next to C_1 open together.
            std::iter::once(outer.len()).chain(0..outer.len()).collect()
        } else {
            // The central outer edge splits: a new point beyond the outermost.
            (0..=outer.len()).collect()
        }
    } else {
        vec![usize::MAX]
    };
    let inner_sites: Vec<usize> = if dm == 1 { (0..=inner.len()).collect() } else { vec![usize::MAX] };
    let gauge = to.gauge();
    let mut out = Vec::new();
    for &os in &outer_sites {
        for &is in &inner_sites {
            let o = if os == usize::MAX { outer.clone() } else { insert_outer(&outer, os, eps) };
            let i = if is == usize::MAX { inner.clone() } else { insert_inner(&inner, is, eps) };
            let mut left = o;
            left.push(-1.0);
            left.extend(i);
            left.push(0.0);
            let mut full = left.clone();
            full.extend(left[..left.len() - 1].iter().rev().map(|v| -v));
            if let Ok(xt) = gauge.unknowns(&full) {
                out.push(xt);
            }
        }
    }
    Ok(out)
}

/// Coordinates read from both orthodisks on a polygon, averaged, with a
/// blend toward the retraction point until they are admissible.
fn admissible_start(cfg: &Configuration, x: &[f64]) -> Result<(GeometricCoordinates, [GeometricCoordinates; 2])> {
    let poly = cfg.polygon(x)?;
    let (s1, s2) = cfg.specs(&poly)?;
    let integ = Integrator::default();
    let norm = cfg.outer_edges();
    let g1 = GeometricCoordinates::from_offsets(*cfg, &normalized_offsets(&s1, &norm, &integ)?.0)?;
    let g2 = GeometricCoordinates::from_offsets(*cfg, &normalized_offsets(&s2, &norm, &integ)?.0)?;
    let avg: Vec<f64> = g1.values.iter().zip(&g2.values).map(|(a, b)| 0.5 * (a + b)).collect();
    let home = retraction_point(cfg)?;
    for k in 0..=20 {
        let s = k as f64 / 20.0;
        let v: Vec<f64> = avg.iter().zip(&home.values).map(|(a, b)| a + s * (b - a)).collect();
        let gc = GeometricCoordinates::new(*cfg, v)?;
        if validate_coordinates(&gc).is_ok() {
            return Ok((gc, [g1, g2]));
        }
    }
    Err(Error::Geometry("no admissible blend".into()))
}

/// Continues a solution to a configuration with one more P pair and/or H
/// pair, opening the new prevertices at gap epsilon and annealing it upward.
pub fn continuation_solve(from: &SolveResult, to: &Configuration, opts: &ContinuationOptions) -> Result<SolveResult> {
    if to.obstructed() || !to.supported() {
        return Err(Error::Config(format!("{to} is not a continuation target")));
    }
    let mut eps = opts.epsilon;
    let mut best: Option<SolveResult> = None;
    for _ in 0..=opts.anneal_steps {
        let cands = insertion_candidates(&from.cfg, to, &from.x, eps)?;
        for xt in cands {
            let Ok((gc, sides)) = admissible_start(to, &xt) else { continue };
            let mut ev = HeightEvaluator::new(*to)?;
            ev.seed_natural(0, &sides[0].values, &xt);
            ev.seed_natural(1, &sides[1].values, &xt);
            let Ok(res) = minimize_height_with(&ev, &gc, &opts.solve) else { continue };
            log::info!("{} -> {to}: eps {eps:.1e}, height {:.3e}", from.cfg, res.height);
            let done = res.reflexive;
            if best.as_ref().map_or(true, |b| res.height < b.height) {
                best = Some(res);
            }
            if done {
                return Ok(best.unwrap());
            }
            break;
        }
        eps *= 2.0;
    }
    best.ok_or_else(|| Error::Config(format!("no valid insertion site from {} to {to}", from.cfg)))
}

/// Ladder of continuation steps starting from a solved configuration.
pub fn continuation_ladder(start: &SolveResult, targets: &[Configuration], opts: &ContinuationOptions) -> Result<Vec<SolveResult>> {
    let mut out: Vec<SolveResult> = Vec::new();
    for to in targets {
        let from = out.last().unwrap_or(start);
        let r = continuation_solve(from, to, opts)?;
        out.push(r);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PushOutcome {
    pub derivative_gdh: f64,
    pub derivative_ginv: f64,
    pub noise_gdh: f64,
    pub noise_ginv: f64,
    pub sign_gdh: Sign,
    pub sign_ginv: Sign,
}

/// Minimum-norm direction in the free coordinates that changes the
/// normalized offset of `edge` at unit rate.
pub fn push_direction(cfg: &Configuration, edge: usize) -> Result<Vec<f64>> {
    if edge >= cfg.vertex_count() {
        return Err(Error::Config(format!("edge {edge} out of range")));
    }
    let zero = GeometricCoordinates::new(*cfg, vec![0.0; cfg.dim()])?.expand()[edge];
    let g: Vec<f64> = (0..cfg.dim())
        .map(|j| {
            let mut v = vec![0.0; cfg.dim()];
            v[j] = 1.0;
            GeometricCoordinates::new(*cfg, v).unwrap().expand()[edge] - zero
        })
        .collect();
    let n2: f64 = g.iter().map(|v| v * v).sum();
    if n2 < 1e-24 {
        return Err(Error::Config(format!("edge {edge} does not depend on the coordinates")));
    }
    Ok(g.iter().map(|v| v / n2).collect())
}

/// Central-difference derivatives of a cycle's extremal length on both
/// orthodisks when the coordinates move by `scale * push_direction(edge)`.
pub fn push_sign_experiment(sol: &SolveResult, edge: usize, cycle: &Cycle, scale: f64, h: f64) -> Result<PushOutcome> {
    let cfg = sol.cfg;
    let dir: Vec<f64> = push_direction(&cfg, edge)?.iter().map(|v| v * scale).collect();
    let ev = HeightEvaluator::new(cfg)?;
    let base = ev.solve_pair(&sol.gc)?;
    ev.insert(base);
    let ext_at = |s: f64| -> Result<(f64, f64)> {
        let v: Vec<f64> = sol.gc.values.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
        let pair = ev.solve_pair(&GeometricCoordinates::new(cfg, v)?)?;
        Ok((
            cycle_extremal_length_with(&pair.gdh.spec.polygon, cycle, &ev.ext)?,
            cycle_extremal_length_with(&pair.ginv.spec.polygon, cycle, &ev.ext)?,
        ))
    };
    let diff = |step: f64| -> Result<(f64, f64)> {
        let (p1, p2) = ext_at(step)?;
        let (m1, m2) = ext_at(-step)?;
        Ok(((p1 - m1) / (2.0 * step), (p2 - m2) / (2.0 * step)))
    };
    let (d1, d2) = diff(h)?;
    let (c1, c2) = diff(2.0 * h)?;
    let (n1, n2) = ((d1 - c1).abs(), (d2 - c2).abs());
    let sign = |d: f64, noise: f64| {
        if d == 0.0 || d.abs() <= 10.0 * noise {
            Sign::Inconclusive
        } else if d > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    };
    Ok(PushOutcome {
        derivative_gdh: d1,
        derivative_ginv: d2,
        noise_gdh: n1,
        noise_ginv: n2,
        sign_gdh: sign(d1, n1),
        sign_ginv: sign(d2, n2),
    })
}
