//! Schwarz-Christoffel integrands for orthodisks, edge and period
//! integrals, developed boundaries, and the parameter problem.

pub mod integrate;
pub mod param;
pub mod quadrature;

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polygon::{ConformalPolygon, Cycle};
use integrate::{Integrand, Integrator, Singularity};

/// Vertex exponents and scale defining one flat structure on a conformal polygon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthodiskSpec {
    pub polygon: ConformalPolygon,
    /// One odd integer per finite prevertex; the integrand exponent is a/2.
    pub exponents: Vec<i32>,
    pub a_infinity: i32,
    pub scale: C,
}

impl OrthodiskSpec {
    /// Builds a spec, deriving the exponent at infinity from the sum rule.
    pub fn new(polygon: ConformalPolygon, exponents: Vec<i32>, scale: C) -> Result<Self> {
        let a_infinity = -4 - exponents.iter().sum::<i32>();
        let spec = Self { polygon, exponents, a_infinity, scale };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        self.polygon.check()?;
        if self.exponents.len() != self.polygon.prevertices.len() {
            return Err(Error::InvalidSpec("one exponent per finite prevertex required".into()));
        }
        if self.exponents.iter().any(|a| a % 2 == 0) {
            return Err(Error::InvalidSpec("exponents must be odd".into()));
        }
        if self.a_infinity != -4 - self.exponents.iter().sum::<i32>() {
            return Err(Error::InvalidSpec("exponent sum rule violated".into()));
        }
        if !self.polygon.has_infinity && self.a_infinity != 0 {
            return Err(Error::InvalidSpec("infinity is singular but not marked".into()));
        }
        if self.scale.norm() == 0.0 || !self.scale.is_finite() {
            return Err(Error::InvalidSpec("scale must be nonzero".into()));
        }
        let any_finite = self.exponents.iter().any(|&a| a > -2) || (self.polygon.has_infinity && self.a_infinity > -2);
        if !any_finite {
            return Err(Error::InvalidSpec("no finite vertex".into()));
        }
        Ok(())
    }

    /// Exponent of marked point `k` (infinity last).
    pub fn exponent(&self, k: usize) -> i32 {
        self.exponents.get(k).copied().unwrap_or(self.a_infinity)
    }

    pub fn is_finite_vertex(&self, k: usize) -> bool {
        self.exponent(k) > -2
    }

    /// Interior angle at marked point `k`.
    pub fn interior_angle(&self, k: usize) -> f64 {
        PI * f64::from(self.exponent(k) + 2) / 2.0
    }

    pub fn integrand(&self) -> ScIntegrand {
        ScIntegrand::new(&self.polygon.prevertices, &self.exponents, self.scale)
    }

    pub fn with_scale(&self, scale: C) -> Self {
        Self { scale, ..self.clone() }
    }

    pub fn with_prevertices(&self, t: Vec<f64>) -> Result<Self> {
        let mut s = self.clone();
        s.polygon.prevertices = t;
        s.check()?;
        Ok(s)
    }
}

/// Argument in [0, pi] for points of the closed upper half-plane.
#[inline]
pub fn arg_uhp(d: C) -> f64 {
    let im = if d.im > 0.0 { d.im } else { 0.0 };
    im.atan2(d.re)
}

/// scale * prod (z - t_i)^(a_i/2) with the upper-half-plane branch.
#[derive(Clone, Debug)]
pub struct ScIntegrand {
    t: Vec<f64>,
    alpha: Vec<f64>,
    scale: C,
    sing: Vec<Singularity>,
}

impl ScIntegrand {
    pub fn new(t: &[f64], exponents: &[i32], scale: C) -> Self {
        let alpha: Vec<f64> = exponents.iter().map(|&a| 0.5 * f64::from(a)).collect();
        let sing = t
            .iter()
            .zip(&alpha)
            .filter(|(_, &al)| al != 0.0)
            .map(|(&x, &al)| Singularity { at: C::new(x, 0.0), exponent: al })
            .collect();
        Self { t: t.to_vec(), alpha, scale, sing }
    }

    /// Exponents already halved.
    pub fn from_alpha(t: &[f64], alpha: &[f64], scale: C) -> Self {
        let sing = t
            .iter()
            .zip(alpha)
            .filter(|(_, &al)| al != 0.0)
            .map(|(&x, &al)| Singularity { at: C::new(x, 0.0), exponent: al })
            .collect();
        Self { t: t.to_vec(), alpha: alpha.to_vec(), scale, sing }
    }

    pub fn alpha_infinity(&self) -> f64 {
        -2.0 - self.alpha.iter().sum::<f64>()
    }
}

impl Integrand for ScIntegrand {
    #[inline]
    fn eval(&self, z: C) -> C {
        let mut logmod = 0.0;
        let mut phase = 0.0;
        for (&t, &al) in self.t.iter().zip(&self.alpha) {
            let d = z - t;
            logmod += al * d.norm().ln();
            phase += al * arg_uhp(d);
        }
        self.scale * C::from_polar(logmod.exp(), phase)
    }

    fn singularities(&self) -> &[Singularity] {
        &self.sing
    }
}

/// The integrand pulled back by z = -1/s, so that z = infinity sits at s = 0.
pub struct TailIntegrand<'a> {
    base: &'a ScIntegrand,
    sing: Vec<Singularity>,
}

impl<'a> TailIntegrand<'a> {
    pub fn new(base: &'a ScIntegrand) -> Self {
        let mut sing: Vec<Singularity> = base
            .t
            .iter()
            .zip(&base.alpha)
            .filter(|(&t, &al)| t != 0.0 && al != 0.0)
            .map(|(&t, &al)| Singularity { at: C::new(-1.0 / t, 0.0), exponent: al })
            .collect();
        let ainf = base.alpha_infinity();
        if ainf != 0.0 {
            sing.push(Singularity { at: C::new(0.0, 0.0), exponent: ainf });
        }
        Self { base, sing }
    }
}

impl Integrand for TailIntegrand<'_> {
    fn eval(&self, s: C) -> C {
        let z = -1.0 / s;
        let z = C::new(z.re, z.im.max(0.0));
        self.base.eval(z) / (s * s)
    }

    fn singularities(&self) -> &[Singularity] {
        &self.sing
    }
}

/// Integrand value at z in the closed upper half-plane.
pub fn sc_integrand(spec: &OrthodiskSpec, z: C) -> Result<C> {
    for (k, &t) in spec.polygon.prevertices.iter().enumerate() {
        if z == C::new(t, 0.0) && spec.exponents[k] < 0 {
            return Err(Error::Singularity(k));
        }
    }
    if z.im < 0.0 {
        return Err(Error::Domain("point below the real axis".into()));
    }
    Ok(spec.integrand().eval(z))
}

/// Integral of the integrand along the real segment [x0, x1].
pub fn segment_integral(spec: &OrthodiskSpec, x0: f64, x1: f64) -> Result<C> {
    let f = spec.integrand();
    Integrator::default().segment(&f, C::new(x0, 0.0), C::new(x1, 0.0))
}

/// Unit tangent of each edge in the positive boundary direction.
pub fn edge_directions(spec: &OrthodiskSpec) -> Vec<C> {
    let n = spec.polygon.prevertices.len();
    let phase = spec.scale.arg();
    let alpha: Vec<f64> = spec.exponents.iter().map(|&a| 0.5 * f64::from(a)).collect();
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + alpha[k];
    }
    let mut dirs: Vec<C> = (0..n).map(|k| C::from_polar(1.0, phase + PI * suffix[k + 1])).collect();
    if spec.polygon.has_infinity {
        dirs.push(C::from_polar(1.0, phase + PI * suffix[0]));
    }
    dirs
}

/// Integrals of the integrand from a fixed interior base point to every
/// finite vertex; `None` at infinite vertices.
#[derive(Clone, Debug)]
pub struct VertexMap {
    pub base: C,
    pub positions: Vec<Option<C>>,
}

pub fn base_point(poly: &ConformalPolygon) -> C {
    let t = &poly.prevertices;
    if t.is_empty() {
        return C::new(0.0, 1.0);
    }
    let lo = t[0];
    let hi = t[t.len() - 1];
    C::new(0.5 * (lo + hi), (0.5 * (hi - lo)).max(1.0))
}

pub fn vertex_map(spec: &OrthodiskSpec, integ: &Integrator) -> Result<VertexMap> {
    let f = spec.integrand();
    let base = base_point(&spec.polygon);
    let mut positions = Vec::with_capacity(spec.polygon.point_count());
    for (k, &t) in spec.polygon.prevertices.iter().enumerate() {
        positions.push(if spec.is_finite_vertex(k) {
            Some(integ.segment(&f, base, C::new(t, 0.0))?)
        } else {
            None
        });
    }
    if spec.polygon.has_infinity {
        positions.push(if spec.a_infinity > -2 {
            let tail = TailIntegrand::new(&f);
            Some(integ.segment(&tail, -1.0 / base, C::new(0.0, 0.0))?)
        } else {
            None
        });
    }
    Ok(VertexMap { base, positions })
}

/// Length of edge `e`, integrated directly along the boundary.
pub fn edge_length(spec: &OrthodiskSpec, e: usize) -> Result<f64> {
    edge_length_with(spec, e, &Integrator::default())
}

pub fn edge_length_with(spec: &OrthodiskSpec, e: usize, integ: &Integrator) -> Result<f64> {
    let poly = &spec.polygon;
    let (a, b) = poly.edge_ends(e);
    if !spec.is_finite_vertex(a) || !spec.is_finite_vertex(b) {
        return Err(Error::DivergentEdge(e));
    }
    let f = spec.integrand();
    let far = 2.0 * poly.prevertices.iter().fold(1.0f64, |m, t| m.max(t.abs())) + 1.0;
    let v = match (poly.point(a), poly.point(b)) {
        (Some(x), Some(y)) if x < y => {
            let mid = C::new(0.5 * (x + y), 0.0);
            integ.segment(&f, C::new(x, 0.0), mid)? + integ.segment(&f, mid, C::new(y, 0.0))?
        }
        (Some(x), None) => {
            let tail = TailIntegrand::new(&f);
            integ.segment(&f, C::new(x, 0.0), C::new(far, 0.0))?
                + integ.segment(&tail, C::new(-1.0 / far, 0.0), C::new(0.0, 0.0))?
        }
        (None, Some(y)) => {
            let tail = TailIntegrand::new(&f);
            integ.segment(&tail, C::new(0.0, 0.0), C::new(1.0 / far, 0.0))?
                + integ.segment(&f, C::new(-far, 0.0), C::new(y, 0.0))?
        }
        (Some(x), Some(y)) => {
            // Edge through infinity with no vertex there.
            let tail = TailIntegrand::new(&f);
            integ.segment(&f, C::new(x, 0.0), C::new(far, 0.0))?
                + integ.segment(&tail, C::new(-1.0 / far, 0.0), C::new(1.0 / far, 0.0))?
                + integ.segment(&f, C::new(-far, 0.0), C::new(y, 0.0))?
        }
        (None, None) => unreachable!(),
    };
    Ok(v.norm())
}

/// Signed offsets: q_k is the displacement between the lines of edges
/// k-1 and k+1 measured along the tangent of edge k. For an edge with two
/// finite endpoints it equals the edge length.
pub fn edge_offsets(spec: &OrthodiskSpec, vm: &VertexMap) -> Result<Vec<f64>> {
    let m = spec.polygon.point_count();
    let dirs = edge_directions(spec);
    let mut q = Vec::with_capacity(m);
    for k in 0..m {
        let (a, b) = (k, (k + 1) % m);
        let (from, to) = if !spec.is_finite_vertex(a) {
            ((a + m - 1) % m, b)
        } else if !spec.is_finite_vertex(b) {
            (a, (b + 1) % m)
        } else {
            (a, b)
        };
        let (Some(pf), Some(pt)) = (vm.positions[from], vm.positions[to]) else {
            return Err(Error::InvalidSpec("consecutive infinite vertices".into()));
        };
        q.push(((pt - pf) * dirs[k].conj()).re);
    }
    Ok(q)
}

pub fn offsets(spec: &OrthodiskSpec) -> Result<Vec<f64>> {
    let vm = vertex_map(spec, &Integrator::default())?;
    edge_offsets(spec, &vm)
}

/// A period with its expected axis direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodEntry {
    pub tag: String,
    pub value: C,
    pub direction: C,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodVector {
    pub entries: Vec<PeriodEntry>,
}

impl PeriodVector {
    /// Largest deviation of an entry's direction from its axis class.
    pub fn direction_defect(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.value.norm() > 0.0)
            .map(|e| (e.value / e.value.norm() - e.direction).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Through the base point used for vertex positions.
    Base,
    /// Along a polyline arc over the real axis between the two foot points.
    Arc,
}

fn finite_point_of_edge(spec: &OrthodiskSpec, e: usize) -> usize {
    let (a, b) = spec.polygon.edge_ends(e);
    if spec.is_finite_vertex(a) {
        a
    } else {
        b
    }
}

/// Period of a connecting cycle: the offset vector between the lines of
/// its two (parallel) foot edges. Encircling cycles use their flanking edges.
pub fn period(spec: &OrthodiskSpec, c: &Cycle) -> Result<C> {
    period_via(spec, c, Route::Base)
}

pub fn period_via(spec: &OrthodiskSpec, c: &Cycle, route: Route) -> Result<C> {
    c.validate_structure(&spec.polygon)?;
    let (ea, eb) = c.foot_edges(&spec.polygon, 0);
    let dirs = edge_directions(spec);
    if (dirs[ea].conj() * dirs[eb]).im.abs() > 1e-9 {
        return Err(Error::InvalidCycle(format!("{}: foot edges are not parallel", c.name)));
    }
    let pa = finite_point_of_edge(spec, ea);
    let pb = finite_point_of_edge(spec, eb);
    let integ = Integrator::default();
    let raw = match route {
        Route::Base => {
            let vm = vertex_map(spec, &integ)?;
            vm.positions[pb].unwrap() - vm.positions[pa].unwrap()
        }
        Route::Arc => arc_integral(spec, pa, pb, &integ)?,
    };
    let normal = dirs[ea] * C::i();
    Ok(normal * (raw * normal.conj()).re)
}

/// Integral between two finite marked points along an arc in the upper half-plane.
pub fn arc_integral(spec: &OrthodiskSpec, from: usize, to: usize, integ: &Integrator) -> Result<C> {
    let f = spec.integrand();
    let poly = &spec.polygon;
    let tail = TailIntegrand::new(&f);
    let lift = |k: usize| -> C {
        match poly.point(k) {
            Some(t) => C::new(t, 0.0),
            None => C::new(0.0, 0.0),
        }
    };
    match (poly.point(from), poly.point(to)) {
        (Some(x), Some(y)) => {
            let h = 0.5 * (y - x).abs();
            let (za, zb) = (lift(from), lift(to));
            let pts = arc_points(za, zb, h);
            integ.path(&f, &pts)
        }
        (Some(_), None) | (None, Some(_)) => {
            // Route through the tail chart: the marked point at infinity is s = 0.
            let finite = if poly.point(from).is_some() { from } else { to };
            let x = poly.point(finite).unwrap();
            let far = C::new(0.0, 2.0 * poly.prevertices.iter().fold(1.0f64, |m, t| m.max(t.abs())));
            let leg1 = integ.path(&f, &[C::new(x, 0.0), C::new(x, far.im), far])?;
            let leg2 = integ.segment(&tail, -1.0 / far, C::new(0.0, 0.0))?;
            let v = leg1 + leg2;
            Ok(if poly.point(from).is_some() { v } else { -v })
        }
        (None, None) => Ok(C::new(0.0, 0.0)),
    }
}

fn arc_points(za: C, zb: C, h: f64) -> Vec<C> {
    let n = 8;
    let c = 0.5 * (za + zb);
    let r = 0.5 * (zb - za).norm().max(h);
    let sgn = if zb.re >= za.re { 1.0 } else { -1.0 };
    (0..=n)
        .map(|j| {
            let th = PI * (j as f64) / (n as f64);
            let p = c + C::new(-sgn * r * th.cos(), r * th.sin());
            if j == 0 {
                za
            } else if j == n {
                zb
            } else {
                p
            }
        })
        .collect()
}

/// Developed boundary: positions of finite vertices and the tangent of each edge.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Development {
    pub labels: Vec<String>,
    pub vertices: Vec<Option<C>>,
    pub directions: Vec<C>,
}

pub fn develop(spec: &OrthodiskSpec) -> Result<Development> {
    let integ = Integrator::default();
    let mut pos = vertex_map(spec, &integ)?.positions;
    // Short edges lose digits as differences of base-point integrals, so
    // runs of finite vertices are chained by arcs between neighbours.
    for k in 1..spec.polygon.prevertices.len() {
        if let (Some(prev), Some(_)) = (pos[k - 1], pos[k]) {
            pos[k] = Some(prev + arc_integral(spec, k - 1, k, &integ)?);
        }
    }
    let origin = pos.iter().flatten().next().copied().unwrap_or_default();
    Ok(Development {
        labels: spec.polygon.labels.clone(),
        vertices: pos.iter().map(|p| p.map(|z| z - origin)).collect(),
        directions: edge_directions(spec),
    })
}

impl Development {
    /// Unit direction of edge `e` measured from developed positions, when
    /// both endpoints are finite.
    pub fn measured_direction(&self, e: usize) -> Option<C> {
        let m = self.vertices.len();
        let (a, b) = (e % m, (e + 1) % m);
        let (pa, pb) = (self.vertices[a]?, self.vertices[b]?);
        let d = pb - pa;
        Some(d / d.norm())
    }

    /// SVG drawing: finite edges as segments, infinite edges as rays of length `ray`.
    pub fn to_svg(&self, ray: f64) -> String {
        let m = self.vertices.len();
        let mut segs: Vec<(C, C)> = Vec::new();
        for e in 0..m {
            let (a, b) = (e, (e + 1) % m);
            match (self.vertices[a], self.vertices[b]) {
                (Some(p), Some(q)) => segs.push((p, q)),
                (Some(p), None) => segs.push((p, p + self.directions[e] * ray)),
                (None, Some(q)) => segs.push((q - self.directions[e] * ray, q)),
                (None, None) => {}
            }
        }
        let pts = segs.iter().flat_map(|(p, q)| [*p, *q]);
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in pts {
            x0 = x0.min(p.re);
            x1 = x1.max(p.re);
            y0 = y0.min(p.im);
            y1 = y1.max(p.im);
        }
        let pad = 0.05 * (x1 - x0).max(y1 - y0).max(1e-9);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}">"#,
            x0 - pad,
            -y1 - pad,
            x1 - x0 + 2.0 * pad,
            y1 - y0 + 2.0 * pad
        );
        let mut d = String::new();
        for (p, q) in &segs {
            let _ = write!(d, "M{} {} L{} {} ", p.re, -p.im, q.re, -q.im);
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="black" stroke-width="{}"/>"#,
            d.trim_end(),
            pad * 0.1
        );
        s.push_str("</svg>\n");
        s
    }
}
