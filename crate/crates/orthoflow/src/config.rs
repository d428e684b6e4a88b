//! The DH_{m,n} family: vertex sequences, exponent tables, cycle systems,
//! geometric coordinates and their admissibility checks.

use std::fmt;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polygon::{ConformalPolygon, Cycle};
use crate::scmap::param::SymmetricGauge;
use crate::scmap::OrthodiskSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    C,
    P,
    H,
    R,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Label {
    pub kind: Kind,
    pub index: usize,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{}", self.kind, self.index)
    }
}

/// Vertex data (a, b) for Gdh and G^{-1}dh.
pub fn table(kind: Kind, o: Orientation) -> (i32, i32) {
    use Kind::*;
    use Orientation::*;
    match (kind, o) {
        (H, Up) => (-1, 1),
        (H, Down) => (1, -1),
        (C, Up) => (-3, -1),
        (C, Down) => (-1, -3),
        (P, Up) => (-3, 3),
        (P, Down) => (3, -3),
        (R, Up) => (0, 2),
        (R, Down) => (2, 0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexSpec {
    pub label: Label,
    pub orientation: Orientation,
    pub a: i32,
    pub b: i32,
    pub dh_order: i32,
}

impl VertexSpec {
    pub fn new(kind: Kind, index: usize, orientation: Orientation) -> Self {
        let (a, b) = table(kind, orientation);
        Self { label: Label { kind, index }, orientation, a, b, dh_order: 1 + (a + b) / 2 }
    }

    pub fn is_complete(&self) -> bool {
        2 + self.a + self.b <= (self.a - self.b).abs()
    }

    /// Order of the Gauss map G at this point, (a - b)/2.
    pub fn gauss_order(&self) -> i32 {
        (self.a - self.b) / 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    pub m: usize,
    pub n: usize,
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DH_{{{},{}}}", self.m, self.n)
    }
}

impl Configuration {
    pub fn new(m: usize, n: usize) -> Self {
        Self { m, n }
    }

    pub fn genus(&self) -> usize {
        self.m + self.n + 1
    }

    pub fn vertex_count(&self) -> usize {
        2 * self.m + 2 * self.n + 4
    }

    /// Free real parameters of a symmetric gauge-fixed polygon.
    pub fn dim(&self) -> usize {
        self.m + self.n
    }

    pub fn obstructed(&self) -> bool {
        self.m > self.n
    }

    /// Configurations with a height function: n >= m >= 1, or the Costa case.
    pub fn supported(&self) -> bool {
        (self.m == 0 && self.n == 0) || (self.m >= 1 && self.n >= self.m)
    }

    pub fn gauge(&self) -> SymmetricGauge {
        SymmetricGauge { outer: self.n, inner: self.m }
    }

    /// Marked points in increasing order along the real axis, infinity last:
    /// H_n..H_1, C_1, P_1..P_{2m+1}, C_2, H_{2n+1}..H_{n+2}, H_{n+1}.
    pub fn polygon_order(&self) -> Vec<VertexSpec> {
        let seq = build_vertex_sequence(self);
        // Cyclic sequence starts at C_1 and ends with H_{2n+1}..H_1.
        let n = self.n;
        let mut out: Vec<VertexSpec> = seq[seq.len() - n..].to_vec();
        out.extend_from_slice(&seq[..seq.len() - n]);
        // Now ends with ..., H_{n+2}, H_{n+1}; H_{n+1} sits at infinity.
        out
    }

    pub fn labels(&self) -> Vec<String> {
        self.polygon_order().iter().map(|v| v.label.to_string()).collect()
    }

    pub fn point_index(&self, label: Label) -> Option<usize> {
        self.polygon_order().iter().position(|v| v.label == label)
    }

    /// Edge joining two consecutive marked points, given in either order.
    pub fn edge(&self, x: Label, y: Label) -> Result<usize> {
        let m = self.vertex_count();
        let (Some(i), Some(j)) = (self.point_index(x), self.point_index(y)) else {
            return Err(Error::Config(format!("unknown vertex {x} or {y}")));
        };
        if (i + 1) % m == j {
            Ok(i)
        } else if (j + 1) % m == i {
            Ok(j)
        } else {
            Err(Error::Config(format!("{x}{y} is not an edge")))
        }
    }

    pub fn exponents_a(&self) -> Vec<i32> {
        let v = self.polygon_order();
        v[..v.len() - 1].iter().map(|x| x.a).collect()
    }

    pub fn exponents_b(&self) -> Vec<i32> {
        let v = self.polygon_order();
        v[..v.len() - 1].iter().map(|x| x.b).collect()
    }

    /// Gauge-fixed symmetric polygon for unknowns `x`.
    pub fn polygon(&self, x: &[f64]) -> Result<ConformalPolygon> {
        self.gauge().polygon(x, &self.labels())
    }

    /// The two orthodisks (exponents a, exponents b) on one polygon, unit scale.
    pub fn specs(&self, poly: &ConformalPolygon) -> Result<(OrthodiskSpec, OrthodiskSpec)> {
        let one = C::new(1.0, 0.0);
        Ok((
            OrthodiskSpec::new(poly.clone(), self.exponents_a(), one)?,
            OrthodiskSpec::new(poly.clone(), self.exponents_b(), one)?,
        ))
    }

    /// Edges of the outer sheet, C_2 -> H_{2n+1} -> ... -> H_1 -> C_1.
    pub fn outer_edges(&self) -> Vec<usize> {
        let m = self.vertex_count();
        let c2 = self.point_index(Label { kind: Kind::C, index: 2 }).unwrap();
        (0..=2 * self.n + 1).map(|j| (c2 + j) % m).collect()
    }

    /// One representative of each mirror pair of edges: those in t < 0.
    pub fn left_edges(&self) -> Vec<usize> {
        let m = self.vertex_count();
        std::iter::once(m - 1).chain(0..=(self.m + self.n)).collect()
    }

    pub fn mirror_edge(&self, e: usize) -> usize {
        let m = self.vertex_count();
        // Finite points k <-> m - 2 - k, infinity fixed; edge (k, k+1) -> (s(k+1), s(k)).
        let s = |k: usize| if k == m - 1 { m - 1 } else { m - 2 - k };
        s((e + 1) % m)
    }

    /// deg G from the vertex table, summing (a - b)/2 over points with a > b.
    pub fn gauss_degree(&self) -> i32 {
        build_vertex_sequence(self).iter().filter(|v| v.a > v.b).map(|v| (v.a - v.b) / 2).sum()
    }
}

/// Cyclic vertex order C_1, P_1..P_{2m+1}, C_2, H_{2n+1}..H_1.
///
/// Planar ends alternate normals starting with P_1 up; the C vertices are
/// down, and H vertices alternate starting with H_1 down. This is the only
/// assignment satisfying the exponent sum rule for both orthodisks.
pub fn build_vertex_sequence(cfg: &Configuration) -> Vec<VertexSpec> {
    use Orientation::*;
    let alt = |odd_up: bool, j: usize| if (j % 2 == 1) == odd_up { Up } else { Down };
    let mut v = vec![VertexSpec::new(Kind::C, 1, Down)];
    for j in 1..=2 * cfg.m + 1 {
        v.push(VertexSpec::new(Kind::P, j, alt(true, j)));
    }
    v.push(VertexSpec::new(Kind::C, 2, Down));
    for j in (1..=2 * cfg.n + 1).rev() {
        v.push(VertexSpec::new(Kind::H, j, alt(false, j)));
    }
    v
}

fn lbl(kind: Kind, index: usize) -> Label {
    Label { kind, index }
}

/// Named cycles on a configuration's polygon, plus any index clamps applied.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CycleSystem {
    pub cycles: Vec<Cycle>,
    pub diagnostics: Vec<String>,
}

impl CycleSystem {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Cycle> {
        self.cycles.iter().find(|c| c.name == name)
    }
}

struct Builder<'a> {
    cfg: &'a Configuration,
}

impl Builder<'_> {
    fn h(&self, i: usize) -> Label {
        // H_0 and H_{2n+2} name the catenoid vertices closing the outer sheet.
        if i == 0 {
            lbl(Kind::C, 1)
        } else if i == 2 * self.cfg.n + 2 {
            lbl(Kind::C, 2)
        } else {
            lbl(Kind::H, i)
        }
    }
    fn p(&self, i: usize) -> Label {
        // P_0 and P_{2m+2} name the neighbouring catenoid vertices.
        if i == 0 {
            lbl(Kind::C, 1)
        } else if i == 2 * self.cfg.m + 2 {
            lbl(Kind::C, 2)
        } else {
            lbl(Kind::P, i)
        }
    }
    fn c(&self, i: usize) -> Label {
        lbl(Kind::C, i)
    }
    fn e(&self, x: Label, y: Label) -> Result<usize> {
        self.cfg.edge(x, y)
    }
    fn pair(&self, name: &str, a: usize, b: usize) -> Cycle {
        Cycle::connecting_pair(name, (a, b), (self.cfg.mirror_edge(a), self.cfg.mirror_edge(b)))
    }
}

/// Height cycles for the supported regime; exactly m + n of them.
pub fn build_cycle_system(cfg: &Configuration) -> Result<CycleSystem> {
    let (m, n) = (cfg.m, cfg.n);
    if cfg.obstructed() {
        return Err(Error::Obstructed { m, n });
    }
    if !cfg.supported() {
        return Err(Error::Config(format!("{cfg} has no height cycle system")));
    }
    let b = Builder { cfg };
    let mut cycles = Vec::new();
    if m == 0 {
        return Ok(CycleSystem::default());
    }
    let c1p1 = b.e(b.c(1), b.p(1))?;
    let mu = Cycle::connecting("mu", c1p1, b.e(b.c(2), b.p(2 * m + 1))?);
    let nu = || -> Result<Cycle> { Ok(b.pair("nu", c1p1, b.e(b.h(1), b.h(2))?)) };
    // Mirror-consistent reading: the component P_{m+1}P_{m+2} -> H_{n+1}H_{n+2}
    // and its mirror image P_mP_{m+1} -> H_nH_{n+1}.
    let rho = || -> Result<Cycle> { Ok(b.pair("rho", b.e(b.h(n), b.h(n + 1))?, b.e(b.p(m), b.p(m + 1))?)) };
    let sigma = || -> Result<Cycle> { Ok(b.pair("sigma", b.e(b.h(1), b.c(1))?, b.e(b.p(1), b.p(2))?)) };
    // Mirror-consistent reading: P_{2m}P_{2m+1} -> H_{n+2}H_{n+3} and its mirror.
    let delta = || -> Result<Cycle> { Ok(b.pair("delta", b.e(b.p(1), b.p(2))?, b.e(b.h(n - 1), b.h(n))?)) };
    let gamma = || -> Result<Cycle> { Ok(Cycle::connecting("gamma", b.e(b.h(n - 1), b.h(n))?, b.e(b.h(n + 2), b.h(n + 3))?)) };
    let beta = |k: usize| -> Result<Cycle> {
        Ok(b.pair(&format!("beta_{k}"), b.e(b.p(1), b.p(2))?, b.e(b.p(2 * k - 1), b.p(2 * k))?))
    };
    let alpha = |k: usize| -> Result<Cycle> {
        let e = b.e(b.h(k), b.h(k + 1))?;
        Ok(Cycle::encircling_pair(&format!("alpha_{k}"), e, cfg.mirror_edge(e)))
    };
    let tau = || -> Result<Cycle> { Ok(Cycle::connecting("tau", b.e(b.p(1), b.p(2))?, b.e(b.p(2 * m), b.p(2 * m + 1))?)) };
    if m == 1 && n == 1 {
        cycles.push(mu);
        cycles.push(nu()?);
    } else if m == n {
        cycles.extend([mu, nu()?, gamma()?, delta()?]);
        for k in 2..m {
            cycles.push(beta(k)?);
        }
        for k in 2..n {
            cycles.push(alpha(k)?);
        }
    } else if m == 1 {
        cycles.extend([mu, rho()?, sigma()?]);
        for k in 1..=n.saturating_sub(2) {
            cycles.push(alpha(k)?);
        }
    } else {
        cycles.extend([mu, rho()?, sigma()?, tau()?]);
        for k in 1..=n - 2 {
            cycles.push(alpha(k)?);
        }
        for k in 2..m {
            cycles.push(beta(k)?);
        }
    }
    let poly = cfg.polygon(&vec![0.0; cfg.dim()])?;
    for c in &cycles {
        c.validate(&poly)?;
    }
    Ok(CycleSystem { cycles, diagnostics: vec![] })
}

/// Outer-sheet and box cycles (alpha, rho, upsilon, delta, lambda). Indices
/// falling outside the H range are clamped and reported in diagnostics.
pub fn coordinate_cycles(cfg: &Configuration) -> Result<CycleSystem> {
    let (m, n) = (cfg.m, cfg.n);
    if n == 0 {
        return Err(Error::Config(format!("{cfg} has no outer H edges")));
    }
    let b = Builder { cfg };
    let mut diagnostics = Vec::new();
    let mut cycles = Vec::new();
    // alpha_1 .. alpha_{2n+2}: consecutive parallel outer edges.
    let outer = cfg.outer_edges();
    let outer_rev: Vec<usize> = outer.iter().rev().copied().collect();
    // outer_rev runs H_1C_1, H_2H_1, ..., C_2H_{2n+1}; alpha_k joins the edges
    // around the k-th outer edge counted from C_1.
    let mut alpha_edges = vec![b.e(b.p(1), b.c(1))?];
    alpha_edges.extend(outer_rev.iter().copied());
    alpha_edges.push(b.e(b.p(2 * m + 1), b.c(2))?);
    for k in 1..=2 * n + 2 {
        cycles.push(Cycle::connecting(&format!("alpha_{k}"), alpha_edges[k - 1], alpha_edges[k + 1]));
    }
    let kk = m / 2;
    let d = (n as i64 - m as i64).div_euclid(2) + 1;
    // Foot edge H_iH_{i+1} for a cycle leaving P_jP_{j+1}. Indices outside
    // 0..=2n+1 are clamped; an index of the wrong parity (foot edge not
    // parallel to the source edge) is moved one step toward H_{n+1}.
    let mut hedge = |name: &str, j: usize, i: i64| -> Result<usize> {
        let (lo, hi) = (0i64, 2 * n as i64 + 1);
        let mut c = i.clamp(lo, hi);
        if c != i {
            diagnostics.push(format!("{name}: H_{i}H_{} clamped to H_{c}H_{}", i + 1, c + 1));
        }
        // P_jP_{j+1} lies j+1 boundary steps past H_1C_1, H_cH_{c+1} lies c steps before it.
        if (c + j as i64 + 1) % 2 != 0 {
            let toward = if c <= n as i64 { c + 1 } else { c - 1 };
            let shifted = if (lo..=hi).contains(&toward) { toward } else { 2 * c - toward };
            diagnostics.push(format!("{name}: H_{c}H_{} not parallel, shifted to H_{shifted}H_{}", c + 1, shifted + 1));
            c = shifted;
        }
        b.e(b.h(c as usize), b.h(c as usize + 1))
    };
    let mut rho: Vec<Option<(usize, usize)>> = vec![None; m + 2];
    let mut ups: Vec<Option<(usize, usize)>> = vec![None; m + 2];
    let mut del: Vec<Option<(usize, usize)>> = vec![None; m + 2];
    let mut lam: Vec<Option<(usize, usize)>> = vec![None; m + 2];
    for j in 1..=kk {
        let ji = j as i64;
        rho[j] = Some((b.e(b.p(2 * j), b.p(2 * j + 1))?, hedge(&format!("rho_{j}"), 2 * j, 2 * ji - 1)?));
        ups[j] = Some((
            b.e(b.p(2 * j - 1), b.p(2 * j))?,
            if j == 1 { b.e(b.h(1), b.c(1))? } else { hedge(&format!("upsilon_{j}"), 2 * j - 1, 2 * ji - 2)? },
        ));
        del[j] = Some((b.e(b.p(2 * j - 1), b.p(2 * j))?, hedge(&format!("delta_{j}"), 2 * j - 1, 2 * ji + d)?));
        lam[j] = Some((b.e(b.p(2 * j), b.p(2 * j + 1))?, hedge(&format!("lambda_{j}"), 2 * j, 2 * ji + d + 1)?));
    }
    if m % 2 == 1 {
        let j = kk + 1;
        let (ni, mi) = (n as i64, m);
        let (r, dl, u, l) = if n % 2 == 1 { (ni + 1, ni, ni - d - 2, ni + d + 3) } else { (ni, ni + 1, ni - d - 1, ni + d + 2) };
        rho[j] = Some((b.e(b.p(mi + 1), b.p(mi + 2))?, hedge(&format!("rho_{j}"), mi + 1, r)?));
        del[j] = Some((b.e(b.p(mi), b.p(mi + 1))?, hedge(&format!("delta_{j}"), mi, dl)?));
        ups[j] = Some((b.e(b.p(mi), b.p(mi + 1))?, hedge(&format!("upsilon_{j}"), mi, u)?));
        lam[j] = Some((b.e(b.p(mi + 1), b.p(mi + 2))?, hedge(&format!("lambda_{j}"), mi + 1, l)?));
    }
    let mirror = |p: (usize, usize)| (cfg.mirror_edge(p.0), cfg.mirror_edge(p.1));
    for j in 1..=m {
        let r = m + 1 - j;
        if lam[j].is_none() {
            lam[j] = ups[r].map(mirror);
        }
        if rho[j].is_none() {
            rho[j] = del[r].map(mirror);
        }
        if ups[j].is_none() {
            ups[j] = lam[r].map(mirror);
        }
        if del[j].is_none() {
            del[j] = rho[r].map(mirror);
        }
    }
    for (name, fam) in [("rho", &rho), ("upsilon", &ups), ("delta", &del), ("lambda", &lam)] {
        for j in 1..=m {
            match fam[j] {
                Some((a, e)) => cycles.push(Cycle::connecting(&format!("{name}_{j}"), a, e)),
                None => diagnostics.push(format!("{name}_{j}: undefined")),
            }
        }
    }
    Ok(CycleSystem { cycles, diagnostics })
}

/// DH_{1,1} named cycles of the geometric coordinate discussion.
pub fn colored_cycles(cfg: &Configuration) -> Result<CycleSystem> {
    if (cfg.m, cfg.n) != (1, 1) {
        return Err(Error::Config("colored cycles exist for DH_{1,1} only".into()));
    }
    let b = Builder { cfg };
    let cycles = vec![
        b.pair("yellow", b.e(b.h(3), b.h(2))?, b.e(b.p(1), b.p(2))?),
        b.pair("blue", b.e(b.p(3), b.c(2))?, b.e(b.h(3), b.h(2))?),
        b.pair("green", b.e(b.p(1), b.p(2))?, b.e(b.h(1), b.c(1))?),
        Cycle::connecting("mauve", b.e(b.p(3), b.c(2))?, b.e(b.c(1), b.p(1))?),
    ];
    Ok(CycleSystem { cycles, diagnostics: vec![] })
}

/// Direction of each box-cycle family in the drawing frame of the Gdh
/// orthodisk, where the outer edge H_1C_1 points to the right: upsilon up,
/// rho right, lambda left, delta down.
pub fn box_direction(family: &str) -> Option<C> {
    match family {
        "upsilon" => Some(C::new(0.0, 1.0)),
        "rho" => Some(C::new(1.0, 0.0)),
        "lambda" => Some(C::new(-1.0, 0.0)),
        "delta" => Some(C::new(0.0, -1.0)),
        _ => None,
    }
}

/// Normalized signed edge offsets of a conjugate pair. The free values are
/// the offsets of edges 0..m+n (H_nH_{n-1} through P_{m-1}P_m); the
/// remaining edges follow from the symmetry, the outer-sheet normalization
/// (finite outer edges sum to 1) and closure of the boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricCoordinates {
    pub cfg: Configuration,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({:.3e})", self.rule, self.value)
    }
}

impl Configuration {
    /// Edge tangents of the Gdh orthodisk at unit scale (independent of prevertices).
    pub fn directions_a(&self) -> Vec<C> {
        let poly = self.polygon(&vec![0.0; self.dim()]).expect("natural polygon");
        let (s1, _) = self.specs(&poly).expect("vertex table specs");
        crate::scmap::edge_directions(&s1)
    }

    /// Real closure coefficients on the left edges: sum c_k q_k = 0.
    pub fn closure_coefficients(&self) -> Vec<(usize, f64)> {
        let tau = self.directions_a();
        let left = self.left_edges();
        let sums: Vec<C> = left.iter().map(|&k| tau[k] + tau[self.mirror_edge(k)]).collect();
        let v = sums.iter().copied().find(|z| z.norm() > 1e-9).expect("nonzero closure direction");
        let v = v / v.norm();
        left.iter().zip(&sums).map(|(&k, z)| (k, (z * v.conj()).re)).collect()
    }

    /// Rotation taking unit-scale integrand directions to the drawing frame.
    pub fn frame(&self) -> C {
        let e = self.edge(lbl(Kind::H, 1), lbl(Kind::C, 1)).expect("H_1C_1 edge");
        self.directions_a()[e].conj()
    }

    /// Edges whose normalized offsets are the free coordinates.
    pub fn free_edges(&self) -> Vec<usize> {
        (0..self.dim()).collect()
    }
}

impl GeometricCoordinates {
    pub fn new(cfg: Configuration, values: Vec<f64>) -> Result<Self> {
        if values.len() != cfg.dim() {
            return Err(Error::Config(format!("{cfg} needs {} coordinates, got {}", cfg.dim(), values.len())));
        }
        Ok(Self { cfg, values })
    }

    /// Coordinates read off an offset vector of either orthodisk.
    pub fn from_offsets(cfg: Configuration, q: &[f64]) -> Result<Self> {
        let s: f64 = cfg.outer_edges().iter().map(|&k| q[k]).sum();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Geometry("outer sheet has non-positive total length".into()));
        }
        Self::new(cfg, cfg.free_edges().iter().map(|&k| q[k] / s).collect())
    }

    /// All N normalized edge offsets.
    pub fn expand(&self) -> Vec<f64> {
        let cfg = &self.cfg;
        let big = cfg.vertex_count();
        let mut q = vec![0.0; big];
        for (&k, &v) in cfg.free_edges().iter().zip(&self.values) {
            q[k] = v;
        }
        q[big - 1] = 0.5 - (0..cfg.n).map(|k| q[k]).sum::<f64>();
        let dep = cfg.m + cfg.n;
        let coef = cfg.closure_coefficients();
        let cdep = coef.iter().find(|(k, _)| *k == dep).map(|c| c.1).unwrap();
        let rest: f64 = coef.iter().filter(|(k, _)| *k != dep).map(|(k, c)| c * q[*k]).sum();
        q[dep] = -rest / cdep;
        for k in cfg.left_edges() {
            q[cfg.mirror_edge(k)] = q[k];
        }
        q
    }

    /// Offset target for the parameter problem of either orthodisk.
    pub fn target(&self) -> crate::scmap::param::OffsetTarget {
        crate::scmap::param::OffsetTarget {
            rows: self.cfg.free_edges(),
            norm: self.cfg.outer_edges(),
            values: self.values.clone(),
        }
    }

    /// Period of a connecting cycle in the Gdh frame, from the offsets alone.
    pub fn period(&self, c: &Cycle) -> Result<C> {
        let tau = self.cfg.directions_a();
        let q = self.expand();
        linear_period(&tau, &q, c)
    }

    /// Developed Gdh-frame vertex positions (None at infinite vertices), C_1 at the origin.
    pub fn develop(&self) -> Vec<Option<C>> {
        develop_offsets(&self.cfg.directions_a(), &self.expand(), &self.cfg.exponents_a())
    }
}

/// Offset between the lines of a cycle's parallel foot edges, signed along
/// the normal, from per-edge offsets and tangents.
pub fn linear_period(tau: &[C], q: &[f64], c: &Cycle) -> Result<C> {
    let big = tau.len();
    let (a, b) = c.components[0];
    if (tau[a].conj() * tau[b]).im.abs() > 1e-9 {
        return Err(Error::InvalidCycle(format!("{}: foot edges are not parallel", c.name)));
    }
    let normal = tau[a] * C::i();
    let mut k = a;
    let mut sum = C::new(0.0, 0.0);
    loop {
        sum += tau[k] * q[k];
        if k == b {
            break;
        }
        k = (k + 1) % big;
    }
    Ok(normal * (sum * normal.conj()).re)
}

fn develop_offsets(tau: &[C], q: &[f64], exponents: &[i32]) -> Vec<Option<C>> {
    let big = tau.len();
    let a_inf = -4 - exponents.iter().sum::<i32>();
    let finite = |k: usize| exponents.get(k).copied().unwrap_or(a_inf) > -2;
    // Start at the first finite vertex; walk the boundary accumulating q_k tau_k.
    let start = (0..big).find(|&k| finite(k)).unwrap_or(0);
    let mut pos = vec![None; big];
    let mut z = C::new(0.0, 0.0);
    for step in 0..big {
        let k = (start + step) % big;
        if finite(k) {
            pos[k] = Some(z);
        }
        z += tau[k] * q[k];
    }
    pos
}

/// Admissibility of geometric coordinates: dimensions, positivity of the
/// finite outer edges, box inequalities and outer-sheet containment of the
/// branch points. Returns every violated inequality.
pub fn validate_coordinates(gc: &GeometricCoordinates) -> std::result::Result<(), Vec<Violation>> {
    let cfg = gc.cfg;
    let mut out = Vec::new();
    if gc.values.len() != cfg.dim() {
        out.push(Violation { rule: format!("dimension {} != {}", gc.values.len(), cfg.dim()), value: 0.0 });
        return Err(out);
    }
    if gc.values.iter().any(|v| !v.is_finite()) {
        out.push(Violation { rule: "non-finite coordinate".into(), value: f64::NAN });
        return Err(out);
    }
    let q = gc.expand();
    let poly = cfg.polygon(&vec![0.0; cfg.dim()]).expect("natural polygon");
    for k in cfg.outer_edges() {
        if !(q[k] > 0.0) {
            out.push(Violation { rule: format!("outer edge {} > 0", poly.edge_label(k)), value: q[k] });
        }
    }
    let tau = cfg.directions_a();
    let frame = cfg.frame();
    if cfg.m >= 1 && cfg.n >= 1 {
        if let Ok(cs) = coordinate_cycles(&cfg) {
            for c in cs.cycles.iter().filter(|c| !c.name.starts_with("alpha")) {
                let family = c.name.split('_').next().unwrap_or("");
                let dir = box_direction(family).unwrap();
                match linear_period(&tau, &q, c) {
                    Ok(p) => {
                        let v = (p * frame * dir.conj()).re;
                        if !(v > 0.0) {
                            out.push(Violation { rule: format!("per {} > 0", c.name), value: v });
                        }
                    }
                    Err(e) => out.push(Violation { rule: e.to_string(), value: f64::NAN }),
                }
            }
        }
        // Branch points inside the outer sheet. Only the Gdh outer sheet is
        // bounded (its catenoid vertices are finite); in G^{-1}dh the shared
        // box inequalities already confine the branch points.
        let order = cfg.polygon_order();
        {
            let name = "Gdh";
            let pos = develop_offsets(&tau, &q, &cfg.exponents_a());
            let outer: Vec<C> = order
                .iter()
                .zip(&pos)
                .filter(|(v, p)| v.label.kind != Kind::P && p.is_some())
                .map(|(_, p)| p.unwrap())
                .collect();
            let (x0, x1) = outer.iter().fold((f64::MAX, f64::MIN), |(a, b), z| (a.min(z.re), b.max(z.re)));
            let (y0, y1) = outer.iter().fold((f64::MAX, f64::MIN), |(a, b), z| (a.min(z.im), b.max(z.im)));
            for (v, p) in order.iter().zip(&pos) {
                let (Kind::P, Some(z)) = (v.label.kind, p) else { continue };
                let inside_x = x1 - x0 < 1e-12 || (z.re > x0 && z.re < x1);
                let inside_y = y1 - y0 < 1e-12 || (z.im > y0 && z.im < y1);
                if !(inside_x && inside_y) {
                    let gap = (z.re - x0).min(x1 - z.re).min(z.im - y0).min(y1 - z.im);
                    out.push(Violation { rule: format!("{} inside outer sheet of {name}", v.label), value: gap });
                }
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Affine dependence of every box-cycle value (period along its expected
/// direction) on the free coordinates: rows of (name, constant, gradient).
pub fn box_constraints(cfg: &Configuration, base: &[f64]) -> Result<Vec<(String, f64, Vec<f64>)>> {
    let cs = coordinate_cycles(cfg)?;
    let tau = cfg.directions_a();
    let frame = cfg.frame();
    let eval = |v: &[f64], c: &Cycle| -> Result<f64> {
        let gc = GeometricCoordinates::new(*cfg, v.to_vec())?;
        let dir = box_direction(c.name.split('_').next().unwrap_or("")).unwrap();
        Ok((linear_period(&tau, &gc.expand(), c)? * frame * dir.conj()).re)
    };
    let mut rows = Vec::new();
    for c in cs.cycles.iter().filter(|c| !c.name.starts_with("alpha")) {
        let f0 = eval(base, c)?;
        let grad = (0..base.len())
            .map(|i| {
                let mut v = base.to_vec();
                v[i] += 1.0;
                Ok(eval(&v, c)? - f0)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((c.name.clone(), f0, grad));
    }
    Ok(rows)
}

/// Canonical interior point of the coordinate space: outer-sheet edges of
/// equal length and inner offsets placing every branch point as far as
/// possible from its box borders (maximin over the box inequalities).
pub fn retraction_point(cfg: &Configuration) -> Result<GeometricCoordinates> {
    let (m, n) = (cfg.m, cfg.n);
    if cfg.dim() == 0 {
        return GeometricCoordinates::new(*cfg, vec![]);
    }
    let unit = 1.0 / (2 * n + 2) as f64;
    let mut base = vec![unit; n];
    base.extend(std::iter::repeat(0.0).take(m));
    let rows = box_constraints(cfg, &base)?;
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let s = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let vars: Vec<_> = (0..m).map(|_| lp.add_var(0.0, (-1.0, 1.0))).collect();
    for (_, f0, grad) in &rows {
        // f0 + sum g_i v_i - s >= 0 over the inner coordinates.
        let mut expr: Vec<(minilp::Variable, f64)> = vars.iter().zip(&grad[n..]).map(|(&v, &g)| (v, g)).collect();
        expr.push((s, -1.0));
        lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, -f0);
    }
    let sol = lp.solve().map_err(|e| Error::Config(format!("{cfg}: no retraction point ({e})")))?;
    if sol[s] <= 0.0 {
        return Err(Error::Config(format!("{cfg}: box inequalities are infeasible")));
    }
    let mut v: Vec<f64> = vars.iter().map(|var| sol[*var]).collect();
    analytic_center(&rows, n, &mut v);
    let mut out = base;
    out[n..].copy_from_slice(&v);
    GeometricCoordinates::new(*cfg, out)
}

/// Newton iteration for the maximizer of sum(log slack) over the inner
/// coordinates, started from a strictly feasible point.
fn analytic_center(rows: &[(String, f64, Vec<f64>)], skip: usize, v: &mut [f64]) {
    use nalgebra::{DMatrix, DVector};
    let k = v.len();
    let slacks = |v: &[f64]| -> Vec<f64> {
        rows.iter().map(|(_, f0, g)| f0 + g[skip..].iter().zip(v).map(|(a, b)| a * b).sum::<f64>()).collect()
    };
    let merit = |v: &[f64]| -> f64 {
        let s = slacks(v);
        if s.iter().any(|&x| x <= 0.0) {
            f64::INFINITY
        } else {
            -s.iter().map(|x| x.ln()).sum::<f64>()
        }
    };
    for _ in 0..100 {
        let s = slacks(v);
        let mut grad = DVector::zeros(k);
        let mut hess = DMatrix::zeros(k, k);
        for ((_, _, g), &si) in rows.iter().zip(&s) {
            let gi = DVector::from_column_slice(&g[skip..]);
            grad -= &gi / si;
            hess += &gi * gi.transpose() / (si * si);
        }
        let Some(step) = hess.clone().cholesky().map(|c| c.solve(&(-&grad))) else {
            return;
        };
        let decrement = -grad.dot(&step);
        if decrement < 1e-24 {
            return;
        }
        let f0 = merit(v);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = v.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            if merit(&trial) <= f0 - 0.25 * t * decrement {
                v.copy_from_slice(&trial);
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests;
