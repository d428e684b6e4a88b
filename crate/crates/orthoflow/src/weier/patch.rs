//! Surface patch over the quarter {Re t <= 0, Im t >= 0}, the fundamental
//! domain of the symmetry group.
//!
//! The quarter is compactified by w = (t - i)/(t + i), which sends it to the
//! upper half of the unit disk with t = i at the center, the imaginary axis
//! on the diameter and t = infinity at w = 1. A polar grid on the half-disk
//! is triangulated; every marked point on the negative real axis gets its
//! own grid angle so that boundary vertices land exactly on it. Positions
//! are accumulated along a spanning tree of grid edges.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64 as C;
use rayon::prelude::*;

use super::{Mesh, WeierstrassData};
use crate::config::Kind;
use crate::error::{Error, Result};
use crate::scmap::integrate::{Integrand, Integrator};
use crate::scmap::{ScIntegrand, TailIntegrand};

const MAX_TRACK_DEPTH: usize = 12;
const MIN_AREA: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tree {
    /// Straight out along the grid spokes.
    Radial,
    /// Out along the middle spoke, then around the rings.
    Ring,
}

#[derive(Clone, Copy, Debug)]
pub struct PatchOptions {
    /// Radial and angular grid steps.
    pub resolution: usize,
    /// Vertices farther than this from the image of t = i are cut.
    pub truncation: f64,
    /// Radius, in angular grid steps, cut around every end.
    pub guard: f64,
    pub tree: Tree,
}

impl Default for PatchOptions {
    fn default() -> Self {
        Self { resolution: 64, truncation: 10.0, guard: 1.5, tree: Tree::Radial }
    }
}

/// Patch mesh with the data carried along the tree.
#[derive(Clone, Debug)]
pub struct Patch {
    pub mesh: Mesh,
    /// Branch-tracked Gauss map per mesh vertex.
    pub gauss: Vec<C>,
    /// Largest mismatch between the tracked root and Gdh/dh.
    pub branch_defect: f64,
}

/// Polar grid on the half-disk.
struct Grid {
    phis: Vec<f64>,
    rings: usize,
    /// Source point per vertex; `None` at t = infinity.
    t: Vec<Option<C>>,
    /// Marked point sitting at the vertex.
    marked: Vec<Option<usize>>,
    dead: Vec<bool>,
}

impl Grid {
    fn id(&self, k: usize, l: usize) -> usize {
        if k == 0 {
            0
        } else {
            1 + (k - 1) * self.phis.len() + l
        }
    }

    fn neighbors(&self, v: usize) -> Vec<(usize, bool)> {
        let nl = self.phis.len();
        if v == 0 {
            return (0..nl).map(|l| (self.id(1, l), true)).collect();
        }
        let (k, l) = (1 + (v - 1) / nl, (v - 1) % nl);
        let mut out = vec![(self.id(k - 1, l), true)];
        if k < self.rings {
            out.push((self.id(k + 1, l), true));
        }
        if l > 0 {
            out.push((self.id(k, l - 1), false));
        }
        if l + 1 < nl {
            out.push((self.id(k, l + 1), false));
        }
        out
    }

    fn triangles(&self) -> Vec<[usize; 3]> {
        let nl = self.phis.len();
        let mut out = Vec::new();
        for l in 0..nl - 1 {
            out.push([0, self.id(1, l), self.id(1, l + 1)]);
        }
        for k in 1..self.rings {
            for l in 0..nl - 1 {
                let (a, b, c, d) = (self.id(k, l), self.id(k + 1, l), self.id(k + 1, l + 1), self.id(k, l + 1));
                out.push([a, b, c]);
                out.push([a, c, d]);
            }
        }
        out
    }
}

fn to_w(t: f64) -> f64 {
    let w = (C::new(t, 0.0) - C::i()) / (C::new(t, 0.0) + C::i());
    w.arg()
}

fn build_grid(data: &WeierstrassData, opts: &PatchOptions) -> Result<Grid> {
    let res = opts.resolution.max(4);
    let step = PI / res as f64;
    let poly = &data.polygon;
    let order = data.cfg.polygon_order();
    // Marked points on the closed negative real axis with their angles.
    let marks: Vec<(usize, f64)> = poly
        .prevertices
        .iter()
        .enumerate()
        .filter(|(_, &t)| t <= 0.0)
        .map(|(k, &t)| (k, if t == 0.0 { PI } else { to_w(t) }))
        .collect();
    let mut phis: Vec<(f64, Option<usize>)> = (0..=res)
        .map(|l| l as f64 * step)
        .filter(|&p| p == 0.0 || marks.iter().all(|&(_, q)| (p - q).abs() > 0.35 * step))
        .map(|p| (p, None))
        .collect();
    phis.extend(marks.iter().map(|&(k, q)| (q, Some(k))));
    phis.sort_by(|a, b| a.0.total_cmp(&b.0));
    // At least three seam vertices between neighbouring marked points, so
    // that no end cut reaches another marked point.
    let mut bounds: Vec<f64> = vec![0.0];
    bounds.extend(marks.iter().map(|m| m.1));
    bounds.sort_by(f64::total_cmp);
    for w in bounds.windows(2) {
        let inside = phis.iter().filter(|p| p.0 > w[0] && p.0 < w[1]).count();
        if inside < 3 {
            phis.retain(|p| !(p.0 > w[0] && p.0 < w[1]));
            phis.extend((1..4).map(|j| (w[0] + 0.25 * j as f64 * (w[1] - w[0]), None)));
        }
    }
    phis.sort_by(|a, b| a.0.total_cmp(&b.0));
    if phis.windows(2).any(|w| w[1].0 - w[0].0 < 1e-12) {
        return Err(Error::Geometry("marked points closer than the grid can separate".into()));
    }
    let rings = res;
    let nl = phis.len();
    let nv = 1 + rings * nl;
    let mut t = vec![Some(C::i()); nv];
    let mut marked = vec![None; nv];
    for k in 1..=rings {
        let rho = k as f64 / rings as f64;
        for (l, &(phi, mark)) in phis.iter().enumerate() {
            let id = 1 + (k - 1) * nl + l;
            t[id] = if k == rings {
                marked[id] = mark;
                match mark {
                    Some(p) => Some(C::new(poly.prevertices[p], 0.0)),
                    None if l == 0 => None,
                    None => Some(C::new(-1.0 / (0.5 * phi).tan(), 0.0)),
                }
            } else if l == 0 || l == nl - 1 {
                let s = if l == 0 { (1.0 + rho) / (1.0 - rho) } else { (1.0 - rho) / (1.0 + rho) };
                Some(C::new(0.0, s))
            } else {
                let w = C::from_polar(rho, phi);
                let z = C::i() * (1.0 + w) / (1.0 - w);
                Some(C::new(z.re.min(0.0), z.im.max(0.0)))
            };
        }
    }
    if data.polygon.has_infinity {
        marked[1 + (rings - 1) * nl] = Some(poly.prevertices.len());
    }
    // Ends: C and P marked points, each cut by a disk that stays clear of
    // the other marked points.
    let on_circle: Vec<C> = marks.iter().map(|&(_, q)| C::from_polar(1.0, q)).chain([C::new(1.0, 0.0)]).collect();
    let ends: Vec<(C, f64)> = marks
        .iter()
        .enumerate()
        .filter(|&(_, &(k, _))| matches!(order[k].label.kind, Kind::C | Kind::P))
        .map(|(i, _)| {
            let e = on_circle[i];
            let clear = on_circle.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, o)| (o - e).norm()).fold(f64::INFINITY, f64::min);
            (e, (opts.guard * step).min(0.45 * clear))
        })
        .collect();
    let mut dead = vec![false; nv];
    for k in 1..=rings {
        let rho = k as f64 / rings as f64;
        for (l, &(phi, mark)) in phis.iter().enumerate() {
            let w = C::from_polar(rho, phi);
            let at_end = k == rings && mark.is_some_and(|p| matches!(order[p].label.kind, Kind::C | Kind::P));
            if at_end || ends.iter().any(|&(e, r)| (w - e).norm() < r) {
                dead[1 + (k - 1) * nl + l] = true;
            }
        }
    }
    Ok(Grid { phis: phis.into_iter().map(|p| p.0).collect(), rings, t, marked, dead })
}

/// Spanning tree by Dijkstra from the center; returns parents and the
/// settling order. Marked vertices are leaves.
fn spanning_tree(g: &Grid, tree: Tree) -> (Vec<Option<usize>>, Vec<usize>) {
    let nv = g.t.len();
    let nl = g.phis.len();
    let mid = nl / 2;
    // A radial edge has the angle index of its outer vertex.
    let cost = |v: usize, w: usize, radial: bool| -> u64 {
        let cheap = match tree {
            Tree::Radial => radial,
            Tree::Ring => !radial || (v.max(w) - 1) % nl == mid,
        };
        if cheap {
            1
        } else {
            1000
        }
    };
    let mut dist = vec![u64::MAX; nv];
    let mut parent = vec![None; nv];
    let mut order = Vec::with_capacity(nv);
    let mut heap = BinaryHeap::new();
    dist[0] = 0;
    heap.push(Reverse((0u64, 0usize)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        order.push(v);
        if g.marked[v].is_some() {
            continue;
        }
        for (w, radial) in g.neighbors(v) {
            if g.dead[w] {
                continue;
            }
            let nd = d + cost(v, w, radial);
            if nd < dist[w] {
                dist[w] = nd;
                parent[w] = Some(v);
                heap.push(Reverse((nd, w)));
            }
        }
    }
    (parent, order)
}

struct Forms3 {
    f: [ScIntegrand; 3],
}

impl Forms3 {
    fn new(data: &WeierstrassData) -> Self {
        Self { f: [data.gdh.integrand(), data.ginv.integrand(), data.dh_integrand()] }
    }

    fn integral(&self, a: Option<C>, b: Option<C>) -> Result<[C; 3]> {
        let integ = Integrator::default();
        let mut out = [C::new(0.0, 0.0); 3];
        for (o, f) in out.iter_mut().zip(&self.f) {
            *o = match (a, b) {
                (Some(a), Some(b)) => integ.segment(f, a, b)?,
                (Some(a), None) => integ.segment(&TailIntegrand::new(f), -1.0 / a, C::new(0.0, 0.0))?,
                (None, Some(b)) => -integ.segment(&TailIntegrand::new(f), -1.0 / b, C::new(0.0, 0.0))?,
                (None, None) => C::new(0.0, 0.0),
            };
        }
        Ok(out)
    }

    fn square_gauss(&self, z: C) -> C {
        self.f[0].eval(z) / self.f[1].eval(z)
    }

    fn gauss(&self, z: C) -> C {
        self.f[0].eval(z) / self.f[2].eval(z)
    }
}

/// Continues the square root of Gdh/G^-1dh from `g0` at `a` to `b`,
/// bisecting while a step turns by more than an eighth of a turn; a
/// quarter turn at the finest level is an error.
fn track(forms: &Forms3, g0: C, a: C, b: C, depth: usize) -> Result<C> {
    let r = forms.square_gauss(b).sqrt();
    let g = if (r - g0).norm() <= (r + g0).norm() { r } else { -r };
    let turn = (g / g0).arg().abs();
    // Bisect well before the quarter-turn ambiguity.
    if turn <= FRAC_PI_4 || (depth >= MAX_TRACK_DEPTH && turn <= FRAC_PI_2) {
        return Ok(g);
    }
    if depth >= MAX_TRACK_DEPTH {
        return Err(Error::Geometry(format!("branch tracking jumps by more than a quarter turn between {a} and {b}")));
    }
    let m = 0.5 * (a + b);
    let gm = track(forms, g0, a, m, depth + 1)?;
    track(forms, gm, m, b, depth + 1)
}

fn position(p: &[C; 3]) -> [f64; 3] {
    [(0.5 * (p[0] - p[1])).re, (C::i() * 0.5 * (p[0] + p[1])).re, p[2].re]
}

/// Integrates the fundamental piece.
pub fn integrate_patch(data: &WeierstrassData, opts: &PatchOptions) -> Result<Mesh> {
    build_patch(data, opts).map(|p| p.mesh)
}

pub fn build_patch(data: &WeierstrassData, opts: &PatchOptions) -> Result<Patch> {
    let grid = build_grid(data, opts)?;
    let (parent, order) = spanning_tree(&grid, opts.tree);
    let forms = Forms3::new(data);
    let nv = grid.t.len();
    // Edge integrals are independent; accumulate them afterwards in tree order.
    let steps: Vec<Option<[C; 3]>> = (0..nv)
        .into_par_iter()
        .map(|v| parent[v].map(|p| forms.integral(grid.t[p], grid.t[v])).transpose())
        .collect::<Result<_>>()?;
    let mut prim = vec![None; nv];
    let mut gauss = vec![C::new(f64::NAN, f64::NAN); nv];
    prim[0] = Some([C::new(0.0, 0.0); 3]);
    gauss[0] = forms.gauss(C::i());
    let mut branch_defect = 0.0f64;
    let vertex_data = data.cfg.polygon_order();
    for &v in order.iter().skip(1) {
        let p = parent[v].expect("settled vertex has a parent");
        let (Some(pp), Some(s)) = (prim[p], steps[v]) else { continue };
        prim[v] = Some([pp[0] + s[0], pp[1] + s[1], pp[2] + s[2]]);
        gauss[v] = match (grid.marked[v], grid.t[v]) {
            (None, Some(z)) => {
                let g = track(&forms, gauss[p], grid.t[p].expect("parents are finite"), z, 0)?;
                let direct = forms.gauss(z);
                branch_defect = branch_defect.max((g - direct).norm() / direct.norm().max(1e-300));
                g
            }
            // Marked points: the limit is 0 or infinity by the vertex data.
            (Some(k), _) => {
                let spec = vertex_data[k];
                if spec.a > spec.b {
                    C::new(0.0, 0.0)
                } else {
                    C::new(f64::INFINITY, 0.0)
                }
            }
            (None, None) => unreachable!("only the marked point at infinity has no finite source"),
        };
    }
    if branch_defect > 1e-8 {
        return Err(Error::Geometry(format!("tracked Gauss map drifts from Gdh/dh by {branch_defect:.3e}")));
    }
    let root = position(&prim[0].expect("root"));
    let mut alive = vec![false; nv];
    let mut mesh = Mesh::default();
    let mut index = vec![usize::MAX; nv];
    let mut g_out = Vec::new();
    for v in 0..nv {
        let Some(p) = prim[v] else { continue };
        let x = position(&p);
        let r = ((x[0] - root[0]).powi(2) + (x[1] - root[1]).powi(2) + (x[2] - root[2]).powi(2)).sqrt();
        if grid.dead[v] || !x.iter().all(|c| c.is_finite()) || r > opts.truncation {
            continue;
        }
        alive[v] = true;
        index[v] = mesh.vertices.len();
        mesh.vertices.push(x);
        mesh.source.push(grid.t[v].unwrap_or(C::new(f64::INFINITY, 0.0)));
        mesh.orbit.push(0);
        g_out.push(gauss[v]);
    }
    mesh.triangles = grid.triangles().into_iter().filter(|t| t.iter().all(|&v| alive[v])).map(|t| t.map(|v| index[v])).collect();
    // Keep the piece attached to the center, without slivers.
    let kept = mesh.keep_component(0);
    let kept2 = mesh.compact(MIN_AREA);
    let gauss = kept2.iter().map(|&i| g_out[kept[i]]).collect();
    Ok(Patch { mesh, gauss, branch_defect })
}
