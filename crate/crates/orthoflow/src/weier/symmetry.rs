//! The order-8 symmetry group fitted to a patch, orbit construction and
//! seam welding.
//!
//! Boundary arcs over the negative real axis lie in two vertical planes,
//! x1 = const over edges with imaginary Gdh direction and x2 = const over
//! edges with real direction. The imaginary axis maps to a straight line,
//! and the half-turn about it carries the patch onto its mirror quarter.

use std::collections::HashMap;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::{Mesh, WeierstrassData};
use crate::error::{Error, Result};
use crate::scmap::edge_directions;

type P3 = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub normal: P3,
    pub offset: f64,
}

impl Plane {
    pub fn reflect(&self, x: P3) -> P3 {
        let d = dot(self.normal, x) - self.offset;
        std::array::from_fn(|k| x[k] - 2.0 * d * self.normal[k])
    }

    pub fn distance(&self, x: P3) -> f64 {
        (dot(self.normal, x) - self.offset).abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub point: P3,
    pub direction: P3,
}

impl Axis {
    /// Half-turn about the axis.
    pub fn rotate(&self, x: P3) -> P3 {
        let r: P3 = std::array::from_fn(|k| x[k] - self.point[k]);
        let s = dot(r, self.direction);
        std::array::from_fn(|k| self.point[k] + 2.0 * s * self.direction[k] - r[k])
    }

    pub fn distance(&self, x: P3) -> f64 {
        let r: P3 = std::array::from_fn(|k| x[k] - self.point[k]);
        let s = dot(r, self.direction);
        (dot(r, r) - s * s).max(0.0).sqrt()
    }
}

fn dot(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryGroup {
    pub planes: [Plane; 2],
    pub axis: Axis,
    /// Largest distance of a seam vertex from the plane or line it should
    /// lie on.
    pub seam_gap: f64,
}

impl SymmetryGroup {
    pub const ORDER: usize = 8;

    /// Element k: bit 2 applies the half-turn, then bit 1 and bit 0 the
    /// two reflections.
    pub fn apply(&self, k: usize, x: P3) -> P3 {
        let mut y = x;
        if k & 4 != 0 {
            y = self.axis.rotate(y);
        }
        if k & 2 != 0 {
            y = self.planes[1].reflect(y);
        }
        if k & 1 != 0 {
            y = self.planes[0].reflect(y);
        }
        y
    }

    /// Whether element k reverses the orientation of the surface.
    pub fn flips(k: usize) -> bool {
        (k as u32).count_ones() % 2 == 1
    }

    /// Generators as element indices.
    pub fn generators() -> [usize; 3] {
        [1, 2, 4]
    }

    /// Fits the planes and axis to the seams of a patch.
    pub fn fit(patch: &Mesh, data: &WeierstrassData) -> Result<Self> {
        let t = &data.polygon.prevertices;
        let dirs = edge_directions(&data.gdh);
        let mut on_plane: [Vec<P3>; 2] = [Vec::new(), Vec::new()];
        let mut on_axis = Vec::new();
        for (x, s) in patch.vertices.iter().zip(&patch.source) {
            if !s.re.is_finite() {
                continue;
            }
            if s.re == 0.0 {
                on_axis.push(*x);
            }
            if s.im == 0.0 && s.re < 0.0 && !t.contains(&s.re) {
                // Edge k runs from t_k to t_{k+1}; the edge from infinity to t_0 is last.
                let e = t.iter().rposition(|&v| v < s.re).unwrap_or(t.len());
                let real = dirs[e].re.abs() > dirs[e].im.abs();
                on_plane[usize::from(real)].push(*x);
            }
        }
        if on_plane.iter().any(Vec::is_empty) || on_axis.len() < 2 {
            return Err(Error::Geometry("patch lacks seam vertices to fit the symmetry group".into()));
        }
        let mean = |v: &[P3], k: usize| v.iter().map(|x| x[k]).sum::<f64>() / v.len() as f64;
        let planes = [
            Plane { normal: [1.0, 0.0, 0.0], offset: mean(&on_plane[0], 0) },
            Plane { normal: [0.0, 1.0, 0.0], offset: mean(&on_plane[1], 1) },
        ];
        let axis = fit_line(&on_axis);
        let mut seam_gap = 0.0f64;
        for (p, pts) in planes.iter().zip(&on_plane) {
            for x in pts {
                seam_gap = seam_gap.max(p.distance(*x));
            }
        }
        for x in &on_axis {
            seam_gap = seam_gap.max(axis.distance(*x));
        }
        Ok(Self { planes, axis, seam_gap })
    }
}

fn fit_line(pts: &[P3]) -> Axis {
    let n = pts.len() as f64;
    let c: P3 = std::array::from_fn(|k| pts.iter().map(|x| x[k]).sum::<f64>() / n);
    let mut m = Matrix3::zeros();
    for x in pts {
        let d = Vector3::new(x[0] - c[0], x[1] - c[1], x[2] - c[2]);
        m += d * d.transpose();
    }
    let eig = SymmetricEigen::new(m);
    let k = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(k);
    Axis { point: c, direction: [v[0], v[1], v[2]] }
}

/// Vertex welding by a hash grid with cell size `tol`.
struct Welder {
    tol: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl Welder {
    fn key(&self, x: P3) -> [i64; 3] {
        x.map(|c| (c / self.tol).floor() as i64)
    }

    fn find(&self, pts: &[P3], x: P3) -> Option<(usize, f64)> {
        let k = self.key(x);
        let mut best: Option<(usize, f64)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(list) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else { continue };
                    for &i in list {
                        let d = (0..3).map(|j| (pts[i][j] - x[j]).powi(2)).sum::<f64>().sqrt();
                        if d <= self.tol && best.is_none_or(|b| d < b.1) {
                            best = Some((i, d));
                        }
                    }
                }
            }
        }
        best
    }

    fn insert(&mut self, i: usize, x: P3) {
        let k = self.key(x);
        self.cells.entry(k).or_default().push(i);
    }
}

/// Orbit of the patch under the group, with coincident seam vertices
/// merged within `tol`.
pub fn apply_symmetries(patch: &Mesh, data: &WeierstrassData, tol: f64) -> Result<(Mesh, SymmetryGroup)> {
    let group = SymmetryGroup::fit(patch, data)?;
    if group.seam_gap > tol {
        return Err(Error::Geometry(format!("seam mismatch: worst seam gap {:.3e} exceeds {tol:.1e}", group.seam_gap)));
    }
    let mut out = Mesh::default();
    let mut welder = Welder { tol, cells: HashMap::new() };
    for k in 0..SymmetryGroup::ORDER {
        let mut map = Vec::with_capacity(patch.vertices.len());
        for (v, s) in patch.vertices.iter().zip(&patch.source) {
            let y = group.apply(k, *v);
            let idx = match welder.find(&out.vertices, y) {
                Some((i, _)) => i,
                None => {
                    let i = out.vertices.len();
                    out.vertices.push(y);
                    out.source.push(*s);
                    out.orbit.push(k as u8);
                    welder.insert(i, y);
                    i
                }
            };
            map.push(idx);
        }
        for t in &patch.triangles {
            let mut f = t.map(|v| map[v]);
            if SymmetryGroup::flips(k) {
                f.swap(1, 2);
            }
            if f[0] != f[1] && f[1] != f[2] && f[0] != f[2] {
                out.triangles.push(f);
            }
        }
    }
    Ok((out, group))
}

/// Largest distance from the image of a sampled vertex under each
/// generator to the nearest mesh vertex.
pub fn invariance_defect(mesh: &Mesh, group: &SymmetryGroup, samples: usize) -> [f64; 3] {
    let tol = 1e-3;
    let mut welder = Welder { tol, cells: HashMap::new() };
    for (i, x) in mesh.vertices.iter().enumerate() {
        welder.insert(i, *x);
    }
    let stride = (mesh.vertices.len() / samples.max(1)).max(1);
    SymmetryGroup::generators().map(|g| {
        mesh.vertices
            .iter()
            .step_by(stride)
            .map(|x| welder.find(&mesh.vertices, group.apply(g, *x)).map_or(f64::INFINITY, |b| b.1))
            .fold(0.0, f64::max)
    })
}
