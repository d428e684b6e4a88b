//! Triangle meshes: OBJ and binary PLY export and import, topology and
//! discrete mean curvature.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64 as C;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    /// Polygon point each vertex came from; infinite re at the marked point
    /// at infinity.
    pub source: Vec<C>,
    /// Index of the group element that produced the vertex.
    pub orbit: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(p: &Path) -> Option<Self> {
        match p.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

/// Combinatorial summary of a mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Topology {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub boundary_loops: usize,
    pub components: usize,
    /// Edges with more than two incident faces.
    pub nonmanifold_edges: usize,
    /// Interior edges traversed in the same direction by both faces.
    pub orientation_conflicts: usize,
}

impl Topology {
    pub fn euler(&self) -> i64 {
        self.vertices as i64 - self.edges as i64 + self.faces as i64
    }

    /// Genus of a connected orientable surface with boundary.
    pub fn genus(&self) -> Option<usize> {
        let twice = 2 - self.euler() - self.boundary_loops as i64;
        (self.components == 1 && twice >= 0 && twice % 2 == 0).then_some((twice / 2) as usize)
    }

    pub fn is_manifold(&self) -> bool {
        self.nonmanifold_edges == 0 && self.orientation_conflicts == 0
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

impl Mesh {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Unit cube with outward-facing triangles.
    pub fn cube() -> Self {
        let vertices: Vec<[f64; 3]> =
            (0..8).map(|k| [f64::from(k & 1), f64::from((k >> 1) & 1), f64::from((k >> 2) & 1)]).collect();
        let quads = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
        let triangles = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
        Self { source: vec![C::new(0.0, 0.0); 8], orbit: vec![0; 8], vertices, triangles }
    }

    pub fn triangle_area(&self, t: [usize; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.vertices[i]);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn mean_edge_length(&self) -> f64 {
        let (mut s, mut n) = (0.0, 0usize);
        for t in &self.triangles {
            for k in 0..3 {
                s += norm(sub(self.vertices[t[k]], self.vertices[t[(k + 1) % 3]]));
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }

    /// Drops triangles below `min_area` and vertices no triangle uses;
    /// returns the old index of every kept vertex.
    pub fn compact(&mut self, min_area: f64) -> Vec<usize> {
        let keep: Vec<[usize; 3]> = self.triangles.iter().copied().filter(|&t| self.triangle_area(t) >= min_area).collect();
        let mut used = vec![false; self.vertices.len()];
        for t in &keep {
            for &v in t {
                used[v] = true;
            }
        }
        let mut map = vec![usize::MAX; self.vertices.len()];
        let mut out = Mesh::default();
        let mut old = Vec::new();
        for (i, &u) in used.iter().enumerate() {
            if u {
                map[i] = out.vertices.len();
                old.push(i);
                out.vertices.push(self.vertices[i]);
                out.source.push(self.source.get(i).copied().unwrap_or_default());
                out.orbit.push(self.orbit.get(i).copied().unwrap_or_default());
            }
        }
        out.triangles = keep.iter().map(|t| t.map(|v| map[v])).collect();
        *self = out;
        old
    }

    /// Keeps only the connected component of triangles containing `vertex`;
    /// returns the old index of every kept vertex.
    pub fn keep_component(&mut self, vertex: usize) -> Vec<usize> {
        let comp = self.triangle_components();
        if let Some(target) = self.triangles.iter().position(|t| t.contains(&vertex)).map(|i| comp[i]) {
            let tris: Vec<[usize; 3]> = self.triangles.iter().zip(&comp).filter(|(_, &c)| c == target).map(|(t, _)| *t).collect();
            self.triangles = tris;
        }
        self.compact(0.0)
    }

    fn triangle_components(&self) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for t in &self.triangles {
            let r0 = find(&mut parent, t[0]);
            for &v in &t[1..] {
                let r = find(&mut parent, v);
                parent[r] = r0;
            }
        }
        self.triangles.iter().map(|t| find(&mut parent, t[0])).collect()
    }

    pub fn topology(&self) -> Topology {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        let mut undirected: HashMap<(usize, usize), usize> = HashMap::new();
        for (&(a, b), &c) in &directed {
            *undirected.entry((a.min(b), a.max(b))).or_default() += c;
        }
        let nonmanifold_edges = undirected.values().filter(|&&c| c > 2).count();
        let orientation_conflicts = directed.values().filter(|&&c| c > 1).count();
        // Boundary edges, oriented as in their face, chained into loops.
        let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut boundary = 0usize;
        for (&(a, b), &c) in &undirected {
            if c == 1 {
                boundary += 1;
                let (s, e) = if directed.contains_key(&(a, b)) { (a, b) } else { (b, a) };
                next.entry(s).or_default().push(e);
            }
        }
        let mut loops = 0;
        let mut seen = 0usize;
        while seen < boundary {
            let start = *next.iter().find(|(_, v)| !v.is_empty()).map(|(k, _)| k).expect("open boundary edge");
            let mut v = start;
            loop {
                let Some(w) = next.get_mut(&v).and_then(|l| l.pop()) else { break };
                seen += 1;
                v = w;
                if v == start {
                    break;
                }
            }
            loops += 1;
        }
        let used: std::collections::HashSet<usize> = self.triangles.iter().flatten().copied().collect();
        let mut roots: Vec<usize> = self.triangle_components();
        roots.sort_unstable();
        roots.dedup();
        Topology {
            vertices: used.len(),
            edges: undirected.len(),
            faces: self.triangles.len(),
            boundary_loops: loops,
            components: roots.len(),
            nonmanifold_edges,
            orientation_conflicts,
        }
    }

    /// Vertices on no boundary edge.
    pub fn interior_vertices(&self) -> Vec<bool> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut interior = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                interior[v] = true;
            }
        }
        for (&(a, b), &c) in &count {
            if c != 2 {
                interior[a] = false;
                interior[b] = false;
            }
        }
        interior
    }

    /// Cotangent-formula mean curvature |H| at interior vertices, with the
    /// barycentric area; `None` elsewhere.
    pub fn mean_curvature(&self) -> Vec<Option<f64>> {
        let nv = self.vertices.len();
        let mut lap = vec![[0.0; 3]; nv];
        let mut area = vec![0.0; nv];
        for t in &self.triangles {
            let p = t.map(|i| self.vertices[i]);
            let a = self.triangle_area(*t);
            for k in 0..3 {
                let (i, j, o) = (k, (k + 1) % 3, (k + 2) % 3);
                let u = sub(p[i], p[o]);
                let v = sub(p[j], p[o]);
                let cot = dot(u, v) / norm(cross(u, v)).max(1e-300);
                let e = sub(p[j], p[i]);
                for d in 0..3 {
                    lap[t[i]][d] += 0.5 * cot * e[d];
                    lap[t[j]][d] -= 0.5 * cot * e[d];
                }
                area[t[k]] += a / 3.0;
            }
        }
        let interior = self.interior_vertices();
        (0..nv).map(|v| (interior[v] && area[v] > 0.0).then(|| norm(lap[v]) / (2.0 * area[v]))).collect()
    }

    pub fn write(&self, path: &Path, format: MeshFormat) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = BufWriter::new(f);
        match format {
            MeshFormat::Obj => self.write_obj(&mut w)?,
            MeshFormat::Ply => self.write_ply(&mut w)?,
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path, format: MeshFormat) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        match format {
            MeshFormat::Obj => Self::read_obj(BufReader::new(f)),
            MeshFormat::Ply => Self::read_ply(BufReader::new(f)),
        }
    }

    pub fn write_obj<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# orthoflow mesh: {} vertices, {} faces", self.vertices.len(), self.triangles.len())?;
        for v in &self.vertices {
            writeln!(w, "v {:.16e} {:.16e} {:.16e}", v[0], v[1], v[2])?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    pub fn read_obj<R: BufRead>(r: R) -> Result<Self> {
        let bad = |l: &str| Error::Io(format!("malformed OBJ line: {l}"));
        let mut m = Mesh::default();
        for line in r.lines() {
            let line = line?;
            let mut it = line.split_whitespace();
            match it.next() {
                Some("v") => {
                    let mut p = [0.0; 3];
                    for c in &mut p {
                        *c = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(&line))?;
                    }
                    m.vertices.push(p);
                }
                Some("f") => {
                    let idx: Vec<usize> = it
                        .map(|s| s.split('/').next().and_then(|x| x.parse::<usize>().ok()).filter(|&x| x > 0).map(|x| x - 1))
                        .collect::<Option<_>>()
                        .ok_or_else(|| bad(&line))?;
                    if idx.len() < 3 {
                        return Err(bad(&line));
                    }
                    for k in 1..idx.len() - 1 {
                        m.triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        m.fill_metadata()?;
        Ok(m)
    }

    pub fn write_ply<W: Write>(&self, w: &mut W) -> Result<()> {
        write!(
            w,
            "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
             element face {}\nproperty list uchar int vertex_indices\nend_header\n",
            self.vertices.len(),
            self.triangles.len()
        )?;
        for v in &self.vertices {
            for c in v {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        for t in &self.triangles {
            w.write_all(&[3u8])?;
            for &i in t {
                let i = i32::try_from(i).map_err(|_| Error::Io("vertex index exceeds PLY int range".into()))?;
                w.write_all(&i.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_ply<R: BufRead>(mut r: R) -> Result<Self> {
        let bad = |s: &str| Error::Io(format!("malformed PLY: {s}"));
        let (mut nv, mut nf) = (0usize, 0usize);
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim() != "ply" {
            return Err(bad("missing magic"));
        }
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(bad("unterminated header"));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["end_header"] => break,
                ["format", f, _] if *f != "binary_little_endian" => return Err(bad("unsupported format")),
                ["element", "vertex", n] => nv = n.parse().map_err(|_| bad("vertex count"))?,
                ["element", "face", n] => nf = n.parse().map_err(|_| bad("face count"))?,
                _ => {}
            }
        }
        let mut m = Mesh::default();
        let mut b8 = [0u8; 8];
        for _ in 0..nv {
            let mut p = [0.0; 3];
            for c in &mut p {
                r.read_exact(&mut b8)?;
                *c = f64::from_le_bytes(b8);
            }
            m.vertices.push(p);
        }
        let mut b4 = [0u8; 4];
        for _ in 0..nf {
            let mut n = [0u8; 1];
            r.read_exact(&mut n)?;
            if n[0] != 3 {
                return Err(bad("non-triangular face"));
            }
            let mut t = [0usize; 3];
            for i in &mut t {
                r.read_exact(&mut b4)?;
                *i = usize::try_from(i32::from_le_bytes(b4)).map_err(|_| bad("negative index"))?;
            }
            m.triangles.push(t);
        }
        m.fill_metadata()?;
        Ok(m)
    }

    fn fill_metadata(&mut self) -> Result<()> {
        let n = self.vertices.len();
        if self.triangles.iter().flatten().any(|&i| i >= n) {
            return Err(Error::Io("face index out of range".into()));
        }
        self.source = vec![C::new(0.0, 0.0); n];
        self.orbit = vec![0; n];
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_counts_and_topology() {
        let c = Mesh::cube();
        assert_eq!((c.vertices.len(), c.triangles.len()), (8, 12));
        let t = c.topology();
        assert_eq!(t.euler(), 2);
        assert_eq!(t.boundary_loops, 0);
        assert!(t.is_manifold());
        assert_eq!(t.genus(), Some(0));
    }

    #[test]
    fn cube_faces_point_outward() {
        let c = Mesh::cube();
        for t in &c.triangles {
            let p = t.map(|i| c.vertices[i]);
            let n = cross(sub(p[1], p[0]), sub(p[2], p[0]));
            let centroid: [f64; 3] = std::array::from_fn(|d| (p[0][d] + p[1][d] + p[2][d]) / 3.0 - 0.5);
            assert!(dot(n, centroid) > 0.0);
        }
    }

    #[test]
    fn empty_mesh_writes_header_only() {
        let m = Mesh::default();
        let mut obj = Vec::new();
        m.write_obj(&mut obj).unwrap();
        assert_eq!(Mesh::read_obj(&obj[..]).unwrap(), m);
        let mut ply = Vec::new();
        m.write_ply(&mut ply).unwrap();
        assert!(String::from_utf8(ply.clone()).unwrap().ends_with("end_header\n"));
        assert_eq!(Mesh::read_ply(&ply[..]).unwrap(), m);
    }

    #[test]
    fn round_trips_are_bitwise() {
        let mut m = Mesh::cube();
        for (k, v) in m.vertices.iter_mut().enumerate() {
            v[0] = v[0] * std::f64::consts::PI + 1e-17 * k as f64;
            v[1] = (v[1] + 0.1).ln();
            v[2] = -v[2] / 3.0;
        }
        m.source = vec![C::new(0.0, 0.0); 8];
        let mut obj = Vec::new();
        m.write_obj(&mut obj).unwrap();
        let back = Mesh::read_obj(&obj[..]).unwrap();
        assert_eq!(back.triangles, m.triangles);
        for (a, b) in back.vertices.iter().zip(&m.vertices) {
            for d in 0..3 {
                assert_eq!(a[d].to_bits(), b[d].to_bits());
            }
        }
        let mut ply = Vec::new();
        m.write_ply(&mut ply).unwrap();
        assert_eq!(Mesh::read_ply(&ply[..]).unwrap(), back);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Mesh::cube();
        for (name, fmt) in [("c.obj", MeshFormat::Obj), ("c.ply", MeshFormat::Ply)] {
            let p = dir.path().join(name);
            assert_eq!(MeshFormat::from_path(&p), Some(fmt));
            m.write(&p, fmt).unwrap();
            assert_eq!(Mesh::read(&p, fmt).unwrap(), m);
        }
    }

    #[test]
    fn plane_has_zero_mean_curvature_and_sphere_does_not() {
        let n = 20;
        let mut plane = Mesh::default();
        let mut sphere = Mesh::default();
        for i in 0..=n {
            for j in 0..=n {
                let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                plane.vertices.push([u, v + 0.3 * u, 0.0]);
                let (th, ph) = (0.5 + 2.0 * u, 0.5 + 2.0 * v);
                sphere.vertices.push([th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
            }
        }
        for i in 0..n {
            for j in 0..n {
                let a = i * (n + 1) + j;
                for m in [&mut plane, &mut sphere] {
                    m.triangles.push([a, a + n + 1, a + n + 2]);
                    m.triangles.push([a, a + n + 2, a + 1]);
                }
            }
        }
        let hp: Vec<f64> = plane.mean_curvature().into_iter().flatten().collect();
        assert!(hp.iter().all(|h| *h < 1e-12));
        let hs: Vec<f64> = sphere.mean_curvature().into_iter().flatten().collect();
        let mean = hs.iter().sum::<f64>() / hs.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
    }
}
