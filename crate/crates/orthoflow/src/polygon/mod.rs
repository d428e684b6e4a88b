//! Conformal polygons, admissible cycles and their extremal lengths.
//!
//! A conformal polygon is the upper half-plane with finitely many marked
//! boundary points, optionally including infinity. Marked points are indexed
//! in increasing order with infinity (when present) last; edge `k` is the
//! boundary arc from point `k` to point `k + 1` (cyclically).

pub mod elliptic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalPolygon {
    pub prevertices: Vec<f64>,
    pub has_infinity: bool,
    pub labels: Vec<String>,
    /// Involution on marked-point indices induced by t -> -t, if declared.
    pub symmetry: Option<Vec<usize>>,
}

impl ConformalPolygon {
    pub fn new(prevertices: Vec<f64>, has_infinity: bool, labels: Vec<String>) -> Result<Self> {
        let poly = Self { prevertices, has_infinity, labels, symmetry: None };
        poly.check()?;
        Ok(poly)
    }

    /// Unlabeled polygon; labels default to the point index.
    pub fn unlabeled(prevertices: Vec<f64>, has_infinity: bool) -> Result<Self> {
        let count = prevertices.len() + usize::from(has_infinity);
        let labels = (0..count).map(|k| format!("v{k}")).collect();
        Self::new(prevertices, has_infinity, labels)
    }

    pub fn with_symmetry(mut self, sigma: Vec<usize>) -> Result<Self> {
        self.symmetry = Some(sigma);
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        if self.prevertices.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite prevertex".into()));
        }
        if self.prevertices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPolygon("prevertices not strictly increasing".into()));
        }
        if self.labels.len() != self.point_count() {
            return Err(Error::InvalidPolygon(format!(
                "{} labels for {} marked points",
                self.labels.len(),
                self.point_count()
            )));
        }
        if let Some(sigma) = &self.symmetry {
            let m = self.point_count();
            if sigma.len() != m || sigma.iter().any(|&j| j >= m) {
                return Err(Error::InvalidPolygon("symmetry has wrong size".into()));
            }
            for k in 0..m {
                if sigma[sigma[k]] != k {
                    return Err(Error::InvalidPolygon("symmetry is not an involution".into()));
                }
            }
            // Order reversal: consecutive points map to consecutive points backwards.
            for k in 0..m {
                if sigma[(k + 1) % m] != (sigma[k] + m - 1) % m {
                    return Err(Error::InvalidPolygon("symmetry does not reverse order".into()));
                }
            }
        }
        Ok(())
    }

    /// Number of marked points including infinity.
    pub fn point_count(&self) -> usize {
        self.prevertices.len() + usize::from(self.has_infinity)
    }

    pub fn edge_count(&self) -> usize {
        self.point_count()
    }

    /// Position of marked point `k`, `None` for infinity.
    pub fn point(&self, k: usize) -> Option<f64> {
        self.prevertices.get(k).copied()
    }

    /// Endpoint indices of edge `e`.
    pub fn edge_ends(&self, e: usize) -> (usize, usize) {
        let m = self.point_count();
        (e % m, (e + 1) % m)
    }

    pub fn edge_label(&self, e: usize) -> String {
        let (a, b) = self.edge_ends(e);
        format!("{}{}", self.labels[a], self.labels[b])
    }

    /// Image of edge `e` under the symmetry, if one is declared.
    pub fn mirror_edge(&self, e: usize) -> Option<usize> {
        let sigma = self.symmetry.as_ref()?;
        let (a, _) = self.edge_ends(e);
        // Edge (a, a+1) maps to (sigma(a+1), sigma(a)).
        let m = self.point_count();
        Some(sigma[(a + 1) % m])
    }

    pub fn edges_adjacent_or_equal(&self, a: usize, b: usize) -> bool {
        let m = self.edge_count();
        a == b || (a + 1) % m == b || (b + 1) % m == a
    }

    /// Real coordinates of the given marked points after a Möbius map that
    /// moves infinity to a finite point and preserves cyclic order.
    fn finite_images(&self, idx: &[usize; 4]) -> [f64; 4] {
        let needs_map = idx.iter().any(|&k| self.point(k).is_none());
        if !needs_map {
            return idx.map(|k| self.point(k).unwrap());
        }
        let c = self.prevertices.first().copied().unwrap_or(0.0) - 1.0;
        idx.map(|k| match self.point(k) {
            Some(t) => -1.0 / (t - c),
            None => 0.0,
        })
    }
}

/// Conformal modulus of the quadrilateral with vertices x1..x4 (in positive
/// boundary order) for the curve family joining arc (x1,x2) to arc (x3,x4).
pub fn cross_ratio_modulus(x: [f64; 4]) -> f64 {
    let [x1, x2, x3, x4] = x;
    let den = (x4 - x2) * (x3 - x1);
    let s = (x2 - x1) * (x4 - x3) / den;
    let sc = (x3 - x2) * (x4 - x1) / den;
    elliptic::modulus_ratio(s, sc)
}

/// Extremal length of the family of arcs in the upper half-plane joining
/// `edge_a` to `edge_b`.
pub fn quad_extremal_length(poly: &ConformalPolygon, edge_a: usize, edge_b: usize) -> Result<f64> {
    let m = poly.edge_count();
    if edge_a >= m || edge_b >= m {
        return Err(Error::InvalidCycle(format!("edge index out of range ({edge_a}, {edge_b})")));
    }
    if poly.edges_adjacent_or_equal(edge_a, edge_b) {
        return Err(Error::InvalidCycle(format!(
            "edges {} and {} are adjacent or overlapping",
            poly.edge_label(edge_a),
            poly.edge_label(edge_b)
        )));
    }
    let (p1, p2) = poly.edge_ends(edge_a);
    let (p3, p4) = poly.edge_ends(edge_b);
    Ok(cross_ratio_modulus(poly.finite_images(&[p1, p2, p3, p4])))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleKind {
    Connecting,
    Encircling,
}

/// A named boundary-arc cycle. Connecting components are `(a, b)` edge
/// pairs; encircling components are `(e, e)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub name: String,
    pub kind: CycleKind,
    pub components: Vec<(usize, usize)>,
    pub symmetric: bool,
}

impl Cycle {
    pub fn connecting(name: &str, a: usize, b: usize) -> Self {
        Self { name: name.into(), kind: CycleKind::Connecting, components: vec![(a, b)], symmetric: false }
    }

    pub fn connecting_pair(name: &str, first: (usize, usize), second: (usize, usize)) -> Self {
        Self { name: name.into(), kind: CycleKind::Connecting, components: vec![first, second], symmetric: true }
    }

    pub fn encircling(name: &str, e: usize) -> Self {
        Self { name: name.into(), kind: CycleKind::Encircling, components: vec![(e, e)], symmetric: false }
    }

    pub fn encircling_pair(name: &str, e: usize, mirror: usize) -> Self {
        Self {
            name: name.into(),
            kind: CycleKind::Encircling,
            components: vec![(e, e), (mirror, mirror)],
            symmetric: true,
        }
    }

    /// Edge pair whose quadrilateral carries the extremal length of one component.
    pub fn foot_edges(&self, poly: &ConformalPolygon, component: usize) -> (usize, usize) {
        let (a, b) = self.components[component];
        match self.kind {
            CycleKind::Connecting => (a, b),
            CycleKind::Encircling => {
                let m = poly.edge_count();
                ((a + m - 1) % m, (a + 1) % m)
            }
        }
    }

    /// Admissibility: either one component joining a symmetric edge pair,
    /// or two mirror components each on one side of the axis.
    pub fn validate(&self, poly: &ConformalPolygon) -> Result<()> {
        self.validate_structure(poly)?;
        let bad = |msg: &str| Err(Error::InvalidCycle(format!("{}: {msg}", self.name)));
        let Some(_) = poly.symmetry else {
            return Ok(());
        };
        let mirror = |e: usize| poly.mirror_edge(e).unwrap();
        if self.components.len() == 1 {
            let (a, b) = self.components[0];
            if self.kind == CycleKind::Connecting && mirror(a) != b {
                return bad("single component must join a symmetric edge pair");
            }
            if self.kind == CycleKind::Encircling && mirror(a) != a {
                return bad("single encircling component must surround a self-symmetric edge");
            }
        } else {
            let (a1, b1) = self.components[0];
            let (a2, b2) = self.components[1];
            let paired = (mirror(a1) == a2 && mirror(b1) == b2) || (mirror(a1) == b2 && mirror(b1) == a2);
            if !paired {
                return bad("components are not mirror images");
            }
            let (f, g) = self.foot_edges(poly, 0);
            if side_of_edge(poly, f) != side_of_edge(poly, g) {
                return bad("component crosses the symmetry diagonal");
            }
        }
        Ok(())
    }

    /// Component count, index range and disjointness only.
    pub fn validate_structure(&self, poly: &ConformalPolygon) -> Result<()> {
        let m = poly.edge_count();
        let bad = |msg: String| Err(Error::InvalidCycle(format!("{}: {msg}", self.name)));
        if self.components.is_empty() || self.components.len() > 2 {
            return bad("needs one or two components".into());
        }
        if self.symmetric != (self.components.len() == 2) {
            return bad("symmetric flag must match a two-component cycle".into());
        }
        for &(a, b) in &self.components {
            if a >= m || b >= m {
                return bad("edge index out of range".into());
            }
            match self.kind {
                CycleKind::Connecting if poly.edges_adjacent_or_equal(a, b) => {
                    return bad(format!("edges {} and {} not disjoint", poly.edge_label(a), poly.edge_label(b)));
                }
                CycleKind::Encircling if a != b => return bad("encircling cycle names one edge".into()),
                _ => {}
            }
        }
        if m < 4 {
            return bad("polygon has fewer than four edges".into());
        }
        Ok(())
    }
}

/// Which half of the real line (split at the symmetry fixed points) an edge lies in.
fn side_of_edge(poly: &ConformalPolygon, e: usize) -> i8 {
    let (a, b) = poly.edge_ends(e);
    let mid = match (poly.point(a), poly.point(b)) {
        (Some(x), Some(y)) if x < y => 0.5 * (x + y),
        (Some(x), _) => x + 1.0,
        (_, Some(y)) => y - 1.0,
        _ => 0.0,
    };
    if mid < 0.0 {
        -1
    } else {
        1
    }
}

/// How an encircling cycle is turned into a quadrilateral.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncirclingRule {
    /// Curves joining the two edges flanking the encircled edge.
    #[default]
    Flanking,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtOptions {
    pub encircling: EncirclingRule,
    /// Multiplier applied to one component's value for two-component cycles.
    pub double_factor: f64,
}

impl Default for ExtOptions {
    fn default() -> Self {
        Self { encircling: EncirclingRule::Flanking, double_factor: 2.0 }
    }
}

pub fn cycle_extremal_length(poly: &ConformalPolygon, c: &Cycle) -> Result<f64> {
    cycle_extremal_length_with(poly, c, &ExtOptions::default())
}

pub fn cycle_extremal_length_with(poly: &ConformalPolygon, c: &Cycle, opts: &ExtOptions) -> Result<f64> {
    c.validate(poly)?;
    let (a, b) = match opts.encircling {
        EncirclingRule::Flanking => c.foot_edges(poly, 0),
    };
    let single = quad_extremal_length(poly, a, b)?;
    Ok(if c.components.len() == 2 { opts.double_factor * single } else { single })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> ConformalPolygon {
        ConformalPolygon::unlabeled(vec![-1.0, 0.0, 1.0], true).unwrap()
    }

    #[test]
    fn square_modulus_is_one() {
        let p = square();
        assert!((quad_extremal_length(&p, 0, 2).unwrap() - 1.0).abs() < 1e-14);
        assert!((quad_extremal_length(&p, 1, 3).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn adjacent_edges_rejected() {
        let p = square();
        assert!(matches!(quad_extremal_length(&p, 0, 1), Err(Error::InvalidCycle(_))));
        assert!(matches!(quad_extremal_length(&p, 3, 0), Err(Error::InvalidCycle(_))));
    }

    #[test]
    fn symmetric_square_cycle() {
        let p = square().with_symmetry(vec![2, 1, 0, 3]).unwrap();
        // Edges 0 = (-1,0) and 1 = (0,1) are mirror images; 2 = (1,inf), 3 = (inf,-1).
        assert_eq!(p.mirror_edge(0), Some(1));
        assert_eq!(p.mirror_edge(2), Some(3));
        let c = Cycle::connecting("opp", 0, 2);
        assert!(c.validate(&p).is_err());
        let c = Cycle::connecting("opp", 2, 3);
        assert!(c.validate(&p).is_err());
    }

    #[test]
    fn infinity_handled_by_mobius() {
        let p = ConformalPolygon::unlabeled(vec![0.0, 0.3, 1.0], true).unwrap();
        let q = ConformalPolygon::unlabeled(vec![0.0, 0.3, 1.0, 7.0], false).unwrap();
        // Moving the fourth vertex to infinity increases separation; values differ.
        let v1 = quad_extremal_length(&p, 0, 2).unwrap();
        let v2 = quad_extremal_length(&q, 0, 2).unwrap();
        assert!(v1.is_finite() && v2.is_finite() && v1 != v2);
    }
}
