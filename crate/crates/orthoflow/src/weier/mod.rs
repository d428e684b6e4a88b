//! Weierstrass data from a reflexive pair, period verification, surface
//! patches, the symmetry orbit and mesh export.

pub mod mesh;
pub mod patch;
pub mod symmetry;

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

pub use mesh::{Mesh, MeshFormat, Topology};
pub use patch::{integrate_patch, PatchOptions, Tree};
pub use symmetry::{apply_symmetries, SymmetryGroup};

use crate::config::{build_vertex_sequence, Configuration};
use crate::error::{Error, Result};
use crate::polygon::{ConformalPolygon, Cycle};
use crate::scmap::integrate::Integrand;
use crate::scmap::{edge_directions, period_via, OrthodiskSpec, Route, ScIntegrand};
use crate::solver::SolveResult;

const NULL_SAMPLES: usize = 100;
const NULL_TOL: f64 = 1e-10;

/// Gdh and G^-1dh as orthodisk integrands on one polygon, plus dh.
#[derive(Clone, Debug)]
pub struct WeierstrassData {
    pub cfg: Configuration,
    pub polygon: ConformalPolygon,
    pub gdh: OrthodiskSpec,
    pub ginv: OrthodiskSpec,
    /// (a_i + b_i)/2 per finite marked point, in the same halved convention
    /// as the orthodisk exponents: dh carries the power (a_i + b_i)/4.
    pub dh_exponents: Vec<i32>,
    /// Real scale of dh; its sign puts C_1 at the top.
    pub dh_scale: f64,
    /// Largest relative defect of the null identity over the samples.
    pub null_defect: f64,
}

/// The three Weierstrass one-forms at a point, as dt coefficients.
#[derive(Clone, Copy, Debug)]
pub struct Forms {
    pub gdh: C,
    pub ginv: C,
    pub dh: C,
}

impl Forms {
    pub fn omega(&self) -> [C; 3] {
        [0.5 * (self.gdh - self.ginv), C::i() * 0.5 * (self.gdh + self.ginv), self.dh]
    }

    /// Relative defect of omega_1^2 + omega_2^2 + omega_3^2 = 0.
    pub fn null_defect(&self) -> f64 {
        let w = self.omega();
        let sum: C = w.iter().map(|v| v * v).sum();
        let size: f64 = w.iter().map(|v| v.norm_sqr()).sum();
        if size == 0.0 {
            0.0
        } else {
            sum.norm() / size
        }
    }

    /// Gauss map value Gdh/dh.
    pub fn gauss(&self) -> C {
        self.gdh / self.dh
    }

    /// Metric density (|G| + 1/|G|)|dh|/2 = (|Gdh| + |G^-1dh|)/2.
    pub fn metric(&self) -> f64 {
        0.5 * (self.gdh.norm() + self.ginv.norm())
    }
}

/// Unit normal from a Gauss map value by inverse stereographic projection.
pub fn normal(g: C) -> [f64; 3] {
    if !g.is_finite() {
        return [0.0, 0.0, 1.0];
    }
    let r = g.norm_sqr();
    [2.0 * g.re / (r + 1.0), 2.0 * g.im / (r + 1.0), (r - 1.0) / (r + 1.0)]
}

impl WeierstrassData {
    pub fn dh_integrand(&self) -> ScIntegrand {
        let alpha: Vec<f64> = self.dh_exponents.iter().map(|&e| 0.5 * f64::from(e)).collect();
        ScIntegrand::from_alpha(&self.polygon.prevertices, &alpha, C::new(self.dh_scale, 0.0))
    }

    /// Forms at z in the closed upper half-plane, off the marked points.
    pub fn forms(&self, z: C) -> Forms {
        Forms { gdh: self.gdh.integrand().eval(z), ginv: self.ginv.integrand().eval(z), dh: self.dh_integrand().eval(z) }
    }

    /// dh anywhere on the sphere; its powers are integers for every
    /// configuration handled here.
    pub fn dh_global(&self, z: C) -> C {
        let mut v = C::new(self.dh_scale, 0.0);
        for (&t, &e) in self.polygon.prevertices.iter().zip(&self.dh_exponents) {
            v *= (z - t).powf(0.5 * f64::from(e));
        }
        v
    }

    /// Residue of dh at finite marked point k.
    pub fn dh_residue(&self, k: usize) -> C {
        let t = &self.polygon.prevertices;
        let mut v = C::new(self.dh_scale, 0.0);
        for (j, (&s, &e)) in t.iter().zip(&self.dh_exponents).enumerate() {
            if j != k {
                v *= C::new(t[k] - s, 0.0).powf(0.5 * f64::from(e));
            }
        }
        v
    }
}

/// Builds the Weierstrass data from a reflexive solve.
pub fn assemble(sol: &SolveResult) -> Result<WeierstrassData> {
    if !sol.reflexive {
        return Err(Error::Refused(format!("{} solution is not reflexive (height {:.3e})", sol.cfg, sol.height)));
    }
    let order = sol.cfg.polygon_order();
    if let Some(v) = order.iter().find(|v| (v.a + v.b) % 2 != 0) {
        return Err(Error::Refused(format!("odd a+b at {}", v.label)));
    }
    let dh_exponents: Vec<i32> = order.iter().take(sol.polygon.prevertices.len()).map(|v| (v.a + v.b) / 2).collect();
    let c1 = sol.spec_gdh.scale;
    let c2 = sol.spec_ginv.scale;
    let c3 = (c1 * c2).sqrt();
    if c3.im.abs() > 1e-12 * c3.norm() {
        return Err(Error::Refused("Gdh and G^-1dh scales do not give a real dh".into()));
    }
    let mut data = WeierstrassData {
        cfg: sol.cfg,
        polygon: sol.polygon.clone(),
        gdh: sol.spec_gdh.clone(),
        ginv: sol.spec_ginv.clone(),
        dh_exponents,
        dh_scale: c3.re,
        null_defect: 0.0,
    };
    // x3 = Re int dh ~ Re(res) log|t - t_C1| must tend to +infinity at C_1.
    let c1_index = order.iter().position(|v| v.label.to_string() == "C1").expect("C1 present");
    if data.dh_residue(c1_index).re > 0.0 {
        data.dh_scale = -data.dh_scale;
    }
    data.null_defect = null_identity(&data)?;
    Ok(data)
}

fn null_identity(data: &WeierstrassData) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x6e75_6c6c);
    let t = &data.polygon.prevertices;
    let span = t.iter().fold(1.0f64, |m, x| m.max(x.abs())) * 2.0;
    let mut worst = 0.0f64;
    for _ in 0..NULL_SAMPLES {
        let z = C::new(rng.gen_range(-span..span), rng.gen_range(1e-3..span));
        worst = worst.max(data.forms(z).null_defect());
    }
    if worst > NULL_TOL {
        return Err(Error::Geometry(format!("null identity fails: relative defect {worst:.3e}")));
    }
    Ok(worst)
}

/// Limiting height x3 = Re int_i^t dh of every end, labelled. Catenoid
/// ends report +-infinity by the sign of their logarithmic growth.
pub fn end_heights(data: &WeierstrassData) -> Result<Vec<(String, f64)>> {
    use crate::config::Kind;
    use crate::scmap::integrate::Integrator;
    let f = data.dh_integrand();
    let integ = Integrator::default();
    let mut out = Vec::new();
    for (k, v) in data.cfg.polygon_order().iter().enumerate().take(data.polygon.prevertices.len()) {
        let h = match v.label.kind {
            Kind::C => -data.dh_residue(k).re.signum() * f64::INFINITY,
            Kind::P => integ.segment(&f, C::i(), C::new(data.polygon.prevertices[k], 0.0))?.re,
            _ => continue,
        };
        out.push((v.label.to_string(), h));
    }
    Ok(out)
}

/// Ends, genus and Gauss map degree read off the vertex data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisorProfile {
    pub genus: usize,
    pub catenoid_ends: usize,
    pub planar_ends: usize,
    pub gauss_degree: i32,
    /// 2 + a + b <= |a - b| at every marked point.
    pub complete: bool,
}

pub fn divisor_profile(cfg: &Configuration) -> DivisorProfile {
    let seq = build_vertex_sequence(cfg);
    // Every marked point with odd a is a branch point of the double cover.
    let branch = seq.iter().filter(|v| v.a % 2 != 0).count();
    let mut catenoid_ends = 0;
    let mut planar_ends = 0;
    let mut gauss_degree = 0;
    let mut complete = true;
    for v in &seq {
        let dh_order = 1 + (v.a + v.b) / 2;
        let g_order = (v.a - v.b) / 2;
        if g_order.abs() - dh_order >= 2 {
            if dh_order < 0 {
                catenoid_ends += 1;
            } else {
                planar_ends += 1;
            }
        }
        if v.a > v.b {
            gauss_degree += g_order;
        }
        complete &= 2 + v.a + v.b <= (v.a - v.b).abs();
    }
    DivisorProfile { genus: branch / 2 - 1, catenoid_ends, planar_ends, gauss_degree, complete }
}

/// Every pair of parallel, non-adjacent edges as a connecting cycle.
pub fn period_cycles(spec: &OrthodiskSpec) -> Vec<Cycle> {
    let dirs = edge_directions(spec);
    let poly = &spec.polygon;
    let e = poly.edge_count();
    let mut out = Vec::new();
    for a in 0..e {
        for b in a + 1..e {
            if poly.edges_adjacent_or_equal(a, b) || (dirs[a].conj() * dirs[b]).im.abs() > 1e-9 {
                continue;
            }
            out.push(Cycle::connecting(&format!("{}|{}", poly.edge_label(a), poly.edge_label(b)), a, b));
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodCheck {
    /// Largest |Re| of a dh period around a marked point.
    pub dh: f64,
    /// Largest |int Gdh - conj int G^-1dh| over the cycles.
    pub conjugacy: f64,
    pub worst_cycle: String,
}

impl PeriodCheck {
    pub fn max(&self) -> f64 {
        self.dh.max(self.conjugacy)
    }
}

/// Period residuals over `cycles`, computed along arcs in the upper
/// half-plane. Units are those of the normalized outer sheet.
pub fn verify_periods(data: &WeierstrassData, cycles: &[Cycle]) -> Result<PeriodCheck> {
    let mut out = PeriodCheck::default();
    for c in cycles {
        let pa = period_via(&data.gdh, c, Route::Arc)?;
        let pb = period_via(&data.ginv, c, Route::Arc)?;
        let r = (pa - pb.conj()).norm();
        if r > out.conjugacy || out.worst_cycle.is_empty() {
            out.conjugacy = out.conjugacy.max(r);
            out.worst_cycle = c.name.clone();
        }
    }
    out.dh = dh_periods(data).iter().map(|p| p.re.abs()).fold(0.0, f64::max);
    Ok(out)
}

/// Periods of dh on the sphere around each finite marked point, by the
/// trapezoid rule on a circle.
pub fn dh_periods(data: &WeierstrassData) -> Vec<C> {
    let t = &data.polygon.prevertices;
    let gap = t.windows(2).map(|w| w[1] - w[0]).fold(1.0f64, f64::min);
    let r = 0.4 * gap;
    let n = 256;
    t.iter()
        .map(|&c| {
            let mut s = C::new(0.0, 0.0);
            for k in 0..n {
                let e = C::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
                s += data.dh_global(c + r * e) * (C::i() * r * e);
            }
            s * (2.0 * PI / n as f64)
        })
        .collect()
}
