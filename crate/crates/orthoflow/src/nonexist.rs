//! Combinatorial obstruction for DH_{m,n} with m > n: a chain of forced
//! period directions that ends with a branch point pushed off the outer
//! sheet.

use std::fmt;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::config::{Configuration, Kind, Label};
use crate::height::{SIDE_GDH, SIDE_GINV};
use crate::solver::{minimize_period_residual, DualOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Gdh,
    GinvDh,
}

impl Domain {
    pub fn other(self) -> Self {
        match self {
            Domain::Gdh => Domain::GinvDh,
            Domain::GinvDh => Domain::Gdh,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Gdh => SIDE_GDH,
            Domain::GinvDh => SIDE_GINV,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Right,
}

impl Direction {
    pub fn unit(self) -> C {
        match self {
            Direction::Up => C::i(),
            Direction::Right => C::new(1.0, 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reason {
    /// Period of the cycle through the central inner sheet lies on the
    /// symmetry axis.
    Symmetry,
    /// The named branch point must stay inside the outer sheet.
    Containment(String),
    /// Reflection of the other domain's period across the conjugation line.
    Conjugacy,
}

/// One forced period direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub cycle: String,
    /// Polygon edges of the two feet.
    pub feet: (usize, usize),
    pub domain: Domain,
    pub direction: Direction,
    pub reason: Reason,
}

/// Determination of the conjugation line from the catenoid cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineStep {
    pub cycle: String,
    pub gdh: Direction,
    pub ginv: Direction,
    /// Unit direction of the line, up to sign.
    pub line: C,
}

impl LineStep {
    pub fn is_diagonal(&self) -> bool {
        let u = self.line * self.line;
        (u - C::i()).norm() < 1e-12
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstructionCertificate {
    pub cfg: Configuration,
    pub line: LineStep,
    pub chain: Vec<ChainStep>,
    pub terminal: String,
}

fn label(kind: Kind, index: usize) -> Label {
    Label { kind, index }
}

/// H_k for k >= 1, with H_0 standing for C_1.
fn h(k: usize) -> Label {
    if k == 0 {
        label(Kind::C, 1)
    } else {
        label(Kind::H, k)
    }
}

/// Line direction u with d2 = u^2 conj(d1), the reflection taking d1 to d2.
fn conjugation_line(d1: C, d2: C) -> C {
    (d2 / d1.conj()).sqrt()
}

/// Domain in which `label` is a finite vertex.
fn finite_domain(cfg: &Configuration, l: Label) -> Option<Domain> {
    let v = cfg.polygon_order().into_iter().find(|v| v.label == l)?;
    // Exponent -3 (and -1 at C) ends on a half-infinite edge in that domain.
    if v.a > v.b {
        Some(Domain::Gdh)
    } else {
        Some(Domain::GinvDh)
    }
}

/// Certificate that no reflexive pair exists, or `None` when m <= n.
pub fn check_obstruction(cfg: &Configuration) -> Option<ObstructionCertificate> {
    if !cfg.obstructed() {
        return None;
    }
    let (m, n) = (cfg.m, cfg.n);
    // Catenoid cycle P_{2m+1}C_2 -> H_1C_1: up in Gdh, right in G^-1dh.
    let line = LineStep {
        cycle: format!("P{}C2->H1C1", 2 * m + 1),
        gdh: Direction::Up,
        ginv: Direction::Right,
        line: conjugation_line(Direction::Up.unit(), Direction::Right.unit()),
    };
    // Start on the orthodisk whose central inner sheet carries P_{m+1}.
    let mut domain = finite_domain(cfg, label(Kind::P, m + 1))?;
    let mut chain = Vec::with_capacity(2 * (n + 1));
    for k in 0..=n {
        let (h1, h0) = (h(n + 1 - k), h(n - k));
        let (p0, p1) = (label(Kind::P, m - k), label(Kind::P, m - k + 1));
        let feet = (cfg.edge(h1, h0).ok()?, cfg.edge(p0, p1).ok()?);
        let cycle = format!("{h1}{h0}->{p0}{p1}");
        let reason = if k == 0 { Reason::Symmetry } else { Reason::Containment(p1.to_string()) };
        chain.push(ChainStep { cycle: cycle.clone(), feet, domain, direction: Direction::Up, reason });
        chain.push(ChainStep { cycle, feet, domain: domain.other(), direction: Direction::Right, reason: Reason::Conjugacy });
        domain = domain.other();
    }
    let terminal = format!("branch point P{} outside outer sheet of {}", m - n, domain.name());
    Some(ObstructionCertificate { cfg: *cfg, line, chain, terminal })
}

impl ObstructionCertificate {
    /// Structural checks: diagonal line, alternating domains, each
    /// conjugacy step reflecting its predecessor across the line.
    pub fn is_consistent(&self) -> bool {
        if !self.line.is_diagonal() || self.chain.len() != 2 * (self.cfg.n + 1) {
            return false;
        }
        let u2 = self.line.line * self.line.line;
        self.chain.chunks(2).enumerate().all(|(k, pair)| {
            let (a, b) = (&pair[0], &pair[1]);
            let reflected = u2 * a.direction.unit().conj();
            let linked = k == 0 || self.chain[2 * k - 1].domain == a.domain;
            a.cycle == b.cycle
                && b.domain == a.domain.other()
                && b.reason == Reason::Conjugacy
                && (reflected - b.direction.unit()).norm() < 1e-12
                && linked
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

impl fmt::Display for ObstructionCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} admits no reflexive pair", self.cfg)?;
        writeln!(
            f,
            "  line: {} points {:?} in {} and {:?} in {}, so the conjugation line is y=x",
            self.line.cycle, self.line.gdh, SIDE_GDH, self.line.ginv, SIDE_GINV
        )?;
        for (i, s) in self.chain.iter().enumerate() {
            let why = match &s.reason {
                Reason::Symmetry => "symmetry".to_string(),
                Reason::Containment(p) => format!("keeps {p} inside the outer sheet"),
                Reason::Conjugacy => "conjugacy".to_string(),
            };
            writeln!(f, "  {:>2}. {} {:?} in {} ({})", i + 1, s.cycle, s.direction, s.domain.name(), why)?;
        }
        write!(f, "  contradiction: {}", self.terminal)
    }
}

/// One randomized dual solve on an obstructed configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorroborationRun {
    pub seed: u64,
    /// Final period residual; infinite when the run failed outright.
    pub residual: f64,
    /// Smallest gap between consecutive finite prevertices at the end.
    pub min_gap: f64,
}

/// Dual solves from random symmetric polygons, one generator seed per run.
pub fn corroborate(cfg: &Configuration, seeds: std::ops::Range<u64>, opts: &DualOptions) -> Vec<CorroborationRun> {
    use rand::{Rng, SeedableRng};
    use rayon::prelude::*;
    seeds
        .into_par_iter()
        .map(|seed| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x0: Vec<f64> = (0..cfg.dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            match minimize_period_residual(cfg, &x0, opts) {
                Ok(r) => {
                    let t = &r.polygon.prevertices;
                    let min_gap = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
                    CorroborationRun { seed, residual: r.conjugacy_residual, min_gap }
                }
                Err(_) => CorroborationRun { seed, residual: f64::INFINITY, min_gap: f64::NAN },
            }
        })
        .collect()
}
