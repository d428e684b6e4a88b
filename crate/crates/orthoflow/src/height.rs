//! Height function: per-cycle mismatch of extremal lengths between the two
//! orthodisks sharing a set of geometric coordinates.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::config::{build_cycle_system, validate_coordinates, Configuration, CycleSystem, GeometricCoordinates};
use crate::error::{Error, Result};
use crate::polygon::{cycle_extremal_length_with, Cycle, ExtOptions};
use crate::scmap::integrate::Integrator;
use crate::scmap::param::{normalized_offsets, solve_from, ParamOptions, ParamSolution};

pub const SIDE_GDH: &str = "Gdh";
pub const SIDE_GINV: &str = "G^-1dh";

/// |e^{1/e1} - e^{1/e2}|^2 + |e^{e1} - e^{e2}|^2.
pub fn height_of_cycle(e1: f64, e2: f64) -> Result<f64> {
    let [a, b] = cycle_terms(e1, e2)?;
    Ok(a * a + b * b)
}

/// The two signed differences whose squares make up the cycle height.
pub fn cycle_terms(e1: f64, e2: f64) -> Result<[f64; 2]> {
    if !(e1 > 0.0 && e2 > 0.0) || !e1.is_finite() || !e2.is_finite() {
        return Err(Error::Domain(format!("extremal lengths must be positive, got {e1} and {e2}")));
    }
    Ok([(1.0 / e1).exp() - (1.0 / e2).exp(), e1.exp() - e2.exp()])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleHeight {
    pub tag: String,
    pub ext_gdh: f64,
    pub ext_ginv: f64,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightReport {
    pub cycles: Vec<CycleHeight>,
    pub total: f64,
    pub worst: Option<String>,
}

impl HeightReport {
    fn from_cycles(cycles: Vec<CycleHeight>) -> Self {
        let total = cycles.iter().map(|c| c.height).sum();
        let worst = cycles
            .iter()
            .max_by(|a, b| a.height.total_cmp(&b.height))
            .map(|c| c.tag.clone());
        Self { cycles, total, worst }
    }
}

/// Parameter-problem solutions of both orthodisks for one set of coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairSolution {
    pub gc: Vec<f64>,
    pub gdh: ParamSolution,
    pub ginv: ParamSolution,
}

#[derive(Clone, Debug)]
struct Seed {
    gc: Vec<f64>,
    x: Vec<f64>,
}

/// Evaluates heights for one configuration, caching parameter-problem
/// solutions at committed points for warm starts.
pub struct HeightEvaluator {
    pub cfg: Configuration,
    pub cycles: CycleSystem,
    pub opts: ParamOptions,
    pub ext: ExtOptions,
    natural: [Option<Seed>; 2],
    cache: Mutex<Vec<PairSolution>>,
    pending: Mutex<Vec<PairSolution>>,
}

const CACHE_LIMIT: usize = 256;
const PENDING_LIMIT: usize = 64;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl HeightEvaluator {
    pub fn new(cfg: Configuration) -> Result<Self> {
        Self::with_cycles(cfg, build_cycle_system(&cfg)?)
    }

    pub fn with_cycles(cfg: Configuration, cycles: CycleSystem) -> Result<Self> {
        let opts = ParamOptions::default();
        let integ = Integrator::with_order(opts.order);
        let x0 = vec![0.0; cfg.dim()];
        let poly = cfg.polygon(&x0)?;
        let (s1, s2) = cfg.specs(&poly)?;
        let seed = |spec| -> Option<Seed> {
            let (q, _) = normalized_offsets(spec, &cfg.outer_edges(), &integ).ok()?;
            let gc = GeometricCoordinates::from_offsets(cfg, &q).ok()?;
            Some(Seed { gc: gc.values, x: x0.clone() })
        };
        let natural = [seed(&s1), seed(&s2)];
        Ok(Self { cfg, cycles, opts, ext: ExtOptions::default(), natural, cache: Mutex::new(vec![]), pending: Mutex::new(vec![]) })
    }

    /// Replaces the fallback starting point of one side (0: Gdh, 1: G^-1dh)
    /// by a polygon with unknowns `x` whose coordinates on that side are `gc`.
    pub fn seed_natural(&mut self, side: usize, gc: &[f64], x: &[f64]) {
        self.natural[side] = Some(Seed { gc: gc.to_vec(), x: x.to_vec() });
    }

    fn exponents(&self, side: usize) -> Vec<i32> {
        if side == 0 {
            self.cfg.exponents_a()
        } else {
            self.cfg.exponents_b()
        }
    }

    fn start(&self, side: usize, gc: &[f64]) -> Option<Seed> {
        let cache = self.cache.lock().unwrap();
        let best = cache.iter().min_by(|a, b| dist2(&a.gc, gc).total_cmp(&dist2(&b.gc, gc)));
        if let Some(p) = best {
            let sol = if side == 0 { &p.gdh } else { &p.ginv };
            return Some(Seed { gc: p.gc.clone(), x: sol.x.clone() });
        }
        self.natural[side].clone()
    }

    /// Solves one side, first directly from the nearest known solution and
    /// then by homotopy in the coordinates with step halving.
    fn solve_side(&self, side: usize, gc: &GeometricCoordinates) -> Result<ParamSolution> {
        let exps = self.exponents(side);
        let gauge = self.cfg.gauge();
        let labels = self.cfg.labels();
        let target = gc.target();
        let seed = self.start(side, &gc.values);
        let x0 = seed.as_ref().map(|s| s.x.clone()).unwrap_or_else(|| vec![0.0; self.cfg.dim()]);
        let direct = solve_from(&exps, &gauge, &target, &labels, &x0, &self.opts);
        let Some(seed) = seed else {
            return direct;
        };
        let Err(first) = direct else {
            return direct;
        };
        let mut t: f64 = 0.0;
        let mut step = 0.25;
        let mut x = seed.x.clone();
        while t < 1.0 {
            if step < 1e-4 {
                return Err(first);
            }
            let t1 = (t + step).min(1.0);
            let mut tg = target.clone();
            tg.values = seed.gc.iter().zip(&gc.values).map(|(a, b)| a + t1 * (b - a)).collect();
            match solve_from(&exps, &gauge, &tg, &labels, &x, &self.opts) {
                Ok(sol) => {
                    if t1 >= 1.0 {
                        return Ok(sol);
                    }
                    x = sol.x;
                    t = t1;
                    step *= 1.5;
                }
                Err(_) => step *= 0.5,
            }
        }
        Err(first)
    }

    /// Both parameter problems, run concurrently.
    pub fn solve_pair(&self, gc: &GeometricCoordinates) -> Result<PairSolution> {
        if gc.cfg != self.cfg {
            return Err(Error::Config(format!("coordinates belong to {}, evaluator to {}", gc.cfg, self.cfg)));
        }
        let (a, b) = rayon::join(|| self.solve_side(0, gc), || self.solve_side(1, gc));
        let wrap = |side: &str, e: Error| Error::Side { side: side.into(), source: Box::new(e) };
        let pair = PairSolution { gc: gc.values.clone(), gdh: a.map_err(|e| wrap(SIDE_GDH, e))?, ginv: b.map_err(|e| wrap(SIDE_GINV, e))? };
        let mut pending = self.pending.lock().unwrap();
        if pending.len() >= PENDING_LIMIT {
            pending.remove(0);
        }
        pending.push(pair.clone());
        Ok(pair)
    }

    /// Adds the most recent solution at exactly `gc` to the warm-start cache.
    pub fn commit(&self, gc: &[f64]) {
        let found = {
            let pending = self.pending.lock().unwrap();
            pending.iter().rev().find(|p| p.gc == gc).cloned()
        };
        if let Some(p) = found {
            self.insert(p);
        }
    }

    pub fn insert(&self, pair: PairSolution) {
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= CACHE_LIMIT {
            cache.remove(0);
        }
        cache.push(pair);
        self.pending.lock().unwrap().clear();
    }

    fn ext_pair(&self, pair: &PairSolution, c: &Cycle) -> Result<(f64, f64)> {
        let e1 = cycle_extremal_length_with(&pair.gdh.spec.polygon, c, &self.ext)?;
        let e2 = cycle_extremal_length_with(&pair.ginv.spec.polygon, c, &self.ext)?;
        Ok((e1, e2))
    }

    pub fn report(&self, pair: &PairSolution) -> Result<HeightReport> {
        let mut out = Vec::with_capacity(self.cycles.len());
        for c in &self.cycles.cycles {
            let (e1, e2) = self.ext_pair(pair, c)?;
            out.push(CycleHeight { tag: c.name.clone(), ext_gdh: e1, ext_ginv: e2, height: height_of_cycle(e1, e2)? });
        }
        Ok(HeightReport::from_cycles(out))
    }

    /// Signed residuals whose squared norm is the total height.
    pub fn terms(&self, pair: &PairSolution) -> Result<Vec<f64>> {
        let mut r = Vec::with_capacity(2 * self.cycles.len());
        for c in &self.cycles.cycles {
            let (e1, e2) = self.ext_pair(pair, c)?;
            r.extend(cycle_terms(e1, e2)?);
        }
        Ok(r)
    }

    pub fn evaluate(&self, gc: &GeometricCoordinates) -> Result<HeightReport> {
        self.report(&self.solve_pair(gc)?)
    }

    /// Residual vector for admissible coordinates, `None` outside the domain
    /// or where a parameter problem fails.
    pub fn residuals(&self, values: &[f64]) -> Option<Vec<f64>> {
        let gc = GeometricCoordinates::new(self.cfg, values.to_vec()).ok()?;
        validate_coordinates(&gc).ok()?;
        let pair = self.solve_pair(&gc).ok()?;
        self.terms(&pair).ok()
    }
}

/// Height of admissible coordinates.
pub fn evaluate_height(gc: &GeometricCoordinates, cfg: &Configuration) -> Result<HeightReport> {
    if gc.cfg != *cfg {
        return Err(Error::Config(format!("coordinates belong to {}, not {cfg}", gc.cfg)));
    }
    if let Err(v) = validate_coordinates(gc) {
        let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        return Err(Error::Geometry(format!("inadmissible coordinates: {}", list.join(", "))));
    }
    HeightEvaluator::new(*cfg)?.evaluate(gc)
}
