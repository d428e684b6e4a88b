//! Gauss-Legendre and Gauss-Jacobi rules mapped to [0, 1], cached per
//! (order, exponent).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::{GaussJacobi, GaussLegendre};

pub const DEFAULT_ORDER: usize = 24;

/// Nodes and weights on [0, 1] for the weight s^beta (beta = 0 is Legendre).
#[derive(Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type Key = (usize, i64);

fn cache() -> &'static Mutex<HashMap<Key, Arc<Rule>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Rule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn key(order: usize, beta: f64) -> Key {
    (order, (beta * 1024.0).round() as i64)
}

/// Rule for the integral of s^beta g(s) over [0, 1].
pub fn rule(order: usize, beta: f64) -> Arc<Rule> {
    assert!(beta > -1.0, "Jacobi exponent must exceed -1");
    let k = key(order, beta);
    if let Some(r) = cache().lock().unwrap().get(&k) {
        return r.clone();
    }
    let deg = order.try_into().expect("order must be positive");
    let (nodes, weights): (Vec<f64>, Vec<f64>) = if beta == 0.0 {
        GaussLegendre::new(deg).iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).unzip()
    } else {
        let q = GaussJacobi::new(deg, 0.0.try_into().unwrap(), beta.try_into().unwrap());
        // (1+x)^beta dx on [-1,1] equals 2^(beta+1) s^beta ds on [0,1].
        let c = 0.5f64.powf(beta + 1.0);
        q.iter().map(|(x, w)| (0.5 * (x + 1.0), c * w)).unzip()
    };
    let r = Arc::new(Rule { nodes, weights });
    cache().lock().unwrap().insert(k, r.clone());
    r
}
