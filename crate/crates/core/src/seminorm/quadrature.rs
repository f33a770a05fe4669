//! Deterministic low-discrepancy nodes in the Euclidean unit ball.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::rng::seeded;

pub const DEFAULT_NODES: usize = 1 << 16;
pub const DEFAULT_SEED: u64 = 0x6b73;

/// Node count and seed of the shifted Halton rule used by `size_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Quadrature {
    pub nodes: usize,
    pub seed: u64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            nodes: DEFAULT_NODES,
            seed: DEFAULT_SEED,
        }
    }
}

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

type Key = (usize, usize, u64);

fn cache() -> &'static Mutex<HashMap<Key, Arc<Vec<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Vec<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// `count` points of the unit ball in `R^d`, row-major. Radii use the
/// inverse radial CDF `u^{1/d}`; directions come from the remaining Halton
/// coordinates (an angle in 2-d, an equal-area map in 3-d, normalized
/// Gaussians above).
pub fn ball_nodes(d: usize, quad: Quadrature) -> Arc<Vec<f64>> {
    assert!(d >= 1 && d < PRIMES.len(), "unsupported quadrature dimension {d}");
    let key = (d, quad.nodes, quad.seed);
    if let Some(hit) = cache().lock().expect("quadrature cache").get(&key) {
        return hit.clone();
    }
    let nodes = Arc::new(generate(d, quad));
    cache()
        .lock()
        .expect("quadrature cache")
        .insert(key, nodes.clone());
    nodes
}

/// Sums of `w wᵀ` (row-major `d × d`) over the first half of the nodes and
/// over all of them. `Σ wᵀQw` over the rule is `⟨Q, M⟩`.
pub fn node_moments(d: usize, quad: Quadrature) -> Arc<[Vec<f64>; 2]> {
    type Moments = HashMap<Key, Arc<[Vec<f64>; 2]>>;
    static MOMENTS: OnceLock<Mutex<Moments>> = OnceLock::new();
    let key = (d, quad.nodes, quad.seed);
    let map = MOMENTS.get_or_init(Default::default);
    if let Some(hit) = map.lock().expect("moment cache").get(&key) {
        return hit.clone();
    }
    let nodes = ball_nodes(d, quad);
    let half = quad.nodes / 2;
    let mut first = vec![0.0; d * d];
    let mut total = vec![0.0; d * d];
    for (k, w) in nodes.chunks(d).enumerate() {
        for i in 0..d {
            for j in 0..d {
                total[i * d + j] += w[i] * w[j];
            }
        }
        if k + 1 == half {
            first.copy_from_slice(&total);
        }
    }
    let out = Arc::new([first, total]);
    map.lock().expect("moment cache").insert(key, out.clone());
    out
}

fn generate(d: usize, quad: Quadrature) -> Vec<f64> {
    let mut rng = seeded(quad.seed);
    // one radial coordinate plus the direction coordinates
    let dims = if d <= 3 { d } else { d + 1 };
    let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
    let normal = Normal::standard();
    let mut out = Vec::with_capacity(quad.nodes * d);
    let mut u = vec![0.0; dims];
    for i in 1..=quad.nodes as u64 {
        for k in 0..dims {
            u[k] = (radical_inverse(i, PRIMES[k]) + shift[k]).fract();
        }
        match d {
            1 => out.push(2.0 * u[0] - 1.0),
            2 => {
                let r = u[0].sqrt();
                let t = TAU * u[1];
                out.extend([r * t.cos(), r * t.sin()]);
            }
            3 => {
                let r = u[0].cbrt();
                let z = 2.0 * u[1] - 1.0;
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let t = TAU * u[2];
                out.extend([r * rho * t.cos(), r * rho * t.sin(), r * z]);
            }
            _ => {
                let r = u[0].powf(1.0 / d as f64);
                let g: Vec<f64> = (1..=d)
                    .map(|k| normal.inverse_cdf(u[k].clamp(1e-16, 1.0 - 1e-16)))
                    .collect();
                let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                out.extend(g.iter().map(|x| r * x / norm));
            }
        }
    }
    out
}
