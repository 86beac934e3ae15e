//! Brute-force reference for prototype fitting and nearest-prototype
//! prediction: direct loops over pixels and classes, no shared code with the
//! streaming implementation.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One random problem: a `width x height` map over `num_classes` classes as
/// pixel-major probability vectors, plus query vectors.
#[derive(Debug, Clone)]
pub struct Instance {
    pub num_classes: usize,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Vec<f64>>,
    pub queries: Vec<Vec<f64>>,
}

impl Instance {
    pub fn flat(&self) -> Vec<f64> {
        self.pixels.concat()
    }
}

fn random_distribution(rng: &mut ChaCha8Rng, c: usize) -> Vec<f64> {
    match rng.random_range(0..10) {
        // one-hot
        0 => {
            let mut p = vec![0.0; c];
            p[rng.random_range(0..c)] = 1.0;
            p
        }
        // peaked: a dominant class plus noise
        1..=4 => {
            let hot = rng.random_range(0..c);
            let mut p: Vec<f64> = (0..c).map(|_| rng.random::<f64>()).collect();
            p[hot] += c as f64 * rng.random::<f64>();
            let s: f64 = p.iter().sum();
            p.iter().map(|v| v / s).collect()
        }
        _ => {
            let p: Vec<f64> = (0..c).map(|_| rng.random::<f64>() + 1e-3).collect();
            let s: f64 = p.iter().sum();
            p.iter().map(|v| v / s).collect()
        }
    }
}

/// Seeded instance with `C <= 6` and at most 10x10 pixels.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_classes = rng.random_range(1..=6);
    let width = rng.random_range(1..=10);
    let height = rng.random_range(1..=10);
    let pixels = (0..width * height)
        .map(|_| random_distribution(&mut rng, num_classes))
        .collect();
    let queries = (0..20)
        .map(|_| random_distribution(&mut rng, num_classes))
        .collect();
    Instance {
        num_classes,
        width,
        height,
        pixels,
        queries,
    }
}

fn normalized(p: &[f64]) -> Vec<f64> {
    let mut s = 0.0;
    for v in p {
        s += v;
    }
    p.iter().map(|v| v / s).collect()
}

/// `1[c is the first class attaining max(p)] * p_c`.
pub fn indicator_weight(p: &[f64], c: usize) -> f64 {
    let max = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = p.iter().position(|&v| v == max).unwrap();
    if first == c {
        p[c]
    } else {
        0.0
    }
}

/// Prototype matrix (row per class) and observed flags by the direct formula
/// `mu_c = sum_pixels(m_c * p) / sum_pixels(m_c)`, one-hot when the denominator is 0.
pub fn prototypes(pixels: &[Vec<f64>], num_classes: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rows = Vec::new();
    let mut observed = Vec::new();
    for c in 0..num_classes {
        let mut numerator = vec![0.0; num_classes];
        let mut denominator = 0.0;
        for raw in pixels {
            let p = normalized(raw);
            let m = indicator_weight(&p, c);
            for j in 0..num_classes {
                numerator[j] += m * p[j];
            }
            denominator += m;
        }
        if denominator > 0.0 {
            rows.push(numerator.iter().map(|v| v / denominator).collect());
            observed.push(true);
        } else {
            let mut e = vec![0.0; num_classes];
            e[c] = 1.0;
            rows.push(e);
            observed.push(false);
        }
    }
    (rows, observed)
}

/// Squared Euclidean distance.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut d = 0.0;
    for j in 0..a.len() {
        d += (a[j] - b[j]) * (a[j] - b[j]);
    }
    d
}

/// Lowest index among the prototypes at minimum squared distance.
pub fn nearest(p: &[f64], rows: &[Vec<f64>]) -> usize {
    let mut best = 0;
    for c in 1..rows.len() {
        if sq_dist(p, &rows[c]) < sq_dist(p, &rows[best]) {
            best = c;
        }
    }
    best
}

/// Lowest index attaining the maximum.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for c in 1..p.len() {
        if p[c] > p[best] {
            best = c;
        }
    }
    best
}
