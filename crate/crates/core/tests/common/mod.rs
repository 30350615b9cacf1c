//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use levelflow::{CMat, C64};

/// Normalized Hermite function of order n at x (physicists' convention).
pub fn hermite_function(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 0..n {
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * x * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// ⟨φ_a|q²|φ_b⟩ for −d²/dq² + k q² by trapezoidal quadrature.
pub fn q2_quadrature(k: f64, a: usize, b: usize) -> f64 {
    let alpha = k.sqrt();
    let s = alpha.sqrt();
    let half_width = 14.0 / s;
    let steps = 28_000;
    let dq = 2.0 * half_width / steps as f64;
    let mut acc = 0.0;
    for i in 0..=steps {
        let q = -half_width + i as f64 * dq;
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        acc += w * s * hermite_function(a, s * q) * hermite_function(b, s * q) * q * q;
    }
    acc * dq
}

/// Number of eigenvalues of the Hermitian matrix h below x, from the
/// inertia of h − x·I by Gaussian elimination with diagonal pivots.
pub fn count_below(h: &CMat, x: f64) -> usize {
    let n = h.nrows();
    let mut a = h.clone();
    for i in 0..n {
        a[(i, i)] -= C64::new(x, 0.0);
    }
    let mut negatives = 0;
    for k in 0..n {
        let mut p = a[(k, k)].re;
        if p == 0.0 {
            p = -1e-300;
        }
        if p < 0.0 {
            negatives += 1;
        }
        for i in (k + 1)..n {
            let f = a[(i, k)] / p;
            for j in (k + 1)..n {
                let t = a[(k, j)];
                a[(i, j)] -= f * t;
            }
        }
    }
    negatives
}

/// Eigenvalues of a Hermitian matrix by bisection on the inertia count.
pub fn bisection_eigenvalues(h: &CMat) -> Vec<f64> {
    let n = h.nrows();
    let bound: f64 = (0..n).map(|i| (0..n).map(|j| h[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max) + 1.0;
    (0..n)
        .map(|idx| {
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if count_below(h, mid) > idx {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

pub fn random_hermitian(rng: &mut impl rand::Rng, n: usize) -> CMat {
    let mut h = CMat::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = C64::new(rng.random_range(-1.0..1.0), 0.0);
        for j in (i + 1)..n {
            let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// The two eigenvalues ∓√(z² − 2z + 2) of the two-level Hermitian model.
pub fn two_level_energies(z: f64) -> [f64; 2] {
    let r = (z * z - 2.0 * z + 2.0).sqrt();
    [-r, r]
}

/// |⟨ψ_1|H′|ψ_2⟩| for the two-level Hermitian model.
pub fn two_level_element(z: f64) -> f64 {
    1.0 / ((z - 1.0).powi(2) + 1.0).sqrt()
}

/// Minimum of f over a dense uniform scan of [lo, hi].
pub fn dense_scan_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    (0..points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            (x, f(x))
        })
        .fold((lo, f64::INFINITY), |best, p| if p.1 < best.1 { p } else { best })
}
