//! Characteristic polynomials and simultaneous polynomial root refinement.

use crate::linalg::{CMat, C64, EPS};

/// Coefficients of det(xI − A), lowest degree first, leading coefficient 1.
///
/// Faddeev–LeVerrier recursion: M_k = A·M_{k−1} + c_{n−k+1}·I and
/// c_{n−k} = −tr(A·M_k)/k.
pub fn faddeev_leverrier(a: &CMat) -> Vec<C64> {
    let n = a.nrows();
    let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
    coeffs[n] = C64::new(1.0, 0.0);
    let mut m = CMat::zeros(n, n);
    for k in 1..=n {
        let mut next = a * &m;
        for i in 0..n {
            next[(i, i)] += coeffs[n - k + 1];
        }
        let am = a * &next;
        let trace: C64 = (0..n).map(|i| am[(i, i)]).sum();
        coeffs[n - k] = -trace / k as f64;
        m = next;
    }
    coeffs
}

/// p(z) and p′(z) by Horner's rule.
pub fn eval_with_derivative(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All roots of a monic polynomial by Aberth–Ehrlich iteration.
pub fn aberth_roots(coeffs: &[C64]) -> Vec<C64> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = coeffs[n];
    let monic: Vec<C64> = coeffs.iter().map(|c| c / lead).collect();
    if n == 1 {
        return vec![-monic[0]];
    }
    let center = -monic[n - 1] / n as f64;
    // Radius from the coefficient bound max_k |a_{n−k}|^{1/k}.
    let mut radius: f64 = (1..=n)
        .map(|k| monic[n - k].norm().powf(1.0 / k as f64))
        .fold(0.0, f64::max);
    if radius == 0.0 {
        radius = 1.0;
    }
    let mut roots: Vec<C64> = (0..n)
        .map(|j| {
            let angle = std::f64::consts::TAU * j as f64 / n as f64 + 0.4;
            center + C64::from_polar(0.5 * radius, angle)
        })
        .collect();
    let floor = radius.max(center.norm()).max(f64::MIN_POSITIVE);

    for _ in 0..800 {
        let mut biggest: f64 = 0.0;
        for j in 0..n {
            let (p, dp) = eval_with_derivative(&monic, roots[j]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: C64 = (0..n)
                .filter(|&k| k != j)
                .map(|k| {
                    let d = roots[j] - roots[k];
                    if d.norm() == 0.0 {
                        C64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let denom = C64::new(1.0, 0.0) - ratio * repulsion;
            let step = if dp.norm() == 0.0 || !ratio.re.is_finite() || denom.norm() == 0.0 {
                // Stationary point of p: kick sideways.
                C64::new(0.0, 1e-3 * floor)
            } else {
                ratio / denom
            };
            roots[j] -= step;
            biggest = biggest.max(step.norm() / roots[j].norm().max(floor * 1e-3));
        }
        if biggest <= 4.0 * EPS {
            break;
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn charpoly_of_two_by_two() {
        // [[1,2],[3,4]]: x² − 5x − 2
        let a = CMat::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(4.0)]);
        let p = faddeev_leverrier(&a);
        assert!((p[2] - c(1.0)).norm() < 1e-15);
        assert!((p[1] - c(-5.0)).norm() < 1e-14);
        assert!((p[0] - c(-2.0)).norm() < 1e-14);
    }

    #[test]
    fn aberth_finds_known_roots() {
        // (x−1)(x+2)(x−3i) expanded
        let roots = [c(1.0), c(-2.0), C64::new(0.0, 3.0)];
        let mut coeffs = vec![c(1.0)];
        for r in roots {
            let mut next = vec![c(0.0); coeffs.len() + 1];
            for (k, a) in coeffs.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            coeffs = next;
        }
        let found = aberth_roots(&coeffs);
        for r in roots {
            let best = found.iter().map(|z| (z - r).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-12, "root {r} missing, closest {best}");
        }
    }

    #[test]
    fn double_root_collapses() {
        let found = aberth_roots(&[c(0.0), c(0.0), c(1.0)]);
        assert!(found.iter().all(|z| z.norm() < 1e-12));
    }
}
