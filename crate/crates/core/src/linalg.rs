//! Small dense complex helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub(crate) const EPS: f64 = f64::EPSILON;

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ⟨a|b⟩, conjugate-linear in the first argument.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ⟨a|M|b⟩.
pub fn sandwich(a: &[C64], m: &CMat, b: &[C64]) -> C64 {
    let n = m.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        let mut row = C64::new(0.0, 0.0);
        for j in 0..n {
            let mij = m[(i, j)];
            if mij.re != 0.0 || mij.im != 0.0 {
                row += mij * b[j];
            }
        }
        acc += a[i].conj() * row;
    }
    acc
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Index of the entry chosen for phase fixing: the largest magnitude, with
/// near-ties (relative 1e-10) resolved towards the lowest row.
pub fn phase_anchor(col: &[C64]) -> usize {
    let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let cut = max * (1.0 - 1e-10);
    col.iter().position(|z| z.norm() >= cut).unwrap_or(0)
}

/// Rotates `col` so that its anchor entry is real and positive.
pub fn fix_phase(col: &mut [C64]) {
    let k = phase_anchor(col);
    let a = col[k];
    let r = a.norm();
    if r == 0.0 {
        return;
    }
    let phase = a.conj() / r;
    for z in col.iter_mut() {
        *z *= phase;
    }
    col[k] = C64::new(col[k].norm(), 0.0);
}

pub fn column(m: &CMat, j: usize) -> Vec<C64> {
    m.column(j).iter().copied().collect()
}

pub fn set_column(m: &mut CMat, j: usize, v: &[C64]) {
    for (i, z) in v.iter().enumerate() {
        m[(i, j)] = *z;
    }
}

pub fn normalize(v: &mut [C64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
    n
}

/// Removes from `v` its components along each (unit) vector in `basis`.
pub fn project_out(v: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = inner(b, v);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
}

pub fn sigma_min(v: &CMat) -> f64 {
    v.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Solves (A − shift·I) x = b, nudging the shift off an exact singularity.
pub fn shifted_solve(a: &CMat, shift: C64, b: &CVec, scale: f64) -> CVec {
    let n = a.nrows();
    let mut nudge = 0.0;
    for _ in 0..8 {
        let s = shift + C64::new(nudge, 0.0);
        let m = a - CMat::identity(n, n) * s;
        if let Some(x) = m.lu().solve(b) {
            if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return x;
            }
        }
        nudge = if nudge == 0.0 { EPS * scale.max(f64::MIN_POSITIVE) } else { nudge * 16.0 };
    }
    b.clone()
}

pub fn residual(a: &CMat, e: C64, v: &[C64]) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        let mut r = -e * v[i];
        for j in 0..n {
            r += a[(i, j)] * v[j];
        }
        acc += r.norm_sqr();
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_fix_makes_anchor_real_positive() {
        let mut v = vec![C64::new(0.1, 0.2), C64::new(0.0, -0.9), C64::new(0.3, 0.0)];
        fix_phase(&mut v);
        assert_eq!(v[1].im, 0.0);
        assert!(v[1].re > 0.0);
    }

    #[test]
    fn phase_tie_prefers_lowest_row() {
        let s = 0.5f64.sqrt();
        let mut v = vec![C64::new(0.0, s), C64::new(-s, 0.0)];
        fix_phase(&mut v);
        assert!((v[0] - C64::new(s, 0.0)).norm() < 1e-15);
        assert!((v[1] - C64::new(0.0, s)).norm() < 1e-15);
    }

    #[test]
    fn sandwich_matches_explicit_product() {
        let m = CMat::from_row_slice(2, 2, &[
            C64::new(1.0, 0.0), C64::new(0.0, 2.0),
            C64::new(3.0, 0.0), C64::new(4.0, -1.0),
        ]);
        let a = [C64::new(1.0, 1.0), C64::new(0.0, 1.0)];
        let b = [C64::new(2.0, 0.0), C64::new(1.0, -1.0)];
        let mb = &m * CVec::from_column_slice(&b);
        let expected = inner(&a, mb.as_slice());
        assert!((sandwich(&a, &m, &b) - expected).norm() < 1e-14);
    }
}
