//! Dense eigendecomposition with deterministic eigenvector phases.
//!
//! Hermitian matrices go through cyclic complex Jacobi rotations. General
//! matrices (dim ≤ 12) are solved from their characteristic polynomial:
//! Faddeev–LeVerrier coefficients, Aberth roots, Rayleigh-quotient polish and
//! inverse iteration for the eigenvectors.

use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;
use serde::Serialize;

use crate::error::{LevelflowError, Result};
use crate::linalg::{self, CMat, CVec, C64, EPS};
use crate::poly;
use crate::settings::Settings;

pub const GENERAL_MAX_DIM: usize = 12;

/// Eigenvalues and phase-fixed eigenvectors at one parameter value.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub lambda: C64,
    pub eigenvalues: Vec<C64>,
    /// Column j pairs with `eigenvalues[j]`.
    #[serde(skip)]
    pub eigenvectors: CMat,
    pub hermitian: bool,
    /// True when the eigenvector matrix is numerically rank deficient.
    pub defective: bool,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn with_lambda(mut self, lambda: C64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn vector(&self, j: usize) -> Vec<C64> {
        linalg::column(&self.eigenvectors, j)
    }

    pub fn energy(&self, j: usize) -> f64 {
        self.eigenvalues[j].re
    }

    pub(crate) fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.dim() {
            Err(LevelflowError::IndexOutOfRange { index: j, dim: self.dim() })
        } else {
            Ok(())
        }
    }

    /// max_j ‖H v_j − E_j v_j‖.
    pub fn max_residual(&self, h: &CMat) -> f64 {
        (0..self.dim())
            .map(|j| linalg::residual(h, self.eigenvalues[j], &self.vector(j)))
            .fold(0.0, f64::max)
    }

    /// Smallest singular value of the eigenvector matrix.
    pub fn sigma_min(&self) -> f64 {
        linalg::sigma_min(&self.eigenvectors)
    }

    /// Re-applies phase fixing to every column.
    pub fn fix_phases(&mut self) {
        let n = self.dim();
        for j in 0..n {
            let mut v = self.vector(j);
            linalg::fix_phase(&mut v);
            linalg::set_column(&mut self.eigenvectors, j, &v);
        }
    }
}

fn finish_phases(vectors: &mut CMat, settings: &Settings) {
    if let Some(seed) = settings.phase_scramble {
        let mut rng = StdRng::seed_from_u64(seed);
        for j in 0..vectors.ncols() {
            let phase = C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
            for i in 0..vectors.nrows() {
                vectors[(i, j)] *= phase;
            }
        }
    }
    for j in 0..vectors.ncols() {
        let mut v = linalg::column(vectors, j);
        linalg::fix_phase(&mut v);
        linalg::set_column(vectors, j, &v);
    }
}

/// Groups sorted eigenvalues into runs whose neighbours are closer than `tol`.
pub(crate) fn clusters(values: &[C64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || (values[i] - values[i - 1]).norm() > tol {
            out.push(start..i);
            start = i;
        }
    }
    out
}

pub fn eig_hermitian(h: &CMat, settings: &Settings) -> Result<Spectrum> {
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return Err(LevelflowError::InvalidParameter(format!(
            "matrix must be square and non-empty, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let scale = linalg::frobenius(h);
    let defect = linalg::hermitian_defect(h);
    if defect > settings.hermitian_tol * scale {
        return Err(LevelflowError::ContractViolation(format!(
            "matrix is not Hermitian: ‖H − H†‖ = {defect:e}, ‖H‖ = {scale:e}"
        )));
    }

    let mut a = h.clone();
    // Symmetrize so the rotations see an exactly Hermitian matrix.
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    let mut v = CMat::identity(n, n);
    let mut converged = false;
    let mut last_off = 0.0;
    for sweep in 0..settings.max_jacobi_sweeps {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        last_off = off;
        if off == 0.0 || off <= 1e-18 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let hpq = a[(p, q)];
                let mag = hpq.norm();
                if mag == 0.0 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                if sweep > 3 && app.abs() + 100.0 * mag == app.abs() && aqq.abs() + 100.0 * mag == aqq.abs() {
                    a[(p, q)] = C64::new(0.0, 0.0);
                    a[(q, p)] = C64::new(0.0, 0.0);
                    continue;
                }
                jacobi_rotate(&mut a, &mut v, p, q, hpq, mag);
            }
        }
    }
    if !converged {
        return Err(LevelflowError::NumericalFailure {
            message: format!("Jacobi iteration did not converge in {} sweeps", settings.max_jacobi_sweeps),
            diagnostics: vec![format!("off-diagonal norm {last_off:e}"), format!("‖H‖ {scale:e}")],
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let eigenvalues: Vec<C64> = order.iter().map(|&i| C64::new(a[(i, i)].re, 0.0)).collect();
    let mut vectors = CMat::zeros(n, n);
    for (jnew, &jold) in order.iter().enumerate() {
        vectors.set_column(jnew, &v.column(jold));
    }

    // Re-orthonormalize inside degenerate clusters.
    for cl in clusters(&eigenvalues, settings.cluster_tol * scale.max(f64::MIN_POSITIVE)) {
        if cl.len() < 2 {
            continue;
        }
        let mut done: Vec<Vec<C64>> = Vec::new();
        for j in cl {
            let mut col = linalg::column(&vectors, j);
            linalg::project_out(&mut col, &done);
            linalg::normalize(&mut col);
            linalg::set_column(&mut vectors, j, &col);
            done.push(col);
        }
    }
    finish_phases(&mut vectors, settings);

    Ok(Spectrum { lambda: C64::new(0.0, 0.0), eigenvalues, eigenvectors: vectors, hermitian: true, defective: false })
}

/// One complex Jacobi rotation annihilating a[p][q].
fn jacobi_rotate(a: &mut CMat, v: &mut CMat, p: usize, q: usize, hpq: C64, mag: f64) {
    let n = a.nrows();
    let e = hpq / mag;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // G = diag(1, ē)·[[c, s], [−s, c]]
    let g_pp = C64::new(c, 0.0);
    let g_pq = C64::new(s, 0.0);
    let g_qp = -e.conj() * s;
    let g_qq = e.conj() * c;
    for i in 0..n {
        let ap = a[(i, p)];
        let aq = a[(i, q)];
        a[(i, p)] = ap * g_pp + aq * g_qp;
        a[(i, q)] = ap * g_pq + aq * g_qq;
    }
    for j in 0..n {
        let ap = a[(p, j)];
        let aq = a[(q, j)];
        a[(p, j)] = g_pp.conj() * ap + g_qp.conj() * aq;
        a[(q, j)] = g_pq.conj() * ap + g_qq.conj() * aq;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(app - t * mag, 0.0);
    a[(q, q)] = C64::new(aqq + t * mag, 0.0);
    for i in 0..n {
        let vp = v[(i, p)];
        let vq = v[(i, q)];
        v[(i, p)] = vp * g_pp + vq * g_qp;
        v[(i, q)] = vp * g_pq + vq * g_qq;
    }
}

/// Orders complex eigenvalues by real part, then imaginary part, treating
/// real parts within `tol` as equal.
pub(crate) fn sort_complex(values: &[C64], tol: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].re.total_cmp(&values[j].re));
    // Insertion pass for near-equal real parts.
    for k in 1..order.len() {
        let mut m = k;
        while m > 0 {
            let (a, b) = (values[order[m - 1]], values[order[m]]);
            if (a.re - b.re).abs() <= tol && a.im > b.im {
                order.swap(m - 1, m);
                m -= 1;
            } else {
                break;
            }
        }
    }
    order
}

fn start_vector(n: usize) -> Vec<C64> {
    let mut v: Vec<C64> =
        (0..n).map(|i| C64::new(1.0 + 0.37 * i as f64, 0.21 * ((i * 7) % 5) as f64)).collect();
    linalg::normalize(&mut v);
    v
}

fn inverse_iteration(a: &CMat, e: C64, scale: f64, against: &[Vec<C64>], steps: usize) -> Vec<C64> {
    let n = a.nrows();
    let mut v = start_vector(n);
    linalg::project_out(&mut v, against);
    if linalg::normalize(&mut v) < 1e-8 {
        v = (0..n).map(|i| C64::new(((i * 3 + 1) % 7) as f64 - 3.0, 1.0)).collect();
        linalg::project_out(&mut v, against);
        linalg::normalize(&mut v);
    }
    for _ in 0..steps {
        let x = linalg::shifted_solve(a, e, &CVec::from_column_slice(&v), scale);
        let mut next: Vec<C64> = x.iter().copied().collect();
        linalg::project_out(&mut next, against);
        if linalg::normalize(&mut next) == 0.0 {
            break;
        }
        v = next;
    }
    v
}

/// Eigenvalues are the roots of det(H − E·I); every column has unit norm.
pub fn eig_general(h: &CMat, settings: &Settings) -> Result<Spectrum> {
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return Err(LevelflowError::InvalidParameter(format!(
            "matrix must be square and non-empty, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if n > GENERAL_MAX_DIM {
        return Err(LevelflowError::UnsupportedSize { dim: n, limit: GENERAL_MAX_DIM });
    }
    if h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(LevelflowError::InvalidParameter("matrix has non-finite entries".into()));
    }
    let norm = linalg::frobenius(h);
    let mu: C64 = (0..n).map(|i| h[(i, i)]).sum::<C64>() / n as f64;
    let shifted = h - CMat::identity(n, n) * mu;
    let spread = linalg::frobenius(&shifted);

    let mut values: Vec<C64> = if spread <= EPS * norm.max(f64::MIN_POSITIVE) || spread == 0.0 {
        vec![mu; n]
    } else {
        let b = &shifted / C64::new(spread, 0.0);
        let coeffs = poly::faddeev_leverrier(&b);
        poly::aberth_roots(&coeffs).into_iter().map(|r| mu + r * spread).collect()
    };

    // Rayleigh-quotient polish of well-separated roots.
    let sep_floor = 1e-6 * spread.max(f64::MIN_POSITIVE);
    let snapshot = values.clone();
    for j in 0..n {
        let nearest = (0..n)
            .filter(|&k| k != j)
            .map(|k| (snapshot[j] - snapshot[k]).norm())
            .fold(f64::INFINITY, f64::min);
        if nearest <= sep_floor {
            continue;
        }
        let mut e = snapshot[j];
        let mut v = inverse_iteration(h, e, norm, &[], 2);
        for _ in 0..3 {
            let hv = h * CVec::from_column_slice(&v);
            let rq = linalg::inner(&v, hv.as_slice()) / linalg::inner(&v, &v);
            if (rq - snapshot[j]).norm() > 0.1 * nearest {
                break;
            }
            e = rq;
            let x = linalg::shifted_solve(h, e, &CVec::from_column_slice(&v), norm);
            v = x.iter().copied().collect();
            linalg::normalize(&mut v);
        }
        values[j] = e;
    }

    let order = sort_complex(&values, 1e-12 * norm.max(1.0));
    let values: Vec<C64> = order.iter().map(|&i| values[i]).collect();

    let mut vectors = CMat::zeros(n, n);
    let cluster_abs = settings.cluster_tol * norm.max(f64::MIN_POSITIVE);
    let resid_tol = settings.residual_tol * norm.max(f64::MIN_POSITIVE);
    let mut defective = false;
    for cl in clusters(&values, cluster_abs) {
        let mut done: Vec<Vec<C64>> = Vec::new();
        for j in cl {
            let mut v = inverse_iteration(h, values[j], norm, &done, 3);
            if linalg::residual(h, values[j], &v) > resid_tol {
                v = inverse_iteration(h, values[j], norm, &done, 8);
            }
            if !done.is_empty() && linalg::residual(h, values[j], &v) > resid_tol {
                // No further independent eigenvector in this cluster.
                v = inverse_iteration(h, values[j], norm, &[], 3);
                defective = true;
            }
            linalg::set_column(&mut vectors, j, &v);
            done.push(v);
        }
    }
    finish_phases(&mut vectors, settings);
    if linalg::sigma_min(&vectors) <= settings.defective_tol {
        defective = true;
    }
    Ok(Spectrum { lambda: C64::new(0.0, 0.0), eigenvalues: values, eigenvectors: vectors, hermitian: false, defective })
}
