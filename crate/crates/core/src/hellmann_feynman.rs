//! Matrix elements of H′ and finite-difference checks of the Hellmann-Feynman
//! identities.

use serde::Serialize;

use crate::eig::Spectrum;
use crate::error::{LevelflowError, Result};
use crate::linalg::{self, C64};
use crate::matrix_model::MatrixFamily;
use crate::minimize;
use crate::settings::Settings;
use crate::spectral_flow::{self, FlowResult};
use crate::tracking;

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub lambda: f64,
    pub pair: (usize, usize),
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
    pub fd_step: f64,
}

/// ⟨ψ_m|ψ_n⟩.
pub fn overlap(spec: &Spectrum, m: usize, n: usize) -> Result<C64> {
    spec.check_index(m)?;
    spec.check_index(n)?;
    Ok(linalg::inner(&spec.vector(m), &spec.vector(n)))
}

/// ⟨ψ_m|H′(λ)|ψ_n⟩ at the parameter value the spectrum was computed at.
pub fn hf_element(family: &MatrixFamily, spec: &Spectrum, m: usize, n: usize) -> Result<C64> {
    spec.check_index(m)?;
    spec.check_index(n)?;
    let dh = family.evaluate_derivative(spec.lambda)?;
    Ok(linalg::sandwich(&spec.vector(m), &dh, &spec.vector(n)))
}

fn require_hermitian(family: &MatrixFamily) -> Result<()> {
    if family.hermitian_on_real_axis() {
        Ok(())
    } else {
        Err(LevelflowError::ContractViolation(format!(
            "identity checks are defined for Hermitian families only; {} is not",
            family.label()
        )))
    }
}

fn check_step(h: f64) -> Result<f64> {
    if h.is_finite() && h > 0.0 {
        Ok(h)
    } else {
        Err(LevelflowError::InvalidParameter(format!("finite-difference step must be positive, got {h}")))
    }
}

/// Spectrum at λ whose columns are matched to `reference` and gauge aligned
/// with it. Column b corresponds to reference vector b.
fn aligned_spectrum(family: &MatrixFamily, lambda: f64, reference: &Spectrum, settings: &Settings) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let refs: Vec<Vec<C64>> = (0..reference.dim()).map(|j| reference.vector(j)).collect();
    let ref_e: Vec<f64> = reference.eigenvalues.iter().map(|e| e.re).collect();
    let mut s = family.spectrum_real(lambda, settings)?;
    let perm = tracking::match_columns(&refs, Some(&ref_e), &mut s, settings);
    let mut energies = Vec::with_capacity(perm.len());
    let mut vectors = Vec::with_capacity(perm.len());
    for (b, &j) in perm.iter().enumerate() {
        let mut v = s.vector(j);
        tracking::align_phase(&refs[b], &mut v);
        energies.push(s.eigenvalues[j].re);
        vectors.push(v);
    }
    Ok((energies, vectors))
}

/// Checks ⟨ψ_m|H′|ψ_n⟩ = E′_n⟨ψ_m|ψ_n⟩ + (E_n − E_m)⟨ψ_m|ψ′_n⟩ with E′_n and
/// ψ′_n from the fourth-order central stencil at λ ± h, λ ± 2h. Indices are
/// sorted positions at λ.
pub fn hf_offdiag_residual(
    family: &MatrixFamily,
    lambda: f64,
    m: usize,
    n: usize,
    fd_step: Option<f64>,
    settings: &Settings,
) -> Result<IdentityReport> {
    require_hermitian(family)?;
    let h = check_step(fd_step.unwrap_or_else(|| settings.identity_step(lambda)))?;
    let center = family.spectrum_real(lambda, settings)?;
    center.check_index(m)?;
    center.check_index(n)?;
    if m == n {
        return Err(LevelflowError::InvalidParameter("the off-diagonal identity needs m ≠ n".into()));
    }
    let dh = family.derivative_real(lambda)?;
    let gap = (center.energy(n) - center.energy(m)).abs();
    let bound = 10.0 * h * linalg::frobenius(&dh);
    if gap <= bound {
        return Err(LevelflowError::Precondition(format!(
            "levels {m} and {n} are degenerate at λ = {lambda} (gap {gap:e} ≤ {bound:e}); use the limit states of a sweep"
        )));
    }
    // f′ ≈ (8(f₁ − f₋₁) − (f₂ − f₋₂)) / 12h
    let mut de_n = 0.0;
    let mut dpsi_n = vec![C64::new(0.0, 0.0); center.dim()];
    for (offset, weight) in [(1.0, 8.0), (-1.0, -8.0), (2.0, -1.0), (-2.0, 1.0)] {
        let (e, v) = aligned_spectrum(family, lambda + offset * h, &center, settings)?;
        let w = weight / (12.0 * h);
        de_n += w * e[n];
        for (d, x) in dpsi_n.iter_mut().zip(&v[n]) {
            *d += w * x;
        }
    }
    let psi_m = center.vector(m);
    let psi_n = center.vector(n);
    let lhs = linalg::sandwich(&psi_m, &dh, &psi_n);
    let rhs = de_n * linalg::inner(&psi_m, &psi_n)
        + (center.energy(n) - center.energy(m)) * linalg::inner(&psi_m, &dpsi_n);
    Ok(IdentityReport { lambda, pair: (m, n), lhs, rhs, residual: (lhs - rhs).norm(), fd_step: h })
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeEstimate {
    pub order: usize,
    pub value: C64,
    /// Rounding-noise estimate of the stencil.
    pub noise: f64,
    pub step: f64,
}

pub const MAX_PRODUCT_ORDER: usize = 4;

fn binomial(k: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// d^k/dλ^k of Δ(λ)S(λ) = (E_n − E_m)⟨ψ_m|ψ_n⟩ at λ₀ for k = 0..=order+1.
/// Indices refer to the limit spectrum at λ₀ reached from below.
pub fn product_identity_check(
    family: &MatrixFamily,
    lambda0: f64,
    m: usize,
    n: usize,
    order: usize,
    fd_step: Option<f64>,
    settings: &Settings,
) -> Result<Vec<DerivativeEstimate>> {
    require_hermitian(family)?;
    if order > MAX_PRODUCT_ORDER {
        return Err(LevelflowError::InvalidParameter(format!(
            "derivative order {order} exceeds {MAX_PRODUCT_ORDER}; stencils are too noisy beyond it"
        )));
    }
    let h1 = check_step(fd_step.unwrap_or_else(|| settings.fd_step(lambda0)))?;
    let center = tracking::limit_spectrum(family, lambda0, h1, settings)?;
    center.check_index(m)?;
    center.check_index(n)?;
    let product = |x: f64| -> Result<C64> {
        if x == lambda0 {
            let d = center.energy(n) - center.energy(m);
            return Ok(d * linalg::inner(&center.vector(m), &center.vector(n)));
        }
        let (e, v) = aligned_spectrum(family, x, &center, settings)?;
        Ok((e[n] - e[m]) * linalg::inner(&v[m], &v[n]))
    };
    let mut out = Vec::with_capacity(order + 2);
    for k in 0..=order + 1 {
        if k == 0 {
            let value = product(lambda0)?;
            out.push(DerivativeEstimate { order: 0, value, noise: f64::EPSILON * value.norm(), step: 0.0 });
            continue;
        }
        let h = h1 * 10f64.powi(k as i32 - 1);
        let mut acc = C64::new(0.0, 0.0);
        let mut max_p: f64 = 0.0;
        for j in 0..=k {
            let x = lambda0 + (k as f64 / 2.0 - j as f64) * h;
            let p = product(x)?;
            max_p = max_p.max(p.norm());
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binomial(k, j) * p;
        }
        let scale = h.powi(k as i32);
        out.push(DerivativeEstimate {
            order: k,
            value: acc / scale,
            noise: f64::EPSILON * 2f64.powi(k as i32) * max_p.max(f64::MIN_POSITIVE) / scale,
            step: h,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagonalHfReport {
    pub lambda: f64,
    pub branch: usize,
    /// ⟨ψ|H′|ψ⟩.
    pub hf_slope: f64,
    /// (step, |⟨ψ|H′|ψ⟩ − central difference|).
    pub errors: Vec<(f64, f64)>,
    /// Least-squares slope of log error against log step.
    pub fitted_order: f64,
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Compares the diagonal element ⟨ψ_b|H′|ψ_b⟩ with central differences of
/// the tracked eigenvalue over a ladder of steps.
pub fn diagonal_hf_convergence(
    family: &MatrixFamily,
    lambda: f64,
    branch: usize,
    steps: &[f64],
    settings: &Settings,
) -> Result<DiagonalHfReport> {
    require_hermitian(family)?;
    if steps.len() < 2 {
        return Err(LevelflowError::InvalidParameter("need at least two steps for an order fit".into()));
    }
    let center = family.spectrum_real(lambda, settings)?;
    center.check_index(branch)?;
    let dh = family.derivative_real(lambda)?;
    let psi = center.vector(branch);
    let hf_slope = linalg::sandwich(&psi, &dh, &psi).re;
    let mut errors = Vec::with_capacity(steps.len());
    for &h in steps {
        let h = check_step(h)?;
        let (ep, _) = aligned_spectrum(family, lambda + h, &center, settings)?;
        let (em, _) = aligned_spectrum(family, lambda - h, &center, settings)?;
        let fd = (ep[branch] - em[branch]) / (2.0 * h);
        errors.push((h, (hf_slope - fd).abs()));
    }
    let fitted_order = loglog_slope(&errors);
    Ok(DiagonalHfReport { lambda, branch, hf_slope, errors, fitted_order })
}

/// |⟨ψ_a|H′|ψ_b⟩| for two tracked branches at every grid point of a sweep.
pub fn element_along_flow(flow: &FlowResult, family: &MatrixFamily, a: usize, b: usize) -> Result<Vec<f64>> {
    let n = flow.dim();
    for idx in [a, b] {
        if idx >= n {
            return Err(LevelflowError::IndexOutOfRange { index: idx, dim: n });
        }
    }
    flow.grid
        .iter()
        .enumerate()
        .map(|(i, &lam)| {
            let dh = family.derivative_real(lam)?;
            Ok(linalg::sandwich(&flow.branch_vector(i, a), &dh, &flow.branch_vector(i, b)).norm())
        })
        .collect()
}

/// Location and value of the largest |⟨ψ_a|H′|ψ_b⟩| between two tracked
/// branches of a sweep.
pub fn element_maximum(flow: &FlowResult, family: &MatrixFamily, a: usize, b: usize, settings: &Settings) -> Result<(f64, f64)> {
    let values = element_along_flow(flow, family, a, b)?;
    let (imax, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    let last = flow.grid.len() - 1;
    let element = |lam: f64| -> Result<f64> {
        let p = spectral_flow::pair_at(family, flow, a, b, lam, settings)?;
        let dh = family.derivative_real(lam)?;
        Ok(linalg::sandwich(&p.va, &dh, &p.vb).norm())
    };
    if imax == 0 || imax == last {
        return Ok((flow.grid[imax], values[imax]));
    }
    let (lo, hi) = (flow.grid[imax - 1], flow.grid[imax + 1]);
    let golden = minimize::golden_section(|x| element(x).map(|v| -v), lo, hi, |x| 1e-5 * (1.0 + x.abs()))?;
    // Parabolic steps on well separated samples; the value is flat to
    // rounding within about 1e-8 of the maximum, so direct comparison cannot
    // resolve the location further.
    let mut x = golden.x;
    for _ in 0..8 {
        let d = 1e-3 * (1.0 + x.abs());
        let pts = [(x - d, -element(x - d)?), (x, -element(x)?), (x + d, -element(x + d)?)];
        match minimize::parabolic_vertex(pts) {
            Some(v) if (v - x).abs() <= d && v > lo && v < hi => {
                let done = (v - x).abs() <= 1e-14 * (1.0 + x.abs());
                x = v;
                if done {
                    break;
                }
            }
            _ => break,
        }
    }
    Ok((x, element(x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMat;

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(3, 3), 1.0);
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1e-1, 1e-2, 1e-3].iter().map(|&h: &f64| (h, 3.0 * h * h)).collect();
        assert!((loglog_slope(&pts) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_family_has_trivial_identity() {
        // diag(λ, 2λ)
        let d = |a: f64, b: f64| CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(a, 0.0), C64::new(b, 0.0)]));
        let f = MatrixFamily::polynomial(vec![d(0.0, 0.0), d(1.0, 2.0)], true).unwrap();
        let st = Settings::default();
        let r = hf_offdiag_residual(&f, 0.7, 0, 1, None, &st).unwrap();
        assert_eq!(r.lhs, C64::new(0.0, 0.0));
        assert!(r.rhs.norm() <= 1e-14);
        assert!(r.residual <= 1e-14);
    }

    #[test]
    fn degenerate_pair_is_a_precondition_error() {
        let d = |a: f64, b: f64| CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(a, 0.0), C64::new(b, 0.0)]));
        let f = MatrixFamily::polynomial(vec![d(0.0, 0.0), d(1.0, -1.0)], true).unwrap();
        let st = Settings::default();
        assert!(matches!(hf_offdiag_residual(&f, 0.0, 0, 1, None, &st), Err(LevelflowError::Precondition(_))));
        assert!(matches!(hf_offdiag_residual(&f, 0.5, 1, 1, None, &st), Err(LevelflowError::InvalidParameter(_))));
    }

    #[test]
    fn product_order_limit() {
        let f = MatrixFamily::two_level_hermitian();
        let st = Settings::default();
        assert!(product_identity_check(&f, 1.0, 0, 1, 5, None, &st).is_err());
        let vals = product_identity_check(&f, 1.0, 0, 1, 1, None, &st).unwrap();
        assert_eq!(vals.len(), 3);
        assert!(vals.iter().all(|d| d.value.norm() <= 1e-8));
    }

    #[test]
    fn non_hermitian_family_rejected() {
        let st = Settings::default();
        assert!(matches!(
            hf_offdiag_residual(&MatrixFamily::two_level_pt(), 0.5, 0, 1, None, &st),
            Err(LevelflowError::ContractViolation(_))
        ));
    }
}
