//! The 2D anisotropic oscillator −∂²ₓ − ∂²ᵧ + k x² + λ y² in a truncated
//! product basis of 1D oscillator eigenfunctions.
//!
//! The x factor uses eigenfunctions at stiffness k, the y factor
//! eigenfunctions at a fixed reference stiffness λ_ref. With that choice
//! H(λ) = C₀ + λ·C₁ is affine, C₁ = I ⊗ ⟨φ_a|y²|φ_b⟩, and H(λ_ref) is diagonal.

use serde::Serialize;

use crate::eig::{self, Spectrum};
use crate::error::{LevelflowError, Result};
use crate::linalg::{self, CMat, C64};
use crate::matrix_model::MatrixFamily;
use crate::settings::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct OscState {
    pub m: usize,
    pub n: usize,
}

impl OscState {
    pub fn new(m: usize, n: usize) -> Self {
        OscState { m, n }
    }

    pub fn level(&self) -> usize {
        self.m + self.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscSpec {
    pub k: f64,
    /// Largest quantum number kept in each direction.
    pub n_max: usize,
    pub lambda_ref: f64,
}

impl OscSpec {
    pub fn new(k: f64, n_max: usize) -> Self {
        OscSpec { k, n_max, lambda_ref: k }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(LevelflowError::Domain(format!("k must be positive, got {}", self.k)));
        }
        if !(self.lambda_ref.is_finite() && self.lambda_ref > 0.0) {
            return Err(LevelflowError::Domain(format!("lambda_ref must be positive, got {}", self.lambda_ref)));
        }
        if self.n_max < 2 {
            return Err(LevelflowError::Domain(format!("truncation N must be at least 2, got {}", self.n_max)));
        }
        Ok(())
    }

    pub fn side(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        self.side() * self.side()
    }

    pub fn basis_index(&self, s: OscState) -> usize {
        s.m * self.side() + s.n
    }

    pub fn state_at(&self, index: usize) -> OscState {
        OscState { m: index / self.side(), n: index % self.side() }
    }

    pub fn states(&self) -> impl Iterator<Item = OscState> + '_ {
        (0..self.dim()).map(|i| self.state_at(i))
    }
}

/// √k(2m+1) + √λ(2n+1).
pub fn exact_energy(spec: &OscSpec, state: OscState, lambda: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(LevelflowError::Domain(format!("λ must be positive, got {lambda}")));
    }
    Ok(spec.k.sqrt() * (2 * state.m + 1) as f64 + lambda.sqrt() * (2 * state.n + 1) as f64)
}

/// ⟨φ_a|q²|φ_b⟩ for eigenfunctions of −d²/dq² + k_eff q².
pub fn q2_element(k_eff: f64, a: usize, b: usize) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let scale = 2.0 * k_eff.sqrt();
    if lo == hi {
        (2 * lo + 1) as f64 / scale
    } else if hi == lo + 2 {
        (((lo + 1) * (lo + 2)) as f64).sqrt() / scale
    } else {
        0.0
    }
}

pub(crate) fn family_coefficients(spec: &OscSpec) -> (CMat, CMat) {
    let side = spec.side();
    let dim = spec.dim();
    let sk = spec.k.sqrt();
    let sref = spec.lambda_ref.sqrt();
    let mut c0 = CMat::zeros(dim, dim);
    let mut c1 = CMat::zeros(dim, dim);
    for m in 0..side {
        for n in 0..side {
            let i = m * side + n;
            for n2 in 0..side {
                let q = q2_element(spec.lambda_ref, n, n2);
                if q == 0.0 {
                    continue;
                }
                let j = m * side + n2;
                c1[(i, j)] = C64::new(q, 0.0);
                c0[(i, j)] = C64::new(-spec.lambda_ref * q, 0.0);
            }
            c0[(i, i)] += C64::new(sk * (2 * m + 1) as f64 + sref * (2 * n + 1) as f64, 0.0);
        }
    }
    (c0, c1)
}

pub fn build_family(spec: &OscSpec) -> Result<MatrixFamily> {
    MatrixFamily::oscillator_2d(spec)
}

/// Number of basis states (m, n ≤ N) on the isotropic level m + n = `level`.
pub fn degeneracy_at_iso(spec: &OscSpec, level: usize) -> Result<usize> {
    spec.validate()?;
    if level > 2 * spec.n_max {
        return Err(LevelflowError::Domain(format!(
            "level {level} is beyond the truncation (max {})",
            2 * spec.n_max
        )));
    }
    Ok((0..=level).filter(|&m| m <= spec.n_max && level - m <= spec.n_max).count())
}

/// Column of `spectrum` with the largest weight on the basis state `state`.
pub fn branch_index(spec: &OscSpec, spectrum: &Spectrum, state: OscState) -> usize {
    let row = spec.basis_index(state);
    (0..spectrum.dim())
        .max_by(|&a, &b| spectrum.eigenvectors[(row, a)].norm().total_cmp(&spectrum.eigenvectors[(row, b)].norm()))
        .unwrap_or(0)
}

/// x quantum number carried by an eigenvector (the m block holding its weight).
pub fn m_label(spec: &OscSpec, vector: &[C64]) -> usize {
    let side = spec.side();
    (0..side)
        .max_by(|&a, &b| {
            let wa: f64 = vector[a * side..(a + 1) * side].iter().map(|z| z.norm_sqr()).sum();
            let wb: f64 = vector[b * side..(b + 1) * side].iter().map(|z| z.norm_sqr()).sum();
            wa.total_cmp(&wb)
        })
        .unwrap_or(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionRuleReport {
    pub lambda: f64,
    /// Largest |⟨ψ|H′|ψ′⟩| over eigenvector pairs with different m.
    pub max_cross_symmetry: f64,
    /// Largest |⟨ψ|H′|ψ′⟩| over distinct eigenvectors sharing m.
    pub max_same_symmetry: f64,
}

pub fn selection_rule(spec: &OscSpec, lambda: f64, settings: &Settings) -> Result<SelectionRuleReport> {
    let family = build_family(spec)?;
    let s = family.spectrum_real(lambda, settings)?;
    let dh = family.derivative_real(lambda)?;
    let vectors: Vec<Vec<C64>> = (0..s.dim()).map(|j| s.vector(j)).collect();
    let labels: Vec<usize> = vectors.iter().map(|v| m_label(spec, v)).collect();
    let hv: Vec<Vec<C64>> = vectors
        .iter()
        .map(|v| (&dh * linalg::CVec::from_column_slice(v)).iter().copied().collect())
        .collect();
    let mut cross: f64 = 0.0;
    let mut same: f64 = 0.0;
    for a in 0..s.dim() {
        for b in 0..s.dim() {
            if a == b {
                continue;
            }
            let x = linalg::inner(&vectors[a], &hv[b]).norm();
            if labels[a] != labels[b] {
                cross = cross.max(x);
            } else {
                same = same.max(x);
            }
        }
    }
    Ok(SelectionRuleReport { lambda, max_cross_symmetry: cross, max_same_symmetry: same })
}

/// Eigenvalues of H(λ) grouped by x quantum number: entry [m][n] approximates
/// the (m, n) level. H is block diagonal in m, so each block is solved alone
/// and exact degeneracies between sectors cannot mix the labels.
pub fn sector_energies(spec: &OscSpec, lambda: f64, settings: &Settings) -> Result<Vec<Vec<f64>>> {
    let family = build_family(spec)?;
    let h = family.evaluate_real(lambda)?;
    let side = spec.side();
    (0..side)
        .map(|m| {
            let block = h.view((m * side, m * side), (side, side)).into_owned();
            Ok(eig::eig_hermitian(&block, settings)?.eigenvalues.iter().map(|e| e.re).collect())
        })
        .collect()
}

/// Sizes of the degenerate eigenvalue clusters of H(k), lowest first.
pub fn iso_cluster_sizes(spec: &OscSpec, settings: &Settings) -> Result<Vec<usize>> {
    let family = build_family(spec)?;
    let h = family.evaluate_real(spec.k)?;
    let s = eig::eig_hermitian(&h, settings)?;
    let tol = 1e-12 * (1.0 + s.eigenvalues.iter().map(|e| e.norm()).fold(0.0, f64::max));
    Ok(eig::clusters(&s.eigenvalues, tol).into_iter().map(|r| r.len()).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct DegeneracyRow {
    pub level: usize,
    pub expected: usize,
    pub numeric: usize,
    pub energy: f64,
}

/// Degeneracy table at λ = k for levels 0..=max_level (max_level ≤ N).
pub fn degeneracy_table(spec: &OscSpec, max_level: usize, settings: &Settings) -> Result<Vec<DegeneracyRow>> {
    if max_level > spec.n_max {
        return Err(LevelflowError::Domain(format!("max level {max_level} exceeds N = {}", spec.n_max)));
    }
    let sizes = iso_cluster_sizes(spec, settings)?;
    (0..=max_level)
        .map(|level| {
            Ok(DegeneracyRow {
                level,
                expected: degeneracy_at_iso(spec, level)?,
                numeric: sizes.get(level).copied().unwrap_or(0),
                energy: spec.k.sqrt() * 2.0 * (level + 1) as f64,
            })
        })
        .collect()
}
