//! Continuity matching of eigenvectors between neighbouring parameter values.

use crate::eig::{self, Spectrum};
use crate::error::Result;
use crate::linalg::{self, CMat, C64};
use crate::matrix_model::MatrixFamily;
use crate::settings::Settings;

/// Absolute cluster threshold for a spectrum.
pub(crate) fn cluster_abs(spectrum: &Spectrum, settings: &Settings) -> f64 {
    let scale = spectrum.eigenvalues.iter().map(|e| e.norm()).fold(0.0, f64::max);
    settings.cluster_tol * (1.0 + scale)
}

/// Orthonormalizes the columns of `y` symmetrically: Y (Y†Y)^{-1/2}.
fn lowdin(y: &[Vec<C64>], settings: &Settings) -> Option<Vec<Vec<C64>>> {
    let s = y.len();
    let mut gram = CMat::zeros(s, s);
    for i in 0..s {
        for j in 0..s {
            gram[(i, j)] = linalg::inner(&y[i], &y[j]);
        }
    }
    let eg = eig::eig_hermitian(&gram, settings).ok()?;
    if eg.eigenvalues.iter().any(|e| e.re < 1e-8) {
        return None;
    }
    let u = &eg.eigenvectors;
    let mut inv_sqrt = CMat::zeros(s, s);
    for i in 0..s {
        for j in 0..s {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..s {
                acc += u[(i, k)] * u[(j, k)].conj() / eg.eigenvalues[k].re.sqrt();
            }
            inv_sqrt[(i, j)] = acc;
        }
    }
    let n = y[0].len();
    Some(
        (0..s)
            .map(|j| {
                (0..n).map(|r| (0..s).map(|i| y[i][r] * inv_sqrt[(i, j)]).sum()).collect::<Vec<C64>>()
            })
            .collect(),
    )
}

/// Replaces the eigenvectors inside each degenerate cluster of `next` by the
/// orthonormalized projections of the reference vectors most aligned with it,
/// so that states at a degeneracy are the continuation of their neighbours.
fn rotate_clusters(reference: &[Vec<C64>], next: &mut Spectrum, tol: f64, settings: &Settings) {
    if !next.hermitian {
        return;
    }
    for cl in eig::clusters(&next.eigenvalues, tol) {
        let size = cl.len();
        if size < 2 {
            continue;
        }
        let basis: Vec<Vec<C64>> = cl.clone().map(|j| next.vector(j)).collect();
        let mut weighted: Vec<(usize, f64, Vec<C64>)> = reference
            .iter()
            .enumerate()
            .map(|(b, r)| {
                let coords: Vec<C64> = basis.iter().map(|w| linalg::inner(w, r)).collect();
                let weight: f64 = coords.iter().map(|z| z.norm_sqr()).sum();
                let n = r.len();
                let proj: Vec<C64> = (0..n).map(|i| basis.iter().zip(&coords).map(|(w, c)| w[i] * c).sum()).collect();
                (b, weight, proj)
            })
            .collect();
        weighted.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        let mut chosen: Vec<(usize, f64, Vec<C64>)> =
            weighted.into_iter().take(size).filter(|(_, w, _)| *w > 0.25).collect();
        chosen.sort_by_key(|c| c.0);
        if chosen.is_empty() {
            continue;
        }
        let projections: Vec<Vec<C64>> = chosen.iter().map(|c| c.2.clone()).collect();
        let mut new_cols = match lowdin(&projections, settings) {
            Some(cols) => cols,
            None => {
                let mut done: Vec<Vec<C64>> = Vec::new();
                for mut p in projections {
                    linalg::project_out(&mut p, &done);
                    linalg::normalize(&mut p);
                    done.push(p);
                }
                done
            }
        };
        // Complete the cluster with what is left of the original basis.
        for w in &basis {
            if new_cols.len() == size {
                break;
            }
            let mut rest = w.clone();
            linalg::project_out(&mut rest, &new_cols);
            if linalg::normalize(&mut rest) > 1e-6 {
                new_cols.push(rest);
            }
        }
        if new_cols.len() != size {
            continue;
        }
        for (j, mut col) in cl.zip(new_cols) {
            linalg::fix_phase(&mut col);
            linalg::set_column(&mut next.eigenvectors, j, &col);
        }
    }
}

/// Assigns one eigenpair of `next` to each reference vector.
///
/// Degenerate clusters of `next` are first rotated onto the reference
/// directions. Assignment is greedy by descending |⟨ref_b, v_j⟩|²; ties
/// within 1e-12 go to the closest eigenvalue. Returns `perm[b] = j`.
pub fn match_columns(
    reference: &[Vec<C64>],
    reference_energies: Option<&[f64]>,
    next: &mut Spectrum,
    settings: &Settings,
) -> Vec<usize> {
    let tol = cluster_abs(next, settings);
    rotate_clusters(reference, next, tol, settings);
    let cols: Vec<Vec<C64>> = (0..next.dim()).map(|j| next.vector(j)).collect();
    let mut candidates: Vec<(usize, usize, f64, f64)> = Vec::with_capacity(reference.len() * cols.len());
    for (b, r) in reference.iter().enumerate() {
        for (j, v) in cols.iter().enumerate() {
            let ov = linalg::inner(r, v).norm_sqr();
            let de = reference_energies.map(|e| (e[b] - next.eigenvalues[j].re).abs()).unwrap_or(0.0);
            candidates.push((b, j, ov, de));
        }
    }
    candidates.sort_by(|x, y| y.2.total_cmp(&x.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
    // Overlaps within 1e-12 of the head of their run count as ties and are
    // ordered by eigenvalue proximity.
    let mut start = 0;
    while start < candidates.len() {
        let head = candidates[start].2;
        let end = start + candidates[start..].iter().take_while(|c| head - c.2 <= 1e-12).count();
        candidates[start..end].sort_by(|x, y| x.3.total_cmp(&y.3).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
        start = end;
    }
    let mut perm = vec![usize::MAX; reference.len()];
    let mut used = vec![false; cols.len()];
    for (b, j, _, _) in candidates {
        if perm[b] == usize::MAX && !used[j] {
            perm[b] = j;
            used[j] = true;
        }
    }
    perm
}

/// Multiplies `v` by the unit phase maximizing Re⟨reference, v⟩.
pub fn align_phase(reference: &[C64], v: &mut [C64]) {
    let ov = linalg::inner(reference, v);
    let r = ov.norm();
    if r == 0.0 {
        return;
    }
    let phase = ov.conj() / r;
    for z in v.iter_mut() {
        *z *= phase;
    }
}

/// Spectrum at λ₀ whose degenerate clusters hold the limit states reached by
/// approaching λ₀ from below (λ₀ − offset).
pub fn limit_spectrum(family: &MatrixFamily, lambda0: f64, offset: f64, settings: &Settings) -> Result<Spectrum> {
    let mut s = family.spectrum_real(lambda0, settings)?;
    let tol = cluster_abs(&s, settings);
    if !s.hermitian || eig::clusters(&s.eigenvalues, tol).iter().all(|c| c.len() < 2) {
        return Ok(s);
    }
    let left = family.spectrum_real(lambda0 - offset, settings)?;
    let refs: Vec<Vec<C64>> = (0..left.dim()).map(|j| left.vector(j)).collect();
    rotate_clusters(&refs, &mut s, tol, settings);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMat;

    fn diag_family() -> MatrixFamily {
        // diag(λ, −λ) plus a decoupled third level
        let c0 = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(5.0, 0.0),
        ]));
        let c1 = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(-1.0, 0.0),
            C64::new(0.0, 0.0),
        ]));
        MatrixFamily::polynomial(vec![c0, c1], true).unwrap()
    }

    #[test]
    fn matching_follows_vectors_through_crossing() {
        let f = diag_family();
        let st = Settings::default();
        let before = f.spectrum_real(-0.1, &st).unwrap();
        let mut after = f.spectrum_real(0.1, &st).unwrap();
        let refs: Vec<Vec<C64>> = (0..3).map(|j| before.vector(j)).collect();
        let perm = match_columns(&refs, None, &mut after, &st);
        // sorted order swaps for the first two levels
        assert_eq!(perm, vec![1, 0, 2]);
    }

    #[test]
    fn limit_states_follow_the_approach_direction() {
        // H(λ) = λ·U diag(1, −1, 0) U† + diag(0, 0, 5): at λ = 0 the solver sees a
        // zero block and returns basis vectors; the limit states are U's columns.
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let u = CMat::from_row_slice(3, 3, &[
            C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(0.0, 0.0),
            C64::new(s, 0.0), C64::new(c, 0.0), C64::new(0.0, 0.0),
            C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0),
        ]);
        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 0.0),
        ]));
        let c1 = &u * d * u.adjoint();
        let c0 = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(5.0, 0.0),
        ]));
        let f = MatrixFamily::polynomial(vec![c0, c1], true).unwrap();
        let st = Settings::default();
        let s0 = limit_spectrum(&f, 0.0, 1e-3, &st).unwrap();
        for j in 0..2 {
            let v = s0.vector(j);
            let best = (0..2)
                .map(|k| linalg::inner(&linalg::column(&u, k), &v).norm())
                .fold(0.0, f64::max);
            assert!((best - 1.0).abs() < 1e-12, "column {j} overlap {best}");
        }
    }

    #[test]
    fn phase_alignment() {
        let r = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let mut v = vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)];
        align_phase(&r, &mut v);
        assert!((v[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }
}
