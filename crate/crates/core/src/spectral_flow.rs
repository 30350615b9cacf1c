//! Eigenvalue branches over a real parameter interval, crossing detection and
//! gap-minimum refinement.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::eig::Spectrum;
use crate::error::{LevelflowError, Result};
use crate::format::g17;
use crate::linalg::{self, CMat, C64};
use crate::matrix_model::MatrixFamily;
use crate::minimize;
use crate::settings::Settings;
use crate::tracking;

/// A step where a branch vector changed more than the overlap floor allows.
#[derive(Debug, Clone, Serialize)]
pub struct OverlapFlag {
    /// Grid index of the later point of the step.
    pub index: usize,
    pub branch: usize,
    pub overlap: f64,
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub grid: Vec<f64>,
    /// `energies[i][b]`: branch b at grid point i.
    pub energies: Vec<Vec<f64>>,
    /// Column b of `vectors[i]` is the eigenvector of branch b at grid point i.
    pub vectors: Vec<CMat>,
    /// `permutations[i][b]`: position of branch b in the sorted spectrum at i.
    pub permutations: Vec<Vec<usize>>,
    pub low_overlap: Vec<OverlapFlag>,
    /// max over the grid of ‖H′‖_F.
    pub slope_bound: f64,
    pub max_abs_energy: f64,
}

impl FlowResult {
    pub fn dim(&self) -> usize {
        self.energies.first().map_or(0, |e| e.len())
    }

    pub fn branch_energies(&self, b: usize) -> Vec<f64> {
        self.energies.iter().map(|row| row[b]).collect()
    }

    pub fn branch_vector(&self, i: usize, b: usize) -> Vec<C64> {
        linalg::column(&self.vectors[i], b)
    }

    /// Relative permutation between consecutive grid points: sorted index at
    /// i maps to sorted index at i + 1.
    pub fn step_permutation(&self, i: usize) -> Vec<usize> {
        let n = self.dim();
        let mut step = vec![0; n];
        for b in 0..n {
            step[self.permutations[i][b]] = self.permutations[i + 1][b];
        }
        step
    }

    fn nearest_index(&self, lambda: f64) -> usize {
        let pos = self.grid.partition_point(|&x| x < lambda);
        match pos {
            0 => 0,
            p if p >= self.grid.len() => self.grid.len() - 1,
            p => {
                if (lambda - self.grid[p - 1]).abs() <= (self.grid[p] - lambda).abs() {
                    p - 1
                } else {
                    p
                }
            }
        }
    }

    /// CSV with header `lambda,E_0,...` in branch order.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut out = String::from("lambda");
        for b in 0..n {
            out.push_str(&format!(",E_{b}"));
        }
        out.push('\n');
        for (i, lam) in self.grid.iter().enumerate() {
            out.push_str(&g17(*lam));
            for e in &self.energies[i] {
                out.push(',');
                out.push_str(&g17(*e));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Crossing,
    Avoided,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingEvent {
    pub pair: (usize, usize),
    pub lambda_star: f64,
    pub gap_min: f64,
    pub classification: Classification,
    /// Diagonal Hellmann-Feynman slopes ⟨ψ|H′|ψ⟩ of the two branches.
    pub slopes: (f64, f64),
    pub hf_element: f64,
    #[serde(rename = "overlap")]
    pub overlap_at_star: f64,
    /// Limit states of the two branches at λ*.
    #[serde(skip)]
    pub states: [Vec<C64>; 2],
}

impl CrossingEvent {
    pub fn to_json(&self) -> Value {
        json!({
            "pair": [self.pair.0, self.pair.1],
            "lambda_star": self.lambda_star,
            "gap_min": self.gap_min,
            "classification": self.classification,
            "slopes": [self.slopes.0, self.slopes.1],
            "hf_element": self.hf_element,
            "overlap": self.overlap_at_star,
        })
    }
}

pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let last = (steps - 1) as f64;
    (0..steps)
        .map(|i| if i + 1 == steps { hi } else { lo + (hi - lo) * i as f64 / last })
        .collect()
}

fn check_interval(lo: f64, hi: f64, steps: usize) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(LevelflowError::InvalidParameter(format!("need finite λ_min < λ_max, got [{lo}, {hi}]")));
    }
    if steps < 2 {
        return Err(LevelflowError::InvalidParameter(format!("steps must be at least 2, got {steps}")));
    }
    Ok(())
}

pub fn sweep(family: &MatrixFamily, lambda_min: f64, lambda_max: f64, steps: usize, settings: &Settings) -> Result<FlowResult> {
    sweep_directed(family, lambda_min, lambda_max, steps, false, settings)
}

/// Sweep with tracking started from λ_max when `reverse` is set. The result
/// is always stored on the ascending grid.
pub fn sweep_directed(
    family: &MatrixFamily,
    lambda_min: f64,
    lambda_max: f64,
    steps: usize,
    reverse: bool,
    settings: &Settings,
) -> Result<FlowResult> {
    check_interval(lambda_min, lambda_max, steps)?;
    if !family.hermitian_on_real_axis() {
        return Err(LevelflowError::ContractViolation(format!(
            "{} is not Hermitian on the real axis; use the PT or surface analyses",
            family.label()
        )));
    }
    let grid = linear_grid(lambda_min, lambda_max, steps);
    let spectra: Vec<Spectrum> = grid
        .par_iter()
        .map(|&lam| {
            family.spectrum_real(lam, settings).map_err(|e| match e {
                LevelflowError::NumericalFailure { message, mut diagnostics } => {
                    diagnostics.push(format!("grid point λ = {lam}"));
                    LevelflowError::NumericalFailure { message: format!("{message} at λ = {lam}"), diagnostics }
                }
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let slope_bound = grid
        .par_iter()
        .map(|&lam| family.derivative_real(lam).map(|d| linalg::frobenius(&d)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let n = family.dim();
    let order: Vec<usize> = if reverse { (0..steps).rev().collect() } else { (0..steps).collect() };
    let mut energies = vec![Vec::new(); steps];
    let mut vectors = vec![CMat::zeros(0, 0); steps];
    let mut permutations = vec![Vec::new(); steps];
    let mut low_overlap = Vec::new();
    let mut spectra: Vec<Option<Spectrum>> = spectra.into_iter().map(Some).collect();

    let first = order[0];
    let mut s0 = spectra[first].take().expect("spectrum present");
    // A degenerate starting point takes the limit states seen from inside
    // the interval.
    let neighbour = family.spectrum_real(grid[order[1]], settings)?;
    let refs: Vec<Vec<C64>> = (0..n).map(|j| neighbour.vector(j)).collect();
    tracking::match_columns(&refs, None, &mut s0, settings);
    energies[first] = s0.eigenvalues.iter().map(|e| e.re).collect();
    vectors[first] = s0.eigenvectors.clone();
    permutations[first] = (0..n).collect();

    let mut prev_vecs: Vec<Vec<C64>> = (0..n).map(|j| s0.vector(j)).collect();
    let mut prev_e = energies[first].clone();
    for &i in &order[1..] {
        let mut s = spectra[i].take().expect("spectrum present");
        let perm = tracking::match_columns(&prev_vecs, Some(&prev_e), &mut s, settings);
        let mut mat = CMat::zeros(n, n);
        let mut row = Vec::with_capacity(n);
        let mut next_vecs = Vec::with_capacity(n);
        for (b, &j) in perm.iter().enumerate() {
            let v = s.vector(j);
            let ov = linalg::inner(&prev_vecs[b], &v).norm();
            if ov < settings.overlap_floor {
                low_overlap.push(OverlapFlag { index: i, branch: b, overlap: ov });
            }
            linalg::set_column(&mut mat, b, &v);
            row.push(s.eigenvalues[j].re);
            next_vecs.push(v);
        }
        energies[i] = row;
        vectors[i] = mat;
        permutations[i] = perm;
        prev_vecs = next_vecs;
        prev_e = energies[i].clone();
    }
    let max_abs_energy = energies.iter().flatten().map(|e| e.abs()).fold(0.0, f64::max);
    Ok(FlowResult { grid, energies, vectors, permutations, low_overlap, slope_bound, max_abs_energy })
}

pub(crate) struct PairSample {
    pub ea: f64,
    pub eb: f64,
    pub va: Vec<C64>,
    pub vb: Vec<C64>,
}

/// Eigenpairs of branches a and b at λ, identified against the nearest grid
/// point of `flow`.
pub(crate) fn pair_at(family: &MatrixFamily, flow: &FlowResult, a: usize, b: usize, lambda: f64, settings: &Settings) -> Result<PairSample> {
    let i = flow.nearest_index(lambda);
    let mut s = family.spectrum_real(lambda, settings)?;
    let refs = [flow.branch_vector(i, a), flow.branch_vector(i, b)];
    let ref_e = [flow.energies[i][a], flow.energies[i][b]];
    let perm = tracking::match_columns(&refs, Some(&ref_e), &mut s, settings);
    // Rayleigh quotients keep each energy attached to its vector inside a
    // cluster, where sorted eigenvalues and rotated columns need not pair up.
    let h = family.evaluate_real(lambda)?;
    let (va, vb) = (s.vector(perm[0]), s.vector(perm[1]));
    Ok(PairSample { ea: linalg::sandwich(&va, &h, &va).re, eb: linalg::sandwich(&vb, &h, &vb).re, va, vb })
}

/// Half the derivative of (E_a − E_b)², with the slopes taken from the
/// diagonal Hellmann-Feynman elements.
fn gap_gradient(family: &MatrixFamily, p: &PairSample, lambda: f64) -> Result<f64> {
    let dh = family.derivative_real(lambda)?;
    let sa = linalg::sandwich(&p.va, &dh, &p.va).re;
    let sb = linalg::sandwich(&p.vb, &dh, &p.vb).re;
    Ok((p.ea - p.eb) * (sa - sb))
}

fn refine_on_flow(
    family: &MatrixFamily,
    flow: &FlowResult,
    a: usize,
    b: usize,
    bracket: (f64, f64),
    settings: &Settings,
) -> Result<(f64, f64)> {
    let (lo, hi) = bracket;
    let gradient = |lam: f64| -> Result<f64> { gap_gradient(family, &pair_at(family, flow, a, b, lam, settings)?, lam) };
    let g_lo = gradient(lo)?;
    let g_hi = gradient(hi)?;
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(LevelflowError::Bracket { lo, hi });
    }
    let x = minimize::bracketed_root(gradient, lo, hi, g_lo, g_hi, |x| 4.0 * f64::EPSILON * (1.0 + x.abs()))?;
    let p = pair_at(family, flow, a, b, x, settings)?;
    Ok((x, (p.ea - p.eb).abs()))
}

/// Refines the minimum of the squared gap between two branches inside
/// `bracket`. Branch labels are the sorted eigenvalue positions at the lower
/// end of the bracket.
pub fn refine_gap_minimum(
    family: &MatrixFamily,
    pair: (usize, usize),
    bracket: (f64, f64),
    settings: &Settings,
) -> Result<(f64, f64)> {
    let (lo, hi) = bracket;
    check_interval(lo, hi, 2)?;
    let n = family.dim();
    for idx in [pair.0, pair.1] {
        if idx >= n {
            return Err(LevelflowError::IndexOutOfRange { index: idx, dim: n });
        }
    }
    if pair.0 == pair.1 {
        return Err(LevelflowError::InvalidParameter("pair must name two different branches".into()));
    }
    let local = sweep(family, lo, hi, 41, settings)?;
    refine_on_flow(family, &local, pair.0, pair.1, bracket, settings)
}

/// Grid index ranges (run start, run end) of interior local minima of `f`,
/// with plateaus within `noise` merged.
fn interior_minima(f: &[f64], noise: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let n = f.len();
    let mut i = 1;
    while i + 1 < n {
        let mut j = i;
        while j + 1 < n && (f[j + 1] - f[i]).abs() <= noise {
            j += 1;
        }
        if j + 1 < n && f[i - 1] - f[i] > noise && f[j + 1] - f[j] > noise {
            out.push((i, j));
        }
        i = j + 1;
    }
    out
}

pub fn detect_events(flow: &FlowResult, family: &MatrixFamily, settings: &Settings) -> Result<Vec<CrossingEvent>> {
    let n = flow.dim();
    let steps = flow.grid.len();
    if steps < 3 {
        return Ok(Vec::new());
    }
    let cross_tol = settings.cross_tol(flow.max_abs_energy);
    let noise = 256.0 * f64::EPSILON * (1.0 + flow.max_abs_energy).powi(2);
    let mut candidates = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let f: Vec<f64> = flow.energies.iter().map(|row| (row[a] - row[b]).powi(2)).collect();
            for (i, j) in interior_minima(&f, noise) {
                let adjacent = (i..=j).any(|p| {
                    let row = &flow.energies[p];
                    let (lo, hi) = if row[a] <= row[b] { (row[a], row[b]) } else { (row[b], row[a]) };
                    !row.iter().enumerate().any(|(c, &e)| c != a && c != b && e > lo + cross_tol && e < hi - cross_tol)
                });
                if adjacent {
                    candidates.push((a, b, i - 1, j + 1));
                }
            }
        }
    }
    let mut events = candidates
        .par_iter()
        .map(|&(a, b, i0, i1)| {
            // A grid minimum the slopes do not confirm is rounding noise.
            let (lambda_star, gap_min) = match refine_on_flow(family, flow, a, b, (flow.grid[i0], flow.grid[i1]), settings) {
                Ok(found) => found,
                Err(LevelflowError::Bracket { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let p = pair_at(family, flow, a, b, lambda_star, settings)?;
            let dh = family.derivative_real(lambda_star)?;
            let classification = if gap_min <= cross_tol { Classification::Crossing } else { Classification::Avoided };
            Ok(Some(CrossingEvent {
                pair: (a, b),
                lambda_star,
                gap_min,
                classification,
                slopes: (linalg::sandwich(&p.va, &dh, &p.va).re, linalg::sandwich(&p.vb, &dh, &p.vb).re),
                hf_element: linalg::sandwich(&p.va, &dh, &p.vb).norm(),
                overlap_at_star: linalg::inner(&p.va, &p.vb).norm(),
                states: [p.va, p.vb],
            }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    events.sort_by(|x, y| x.lambda_star.total_cmp(&y.lambda_star).then(x.pair.cmp(&y.pair)));
    Ok(events)
}

#[derive(Debug, Clone, Serialize)]
pub struct OrthogonalitySample {
    pub offset: f64,
    pub below: f64,
    pub above: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrthogonalityReport {
    pub lambda_star: f64,
    /// |⟨ψ_m|ψ_n⟩| between the limit states at λ*.
    pub at_star: f64,
    pub samples: Vec<OrthogonalitySample>,
}

impl OrthogonalityReport {
    pub fn max_overlap(&self) -> f64 {
        self.samples.iter().map(|s| s.below.max(s.above)).fold(self.at_star, f64::max)
    }
}

/// |⟨ψ_m|ψ_n⟩| approaching the event from both sides.
pub fn crossing_orthogonality_check(
    family: &MatrixFamily,
    event: &CrossingEvent,
    approach_steps: &[f64],
    settings: &Settings,
) -> Result<OrthogonalityReport> {
    let refs = vec![event.states[0].clone(), event.states[1].clone()];
    let overlap_at = |lam: f64| -> Result<f64> {
        let mut s = family.spectrum_real(lam, settings)?;
        let perm = tracking::match_columns(&refs, None, &mut s, settings);
        Ok(linalg::inner(&s.vector(perm[0]), &s.vector(perm[1])).norm())
    };
    let samples = approach_steps
        .iter()
        .map(|&d| {
            Ok(OrthogonalitySample {
                offset: d,
                below: overlap_at(event.lambda_star - d)?,
                above: overlap_at(event.lambda_star + d)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrthogonalityReport {
        lambda_star: event.lambda_star,
        at_star: linalg::inner(&event.states[0], &event.states[1]).norm(),
        samples,
    })
}

pub fn events_json(events: &[CrossingEvent]) -> Value {
    Value::Array(events.iter().map(CrossingEvent::to_json).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_family(c0: [f64; 2], c1: [f64; 2]) -> MatrixFamily {
        let d = |v: [f64; 2]| CMat::from_diagonal(&nalgebra::DVector::from_vec(v.iter().map(|&x| C64::new(x, 0.0)).collect()));
        MatrixFamily::polynomial(vec![d(c0), d(c1)], true).unwrap()
    }

    #[test]
    fn grid_endpoints_exact() {
        let g = linear_grid(-1.0, 3.0, 401);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[200], 1.0);
        assert_eq!(g[400], 3.0);
    }

    #[test]
    fn minima_detection_with_plateau() {
        assert_eq!(interior_minima(&[3.0, 1.0, 1.0, 3.0], 1e-12), vec![(1, 2)]);
        assert_eq!(interior_minima(&[3.0, 2.0, 1.0], 1e-12), vec![]);
        assert_eq!(interior_minima(&[2.0, 2.0, 2.0], 1e-12), vec![]);
    }

    #[test]
    fn decoupled_diagonal_family_crosses_at_half() {
        // diag(λ, 1 − λ)
        let f = diag_family([0.0, 1.0], [1.0, -1.0]);
        let st = Settings::default();
        let flow = sweep(&f, 0.0, 1.0, 40, &st).unwrap();
        let events = detect_events(&flow, &f, &st).unwrap();
        assert_eq!(events.len(), 1);
        let e = &events[0];
        assert_eq!(e.classification, Classification::Crossing);
        assert!((e.lambda_star - 0.5).abs() < 1e-12);
        let b0 = flow.branch_energies(0);
        assert!(b0.iter().zip(&flow.grid).all(|(e, l)| (e - l).abs() < 1e-14 || (e - (1.0 - l)).abs() < 1e-14));
        // Branch 0 starts at 0 and must stay on E = λ through the crossing.
        assert!((b0[39] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_gap_has_no_events() {
        // diag(λ, 2 + λ)
        let f = diag_family([0.0, 2.0], [1.0, 1.0]);
        let st = Settings::default();
        let flow = sweep(&f, -3.0, 3.0, 101, &st).unwrap();
        assert!(detect_events(&flow, &f, &st).unwrap().is_empty());
    }

    #[test]
    fn sweep_rejects_bad_input() {
        let st = Settings::default();
        let f = MatrixFamily::two_level_hermitian();
        assert!(sweep(&f, 1.0, 0.0, 10, &st).is_err());
        assert!(sweep(&f, 0.0, 1.0, 1, &st).is_err());
        assert!(matches!(sweep(&MatrixFamily::two_level_pt(), 0.0, 1.0, 5, &st), Err(LevelflowError::ContractViolation(_))));
    }

    #[test]
    fn refine_rejects_monotone_bracket() {
        let st = Settings::default();
        let f = MatrixFamily::two_level_hermitian();
        assert!(matches!(refine_gap_minimum(&f, (0, 1), (1.5, 2.5), &st), Err(LevelflowError::Bracket { .. })));
    }

    #[test]
    fn orthogonality_through_diagonal_crossing() {
        // diag(λ, −λ) through λ = 0
        let f = diag_family([0.0, 0.0], [1.0, -1.0]);
        let st = Settings::default();
        let flow = sweep(&f, -1.0, 1.0, 21, &st).unwrap();
        let events = detect_events(&flow, &f, &st).unwrap();
        assert_eq!(events.len(), 1);
        let rep = crossing_orthogonality_check(&f, &events[0], &[1e-1, 1e-3, 1e-6], &st).unwrap();
        assert!(rep.max_overlap() <= 1e-12);
    }
}
