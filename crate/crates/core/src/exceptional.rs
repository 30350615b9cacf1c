//! Exceptional points in the complex parameter plane, PT phase sweeps and
//! complex-plane eigenvalue surfaces.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::eig::{self, Spectrum};
use crate::error::{LevelflowError, Result};
use crate::format::g17;
use crate::hellmann_feynman::loglog_slope;
use crate::linalg::{self, C64};
use crate::matrix_model::MatrixFamily;
use crate::settings::Settings;

fn general_spectrum(family: &MatrixFamily, z: C64, settings: &Settings) -> Result<Spectrum> {
    let h = family.evaluate(z)?;
    Ok(eig::eig_general(&h, settings)?.with_lambda(z))
}

fn discriminant_of(values: &[C64]) -> C64 {
    let mut d = C64::new(1.0, 0.0);
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            let diff = values[i] - values[j];
            d *= diff * diff;
        }
    }
    d
}

/// Π_{i<j} (E_i − E_j)² at z.
pub fn discriminant(family: &MatrixFamily, z: C64, settings: &Settings) -> Result<C64> {
    Ok(discriminant_of(&general_spectrum(family, z, settings)?.eigenvalues))
}

/// Default convergence threshold for |D(z)| near `z`.
pub fn default_ep_tol(family: &MatrixFamily, z: C64, settings: &Settings) -> Result<f64> {
    let n = family.dim() as i32;
    let norm = linalg::frobenius(&family.evaluate(z)?);
    Ok(settings.ep_tol_base * (1.0 + norm.powi(n * (n - 1))))
}

/// Closest pair of eigenvalues.
fn closest_pair(values: &[C64]) -> (usize, usize) {
    let mut best = (0, 1, f64::INFINITY);
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            let d = (values[i] - values[j]).norm();
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    (best.0, best.1)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExceptionalPoint {
    pub z_star: C64,
    pub pair: (usize, usize),
    pub discriminant_abs: f64,
    pub sigma_min: f64,
    pub puiseux_exponent: f64,
    pub iterations: usize,
}

impl ExceptionalPoint {
    pub fn to_json(&self) -> Value {
        json!({
            "z_star": [self.z_star.re, self.z_star.im],
            "pair": [self.pair.0, self.pair.1],
            "discriminant_abs": self.discriminant_abs,
            "sigma_min": self.sigma_min,
            "puiseux_exponent": self.puiseux_exponent,
            "iterations": self.iterations,
        })
    }
}

pub const MAX_NEWTON_ITERATIONS: usize = 100;

/// Newton iteration on the discriminant from `seed`. The derivative is a
/// central difference with step 1e-6·(1 + |z|); steps that do not decrease
/// |D| are halved up to 20 times.
pub fn find_exceptional_point(
    family: &MatrixFamily,
    seed: C64,
    ep_tol: Option<f64>,
    settings: &Settings,
) -> Result<ExceptionalPoint> {
    if family.dim() < 2 {
        return Err(LevelflowError::InvalidParameter("a 1x1 family has no exceptional points".into()));
    }
    let tol = match ep_tol {
        Some(t) if t.is_finite() && t > 0.0 => t,
        Some(t) => return Err(LevelflowError::InvalidParameter(format!("ep_tol must be positive, got {t}"))),
        None => default_ep_tol(family, seed, settings)?,
    };
    let d = |z: C64| discriminant(family, z, settings);
    let mut z = seed;
    let mut dz = d(z)?;
    let mut trace = vec![(z.re, z.im, dz.norm())];
    let mut converged_at = None;
    for it in 1..=MAX_NEWTON_ITERATIONS {
        let h = 1e-6 * (1.0 + z.norm());
        let deriv = (d(z + h)? - d(z - h)?) / (2.0 * h);
        if deriv.norm() == 0.0 || !deriv.re.is_finite() {
            break;
        }
        let step = dz / deriv;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=20 {
            let cand = z - step * t;
            match d(cand) {
                Ok(dc) if dc.norm() < dz.norm() => {
                    accepted = Some((cand, dc));
                    break;
                }
                _ => t *= 0.5,
            }
        }
        let Some((zn, dn)) = accepted else { break };
        z = zn;
        dz = dn;
        trace.push((z.re, z.im, dz.norm()));
        if dz.norm() <= tol && converged_at.is_none() {
            converged_at = Some(it);
        }
        if dz.norm() == 0.0 {
            break;
        }
    }
    let Some(iterations) = converged_at else {
        return Err(LevelflowError::SearchFailure { iterations: trace.len() - 1, trace });
    };
    let spec = general_spectrum(family, z, settings)?;
    let pair = closest_pair(&spec.eigenvalues);
    let direction = if z == seed { C64::new(1.0, 0.0) } else { (z - seed) / (z - seed).norm() };
    let offsets: Vec<f64> = (0..=10).map(|i| 10f64.powf(-2.0 - 0.5 * i as f64)).collect();
    let puiseux_exponent = splitting_exponent(family, z, direction, &offsets, settings)?;
    Ok(ExceptionalPoint {
        z_star: z,
        pair,
        discriminant_abs: dz.norm(),
        sigma_min: spec.sigma_min(),
        puiseux_exponent,
        iterations,
    })
}

/// Smallest singular value of the unit-column eigenvector matrix at z.
pub fn eigenvector_sigma_min(family: &MatrixFamily, z: C64, settings: &Settings) -> Result<f64> {
    Ok(general_spectrum(family, z, settings)?.sigma_min())
}

/// Log-log slope of the smallest eigenvalue splitting at z* + ε·direction
/// against ε.
pub fn splitting_exponent(
    family: &MatrixFamily,
    z_star: C64,
    direction: C64,
    offsets: &[f64],
    settings: &Settings,
) -> Result<f64> {
    let points = offsets
        .iter()
        .map(|&eps| {
            let s = general_spectrum(family, z_star + direction * eps, settings)?;
            let (i, j) = closest_pair(&s.eigenvalues);
            Ok((eps, (s.eigenvalues[i] - s.eigenvalues[j]).norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(loglog_slope(&points))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PtPhase {
    Unbroken,
    Broken,
    Boundary,
}

#[derive(Debug, Clone, Serialize)]
pub struct PtPhasePoint {
    pub g: f64,
    pub phase: PtPhase,
    pub eigenvalues: Vec<C64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PtSweep {
    pub points: Vec<PtPhasePoint>,
    /// Refined locations of unbroken/broken transitions.
    pub boundaries: Vec<f64>,
}

impl PtSweep {
    /// CSV `g,phase,reE_0,imE_0,...`.
    pub fn to_csv(&self) -> String {
        let n = self.points.first().map_or(0, |p| p.eigenvalues.len());
        let mut out = String::from("g,phase");
        for j in 0..n {
            out.push_str(&format!(",reE_{j},imE_{j}"));
        }
        out.push('\n');
        for p in &self.points {
            let phase = match p.phase {
                PtPhase::Unbroken => "unbroken",
                PtPhase::Broken => "broken",
                PtPhase::Boundary => "boundary",
            };
            out.push_str(&format!("{},{}", g17(p.g), phase));
            for e in &p.eigenvalues {
                out.push_str(&format!(",{},{}", g17(e.re), g17(e.im)));
            }
            out.push('\n');
        }
        out
    }
}

fn max_imag(values: &[C64]) -> f64 {
    values.iter().map(|e| e.im.abs()).fold(0.0, f64::max)
}

fn pt_point(family: &MatrixFamily, g: f64, real_tol: Option<f64>, settings: &Settings) -> Result<(PtPhasePoint, f64)> {
    let z = C64::new(g, 0.0);
    let h = family.evaluate(z)?;
    let norm = linalg::frobenius(&h);
    let tol = real_tol.unwrap_or(settings.real_tol_rel * (1.0 + norm));
    let s = eig::eig_general(&h, settings)?;
    let im = max_imag(&s.eigenvalues);
    let coalescing = s.dim() > 1 && {
        let (i, j) = closest_pair(&s.eigenvalues);
        (s.eigenvalues[i] - s.eigenvalues[j]).norm() <= settings.defective_tol * (1.0 + norm)
    };
    let phase = if s.defective || coalescing {
        PtPhase::Boundary
    } else if im <= tol {
        PtPhase::Unbroken
    } else {
        PtPhase::Broken
    };
    Ok((PtPhasePoint { g, phase, eigenvalues: s.eigenvalues }, im - tol))
}

/// Classifies the spectrum at each grid point of [g_min, g_max] and bisects
/// every unbroken/broken transition on max|Im E| − real_tol to 1e-10.
pub fn pt_classify_sweep(
    family: &MatrixFamily,
    g_min: f64,
    g_max: f64,
    steps: usize,
    real_tol: Option<f64>,
    settings: &Settings,
) -> Result<PtSweep> {
    if !(g_min.is_finite() && g_max.is_finite() && g_min < g_max) {
        return Err(LevelflowError::InvalidParameter(format!("need finite g_min < g_max, got [{g_min}, {g_max}]")));
    }
    if steps < 2 {
        return Err(LevelflowError::InvalidParameter(format!("steps must be at least 2, got {steps}")));
    }
    if let Some(t) = real_tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(LevelflowError::InvalidParameter(format!("real_tol must be positive, got {t}")));
        }
    }
    let grid = crate::spectral_flow::linear_grid(g_min, g_max, steps);
    let points: Vec<PtPhasePoint> = grid
        .par_iter()
        .map(|&g| pt_point(family, g, real_tol, settings).map(|p| p.0))
        .collect::<Result<_>>()?;

    let mut boundaries = Vec::new();
    let classified: Vec<usize> = (0..points.len()).filter(|&i| points[i].phase != PtPhase::Boundary).collect();
    for w in classified.windows(2) {
        let (i, j) = (w[0], w[1]);
        if points[i].phase == points[j].phase {
            // Boundary-only stretches between equal phases are reported as is.
            for p in &points[i + 1..j] {
                boundaries.push(p.g);
            }
            continue;
        }
        let sign_lo = points[i].phase == PtPhase::Broken;
        let (mut a, mut b) = (points[i].g, points[j].g);
        while b - a > 1e-10 {
            let mid = 0.5 * (a + b);
            let broken = pt_point(family, mid, real_tol, settings)?.1 > 0.0;
            if broken == sign_lo {
                a = mid;
            } else {
                b = mid;
            }
        }
        boundaries.push(0.5 * (a + b));
    }
    Ok(PtSweep { points, boundaries })
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceGrid {
    pub nx: usize,
    pub ny: usize,
    /// Row-major with x outer and y inner.
    pub nodes: Vec<SurfaceNode>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceNode {
    pub x: f64,
    pub y: f64,
    /// Ordered by (Re, Im).
    pub eigenvalues: Vec<C64>,
}

impl SurfaceGrid {
    pub fn node(&self, ix: usize, iy: usize) -> &SurfaceNode {
        &self.nodes[ix * self.ny + iy]
    }

    /// CSV `x,y,reE_0,imE_0,...`.
    pub fn to_csv(&self) -> String {
        let n = self.nodes.first().map_or(0, |p| p.eigenvalues.len());
        let mut out = String::from("x,y");
        for j in 0..n {
            out.push_str(&format!(",reE_{j},imE_{j}"));
        }
        out.push('\n');
        for node in &self.nodes {
            out.push_str(&format!("{},{}", g17(node.x), g17(node.y)));
            for e in &node.eigenvalues {
                out.push_str(&format!(",{},{}", g17(e.re), g17(e.im)));
            }
            out.push('\n');
        }
        out
    }
}

/// Eigenvalues of H(x + iy) over a rectangular grid.
pub fn surface_scan(
    family: &MatrixFamily,
    x_range: (f64, f64),
    y_range: (f64, f64),
    nx: usize,
    ny: usize,
    settings: &Settings,
) -> Result<SurfaceGrid> {
    for (lo, hi, n, axis) in [(x_range.0, x_range.1, nx, "x"), (y_range.0, y_range.1, ny, "y")] {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(LevelflowError::InvalidParameter(format!("{axis} range must satisfy lo < hi, got [{lo}, {hi}]")));
        }
        if n < 2 {
            return Err(LevelflowError::InvalidParameter(format!("{axis} needs at least 2 nodes, got {n}")));
        }
    }
    if family.dim() > eig::GENERAL_MAX_DIM {
        return Err(LevelflowError::UnsupportedSize { dim: family.dim(), limit: eig::GENERAL_MAX_DIM });
    }
    let xs = crate::spectral_flow::linear_grid(x_range.0, x_range.1, nx);
    let ys = crate::spectral_flow::linear_grid(y_range.0, y_range.1, ny);
    let coords: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    let nodes = coords
        .par_iter()
        .map(|&(x, y)| {
            let s = family.spectrum(C64::new(x, y), settings)?;
            Ok(SurfaceNode { x, y, eigenvalues: s.eigenvalues })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SurfaceGrid { nx, ny, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discriminant_of_two_values() {
        let d = discriminant_of(&[C64::new(-1.0, 0.0), C64::new(1.0, 0.0)]);
        assert_eq!(d, C64::new(4.0, 0.0));
    }

    #[test]
    fn closest_pair_picks_minimum_distance() {
        let v = [C64::new(0.0, 0.0), C64::new(3.0, 0.0), C64::new(3.1, 0.0)];
        assert_eq!(closest_pair(&v), (1, 2));
    }

    #[test]
    fn search_failure_carries_trace() {
        // diag(λ, λ + 1) never coalesces
        let d = |a: f64, b: f64| {
            crate::linalg::CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(a, 0.0), C64::new(b, 0.0)]))
        };
        let f = MatrixFamily::polynomial(vec![d(0.0, 1.0), d(1.0, 1.0)], true).unwrap();
        match find_exceptional_point(&f, C64::new(0.3, 0.2), None, &Settings::default()) {
            Err(LevelflowError::SearchFailure { trace, .. }) => assert!(!trace.is_empty()),
            other => panic!("expected search failure, got {other:?}"),
        }
    }

    #[test]
    fn hermitian_family_is_unbroken_everywhere() {
        let f = MatrixFamily::two_level_hermitian();
        let sweep = pt_classify_sweep(&f, -3.0, 3.0, 61, None, &Settings::default()).unwrap();
        assert!(sweep.points.iter().all(|p| p.phase == PtPhase::Unbroken));
        assert!(sweep.boundaries.is_empty());
    }
}
