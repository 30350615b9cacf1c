//! Identity suite behind `levelflow check`.

use levelflow::exceptional::pt_classify_sweep;
use levelflow::hellmann_feynman::{diagonal_hf_convergence, hf_element, hf_offdiag_residual, product_identity_check};
use levelflow::linalg::{self, C64};
use levelflow::matrix_model::FamilyKind;
use levelflow::oscillator::{self, OscSpec};
use levelflow::spectral_flow::{crossing_orthogonality_check, detect_events, sweep, Classification};
use levelflow::{eig_general, g17, BuiltinName, LevelflowError, MatrixFamily, Settings};
use serde_json::json;

use crate::output::{emit, Secondary};
use crate::{load_model, parse_range, CheckArgs, CliError};

struct Row {
    name: &'static str,
    value: f64,
    bound: f64,
    pass: bool,
}

#[derive(Default)]
struct Suite {
    rows: Vec<Row>,
}

impl Suite {
    /// Passes when value ≤ bound. NaN never passes.
    fn at_most(&mut self, name: &'static str, value: f64, bound: f64) {
        self.rows.push(Row { name, value, bound, pass: value <= bound });
    }

    fn to_csv(&self) -> String {
        let mut s = String::from("check,value,bound,status\n");
        for r in &self.rows {
            let status = if r.pass { "pass" } else { "fail" };
            s.push_str(&format!("{},{},{},{status}\n", r.name, g17(r.value), g17(r.bound)));
        }
        s
    }
}

fn oscillator_spec(family: &MatrixFamily) -> Option<OscSpec> {
    match family.kind() {
        FamilyKind::Builtin(b) if b.name == BuiltinName::Oscillator2d => Some(OscSpec {
            k: b.params["k"],
            n_max: b.params["N"] as usize,
            lambda_ref: b.params["lambda_ref"],
        }),
        _ => None,
    }
}

fn default_range(family: &MatrixFamily) -> (f64, f64) {
    if let Some(spec) = oscillator_spec(family) {
        return (0.5 * spec.k, 2.0 * spec.k);
    }
    match family.builtin_name() {
        Some(BuiltinName::TwoLevelHermitian) => (-1.0, 3.0),
        Some(BuiltinName::TwoLevelPt) => (-2.0, 2.0),
        _ => (-1.0, 1.0),
    }
}

/// Evenly spaced interior sample points of a grid.
fn samples(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|i| lo + (hi - lo) * i as f64 / (count + 1) as f64).collect()
}

pub fn run(argv: &[String], a: CheckArgs, settings: &Settings) -> Result<(), CliError> {
    let family = load_model(&a.model)?;
    let (lo, hi) = match &a.range {
        Some(r) => parse_range(r)?,
        None => default_range(&family),
    };
    if a.steps < 2 {
        return Err(CliError::Usage(format!("--steps must be at least 2, got {}", a.steps)));
    }
    // Bounds follow the tolerance scale applied to the settings.
    let scale = settings.cluster_tol / Settings::default().cluster_tol;
    let mut suite = Suite::default();
    if family.hermitian_on_real_axis() {
        hermitian_suite(&family, lo, hi, a.steps, scale, settings, &mut suite)?;
    } else {
        general_suite(&family, lo, hi, a.steps, scale, settings, &mut suite)?;
    }
    let failed: Vec<&str> = suite.rows.iter().filter(|r| !r.pass).map(|r| r.name).collect();
    let doc = json!({
        "model": family.label(),
        "range": [lo, hi],
        "steps": a.steps,
        "passed": failed.is_empty(),
        "violations": failed,
    });
    emit(argv, &suite.to_csv(), Secondary::Document(doc), &a.out)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violated)
    }
}

fn hermitian_suite(
    family: &MatrixFamily,
    lo: f64,
    hi: f64,
    steps: usize,
    scale: f64,
    settings: &Settings,
    suite: &mut Suite,
) -> Result<(), CliError> {
    let n = family.dim();
    let points = samples(lo, hi, 5);

    let mut residual: f64 = 0.0;
    let mut orthonormality: f64 = 0.0;
    let mut symmetry: f64 = 0.0;
    for &lam in &points {
        let h = family.evaluate_real(lam)?;
        let s = family.spectrum_real(lam, settings)?;
        residual = residual.max(s.max_residual(&h) / (1.0 + linalg::frobenius(&h)));
        let vs: Vec<Vec<C64>> = (0..n).map(|j| s.vector(j)).collect();
        let dnorm = linalg::frobenius(&family.derivative_real(lam)?);
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                orthonormality = orthonormality.max((linalg::inner(&vs[i], &vs[j]) - expect).norm());
                if j > i {
                    let mn = hf_element(family, &s, i, j)?;
                    let nm = hf_element(family, &s, j, i)?;
                    symmetry = symmetry.max((mn - nm.conj()).norm() / (1.0 + dnorm));
                }
            }
        }
    }
    suite.at_most("eigen_residual", residual, 1e-12 * scale);
    suite.at_most("orthonormality", orthonormality, 1e-12 * scale);
    suite.at_most("hf_hermitian_symmetry", symmetry, 1e-12 * scale);

    let flow = sweep(family, lo, hi, steps, settings)?;
    let mut slope_excess: f64 = 0.0;
    for i in 0..flow.grid.len() - 1 {
        let dl = (flow.grid[i + 1] - flow.grid[i]).abs();
        for b in 0..n {
            let de = (flow.energies[i + 1][b] - flow.energies[i][b]).abs();
            slope_excess = slope_excess.max(de / (flow.slope_bound * dl + f64::MIN_POSITIVE));
        }
    }
    suite.at_most("branch_slope_ratio", slope_excess, 1.0 + 1e-9 * scale);

    let events = detect_events(&flow, family, settings)?;
    let mut slope_mismatch: f64 = 0.0;
    let mut overlap: f64 = 0.0;
    for e in &events {
        match e.classification {
            Classification::Avoided => {
                let (s0, s1) = e.slopes;
                slope_mismatch = slope_mismatch.max((s0 - s1).abs() / (1.0 + s0.abs() + s1.abs()));
            }
            Classification::Crossing => {
                overlap = overlap.max(crossing_orthogonality_check(family, e, &[1e-2, 1e-4, 1e-6], settings)?.max_overlap());
            }
        }
    }
    suite.at_most("avoided_crossing_slope_match", slope_mismatch, 1e-6 * scale);
    suite.at_most("crossing_limit_state_overlap", overlap, 1e-12 * scale);

    let mut offdiag: f64 = 0.0;
    let mut phase: f64 = 0.0;
    let mut tested = 0usize;
    let scrambled = [settings.clone().with_phase_scramble(1), settings.clone().with_phase_scramble(2)];
    for &lam in &points {
        let s = family.spectrum_real(lam, settings)?;
        // Each level against its most strongly coupled partner that is far
        // enough away for the difference stencil.
        for m in 0..n {
            let mut partners = Vec::with_capacity(n - 1);
            for j in (0..n).filter(|&j| j != m) {
                partners.push((hf_element(family, &s, m, j)?.norm(), j));
            }
            partners.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for &(_, partner) in &partners {
                match hf_offdiag_residual(family, lam, m, partner, None, settings) {
                    Ok(r) => {
                        tested += 1;
                        offdiag = offdiag.max(r.residual);
                        if lam == points[0] {
                            for st in &scrambled {
                                let other = hf_offdiag_residual(family, lam, m, partner, None, st)?;
                                phase = phase.max((other.lhs - r.lhs).norm() / (1.0 + r.lhs.norm()));
                            }
                        }
                        break;
                    }
                    Err(LevelflowError::Precondition(_)) => continue,
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    if tested == 0 {
        offdiag = f64::NAN;
    }
    suite.at_most("hf_offdiagonal_residual", offdiag, 1e-7 * scale);
    suite.at_most("phase_convention_invariance", phase, 1e-12 * scale);

    if n >= 2 {
        let mut product: f64 = 0.0;
        for &lam in &points {
            match product_identity_check(family, lam, 0, 1, 1, None, settings) {
                Ok(ds) => product = ds.iter().map(|d| d.value.norm()).fold(product, f64::max),
                Err(LevelflowError::Precondition(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }
        suite.at_most("product_derivatives", product, 1e-8 * scale);
    }

    let mid = 0.5 * (lo + hi);
    // Off-centre so that symmetric examples do not make the difference exact.
    let r = diagonal_hf_convergence(family, lo + 0.37 * (hi - lo), 0, &[4e-2, 2e-2, 1e-2, 5e-3, 2.5e-3], settings)?;
    let worst = r.errors.iter().map(|e| e.1).fold(0.0, f64::max);
    if worst <= 1e-11 * (1.0 + r.hf_slope.abs()) {
        // Straight branch: the difference quotient is already exact.
        suite.at_most("diagonal_hf_exact_branch", worst, 1e-11 * (1.0 + r.hf_slope.abs()));
    } else {
        suite.at_most("diagonal_hf_order_deviation", (r.fitted_order - 2.0).abs(), 0.1);
    }

    if let Some(spec) = oscillator_spec(family) {
        let rule = oscillator::selection_rule(&spec, mid, settings)?;
        suite.at_most("selection_rule_cross_symmetry", rule.max_cross_symmetry, 1e-12 * scale);
        if spec.lambda_ref == spec.k {
            let table = oscillator::degeneracy_table(&spec, spec.n_max, settings)?;
            let wrong = table.iter().filter(|r| r.expected != r.numeric).count();
            suite.at_most("iso_degeneracy_mismatches", wrong as f64, 0.0);
        }
    }
    Ok(())
}

fn general_suite(
    family: &MatrixFamily,
    lo: f64,
    hi: f64,
    steps: usize,
    scale: f64,
    settings: &Settings,
    suite: &mut Suite,
) -> Result<(), CliError> {
    let grid = levelflow::spectral_flow::linear_grid(lo, hi, steps);
    let conjugate_closed = family.builtin_name() == Some(BuiltinName::TwoLevelPt);
    let mut residual: f64 = 0.0;
    let mut trace: f64 = 0.0;
    let mut conjugate: f64 = 0.0;
    for &g in &grid {
        let h = family.evaluate_real(g)?;
        let norm = linalg::frobenius(&h);
        let s = eig_general(&h, settings)?;
        if !s.defective {
            residual = residual.max(s.max_residual(&h) / (1.0 + norm));
        }
        let sum: C64 = s.eigenvalues.iter().sum();
        trace = trace.max((sum - h.trace()).norm() / (1.0 + norm));
        if conjugate_closed {
            for e in &s.eigenvalues {
                let d = s.eigenvalues.iter().map(|f| (e.conj() - f).norm()).fold(f64::INFINITY, f64::min);
                conjugate = conjugate.max(d / (1.0 + norm));
            }
        }
    }
    suite.at_most("eigen_residual", residual, 1e-10 * scale);
    suite.at_most("eigenvalue_sum_trace", trace, 1e-10 * scale);
    if conjugate_closed {
        // Coalescing pairs split like √ε, so closure is only good to √eps there.
        suite.at_most("pt_conjugate_closure", conjugate, 1e-7 * scale);
        let pt = pt_classify_sweep(family, lo, hi, steps, None, settings)?;
        let mut err: f64 = 0.0;
        for (i, &b) in pt.boundaries.iter().enumerate() {
            let z = levelflow::find_exceptional_point(family, C64::new(b, 0.0), None, settings)?;
            err = err.max((z.z_star - C64::new(b, 0.0)).norm());
            if i > 0 && (b - pt.boundaries[i - 1]).abs() < 1e-9 {
                err = f64::INFINITY;
            }
        }
        suite.at_most("pt_boundary_is_exceptional_point", err, 1e-8 * scale);
    }
    Ok(())
}
