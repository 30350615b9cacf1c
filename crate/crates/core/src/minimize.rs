//! One-dimensional minimization and bracketed root finding.

use crate::error::Result;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy)]
pub struct GoldenOutcome {
    pub lo: f64,
    pub hi: f64,
    pub x: f64,
    pub fx: f64,
    /// Three best-known points (x, f) for a final parabolic step.
    pub samples: [(f64, f64); 3],
}

/// Golden-section search on [lo, hi] until the bracket is narrower than
/// `width(x)` at the current best point.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, width: impl Fn(f64) -> f64) -> Result<GoldenOutcome>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        let best = if fc < fd { c } else { d };
        if (b - a).abs() <= width(best) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let (x, fx) = if fc < fd { (c, fc) } else { (d, fd) };
    let mid = 0.5 * (a + b);
    let fm = if mid == x { fx } else { f(mid)? };
    let mut samples = [(c, fc), (d, fd), (mid, fm)];
    samples.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(GoldenOutcome { lo: a, hi: b, x, fx, samples })
}

/// Vertex of the parabola through three points, if it opens upwards.
pub fn parabolic_vertex(p: [(f64, f64); 3]) -> Option<f64> {
    let [(x0, f0), (x1, f1), (x2, f2)] = p;
    let num = (x1 - x0).powi(2) * (f1 - f2) - (x1 - x2).powi(2) * (f1 - f0);
    let den = (x1 - x0) * (f1 - f2) - (x1 - x2) * (f1 - f0);
    if den == 0.0 || !num.is_finite() || !den.is_finite() {
        return None;
    }
    // Upward-opening check: second divided difference positive.
    let curv = ((f2 - f1) / (x2 - x1) - (f1 - f0) / (x1 - x0)) / (x2 - x0);
    if !(curv > 0.0) {
        return None;
    }
    Some(x1 - 0.5 * num / den)
}

/// Root of g inside [lo, hi] where g(lo) < 0 < g(hi), by regula falsi with
/// the Illinois modification. Stops when successive iterates agree to
/// `tol(x)` or g vanishes.
pub fn bracketed_root<G>(mut g: G, lo: f64, hi: f64, g_lo: f64, g_hi: f64, tol: impl Fn(f64) -> f64) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b, mut fa, mut fb) = (lo, hi, g_lo, g_hi);
    let mut last = f64::NAN;
    let mut side = 0i8;
    for _ in 0..200 {
        let mut x = (a * fb - b * fa) / (fb - fa);
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
            if !(x > a && x < b) {
                break;
            }
        }
        let fx = g(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx < 0.0) == (fa < 0.0) {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if (x - last).abs() <= tol(x) || b - a <= tol(x) {
            return Ok(x);
        }
        last = x;
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}
