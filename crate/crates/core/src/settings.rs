//! Numerical tolerances shared by every analysis.
//!
//! All relative tolerances scale with a single multiplier that can be set
//! through the `LEVELFLOW_TOLERANCE_SCALE` environment variable.

use crate::error::{LevelflowError, Result};

pub const TOLERANCE_SCALE_ENV: &str = "LEVELFLOW_TOLERANCE_SCALE";

#[derive(Debug, Clone)]
pub struct Settings {
    /// Allowed ‖H − H†‖ / ‖H‖ for the Hermitian solver.
    pub hermitian_tol: f64,
    /// Eigenvalues closer than this (relative to ‖H‖) form a degenerate cluster.
    pub cluster_tol: f64,
    /// Residual bound ‖Hv − Ev‖ / ‖H‖ that every eigenpair must meet.
    pub residual_tol: f64,
    /// Smallest singular value of the eigenvector matrix below which a
    /// spectrum is flagged defective.
    pub defective_tol: f64,
    pub max_jacobi_sweeps: usize,
    /// Minimum |⟨v(λ_i), v(λ_{i+1})⟩| before a step is flagged.
    pub overlap_floor: f64,
    /// Relative crossing threshold; absolute value is this times (1 + max|E|).
    pub cross_tol_rel: f64,
    /// Relative first-derivative step; absolute step is this times (1 + |λ|).
    pub fd_step_rel: f64,
    /// Relative step of the fourth-order stencil used for the off-diagonal
    /// Hellmann-Feynman identity.
    pub identity_step_rel: f64,
    /// Imaginary-part threshold for PT phase classification (relative to 1 + ‖H‖).
    pub real_tol_rel: f64,
    /// Base exceptional-point tolerance on |D(z)|.
    pub ep_tol_base: f64,
    /// Diagnostic hook: multiply every eigenvector by a pseudo-random unit
    /// phase before phase fixing. Results must not depend on it.
    pub phase_scramble: Option<u64>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            hermitian_tol: 1e-12,
            cluster_tol: 1e-10,
            residual_tol: 1e-12,
            defective_tol: 1e-7,
            max_jacobi_sweeps: 100,
            overlap_floor: 0.7,
            cross_tol_rel: 1e-8,
            fd_step_rel: 1e-5,
            identity_step_rel: 1e-3,
            real_tol_rel: 1e-10,
            ep_tol_base: 1e-12,
            phase_scramble: None,
        }
    }
}

impl Settings {
    /// Defaults with every tolerance multiplied by `scale`.
    pub fn scaled(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(LevelflowError::InvalidParameter(format!(
                "tolerance scale must be a positive finite number, got {scale}"
            )));
        }
        let mut s = Settings::default();
        s.hermitian_tol *= scale;
        s.cluster_tol *= scale;
        s.residual_tol *= scale;
        s.defective_tol *= scale;
        s.cross_tol_rel *= scale;
        s.real_tol_rel *= scale;
        s.ep_tol_base *= scale;
        Ok(s)
    }

    /// Defaults, scaled by `LEVELFLOW_TOLERANCE_SCALE` when it is set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(TOLERANCE_SCALE_ENV) {
            Ok(raw) => {
                let scale: f64 = raw.trim().parse().map_err(|_| {
                    LevelflowError::InvalidParameter(format!(
                        "{TOLERANCE_SCALE_ENV}={raw:?} is not a number"
                    ))
                })?;
                Settings::scaled(scale)
            }
            Err(_) => Ok(Settings::default()),
        }
    }

    pub fn fd_step(&self, lambda: f64) -> f64 {
        self.fd_step_rel * (1.0 + lambda.abs())
    }

    pub fn identity_step(&self, lambda: f64) -> f64 {
        self.identity_step_rel * (1.0 + lambda.abs())
    }

    pub fn cross_tol(&self, max_abs_energy: f64) -> f64 {
        self.cross_tol_rel * (1.0 + max_abs_energy)
    }

    pub fn with_phase_scramble(mut self, seed: u64) -> Self {
        self.phase_scramble = Some(seed);
        self
    }
}
