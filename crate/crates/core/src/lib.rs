//! Eigenvalue branches of parameter-dependent matrices: avoided and true
//! crossings, Hellmann-Feynman identities, the anisotropic oscillator and
//! exceptional points of non-Hermitian families.

pub mod eig;
pub mod error;
pub mod exceptional;
pub mod format;
pub mod hellmann_feynman;
pub mod linalg;
pub mod matrix_model;
pub mod minimize;
pub mod oscillator;
pub mod poly;
pub mod settings;
pub mod spectral_flow;
pub mod tracking;

pub use eig::{eig_general, eig_hermitian, Spectrum, GENERAL_MAX_DIM};
pub use error::{LevelflowError, Result};
pub use exceptional::{
    discriminant, find_exceptional_point, pt_classify_sweep, surface_scan, ExceptionalPoint, PtPhase, PtPhasePoint,
    PtSweep, SurfaceGrid,
};
pub use format::g17;
pub use hellmann_feynman::{
    hf_element, hf_offdiag_residual, overlap, product_identity_check, DerivativeEstimate, IdentityReport,
};
pub use linalg::{CMat, C64};
pub use matrix_model::{BuiltinName, MatrixFamily};
pub use oscillator::{OscSpec, OscState};
pub use settings::Settings;
pub use spectral_flow::{
    crossing_orthogonality_check, detect_events, refine_gap_minimum, sweep, sweep_directed, Classification,
    CrossingEvent, FlowResult, OrthogonalityReport,
};
