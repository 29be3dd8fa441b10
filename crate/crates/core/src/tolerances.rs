//! Central tolerance constants used by the verification suites.
//!
//! The ladder reflects how each quantity is computed: closed-form moment
//! sums are accurate to rounding, float divided differences and Gram solves
//! accumulate a few digits, and degree-6+ work loses a little more through
//! conditioning.

/// Identities evaluated through closed-form moments on inputs of degree <= 5.
pub const IDENTITY: f64 = 1e-8;

/// Classical (zero-multiplicity) reductions, which avoid the divided
/// differences entirely.
pub const CLASSICAL: f64 = 1e-9;

/// Residual ceiling for identities on degree 6-8 inputs.
pub const IDENTITY_HIGH_DEGREE: f64 = 1e-6;

/// Dual-route integral transfers (sphere lift vs radial Beta, collapsed
/// simplex rules).
pub const TRANSFER_INTEGRAL: f64 = 1e-9;

/// Transferred-operator checks (spectral vs polynomial route, semigroup,
/// factor recovery).
pub const TRANSFER_OPERATOR: f64 = 1e-8;

/// Agreement between the closed-form localization minimum and a grid search.
pub const LOCALIZATION_GRID: f64 = 1e-6;

/// Agreement between exact-backend pairs on a polynomial probe set
/// (integer multiplicities).
pub const BACKEND_AGREEMENT: f64 = 1e-9;

/// Agreement between exact and adaptive backends for non-integer
/// multiplicities, limited by panel refinement at the weight kinks.
pub const BACKEND_AGREEMENT_ROUGH: f64 = 1e-7;

/// Sign conditions are allowed this much numerical undershoot.
pub const SIGN_FLOOR: f64 = -1e-10;

/// Hard floor on inequality margins (zero up to rounding).
pub const MARGIN_FLOOR: f64 = -1e-10;

/// Product consistency inside a report: product = localization x Dirichlet.
pub const REPORT_ARITHMETIC: f64 = 1e-12;

/// Pinned special value: the classical d = 3 coordinate-function product.
pub const PRODUCT_CASE: f64 = 1e-9;

/// Optimizer reproducibility across seeds for the same configuration.
pub const OPTIMIZER_SEED_SPREAD: f64 = 1e-4;

/// Eigenvalue-law residual for constructed harmonic bases.
pub const EIGENVALUE_LAW: f64 = 1e-8;

/// Monte-Carlo checks pass within this many standard errors.
pub const MC_SIGMA: f64 = 3.0;
