//! Numerical tolerances shared by every module.

/// Algebraic identities that involve no solve.
pub const EQ_TOL: f64 = 1e-12;

/// Results that pass through a linear solve or a pseudoinverse.
pub const SOLVE_TOL: f64 = 1e-9;

/// Threshold on `|<sigma, omega>|` separating orthogonal from
/// non-orthogonal perturbation members.
pub const ORTH_TOL: f64 = 1e-10;

/// Absolute threshold below which a scalar counts as zero for the scalar
/// pseudo-inverse.
pub const SCALAR_ZERO_TOL: f64 = 1e-14;

/// Relative eigenvalue cutoff of the eigendecomposition pseudoinverse.
pub const PINV_RCOND: f64 = 1e-10;

/// Symmetry tolerance for inputs that must be symmetric.
pub const SYM_TOL: f64 = 1e-10;

/// Largest accepted condition number for small systems that must be inverted.
pub const COND_LIMIT: f64 = 1e12;

/// Environment variable overriding [`SOLVE_TOL`] in the command-line tool.
pub const TOL_ENV: &str = "GREENNET_TOL";

/// `SOLVE_TOL`, or the value of `GREENNET_TOL` when it parses as a positive float.
pub fn solve_tol_from_env() -> f64 {
    std::env::var(TOL_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|t| t.is_finite() && *t > 0.0)
        .unwrap_or(SOLVE_TOL)
}

/// Scalar pseudo-inverse: `1/t` for nonzero `t`, `0` otherwise.
pub fn scalar_pinv(t: f64) -> f64 {
    if t.abs() <= SCALAR_ZERO_TOL {
        0.0
    } else {
        1.0 / t
    }
}
