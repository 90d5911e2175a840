//! Closed-form Green updates for perturbations `H = F + sum_i P_{sigma_i}` of
//! an elliptic operator, and the Schur-complement block pseudoinverse.
//!
//! With `g_i = G(sigma_i)`, `c_i = <sigma_i, omega>` and `b = (I + A)^{-1}`,
//! `A_ij = <G(sigma_j), sigma_i>`, the pseudoinverse of `H` is
//!
//! ```text
//! H^+ = G + h P_omega - sum_i h_i (P_{g_i,omega} + P_{omega,g_i}) - sum_ij h_ij P_{g_i,g_j}
//! h    = (lambda + sum_rs b_rs c_r c_s)^+
//! h_i  = h sum_r b_ir c_r
//! h_ij = b_ij - h (sum_r b_ir c_r)(sum_r b_jr c_r)
//! ```
//!
//! where the inner sums only run over the non-orthogonal members. The cross
//! term is symmetric; `H` is symmetric and so is its pseudoinverse.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::funspace::{check_len, inner_product, max_abs_diff, FunctionOnV, KernelOnV, Weight};
use crate::green::{pinv_oracle, GreenOperator};
use crate::tol::{scalar_pinv, COND_LIMIT, ORTH_TOL, SCALAR_ZERO_TOL};

/// Members within this factor of [`ORTH_TOL`] are classified non-orthogonal
/// but logged.
const BORDERLINE_FACTOR: f64 = 100.0;

/// Ordered perturbation members: the `m` members not orthogonal to `omega`
/// come first, followed by the `ell` orthogonal ones.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationFamily {
    sigmas: Vec<FunctionOnV>,
    omega_products: Vec<f64>,
    m: usize,
    /// `permutation[k]` is the caller's index of the member stored at `k`.
    permutation: Vec<usize>,
}

impl PerturbationFamily {
    /// Classifies each member by `|<sigma, omega>| > ORTH_TOL` and moves the
    /// non-orthogonal ones to the front, keeping relative order.
    pub fn new(sigmas: Vec<FunctionOnV>, omega: &Weight) -> Result<Self> {
        let mut tagged = Vec::with_capacity(sigmas.len());
        for (i, s) in sigmas.into_iter().enumerate() {
            let c = inner_product(&s, omega.as_function())?;
            let non_orth = c.abs() > ORTH_TOL;
            if non_orth && c.abs() <= BORDERLINE_FACTOR * ORTH_TOL {
                warn!("perturbation member {i} has borderline <sigma, omega> = {c:e}; treated as non-orthogonal");
            }
            tagged.push((i, s, c, non_orth));
        }
        tagged.sort_by_key(|t| !t.3);
        let m = tagged.iter().filter(|t| t.3).count();
        let mut fam = Self {
            sigmas: Vec::new(),
            omega_products: Vec::new(),
            m,
            permutation: Vec::new(),
        };
        for (i, s, c, _) in tagged {
            fam.permutation.push(i);
            fam.sigmas.push(s);
            fam.omega_products.push(c);
        }
        Ok(fam)
    }

    pub fn empty() -> Self {
        Self {
            sigmas: Vec::new(),
            omega_products: Vec::new(),
            m: 0,
            permutation: Vec::new(),
        }
    }

    pub fn sigmas(&self) -> &[FunctionOnV] {
        &self.sigmas
    }

    /// `<sigma_i, omega>` in stored order.
    pub fn omega_products(&self) -> &[f64] {
        &self.omega_products
    }

    /// Number of members not orthogonal to `omega`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of members orthogonal to `omega`.
    pub fn ell(&self) -> usize {
        self.sigmas.len() - self.m
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }
}

/// Coefficients `b, h, h_i, h_ij` of the multi-rank update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateCoefficients {
    pub b: DMatrix<f64>,
    pub h: f64,
    pub h_i: DVector<f64>,
    pub h_ij: DMatrix<f64>,
    /// Spectral condition number of `I + A`.
    pub condition: f64,
    /// `max |(I + A) b - I|`.
    pub inversion_residual: f64,
}

/// Columns `G(sigma_k)`.
pub fn green_images(g: &GreenOperator, sigmas: &[FunctionOnV]) -> Result<DMatrix<f64>> {
    let n = g.order();
    let mut out = DMatrix::zeros(n, sigmas.len());
    for (k, s) in sigmas.iter().enumerate() {
        check_len(n, s.len())?;
        out.set_column(k, &(g.kernel.as_matrix() * s.as_vector()));
    }
    Ok(out)
}

/// `A_ij = <G(sigma_j), sigma_i>`.
pub fn gram_matrix(g: &GreenOperator, sigmas: &[FunctionOnV]) -> Result<DMatrix<f64>> {
    let images = green_images(g, sigmas)?;
    let k = sigmas.len();
    Ok(DMatrix::from_fn(k, k, |i, j| {
        sigmas[i].as_vector().dot(&images.column(j))
    }))
}

/// Inverts the symmetric positive definite `I + A`, reporting its condition.
pub fn invert_identity_plus(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64, f64)> {
    let k = a.nrows();
    if k == 0 {
        return Ok((DMatrix::zeros(0, 0), 1.0, 0.0));
    }
    let ia = DMatrix::identity(k, k) + a;
    let sym = (&ia + ia.transpose()) * 0.5;
    let ev = SymmetricEigen::new(sym.clone()).eigenvalues;
    let (lo, hi) = (ev.min(), ev.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= COND_LIMIT) {
        return Err(Error::IllConditioned { condition });
    }
    let b = Cholesky::new(sym)
        .ok_or(Error::IllConditioned { condition })?
        .inverse();
    let residual = max_abs_diff(&(&ia * &b), &DMatrix::identity(k, k));
    Ok((b, condition, residual))
}

/// Coefficients from a precomputed `b`, the products `c_r = <sigma_r, omega>`
/// and the count `m` of leading non-orthogonal members.
pub fn coefficients_from_b(
    b: &DMatrix<f64>,
    c: &[f64],
    m: usize,
    lambda: f64,
) -> UpdateCoefficients {
    let k = b.nrows();
    let d = DVector::from_fn(k, |i, _| (0..m).map(|r| b[(i, r)] * c[r]).sum::<f64>());
    let kappa: f64 = (0..m).map(|r| c[r] * d[r]).sum();
    let h = scalar_pinv(lambda + kappa);
    let h_i = &d * h;
    let h_ij = b - (&d * d.transpose()) * h;
    UpdateCoefficients {
        b: b.clone(),
        h,
        h_i,
        h_ij,
        condition: 1.0,
        inversion_residual: 0.0,
    }
}

pub fn build_coefficients(
    g: &GreenOperator,
    fam: &PerturbationFamily,
) -> Result<UpdateCoefficients> {
    let a = gram_matrix(g, fam.sigmas())?;
    let (b, condition, inversion_residual) = invert_identity_plus(&a)?;
    let mut coeffs = coefficients_from_b(&b, fam.omega_products(), fam.m(), g.lambda);
    coeffs.condition = condition;
    coeffs.inversion_residual = inversion_residual;
    Ok(coeffs)
}

/// Assembles `G + h P_omega - (u ⊗ omega + omega ⊗ u) - Gamma h_ij Gamma^T`
/// with `u = Gamma h_i`, where `Gamma` holds the images `G(sigma_k)`.
pub fn apply_coefficients(
    g: &GreenOperator,
    images: &DMatrix<f64>,
    coeffs: &UpdateCoefficients,
) -> Result<KernelOnV> {
    let w = g.omega.as_vector();
    let mut x = g.kernel.as_matrix().clone();
    x.ger(coeffs.h, w, w, 1.0);
    if images.ncols() > 0 {
        let u = images * &coeffs.h_i;
        x.ger(-1.0, &u, w, 1.0);
        x.ger(-1.0, w, &u, 1.0);
        let gh = images * &coeffs.h_ij;
        x.gemm(-1.0, &gh, &images.transpose(), 1.0);
    }
    KernelOnV::new(x)
}

/// Green kernel (or inverse) of `F + P_sigma` for a single `sigma`.
///
/// When `lambda = 0` and `sigma ⊥ omega` the result is
/// `G - P_{G(sigma)} / (1 + <G(sigma), sigma>)`; otherwise `F + P_sigma` is
/// invertible and the inverse is
/// `G - [lambda P_g + c (P_{g,omega} + P_{omega,g}) - (1 + <g, sigma>) P_omega] / beta`
/// with `g = G(sigma)`, `c = <sigma, omega>` and
/// `beta = lambda (1 + <g, sigma>) + c^2`.
pub fn rank_one_update(g: &GreenOperator, sigma: &FunctionOnV) -> Result<KernelOnV> {
    let w = g.omega.as_vector();
    let c = inner_product(sigma, g.omega.as_function())?;
    let gs = g.kernel.apply(sigma)?.into_vector();
    let gamma = gs.dot(sigma.as_vector());
    let mut x = g.kernel.as_matrix().clone();
    if g.lambda.abs() <= SCALAR_ZERO_TOL && c.abs() <= ORTH_TOL {
        x.ger(-1.0 / (1.0 + gamma), &gs, &gs, 1.0);
    } else {
        let beta = g.lambda * (1.0 + gamma) + c * c;
        if beta <= SCALAR_ZERO_TOL {
            return Err(Error::SingularPerturbation { beta });
        }
        x.ger(-g.lambda / beta, &gs, &gs, 1.0);
        x.ger(-c / beta, &gs, w, 1.0);
        x.ger(-c / beta, w, &gs, 1.0);
        x.ger((1.0 + gamma) / beta, w, w, 1.0);
    }
    KernelOnV::new(x)
}

/// Pseudoinverse of `H = F + sum_i P_{sigma_i}` from the Green kernel of `F`.
pub fn multi_rank_update(g: &GreenOperator, fam: &PerturbationFamily) -> Result<KernelOnV> {
    let coeffs = build_coefficients(g, fam)?;
    let images = green_images(g, fam.sigmas())?;
    apply_coefficients(g, &images, &coeffs)
}

/// `L_q + sum_i sigma_i ⊗ sigma_i`.
pub fn assemble_perturbed(lq: &KernelOnV, fam: &PerturbationFamily) -> Result<KernelOnV> {
    let mut h = lq.as_matrix().clone();
    for s in fam.sigmas() {
        check_len(lq.order(), s.len())?;
        h.ger(1.0, s.as_vector(), s.as_vector(), 1.0);
    }
    KernelOnV::new(h)
}

/// Block formula for `[[A, B], [B^T, D]]` with invertible `D`:
///
/// ```text
/// [[ S^+,               -S^+ B D^-1                   ],
///  [ -D^-1 B^T S^+,     D^-1 + D^-1 B^T S^+ B D^-1     ]],   S = A - B D^-1 B^T
/// ```
///
/// `S^+` comes from [`pinv_oracle`]. When `S` is singular the result is a
/// symmetric {1,2}-inverse of the block matrix, not necessarily its
/// Moore–Penrose inverse.
pub fn schur_block_pinv(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    schur_block_pinv_with(a, b, d, None)
}

/// [`schur_block_pinv`] with an optional precomputed `S^+`.
pub fn schur_block_pinv_with(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    d: &DMatrix<f64>,
    s_pinv: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    let (n, m) = (a.nrows(), d.nrows());
    check_len(n, a.ncols())?;
    check_len(m, d.ncols())?;
    check_len(n, b.nrows())?;
    check_len(m, b.ncols())?;

    let sv = d.clone().singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if m > 0 && !(lo > 0.0 && hi / lo <= COND_LIMIT) {
        return Err(Error::SingularBlock);
    }
    let d_inv = d.clone().try_inverse().ok_or(Error::SingularBlock)?;

    let bd = b * &d_inv;
    let sp = match s_pinv {
        Some(sp) => {
            check_len(n, sp.nrows())?;
            check_len(n, sp.ncols())?;
            sp.clone()
        }
        None => {
            let s = a - &bd * b.transpose();
            pinv_oracle(&KernelOnV::new(s)?)?.into_matrix()
        }
    };

    let top_right = -(&sp * &bd);
    let bottom_right = &d_inv + bd.transpose() * &sp * &bd;
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(&sp);
    out.view_mut((0, n), (n, m)).copy_from(&top_right);
    out.view_mut((n, 0), (m, n))
        .copy_from(&top_right.transpose());
    out.view_mut((n, n), (m, m)).copy_from(&bottom_right);
    Ok(out)
}
