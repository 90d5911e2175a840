//! Orthogonal Green operators and the eigendecomposition pseudoinverse used to
//! check every closed-form update.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::funspace::{check_len, dipole, max_abs_diff, FunctionOnV, KernelOnV, VertexId, Weight};
use crate::tol::{PINV_RCOND, SOLVE_TOL, SYM_TOL};

/// The orthogonal Green operator `G_{lambda,omega}` of a
/// `(lambda, omega)`-elliptic operator `F`.
///
/// `G(f)` is the solution of `F(u) = f - P_omega(f)` orthogonal to `omega`;
/// in particular `G(omega) = 0` for every `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenOperator {
    pub kernel: KernelOnV,
    pub lambda: f64,
    pub omega: Weight,
}

impl GreenOperator {
    pub fn order(&self) -> usize {
        self.kernel.order()
    }

    /// Column `G(eps_x)`.
    pub fn column(&self, x: usize) -> nalgebra::DVectorView<'_, f64> {
        self.kernel.as_matrix().column(x)
    }
}

fn symmetry_scale(m: &DMatrix<f64>) -> f64 {
    m.amax().max(1.0)
}

fn require_symmetric(k: &KernelOnV) -> Result<()> {
    let deviation = k.symmetry_deviation();
    if deviation > SYM_TOL * symmetry_scale(k.as_matrix()) {
        return Err(Error::NotSymmetric { deviation });
    }
    Ok(())
}

/// Green kernel of the elliptic operator with matrix `lq`.
///
/// `lq + P_omega` is positive definite, and `Z = (lq + P_omega)^{-1} (I - P_omega)`
/// is exactly the Green kernel, so a Cholesky solve suffices. Ellipticity is
/// checked by an eigen-residual and by factoring `lq - lambda I + P_omega`,
/// which is positive definite iff `lambda` is the simple lowest eigenvalue.
pub fn green_direct(lq: &KernelOnV, lambda: f64, omega: &Weight) -> Result<GreenOperator> {
    let n = lq.order();
    check_len(n, omega.len())?;
    if !(lambda >= 0.0) {
        return Err(Error::Spectral(format!("lambda {lambda} is negative")));
    }
    require_symmetric(lq)?;
    let a = lq.as_matrix();
    let w = omega.as_vector();

    let residual = (a * w - w * lambda).amax();
    if residual > SOLVE_TOL * symmetry_scale(a) {
        return Err(Error::Spectral(format!(
            "omega is not an eigenfunction for lambda (residual {residual:e})"
        )));
    }

    let p_omega = w * w.transpose();
    let shifted = a - DMatrix::identity(n, n) * lambda + &p_omega;
    let shifted_chol = Cholesky::new(shifted)
        .ok_or_else(|| Error::Spectral("lowest eigenvalue is not simple".into()))?;

    let chol = if lambda == 0.0 {
        shifted_chol
    } else {
        Cholesky::new(a + &p_omega)
            .ok_or_else(|| Error::Spectral("operator is not positive semi-definite".into()))?
    };
    let rhs = DMatrix::identity(n, n) - p_omega;
    let z = chol.solve(&rhs);
    let z = (&z + z.transpose()) * 0.5;
    Ok(GreenOperator {
        kernel: KernelOnV::new(z)?,
        lambda,
        omega: omega.clone(),
    })
}

/// Moore–Penrose inverse of a symmetric matrix by full eigendecomposition.
///
/// Eigenvalues at or below `1e-10` times the spectral radius are treated as
/// zero.
pub fn pinv_oracle(m: &KernelOnV) -> Result<KernelOnV> {
    require_symmetric(m)?;
    let a = m.as_matrix();
    let sym = (a + a.transpose()) * 0.5;
    KernelOnV::new(symmetric_pinv(sym))
}

pub(crate) fn symmetric_pinv(sym: DMatrix<f64>) -> DMatrix<f64> {
    let n = sym.nrows();
    let eig = SymmetricEigen::new(sym);
    let radius = eig.eigenvalues.amax();
    let cutoff = PINV_RCOND * radius;
    let mut scaled = eig.eigenvectors.clone();
    for (j, &e) in eig.eigenvalues.iter().enumerate() {
        let inv = if e.abs() > cutoff && e != 0.0 {
            1.0 / e
        } else {
            0.0
        };
        scaled.column_mut(j).scale_mut(inv);
    }
    if n == 0 {
        return scaled;
    }
    scaled * eig.eigenvectors.transpose()
}

/// Entrywise deviations of the four Penrose identities
/// `[MXM - M, XMX - X, MX - (MX)^T, XM - (XM)^T]`.
pub fn penrose_deviations(m: &KernelOnV, x: &KernelOnV) -> Result<[f64; 4]> {
    check_len(m.order(), x.order())?;
    let (m, x) = (m.as_matrix(), x.as_matrix());
    let mx = m * x;
    let xm = x * m;
    Ok([
        max_abs_diff(&(&mx * m), m),
        max_abs_diff(&(&xm * x), x),
        max_abs_diff(&mx, &mx.transpose()),
        max_abs_diff(&xm, &xm.transpose()),
    ])
}

/// Ascending eigenvalues of a symmetric kernel.
pub fn sorted_eigenvalues(m: &KernelOnV) -> Vec<f64> {
    let a = m.as_matrix();
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `G(f)`.
pub fn green_apply(g: &GreenOperator, f: &FunctionOnV) -> Result<FunctionOnV> {
    g.kernel.apply(f)
}

/// Dipole quadratic form `<G(tau_xy), tau_xy>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveResistance {
    pub value: f64,
    /// Set when `lambda > 0`: the value is then a generalized resistance.
    pub generalized: bool,
}

pub fn effective_resistance(
    g: &GreenOperator,
    x: &VertexId,
    y: &VertexId,
) -> Result<EffectiveResistance> {
    let tau = dipole(x, y, &g.omega)?;
    let gt = green_apply(g, &tau)?;
    Ok(EffectiveResistance {
        value: gt.as_vector().dot(tau.as_vector()),
        generalized: g.lambda > 0.0,
    })
}

/// Half the sum of effective resistances over ordered pairs of distinct
/// vertices. Only defined for `lambda = 0`.
pub fn kirchhoff_index(g: &GreenOperator) -> Result<f64> {
    if g.lambda > 0.0 {
        return Err(Error::Unsupported(
            "Kirchhoff index requires lambda = 0".into(),
        ));
    }
    let k = g.kernel.as_matrix();
    let w = g.omega.values();
    let n = g.order();
    let mut total = 0.0;
    for x in 0..n {
        for y in (x + 1)..n {
            total += k[(x, x)] / (w[x] * w[x]) + k[(y, y)] / (w[y] * w[y])
                - 2.0 * k[(x, y)] / (w[x] * w[y]);
        }
    }
    Ok(total)
}
