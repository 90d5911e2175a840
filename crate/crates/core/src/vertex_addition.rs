//! Closed-form pseudoinverse of the Schrödinger matrix after attaching a new
//! vertex `x'` to anchors `x_1..x_m` of a network with known Green kernel.
//!
//! With `rho_i = sqrt(a_i omega(x_i) omega(x'))`, the new matrix has the block
//! form `[[H, -s], [-s^T, alpha]]` where `H = L_q + sum_i P_{sigma_i}`,
//! `sigma_i = (rho_i / omega(x_i)) eps_{x_i}`, `s = sum_i a_i eps_{x_i}` and
//! `alpha = lambda + sum_i rho_i^2 / omega(x')^2`. The Schur complement
//! `S = H - s ⊗ s / alpha` is `L_q` perturbed by the `m(m+1)/2` functions of
//! the [`PiFamily`], so its pseudoinverse follows from the multi-rank update
//! and the block inverse follows from `S^+`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::funspace::{
    check_len, max_abs_diff, FunctionOnV, KernelOnV, VertexId, VertexSet, Weight,
};
use crate::green::GreenOperator;
use crate::network::{schrodinger_matrix, validate_network, NetworkSpec};
use crate::perturbation::{apply_coefficients, invert_identity_plus, UpdateCoefficients};
use crate::tol::{scalar_pinv, EQ_TOL, SCALAR_ZERO_TOL};

/// A new vertex, its weight value and its anchor edges.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexAttachment {
    pub new_vertex: String,
    /// `omega(x')`, before the weight is renormalized.
    pub new_weight: f64,
    /// `(x_i, a_i)`: anchor label and conductance of the edge `x_i -- x'`.
    pub anchors: Vec<(String, f64)>,
}

impl VertexAttachment {
    /// Parses `"x1:a1,x2:a2,..."`.
    pub fn parse(new_vertex: &str, new_weight: f64, spec: &str) -> Result<Self> {
        let mut anchors = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (label, c) = part.rsplit_once(':').ok_or_else(|| {
                Error::Parse(format!(
                    "anchor `{part}` is not of the form label:conductance"
                ))
            })?;
            let c: f64 = c
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad conductance in `{part}`")))?;
            anchors.push((label.trim().to_owned(), c));
        }
        Ok(Self {
            new_vertex: new_vertex.to_owned(),
            new_weight,
            anchors,
        })
    }
}

/// Quantities derived from an attachment.
#[derive(Debug, Clone, PartialEq)]
pub struct AttachmentDerived {
    /// Anchor positions `x_i` in the original ordering.
    pub anchors: Vec<usize>,
    /// Conductances `a_i`.
    pub conductances: Vec<f64>,
    /// `omega(x')`.
    pub new_weight: f64,
    /// `omega(x_i)`.
    pub anchor_weights: Vec<f64>,
    pub rho: Vec<f64>,
    pub sigma_i: Vec<FunctionOnV>,
    /// `sum_i a_i eps_{x_i}`; also the column `s` of the block form.
    pub sigma: FunctionOnV,
    pub alpha: f64,
    pub lambda: f64,
    pub omega_prime: Weight,
}

impl AttachmentDerived {
    pub fn m(&self) -> usize {
        self.anchors.len()
    }

    /// `lambda + sum_i a_i omega(x_i) / omega(x')`, an equivalent form of `alpha`.
    pub fn alpha_from_conductances(&self) -> f64 {
        self.lambda
            + self
                .conductances
                .iter()
                .zip(&self.anchor_weights)
                .map(|(a, w)| a * w / self.new_weight)
                .sum::<f64>()
    }

    /// The block column `s`.
    pub fn s(&self) -> &FunctionOnV {
        &self.sigma
    }
}

/// `omega'(x) = omega(x) / sqrt(1 + w^2)` on `V`, and `w / sqrt(1 + w^2)` at the
/// new vertex.
pub fn extend_weight(omega: &Weight, w_new: f64) -> Result<Weight> {
    if !(w_new > 0.0) || !w_new.is_finite() {
        return Err(Error::NonPositiveNewWeight(w_new));
    }
    let scale = (1.0 + w_new * w_new).sqrt();
    let mut values: Vec<f64> = omega.values().iter().map(|w| w / scale).collect();
    values.push(w_new / scale);
    Weight::new(values)
}

pub fn derive_attachment(spec: &NetworkSpec, att: &VertexAttachment) -> Result<AttachmentDerived> {
    if att.anchors.is_empty() {
        return Err(Error::EmptyAttachment);
    }
    if spec.vertices().contains(&att.new_vertex) {
        return Err(Error::ExistingVertex(att.new_vertex.clone()));
    }
    let omega_prime = extend_weight(spec.weight(), att.new_weight)?;
    let n = spec.order();
    let w_new = att.new_weight;

    let mut anchors = Vec::with_capacity(att.anchors.len());
    let mut conductances = Vec::with_capacity(att.anchors.len());
    for (label, a) in &att.anchors {
        let id = spec.vertices().id(label)?;
        if anchors.contains(&id.index) {
            return Err(Error::DuplicateAnchor(label.clone()));
        }
        if !(*a > 0.0) || !a.is_finite() {
            return Err(Error::NonPositiveConductance {
                u: label.clone(),
                v: att.new_vertex.clone(),
                c: *a,
            });
        }
        anchors.push(id.index);
        conductances.push(*a);
    }

    let anchor_weights: Vec<f64> = anchors.iter().map(|&x| spec.weight().get(x)).collect();
    let rho: Vec<f64> = conductances
        .iter()
        .zip(&anchor_weights)
        .map(|(a, w)| (a * w * w_new).sqrt())
        .collect();
    let mut sigma = DVector::zeros(n);
    let mut sigma_i = Vec::with_capacity(anchors.len());
    for (k, &x) in anchors.iter().enumerate() {
        let mut v = DVector::zeros(n);
        v[x] = rho[k] / anchor_weights[k];
        sigma_i.push(FunctionOnV::from_vector(v)?);
        sigma[x] = conductances[k];
    }
    let alpha = spec.lambda() + rho.iter().map(|r| r * r).sum::<f64>() / (w_new * w_new);

    Ok(AttachmentDerived {
        anchors,
        conductances,
        new_weight: w_new,
        anchor_weights,
        rho,
        sigma_i,
        sigma: FunctionOnV::from_vector(sigma)?,
        alpha,
        lambda: spec.lambda(),
        omega_prime,
    })
}

/// The network with the new vertex, built from scratch with weight `omega'`
/// and the same `lambda`. The new vertex is last in the ordering.
pub fn attached_network(spec: &NetworkSpec, att: &VertexAttachment) -> Result<NetworkSpec> {
    let der = derive_attachment(spec, att)?;
    let mut raw = spec.to_raw();
    raw.vertices.push(att.new_vertex.clone());
    for (label, a) in &att.anchors {
        raw.edges.push((label.clone(), att.new_vertex.clone(), *a));
    }
    raw.weight = Some(der.omega_prime.values().to_vec());
    validate_network(raw)
}

/// Blocks of the new Schrödinger matrix `[[H, -s], [-s^T, alpha]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttachedBlocks {
    pub h: KernelOnV,
    pub s: FunctionOnV,
    pub alpha: f64,
}

impl AttachedBlocks {
    pub fn assemble(&self) -> KernelOnV {
        let n = self.h.order();
        let mut out = DMatrix::zeros(n + 1, n + 1);
        out.view_mut((0, 0), (n, n)).copy_from(self.h.as_matrix());
        for i in 0..n {
            out[(i, n)] = -self.s.get(i);
            out[(n, i)] = -self.s.get(i);
        }
        out[(n, n)] = self.alpha;
        KernelOnV::new(out).expect("finite blocks")
    }
}

pub fn attached_blocks(spec: &NetworkSpec, der: &AttachmentDerived) -> Result<AttachedBlocks> {
    let mut h = schrodinger_matrix(spec).into_matrix();
    for s in &der.sigma_i {
        check_len(spec.order(), s.len())?;
        h.ger(1.0, s.as_vector(), s.as_vector(), 1.0);
    }
    Ok(AttachedBlocks {
        h: KernelOnV::new(h)?,
        s: der.sigma.clone(),
        alpha: der.alpha,
    })
}

/// Position `k = (2m - 1 - i) i / 2 + j` of the dipole member for the anchor
/// pair `1 <= i < j <= m` (all 1-based).
pub fn pair_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(1 <= i && i < j && j <= m);
    (2 * m - 1 - i) * i / 2 + j
}

/// The `m(m+1)/2` perturbations whose sum is the Schur complement's
/// perturbation of `L_q`: first `sqrt(lambda/alpha) sigma_k` for each anchor,
/// then one scaled dipole per anchor pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PiFamily {
    pub pis: Vec<FunctionOnV>,
    pub m: usize,
    /// `((i, j), k)`, all 1-based.
    pub index_table: Vec<((usize, usize), usize)>,
}

impl PiFamily {
    pub fn len(&self) -> usize {
        self.pis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pis.is_empty()
    }
}

pub fn pi_family(der: &AttachmentDerived, lambda: f64) -> PiFamily {
    let m = der.m();
    let n = der.sigma.len();
    let total = m * (m + 1) / 2;
    let scale = (lambda / der.alpha).sqrt();
    let mut pis = vec![FunctionOnV::zeros(n); total];
    for (pi, si) in pis.iter_mut().zip(&der.sigma_i) {
        *pi = si.scaled(scale);
    }
    let mut index_table = Vec::with_capacity(total - m);
    let inv_sqrt_alpha = 1.0 / der.alpha.sqrt();
    for i in 1..m {
        for j in (i + 1)..=m {
            let k = pair_index(m, i, j);
            let (xi, xj) = (der.anchors[i - 1], der.anchors[j - 1]);
            let c = inv_sqrt_alpha * der.rho[i - 1] * der.rho[j - 1] / der.new_weight;
            let mut v = DVector::zeros(n);
            v[xi] = c / der.anchor_weights[i - 1];
            v[xj] = -c / der.anchor_weights[j - 1];
            pis[k - 1] = FunctionOnV::from_vector(v).expect("finite");
            index_table.push(((i, j), k));
        }
    }
    PiFamily {
        pis,
        m,
        index_table,
    }
}

/// `max |sigma ⊗ sigma - (alpha - lambda) sum_i sigma_i ⊗ sigma_i + sum_{i<j} sigma_ij ⊗ sigma_ij|`
/// with `sigma_ij = sqrt(alpha) pi_k`.
pub fn sigma_decomposition_check(der: &AttachmentDerived, fam: &PiFamily, lambda: f64) -> f64 {
    let s = der.sigma.as_vector();
    let mut r = s * s.transpose();
    for si in &der.sigma_i {
        r.ger(-(der.alpha - lambda), si.as_vector(), si.as_vector(), 1.0);
    }
    for &(_, k) in &fam.index_table {
        let p = fam.pis[k - 1].as_vector();
        r.ger(der.alpha, p, p, 1.0);
    }
    r.amax()
}

/// `A_{k,l} = <G(pi_l), pi_k>` from kernel entries of `G` only.
pub fn pi_gram(g: &GreenOperator, der: &AttachmentDerived, fam: &PiFamily) -> DMatrix<f64> {
    let m = der.m();
    let k_total = fam.len();
    let lambda = g.lambda;
    let alpha = der.alpha;
    let rho = &der.rho;
    let wp = der.new_weight;
    // Normalized kernel G(x_a, x_b) / (omega(x_a) omega(x_b)) on anchors.
    let gn = |a: usize, b: usize| {
        g.kernel.get(der.anchors[a], der.anchors[b])
            / (der.anchor_weights[a] * der.anchor_weights[b])
    };

    let mut out = DMatrix::zeros(k_total, k_total);
    for k in 0..m {
        for l in 0..m {
            out[(k, l)] = lambda * rho[k] * rho[l] / alpha * gn(k, l);
        }
    }
    for k in 0..m {
        for &((i, j), l) in &fam.index_table {
            let (i, j) = (i - 1, j - 1);
            let v = lambda.sqrt() * rho[k] * rho[i] * rho[j] / (alpha * wp) * (gn(k, i) - gn(k, j));
            out[(k, l - 1)] = v;
            out[(l - 1, k)] = v;
        }
    }
    for &((r, s), k) in &fam.index_table {
        for &((i, j), l) in &fam.index_table {
            let (r, s, i, j) = (r - 1, s - 1, i - 1, j - 1);
            out[(k - 1, l - 1)] = rho[i] * rho[j] * rho[r] * rho[s] / (alpha * wp * wp)
                * (gn(i, r) - gn(i, s) - gn(j, r) + gn(j, s));
        }
    }
    out
}

/// Coefficients specialized to the pi family, using
/// `<pi_r, omega> = sqrt(lambda/alpha) rho_r`:
///
/// ```text
/// h    = lambda^+ alpha / (alpha + sum_rs b_rs rho_r rho_s)
/// h_i  = h sqrt(lambda/alpha) sum_r b_ir rho_r
/// h_ij = b_ij - (h lambda / alpha)(sum_r b_ir rho_r)(sum_s b_js rho_s)
/// ```
pub fn pi_coefficients(
    der: &AttachmentDerived,
    b: &DMatrix<f64>,
    lambda: f64,
) -> UpdateCoefficients {
    let m = der.m();
    let k = b.nrows();
    let alpha = der.alpha;
    let d = DVector::from_fn(k, |i, _| {
        (0..m).map(|r| b[(i, r)] * der.rho[r]).sum::<f64>()
    });
    let weighted: f64 = (0..m).map(|r| der.rho[r] * d[r]).sum();
    let h = scalar_pinv(lambda) * alpha / (alpha + weighted);
    let h_i = &d * (h * (lambda / alpha).sqrt());
    let h_ij = b - (&d * d.transpose()) * (h * lambda / alpha);
    UpdateCoefficients {
        b: b.clone(),
        h,
        h_i,
        h_ij,
        condition: 1.0,
        inversion_residual: 0.0,
    }
}

/// `G(pi_k)` as columns, reading only the columns of `G` on each support.
fn sparse_green_images(g: &GreenOperator, fam: &PiFamily) -> DMatrix<f64> {
    let n = g.order();
    let kernel = g.kernel.as_matrix();
    let mut out = DMatrix::zeros(n, fam.len());
    for (k, p) in fam.pis.iter().enumerate() {
        for (x, &v) in p.values().iter().enumerate() {
            if v != 0.0 {
                out.column_mut(k).axpy(v, &kernel.column(x), 1.0);
            }
        }
    }
    out
}

/// `[[M, M s / alpha], [s^T M / alpha, 1/alpha + s^T M s / alpha^2]]`.
///
/// This is the Schur block inverse of `[[H, -s], [-s^T, alpha]]` with
/// `S^+ = M`; the off-diagonal sign follows from the `-s` blocks.
pub fn assemble_vertex_blocks(m_block: &DMatrix<f64>, der: &AttachmentDerived) -> DMatrix<f64> {
    let n = m_block.nrows();
    let alpha = der.alpha;
    let mut ms = DVector::zeros(n);
    for (&x, &a) in der.anchors.iter().zip(&der.conductances) {
        ms.axpy(a, &m_block.column(x), 1.0);
    }
    let sms: f64 = der
        .anchors
        .iter()
        .zip(&der.conductances)
        .map(|(&x, &a)| a * ms[x])
        .sum();
    let mut out = DMatrix::zeros(n + 1, n + 1);
    out.view_mut((0, 0), (n, n)).copy_from(m_block);
    for i in 0..n {
        out[(i, n)] = ms[i] / alpha;
        out[(n, i)] = ms[i] / alpha;
    }
    out[(n, n)] = 1.0 / alpha + sms / (alpha * alpha);
    out
}

/// `(I - P_{omega'}) X (I - P_{omega'})`, in `O(n^2)`.
pub fn mp_kernel_projection(x: &KernelOnV, omega_prime: &Weight) -> Result<KernelOnV> {
    check_len(x.order(), omega_prime.len())?;
    let w = omega_prime.as_vector();
    let a = x.as_matrix();
    let col = a * w;
    let row = a.tr_mul(w);
    let t = w.dot(&col);
    let mut y = a.clone();
    y.ger(-1.0, w, &row, 1.0);
    y.ger(-1.0, &col, w, 1.0);
    y.ger(t, w, w, 1.0);
    KernelOnV::new(y)
}

/// Output of [`added_vertex_pinv`].
#[derive(Debug, Clone, PartialEq)]
pub struct AddedVertexPinv {
    /// The `(n+1) x (n+1)` result, new vertex last.
    pub kernel: KernelOnV,
    pub order: VertexSet,
    pub derived: AttachmentDerived,
    pub coefficients: UpdateCoefficients,
}

fn check_green_matches(g: &GreenOperator, spec: &NetworkSpec) -> Result<()> {
    check_len(spec.order(), g.order())?;
    if (g.lambda - spec.lambda()).abs() > EQ_TOL {
        return Err(Error::Spectral(format!(
            "Green operator has lambda {} but the network has lambda {}",
            g.lambda,
            spec.lambda()
        )));
    }
    Ok(())
}

/// Pseudoinverse of the new Schrödinger matrix from the Green kernel `g` of
/// the original network.
///
/// For `lambda > 0` the result is the inverse. For `lambda = 0` the block
/// formula only yields a {1,2}-inverse; `mp_correct` projects it onto the
/// complement of `omega'`, which gives the Moore–Penrose inverse.
pub fn added_vertex_pinv(
    g: &GreenOperator,
    spec: &NetworkSpec,
    att: &VertexAttachment,
    mp_correct: bool,
) -> Result<AddedVertexPinv> {
    check_green_matches(g, spec)?;
    let der = derive_attachment(spec, att)?;
    let lambda = spec.lambda();
    let fam = pi_family(&der, lambda);
    let a = pi_gram(g, &der, &fam);
    let (b, condition, inversion_residual) = invert_identity_plus(&a)?;
    let mut coefficients = pi_coefficients(&der, &b, lambda);
    coefficients.condition = condition;
    coefficients.inversion_residual = inversion_residual;

    let images = sparse_green_images(g, &fam);
    let m_block = apply_coefficients(g, &images, &coefficients)?;
    let mut kernel = KernelOnV::new(assemble_vertex_blocks(m_block.as_matrix(), &der))?;
    if mp_correct && lambda.abs() <= SCALAR_ZERO_TOL {
        kernel = mp_kernel_projection(&kernel, &der.omega_prime)?;
    }
    let order = spec.vertices().with_appended(&att.new_vertex)?;
    Ok(AddedVertexPinv {
        kernel,
        order,
        derived: der,
        coefficients,
    })
}

/// Pendant-vertex closed form next to the general update.
#[derive(Debug, Clone, PartialEq)]
pub struct PendantReport {
    pub kernel: KernelOnV,
    /// [`added_vertex_pinv`] without the projection, for the same attachment.
    pub reference: KernelOnV,
    pub max_deviation: f64,
}

/// A label not present in `vertices`.
pub fn fresh_label(vertices: &VertexSet) -> String {
    let mut label = String::from("new");
    let mut k = 1;
    while vertices.contains(&label) {
        label = format!("new_{k}");
        k += 1;
    }
    label
}

/// Single-anchor closed form:
///
/// ```text
/// M = G - (1/h) [lambda P_{G(sigma)} + rho_x (P_{G(sigma),omega} + P_{omega,G(sigma)})
///                - (1 + (alpha - lambda) G(x,x)) P_omega]
/// h = lambda [1 + (alpha - lambda) G(x,x)] + rho_x^2
/// ```
///
/// read with `sigma = sigma_1` and `rho_x = sqrt(lambda/alpha) rho_1`, and with
/// `1/h` taken as the scalar pseudo-inverse. The result is compared against
/// [`added_vertex_pinv`]; any disagreement is reported, not corrected.
pub fn pendant_pinv(
    g: &GreenOperator,
    spec: &NetworkSpec,
    x: &VertexId,
    a: f64,
    w_new: f64,
) -> Result<PendantReport> {
    check_green_matches(g, spec)?;
    let att = VertexAttachment {
        new_vertex: fresh_label(spec.vertices()),
        new_weight: w_new,
        anchors: vec![(x.label.clone(), a)],
    };
    let der = derive_attachment(spec, &att)?;
    let lambda = spec.lambda();
    let alpha = der.alpha;
    let xi = der.anchors[0];
    let gxx = g.kernel.get(xi, xi);
    let rho_x = (lambda / alpha).sqrt() * der.rho[0];
    let h = lambda * (1.0 + (alpha - lambda) * gxx) + rho_x * rho_x;
    let hinv = scalar_pinv(h);

    let w = g.omega.as_vector();
    let gs = g.kernel.as_matrix() * der.sigma_i[0].as_vector();
    let mut m_block = g.kernel.as_matrix().clone();
    m_block.ger(-hinv * lambda, &gs, &gs, 1.0);
    m_block.ger(-hinv * rho_x, &gs, w, 1.0);
    m_block.ger(-hinv * rho_x, w, &gs, 1.0);
    m_block.ger(hinv * (1.0 + (alpha - lambda) * gxx), w, w, 1.0);

    let kernel = KernelOnV::new(assemble_vertex_blocks(&m_block, &der))?;
    let reference = added_vertex_pinv(g, spec, &att, false)?.kernel;
    let max_deviation = max_abs_diff(kernel.as_matrix(), reference.as_matrix());
    Ok(PendantReport {
        kernel,
        reference,
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::{green_direct, pinv_oracle};
    use crate::network::RawNetwork;
    use crate::perturbation::gram_matrix;
    use approx::assert_abs_diff_eq;

    fn single_vertex() -> NetworkSpec {
        validate_network(RawNetwork::new(["v"]).weight(vec![1.0])).unwrap()
    }

    fn p2(lambda: f64) -> NetworkSpec {
        validate_network(
            RawNetwork::new(["a", "b"])
                .edge("a", "b", 1.0)
                .lambda(lambda),
        )
        .unwrap()
    }

    fn green(spec: &NetworkSpec) -> GreenOperator {
        green_direct(&schrodinger_matrix(spec), spec.lambda(), spec.weight()).unwrap()
    }

    fn attach(anchors: &[(&str, f64)], w: f64) -> VertexAttachment {
        VertexAttachment {
            new_vertex: "x'".into(),
            new_weight: w,
            anchors: anchors.iter().map(|(l, a)| (l.to_string(), *a)).collect(),
        }
    }

    #[test]
    fn extend_weight_examples() {
        let w = extend_weight(&Weight::uniform(2), 1.0).unwrap();
        assert_abs_diff_eq!(w.get(0), 0.5, epsilon = EQ_TOL);
        assert_abs_diff_eq!(w.get(1), 0.5, epsilon = EQ_TOL);
        assert_abs_diff_eq!(w.get(2), std::f64::consts::FRAC_1_SQRT_2, epsilon = EQ_TOL);
        assert_eq!(
            extend_weight(&Weight::uniform(2), 0.0).unwrap_err(),
            Error::NonPositiveNewWeight(0.0)
        );

        let base = Weight::normalized(vec![0.3, 1.1, 0.7]).unwrap();
        let ext = extend_weight(&base, 2.3).unwrap();
        assert!((ext.as_vector().norm_squared() - 1.0).abs() <= EQ_TOL);
        assert_abs_diff_eq!(
            ext.get(0) / ext.get(1),
            base.get(0) / base.get(1),
            epsilon = EQ_TOL
        );
    }

    #[test]
    fn derive_examples() {
        let spec = p2(0.0);
        let der = derive_attachment(&spec, &attach(&[("a", 2.0)], 1.0)).unwrap();
        assert_abs_diff_eq!(der.rho[0] * der.rho[0], 2f64.sqrt(), epsilon = EQ_TOL);
        assert_abs_diff_eq!(der.alpha, 2f64.sqrt(), epsilon = EQ_TOL);

        let der = derive_attachment(&spec, &attach(&[("a", 1.0), ("b", 1.0)], 1.0)).unwrap();
        assert_abs_diff_eq!(der.alpha, 2f64.sqrt(), epsilon = EQ_TOL);
        assert_abs_diff_eq!(der.alpha, der.alpha_from_conductances(), epsilon = EQ_TOL);

        let att = attach(&[("a", 0.7), ("b", 1.9)], 0.4);
        let d0 = derive_attachment(&spec, &att).unwrap();
        let d3 = derive_attachment(&p2(3.0), &att).unwrap();
        assert_abs_diff_eq!(d0.alpha, d3.alpha - 3.0, epsilon = EQ_TOL);
    }

    #[test]
    fn derive_errors() {
        let spec = p2(0.0);
        assert_eq!(
            derive_attachment(&spec, &attach(&[], 1.0)).unwrap_err(),
            Error::EmptyAttachment
        );
        assert!(matches!(
            derive_attachment(&spec, &attach(&[("z", 1.0)], 1.0)),
            Err(Error::UnknownVertex(_))
        ));
        assert!(matches!(
            derive_attachment(&spec, &attach(&[("a", 1.0), ("a", 2.0)], 1.0)),
            Err(Error::DuplicateAnchor(_))
        ));
        assert!(matches!(
            derive_attachment(&spec, &attach(&[("a", -1.0)], 1.0)),
            Err(Error::NonPositiveConductance { .. })
        ));
        assert!(matches!(
            derive_attachment(&spec, &attach(&[("a", 1.0)], -2.0)),
            Err(Error::NonPositiveNewWeight(_))
        ));
        let mut clash = attach(&[("a", 1.0)], 1.0);
        clash.new_vertex = "b".into();
        assert!(matches!(
            derive_attachment(&spec, &clash),
            Err(Error::ExistingVertex(_))
        ));
    }

    #[test]
    fn parse_attachment_spec() {
        let att = VertexAttachment::parse("n", 1.0, "a:1.5, b:2").unwrap();
        assert_eq!(
            att.anchors,
            vec![("a".to_string(), 1.5), ("b".to_string(), 2.0)]
        );
        assert!(matches!(
            VertexAttachment::parse("n", 1.0, "a1.5"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            VertexAttachment::parse("n", 1.0, "a:x"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn pendant_on_single_vertex_blocks() {
        let spec = single_vertex();
        let att = attach(&[("v", 1.0)], 1.0);
        let der = derive_attachment(&spec, &att).unwrap();
        let blocks = attached_blocks(&spec, &der).unwrap();
        assert_abs_diff_eq!(blocks.h.get(0, 0), 1.0, epsilon = EQ_TOL);
        assert_abs_diff_eq!(blocks.s.get(0), 1.0, epsilon = EQ_TOL);
        assert_abs_diff_eq!(blocks.alpha, 1.0, epsilon = EQ_TOL);
        let full = blocks.assemble();
        let scratch = schrodinger_matrix(&attached_network(&spec, &att).unwrap());
        assert!(full.max_abs_diff(&scratch).unwrap() <= EQ_TOL);
        let expect = KernelOnV::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        assert!(full.max_abs_diff(&expect).unwrap() <= EQ_TOL);
    }

    #[test]
    fn blocks_match_scratch_and_shift_with_lambda() {
        let att = attach(&[("a", 1.0)], 1.0);
        let spec = p2(0.0);
        let der = derive_attachment(&spec, &att).unwrap();
        let full = attached_blocks(&spec, &der).unwrap().assemble();
        let scratch = schrodinger_matrix(&attached_network(&spec, &att).unwrap());
        assert!(full.max_abs_diff(&scratch).unwrap() <= EQ_TOL);

        let spec1 = p2(1.5);
        let der1 = derive_attachment(&spec1, &att).unwrap();
        let full1 = attached_blocks(&spec1, &der1).unwrap().assemble();
        let shifted = full1.as_matrix() - DMatrix::identity(3, 3) * 1.5;
        assert!(max_abs_diff(&shifted, full.as_matrix()) <= EQ_TOL);
    }

    #[test]
    fn pair_index_examples() {
        assert_eq!(pair_index(2, 1, 2), 3);
        assert_eq!(pair_index(3, 1, 2), 4);
        assert_eq!(pair_index(3, 1, 3), 5);
        assert_eq!(pair_index(3, 2, 3), 6);
        for m in 2..9 {
            let mut seen: Vec<usize> = (1..m)
                .flat_map(|i| ((i + 1)..=m).map(move |j| pair_index(m, i, j)))
                .collect();
            seen.sort();
            assert_eq!(seen, ((m + 1)..=m * (m + 1) / 2).collect::<Vec<_>>());
        }
    }

    #[test]
    fn pi_family_zero_members_for_singular_case() {
        let spec = validate_network(
            RawNetwork::new(["a", "b", "c"])
                .edge("a", "b", 1.0)
                .edge("b", "c", 2.0),
        )
        .unwrap();
        let der =
            derive_attachment(&spec, &attach(&[("a", 1.0), ("b", 0.5), ("c", 2.0)], 0.8)).unwrap();
        let fam = pi_family(&der, 0.0);
        assert_eq!(fam.len(), 6);
        assert!(fam.pis[..3].iter().all(|p| p.max_abs() == 0.0));
        assert!(fam.pis[3..].iter().all(|p| p.max_abs() > 0.0));
        assert!(sigma_decomposition_check(&der, &fam, 0.0) <= EQ_TOL);
    }

    #[test]
    fn sigma_decomposition_single_anchor() {
        let spec = p2(0.4);
        let der = derive_attachment(&spec, &attach(&[("b", 1.7)], 0.6)).unwrap();
        let fam = pi_family(&der, 0.4);
        assert_eq!(fam.len(), 1);
        assert!(sigma_decomposition_check(&der, &fam, 0.4) <= EQ_TOL);
    }

    #[test]
    fn pi_gram_single_anchor_and_zero_rows() {
        let spec = p2(0.9);
        let g = green(&spec);
        let der = derive_attachment(&spec, &attach(&[("a", 1.3)], 0.5)).unwrap();
        let fam = pi_family(&der, 0.9);
        let a = pi_gram(&g, &der, &fam);
        let w = der.anchor_weights[0];
        let expect = 0.9 * der.rho[0] * der.rho[0] / der.alpha * g.kernel.get(0, 0) / (w * w);
        assert_abs_diff_eq!(a[(0, 0)], expect, epsilon = EQ_TOL);
        assert!(max_abs_diff(&a, &gram_matrix(&g, &fam.pis).unwrap()) <= EQ_TOL);

        let spec = p2(0.0);
        let g = green(&spec);
        let der = derive_attachment(&spec, &attach(&[("a", 1.3), ("b", 0.2)], 0.5)).unwrap();
        let fam = pi_family(&der, 0.0);
        let a = pi_gram(&g, &der, &fam);
        for k in 0..2 {
            assert!(a.row(k).amax() == 0.0 && a.column(k).amax() == 0.0);
        }
    }

    #[test]
    fn single_vertex_pendant_raw_and_corrected() {
        let spec = single_vertex();
        let g = green(&spec);
        assert_eq!(g.kernel.get(0, 0), 0.0);
        let att = attach(&[("v", 1.0)], 1.0);
        let raw = added_vertex_pinv(&g, &spec, &att, false).unwrap();
        let expect_raw = KernelOnV::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(raw.kernel.max_abs_diff(&expect_raw).unwrap() <= EQ_TOL);
        let mp = added_vertex_pinv(&g, &spec, &att, true).unwrap();
        let expect = KernelOnV::from_rows(&[vec![0.25, -0.25], vec![-0.25, 0.25]]).unwrap();
        assert!(mp.kernel.max_abs_diff(&expect).unwrap() <= EQ_TOL);
        assert_eq!(mp.order.labels(), &["v".to_string(), "x'".to_string()]);

        let pend = pendant_pinv(&g, &spec, &spec.vertices().id("v").unwrap(), 1.0, 1.0).unwrap();
        assert!(pend.kernel.max_abs_diff(&expect_raw).unwrap() <= EQ_TOL);
        assert!(pend.max_deviation <= EQ_TOL);
    }

    #[test]
    fn positive_lambda_pendant_on_p2_is_inverse() {
        let spec = p2(1.0);
        let g = green(&spec);
        let att = attach(&[("a", 1.0)], 1.0);
        let out = added_vertex_pinv(&g, &spec, &att, true).unwrap();
        let lp = schrodinger_matrix(&attached_network(&spec, &att).unwrap());
        let prod = out.kernel.as_matrix() * lp.as_matrix();
        assert!(max_abs_diff(&prod, &DMatrix::identity(3, 3)) <= 1e-9);
        let raw = added_vertex_pinv(&g, &spec, &att, false).unwrap();
        assert_eq!(raw.kernel, out.kernel);
    }

    #[test]
    fn singular_p2_pendant_matches_oracle() {
        let spec = p2(0.0);
        let g = green(&spec);
        let att = attach(&[("b", 2.0)], 0.7);
        let out = added_vertex_pinv(&g, &spec, &att, true).unwrap();
        let lp = schrodinger_matrix(&attached_network(&spec, &att).unwrap());
        let oracle = pinv_oracle(&lp).unwrap();
        assert!(out.kernel.max_abs_diff(&oracle).unwrap() <= 1e-9);

        let pend = pendant_pinv(&g, &spec, &spec.vertices().id("b").unwrap(), 2.0, 0.7).unwrap();
        let raw = added_vertex_pinv(&g, &spec, &att, false).unwrap();
        assert!(pend.kernel.max_abs_diff(&raw.kernel).unwrap() <= 1e-12);
    }

    #[test]
    fn projection_examples() {
        let x = KernelOnV::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let w = Weight::uniform(2);
        let y = mp_kernel_projection(&x, &w).unwrap();
        let expect = KernelOnV::from_rows(&[vec![0.25, -0.25], vec![-0.25, 0.25]]).unwrap();
        assert!(y.max_abs_diff(&expect).unwrap() <= EQ_TOL);
        assert!(y.apply(w.as_function()).unwrap().max_abs() <= EQ_TOL);
        let again = mp_kernel_projection(&y, &w).unwrap();
        assert!(again.max_abs_diff(&y).unwrap() <= EQ_TOL);
        assert!(matches!(
            mp_kernel_projection(&x, &Weight::uniform(3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn mismatched_green_is_rejected() {
        let spec = p2(0.0);
        let g = green(&p2(1.0));
        assert!(matches!(
            added_vertex_pinv(&g, &spec, &attach(&[("a", 1.0)], 1.0), true),
            Err(Error::Spectral(_))
        ));
    }
}
