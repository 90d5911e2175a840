//! Functions and kernels on a finite, ordered vertex set.
//!
//! A [`FunctionOnV`] is a dense vector aligned with the vertex ordering and a
//! [`KernelOnV`] is a dense square matrix aligned the same way. Kernels are not
//! assumed symmetric: `P_{sigma,tau}` with `sigma != tau` is not.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tol::EQ_TOL;

/// A vertex: its label and its dense position in the owning [`VertexSet`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VertexId {
    pub label: String,
    pub index: usize,
}

/// Ordered vertex labels with a label lookup table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexSet {
    labels: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl VertexSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut lookup = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if lookup.insert(label.clone(), i).is_some() {
                return Err(Error::DuplicateVertex(label.clone()));
            }
        }
        Ok(Self { labels, lookup })
    }

    /// Vertices labelled `"0"`, `"1"`, ... `n-1`.
    pub fn numbered(n: usize) -> Self {
        Self::new((0..n).map(|i| i.to_string())).expect("numeric labels are unique")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.lookup.contains_key(label)
    }

    pub fn id(&self, label: &str) -> Result<VertexId> {
        self.lookup
            .get(label)
            .map(|&index| VertexId {
                label: label.to_owned(),
                index,
            })
            .ok_or_else(|| Error::UnknownVertex(label.to_owned()))
    }

    pub fn id_at(&self, index: usize) -> Result<VertexId> {
        self.labels
            .get(index)
            .map(|label| VertexId {
                label: label.clone(),
                index,
            })
            .ok_or(Error::VertexOutOfRange {
                index,
                n: self.len(),
            })
    }

    /// A new set with `label` appended as the last vertex.
    pub fn with_appended(&self, label: &str) -> Result<Self> {
        if self.contains(label) {
            return Err(Error::ExistingVertex(label.to_owned()));
        }
        let mut labels = self.labels.clone();
        labels.push(label.to_owned());
        Self::new(labels)
    }
}

fn check_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    match values.into_iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// A real function on the vertex set.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionOnV(DVector<f64>);

impl FunctionOnV {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(values))
    }

    pub fn from_vector(values: DVector<f64>) -> Result<Self> {
        check_finite(values.iter())?;
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }
}

/// A real function on `V x V`; the matrix of an endomorphism of `C(V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelOnV(DMatrix<f64>);

impl KernelOnV {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Dimension {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        check_finite(entries.iter())?;
        Ok(Self(entries))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Number of vertices the kernel acts on.
    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.0
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    /// `K(u)(x) = sum_y K(x,y) u(y)`.
    pub fn apply(&self, u: &FunctionOnV) -> Result<FunctionOnV> {
        check_len(self.order(), u.len())?;
        Ok(FunctionOnV(&self.0 * u.as_vector()))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Largest `|K(x,y) - K(y,x)|`.
    pub fn symmetry_deviation(&self) -> f64 {
        let n = self.order();
        let mut dev = 0.0_f64;
        for j in 0..n {
            for i in (j + 1)..n {
                dev = dev.max((self.0[(i, j)] - self.0[(j, i)]).abs());
            }
        }
        dev
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn max_abs_diff(&self, other: &KernelOnV) -> Result<f64> {
        check_len(self.order(), other.order())?;
        Ok(max_abs_diff(&self.0, &other.0))
    }
}

/// Largest entrywise `|a - b|` of two equally shaped matrices.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

/// A strictly positive function with unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight(FunctionOnV);

impl Weight {
    /// Accepts `values` only if every entry is positive and the norm is 1
    /// within [`EQ_TOL`].
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let f = Self::positive(values)?;
        let norm = f.as_vector().norm();
        if (norm - 1.0).abs() > EQ_TOL {
            return Err(Error::WeightNorm { norm });
        }
        Ok(Self(f))
    }

    /// Rescales positive `values` to unit norm.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let f = Self::positive(values)?;
        let norm = f.as_vector().norm();
        Ok(Self(f.scaled(1.0 / norm)))
    }

    pub fn uniform(n: usize) -> Self {
        let v = 1.0 / (n as f64).sqrt();
        Self(FunctionOnV(DVector::from_element(n, v)))
    }

    fn positive(values: Vec<f64>) -> Result<FunctionOnV> {
        if values.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        let f = FunctionOnV::new(values)?;
        if let Some((index, &value)) = f.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
            return Err(Error::NonPositiveWeight { index, value });
        }
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0.get(i)
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn as_function(&self) -> &FunctionOnV {
        &self.0
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        self.0.as_vector()
    }
}

/// `<u, v> = sum_x u(x) v(x)`.
pub fn inner_product(u: &FunctionOnV, v: &FunctionOnV) -> Result<f64> {
    check_len(u.len(), v.len())?;
    Ok(u.as_vector().dot(v.as_vector()))
}

/// The Dirac function at `x` on `n` vertices.
pub fn dirac(x: &VertexId, n: usize) -> Result<FunctionOnV> {
    if x.index >= n {
        return Err(Error::VertexOutOfRange { index: x.index, n });
    }
    let mut v = DVector::zeros(n);
    v[x.index] = 1.0;
    Ok(FunctionOnV(v))
}

/// `P_{sigma,tau}(u) = <tau, u> sigma`.
pub fn projector_apply(
    sigma: &FunctionOnV,
    tau: &FunctionOnV,
    u: &FunctionOnV,
) -> Result<FunctionOnV> {
    check_len(sigma.len(), tau.len())?;
    let t = inner_product(tau, u)?;
    Ok(sigma.scaled(t))
}

/// Kernel `sigma ⊗ tau`, i.e. `(x, y) -> sigma(x) tau(y)`.
pub fn projector_kernel(sigma: &FunctionOnV, tau: &FunctionOnV) -> Result<KernelOnV> {
    check_len(sigma.len(), tau.len())?;
    Ok(KernelOnV(sigma.as_vector() * tau.as_vector().transpose()))
}

/// The omega-dipole `eps_x / omega(x) - eps_y / omega(y)`.
pub fn dipole(x: &VertexId, y: &VertexId, omega: &Weight) -> Result<FunctionOnV> {
    if x.index == y.index {
        return Err(Error::DegenerateDipole(x.label.clone()));
    }
    let n = omega.len();
    for v in [x, y] {
        if v.index >= n {
            return Err(Error::VertexOutOfRange { index: v.index, n });
        }
    }
    let mut t = DVector::zeros(n);
    t[x.index] = 1.0 / omega.get(x.index);
    t[y.index] = -1.0 / omega.get(y.index);
    Ok(FunctionOnV(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn f(v: &[f64]) -> FunctionOnV {
        FunctionOnV::new(v.to_vec()).unwrap()
    }

    fn vid(index: usize) -> VertexId {
        VertexId {
            label: index.to_string(),
            index,
        }
    }

    #[test]
    fn inner_product_examples() {
        assert_eq!(
            inner_product(&f(&[1.0, 0.0]), &f(&[0.0, 1.0])).unwrap(),
            0.0
        );
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(
            inner_product(&f(&[h, h]), &f(&[h, h])).unwrap(),
            1.0,
            epsilon = EQ_TOL
        );
        assert_abs_diff_eq!(
            inner_product(&f(&[0.6, 0.8]), &f(&[1.0, 1.0])).unwrap(),
            1.4,
            epsilon = EQ_TOL
        );
    }

    #[test]
    fn inner_product_rejects_length_mismatch() {
        let err = inner_product(&f(&[1.0]), &f(&[1.0, 2.0])).unwrap_err();
        assert_eq!(
            err,
            Error::Dimension {
                expected: 1,
                found: 2
            }
        );
    }

    #[test]
    fn dirac_examples() {
        assert_eq!(dirac(&vid(0), 2).unwrap().values(), &[1.0, 0.0]);
        let ex = dirac(&vid(0), 3).unwrap();
        let ey = dirac(&vid(2), 3).unwrap();
        assert_eq!(inner_product(&ex, &ey).unwrap(), 0.0);
        let u = f(&[0.6, 0.8]);
        assert_eq!(inner_product(&dirac(&vid(1), 2).unwrap(), &u).unwrap(), 0.8);
        assert!(matches!(
            dirac(&vid(5), 2),
            Err(Error::VertexOutOfRange { .. })
        ));
    }

    #[test]
    fn vertex_lookup() {
        let vs = VertexSet::new(["a", "b"]).unwrap();
        assert_eq!(vs.id("b").unwrap().index, 1);
        assert_eq!(vs.id("z").unwrap_err(), Error::UnknownVertex("z".into()));
        assert!(matches!(
            VertexSet::new(["a", "a"]),
            Err(Error::DuplicateVertex(_))
        ));
        assert!(matches!(
            vs.with_appended("a"),
            Err(Error::ExistingVertex(_))
        ));
        assert_eq!(vs.with_appended("c").unwrap().id("c").unwrap().index, 2);
    }

    #[test]
    fn projector_apply_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let w = f(&[h, h]);
        let out = projector_apply(&w, &w, &w).unwrap();
        assert_abs_diff_eq!(out.as_vector(), w.as_vector(), epsilon = EQ_TOL);

        let zero = projector_apply(&f(&[1.0, 2.0]), &f(&[1.0, -1.0]), &f(&[3.0, 3.0])).unwrap();
        assert_eq!(zero.values(), &[0.0, 0.0]);

        let out = projector_apply(&f(&[1.0, 0.0]), &f(&[0.0, 2.0]), &f(&[3.0, 4.0])).unwrap();
        assert_eq!(out.values(), &[8.0, 0.0]);
    }

    #[test]
    fn projector_kernel_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let k = projector_kernel(&f(&[h, h]), &f(&[h, h])).unwrap();
        for v in k.as_matrix().iter() {
            assert_abs_diff_eq!(*v, 0.5, epsilon = EQ_TOL);
        }
        let k = projector_kernel(&f(&[1.0, 0.0]), &f(&[0.0, 1.0])).unwrap();
        assert_eq!(k.rows(), vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn dipole_examples() {
        let w = Weight::uniform(2);
        let t = dipole(&vid(0), &vid(1), &w).unwrap();
        let s2 = 2f64.sqrt();
        assert_abs_diff_eq!(t.get(0), s2, epsilon = EQ_TOL);
        assert_abs_diff_eq!(t.get(1), -s2, epsilon = EQ_TOL);
        assert!(inner_product(&t, w.as_function()).unwrap().abs() <= EQ_TOL);

        let w = Weight::new(vec![0.6, 0.8]).unwrap();
        let t = dipole(&vid(0), &vid(1), &w).unwrap();
        assert_abs_diff_eq!(t.get(0), 1.0 / 0.6, epsilon = EQ_TOL);
        assert_abs_diff_eq!(t.get(1), -1.25, epsilon = EQ_TOL);

        assert!(matches!(
            dipole(&vid(1), &vid(1), &w),
            Err(Error::DegenerateDipole(_))
        ));
    }

    #[test]
    fn weight_validation() {
        assert!(matches!(
            Weight::new(vec![1.0, 1.0]),
            Err(Error::WeightNorm { .. })
        ));
        assert!(matches!(
            Weight::new(vec![1.0, 0.0]),
            Err(Error::NonPositiveWeight { index: 1, .. })
        ));
        let w = Weight::normalized(vec![1.0, 1.0]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(w.get(0), h, epsilon = EQ_TOL);
        assert_abs_diff_eq!(w.get(1), h, epsilon = EQ_TOL);
        assert!(matches!(
            FunctionOnV::new(vec![f64::NAN]),
            Err(Error::NonFinite(0))
        ));
    }

    fn vec_pair(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(-5.0..5.0f64, n),
        )
    }

    proptest! {
        #[test]
        fn inner_product_symmetric_bilinear((u, v, w) in (1usize..8).prop_flat_map(vec_pair), a in -3.0..3.0f64) {
            let (u, v, w) = (f(&u), f(&v), f(&w));
            let uv = inner_product(&u, &v).unwrap();
            prop_assert!((uv - inner_product(&v, &u).unwrap()).abs() <= EQ_TOL);
            let lin = FunctionOnV::from_vector(u.as_vector() * a + w.as_vector()).unwrap();
            let lhs = inner_product(&lin, &v).unwrap();
            let rhs = a * uv + inner_product(&w, &v).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }

        #[test]
        fn projector_kernel_matches_apply((s, t, u) in vec_pair(5)) {
            let (s, t, u) = (f(&s), f(&t), f(&u));
            let k = projector_kernel(&s, &t).unwrap();
            let a = k.apply(&u).unwrap();
            let b = projector_apply(&s, &t, &u).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-10);
            }
        }

        #[test]
        fn projector_kernel_rank_at_most_one((s, t, _u) in (2usize..7).prop_flat_map(vec_pair)) {
            let k = projector_kernel(&f(&s), &f(&t)).unwrap();
            let sv = k.as_matrix().clone().singular_values();
            let mut sv: Vec<f64> = sv.iter().copied().collect();
            sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
            prop_assert!(sv[1] <= 1e-12 * sv[0].max(f64::MIN_POSITIVE));
        }

        #[test]
        fn weight_projector_idempotent(raw in prop::collection::vec(0.1..3.0f64, 1..8), u in prop::collection::vec(-5.0..5.0f64, 8)) {
            let w = Weight::normalized(raw).unwrap();
            let u = f(&u[..w.len()]);
            let once = projector_apply(w.as_function(), w.as_function(), &u).unwrap();
            let twice = projector_apply(w.as_function(), w.as_function(), &once).unwrap();
            for (x, y) in once.values().iter().zip(twice.values()) {
                prop_assert!((x - y).abs() <= EQ_TOL * (1.0 + x.abs()));
            }
        }

        #[test]
        fn dipole_orthogonal_to_weight(raw in prop::collection::vec(0.2..3.0f64, 2..8), pick in (0usize..64, 0usize..64)) {
            let w = Weight::normalized(raw).unwrap();
            let n = w.len();
            let (x, y) = (pick.0 % n, pick.1 % n);
            prop_assume!(x != y);
            let t = dipole(&vid(x), &vid(y), &w).unwrap();
            prop_assert!(inner_product(&t, w.as_function()).unwrap().abs() <= EQ_TOL);
        }
    }
}
