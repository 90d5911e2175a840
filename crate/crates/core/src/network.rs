//! Weighted networks and their Laplacian and Schrödinger matrices.

use std::collections::{HashSet, VecDeque};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::funspace::{FunctionOnV, KernelOnV, VertexSet, Weight};

/// Unvalidated network description, as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawNetwork {
    pub vertices: Vec<String>,
    pub edges: Vec<(String, String, f64)>,
    /// Weight values aligned with `vertices`; uniform `1/sqrt(n)` when absent.
    pub weight: Option<Vec<f64>>,
    pub lambda: f64,
    /// Rescale the weight to unit norm instead of rejecting it.
    pub normalize: bool,
}

impl RawNetwork {
    pub fn new<S: Into<String>>(vertices: impl IntoIterator<Item = S>) -> Self {
        Self {
            vertices: vertices.into_iter().map(Into::into).collect(),
            edges: Vec::new(),
            weight: None,
            lambda: 0.0,
            normalize: false,
        }
    }

    pub fn edge(mut self, u: impl Into<String>, v: impl Into<String>, c: f64) -> Self {
        self.edges.push((u.into(), v.into(), c));
        self
    }

    pub fn weight(mut self, weight: Vec<f64>) -> Self {
        self.weight = Some(weight);
        self
    }

    pub fn lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }
}

/// An undirected edge between two vertex positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub c: f64,
}

/// A validated network `(V, E, c)` together with the fixed weight and
/// eigenvalue of its Schrödinger operator.
///
/// Only [`validate_network`] constructs one, so every instance is connected,
/// loop-free, free of duplicate edges, positively weighted and has
/// `lambda >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    vertices: VertexSet,
    edges: Vec<Edge>,
    weight: Weight,
    lambda: f64,
}

/// The potential `q` of a Schrödinger operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential(pub FunctionOnV);

impl Potential {
    pub fn values(&self) -> &[f64] {
        self.0.values()
    }
}

/// Checks every network invariant and produces a [`NetworkSpec`].
pub fn validate_network(raw: RawNetwork) -> Result<NetworkSpec> {
    let vertices = VertexSet::new(raw.vertices)?;
    let n = vertices.len();
    if n == 0 {
        return Err(Error::EmptyNetwork);
    }
    if !(raw.lambda >= 0.0) || !raw.lambda.is_finite() {
        return Err(Error::NegativeLambda(raw.lambda));
    }

    let mut seen = HashSet::with_capacity(raw.edges.len());
    let mut edges = Vec::with_capacity(raw.edges.len());
    for (u, v, c) in raw.edges {
        let (iu, iv) = (vertices.id(&u)?.index, vertices.id(&v)?.index);
        if iu == iv {
            return Err(Error::LoopEdge(u));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::NonPositiveConductance { u, v, c });
        }
        if !seen.insert((iu.min(iv), iu.max(iv))) {
            return Err(Error::DuplicateEdge(u, v));
        }
        edges.push(Edge { u: iu, v: iv, c });
    }

    let reached = reachable_count(n, &edges);
    if reached != n {
        return Err(Error::Disconnected { reached, n });
    }

    let weight = match raw.weight {
        None => Weight::uniform(n),
        Some(values) => {
            if values.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: values.len(),
                });
            }
            if raw.normalize {
                Weight::normalized(values)?
            } else {
                Weight::new(values)?
            }
        }
    };

    Ok(NetworkSpec {
        vertices,
        edges,
        weight,
        lambda: raw.lambda,
    })
}

fn reachable_count(n: usize, edges: &[Edge]) -> usize {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.u].push(e.v);
        adj[e.v].push(e.u);
    }
    let mut visited = vec![false; n];
    let mut queue = VecDeque::from([0]);
    visited[0] = true;
    let mut count = 1;
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if !visited[y] {
                visited[y] = true;
                count += 1;
                queue.push_back(y);
            }
        }
    }
    count
}

impl NetworkSpec {
    pub fn vertices(&self) -> &VertexSet {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of vertices.
    pub fn order(&self) -> usize {
        self.vertices.len()
    }

    /// The same network with a different eigenvalue.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::NegativeLambda(lambda));
        }
        Ok(Self {
            lambda,
            ..self.clone()
        })
    }

    /// Dense symmetric conductance function with zero diagonal.
    pub fn conductance_matrix(&self) -> DMatrix<f64> {
        let n = self.order();
        let mut c = DMatrix::zeros(n, n);
        for e in &self.edges {
            c[(e.u, e.v)] = e.c;
            c[(e.v, e.u)] = e.c;
        }
        c
    }

    /// Raw form of this network, e.g. for re-serialization.
    pub fn to_raw(&self) -> RawNetwork {
        let labels = self.vertices.labels();
        RawNetwork {
            vertices: labels.to_vec(),
            edges: self
                .edges
                .iter()
                .map(|e| (labels[e.u].clone(), labels[e.v].clone(), e.c))
                .collect(),
            weight: Some(self.weight.values().to_vec()),
            lambda: self.lambda,
            normalize: false,
        }
    }
}

/// `L(u)(x) = sum_y c(x,y) [u(x) - u(y)]`.
pub fn laplacian_matrix(spec: &NetworkSpec) -> KernelOnV {
    let n = spec.order();
    let mut l = DMatrix::zeros(n, n);
    for e in spec.edges() {
        l[(e.u, e.v)] -= e.c;
        l[(e.v, e.u)] -= e.c;
        l[(e.u, e.u)] += e.c;
        l[(e.v, e.v)] += e.c;
    }
    KernelOnV::new(l).expect("finite conductances")
}

/// `q_omega = -L(omega) / omega`.
pub fn weight_potential(spec: &NetworkSpec) -> Potential {
    let l = laplacian_matrix(spec);
    let w = spec.weight().as_vector();
    let lw = l.as_matrix() * w;
    let q = DVector::from_fn(w.len(), |i, _| -lw[i] / w[i]);
    Potential(FunctionOnV::from_vector(q).expect("positive weight gives finite potential"))
}

/// `L_q = L + diag(q_omega + lambda)`, the (lambda, omega)-elliptic
/// Schrödinger operator of the network.
pub fn schrodinger_matrix(spec: &NetworkSpec) -> KernelOnV {
    let mut m = laplacian_matrix(spec).into_matrix();
    let q = weight_potential(spec);
    for (i, qi) in q.values().iter().enumerate() {
        m[(i, i)] += qi + spec.lambda();
    }
    KernelOnV::new(m).expect("finite entries")
}
