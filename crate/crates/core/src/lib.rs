//! Orthogonal Green operators of Schrödinger operators on weighted networks,
//! and closed-form updates of their Moore–Penrose inverse when a vertex is
//! attached.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`funspace`] | functions and kernels on a vertex set, projectors, dipoles |
//! | [`network`] | networks, Laplacian, weight potential, Schrödinger matrix |
//! | [`green`] | Green operator, eigendecomposition pseudoinverse oracle, resistances |
//! | [`perturbation`] | rank-one and multi-rank Green updates, Schur block pseudoinverse |
//! | [`vertex_addition`] | pseudoinverse after attaching a new vertex |
//! | [`io`], [`bench`], [`selfcheck`] | file formats, benchmark harness, invariant suite |

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod funspace;
pub mod green;
pub mod io;
pub mod network;
pub mod perturbation;
pub mod random;
pub mod selfcheck;
pub mod tol;
pub mod vertex_addition;

pub use error::{Error, Result};
pub use funspace::{FunctionOnV, KernelOnV, VertexId, VertexSet, Weight};
pub use green::{green_direct, pinv_oracle, GreenOperator};
pub use network::{validate_network, NetworkSpec, RawNetwork};
pub use vertex_addition::{added_vertex_pinv, VertexAttachment};
