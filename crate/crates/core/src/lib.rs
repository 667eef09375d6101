//! Adaptive edge-element solver for the 3D Maxwell cavity eigenvalue problem.
//!
//! The crate computes resonant modes of a polyhedral cavity,
//!
//! ```text
//! curl (mu^-1 curl u) = omega^2 eps u   in Omega
//! div (eps u)         = 0              in Omega
//! u x n               = 0              on the boundary,
//! ```
//!
//! with lowest-order Nédélec edge elements on tetrahedral meshes, and drives
//! an adaptive solve/estimate/mark/refine loop:
//!
//! * [`mesh`] — tetrahedral meshes with conforming tagged bisection,
//! * [`fem`] — edge/nodal spaces, element matrices, assembly, discrete gradient,
//! * [`linalg`] — sparse symmetric matrices, LDLᵀ factorization, PCG,
//! * [`eigensolve`] — shift-invert Lanczos with gradient-kernel deflation,
//! * [`estimator`] — residual error indicators (standard and mixed form),
//! * [`adapt`] — Dörfler marking, the adaptive loop, prolongation, rates,
//! * [`verify`] — numerical checks of the convergence theory,
//! * [`io`] — run configuration, mesh files, CSV reports, VTK export.
//!
//! All numerical kernels are generic over the scalar type through [`Real`];
//! the `*64` aliases at the crate root fix `f64`, which is what the CLI and
//! the test suite use.

pub mod adapt;
pub mod eigensolve;
pub mod estimator;
pub mod fem;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod verify;

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Scalar type of all floating-point computation: `f32` or `f64`.
///
/// Everything geometric and algebraic in this crate is written against this
/// trait; tolerances and quadrature tables are stored as `f64` literals and
/// converted with [`Real::of`].
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Conversion from an `f64` literal (lossy for `f32`).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal")
    }

    /// Conversion from a usize count.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Mesh64 = mesh::Mesh<f64>;
// pub type SparseSym64 = linalg::SparseSym<f64>;
// pub type SparseRect64 = linalg::SparseRect<f64>;
// pub type EigenPair64 = eigensolve::EigenPair<f64>;
// pub type EigenConfig64 = eigensolve::EigenConfig<f64>;
// pub type IndicatorField64 = estimator::IndicatorField<f64>;
// pub type AdaptRecord64 = adapt::AdaptRecord<f64>;
// pub type LoopConfig64 = adapt::LoopConfig<f64>;
// pub type RunConfig64 = io::RunConfig<f64>;
// pub type TheoryReport64 = verify::TheoryReport<f64>;
