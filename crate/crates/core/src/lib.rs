//! Numerics for Lévy generators and their harmonic functions.
//!
//! The crate is organised around the objects that appear when one studies the
//! equation `Au = 0` for the generator `A = -ψ(D)` of a Lévy process:
//!
//! * [`symbols`] evaluates characteristic exponents ψ, either in closed form or
//!   from a Lévy triplet `(b, Q, ν)` by compensated shell quadrature, and runs
//!   the standing-assumption diagnostics (moments of ν, growth of Re ψ, zeros).
//! * [`generator`] applies `A` and its adjoint on periodic lattices (Fourier
//!   multiplier route) and pointwise through the integro-differential form.
//! * [`semigroup`] builds transition densities by Fourier inversion and applies
//!   `P_t` to functions of polynomial growth with explicit truncation bounds.
//! * [`liouville`] runs the mollify, fixed-point, Hölder and iterated-difference
//!   pipeline that classifies harmonic functions.
//! * [`montecarlo`] samples `X_t` and cross-checks the deterministic routes.
//!
//! Sign convention: `ψ(ξ) = -i b·ξ + ½ ξ·Qξ + ∫ (1 - e^{iy·ξ} + i y·ξ 1_{|y|<1}) ν(dy)`,
//! so that `E e^{iξ·X_t} = e^{-tψ(ξ)}` and the generator acting on smooth `f` is
//! `b·∇f + ½ tr(Q∇²f) + ∫ (f(x+y) - f(x) - y·∇f(x) 1_{|y|<1}) ν(dy)`.

// `!(x >= 0.0)` style guards are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod functions;
pub mod generator;
pub mod grid;
pub mod liouville;
pub mod montecarlo;
pub mod quadrature;
pub mod semigroup;
pub mod special;
pub mod symbols;
pub mod tolerances;

pub use error::{LevyError, Result};
pub use grid::{Envelope, Grid, GridFunction};
pub use symbols::{Family, LevyMeasureSpec, LevyTriplet, Subordinator, SymbolSpec};
pub use tolerances::Tolerances;

pub use num_complex::Complex64;
