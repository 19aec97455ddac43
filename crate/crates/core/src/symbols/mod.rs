//! Characteristic exponents, Lévy triplets and the standing-assumption checks.

mod diagnostics;
mod document;
mod measure;

pub use diagnostics::{
    hartman_wintner_diagnostic, levy_measure_moment, symbol_zero_set, GrowthVerdict, HwReport,
    HwRow, ZeroSetReport,
};
pub use document::{SubordinatorDocument, SymbolDocument};
pub use measure::{
    Atom, DensityFn, LevyMeasureSpec, MeasureDescriptor, MeasureKind, MomentReport, RadialFn,
};
pub(crate) use measure::{small_jump_integral, Ray};

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{invalid, LevyError, Result};
use crate::grid::Grid;
use crate::tolerances::Tolerances;
use crate::Complex64;

/// Laplace exponents `f` of the subordinators `S_t`, `E e^{-λ S_t} = e^{-t f(λ)}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Subordinator {
    /// `S_t = t`, `f(λ) = λ`.
    Deterministic,
    /// `f(λ) = (2λ)^κ`, so that `ψ(ξ) = |ξ|^{2κ}`.
    Stable { kappa: f64 },
    /// `f(λ) = a log(1 + λ/b)`.
    Gamma { shape: f64, rate: f64 },
    /// `f(λ) = δ(√(2λ + γ²) - γ)`.
    InverseGaussian { delta: f64, gamma: f64 },
}

impl Subordinator {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Subordinator::Deterministic => Ok(()),
            Subordinator::Stable { kappa } if kappa > 0.0 && kappa < 1.0 => Ok(()),
            Subordinator::Stable { .. } => invalid("stable subordinator needs κ ∈ (0, 1)"),
            Subordinator::Gamma { shape, rate } if shape > 0.0 && rate > 0.0 => Ok(()),
            Subordinator::Gamma { .. } => invalid("gamma subordinator needs positive shape and rate"),
            Subordinator::InverseGaussian { delta, gamma } if delta > 0.0 && gamma > 0.0 => Ok(()),
            Subordinator::InverseGaussian { .. } => {
                invalid("inverse Gaussian subordinator needs δ > 0 and γ > 0")
            }
        }
    }

    pub fn laplace_exponent(&self, lambda: f64) -> f64 {
        match *self {
            Subordinator::Deterministic => lambda,
            Subordinator::Stable { kappa } => (2.0 * lambda).powf(kappa),
            Subordinator::Gamma { shape, rate } => shape * (lambda / rate).ln_1p(),
            Subordinator::InverseGaussian { delta, gamma } => {
                delta * 2.0 * lambda / ((2.0 * lambda + gamma * gamma).sqrt() + gamma)
            }
        }
    }
}

/// `(b, Q, ν)` with the cutoff `1_{|y|<1}`.
#[derive(Debug, Clone)]
pub struct LevyTriplet {
    pub b: Vec<f64>,
    /// Row-major `d × d`.
    pub q: Vec<f64>,
    pub nu: LevyMeasureSpec,
}

impl LevyTriplet {
    pub fn new(b: Vec<f64>, q: Vec<f64>, nu: LevyMeasureSpec) -> Result<Self> {
        Self::with_tolerance(b, q, nu, Tolerances::default().psd)
    }

    pub fn with_tolerance(b: Vec<f64>, q: Vec<f64>, nu: LevyMeasureSpec, tol_psd: f64) -> Result<Self> {
        let d = nu.dimension;
        if b.len() != d || q.len() != d * d {
            return invalid(format!("triplet components must match dimension {d}"));
        }
        if b.iter().chain(&q).any(|v| !v.is_finite()) {
            return invalid("triplet entries must be finite");
        }
        let scale = q.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..d {
            for j in 0..i {
                if (q[i * d + j] - q[j * d + i]).abs() > 1e-12 * scale {
                    return invalid("diffusion matrix Q must be symmetric");
                }
            }
        }
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &q));
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -tol_psd {
            return invalid(format!("Q has eigenvalue {min:.3e} < -{tol_psd:e}"));
        }
        Ok(Self { b, q, nu })
    }

    pub fn dimension(&self) -> usize {
        self.nu.dimension
    }

    pub fn brownian(b: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let d = b.len();
        Self::new(b, q, LevyMeasureSpec::zero(d))
    }

    /// Radial power law `c |y|^{-d-α}` with `c` fixed by `ψ(e₁) = 1`.
    pub fn calibrated_stable(dimension: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return invalid("stable index must lie in (0, 2)");
        }
        let unit = LevyMeasureSpec::power_law(dimension, 1.0, alpha, 0.0, None)?;
        let mut e1 = vec![0.0; dimension];
        e1[0] = 1.0;
        let k = unit.jump_exponent(&e1, 1e-12)?.re;
        let nu = LevyMeasureSpec::power_law(dimension, 1.0 / k, alpha, 0.0, None)?;
        Self::new(vec![0.0; dimension], vec![0.0; dimension * dimension], nu)
    }

    /// `ψ(ξ) = -i b·ξ + ½ ξ·Qξ + ∫ (1 - e^{iy·ξ} + i y·ξ 1_{|y|<1}) ν(dy)`.
    pub fn eval(&self, xi: &[f64], tol: f64) -> Result<Complex64> {
        Ok(self.local_part(xi) + self.nu.jump_exponent(xi, tol)?)
    }

    fn local_part(&self, xi: &[f64]) -> Complex64 {
        let d = self.dimension();
        let drift: f64 = self.b.iter().zip(xi).map(|(b, x)| b * x).sum();
        let mut quad = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad += xi[i] * self.q[i * d + j] * xi[j];
            }
        }
        Complex64::new(0.5 * quad, -drift)
    }

    pub fn is_symmetric(&self) -> bool {
        self.b.iter().all(|&v| v == 0.0) && self.nu.is_symmetric()
    }
}

/// The families with closed-form exponents, plus arbitrary triplets.
#[derive(Debug, Clone)]
pub enum Family {
    /// `-i b·ξ + ½ ξ·Qξ`; `q` row-major.
    Brownian { q: Vec<f64>, b: Vec<f64> },
    /// `|ξ|^α`.
    IsotropicStable { alpha: f64 },
    /// `√(|ξ|² + m²) - m`.
    Relativistic { mass: f64 },
    /// `(|ξ|² + λ²)^{α/2} - λ^α`.
    TemperedStable { alpha: f64, lambda: f64 },
    /// `Σ λ_i (1 - e^{i y_i·ξ})`.
    CompoundPoisson { atoms: Vec<Atom> },
    /// `f(|ξ|²/2)` for a subordinator with Laplace exponent `f`.
    SubordinatedBm { subordinator: Subordinator },
    Custom(LevyTriplet),
}

/// A characteristic exponent in dimension `d`.
#[derive(Debug, Clone)]
pub struct SymbolSpec {
    pub family: Family,
    pub dimension: usize,
    /// Quadrature tolerance for custom triplets.
    pub quadrature_tol: f64,
}

impl SymbolSpec {
    pub fn new(family: Family, dimension: usize) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return invalid("symbols are supported for d = 1, 2, 3");
        }
        match &family {
            Family::Brownian { q, b } => {
                LevyTriplet::brownian(b.clone(), q.clone())?;
                if b.len() != dimension {
                    return invalid("drift has the wrong dimension");
                }
            }
            Family::IsotropicStable { alpha } => {
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return invalid("stable index must lie in (0, 2)");
                }
            }
            Family::Relativistic { mass } => {
                if !(*mass > 0.0) {
                    return invalid("relativistic mass must be positive");
                }
            }
            Family::TemperedStable { alpha, lambda } => {
                if !(*alpha > 0.0 && *alpha < 2.0) || !(*lambda > 0.0) {
                    return invalid("tempered stable needs α ∈ (0, 2) and λ > 0");
                }
            }
            Family::CompoundPoisson { atoms } => {
                LevyMeasureSpec::atoms(dimension, atoms.clone())?;
            }
            Family::SubordinatedBm { subordinator } => subordinator.validate()?,
            Family::Custom(t) => {
                if t.dimension() != dimension {
                    return invalid("triplet dimension does not match");
                }
            }
        }
        Ok(Self {
            family,
            dimension,
            quadrature_tol: Tolerances::default().quadrature,
        })
    }

    pub fn brownian_standard(dimension: usize) -> Self {
        let mut q = vec![0.0; dimension * dimension];
        for i in 0..dimension {
            q[i * dimension + i] = 1.0;
        }
        Self::new(
            Family::Brownian {
                q,
                b: vec![0.0; dimension],
            },
            dimension,
        )
        .expect("identity diffusion is valid")
    }

    pub fn stable(dimension: usize, alpha: f64) -> Result<Self> {
        Self::new(Family::IsotropicStable { alpha }, dimension)
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            Family::Brownian { .. } => "brownian",
            Family::IsotropicStable { .. } => "isotropic_stable",
            Family::Relativistic { .. } => "relativistic",
            Family::TemperedStable { .. } => "tempered_stable",
            Family::CompoundPoisson { .. } => "compound_poisson",
            Family::SubordinatedBm { .. } => "subordinated_bm",
            Family::Custom(_) => "custom",
        }
    }

    /// `ψ(ξ)`; exact for closed forms and `ψ(0) = 0` for every family.
    pub fn eval(&self, xi: &[f64]) -> Result<Complex64> {
        if xi.len() != self.dimension {
            return invalid("frequency has the wrong dimension");
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return invalid("frequency must be finite");
        }
        if xi.iter().all(|&v| v == 0.0) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let r2: f64 = xi.iter().map(|v| v * v).sum();
        let re = |v: f64| Ok(Complex64::new(v, 0.0));
        match &self.family {
            Family::Brownian { q, b } => {
                let d = self.dimension;
                let drift: f64 = b.iter().zip(xi).map(|(b, x)| b * x).sum();
                let mut quad = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        quad += xi[i] * q[i * d + j] * xi[j];
                    }
                }
                Ok(Complex64::new(0.5 * quad, -drift))
            }
            Family::IsotropicStable { alpha } => re(r2.powf(0.5 * alpha)),
            Family::Relativistic { mass } => re(r2 / ((r2 + mass * mass).sqrt() + mass)),
            Family::TemperedStable { alpha, lambda } => {
                re(lambda.powf(*alpha) * (0.5 * alpha * (r2 / (lambda * lambda)).ln_1p()).exp_m1())
            }
            Family::CompoundPoisson { atoms } => Ok(atoms
                .iter()
                .map(|a| {
                    let z: f64 = a.location.iter().zip(xi).map(|(y, x)| y * x).sum();
                    let s = (0.5 * z).sin();
                    a.mass * Complex64::new(2.0 * s * s, -z.sin())
                })
                .sum()),
            Family::SubordinatedBm { subordinator } => re(subordinator.laplace_exponent(0.5 * r2)),
            Family::Custom(t) => t.eval(xi, self.quadrature_tol),
        }
    }

    /// Whether `ψ` is real, i.e. `ψ(-ξ) = ψ(ξ)`.
    pub fn is_symmetric(&self) -> bool {
        match &self.family {
            Family::Brownian { b, .. } => b.iter().all(|&v| v == 0.0),
            Family::CompoundPoisson { atoms } => LevyMeasureSpec::atoms(self.dimension, atoms.clone())
                .map(|m| m.is_symmetric())
                .unwrap_or(false),
            Family::Custom(t) => t.is_symmetric(),
            _ => true,
        }
    }

    /// Whether `ψ` depends on `|ξ|` only.
    pub fn is_radial(&self) -> bool {
        matches!(
            self.family,
            Family::IsotropicStable { .. }
                | Family::Relativistic { .. }
                | Family::TemperedStable { .. }
                | Family::SubordinatedBm { .. }
        )
    }

    /// The Lévy triplet, for the families whose jump measure is implemented.
    pub fn triplet(&self) -> Result<LevyTriplet> {
        let d = self.dimension;
        match &self.family {
            Family::Brownian { q, b } => LevyTriplet::brownian(b.clone(), q.clone()),
            Family::IsotropicStable { alpha } => LevyTriplet::calibrated_stable(d, *alpha),
            Family::CompoundPoisson { atoms } => {
                let mut b = vec![0.0; d];
                for a in atoms {
                    let r2: f64 = a.location.iter().map(|v| v * v).sum();
                    if r2 < 1.0 {
                        for (bi, yi) in b.iter_mut().zip(&a.location) {
                            *bi += a.mass * yi;
                        }
                    }
                }
                LevyTriplet::new(b, vec![0.0; d * d], LevyMeasureSpec::atoms(d, atoms.clone())?)
            }
            Family::SubordinatedBm {
                subordinator: Subordinator::Deterministic,
            } => Ok(LevyTriplet::brownian(vec![0.0; d], identity(d))?),
            Family::Custom(t) => Ok(t.clone()),
            _ => Err(LevyError::UnsupportedFamily(format!(
                "no Lévy measure is implemented for the {} family",
                self.name()
            ))),
        }
    }

    /// Moment `∫_{|y|≥1} |y|^β ν(dy)` of the family's jump measure.
    pub fn jump_moment(&self, beta: f64, tol: &Tolerances) -> Result<MomentReport> {
        let finite = |value: f64| MomentReport {
            beta,
            value,
            finite: true,
            shell_sums: Vec::new(),
        };
        match &self.family {
            Family::Brownian { .. }
            | Family::SubordinatedBm {
                subordinator: Subordinator::Deterministic,
            } => Ok(finite(0.0)),
            // exponentially tempered jumps have every moment
            Family::Relativistic { .. } | Family::TemperedStable { .. } => Ok(finite(f64::NAN)),
            Family::IsotropicStable { alpha } => {
                let t = LevyTriplet::calibrated_stable(self.dimension, *alpha)?;
                t.nu.moment(beta, tol.moment_decay_ratio, tol.moment_fail_run)
            }
            Family::SubordinatedBm {
                subordinator: Subordinator::Stable { kappa },
            } => {
                let t = LevyTriplet::calibrated_stable(self.dimension, 2.0 * kappa)?;
                t.nu.moment(beta, tol.moment_decay_ratio, tol.moment_fail_run)
            }
            Family::SubordinatedBm { .. } => Ok(finite(f64::NAN)),
            _ => self
                .triplet()?
                .nu
                .moment(beta, tol.moment_decay_ratio, tol.moment_fail_run),
        }
    }

    pub fn eval_many(&self, xis: &[Vec<f64>]) -> Result<Vec<Complex64>> {
        xis.par_iter().map(|x| self.eval(x)).collect()
    }

    /// `ψ` at every frequency of `grid`, in FFT order.
    pub fn on_lattice(&self, grid: &Grid) -> Result<Vec<Complex64>> {
        let freqs = grid.frequencies();
        if let Family::Custom(t) = &self.family {
            if matches!(t.nu.kind, MeasureKind::Radial(_)) {
                // the jump part depends on |ξ| only; evaluate each radius once
                let mut radii: Vec<u64> = freqs
                    .iter()
                    .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt().to_bits())
                    .collect();
                radii.sort_unstable();
                radii.dedup();
                let d = self.dimension;
                let values: Vec<Complex64> = radii
                    .par_iter()
                    .map(|&bits| {
                        let mut xi = vec![0.0; d];
                        xi[0] = f64::from_bits(bits);
                        t.nu.jump_exponent(&xi, self.quadrature_tol)
                    })
                    .collect::<Result<_>>()?;
                let table: HashMap<u64, Complex64> = radii.into_iter().zip(values).collect();
                return Ok(freqs
                    .iter()
                    .map(|x| {
                        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                        t.local_part(x) + table[&r.to_bits()]
                    })
                    .collect());
            }
        }
        self.eval_many(&freqs)
    }
}

pub(crate) fn identity(d: usize) -> Vec<f64> {
    let mut q = vec![0.0; d * d];
    for i in 0..d {
        q[i * d + i] = 1.0;
    }
    q
}

/// Free-function form of [`SymbolSpec::eval`].
pub fn eval_symbol(spec: &SymbolSpec, xi: &[f64]) -> Result<Complex64> {
    spec.eval(xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn closed_form_examples() {
        let bm = SymbolSpec::brownian_standard(2);
        assert_eq!(bm.eval(&[2.0, 0.0]).unwrap(), Complex64::new(2.0, 0.0));
        let st = SymbolSpec::stable(1, 1.3).unwrap();
        assert!((st.eval(&[2.0]).unwrap().re - 2f64.powf(1.3)).abs() < 1e-15);
        let rel = SymbolSpec::new(Family::Relativistic { mass: 1.0 }, 3).unwrap();
        assert_eq!(rel.eval(&[0.0, 0.0, 0.0]).unwrap(), Complex64::new(0.0, 0.0));
        let ts = SymbolSpec::new(Family::TemperedStable { alpha: 1.0, lambda: 2.0 }, 1).unwrap();
        let rl = SymbolSpec::new(Family::Relativistic { mass: 2.0 }, 1).unwrap();
        assert!((ts.eval(&[3.0]).unwrap() - rl.eval(&[3.0]).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn single_atom_at_unit_distance_is_uncompensated() {
        let nu = LevyMeasureSpec::atoms(1, vec![Atom { location: vec![1.0], mass: 1.0 }]).unwrap();
        let t = LevyTriplet::new(vec![0.0], vec![0.0], nu).unwrap();
        let spec = SymbolSpec::new(Family::Custom(t), 1).unwrap();
        let v = spec.eval(&[PI]).unwrap();
        assert!((v - Complex64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn compound_poisson_triplet_reproduces_closed_form() {
        let atoms = vec![
            Atom { location: vec![0.5], mass: 2.0 },
            Atom { location: vec![-1.5], mass: 0.7 },
        ];
        let spec = SymbolSpec::new(Family::CompoundPoisson { atoms }, 1).unwrap();
        let t = spec.triplet().unwrap();
        for &xi in &[0.3, -2.0, 11.0] {
            let a = spec.eval(&[xi]).unwrap();
            let b = t.eval(&[xi], 1e-12).unwrap();
            assert!((a - b).norm() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn calibrated_stable_triplet_matches_symbol() {
        for d in 1..=3 {
            for &alpha in &[0.5, 1.0, 1.5] {
                let t = LevyTriplet::calibrated_stable(d, alpha).unwrap();
                let mut xi = vec![0.0; d];
                xi[d - 1] = 2.5;
                let v = t.eval(&xi, 1e-10).unwrap();
                let want = 2.5f64.powf(alpha);
                assert!(((v.re - want) / want).abs() < 1e-6, "d={d} α={alpha}: {v}");
            }
        }
    }

    #[test]
    fn psd_check_rejects_negative_diffusion() {
        assert!(LevyTriplet::brownian(vec![0.0, 0.0], vec![1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(LevyTriplet::brownian(vec![0.0, 0.0], vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(LevyTriplet::brownian(vec![0.0, 0.0], vec![1.0, 1.0, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn drift_sign_convention() {
        let spec = SymbolSpec::new(Family::Brownian { q: vec![0.0], b: vec![2.0] }, 1).unwrap();
        // E e^{iξX_t} = e^{-tψ(ξ)} with X_t = 2t gives ψ(ξ) = -2iξ
        assert_eq!(spec.eval(&[1.5]).unwrap(), Complex64::new(0.0, -3.0));
    }
}
