//! Lévy measures and the shell quadrature used to integrate against them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LevyError, Result};
use crate::quadrature::{dyadic_outer_sum, euler_alternating_sum, AngularRule, GaussLegendre};
use crate::special::{normalized_bessel, one_minus_normalized_bessel, sphere_area};
use crate::Complex64;

pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub location: Vec<f64>,
    pub mass: f64,
}

#[derive(Clone)]
pub enum MeasureKind {
    /// `ν(dy) = n(y) dy`.
    Density(DensityFn),
    /// `ν(dy) = n(|y|) dy`.
    Radial(RadialFn),
    /// `ν = Σ λ_i δ_{y_i}`.
    Atoms(Vec<Atom>),
}

impl fmt::Debug for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureKind::Density(_) => write!(f, "Density(<fn>)"),
            MeasureKind::Radial(_) => write!(f, "Radial(<fn>)"),
            MeasureKind::Atoms(a) => write!(f, "Atoms({a:?})"),
        }
    }
}

/// Serializable description of the measures that configurations can build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureDescriptor {
    /// `c |y|^{-d-α} e^{-λ|y|}`, optionally cut off at `support_radius`.
    Radial {
        c: f64,
        alpha: f64,
        #[serde(default)]
        lambda: f64,
        #[serde(default)]
        support_radius: Option<f64>,
    },
    /// One-dimensional `c_± |y|^{-1-α} e^{-λ|y|}` on the two half-lines.
    Density {
        c_plus: f64,
        c_minus: f64,
        alpha: f64,
        #[serde(default)]
        lambda: f64,
    },
    Atoms {
        atoms: Vec<Atom>,
    },
}

/// A Lévy measure `ν` on `R^d ∖ {0}` with quadrature metadata.
#[derive(Debug, Clone)]
pub struct LevyMeasureSpec {
    pub dimension: usize,
    pub kind: MeasureKind,
    /// `s ∈ [0, 2)` with `n(y) ≍ |y|^{-d-s}` near the origin.
    pub singularity_order: f64,
    pub support_radius: Option<f64>,
    pub descriptor: Option<MeasureDescriptor>,
}

/// Result of a moment computation over `{|y| ≥ 1}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentReport {
    pub beta: f64,
    /// `+∞` when divergent.
    pub value: f64,
    pub finite: bool,
    pub shell_sums: Vec<f64>,
}

const SHELL_CAP: usize = 1000;
const OUTER_CAP: usize = 400;

impl LevyMeasureSpec {
    pub fn zero(dimension: usize) -> Self {
        Self {
            dimension,
            kind: MeasureKind::Atoms(Vec::new()),
            singularity_order: 0.0,
            support_radius: None,
            descriptor: Some(MeasureDescriptor::Atoms { atoms: Vec::new() }),
        }
    }

    pub fn atoms(dimension: usize, atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            if a.location.len() != dimension {
                return invalid("atom location has the wrong dimension");
            }
            if a.location.iter().all(|&v| v == 0.0) {
                return invalid("atom locations must be nonzero");
            }
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return invalid("atom masses must be positive");
            }
        }
        Ok(Self {
            dimension,
            kind: MeasureKind::Atoms(atoms.clone()),
            singularity_order: 0.0,
            support_radius: None,
            descriptor: Some(MeasureDescriptor::Atoms { atoms }),
        })
    }

    pub fn radial(
        dimension: usize,
        profile: RadialFn,
        singularity_order: f64,
        support_radius: Option<f64>,
    ) -> Result<Self> {
        let spec = Self {
            dimension,
            kind: MeasureKind::Radial(profile),
            singularity_order,
            support_radius,
            descriptor: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn density(
        dimension: usize,
        density: DensityFn,
        singularity_order: f64,
        support_radius: Option<f64>,
    ) -> Result<Self> {
        let spec = Self {
            dimension,
            kind: MeasureKind::Density(density),
            singularity_order,
            support_radius,
            descriptor: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `c |y|^{-d-α} e^{-λ|y|}` restricted to `|y| < support_radius`.
    pub fn power_law(
        dimension: usize,
        c: f64,
        alpha: f64,
        lambda: f64,
        support_radius: Option<f64>,
    ) -> Result<Self> {
        Self::from_descriptor(
            dimension,
            &MeasureDescriptor::Radial {
                c,
                alpha,
                lambda,
                support_radius,
            },
        )
    }

    pub fn from_descriptor(dimension: usize, desc: &MeasureDescriptor) -> Result<Self> {
        let mut spec = match desc.clone() {
            MeasureDescriptor::Radial {
                c,
                alpha,
                lambda,
                support_radius,
            } => {
                if !(c > 0.0) || !(0.0..2.0).contains(&alpha) || lambda < 0.0 {
                    return invalid("radial measure needs c > 0, α ∈ [0, 2), λ ≥ 0");
                }
                if alpha == 0.0 && lambda == 0.0 && support_radius.is_none() {
                    return invalid("|y|^{-d} needs tempering or a support radius to be a Lévy measure");
                }
                let d = dimension as f64;
                let profile: RadialFn = Arc::new(move |r: f64| c * r.powf(-d - alpha) * (-lambda * r).exp());
                Self::radial(dimension, profile, alpha, support_radius)?
            }
            MeasureDescriptor::Density {
                c_plus,
                c_minus,
                alpha,
                lambda,
            } => {
                if dimension != 1 {
                    return invalid("two-sided density descriptors are one-dimensional");
                }
                if c_plus < 0.0 || c_minus < 0.0 || c_plus + c_minus <= 0.0 {
                    return invalid("density descriptor needs c_± ≥ 0, not both zero");
                }
                if !(0.0..2.0).contains(&alpha) || lambda < 0.0 || (alpha == 0.0 && lambda == 0.0) {
                    return invalid("density descriptor needs α ∈ [0, 2), λ ≥ 0 and λ > 0 when α = 0");
                }
                let density: DensityFn = Arc::new(move |y: &[f64]| {
                    let r = y[0].abs();
                    let c = if y[0] > 0.0 { c_plus } else { c_minus };
                    c * r.powf(-1.0 - alpha) * (-lambda * r).exp()
                });
                Self::density(1, density, alpha, None)?
            }
            MeasureDescriptor::Atoms { atoms } => Self::atoms(dimension, atoms)?,
        };
        spec.descriptor = Some(desc.clone());
        Ok(spec)
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.kind, MeasureKind::Atoms(a) if a.is_empty())
    }

    /// Whether `ν(-dy) = ν(dy)`.
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            MeasureKind::Radial(_) => true,
            MeasureKind::Atoms(atoms) => atoms.iter().all(|a| {
                atoms.iter().any(|b| {
                    b.mass == a.mass && b.location.iter().zip(&a.location).all(|(p, q)| *p == -*q)
                })
            }),
            MeasureKind::Density(_) => match &self.descriptor {
                Some(MeasureDescriptor::Density { c_plus, c_minus, .. }) => c_plus == c_minus,
                _ => false,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dimension) {
            return invalid("measures are supported for d = 1, 2, 3");
        }
        if !(0.0..2.0).contains(&self.singularity_order) {
            return invalid("singularity order must lie in [0, 2)");
        }
        if let Some(r) = self.support_radius {
            if !(r > 0.0) {
                return invalid("support radius must be positive");
            }
        }
        let (small, large) = self.levy_integrability()?;
        if !(small.is_finite() && large.is_finite()) {
            return invalid("∫ min(1, |y|²) ν(dy) is not finite");
        }
        Ok(())
    }

    /// `(∫_{|y|<1} |y|² ν, ∫_{|y|≥1} ν)`.
    pub fn levy_integrability(&self) -> Result<(f64, f64)> {
        if let MeasureKind::Atoms(atoms) = &self.kind {
            let mut small = 0.0;
            let mut large = 0.0;
            for a in atoms {
                let r2: f64 = a.location.iter().map(|v| v * v).sum();
                if r2 < 1.0 {
                    small += a.mass * r2;
                } else {
                    large += a.mass;
                }
            }
            return Ok((small, large));
        }
        let mut small = 0.0;
        let mut large = 0.0;
        for ray in self.rays() {
            small += small_jump_integral(&|r| ray.weight(self, r) * r * r, self.singularity_order, 1e-12)?;
            large += self.outer_moment_on_ray(&ray, 0.0, 0.95, 8)?.value;
        }
        Ok((small, large))
    }

    /// Radial weight `n(r) r^{d-1}` along rays; one ray for radial measures.
    pub(crate) fn rays(&self) -> Vec<Ray> {
        match &self.kind {
            MeasureKind::Radial(_) => vec![Ray {
                direction: Vec::new(),
                weight: sphere_area(self.dimension),
            }],
            MeasureKind::Density(_) => {
                let rule = AngularRule::new(self.dimension, 1);
                rule.directions
                    .into_iter()
                    .zip(rule.weights)
                    .map(|(direction, weight)| Ray { direction, weight })
                    .collect()
            }
            MeasureKind::Atoms(_) => Vec::new(),
        }
    }

    /// Rays with explicit directions, also for radial measures (direct route).
    pub(crate) fn directional_rays(&self) -> Vec<Ray> {
        match &self.kind {
            MeasureKind::Radial(_) => {
                let rule = AngularRule::new(self.dimension, 1);
                rule.directions
                    .into_iter()
                    .zip(rule.weights)
                    .map(|(direction, weight)| Ray { direction, weight })
                    .collect()
            }
            _ => self.rays(),
        }
    }

    fn outer_moment_on_ray(
        &self,
        ray: &Ray,
        beta: f64,
        decay_ratio: f64,
        fail_run: usize,
    ) -> Result<MomentReport> {
        let gl = GaussLegendre::order16();
        let cutoff = self.support_radius;
        let sum = dyadic_outer_sum(
            |j| {
                let a = 2f64.powi(j as i32);
                let mut b = 2.0 * a;
                if let Some(rs) = cutoff {
                    if a >= rs {
                        return 0.0;
                    }
                    b = b.min(rs);
                }
                gl.composite(a, b, 2, |r| ray.weight(self, r) * r.powf(beta))
            },
            decay_ratio,
            fail_run,
            1e-13,
            OUTER_CAP,
        );
        Ok(MomentReport {
            beta,
            value: sum.value,
            finite: sum.finite,
            shell_sums: sum.shell_sums,
        })
    }

    /// `∫_{|y|≥1} |y|^β ν(dy)` with the shell-ratio divergence rule.
    pub fn moment(&self, beta: f64, decay_ratio: f64, fail_run: usize) -> Result<MomentReport> {
        if !(beta >= 0.0) {
            return invalid("moment order must be non-negative");
        }
        if let MeasureKind::Atoms(atoms) = &self.kind {
            let value = atoms
                .iter()
                .map(|a| (a.mass, a.location.iter().map(|v| v * v).sum::<f64>().sqrt()))
                .filter(|(_, r)| *r >= 1.0)
                .map(|(m, r)| m * r.powf(beta))
                .sum();
            return Ok(MomentReport {
                beta,
                value,
                finite: true,
                shell_sums: Vec::new(),
            });
        }
        let mut value = 0.0;
        let mut finite = true;
        let mut shells: Vec<f64> = Vec::new();
        for ray in self.rays() {
            let rep = self.outer_moment_on_ray(&ray, beta, decay_ratio, fail_run)?;
            finite &= rep.finite;
            value += rep.value;
            if shells.len() < rep.shell_sums.len() {
                shells.resize(rep.shell_sums.len(), 0.0);
            }
            for (s, v) in shells.iter_mut().zip(&rep.shell_sums) {
                *s += v;
            }
        }
        Ok(MomentReport {
            beta,
            value: if finite { value } else { f64::INFINITY },
            finite,
            shell_sums: shells,
        })
    }

    /// Jump part `∫ (1 - e^{iy·ξ} + i y·ξ 1_{|y|<1}) ν(dy)`.
    pub fn jump_exponent(&self, xi: &[f64], tol: f64) -> Result<Complex64> {
        let rho = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rho == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        match &self.kind {
            MeasureKind::Atoms(atoms) => Ok(atoms
                .iter()
                .map(|a| {
                    let z: f64 = a.location.iter().zip(xi).map(|(y, x)| y * x).sum();
                    let r2: f64 = a.location.iter().map(|v| v * v).sum();
                    let comp = if r2 < 1.0 { z } else { 0.0 };
                    a.mass * Complex64::new(1.0 - z.cos(), comp - z.sin())
                })
                .sum()),
            MeasureKind::Radial(profile) => {
                let d = self.dimension;
                let area = sphere_area(d);
                let w = |r: f64| area * profile(r) * r.powi(d as i32 - 1);
                let re = half_line(&w, Kernel::OneMinusBessel(d as i32 - 2), rho, self, tol)?;
                Ok(Complex64::new(re, 0.0))
            }
            MeasureKind::Density(density) => {
                let mut total = Complex64::new(0.0, 0.0);
                for ray in self.rays() {
                    let proj: f64 = ray.direction.iter().zip(xi).map(|(a, b)| a * b).sum();
                    if proj == 0.0 {
                        continue;
                    }
                    let d = self.dimension;
                    let dir = ray.direction.clone();
                    let w = |r: f64| {
                        let y: Vec<f64> = dir.iter().map(|v| v * r).collect();
                        ray.weight * density(&y) * r.powi(d as i32 - 1)
                    };
                    let rp = proj.abs();
                    let re = half_line(&w, Kernel::OneMinusBessel(-1), rp, self, tol)?;
                    let im = half_line(&w, Kernel::CompensatedSine, rp, self, tol)?;
                    total += Complex64::new(re, im * proj.signum());
                }
                Ok(total)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Ray {
    pub direction: Vec<f64>,
    pub weight: f64,
}

impl Ray {
    /// `weight · n(rθ) r^{d-1}`.
    pub fn weight(&self, nu: &LevyMeasureSpec, r: f64) -> f64 {
        let d = nu.dimension as i32;
        if let Some(rs) = nu.support_radius {
            if r >= rs {
                return 0.0;
            }
        }
        match &nu.kind {
            MeasureKind::Radial(p) => self.weight * p(r) * r.powi(d - 1),
            MeasureKind::Density(n) => {
                let y: Vec<f64> = self.direction.iter().map(|v| v * r).collect();
                self.weight * n(&y) * r.powi(d - 1)
            }
            MeasureKind::Atoms(_) => 0.0,
        }
    }
}

/// Kernels `K(z)` integrated against a ray weight, `z = rρ`.
#[derive(Debug, Clone, Copy)]
enum Kernel {
    /// `1 - Λ_ν(z)` with `ν = two_nu/2`; `two_nu = -1` gives `1 - cos z`.
    OneMinusBessel(i32),
    /// `z - sin z` for `r < 1`, `-sin z` for `r ≥ 1`.
    CompensatedSine,
}

impl Kernel {
    fn small(self, z: f64) -> f64 {
        match self {
            Kernel::OneMinusBessel(-1) => {
                let s = (0.5 * z).sin();
                2.0 * s * s
            }
            Kernel::OneMinusBessel(nu2) => one_minus_normalized_bessel(nu2, z),
            Kernel::CompensatedSine => z_minus_sin(z),
        }
    }

    fn large(self, z: f64) -> f64 {
        match self {
            Kernel::OneMinusBessel(_) => self.small(z),
            Kernel::CompensatedSine => -z.sin(),
        }
    }

    /// `large = constant - oscillatory`.
    fn constant(self) -> f64 {
        match self {
            Kernel::OneMinusBessel(_) => 1.0,
            Kernel::CompensatedSine => 0.0,
        }
    }

    fn oscillatory(self, z: f64) -> f64 {
        match self {
            Kernel::OneMinusBessel(nu2) => normalized_bessel(nu2, z),
            Kernel::CompensatedSine => z.sin(),
        }
    }

    /// Phase of the asymptotic zeros `z_k = phase + kπ` of the oscillatory part.
    fn zero_phase(self) -> f64 {
        match self {
            Kernel::OneMinusBessel(nu2) => (nu2 as f64 / 2.0 + 1.5) * PI / 2.0,
            Kernel::CompensatedSine => 0.0,
        }
    }
}

fn z_minus_sin(z: f64) -> f64 {
    if z.abs() < 0.1 {
        // z³/6 - z⁵/120 + z⁷/5040 - z⁹/362880
        let z2 = z * z;
        z * z2 * (1.0 / 6.0 - z2 * (1.0 / 120.0 - z2 * (1.0 / 5040.0 - z2 / 362880.0)))
    } else {
        z - z.sin()
    }
}

/// `∫_0^1 f(r) dr` over dyadic shells for integrands `O(r^{1-s})` at the origin.
pub(crate) fn small_jump_integral(f: &dyn Fn(f64) -> f64, s: f64, tol: f64) -> Result<f64> {
    small_shells(f, s, tol, |_| 1)
}

fn small_shells(
    f: &dyn Fn(f64) -> f64,
    s: f64,
    tol: f64,
    panels: impl Fn(f64) -> usize,
) -> Result<f64> {
    let gl = GaussLegendre::order16();
    let mut total = 0.0;
    let mut prev = f64::NAN;
    let mut prev_ratio = f64::NAN;
    for j in 0..SHELL_CAP {
        let b = 2f64.powi(-(j as i32));
        let a = 0.5 * b;
        let shell = gl.composite(a, b, panels(b - a), f);
        if !shell.is_finite() {
            break;
        }
        total += shell;
        if shell == 0.0 && j > 0 {
            return Ok(total);
        }
        if j >= 2 {
            let ratio = shell / prev;
            if ratio > 0.0 && ratio < 1.0 {
                let tail = shell * ratio / (1.0 - ratio);
                // close geometrically once the ratio is stationary or the tail negligible
                let stationary = ((ratio - prev_ratio) / ratio).abs() < 1e-10;
                if stationary || tail.abs() <= tol * total.abs().max(1.0) {
                    return Ok(total + tail);
                }
            }
            prev_ratio = ratio;
        }
        prev = shell;
    }
    Err(LevyError::QuadratureDivergence(format!(
        "small-jump shells did not settle (singularity order {s})"
    )))
}

/// `∫_0^∞ w(r) K(rρ) dr` with the compensated kernel on `(0,1)`.
fn half_line(w: &dyn Fn(f64) -> f64, kernel: Kernel, rho: f64, nu: &LevyMeasureSpec, tol: f64) -> Result<f64> {
    let small = small_shells(&|r| w(r) * kernel.small(r * rho), nu.singularity_order, tol, |width| {
        (width * rho / 6.0).ceil() as usize + 1
    })?;
    Ok(small + outer_half_line(w, kernel, rho, nu.support_radius, tol)?)
}

fn outer_half_line(
    w: &dyn Fn(f64) -> f64,
    kernel: Kernel,
    rho: f64,
    support: Option<f64>,
    tol: f64,
) -> Result<f64> {
    let gl = GaussLegendre::order16();
    let panels = |a: f64, b: f64| ((b - a) * rho / 6.0).ceil() as usize + 1;
    if let Some(rs) = support {
        if rs <= 1.0 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        let mut a = 1.0;
        while a < rs {
            let b = (2.0 * a).min(rs);
            total += gl.composite(a, b, panels(a, b), |r| w(r) * kernel.large(r * rho));
            a = b;
        }
        return Ok(total);
    }
    // Phase A: a few octaves with the full kernel while oscillation is mild.
    let mut total = 0.0;
    let mut a = 1.0;
    let mut prev_mass = f64::NAN;
    for _ in 0..OUTER_CAP {
        if a * rho > 64.0 {
            break;
        }
        let b = 2.0 * a;
        total += gl.composite(a, b, panels(a, b), |r| w(r) * kernel.large(r * rho));
        let mass = gl.composite(a, b, 2, w);
        let q = mass / prev_mass;
        prev_mass = mass;
        a = b;
        if q.is_finite() && q < 0.95 && 2.0 * mass * q / (1.0 - q) < tol {
            return Ok(total);
        }
        if mass == 0.0 {
            return Ok(total);
        }
    }
    // Phase B: constant part by dyadic shells, oscillatory part by half periods.
    let start = a;
    let constant = kernel.constant();
    let mass_tail = if constant != 0.0 {
        let sum = dyadic_outer_sum(
            |j| {
                let lo = start * 2f64.powi(j as i32);
                gl.composite(lo, 2.0 * lo, 2, w)
            },
            0.95,
            8,
            1e-14,
            OUTER_CAP,
        );
        if !sum.finite {
            return Err(LevyError::QuadratureDivergence(
                "mass of ν outside the unit ball did not converge".into(),
            ));
        }
        constant * sum.value
    } else {
        0.0
    };
    let phase = kernel.zero_phase();
    let z0 = start * rho;
    let mut k = ((z0 - phase) / PI).ceil();
    let first_end = (phase + k * PI) / rho;
    let head = gl.integrate(start, first_end, |r| w(r) * kernel.oscillatory(r * rho));
    let mut terms: Vec<Complex64> = Vec::new();
    let mut small_run = 0;
    for _ in 0..4000 {
        let lo = (phase + k * PI) / rho;
        let hi = (phase + (k + 1.0) * PI) / rho;
        let t = gl.integrate(lo, hi, |r| w(r) * kernel.oscillatory(r * rho));
        terms.push(Complex64::new(t, 0.0));
        k += 1.0;
        if t.abs() < 1e-3 * tol {
            small_run += 1;
            if small_run >= 4 {
                break;
            }
        } else {
            small_run = 0;
        }
    }
    let osc = head + euler_alternating_sum(&terms).re;
    Ok(total + mass_tail - osc)
}
