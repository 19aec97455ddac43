//! The generator `A = -ψ(D)`, its adjoint, and the weighted decay of `Aφ`.
//!
//! Two independent routes: a Fourier multiplier on a zero-padded lattice, and
//! pointwise quadrature of the integro-differential form
//! `b·∇f + ½ tr(Q∇²f) + ∫ (f(x+y) - f(x) - y·∇f(x) 1_{|y|<1}) ν(dy)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LevyError, Result};
use crate::functions::SmoothFn;
use crate::grid::{fft_nd, Grid, GridFunction};
use crate::quadrature::{linear_fit, GaussLegendre};
use crate::symbols::{small_jump_integral, LevyTriplet, MeasureKind, Ray, SymbolSpec};
use crate::tolerances::Tolerances;
use crate::Complex64;

/// Zero-padding factor used when none is requested.
pub fn default_padding(dimension: usize) -> usize {
    match dimension {
        1 => 16,
        2 => 4,
        _ => 2,
    }
}

#[derive(Debug, Clone, Copy)]
#[derive(Default)]
pub struct SpectralOptions {
    /// Zero-padding factor; `None` selects [`default_padding`].
    pub padding: Option<usize>,
    pub tolerances: Tolerances,
}


impl SpectralOptions {
    pub fn with_padding(padding: usize) -> Self {
        Self {
            padding: Some(padding),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub output: GridFunction,
    /// `max |Im| / max |f|` before the imaginary part is discarded (real cases only).
    pub imag_residue: f64,
    pub boundary_ratio: f64,
    pub padding: usize,
}

/// Applies the Fourier multiplier `m(ξ)` on the padded lattice of `f`.
pub(crate) fn spectral_apply(
    f: &GridFunction,
    padding: usize,
    multiplier: &dyn Fn(&Grid) -> Result<Vec<Complex64>>,
    real_output: bool,
    tol: &Tolerances,
) -> Result<SpectralResult> {
    let boundary_ratio = f.check_boundary(tol.boundary_band)?;
    let p = if f.periodic { 1 } else { padding.max(1) };
    let big = f.grid.padded(p)?;
    let mut data = f.grid.embed(&f.values, p);
    fft_nd(&mut data, big.dimension, big.n(), false);
    let m = multiplier(&big)?;
    data.par_iter_mut().zip(m.par_iter()).for_each(|(v, w)| *v *= w);
    fft_nd(&mut data, big.dimension, big.n(), true);
    let scale = 1.0 / big.len() as f64;
    let mut values: Vec<Complex64> = f.grid.crop(&data, p).into_iter().map(|v| v * scale).collect();
    let sup_in = f.sup_abs();
    let mut imag_residue = 0.0;
    if real_output {
        let sup_im = values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        imag_residue = if sup_in > 0.0 { sup_im / sup_in } else { sup_im };
        if imag_residue > tol.imag_residue {
            return Err(LevyError::Consistency(format!(
                "imaginary residue {imag_residue:.3e} exceeds {:.1e}",
                tol.imag_residue
            )));
        }
        for v in &mut values {
            v.im = 0.0;
        }
    }
    let mut output = GridFunction::with_fitted_envelope(f.grid, values, 0.0)?;
    output.periodic = f.periodic;
    Ok(SpectralResult {
        output,
        imag_residue,
        boundary_ratio,
        padding: p,
    })
}

/// `Af` by multiplying the lattice spectrum of `f` with `-ψ(ξ)`.
pub fn apply_generator_spectral(
    spec: &SymbolSpec,
    f: &GridFunction,
    opts: &SpectralOptions,
) -> Result<SpectralResult> {
    check_dims(spec, f)?;
    let padding = opts.padding.unwrap_or_else(|| default_padding(f.grid.dimension));
    let real = f.is_real() && spec.is_symmetric();
    spectral_apply(
        f,
        padding,
        &|g| Ok(spec.on_lattice(g)?.into_iter().map(|v| -v).collect()),
        real,
        &opts.tolerances,
    )
}

/// `A*φ` by multiplying with `-conj ψ(ξ)`.
pub fn apply_adjoint(spec: &SymbolSpec, phi: &GridFunction, opts: &SpectralOptions) -> Result<SpectralResult> {
    check_dims(spec, phi)?;
    let padding = opts.padding.unwrap_or_else(|| default_padding(phi.grid.dimension));
    let real = phi.is_real() && spec.is_symmetric();
    spectral_apply(
        phi,
        padding,
        &|g| Ok(spec.on_lattice(g)?.into_iter().map(|v| -v.conj()).collect()),
        real,
        &opts.tolerances,
    )
}

fn check_dims(spec: &SymbolSpec, f: &GridFunction) -> Result<()> {
    if spec.dimension != f.grid.dimension {
        return invalid("symbol and grid dimensions differ");
    }
    Ok(())
}

/// Below this radius (in units of the feature scale) the jump integrand is
/// replaced by its second-order Taylor polynomial to avoid cancellation.
const TAYLOR_RADIUS: f64 = 1.0 / 1024.0;

/// `Af(x)` at each point of `xs` from the triplet.
pub fn apply_generator_direct(
    triplet: &LevyTriplet,
    f: &dyn SmoothFn,
    xs: &[Vec<f64>],
    tol: f64,
) -> Result<Vec<Complex64>> {
    let d = triplet.dimension();
    if xs.iter().any(|x| x.len() != d) {
        return invalid("evaluation points have the wrong dimension");
    }
    let rays = match &triplet.nu.kind {
        MeasureKind::Atoms(_) => Vec::new(),
        _ => triplet.nu.directional_rays(),
    };
    let scale = f.feature_scale();
    let r_t = (TAYLOR_RADIUS * scale).min(0.5);
    let s = triplet.nu.singularity_order;
    // ray-wise constants independent of x
    let mut taylor = Vec::with_capacity(rays.len());
    let mut outer_mass = Vec::with_capacity(rays.len());
    for ray in &rays {
        let w = |u: f64| ray.weight(&triplet.nu, r_t * u) * r_t.powi(3) * u * u;
        taylor.push(small_jump_integral(&w, s, tol)?);
        outer_mass.push(ray_outer_mass(&triplet.nu, ray)?);
    }
    xs.par_iter()
        .map(|x| {
            let fx = f.value(x);
            let grad = f.gradient(x);
            let hess = f.hessian(x);
            let mut out = Complex64::new(0.0, 0.0);
            for i in 0..d {
                out += triplet.b[i] * grad[i];
                for j in 0..d {
                    out += 0.5 * triplet.q[i * d + j] * hess[i * d + j];
                }
            }
            if let MeasureKind::Atoms(atoms) = &triplet.nu.kind {
                for a in atoms {
                    let y: Vec<f64> = x.iter().zip(&a.location).map(|(p, q)| p + q).collect();
                    let r2: f64 = a.location.iter().map(|v| v * v).sum();
                    let mut term = f.value(&y) - fx;
                    if r2 < 1.0 {
                        for i in 0..d {
                            term -= a.location[i] * grad[i];
                        }
                    }
                    out += a.mass * term;
                }
                return Ok(out);
            }
            for (k, ray) in rays.iter().enumerate() {
                let th = &ray.direction;
                let mut quad = Complex64::new(0.0, 0.0);
                for i in 0..d {
                    for j in 0..d {
                        quad += th[i] * hess[i * d + j] * th[j];
                    }
                }
                out += 0.5 * quad * taylor[k];
                out += ray_small_exact(triplet, ray, f, x, fx, &grad, r_t);
                out += ray_outer(triplet, ray, f, x, scale, tol)? - fx * outer_mass[k];
            }
            Ok(out)
        })
        .collect()
}

fn shift(x: &[f64], dir: &[f64], r: f64) -> Vec<f64> {
    x.iter().zip(dir).map(|(a, b)| a + r * b).collect()
}

/// `∫_{r_T}^1 w(r) (f(x+rθ) - f(x) - rθ·∇f(x)) dr` over dyadic shells.
fn ray_small_exact(
    triplet: &LevyTriplet,
    ray: &Ray,
    f: &dyn SmoothFn,
    x: &[f64],
    fx: Complex64,
    grad: &[Complex64],
    r_t: f64,
) -> Complex64 {
    let gl = GaussLegendre::order16();
    let slope: Complex64 = ray.direction.iter().zip(grad).map(|(t, g)| t * g).sum();
    let panels = |a: f64, b: f64| ((b - a) / f.feature_scale()).ceil() as usize + 1;
    let mut total = Complex64::new(0.0, 0.0);
    let mut b = 1.0;
    while b > r_t {
        let a = (0.5 * b).max(r_t);
        total += gl.composite_complex(a, b, panels(a, b), |r| {
            (f.value(&shift(x, &ray.direction, r)) - fx - r * slope) * ray.weight(&triplet.nu, r)
        });
        b = a;
    }
    total
}

fn ray_outer_mass(nu: &crate::symbols::LevyMeasureSpec, ray: &Ray) -> Result<f64> {
    let gl = GaussLegendre::order16();
    let sum = crate::quadrature::dyadic_outer_sum(
        |j| {
            let a = 2f64.powi(j as i32);
            gl.composite(a, 2.0 * a, 2, |r| ray.weight(nu, r))
        },
        0.95,
        8,
        1e-14,
        400,
    );
    if !sum.finite {
        return Err(LevyError::QuadratureDivergence(
            "ν has infinite mass outside the unit ball".into(),
        ));
    }
    Ok(sum.value)
}

/// `∫_1^∞ w(r) f(x+rθ) dr`.
fn ray_outer(
    triplet: &LevyTriplet,
    ray: &Ray,
    f: &dyn SmoothFn,
    x: &[f64],
    scale: f64,
    tol: f64,
) -> Result<Complex64> {
    let gl = GaussLegendre::order16();
    let panel_width = 0.5 * scale;
    let piece = |a: f64, b: f64| {
        let panels = ((b - a) / panel_width).ceil() as usize + 1;
        gl.composite_complex(a, b, panels, |r| {
            f.value(&shift(x, &ray.direction, r)) * ray.weight(&triplet.nu, r)
        })
    };
    let support_nu = triplet.nu.support_radius.unwrap_or(f64::INFINITY);
    if let Some(rf) = f.support_radius() {
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let end = (xn + rf).min(support_nu);
        if end <= 1.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let mut total = Complex64::new(0.0, 0.0);
        let mut a = 1.0;
        while a < end {
            let b = (2.0 * a).min(end);
            total += piece(a, b);
            a = b;
        }
        return Ok(total);
    }
    let mut total = Complex64::new(0.0, 0.0);
    let mut a = 1.0;
    for _ in 0..60 {
        if a >= support_nu {
            return Ok(total);
        }
        let b = (2.0 * a).min(support_nu);
        let s = piece(a, b);
        total += s;
        if s.norm() <= tol * total.norm().max(1.0) && a >= 8.0 {
            return Ok(total);
        }
        a = b;
    }
    Err(LevyError::QuadratureDivergence(
        "large-jump integral of f did not converge; f grows too fast for ν".into(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayVerdict {
    /// Outer annuli vanish to machine precision.
    Local,
    Finite,
    Diverges,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayNormReport {
    pub beta: f64,
    pub window: f64,
    /// `∫_{|x|≤R_w} (1+|x|^β) |Aφ| dx` on the lattice.
    pub partial: f64,
    /// `(r_lo, r_hi, contribution)` for dyadic annuli.
    pub annuli: Vec<(f64, f64, f64)>,
    /// Slope of log-contribution against log-radius over the outer annuli.
    pub tail_slope: f64,
    /// Geometric extrapolation beyond the window; `+∞` when diverging.
    pub tail_estimate: f64,
    pub verdict: DecayVerdict,
    /// Agreement of the verdict with finiteness of `∫_{|y|≥1}|y|^β ν(dy)`, when supplied.
    pub consistent_with_moment: Option<bool>,
}

/// Weighted `L¹` norm of sampled `Aφ` with a dyadic tail fit.
pub fn weighted_decay_norm(
    af: &GridFunction,
    beta: f64,
    window: f64,
    moment_finite: Option<bool>,
) -> Result<DecayNormReport> {
    if !(beta >= 0.0) || !(window > 0.0) {
        return invalid("β must be non-negative and the window positive");
    }
    let g = &af.grid;
    if window > 0.5 * g.period() {
        return invalid("window exceeds the lattice");
    }
    let vol = g.cell_volume();
    let n_annuli = window.log2().floor().max(0.0) as usize;
    let mut annuli: Vec<(f64, f64, f64)> = (0..n_annuli)
        .map(|j| (2f64.powi(j as i32), 2f64.powi(j as i32 + 1), 0.0))
        .collect();
    let mut partial = 0.0;
    for (i, v) in af.values.iter().enumerate() {
        let x = g.point(i);
        let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        if r > window {
            continue;
        }
        let c = (1.0 + r.powf(beta)) * v.norm() * vol;
        partial += c;
        if r >= 1.0 {
            let j = r.log2().floor() as usize;
            if j < annuli.len() {
                annuli[j].2 += c;
            }
        }
    }
    let scale = partial.max(f64::MIN_POSITIVE);
    let outer: Vec<&(f64, f64, f64)> = annuli.iter().rev().take(3).collect();
    let (verdict, tail_slope, tail_estimate) = if outer.len() < 2 {
        (DecayVerdict::Finite, f64::NAN, 0.0)
    } else if outer.iter().all(|a| a.2 <= 1e-14 * scale) {
        (DecayVerdict::Local, f64::NEG_INFINITY, 0.0)
    } else {
        let xs: Vec<f64> = outer.iter().map(|a| a.0.ln()).collect();
        let ys: Vec<f64> = outer.iter().map(|a| a.2.max(f64::MIN_POSITIVE).ln()).collect();
        let slope = linear_fit(&xs, &ys).map(|f| f.0).unwrap_or(f64::NAN);
        let q = 2f64.powf(slope);
        if q < 0.95 {
            let last = annuli.last().unwrap().2;
            (DecayVerdict::Finite, slope, last * q / (1.0 - q))
        } else {
            (DecayVerdict::Diverges, slope, f64::INFINITY)
        }
    };
    let consistent_with_moment = moment_finite.map(|m| m == (verdict != DecayVerdict::Diverges));
    Ok(DecayNormReport {
        beta,
        window,
        partial,
        annuli,
        tail_slope,
        tail_estimate,
        verdict,
        consistent_with_moment,
    })
}
