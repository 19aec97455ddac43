//! Transition densities `p_t`, the semigroup `P_t u = E u(· + X_t)` and the
//! radial dimension walk for subordinated Brownian motion.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{invalid, LevyError, Result};
use crate::functions::SmoothFn;
use crate::generator::{spectral_apply, SpectralResult};
use crate::grid::{fft_nd, Envelope, Grid, GridFunction};
use crate::quadrature::{linear_fit, pairwise_sum, GaussLegendre};
use crate::special::{normalized_bessel, sphere_area};
use crate::symbols::{Subordinator, SymbolSpec};
use crate::tolerances::Tolerances;
use crate::Complex64;

/// Zero-padding factor of the inversion lattice when none is requested.
pub fn default_density_padding(dimension: usize) -> usize {
    match dimension {
        1 => 8,
        2 => 4,
        _ => 2,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DensityOptions {
    pub padding: Option<usize>,
    pub tolerances: Tolerances,
}

/// `p_t` sampled on a window, backed by a `P`-times larger inversion lattice.
#[derive(Debug, Clone)]
pub struct DensityTable {
    pub spec: SymbolSpec,
    pub grid: Grid,
    pub t: f64,
    pub padding: usize,
    /// `p_t` on the window, after clipping.
    pub values: Vec<f64>,
    /// Mass of the inversion lattice outside the window.
    pub tail_mass: f64,
    /// `Σ |negative part| h^d` removed by clipping.
    pub clip_mass: f64,
    /// Most negative raw value before clipping.
    pub min_raw: f64,
    /// Recorded `E|X_t|^β`, keyed by `β` formatted as text.
    pub moments: BTreeMap<String, f64>,
    pub tolerances: Tolerances,
    padded_grid: Grid,
    padded_values: Vec<f64>,
    /// `e^{-tψ}` on the inversion lattice in FFT order.
    spectrum: Vec<Complex64>,
}

/// Fourier inversion of `e^{-tψ}` with `p_t(x) = (2π)^{-d} ∫ e^{-iξ·x} e^{-tψ(ξ)} dξ`.
pub fn transition_density(spec: &SymbolSpec, t: f64, grid: Grid) -> Result<DensityTable> {
    transition_density_with(spec, t, grid, &DensityOptions::default())
}

pub fn transition_density_with(
    spec: &SymbolSpec,
    t: f64,
    grid: Grid,
    opts: &DensityOptions,
) -> Result<DensityTable> {
    if !(t > 0.0 && t.is_finite()) {
        return invalid("time must be positive");
    }
    if grid.dimension != spec.dimension {
        return invalid("grid and symbol dimensions differ");
    }
    let tol = opts.tolerances;
    resolution_test(spec, t, &grid, tol.resolution)?;
    let padding = opts.padding.unwrap_or_else(|| default_density_padding(grid.dimension)).max(1);
    let big = grid.padded(padding)?;
    let psi = spec.on_lattice(&big)?;
    let spectrum: Vec<Complex64> = psi.par_iter().map(|v| (-t * v).exp()).collect();
    let d = grid.dimension;
    let n = big.n();
    let mut data: Vec<Complex64> = spectrum
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let m = big.multi_index(i);
            let parity: usize = (0..d).map(|a| m[a]).sum();
            if parity.is_multiple_of(2) {
                *s
            } else {
                -*s
            }
        })
        .collect();
    fft_nd(&mut data, d, n, false);
    let scale = 1.0 / big.period().powi(d as i32);
    let vol = big.cell_volume();
    let mut clip_mass = 0.0;
    let mut min_raw = f64::INFINITY;
    let padded_values: Vec<f64> = data
        .iter()
        .map(|v| {
            let p = v.re * scale;
            min_raw = min_raw.min(p);
            if p < 0.0 {
                clip_mass += -p * vol;
                0.0
            } else {
                p
            }
        })
        .collect();
    if clip_mass > tol.clip_abort {
        return Err(LevyError::Consistency(format!(
            "clipped negative mass {clip_mass:.3e} exceeds {:.1e}",
            tol.clip_abort
        )));
    }
    let values = grid.crop(&padded_values, padding);
    let total = pairwise_sum(&padded_values) * vol;
    let window = pairwise_sum(&values) * vol;
    Ok(DensityTable {
        spec: spec.clone(),
        grid,
        t,
        padding,
        values,
        tail_mass: total - window,
        clip_mass,
        min_raw,
        moments: BTreeMap::new(),
        tolerances: tol,
        padded_grid: big,
        padded_values,
        spectrum,
    })
}

/// `e^{-t Re ψ}` must be negligible on the axis and corner frequencies `±π/h`.
fn resolution_test(spec: &SymbolSpec, t: f64, grid: &Grid, bound: f64) -> Result<()> {
    let d = grid.dimension;
    let k = grid.max_frequency();
    let mut probes: Vec<Vec<f64>> = Vec::new();
    for a in 0..d {
        let mut xi = vec![0.0; d];
        xi[a] = k;
        probes.push(xi);
    }
    for signs in 0..(1usize << d) {
        probes.push((0..d).map(|a| if signs >> a & 1 == 1 { -k } else { k }).collect());
    }
    for xi in probes {
        let decay = (-t * spec.eval(&xi)?.re).exp();
        if !(decay < bound) {
            return Err(LevyError::Resolution(format!(
                "e^(-t Re ψ) = {decay:.3e} at ξ = {xi:?} is not below {bound:.1e}"
            )));
        }
    }
    Ok(())
}

impl DensityTable {
    pub fn padded_grid(&self) -> &Grid {
        &self.padded_grid
    }

    pub fn padded_values(&self) -> &[f64] {
        &self.padded_values
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// Window mass plus tail mass.
    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.cell_volume() + self.tail_mass
    }

    /// Per-axis factors `e^{-iξ_k x_a}` of the inversion sum.
    fn phases(&self, x: &[f64]) -> Vec<Vec<Complex64>> {
        let n = self.padded_grid.n();
        let scale = 2.0 * PI / self.padded_grid.period();
        x.iter()
            .map(|&xa| {
                (0..n)
                    .map(|j| Complex64::from_polar(1.0, -(self.padded_grid.wavenumber(j) as f64) * scale * xa))
                    .collect()
            })
            .collect()
    }

    /// `Σ_k w_k e^{-iξ_k·x} / (PL)^d` for spectral weights `w`.
    fn inversion_sum(&self, x: &[f64], weight: impl Fn(usize) -> Complex64 + Sync) -> Complex64 {
        let phases = self.phases(x);
        let g = &self.padded_grid;
        let terms: Vec<Complex64> = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let m = g.multi_index(i);
                let mut e = weight(i);
                for (a, ph) in phases.iter().enumerate() {
                    e *= ph[m[a]];
                }
                e
            })
            .collect();
        let sum: Complex64 = terms.iter().sum();
        sum / g.period().powi(g.dimension as i32)
    }

    /// `p_t(x)` at an arbitrary point from the stored spectrum.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.inversion_sum(x, |i| self.spectrum[i]).re
    }

    /// `∇p_t(x)` from the stored spectrum.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.padded_grid;
        (0..g.dimension)
            .map(|a| {
                self.inversion_sum(x, |i| {
                    let xi = g.frequency(i)[a];
                    Complex64::new(0.0, -xi) * self.spectrum[i]
                })
                .re
            })
            .collect()
    }

    /// Window values as a grid function with a fitted bounded envelope.
    pub fn to_grid_function(&self) -> Result<GridFunction> {
        let values = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        GridFunction::with_fitted_envelope(self.grid, values, 0.0)
    }

    /// Computes `E|X_t|^β` and records it in [`DensityTable::moments`].
    pub fn record_moment(&mut self, beta: f64) -> Result<DensityMoment> {
        let m = density_moment(self, beta)?;
        self.moments.insert(format!("{beta}"), m.value);
        Ok(m)
    }

    pub fn sidecar(&self) -> serde_json::Value {
        json!({
            "t": self.t,
            "tail_mass": self.tail_mass,
            "clip_mass": self.clip_mass,
            "moments": self.moments,
        })
    }

    /// Binary window dump plus the JSON sidecar next to it.
    pub fn write(&self, binary: impl AsRef<Path>, sidecar: impl AsRef<Path>) -> Result<()> {
        self.to_grid_function()?.write_binary(binary)?;
        std::fs::write(sidecar, serde_json::to_string_pretty(&self.sidecar())?)?;
        Ok(())
    }

    /// Spectral lattice gradient `|∇p_t|` on the inversion lattice.
    fn lattice_gradient_norm(&self) -> Vec<f64> {
        let g = &self.padded_grid;
        let d = g.dimension;
        let mut norm2 = vec![0.0; g.len()];
        for a in 0..d {
            let mut data: Vec<Complex64> = (0..g.len())
                .map(|i| {
                    let m = g.multi_index(i);
                    let parity: usize = (0..d).map(|b| m[b]).sum();
                    let xi = g.frequency(i)[a];
                    let v = Complex64::new(0.0, -xi) * self.spectrum[i];
                    if parity.is_multiple_of(2) {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            fft_nd(&mut data, d, g.n(), false);
            let scale = 1.0 / g.period().powi(d as i32);
            for (acc, v) in norm2.iter_mut().zip(&data) {
                *acc += (v.re * scale).powi(2);
            }
        }
        norm2.into_iter().map(f64::sqrt).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub sup_density: f64,
    pub argmax_density: Vec<f64>,
    pub sup_gradient: f64,
    pub argmax_gradient: Vec<f64>,
    /// Finite sups on a resolved lattice; a numerical proxy only.
    pub consistent_with_c1: bool,
    pub proxy: bool,
    pub method: String,
}

/// `sup p_t` and `sup |∇p_t|`, located on the lattice and refined by golden-section search.
pub fn density_regularity_report(table: &DensityTable) -> Result<RegularityReport> {
    let g = table.padded_grid;
    let (imax, _) = argmax(&table.padded_values);
    let density_at = |x: &[f64]| table.eval(x);
    let (argmax_density, sup_density) = refine(&g.point(imax), g.h(), &density_at);
    let grad = table.lattice_gradient_norm();
    let (jmax, _) = argmax(&grad);
    let grad_at = |x: &[f64]| table.gradient(x).iter().map(|v| v * v).sum::<f64>().sqrt();
    let (argmax_gradient, sup_gradient) = refine(&g.point(jmax), g.h(), &grad_at);
    Ok(RegularityReport {
        sup_density,
        argmax_density,
        sup_gradient,
        argmax_gradient,
        consistent_with_c1: sup_density.is_finite() && sup_gradient.is_finite(),
        proxy: true,
        method: "spectral gradient on the inversion lattice, golden-section refinement".into(),
    })
}

fn argmax(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
}

/// Coordinate-wise golden-section maximization within one lattice step.
fn refine(start: &[f64], h: f64, f: &dyn Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x = start.to_vec();
    for a in 0..x.len() {
        let mut lo = x[a] - h;
        let mut hi = x[a] + h;
        let at = |v: f64, x: &mut Vec<f64>| {
            x[a] = v;
            f(x)
        };
        let mut c = hi - ratio * (hi - lo);
        let mut dd = lo + ratio * (hi - lo);
        let mut fc = at(c, &mut x);
        let mut fd = at(dd, &mut x);
        for _ in 0..48 {
            if fc > fd {
                hi = dd;
                dd = c;
                fd = fc;
                c = hi - ratio * (hi - lo);
                fc = at(c, &mut x);
            } else {
                lo = c;
                c = dd;
                fc = fd;
                dd = lo + ratio * (hi - lo);
                fd = at(dd, &mut x);
            }
        }
        let best = if fc > fd { c } else { dd };
        let start_value = at(start[a], &mut x);
        let refined = at(best, &mut x);
        x[a] = if refined >= start_value { best } else { start[a] };
    }
    let value = f(&x);
    (x, value)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityMoment {
    pub beta: f64,
    /// Lattice sum plus geometric tail; `+∞` when the annuli do not decay.
    pub value: f64,
    pub finite: bool,
    pub lattice_sum: f64,
    pub tail_estimate: f64,
    /// `(r_lo, r_hi, Σ |x|^β p h^d)` over dyadic annuli.
    pub annuli: Vec<(f64, f64, f64)>,
    /// Fitted ratio of consecutive outer annuli.
    pub fitted_ratio: Option<f64>,
}

/// `E|X_t|^β` from the inversion lattice with a dyadic-annulus tail fit.
///
/// Annuli stop at `PL/8`, where periodic images of the density are still
/// negligible for power-law tails.
pub fn density_moment(table: &DensityTable, beta: f64) -> Result<DensityMoment> {
    if !(beta >= 0.0) {
        return invalid("moment order must be non-negative");
    }
    let g = &table.padded_grid;
    let vol = g.cell_volume();
    let limit = g.period() / 8.0;
    let top = if limit >= 2.0 { limit.log2().floor() as i32 } else { 0 };
    let radius = 2f64.powi(top).min(limit);
    let n_annuli = top.max(0) as usize;
    let pmax = table.padded_values.iter().cloned().fold(0.0, f64::max);
    let floor = 64.0 * f64::EPSILON * pmax;
    let mut annuli: Vec<(f64, f64, f64)> = (0..n_annuli)
        .map(|j| (2f64.powi(j as i32), 2f64.powi(j as i32 + 1), 0.0))
        .collect();
    let mut inner = Vec::new();
    for (i, &p) in table.padded_values.iter().enumerate() {
        if p <= floor {
            continue;
        }
        let x = g.point(i);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r >= radius {
            continue;
        }
        let c = if beta == 0.0 { p * vol } else { r.powf(beta) * p * vol };
        if r < 1.0 {
            inner.push(c);
        } else {
            let j = (r.log2().floor() as usize).min(n_annuli.saturating_sub(1));
            annuli[j].2 += c;
        }
    }
    let lattice_sum = pairwise_sum(&inner) + annuli.iter().map(|a| a.2).sum::<f64>();
    let significant = |a: &(f64, f64, f64)| a.2 > 1e-15 * lattice_sum;
    let last_significant = annuli.iter().rposition(significant);
    let (finite, tail, ratio) = match last_significant {
        None => (true, 0.0, None),
        Some(j) if j + 1 < annuli.len() => (true, 0.0, None),
        Some(j) if j < 2 => (true, 0.0, None),
        Some(j) => {
            let xs: Vec<f64> = (j - 2..=j).map(|k| k as f64).collect();
            let ys: Vec<f64> = annuli[j - 2..=j].iter().map(|a| a.2.ln()).collect();
            let q = linear_fit(&xs, &ys).map(|f| f.0.exp()).unwrap_or(f64::INFINITY);
            if q < table.tolerances.moment_decay_ratio {
                (true, annuli[j].2 * q / (1.0 - q), Some(q))
            } else {
                (false, f64::INFINITY, Some(q))
            }
        }
    };
    Ok(DensityMoment {
        beta,
        value: if finite { lattice_sum + tail } else { f64::INFINITY },
        finite,
        lattice_sum,
        tail_estimate: tail,
        annuli,
        fitted_ratio: ratio,
    })
}

/// Input to [`apply_semigroup`].
#[derive(Clone, Copy)]
pub enum SemigroupInput<'a> {
    Grid(&'a GridFunction),
    Callable { f: &'a dyn SmoothFn, envelope: Envelope },
}

impl SemigroupInput<'_> {
    fn envelope(&self) -> Envelope {
        match self {
            SemigroupInput::Grid(u) => u.envelope,
            SemigroupInput::Callable { envelope, .. } => *envelope,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemigroupMethod {
    /// Fourier multiplier `e^{-tψ}`; no truncation.
    Spectral,
    /// Lattice convolution against `p_t` over a box; truncation bounded.
    LatticeConvolution,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemigroupResult {
    pub values: Vec<Complex64>,
    /// Certified bound on the truncated part of the convolution at each point.
    pub truncation_bound: Vec<f64>,
    /// Mass of `p_t` outside the convolution box.
    pub tail_mass: f64,
    pub box_radius: f64,
    pub method: SemigroupMethod,
}

/// Checks `γ < β` and returns `E|X_t|^β` when `γ > 0`.
fn growth_moment(table: &DensityTable, gamma: f64, beta: f64) -> Result<f64> {
    if !(gamma < beta) {
        return Err(LevyError::Growth { gamma, beta });
    }
    if gamma == 0.0 {
        return Ok(1.0);
    }
    let jump = table.spec.jump_moment(beta, &table.tolerances)?;
    if !jump.finite {
        return Err(LevyError::MomentDivergence { beta });
    }
    let m = density_moment(table, beta)?;
    if !m.finite {
        return Err(LevyError::MomentDivergence { beta });
    }
    Ok(m.value)
}

/// `M 2^γ (1 + |x|^γ) [T + T^{1-γ/β} E^{γ/β}]` from the split `|x+y|^γ ≤ 2^γ(|x|^γ + |y|^γ)`
/// and Hölder's inequality on `{|y| > R}`.
pub fn truncation_bound(env: Envelope, x: &[f64], tail: f64, moment: f64, beta: f64) -> f64 {
    if tail <= 0.0 {
        return 0.0;
    }
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let g = env.gamma;
    let holder = tail.powf(1.0 - g / beta) * moment.powf(g / beta);
    env.m * 2f64.powf(g) * (1.0 + r.powf(g)) * (tail + holder)
}

/// Lattice kernel `(offset, p(y) h^d)` over `|y|_∞ ≤ radius`.
pub(crate) fn kernel_box(table: &DensityTable, radius: f64) -> Vec<(Vec<i64>, f64)> {
    let g = &table.padded_grid;
    let centre = (g.n() / 2) as i64;
    let vol = g.cell_volume();
    (0..g.len())
        .filter(|&i| g.in_box(i, radius))
        .map(|i| {
            let m = g.multi_index(i);
            let off = (0..g.dimension).map(|a| m[a] as i64 - centre).collect();
            (off, table.padded_values[i] * vol)
        })
        .filter(|(_, w)| *w > 0.0)
        .collect()
}

/// `P_t u(x) = ∫ u(x+y) p_t(y) dy` at the points `xs`.
///
/// Lattice-periodic and boundary-decaying grid data go through the Fourier
/// multiplier. Other grid data and callables use a truncated lattice
/// convolution whose remainder is bounded through `E|X_t|^β`.
pub fn apply_semigroup(
    table: &DensityTable,
    u: SemigroupInput<'_>,
    xs: &[Vec<f64>],
    beta: f64,
) -> Result<SemigroupResult> {
    let env = u.envelope();
    let d = table.grid.dimension;
    if xs.iter().any(|x| x.len() != d) {
        return invalid("evaluation points have the wrong dimension");
    }
    let moment = growth_moment(table, env.gamma, beta)?;
    match u {
        SemigroupInput::Grid(f) => {
            if f.grid.dimension != d || f.grid.h() != table.grid.h() {
                return invalid("grid function must share dimension and spacing with the table");
            }
            let decays = f.periodic || f.boundary_ratio() < table.tolerances.boundary_band;
            if decays {
                let out = if f.periodic || f.grid != table.grid {
                    apply_semigroup_spectral(&table.spec, table.t, f, Some(table.padding))?
                } else {
                    let real = f.is_real() && table.spec.is_symmetric();
                    spectral_apply(
                        f,
                        table.padding,
                        &|_| Ok(table.spectrum.clone()),
                        real,
                        &table.tolerances,
                    )?
                };
                let values = xs
                    .iter()
                    .map(|x| {
                        out.output
                            .at(x)
                            .ok_or_else(|| LevyError::Window(format!("{x:?} is not a lattice point")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                return Ok(SemigroupResult {
                    truncation_bound: vec![0.0; xs.len()],
                    values,
                    tail_mass: 0.0,
                    box_radius: f64::INFINITY,
                    method: SemigroupMethod::Spectral,
                });
            }
            let reach = xs
                .iter()
                .flat_map(|x| x.iter().map(|v| v.abs()))
                .fold(0.0, f64::max);
            let radius = 0.5 * f.grid.period() - reach - f.grid.h();
            if radius <= 0.0 {
                return Err(LevyError::Window("evaluation points leave no room for the kernel".into()));
            }
            let kernel = kernel_box(table, radius);
            let tail = (1.0 - kernel.iter().map(|k| k.1).sum::<f64>()).max(0.0);
            let values = xs
                .par_iter()
                .map(|x| {
                    let base: Vec<i64> = x
                        .iter()
                        .map(|&v| {
                            f.grid
                                .axis_index(v)
                                .map(|j| j as i64)
                                .ok_or_else(|| LevyError::Window(format!("{x:?} is not a lattice point")))
                        })
                        .collect::<Result<_>>()?;
                    Ok(grid_convolve(f, &kernel, &base))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SemigroupResult {
                truncation_bound: xs.iter().map(|x| truncation_bound(env, x, tail, moment, beta)).collect(),
                values,
                tail_mass: tail,
                box_radius: radius,
                method: SemigroupMethod::LatticeConvolution,
            })
        }
        SemigroupInput::Callable { f, .. } => {
            let radius = table.padded_grid.period() / 4.0;
            let kernel = kernel_box(table, radius);
            let tail = (1.0 - kernel.iter().map(|k| k.1).sum::<f64>()).max(0.0);
            let h = table.grid.h();
            let values = xs
                .par_iter()
                .map(|x| {
                    let terms: Vec<Complex64> = kernel
                        .iter()
                        .map(|(off, w)| {
                            let y: Vec<f64> = x.iter().zip(off).map(|(a, &o)| a + o as f64 * h).collect();
                            f.value(&y) * *w
                        })
                        .collect();
                    crate::quadrature::pairwise_sum_complex(&terms)
                })
                .collect();
            Ok(SemigroupResult {
                truncation_bound: xs.iter().map(|x| truncation_bound(env, x, tail, moment, beta)).collect(),
                values,
                tail_mass: tail,
                box_radius: radius,
                method: SemigroupMethod::LatticeConvolution,
            })
        }
    }
}

pub(crate) fn grid_convolve(f: &GridFunction, kernel: &[(Vec<i64>, f64)], base: &[i64]) -> Complex64 {
    let terms: Vec<Complex64> = kernel
        .iter()
        .map(|(off, w)| {
            let m: Vec<usize> = base.iter().zip(off).map(|(b, o)| (b + o) as usize).collect();
            f.values[f.grid.flat_index(&m)] * *w
        })
        .collect();
    crate::quadrature::pairwise_sum_complex(&terms)
}

/// `P_t f` by the multiplier `e^{-tψ}` on the padded lattice of `f`, without a density table.
pub fn apply_semigroup_spectral(
    spec: &SymbolSpec,
    t: f64,
    f: &GridFunction,
    padding: Option<usize>,
) -> Result<SpectralResult> {
    if spec.dimension != f.grid.dimension {
        return invalid("symbol and grid dimensions differ");
    }
    if !(t >= 0.0) {
        return invalid("time must be non-negative");
    }
    let padding = padding.unwrap_or_else(|| default_density_padding(f.grid.dimension));
    let real = f.is_real() && spec.is_symmetric();
    spectral_apply(
        f,
        padding,
        &|g| Ok(spec.on_lattice(g)?.into_iter().map(|v| (-t * v).exp()).collect()),
        real,
        &Tolerances::default(),
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionWalkReport {
    pub k: usize,
    pub t: f64,
    pub radii: Vec<f64>,
    /// `p_t^{(k)}(r)`.
    pub profile: Vec<f64>,
    /// `d/dr p_t^{(k)}(r)`.
    pub derivative: Vec<f64>,
    /// `p_t^{(k+2)}(r)`.
    pub companion: Vec<f64>,
    /// `|d/dr p^{(k)} + 2π r p^{(k+2)}|`.
    pub residual_r_factor: Vec<f64>,
    /// `|d/dr p^{(k)} + 2π p^{(k+2)}|`, the relation without the factor `r`.
    pub residual_r_free: Vec<f64>,
    pub max_residual_r_factor: f64,
    pub max_residual_r_free: f64,
    pub frequency_cutoff: f64,
    pub quadrature_nodes: usize,
}

const WALK_STEP: f64 = 1e-3;

/// Radial profile `p_t^{(k)}(r) = (2π)^{-k} |S^{k-1}| ∫_0^∞ Λ_{k/2-1}(ρr) e^{-t f(ρ²/2)} ρ^{k-1} dρ`.
struct RadialInversion {
    rule: Vec<(f64, f64)>,
}

impl RadialInversion {
    fn new(sub: &Subordinator, t: f64, cutoff: f64, panels: usize) -> Self {
        let gl = GaussLegendre::order16();
        let width = cutoff / panels as f64;
        let mut rule = Vec::with_capacity(16 * panels);
        for p in 0..panels {
            let a = p as f64 * width;
            for (x, w) in gl.mapped(a, a + width) {
                rule.push((x, w * (-t * sub.laplace_exponent(0.5 * x * x)).exp()));
            }
        }
        Self { rule }
    }

    fn profile(&self, k: usize, r: f64) -> f64 {
        let two_nu = k as i32 - 2;
        let terms: Vec<f64> = self
            .rule
            .iter()
            .map(|&(rho, w)| w * normalized_bessel(two_nu, rho * r) * rho.powi(k as i32 - 1))
            .collect();
        sphere_area(k) * pairwise_sum(&terms) / (2.0 * PI).powi(k as i32)
    }
}

/// Checks `d/dr p_t^{(k)} = -2π r p_t^{(k+2)}` for `X_t = B_{S_t}` on `radii`.
pub fn radial_dimension_walk(sub: &Subordinator, t: f64, k: usize, radii: &[f64]) -> Result<DimensionWalkReport> {
    sub.validate()?;
    if k == 0 {
        return invalid("dimension must be at least 1");
    }
    if !(t > 0.0) {
        return invalid("time must be positive");
    }
    if radii.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
        return invalid("radii must be finite and non-negative");
    }
    // e^{-t f(ρ²/2)} < 1e-18 beyond the cutoff
    let target = 18.0 * 10f64.ln();
    let mut cutoff = 1.0;
    while t * sub.laplace_exponent(0.5 * cutoff * cutoff) < target {
        cutoff *= 1.25;
        if cutoff > 1e6 {
            return Err(LevyError::Resolution(
                "e^{-tψ} does not decay fast enough for radial inversion".into(),
            ));
        }
    }
    let r_max = radii.iter().cloned().fold(0.0, f64::max) + 2.0 * WALK_STEP;
    let panels = ((cutoff * (r_max + 1.0)) / 2.0).ceil() as usize + 16;
    let inv = RadialInversion::new(sub, t, cutoff, panels);
    let dh = WALK_STEP;
    let mut report = DimensionWalkReport {
        k,
        t,
        radii: radii.to_vec(),
        profile: Vec::new(),
        derivative: Vec::new(),
        companion: Vec::new(),
        residual_r_factor: Vec::new(),
        residual_r_free: Vec::new(),
        max_residual_r_factor: 0.0,
        max_residual_r_free: 0.0,
        frequency_cutoff: cutoff,
        quadrature_nodes: inv.rule.len(),
    };
    let rows: Vec<(f64, f64, f64)> = radii
        .par_iter()
        .map(|&r| {
            let p = |s: f64| inv.profile(k, s.abs());
            let deriv = ((p(r - 2.0 * dh) - p(r + 2.0 * dh)) + 8.0 * (p(r + dh) - p(r - dh))) / (12.0 * dh);
            (p(r), deriv, inv.profile(k + 2, r))
        })
        .collect();
    for (&r, (p, dp, q)) in radii.iter().zip(rows) {
        let with_r = (dp + 2.0 * PI * r * q).abs();
        let without = (dp + 2.0 * PI * q).abs();
        report.profile.push(p);
        report.derivative.push(dp);
        report.companion.push(q);
        report.residual_r_factor.push(with_r);
        report.residual_r_free.push(without);
        report.max_residual_r_factor = report.max_residual_r_factor.max(with_r);
        report.max_residual_r_free = report.max_residual_r_free.max(without);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{FnMap, TestFunction};
    use crate::symbols::{Atom, Family};
    use approx::assert_relative_eq;

    fn line_grid() -> Grid {
        Grid::new(1, 4096, 0.1).unwrap()
    }

    #[test]
    fn gaussian_and_cauchy_densities() {
        let g = transition_density(&SymbolSpec::brownian_standard(1), 1.0, line_grid()).unwrap();
        let p0 = g.values[g.grid.axis_index(0.0).unwrap()];
        assert_relative_eq!(p0, 1.0 / (2.0 * PI).sqrt(), max_relative = 1e-8);
        assert!((g.mass() - 1.0).abs() < 1e-6);
        let c = transition_density(&SymbolSpec::stable(1, 1.0).unwrap(), 1.0, line_grid()).unwrap();
        let at = |x: f64| c.values[c.grid.axis_index(x).unwrap()];
        assert_relative_eq!(at(0.0), 1.0 / PI, max_relative = 1e-6);
        assert_relative_eq!(at(1.0), 0.5 / PI, max_relative = 1e-6);
        assert_relative_eq!(c.eval(&[0.35]), 1.0 / (PI * (1.0 + 0.35 * 0.35)), max_relative = 1e-6);
        assert!((c.mass() - 1.0).abs() < 1e-6);
        assert_eq!(c.clip_mass, 0.0);
    }

    #[test]
    fn drift_moves_the_density_forward() {
        let spec = SymbolSpec::new(Family::Brownian { q: vec![1.0], b: vec![2.0] }, 1).unwrap();
        let tab = transition_density(&spec, 1.0, line_grid()).unwrap();
        let want = (-0.5f64 * 0.25).exp() / (2.0 * PI).sqrt();
        assert_relative_eq!(tab.eval(&[2.5]), want, max_relative = 1e-10);
    }

    #[test]
    fn regularity_sups() {
        let g = transition_density(&SymbolSpec::brownian_standard(1), 1.0, line_grid()).unwrap();
        let rep = density_regularity_report(&g).unwrap();
        assert!((rep.sup_density - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-6);
        assert!((rep.sup_gradient - 1.0 / (2.0 * PI * std::f64::consts::E).sqrt()).abs() < 1e-6);
        let c = transition_density(&SymbolSpec::stable(1, 1.0).unwrap(), 1.0, line_grid()).unwrap();
        let rep = density_regularity_report(&c).unwrap();
        assert!((rep.sup_density - 1.0 / PI).abs() < 1e-6);
        assert!((rep.sup_gradient - 3.0 * 3f64.sqrt() / (8.0 * PI)).abs() < 1e-6);
        assert!((rep.argmax_gradient[0].abs() - 1.0 / 3f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn compound_poisson_fails_resolution() {
        let spec = SymbolSpec::new(
            Family::CompoundPoisson {
                atoms: vec![Atom { location: vec![1.0], mass: 1.0 }],
            },
            1,
        )
        .unwrap();
        assert!(matches!(
            transition_density(&spec, 1.0, line_grid()),
            Err(LevyError::Resolution(_))
        ));
    }

    #[test]
    fn semigroup_examples() {
        let tab = transition_density(&SymbolSpec::brownian_standard(1), 1.0, line_grid()).unwrap();
        let one = TestFunction::Constant { value: 1.0 };
        let xs = vec![vec![0.0], vec![3.0]];
        let r = apply_semigroup(&tab, SemigroupInput::Callable { f: &one, envelope: one.envelope() }, &xs, 1.0)
            .unwrap();
        assert!(r.values.iter().all(|v| (v.re - 1.0).abs() < 1e-12));
        let sq = FnMap(|x: &[f64]| Complex64::new(x[0] * x[0], 0.0));
        let r = apply_semigroup(
            &tab,
            SemigroupInput::Callable { f: &sq, envelope: Envelope::new(1.0, 2.0) },
            &xs,
            3.0,
        )
        .unwrap();
        assert!((r.values[0].re - 1.0).abs() < 1e-6);
        assert!((r.values[1].re - 10.0).abs() < 1e-6);
        let pw = GridFunction::plane_wave(tab.grid, &[37]).unwrap();
        let r = apply_semigroup(&tab, SemigroupInput::Grid(&pw), &[vec![0.5]], 1.0).unwrap();
        let xi = 2.0 * PI * 37.0 / tab.grid.period();
        let want = Complex64::from_polar((-0.5 * xi * xi).exp(), xi * 0.5);
        assert!((r.values[0] - want).norm() < 1e-12);
        assert!(matches!(
            apply_semigroup(&tab, SemigroupInput::Callable { f: &sq, envelope: Envelope::new(1.0, 2.0) }, &xs, 2.0),
            Err(LevyError::Growth { .. })
        ));
    }

    #[test]
    fn moments_of_gaussian_and_cauchy() {
        let tab = transition_density(&SymbolSpec::brownian_standard(1), 1.0, line_grid()).unwrap();
        let m = density_moment(&tab, 2.0).unwrap();
        assert!(m.finite && (m.value - 1.0).abs() < 1e-6, "{m:?}");
        let m0 = density_moment(&tab, 0.0).unwrap();
        assert!((m0.value - 1.0).abs() < 1e-9);
        let c = transition_density(&SymbolSpec::stable(1, 1.0).unwrap(), 1.0, line_grid()).unwrap();
        let half = density_moment(&c, 0.5).unwrap();
        assert!(half.finite);
        assert!((half.value - 2f64.sqrt()).abs() < 1e-2, "{}", half.value);
        assert!(!density_moment(&c, 1.0).unwrap().finite);
        let mass = density_moment(&c, 0.0).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-3, "{}", mass.value);
    }

    #[test]
    fn dimension_walk_closed_forms() {
        let radii: Vec<f64> = (0..=40).map(|i| 0.1 * i as f64).collect();
        for k in [1, 2] {
            let cauchy = radial_dimension_walk(&Subordinator::Stable { kappa: 0.5 }, 1.0, k, &radii).unwrap();
            assert!(cauchy.max_residual_r_factor < 1e-6, "{k}: {}", cauchy.max_residual_r_factor);
            assert!(cauchy.max_residual_r_free > 1e-2);
            let gauss = radial_dimension_walk(&Subordinator::Deterministic, 1.0, k, &radii).unwrap();
            assert!(gauss.max_residual_r_factor < 1e-8, "{k}: {}", gauss.max_residual_r_factor);
        }
        let c = radial_dimension_walk(&Subordinator::Stable { kappa: 0.5 }, 1.0, 1, &[0.0, 1.0]).unwrap();
        assert_relative_eq!(c.profile[1], 0.5 / PI, max_relative = 1e-9);
        assert_relative_eq!(c.companion[1], 0.25 / (PI * PI), max_relative = 1e-9);
        assert_eq!(c.derivative[0], 0.0);
    }
}
