//! Harmonic-function pipeline: weak residual, mollification, fixed point of
//! `P_t`, Hölder modulus of `P_t u`, iterated differences and the final
//! polynomial classification.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LevyError, Result};
use crate::functions::SmoothFn;
use crate::grid::{fft_nd, Envelope, Grid, GridFunction};
use crate::quadrature::{linear_fit, pairwise_sum_complex, AngularRule, GaussLegendre};
use crate::semigroup::{
    apply_semigroup, density_moment, grid_convolve, kernel_box, transition_density, truncation_bound,
    DensityTable, SemigroupInput,
};
use crate::symbols::SymbolSpec;
use crate::tolerances::Tolerances;
use crate::Complex64;

const PI: f64 = std::f64::consts::PI;

/// Lattice points are taken as representatives of almost-everywhere statements.
pub const POINTWISE_NOTE: &str =
    "almost-everywhere statements are checked pointwise on lattice points";

/// Mollifier profile `(1 - |z|²)^4` on the unit ball, unnormalized.
fn bump(z2: f64) -> f64 {
    if z2 >= 1.0 {
        0.0
    } else {
        (1.0 - z2).powi(4)
    }
}

/// Nodes `z_i` and weights `w_i` (summing to one) of the mollifier on the unit ball.
fn mollifier_rule(d: usize) -> Vec<(Vec<f64>, f64)> {
    let gl = GaussLegendre::order16();
    let ang = AngularRule::new(d, 1);
    let mut rule = Vec::with_capacity(16 * ang.weights.len());
    for (rho, wr) in gl.mapped(0.0, 1.0) {
        for (dir, wa) in ang.directions.iter().zip(&ang.weights) {
            let z: Vec<f64> = dir.iter().map(|v| v * rho).collect();
            rule.push((z, wr * wa * rho.powi(d as i32 - 1) * bump(rho * rho)));
        }
    }
    let total: f64 = rule.iter().map(|r| r.1).sum();
    for r in &mut rule {
        r.1 /= total;
    }
    rule
}

#[derive(Debug, Clone)]
pub struct Mollified {
    pub function: GridFunction,
    pub eps: f64,
    /// Envelope constant: `|u_ε| ≤ C₁ M (1 + |x|^γ)`.
    pub c1: f64,
    /// `∫ |z|^γ φ(z) dz` of the unit mollifier.
    pub moment_gamma: f64,
    /// `∫ |z|² φ(z) dz` of the unit mollifier.
    pub second_moment: f64,
}

fn envelope_constant(gamma: f64, eps: f64, m_gamma: f64) -> f64 {
    1f64.max(2f64.powf(gamma - 1.0)) * (1.0 + eps.powf(gamma) * m_gamma)
}

/// `u_ε = u * φ_ε` on `grid` for a callable `u` with envelope `env`.
pub fn mollify(u: &dyn SmoothFn, env: Envelope, grid: Grid, eps: f64) -> Result<Mollified> {
    env.validate()?;
    if !(eps > 0.0 && eps <= 1.0) {
        return invalid("mollifier scale must lie in (0, 1]");
    }
    let rule = mollifier_rule(grid.dimension);
    let moment = |p: f64| -> f64 {
        rule.iter()
            .map(|(z, w)| w * z.iter().map(|v| v * v).sum::<f64>().powf(0.5 * p))
            .sum()
    };
    let m_gamma = moment(env.gamma);
    let second_moment = moment(2.0);
    let values: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            let terms: Vec<Complex64> = rule
                .iter()
                .map(|(z, w)| {
                    let y: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - eps * b).collect();
                    u.value(&y) * *w
                })
                .collect();
            pairwise_sum_complex(&terms)
        })
        .collect();
    let c1 = envelope_constant(env.gamma, eps, m_gamma);
    let function = GridFunction::new(grid, values, Envelope::new(c1 * env.m, env.gamma))?;
    Ok(Mollified {
        function,
        eps,
        c1,
        moment_gamma: m_gamma,
        second_moment,
    })
}

/// Lattice mollification of sampled data; the sampled kernel is renormalized.
pub fn mollify_grid(u: &GridFunction, eps: f64) -> Result<Mollified> {
    if !(eps > 0.0 && eps <= 1.0) {
        return invalid("mollifier scale must lie in (0, 1]");
    }
    let g = u.grid;
    let reach = (eps / g.h()).floor() as i64;
    let d = g.dimension;
    let side = (2 * reach + 1) as usize;
    let mut kernel: Vec<(Vec<i64>, f64)> = Vec::new();
    for flat in 0..side.pow(d as u32) {
        let mut rem = flat;
        let mut off = vec![0i64; d];
        for a in (0..d).rev() {
            off[a] = (rem % side) as i64 - reach;
            rem /= side;
        }
        let z2: f64 = off.iter().map(|&o| (o as f64 * g.h() / eps).powi(2)).sum();
        let w = bump(z2);
        if w > 0.0 {
            kernel.push((off, w));
        }
    }
    let total: f64 = kernel.iter().map(|k| k.1).sum();
    for k in &mut kernel {
        k.1 /= total;
    }
    let m_gamma = kernel
        .iter()
        .map(|(o, w)| {
            let z2: f64 = o.iter().map(|&v| (v as f64 * g.h() / eps).powi(2)).sum();
            w * z2.powf(0.5 * u.envelope.gamma)
        })
        .sum();
    let second_moment = kernel
        .iter()
        .map(|(o, w)| w * o.iter().map(|&v| (v as f64 * g.h() / eps).powi(2)).sum::<f64>())
        .sum();
    let n = g.n() as i64;
    let values: Vec<Complex64> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let m = g.multi_index(i);
            let terms: Vec<Complex64> = kernel
                .iter()
                .map(|(off, w)| {
                    // clamp at the window edge; the kernel is at most one bump wide
                    let idx: Vec<usize> = (0..d)
                        .map(|a| (m[a] as i64 + off[a]).clamp(0, n - 1) as usize)
                        .collect();
                    u.values[g.flat_index(&idx)] * *w
                })
                .collect();
            pairwise_sum_complex(&terms)
        })
        .collect();
    let c1 = envelope_constant(u.envelope.gamma, eps, m_gamma);
    let function = GridFunction::new(g, values, Envelope::new(c1 * u.envelope.m, u.envelope.gamma))?;
    Ok(Mollified {
        function,
        eps,
        c1,
        moment_gamma: m_gamma,
        second_moment,
    })
}

/// Gaussian test function `(2πσ²)^{-d/2} e^{-|x-c|²/(2σ²)}` for the weak formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakTest {
    pub center: Vec<f64>,
    pub sigma: f64,
}

impl WeakTest {
    /// Centres `{-1, -1/2, 0, 1/2, 1}^d` and widths `σ ∈ {1/4, 1/2}`.
    pub fn default_family(d: usize) -> Vec<WeakTest> {
        let ticks = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let mut out = Vec::new();
        for sigma in [0.25, 0.5] {
            for flat in 0..5usize.pow(d as u32) {
                let mut rem = flat;
                let mut c = vec![0.0; d];
                for a in (0..d).rev() {
                    c[a] = ticks[rem % 5];
                    rem /= 5;
                }
                out.push(WeakTest { center: c, sigma });
            }
        }
        out
    }

    pub fn amplitude(&self) -> f64 {
        (2.0 * PI * self.sigma * self.sigma).powf(-0.5 * self.center.len() as f64)
    }

    /// `sup|φ| + sup|∇φ| + sup‖∇²φ‖` in closed form.
    pub fn c2_norm(&self) -> f64 {
        let s = self.sigma;
        self.amplitude() * (1.0 + (-0.5f64).exp() / s + 1.0 / (s * s))
    }
}

/// Lattice used for callables in [`weak_residual`]: `(h, N, padding)` by dimension.
pub fn weak_lattice(d: usize) -> (f64, usize, usize) {
    match d {
        1 => (1.0 / 32.0, 8192, 4),
        2 => (1.0 / 16.0, 256, 2),
        _ => (0.125, 64, 2),
    }
}

/// Input for [`weak_residual`].
#[derive(Clone, Copy)]
pub enum WeakInput<'a> {
    /// Integrated over the window of its own grid.
    Grid(&'a GridFunction),
    /// Integrated over the whole padded weak lattice.
    Callable { f: &'a dyn SmoothFn, envelope: Envelope },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakRow {
    pub center: Vec<f64>,
    pub sigma: f64,
    pub integral: Complex64,
    pub c2_norm: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakResidualReport {
    pub max_residual: f64,
    pub rows: Vec<WeakRow>,
    pub tolerance: f64,
    pub weakly_harmonic: bool,
    pub lattice: Grid,
    pub padding: usize,
    pub note: String,
}

/// `max_i |∫ u A*φ_i dx| / ‖φ_i‖_{C²}` over Gaussian test functions.
pub fn weak_residual(
    u: WeakInput<'_>,
    spec: &SymbolSpec,
    tests: Option<&[WeakTest]>,
    beta: f64,
    tol: &Tolerances,
) -> Result<WeakResidualReport> {
    let d = spec.dimension;
    let env = match u {
        WeakInput::Grid(g) => g.envelope,
        WeakInput::Callable { envelope, .. } => envelope,
    };
    if !(env.gamma < beta) {
        return Err(LevyError::Growth { gamma: env.gamma, beta });
    }
    let default_tests;
    let tests = match tests {
        Some(t) => t,
        None => {
            default_tests = WeakTest::default_family(d);
            &default_tests
        }
    };
    for t in tests {
        if t.center.len() != d || !(t.sigma > 0.0) {
            return invalid("weak test functions need a centre in R^d and σ > 0");
        }
    }
    let (base, padding) = match u {
        WeakInput::Grid(g) => {
            if g.grid.dimension != d {
                return invalid("grid and symbol dimensions differ");
            }
            (g.grid, weak_lattice(d).2)
        }
        WeakInput::Callable { .. } => {
            let (h, n, p) = weak_lattice(d);
            (Grid::new(d, n, h)?, p)
        }
    };
    let big = base.padded(padding)?;
    let psi = spec.on_lattice(&big)?;
    let h = base.h();
    // samples of u and the points they sit on, as padded-lattice indices
    let samples: Vec<(Vec<usize>, Complex64)> = match u {
        WeakInput::Grid(g) => {
            let offset = (padding - 1) * base.n() / 2;
            (0..base.len())
                .map(|i| {
                    let m = base.multi_index(i);
                    ((0..d).map(|a| m[a] + offset).collect(), g.values[i])
                })
                .collect()
        }
        WeakInput::Callable { f, .. } => (0..big.len())
            .into_par_iter()
            .map(|i| {
                let m = big.multi_index(i);
                ((0..d).map(|a| m[a]).collect(), f.value(&big.point(i)))
            })
            .collect(),
    };
    let mut sigmas: Vec<f64> = tests.iter().map(|t| t.sigma).collect();
    sigmas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sigmas.dedup();
    let n = big.n() as i64;
    let mut rows = Vec::with_capacity(tests.len());
    for sigma in sigmas {
        // A*φ for the test centred at the origin, on the full padded lattice
        let proto = WeakTest { center: vec![0.0; d], sigma };
        let amp = proto.amplitude();
        let mut data: Vec<Complex64> = (0..big.len())
            .map(|i| {
                let r2: f64 = big.point(i).iter().map(|v| v * v).sum();
                Complex64::new(amp * (-0.5 * r2 / (sigma * sigma)).exp(), 0.0)
            })
            .collect();
        fft_nd(&mut data, d, big.n(), false);
        for (v, p) in data.iter_mut().zip(&psi) {
            *v *= -p.conj();
        }
        fft_nd(&mut data, d, big.n(), true);
        let scale = 1.0 / big.len() as f64;
        for v in &mut data {
            *v *= scale;
        }
        for t in tests.iter().filter(|t| t.sigma == sigma) {
            let mut shift = vec![0i64; d];
            for a in 0..d {
                let s = t.center[a] / h;
                if (s - s.round()).abs() > 1e-9 {
                    return invalid("test centres must be lattice points");
                }
                shift[a] = s.round() as i64;
            }
            let terms: Vec<Complex64> = samples
                .par_iter()
                .map(|(m, uv)| {
                    let idx: Vec<usize> = (0..d)
                        .map(|a| (m[a] as i64 - shift[a]).rem_euclid(n) as usize)
                        .collect();
                    *uv * data[big.flat_index(&idx)]
                })
                .collect();
            let integral = pairwise_sum_complex(&terms) * big.cell_volume();
            let norm = t.c2_norm();
            rows.push(WeakRow {
                center: t.center.clone(),
                sigma,
                integral,
                c2_norm: norm,
                residual: integral.norm() / norm,
            });
        }
    }
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(WeakResidualReport {
        max_residual,
        weakly_harmonic: max_residual < tol.weak,
        tolerance: tol.weak,
        rows,
        lattice: base,
        padding,
        note: "Gaussian test functions, negligible below 1e-12 of their peak, stand in for compactly supported ones".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FixedPointVerdict {
    FixedPoint,
    NotFixedPoint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointReport {
    /// `sup_{|x|_∞ ≤ window} |P_t u - u|` with the renormalized box kernel.
    pub residual: f64,
    pub tolerance: f64,
    pub verdict: FixedPointVerdict,
    pub sup_u: f64,
    pub window: f64,
    pub box_radius: f64,
    /// Mass of `p_t` outside the box before renormalization.
    pub tail_mass: f64,
    /// Largest truncation bound over the window.
    pub truncation_bound: f64,
    pub points: usize,
    pub note: String,
}

/// Fixed-point test `P_t u = u` on the lattice points of `|x|_∞ ≤ window`.
pub fn fixed_point_residual(
    u: &GridFunction,
    table: &DensityTable,
    window: f64,
    beta: f64,
) -> Result<(FixedPointReport, Vec<Complex64>)> {
    let env = u.envelope;
    if !(env.gamma < beta) {
        return Err(LevyError::Growth { gamma: env.gamma, beta });
    }
    let g = u.grid;
    if g.dimension != table.grid.dimension || g.h() != table.grid.h() {
        return invalid("grid function must share dimension and spacing with the table");
    }
    let radius = 0.5 * g.period() - window - g.h();
    if !(window >= 0.0) || radius <= 0.0 {
        return Err(LevyError::Window(format!(
            "window {window} leaves no room for the kernel on a lattice of period {}",
            g.period()
        )));
    }
    let moment = if env.gamma > 0.0 {
        let m = density_moment(table, beta)?;
        if !m.finite {
            return Err(LevyError::MomentDivergence { beta });
        }
        m.value
    } else {
        1.0
    };
    let mut kernel = kernel_box(table, radius);
    let mass: f64 = kernel.iter().map(|k| k.1).sum();
    let tail = (1.0 - mass).max(0.0);
    for k in &mut kernel {
        k.1 /= mass;
    }
    let points: Vec<usize> = (0..g.len()).filter(|&i| g.in_box(i, window)).collect();
    let pu: Vec<Complex64> = points
        .par_iter()
        .map(|&i| {
            let m = g.multi_index(i);
            let base: Vec<i64> = (0..g.dimension).map(|a| m[a] as i64).collect();
            grid_convolve(u, &kernel, &base)
        })
        .collect();
    let mut residual: f64 = 0.0;
    let mut sup_u: f64 = 0.0;
    let mut bound: f64 = 0.0;
    for (&i, p) in points.iter().zip(&pu) {
        residual = residual.max((p - u.values[i]).norm());
        sup_u = sup_u.max(u.values[i].norm());
        bound = bound.max(truncation_bound(env, &g.point(i), tail, moment, beta));
    }
    let tolerance = table.tolerances.fixed_point * (1.0 + sup_u);
    let report = FixedPointReport {
        residual,
        tolerance,
        verdict: if residual < tolerance {
            FixedPointVerdict::FixedPoint
        } else {
            FixedPointVerdict::NotFixedPoint
        },
        sup_u,
        window,
        box_radius: radius,
        tail_mass: tail,
        truncation_bound: bound,
        points: points.len(),
        note: POINTWISE_NOTE.into(),
    };
    Ok((report, pu))
}

/// Probe layout for [`hoelder_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSet {
    pub radii: Vec<f64>,
    /// `|h| = 2^{-j}` for each listed `j`.
    pub h_exponents: Vec<i32>,
    pub directions: usize,
    pub seed: u64,
}

impl Default for ProbeSet {
    fn default() -> Self {
        Self {
            radii: vec![1.0, 2.0, 4.0, 8.0],
            h_exponents: (2..=7).collect(),
            directions: 16,
            seed: 0x5EED,
        }
    }
}

impl ProbeSet {
    /// Base points `|x| ≤ 1` and unit directions; the first `n` draws do not depend on the total.
    pub fn draw(&self, d: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.directions)
            .map(|_| {
                let x = loop {
                    let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
                    if x.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                        break x;
                    }
                };
                let theta = loop {
                    let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if n > 1e-12 {
                        break g.into_iter().map(|v| v / n).collect::<Vec<f64>>();
                    }
                };
                (x, theta)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoelderRow {
    pub r: f64,
    pub h_norm: f64,
    pub x: Vec<f64>,
    pub direction: Vec<f64>,
    pub lhs: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoelderReport {
    pub gamma: f64,
    pub beta: f64,
    pub rho: f64,
    /// Slope of `log max_probes(lhs / r^γ)` against `log |h|`.
    pub empirical_rho: Option<f64>,
    /// Smallest slope of a single `(r, x, θ)` series; saturates once `r|h|` is of order one.
    pub min_series_slope: Option<f64>,
    /// `max lhs / (M r^γ |h|^ρ)`.
    pub constant_ratio: f64,
    /// `max / median` of the nonzero ratios.
    pub ratio_spread: f64,
    pub pass: bool,
    pub rows: Vec<HoelderRow>,
    pub tolerance: f64,
}

impl HoelderReport {
    /// Columns `r, |h|, lhs, bound, ratio`, one row per probe.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "r,h,lhs,bound,ratio")?;
        for r in &self.rows {
            writeln!(w, "{},{},{:e},{:e},{:e}", r.r, r.h_norm, r.lhs, r.bound, r.ratio)?;
        }
        Ok(())
    }
}

/// `ρ = (β - γ)/(d + β)`.
pub fn predicted_rho(gamma: f64, beta: f64, d: usize) -> f64 {
    (beta - gamma) / (d as f64 + beta)
}

/// Both sides of `|P_t u(rx + rh) - P_t u(rx)| ≤ C M r^γ |h|^ρ` over the probes.
pub fn hoelder_estimate(
    table: &DensityTable,
    u: &dyn SmoothFn,
    env: Envelope,
    beta: f64,
    probes: &ProbeSet,
) -> Result<HoelderReport> {
    let d = table.grid.dimension;
    let gamma = env.gamma;
    if !(gamma < beta) {
        return Err(LevyError::Growth { gamma, beta });
    }
    if probes.radii.iter().any(|&r| !(r >= 1.0)) {
        return invalid("probe radii must be at least 1");
    }
    if probes.h_exponents.iter().any(|&j| j < 0) {
        return invalid("probe steps must satisfy |h| ≤ 1");
    }
    let rho = predicted_rho(gamma, beta, d);
    let draws = probes.draw(d);
    // every evaluation point once: rx and rx + r 2^{-j} θ
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut layout = Vec::new();
    for &r in &probes.radii {
        for (x, th) in &draws {
            let base = points.len();
            points.push(x.iter().map(|v| r * v).collect());
            for &j in &probes.h_exponents {
                let hn = 2f64.powi(-j);
                points.push(x.iter().zip(th).map(|(a, b)| r * (a + hn * b)).collect());
                layout.push((r, hn, base, points.len() - 1, x.clone(), th.clone()));
            }
        }
    }
    let values = if points.is_empty() {
        Vec::new()
    } else {
        apply_semigroup(table, SemigroupInput::Callable { f: u, envelope: env }, &points, beta)?.values
    };
    let rows: Vec<HoelderRow> = layout
        .into_iter()
        .map(|(r, hn, b, p, x, th)| {
            let lhs = (values[p] - values[b]).norm();
            let bound = env.m * r.powf(gamma) * hn.powf(rho);
            HoelderRow {
                r,
                h_norm: hn,
                x,
                direction: th,
                lhs,
                bound,
                ratio: if bound > 0.0 { lhs / bound } else { 0.0 },
            }
        })
        .collect();
    // modulus envelope ω(|h|) = max over probes of lhs / r^γ, fitted against |h|
    let mut env_x = Vec::new();
    let mut env_y = Vec::new();
    for &j in &probes.h_exponents {
        let hn = 2f64.powi(-j);
        let w = rows
            .iter()
            .filter(|r| r.h_norm == hn)
            .map(|r| r.lhs / r.r.powf(gamma))
            .fold(0.0, f64::max);
        if w > 0.0 {
            env_x.push(hn.ln());
            env_y.push(w.ln());
        }
    }
    let empirical_rho = if env_x.len() >= 2 {
        linear_fit(&env_x, &env_y).map(|f| f.0)
    } else {
        None
    };
    let per = probes.h_exponents.len();
    let mut slopes = Vec::new();
    if per >= 2 {
        for series in rows.chunks(per) {
            if series.iter().all(|s| s.lhs > 0.0) {
                let xs: Vec<f64> = series.iter().map(|s| s.h_norm.ln()).collect();
                let ys: Vec<f64> = series.iter().map(|s| s.lhs.ln()).collect();
                if let Some((slope, _)) = linear_fit(&xs, &ys) {
                    slopes.push(slope);
                }
            }
        }
    }
    let min_series_slope = slopes.iter().cloned().reduce(f64::min);
    let constant_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let mut nonzero: Vec<f64> = rows.iter().map(|r| r.ratio).filter(|&v| v > 0.0).collect();
    nonzero.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ratio_spread = if nonzero.is_empty() {
        0.0
    } else {
        constant_ratio / nonzero[nonzero.len() / 2]
    };
    let tol = table.tolerances.hoelder_spread;
    Ok(HoelderReport {
        gamma,
        beta,
        rho,
        empirical_rho,
        min_series_slope,
        constant_ratio,
        ratio_spread,
        pass: constant_ratio.is_finite() && ratio_spread < tol,
        rows,
        tolerance: tol,
    })
}

/// Input for [`iterated_difference`].
#[derive(Clone, Copy)]
pub enum DiffInput<'a> {
    Grid(&'a GridFunction),
    Callable(&'a dyn SmoothFn),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DifferenceReport {
    pub k: usize,
    pub step: Vec<f64>,
    /// `Δ_h(Δ_h^{k-1} u)` by repeated differencing.
    pub nested: Vec<Complex64>,
    /// `Σ_j (-1)^{k-j} C(k,j) u(x + jh)`.
    pub binomial: Vec<Complex64>,
    pub max_discrepancy: f64,
}

fn binomial(k: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// `Δ_h^k u` at `xs` by nested differencing, cross-checked against the binomial sum.
pub fn iterated_difference(u: DiffInput<'_>, h: &[f64], k: usize, xs: &[Vec<f64>]) -> Result<DifferenceReport> {
    if k == 0 {
        return invalid("difference order must be at least 1");
    }
    let d = h.len();
    if xs.iter().any(|x| x.len() != d) {
        return invalid("step and points must share the dimension");
    }
    let rows: Vec<(Complex64, Complex64)> = xs
        .par_iter()
        .map(|x| {
            let samples: Vec<Complex64> = (0..=k)
                .map(|j| {
                    let y: Vec<f64> = x.iter().zip(h).map(|(a, b)| a + j as f64 * b).collect();
                    match u {
                        DiffInput::Callable(f) => Ok(f.value(&y)),
                        DiffInput::Grid(g) => g
                            .at(&y)
                            .ok_or_else(|| LevyError::Window(format!("{y:?} is not a lattice point of the grid"))),
                    }
                })
                .collect::<Result<_>>()?;
            let mut row = samples.clone();
            for _ in 0..k {
                row = row.windows(2).map(|w| w[1] - w[0]).collect();
            }
            let bin: Complex64 = samples
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let sign = if (k - j).is_multiple_of(2) { 1.0 } else { -1.0 };
                    v * (sign * binomial(k, j))
                })
                .sum();
            Ok((row[0], bin))
        })
        .collect::<Result<_>>()?;
    let max_discrepancy = rows.iter().map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(DifferenceReport {
        k,
        step: h.to_vec(),
        nested: rows.iter().map(|r| r.0).collect(),
        binomial: rows.iter().map(|r| r.1).collect(),
        max_discrepancy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictKind {
    Polynomial,
    Constant,
    NotHarmonic,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationVerdict {
    pub kind: VerdictKind,
    /// Degree of the fitted polynomial for `POLYNOMIAL`.
    pub degree: Option<usize>,
    pub residuals: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub rho: Option<f64>,
    pub difference_order: Option<usize>,
    pub fixed_point: Option<FixedPointReport>,
    /// Least-squares coefficients of the fitted polynomial, in scaled coordinates `x / window`.
    pub coefficients: Vec<(Vec<u32>, f64)>,
    pub notes: Vec<String>,
}

impl ClassificationVerdict {
    fn new(kind: VerdictKind) -> Self {
        Self {
            kind,
            degree: None,
            residuals: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            rho: None,
            difference_order: None,
            fixed_point: None,
            coefficients: Vec::new(),
            notes: vec![POINTWISE_NOTE.into()],
        }
    }
}

/// Settings for [`classify_harmonic`].
#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    /// Classification lattice; [`default_classify_grid`] when `None`.
    pub grid: Option<Grid>,
    pub eps: f64,
    /// Half-width of the fixed-point window; a quarter period when `None`.
    pub window: Option<f64>,
    pub t: f64,
    pub tolerances: Tolerances,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            grid: None,
            eps: 0.1,
            window: None,
            t: 1.0,
            tolerances: Tolerances::default(),
        }
    }
}

pub fn default_classify_grid(d: usize) -> Grid {
    match d {
        1 => Grid::new(1, 2048, 1.0 / 16.0),
        2 => Grid::new(2, 64, 0.25),
        _ => Grid::new(3, 32, 0.5),
    }
    .expect("default grids are valid")
}

fn monomials(d: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        let mut next = Vec::new();
        for p in &out {
            let used: u32 = p.iter().sum();
            for e in 0..=(degree - used) {
                let mut q = p.clone();
                q.push(e);
                next.push(q);
            }
        }
        out = next;
    }
    out.sort_by_key(|p| (p.iter().sum::<u32>(), std::cmp::Reverse(p.clone())));
    out
}

struct PolyFit {
    residual: f64,
    coefficients: Vec<(Vec<u32>, f64)>,
}

/// Least squares over `degree`-bounded monomials in scaled coordinates.
fn poly_fit(points: &[Vec<f64>], values: &[Complex64], degree: u32, scale: f64) -> PolyFit {
    let d = points[0].len();
    let mons = monomials(d, degree);
    let a = DMatrix::from_fn(points.len(), mons.len(), |i, j| {
        mons[j]
            .iter()
            .zip(&points[i])
            .map(|(&p, &x)| (x / scale).powi(p as i32))
            .product::<f64>()
    });
    let svd = a.clone().svd(true, true);
    let mut resid2 = 0.0;
    let mut norm2 = 0.0;
    let mut coefficients = Vec::new();
    for part in 0..2 {
        let b = DVector::from_iterator(
            values.len(),
            values.iter().map(|v| if part == 0 { v.re } else { v.im }),
        );
        norm2 += b.norm_squared();
        if b.norm() == 0.0 {
            continue;
        }
        let c = svd.solve(&b, 1e-13).unwrap_or_else(|_| DVector::zeros(mons.len()));
        resid2 += (&a * &c - &b).norm_squared();
        if part == 0 {
            coefficients = mons.iter().cloned().zip(c.iter().cloned()).collect();
        }
    }
    PolyFit {
        residual: if norm2 > 0.0 { (resid2 / norm2).sqrt() } else { 0.0 },
        coefficients,
    }
}

/// Runs mollification, the fixed-point test at `t`, the bounded-case constancy
/// check or the iterated-difference sweep, and the polynomial fit.
pub fn classify_harmonic(
    u: &dyn SmoothFn,
    env: Envelope,
    spec: &SymbolSpec,
    beta: f64,
    opts: &ClassifyOptions,
) -> Result<ClassificationVerdict> {
    let gamma = env.gamma;
    let tol = opts.tolerances;
    if !(gamma < beta) {
        return Err(LevyError::Growth { gamma, beta });
    }
    let d = spec.dimension;
    let grid = opts.grid.unwrap_or_else(|| default_classify_grid(d));
    if grid.dimension != d {
        return invalid("classification grid and symbol dimensions differ");
    }
    let jump = spec.jump_moment(beta, &tol)?;
    if !jump.finite {
        return Err(LevyError::MomentDivergence { beta });
    }
    let table = transition_density(spec, opts.t, grid)?;
    if gamma > 0.0 && !density_moment(&table, beta)?.finite {
        return Err(LevyError::MomentDivergence { beta });
    }
    let window = opts.window.unwrap_or(0.25 * grid.period());
    let moll = mollify(u, env, grid, opts.eps)?;
    let ue = &moll.function;
    let (fp, pu) = fixed_point_residual(ue, &table, window, beta)?;
    let mut verdict = ClassificationVerdict::new(VerdictKind::Inconclusive);
    verdict.residuals.insert("fixed_point".into(), fp.residual);
    verdict.tolerances.insert("fixed_point".into(), fp.tolerance);
    verdict.residuals.insert("truncation_bound".into(), fp.truncation_bound);
    let passed = fp.verdict == FixedPointVerdict::FixedPoint;
    let sup_u = fp.sup_u;
    verdict.fixed_point = Some(fp);
    if !passed {
        verdict.kind = VerdictKind::NotHarmonic;
        return Ok(verdict);
    }
    let in_window: Vec<usize> = (0..grid.len()).filter(|&i| grid.in_box(i, window)).collect();
    if gamma == 0.0 {
        let (mut lo_re, mut hi_re, mut lo_im, mut hi_im) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for v in &pu {
            lo_re = lo_re.min(v.re);
            hi_re = hi_re.max(v.re);
            lo_im = lo_im.min(v.im);
            hi_im = hi_im.max(v.im);
        }
        let variation = (hi_re - lo_re) + (hi_im - lo_im);
        let bound = tol.constancy * (1.0 + sup_u);
        verdict.residuals.insert("constancy".into(), variation);
        verdict.tolerances.insert("constancy".into(), bound);
        if variation < bound {
            verdict.kind = VerdictKind::Constant;
            verdict.degree = Some(0);
        } else {
            verdict
                .notes
                .push("bounded fixed point with non-constant values; expected only for a nontrivial zero set of ψ".into());
        }
        return Ok(verdict);
    }
    let rho = predicted_rho(gamma, beta, d);
    let k = ((gamma / rho) + 1e-12).floor().max(0.0) as usize;
    let order = k + 1;
    verdict.rho = Some(rho);
    verdict.difference_order = Some(order);
    let h = grid.h();
    let reach = order as f64 * h;
    let points: Vec<Vec<f64>> = in_window
        .iter()
        .map(|&i| grid.point(i))
        .filter(|x| x.iter().all(|&v| v + reach <= 0.5 * grid.period() - h))
        .collect();
    let mut sup_diff: f64 = 0.0;
    let mut by_radius: Vec<(f64, f64)> = Vec::new();
    for a in 0..d {
        let mut step = vec![0.0; d];
        step[a] = h;
        let diff = iterated_difference(DiffInput::Grid(ue), &step, order, &points)?;
        for (x, v) in points.iter().zip(&diff.nested) {
            let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            by_radius.push((r, v.norm()));
            sup_diff = sup_diff.max(v.norm());
        }
    }
    let diff_tol = tol.difference * 2f64.powi(order as i32) * (1.0 + sup_u);
    verdict.residuals.insert("difference".into(), sup_diff);
    verdict.tolerances.insert("difference".into(), diff_tol);
    if sup_diff >= diff_tol {
        // sup_{|x| > r} |Δ^{k+1} u| against r over dyadic radii
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut r = 1.0;
        while r < window {
            let s = by_radius.iter().filter(|p| p.0 > r).map(|p| p.1).fold(0.0, f64::max);
            if s > 0.0 {
                xs.push(r.ln());
                ys.push(s.ln());
            }
            r *= 2.0;
        }
        let slope = linear_fit(&xs, &ys).map(|f| f.0).unwrap_or(0.0);
        verdict.residuals.insert("difference_decay_slope".into(), slope);
        verdict.residuals.insert("predicted_decay_slope".into(), gamma - order as f64 * rho);
        verdict.kind = if slope > tol.decay_slope_band {
            VerdictKind::NotHarmonic
        } else {
            VerdictKind::Inconclusive
        };
        return Ok(verdict);
    }
    let fit_points: Vec<Vec<f64>> = in_window.iter().map(|&i| grid.point(i)).collect();
    let fit_values: Vec<Complex64> = in_window.iter().map(|&i| ue.values[i]).collect();
    let top = gamma.floor() as u32;
    let fits: Vec<PolyFit> = (0..=top).map(|m| poly_fit(&fit_points, &fit_values, m, window)).collect();
    let best = fits.last().map(|f| f.residual).unwrap_or(0.0);
    let chosen = fits
        .iter()
        .position(|f| f.residual <= 2.0 * best + 1e-14)
        .unwrap_or(top as usize);
    let fit = &fits[chosen];
    verdict.residuals.insert("poly_fit".into(), fit.residual);
    verdict.tolerances.insert("poly_fit".into(), tol.poly_fit);
    verdict.coefficients = fit.coefficients.clone();
    if fit.residual < tol.poly_fit {
        verdict.degree = Some(chosen);
        verdict.kind = if chosen == 0 {
            VerdictKind::Constant
        } else {
            VerdictKind::Polynomial
        };
    }
    Ok(verdict)
}
