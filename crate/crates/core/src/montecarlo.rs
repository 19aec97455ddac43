//! Sampling `X_t` for the built-in families, Monte Carlo estimates of `P_t u`
//! and the Dynkin identity `P_t φ - φ = ∫_0^t P_s Aφ ds`.
//!
//! Draws come in sub-batches of [`SUB_BATCH`]; sub-batch `k` uses the ChaCha8
//! stream `k` under the batch seed, so results do not depend on the thread count.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, InverseGaussian, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LevyError, Result};
use crate::functions::SmoothFn;
use crate::generator::{apply_generator_spectral, SpectralOptions};
use crate::grid::{Envelope, Grid, GridFunction};
use crate::quadrature::{pairwise_sum, GaussLegendre};
use crate::semigroup::{apply_semigroup, apply_semigroup_spectral, transition_density, SemigroupInput};
use crate::symbols::{Family, Subordinator, SymbolSpec};
use crate::Complex64;

pub const SUB_BATCH: usize = 8192;

/// `n` draws of `X_t`, stored row-major (`n × d`).
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub spec: SymbolSpec,
    pub t: f64,
    pub n: usize,
    pub seed: u64,
    pub increments: Vec<f64>,
}

impl SampleBatch {
    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        let d = self.dimension();
        &self.increments[i * d..(i + 1) * d]
    }

    /// Seed header (`u64`), then `d`, `n` (`u64`), `t` and the draws, all little-endian.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.dimension() as u64).to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.t.to_le_bytes())?;
        for v in &self.increments {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// How one draw of `X_t` is produced.
enum Sampler {
    Gaussian { drift: Vec<f64>, root: Vec<f64> },
    /// Symmetric stable in `d = 1` with `E e^{iξX} = e^{-|ξ|^α}`, scaled by `t^{1/α}`.
    StableLine { alpha: f64, scale: f64 },
    /// Brownian motion at an independent random time.
    Subordinated(TimeLaw),
    Poisson { atoms: Vec<(Vec<f64>, Poisson<f64>)> },
}

enum TimeLaw {
    Fixed(f64),
    /// `S_t = c S` with `E e^{-λS} = e^{-λ^κ}`.
    PositiveStable { kappa: f64, scale: f64 },
    Gamma(Gamma<f64>),
    InverseGaussian(InverseGaussian<f64>),
}

/// Chambers–Mallows–Stuck draw with `E e^{iξS} = e^{-|ξ|^α}`.
fn symmetric_stable(rng: &mut ChaCha8Rng, alpha: f64) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = rng.sample(Exp1);
    if (alpha - 1.0).abs() < 1e-15 {
        return v.tan();
    }
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Kanter's draw with `E e^{-λS} = e^{-λ^κ}`.
fn positive_stable(rng: &mut ChaCha8Rng, kappa: f64) -> f64 {
    let u = PI * rng.random::<f64>();
    let w: f64 = rng.sample(Exp1);
    let a = ((kappa * u).sin() / u.sin()).powf(1.0 / (1.0 - kappa)) * ((1.0 - kappa) * u).sin()
        / (kappa * u).sin();
    (a / w).powf((1.0 - kappa) / kappa)
}

impl TimeLaw {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            TimeLaw::Fixed(s) => *s,
            TimeLaw::PositiveStable { kappa, scale } => scale * positive_stable(rng, *kappa),
            TimeLaw::Gamma(g) => g.sample(rng),
            TimeLaw::InverseGaussian(ig) => ig.sample(rng),
        }
    }
}

fn build_err(e: impl std::fmt::Display) -> LevyError {
    LevyError::InvalidParameter(e.to_string())
}

impl Sampler {
    fn new(spec: &SymbolSpec, t: f64) -> Result<Self> {
        let d = spec.dimension;
        Ok(match &spec.family {
            Family::Brownian { q, b } => {
                let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, q));
                let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (l.max(0.0) * t).sqrt()));
                let root = &eig.eigenvectors * sqrt * eig.eigenvectors.transpose();
                Sampler::Gaussian {
                    drift: b.iter().map(|v| v * t).collect(),
                    root: (0..d * d).map(|k| root[(k / d, k % d)]).collect(),
                }
            }
            Family::IsotropicStable { alpha } if d == 1 => Sampler::StableLine {
                alpha: *alpha,
                scale: t.powf(1.0 / alpha),
            },
            // |ξ|^α = f(|ξ|²/2) with f(λ) = (2λ)^{α/2}
            Family::IsotropicStable { alpha } => Sampler::Subordinated(TimeLaw::PositiveStable {
                kappa: alpha / 2.0,
                scale: 2.0 * t.powf(2.0 / alpha),
            }),
            // √(|ξ|² + m²) - m is the inverse Gaussian exponent with δ = 1, γ = m
            Family::Relativistic { mass } => Sampler::Subordinated(TimeLaw::InverseGaussian(
                InverseGaussian::new(t / mass, t * t).map_err(build_err)?,
            )),
            Family::SubordinatedBm { subordinator } => Sampler::Subordinated(match *subordinator {
                Subordinator::Deterministic => TimeLaw::Fixed(t),
                Subordinator::Stable { kappa } => TimeLaw::PositiveStable {
                    kappa,
                    scale: 2.0 * t.powf(1.0 / kappa),
                },
                Subordinator::Gamma { shape, rate } => {
                    TimeLaw::Gamma(Gamma::new(shape * t, 1.0 / rate).map_err(build_err)?)
                }
                Subordinator::InverseGaussian { delta, gamma } => TimeLaw::InverseGaussian(
                    InverseGaussian::new(t * delta / gamma, (t * delta).powi(2)).map_err(build_err)?,
                ),
            }),
            Family::CompoundPoisson { atoms } => Sampler::Poisson {
                atoms: atoms
                    .iter()
                    .map(|a| Ok((a.location.clone(), Poisson::new(a.mass * t).map_err(build_err)?)))
                    .collect::<Result<_>>()?,
            },
            Family::TemperedStable { .. } => {
                return Err(LevyError::UnsupportedFamily("no exact sampler for tempered stable laws".into()))
            }
            Family::Custom(_) => {
                return Err(LevyError::UnsupportedFamily("custom triplets cannot be sampled".into()))
            }
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let d = out.len();
        match self {
            Sampler::Gaussian { drift, root } => {
                let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..d {
                    out[i] = drift[i] + (0..d).map(|j| root[i * d + j] * z[j]).sum::<f64>();
                }
            }
            Sampler::StableLine { alpha, scale } => out[0] = scale * symmetric_stable(rng, *alpha),
            Sampler::Subordinated(law) => {
                let s = law.draw(rng).sqrt();
                for v in out.iter_mut() {
                    *v = s * rng.sample::<f64, _>(StandardNormal);
                }
            }
            Sampler::Poisson { atoms } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for (y, law) in atoms {
                    let k = law.sample(rng);
                    for (v, yi) in out.iter_mut().zip(y) {
                        *v += k * yi;
                    }
                }
            }
        }
    }
}

/// `n` i.i.d. draws of `X_t`; identical arguments give identical draws.
pub fn sample_increments(spec: &SymbolSpec, t: f64, n: usize, seed: u64) -> Result<SampleBatch> {
    if !(t > 0.0) {
        return invalid("time must be positive");
    }
    let sampler = Sampler::new(spec, t)?;
    let d = spec.dimension;
    let mut increments = vec![0.0; n * d];
    increments
        .par_chunks_mut(SUB_BATCH * d)
        .enumerate()
        .for_each(|(k, chunk)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            for row in chunk.chunks_mut(d) {
                sampler.draw(&mut rng, row);
            }
        });
    Ok(SampleBatch {
        spec: spec.clone(),
        t,
        n,
        seed,
        increments,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McEstimate {
    pub x: Vec<f64>,
    pub mean: Complex64,
    /// `√((Var Re + Var Im)/n)`.
    pub standard_error: f64,
}

/// Sample means of `u(x + X_t)` with standard errors.
pub fn mc_semigroup(batch: &SampleBatch, u: &dyn SmoothFn, xs: &[Vec<f64>]) -> Result<Vec<McEstimate>> {
    let d = batch.dimension();
    if xs.iter().any(|x| x.len() != d) {
        return invalid("evaluation points have the wrong dimension");
    }
    if batch.n < 2 {
        return invalid("need at least two samples");
    }
    let n = batch.n as f64;
    Ok(xs
        .par_iter()
        .map(|x| {
            let vals: Vec<Complex64> = (0..batch.n)
                .map(|i| {
                    let y: Vec<f64> = x.iter().zip(batch.draw(i)).map(|(a, b)| a + b).collect();
                    u.value(&y)
                })
                .collect();
            let re: Vec<f64> = vals.iter().map(|v| v.re).collect();
            let im: Vec<f64> = vals.iter().map(|v| v.im).collect();
            let mean = Complex64::new(pairwise_sum(&re) / n, pairwise_sum(&im) / n);
            let dev: Vec<f64> = vals.iter().map(|v| (v - mean).norm_sqr()).collect();
            let var = pairwise_sum(&dev) / (n - 1.0);
            McEstimate {
                x: x.clone(),
                mean,
                standard_error: (var / n).sqrt(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Agreement {
    pub z_scores: Vec<f64>,
    /// `|mc - det| ≤ 3 se + truncation bound` at each point.
    pub agrees: Vec<bool>,
    pub fraction_within: f64,
}

/// Compares estimates against deterministic values carrying truncation bounds.
pub fn compare(est: &[McEstimate], deterministic: &[Complex64], truncation: &[f64]) -> Agreement {
    let mut z_scores = Vec::with_capacity(est.len());
    let mut agrees = Vec::with_capacity(est.len());
    for ((e, det), tb) in est.iter().zip(deterministic).zip(truncation) {
        let gap = (e.mean - det).norm();
        z_scores.push(if e.standard_error > 0.0 {
            gap / e.standard_error
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
        agrees.push(gap <= 3.0 * e.standard_error + tb);
    }
    let within = agrees.iter().filter(|&&a| a).count();
    Agreement {
        z_scores,
        fraction_within: if est.is_empty() { 1.0 } else { within as f64 / est.len() as f64 },
        agrees,
    }
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the two-sample statistic.
pub fn ks_critical_1pct(na: usize, nb: usize) -> f64 {
    1.628 * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdditivityReport {
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

/// KS test of `X_{t+s}` against independent sums `X_t + X_s` along the first axis.
pub fn additivity_check(spec: &SymbolSpec, t: f64, s: f64, n: usize, seed: u64) -> Result<AdditivityReport> {
    let d = spec.dimension;
    let joint = sample_increments(spec, t + s, n, seed)?;
    let a = sample_increments(spec, t, n, seed.wrapping_add(1))?;
    let b = sample_increments(spec, s, n, seed.wrapping_add(2))?;
    let first: Vec<f64> = (0..n).map(|i| joint.increments[i * d]).collect();
    let sums: Vec<f64> = (0..n).map(|i| a.increments[i * d] + b.increments[i * d]).collect();
    let statistic = ks_statistic(&first, &sums);
    let critical = ks_critical_1pct(n, n);
    Ok(AdditivityReport {
        statistic,
        critical,
        pass: statistic < critical,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynkinReport {
    pub t: f64,
    pub x: Vec<f64>,
    /// `P_t φ(x) - φ(x)` from the transition density.
    pub lhs: Complex64,
    /// `∫_0^t P_s Aφ(x) ds` by Gauss–Legendre in `s`.
    pub rhs: Complex64,
    pub residual: f64,
    pub quad_points: usize,
    pub grid: Grid,
    pub note: String,
}

/// Lattice used by [`dynkin_residual`] when none is given.
pub fn default_dynkin_grid(d: usize) -> Grid {
    match d {
        1 => Grid::new(1, 16384, 1.0 / 256.0),
        2 => Grid::new(2, 256, 1.0 / 16.0),
        _ => Grid::new(3, 64, 0.125),
    }
    .expect("default grids are valid")
}

/// `|P_t φ(x) - φ(x) - ∫_0^t P_s Aφ(x) ds|` with `P_s Aφ` taken on the spectral route.
pub fn dynkin_residual(
    spec: &SymbolSpec,
    phi: &dyn SmoothFn,
    x: &[f64],
    t: f64,
    quad_points: usize,
    grid: Option<Grid>,
) -> Result<DynkinReport> {
    let d = spec.dimension;
    if x.len() != d {
        return invalid("evaluation point has the wrong dimension");
    }
    if !(t > 0.0) || quad_points == 0 {
        return invalid("need t > 0 and at least one quadrature node");
    }
    let grid = grid.unwrap_or_else(|| default_dynkin_grid(d));
    let table = transition_density(spec, t, grid)?;
    let phi_x = phi.value(x);
    let env = Envelope::new(
        (0..grid.len()).map(|i| phi.value(&grid.point(i)).norm()).fold(0.0, f64::max),
        0.0,
    );
    let pt = apply_semigroup(&table, SemigroupInput::Callable { f: phi, envelope: env }, &[x.to_vec()], 1.0)?;
    let lhs = pt.values[0] - phi_x;
    let sampled = GridFunction::sample(grid, phi, env)?;
    let gl = GaussLegendre::new(quad_points);
    let idx: Vec<usize> = x
        .iter()
        .map(|&c| grid.axis_index(c).ok_or_else(|| LevyError::Window(format!("{c} is not a lattice coordinate"))))
        .collect::<Result<_>>()?;
    let flat = grid.flat_index(&idx);
    let a_phi = apply_generator_spectral(spec, &sampled, &SpectralOptions::default())?.output;
    let mut rhs = Complex64::new(0.0, 0.0);
    for (s, w) in gl.mapped(0.0, t) {
        rhs += apply_semigroup_spectral(spec, s, &a_phi, None)?.output.values[flat] * w;
    }
    Ok(DynkinReport {
        t,
        x: x.to_vec(),
        lhs,
        rhs,
        residual: (lhs - rhs).norm(),
        quad_points,
        grid,
        note: "Gaussian bumps below 1e-12 of their peak outside the window stand in for compactly supported test functions".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{FnMap, TestFunction};

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn brownian_moments_and_reproducibility() {
        let spec = SymbolSpec::brownian_standard(1);
        let n = 100_000;
        let b = sample_increments(&spec, 4.0, n, 7).unwrap();
        let (m, v) = mean_var(&b.increments);
        assert!(m.abs() < 3.0 * 2.0 / (n as f64).sqrt());
        // se of the sample variance of N(0, 4) is 4√(2/n)
        assert!((v - 4.0).abs() < 3.0 * 4.0 * (2.0 / n as f64).sqrt());
        let again = sample_increments(&spec, 4.0, n, 7).unwrap();
        assert_eq!(b.increments, again.increments);
    }

    #[test]
    fn stable_symmetry_and_laplace_transforms() {
        let n = 100_000;
        let b = sample_increments(&SymbolSpec::stable(1, 1.5).unwrap(), 1.0, n, 11).unwrap();
        let below = b.increments.iter().filter(|&&v| v <= 0.0).count() as f64 / n as f64;
        assert!((below - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt());
        // E e^{-λS} = e^{-λ^κ}
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kappa = 0.6;
        let draws: Vec<f64> = (0..n).map(|_| positive_stable(&mut rng, kappa)).collect();
        for lambda in [0.5, 1.0, 2.0] {
            let est = draws.iter().map(|s| (-lambda * s).exp()).sum::<f64>() / n as f64;
            let want = (-lambda.powf(kappa)).exp();
            assert!((est - want).abs() < 5.0 * 0.5 / (n as f64).sqrt(), "{est} vs {want}");
        }
    }

    #[test]
    fn characteristic_functions_match_symbols() {
        let n = 200_000;
        let specs = [
            SymbolSpec::stable(2, 1.2).unwrap(),
            SymbolSpec::new(Family::Relativistic { mass: 1.0 }, 1).unwrap(),
            SymbolSpec::new(
                Family::SubordinatedBm { subordinator: Subordinator::Gamma { shape: 2.0, rate: 1.0 } },
                1,
            )
            .unwrap(),
        ];
        for spec in specs {
            let d = spec.dimension;
            let b = sample_increments(&spec, 0.7, n, 5).unwrap();
            let mut xi = vec![0.0; d];
            xi[0] = 0.9;
            let cf: f64 = (0..n)
                .map(|i| xi.iter().zip(b.draw(i)).map(|(a, c)| a * c).sum::<f64>().cos())
                .sum::<f64>()
                / n as f64;
            let want = (-0.7 * spec.eval(&xi).unwrap().re).exp();
            assert!((cf - want).abs() < 4.0 / (n as f64).sqrt(), "{} {cf} vs {want}", spec.name());
        }
    }

    #[test]
    fn unsupported_and_trivial_cases() {
        let spec = SymbolSpec::new(Family::TemperedStable { alpha: 1.0, lambda: 1.0 }, 1).unwrap();
        assert!(matches!(sample_increments(&spec, 1.0, 10, 0), Err(LevyError::UnsupportedFamily(_))));
        let b = sample_increments(&SymbolSpec::stable(1, 1.5).unwrap(), 1.0, 1000, 0).unwrap();
        let one = FnMap(|_: &[f64]| Complex64::new(1.0, 0.0));
        let e = mc_semigroup(&b, &one, &[vec![0.3]]).unwrap();
        assert_eq!(e[0].mean, Complex64::new(1.0, 0.0));
        assert_eq!(e[0].standard_error, 0.0);
    }

    #[test]
    fn ks_statistic_small_case() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert!((ks_statistic(&[1.0, 2.0], &[3.0, 4.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dynkin_zero_bump() {
        let zero = TestFunction::Constant { value: 0.0 };
        let grid = Grid::new(1, 1024, 1.0 / 16.0).unwrap();
        let r = dynkin_residual(&SymbolSpec::brownian_standard(1), &zero, &[0.0], 1.0, 8, Some(grid)).unwrap();
        assert_eq!(r.residual, 0.0);
    }
}
