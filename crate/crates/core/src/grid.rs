//! Uniform origin-centred lattices, sampled functions and their file formats.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LevyError, Result};
use crate::functions::SmoothFn;

/// Polynomial growth bound `|u(x)| ≤ M (1 + |x|^γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub m: f64,
    pub gamma: f64,
}

impl Envelope {
    pub fn new(m: f64, gamma: f64) -> Self {
        Self { m, gamma }
    }

    pub fn bound(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.m * (1.0 + r.powf(self.gamma))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m >= 0.0 && self.m.is_finite()) || !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return invalid(format!("envelope needs M ≥ 0 and γ ≥ 0, got ({}, {})", self.m, self.gamma));
        }
        Ok(())
    }
}

/// `N^d` points `x_j = (j - N/2) h` per axis, row-major with the last axis fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub dimension: usize,
    pub points_per_axis: usize,
    #[serde(with = "f64_bits")]
    pub spacing: OrderedF64,
}

/// `f64` wrapper so that grids can be compared and hashed by value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OrderedF64(u64);

impl OrderedF64 {
    pub fn get(self) -> f64 {
        f64::from_bits(self.0)
    }
}

mod f64_bits {
    use super::OrderedF64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &OrderedF64, s: S) -> Result<S::Ok, S::Error> {
        v.get().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<OrderedF64, D::Error> {
        Ok(OrderedF64(f64::deserialize(d)?.to_bits()))
    }
}

impl Grid {
    pub fn new(dimension: usize, points_per_axis: usize, spacing: f64) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return invalid(format!("grid dimension must be 1, 2 or 3, got {dimension}"));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return invalid(format!("points per axis must be a power of two ≥ 8, got {points_per_axis}"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return invalid(format!("grid spacing must be positive, got {spacing}"));
        }
        Ok(Self {
            dimension,
            points_per_axis,
            spacing: OrderedF64(spacing.to_bits()),
        })
    }

    pub fn h(&self) -> f64 {
        self.spacing.get()
    }

    pub fn n(&self) -> usize {
        self.points_per_axis
    }

    /// Period `L = N h`.
    pub fn period(&self) -> f64 {
        self.points_per_axis as f64 * self.h()
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dimension as i32)
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        (j as f64 - (self.points_per_axis / 2) as f64) * self.h()
    }

    /// Axis index of coordinate `x`, if it is a lattice point.
    pub fn axis_index(&self, x: f64) -> Option<usize> {
        let j = x / self.h() + (self.points_per_axis / 2) as f64;
        let r = j.round();
        if (j - r).abs() > 1e-9 || r < 0.0 || r >= self.points_per_axis as f64 {
            None
        } else {
            Some(r as usize)
        }
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        let mut out = [0; 3];
        for a in (0..self.dimension).rev() {
            out[a] = idx % n;
            idx /= n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .take(self.dimension)
            .fold(0, |acc, &m| acc * self.points_per_axis + m)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let m = self.multi_index(idx);
        (0..self.dimension).map(|a| self.coordinate(m[a])).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// Signed wavenumber of FFT index `j`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.points_per_axis as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Lattice frequency `2πk/L` at FFT position `idx`.
    pub fn frequency(&self, idx: usize) -> Vec<f64> {
        let m = self.multi_index(idx);
        let scale = 2.0 * std::f64::consts::PI / self.period();
        (0..self.dimension)
            .map(|a| self.wavenumber(m[a]) as f64 * scale)
            .collect()
    }

    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.frequency(i)).collect()
    }

    /// Largest lattice frequency `π/h`.
    pub fn max_frequency(&self) -> f64 {
        std::f64::consts::PI / self.h()
    }

    /// Same spacing, `factor` times as many points per axis.
    pub fn padded(&self, factor: usize) -> Result<Grid> {
        Grid::new(self.dimension, self.points_per_axis * factor, self.h())
    }

    /// Whether `idx` lies in the outer `N/16` band of some axis.
    pub fn in_boundary_band(&self, idx: usize) -> bool {
        let band = (self.points_per_axis / 16).max(1);
        let m = self.multi_index(idx);
        (0..self.dimension).any(|a| m[a] < band || m[a] >= self.points_per_axis - band)
    }

    /// Whether every coordinate satisfies `|x_a| ≤ radius`.
    pub fn in_box(&self, idx: usize, radius: f64) -> bool {
        let m = self.multi_index(idx);
        (0..self.dimension).all(|a| self.coordinate(m[a]).abs() <= radius + 1e-12)
    }

    /// Copies `values` into the centre of the `factor`-padded lattice.
    pub fn embed(&self, values: &[Complex64], factor: usize) -> Vec<Complex64> {
        let big = self.points_per_axis * factor;
        let offset = (factor - 1) * self.points_per_axis / 2;
        let mut out = vec![Complex64::new(0.0, 0.0); big.pow(self.dimension as u32)];
        for (i, v) in values.iter().enumerate() {
            let m = self.multi_index(i);
            let j = (0..self.dimension).fold(0, |acc, a| acc * big + m[a] + offset);
            out[j] = *v;
        }
        out
    }

    /// Inverse of [`Grid::embed`]: the central window of a padded array.
    pub fn crop<T: Copy>(&self, padded: &[T], factor: usize) -> Vec<T> {
        let big = self.points_per_axis * factor;
        let offset = (factor - 1) * self.points_per_axis / 2;
        (0..self.len())
            .map(|i| {
                let m = self.multi_index(i);
                let j = (0..self.dimension).fold(0, |acc, a| acc * big + m[a] + offset);
                padded[j]
            })
            .collect()
    }
}

/// In-place multi-dimensional FFT, unnormalized in both directions.
pub fn fft_nd(values: &mut [Complex64], dimension: usize, n: usize, inverse: bool) {
    assert_eq!(values.len(), n.pow(dimension as u32));
    let mut planner = FftPlanner::new();
    let fft: Arc<dyn Fft<f64>> = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dimension {
        let stride = n.pow((dimension - 1 - axis) as u32);
        if stride == 1 {
            for chunk in values.chunks_mut(n) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * n;
        for base_block in (0..values.len()).step_by(block) {
            for offset in 0..stride {
                let start = base_block + offset;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = values[start + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    values[start + k * stride] = *v;
                }
            }
        }
    }
}

/// Samples on a [`Grid`] together with a verified growth envelope.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub envelope: Envelope,
    /// Lattice-periodic data (plane waves) skip the boundary-band test and padding.
    pub periodic: bool,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>, envelope: Envelope) -> Result<Self> {
        envelope.validate()?;
        if values.len() != grid.len() {
            return invalid(format!("expected {} samples, got {}", grid.len(), values.len()));
        }
        for (i, v) in values.iter().enumerate() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return invalid(format!("non-finite sample at index {i}"));
            }
            let x = grid.point(i);
            let b = envelope.bound(&x);
            if v.norm() > b * (1.0 + 1e-12) + 1e-300 {
                return Err(LevyError::Envelope(format!(
                    "|u| = {:.6e} exceeds M(1+|x|^γ) = {:.6e} at x = {x:?}",
                    v.norm(),
                    b
                )));
            }
        }
        Ok(Self {
            grid,
            values,
            envelope,
            periodic: false,
        })
    }

    pub fn sample(grid: Grid, f: &dyn SmoothFn, envelope: Envelope) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f.value(&grid.point(i))).collect();
        Self::new(grid, values, envelope)
    }

    /// Samples `f` and fits the smallest `M` for the given `γ`.
    pub fn sample_with_gamma(grid: Grid, f: &dyn SmoothFn, gamma: f64) -> Result<Self> {
        let values: Vec<Complex64> = (0..grid.len()).map(|i| f.value(&grid.point(i))).collect();
        Self::with_fitted_envelope(grid, values, gamma)
    }

    /// Wraps `values` with the smallest `M` that certifies growth order `γ`.
    pub fn with_fitted_envelope(grid: Grid, values: Vec<Complex64>, gamma: f64) -> Result<Self> {
        let probe = Envelope::new(1.0, gamma);
        let m = values
            .iter()
            .enumerate()
            .map(|(i, v)| v.norm() / probe.bound(&grid.point(i)))
            .fold(0.0, f64::max);
        Self::new(grid, values, Envelope::new(m, gamma))
    }

    /// Lattice plane wave `e^{iξ·x}`; `wavenumbers` are integers `k` with `ξ = 2πk/L`.
    pub fn plane_wave(grid: Grid, wavenumbers: &[i64]) -> Result<Self> {
        if wavenumbers.len() != grid.dimension {
            return invalid("one wavenumber per axis is required");
        }
        let scale = 2.0 * std::f64::consts::PI / grid.period();
        let xi: Vec<f64> = wavenumbers.iter().map(|&k| k as f64 * scale).collect();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                Complex64::from_polar(1.0, xi.iter().zip(&x).map(|(a, b)| a * b).sum())
            })
            .collect();
        let mut gf = Self::new(grid, values, Envelope::new(1.0, 0.0))?;
        gf.periodic = true;
        Ok(gf)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// `max_band |f| / max |f|`; zero for identically zero data.
    pub fn boundary_ratio(&self) -> f64 {
        let sup = self.sup_abs();
        if sup == 0.0 {
            return 0.0;
        }
        let band = (0..self.grid.len())
            .filter(|&i| self.grid.in_boundary_band(i))
            .map(|i| self.values[i].norm())
            .fold(0.0, f64::max);
        band / sup
    }

    /// Fails with [`LevyError::Alias`] unless the data decays in the boundary band.
    pub fn check_boundary(&self, tol: f64) -> Result<f64> {
        if self.periodic {
            return Ok(0.0);
        }
        let ratio = self.boundary_ratio();
        if ratio >= tol {
            return Err(LevyError::Alias { ratio });
        }
        Ok(ratio)
    }

    /// Value at a lattice point given by coordinates.
    pub fn at(&self, x: &[f64]) -> Option<Complex64> {
        let mut m = [0usize; 3];
        for (a, &xa) in x.iter().enumerate() {
            m[a] = self.grid.axis_index(xa)?;
        }
        Some(self.values[self.grid.flat_index(&m[..self.grid.dimension])])
    }

    /// CSV with columns `x1..xd, re, im`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (1..=self.grid.dimension)
            .map(|a| format!("x{a}"))
            .chain(["re".to_string(), "im".to_string()])
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let x = self.grid.point(i);
            for xa in &x {
                write!(w, "{xa:.17e},")?;
            }
            writeln!(w, "{:.17e},{:.17e}", v.re, v.im)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Binary dump: `d: u64, N: u64, h: f64`, then interleaved `re, im` (little-endian).
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write_binary_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_binary_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&(self.grid.dimension as u64).to_le_bytes())?;
        w.write_all(&(self.grid.points_per_axis as u64).to_le_bytes())?;
        w.write_all(&self.grid.h().to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a binary dump; the envelope is refitted with the given `γ`.
    pub fn read_binary(path: impl AsRef<Path>, gamma: f64) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let d = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let h = f64::from_le_bytes(word);
        let grid = Grid::new(d, n, h)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            r.read_exact(&mut word)?;
            let im = f64::from_le_bytes(word);
            values.push(Complex64::new(re, im));
        }
        if !r.fill_buf()?.is_empty() {
            return invalid("trailing bytes after grid function payload");
        }
        Self::with_fitted_envelope(grid, values, gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::TestFunction;

    #[test]
    fn grid_validation() {
        assert!(Grid::new(4, 16, 0.1).is_err());
        assert!(Grid::new(1, 12, 0.1).is_err());
        assert!(Grid::new(1, 4, 0.1).is_err());
        assert!(Grid::new(2, 16, -1.0).is_err());
        let g = Grid::new(2, 16, 0.5).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.period(), 8.0);
        assert_eq!(g.point(0), vec![-4.0, -4.0]);
        assert_eq!(g.point(17), vec![-3.5, -3.5]);
        assert_eq!(g.wavenumber(15), -1);
        assert_eq!(g.axis_index(0.0), Some(8));
    }

    #[test]
    fn fft_round_trip_and_single_mode() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let f = GridFunction::plane_wave(g, &[1, -2]).unwrap();
        let mut v = f.values.clone();
        fft_nd(&mut v, 2, 8, false);
        let peak = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap();
        let k: Vec<i64> = g.multi_index(peak.0)[..2].iter().map(|&j| g.wavenumber(j)).collect();
        assert_eq!(k, vec![1, -2]);
        fft_nd(&mut v, 2, 8, true);
        for (a, b) in v.iter().zip(&f.values) {
            assert!((a / 64.0 - b).norm() < 1e-14);
        }
    }

    #[test]
    fn envelope_is_enforced() {
        let g = Grid::new(1, 16, 0.5).unwrap();
        let f = TestFunction::AbsPower {
            exponent: 2.0,
            coefficient: 1.0,
        };
        assert!(GridFunction::sample(g, &f, Envelope::new(1.0, 1.0)).is_err());
        assert!(GridFunction::sample(g, &f, Envelope::new(1.0, 2.0)).is_ok());
    }

    #[test]
    fn binary_and_embed_round_trip() {
        let g = Grid::new(2, 8, 0.25).unwrap();
        let f = TestFunction::Gaussian {
            center: vec![0.1, 0.0],
            sigma: 0.5,
            amplitude: 1.0,
        };
        let gf = GridFunction::sample(g, &f, Envelope::new(1.0, 0.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.bin");
        gf.write_binary(&path).unwrap();
        let back = GridFunction::read_binary(&path, 0.0).unwrap();
        assert_eq!(back.values, gf.values);
        let padded = g.embed(&gf.values, 4);
        assert_eq!(g.crop(&padded, 4), gf.values);
        let big = g.padded(4).unwrap();
        let centre = big.flat_index(&[16, 16]);
        assert_eq!(padded[centre], gf.values[g.flat_index(&[4, 4])]);
        gf.write_csv(dir.path().join("u.csv")).unwrap();
    }
}
