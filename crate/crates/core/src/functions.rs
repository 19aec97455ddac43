//! Callable test functions with derivatives.
//!
//! The direct generator route and the mollifier need point evaluations and,
//! for the small-jump compensator, gradients and Hessians. [`TestFunction`] is
//! the serializable catalogue used by configurations; arbitrary closures can be
//! wrapped in [`FnMap`] and get central-difference derivatives.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::Envelope;

/// Central-difference step for callables without analytic derivatives.
pub const FD_STEP: f64 = 1e-5;

pub trait SmoothFn: Send + Sync {
    fn value(&self, x: &[f64]) -> Complex64;

    fn gradient(&self, x: &[f64]) -> Vec<Complex64> {
        fd_gradient(|y| self.value(y), x, FD_STEP)
    }

    /// Row-major `d × d` Hessian.
    fn hessian(&self, x: &[f64]) -> Vec<Complex64> {
        fd_jacobian(|y| self.gradient(y), x, FD_STEP)
    }

    /// Radius around the origin outside which `|f|` is below `1e-12·sup|f|`.
    fn support_radius(&self) -> Option<f64> {
        None
    }

    /// Length on which `f` changes appreciably; sets quadrature panel widths.
    fn feature_scale(&self) -> f64 {
        1.0
    }
}

pub fn fd_gradient(f: impl Fn(&[f64]) -> Complex64, x: &[f64], step: f64) -> Vec<Complex64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + step;
            let fp = f(&y);
            y[i] = x[i] - step;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

fn fd_jacobian(g: impl Fn(&[f64]) -> Vec<Complex64>, x: &[f64], step: f64) -> Vec<Complex64> {
    let d = x.len();
    let mut out = vec![Complex64::new(0.0, 0.0); d * d];
    let mut y = x.to_vec();
    for j in 0..d {
        y[j] = x[j] + step;
        let gp = g(&y);
        y[j] = x[j] - step;
        let gm = g(&y);
        y[j] = x[j];
        for i in 0..d {
            out[i * d + j] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    // symmetrize
    for i in 0..d {
        for j in 0..i {
            let m = 0.5 * (out[i * d + j] + out[j * d + i]);
            out[i * d + j] = m;
            out[j * d + i] = m;
        }
    }
    out
}

/// Wraps a closure; derivatives by central differences.
pub struct FnMap<F>(pub F);

impl<F> SmoothFn for FnMap<F>
where
    F: Fn(&[f64]) -> Complex64 + Send + Sync,
{
    fn value(&self, x: &[f64]) -> Complex64 {
        (self.0)(x)
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coefficient: f64,
    pub powers: Vec<u32>,
}

/// Function catalogue for configurations and tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    Constant {
        value: f64,
    },
    /// `Σ c_m x^{p_m}` with multi-index powers.
    Polynomial {
        terms: Vec<Monomial>,
    },
    /// `a sin(ξ·x)`.
    Sin {
        frequency: Vec<f64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `e^{iξ·x}`.
    PlaneWave {
        frequency: Vec<f64>,
    },
    /// `a exp(-|x-c|²/(2σ²))`.
    Gaussian {
        center: Vec<f64>,
        sigma: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `a exp(-1/(1-|x-c|²/R²))` on `|x-c| < R`, zero outside.
    Bump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Triangle wave in `x₁` with peak `amplitude` and the given period.
    Sawtooth {
        period: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `a |x|^p`.
    AbsPower {
        exponent: f64,
        #[serde(default = "one")]
        coefficient: f64,
    },
}

impl TestFunction {
    pub fn validate(&self, dimension: usize) -> Result<()> {
        let check_len = |v: &[f64], what: &str| {
            if v.len() != dimension {
                invalid(format!("{what} has length {} but the dimension is {dimension}", v.len()))
            } else {
                Ok(())
            }
        };
        match self {
            TestFunction::Constant { .. } => Ok(()),
            TestFunction::Polynomial { terms } => {
                for t in terms {
                    if t.powers.len() != dimension {
                        return invalid("monomial powers must have one entry per dimension");
                    }
                }
                Ok(())
            }
            TestFunction::Sin { frequency, .. } | TestFunction::PlaneWave { frequency } => {
                check_len(frequency, "frequency")
            }
            TestFunction::Gaussian { center, sigma, .. } => {
                check_len(center, "center")?;
                if !(*sigma > 0.0) {
                    return invalid("gaussian sigma must be positive");
                }
                Ok(())
            }
            TestFunction::Bump { center, radius, .. } => {
                check_len(center, "center")?;
                if !(*radius > 0.0) {
                    return invalid("bump radius must be positive");
                }
                Ok(())
            }
            TestFunction::Sawtooth { period, .. } => {
                if !(*period > 0.0) {
                    return invalid("sawtooth period must be positive");
                }
                Ok(())
            }
            TestFunction::AbsPower { exponent, .. } => {
                if !(*exponent >= 0.0) {
                    return invalid("abs_power exponent must be non-negative");
                }
                Ok(())
            }
        }
    }

    /// A growth envelope `(M, γ)` valid on all of `R^d`.
    pub fn envelope(&self) -> Envelope {
        match self {
            TestFunction::Constant { value } => Envelope::new(value.abs(), 0.0),
            TestFunction::Polynomial { terms } => {
                let m = terms.iter().map(|t| t.coefficient.abs()).sum();
                let deg = terms
                    .iter()
                    .filter(|t| t.coefficient != 0.0)
                    .map(|t| t.powers.iter().sum::<u32>())
                    .max()
                    .unwrap_or(0);
                Envelope::new(m, deg as f64)
            }
            TestFunction::Sin { amplitude, .. } => Envelope::new(amplitude.abs(), 0.0),
            TestFunction::PlaneWave { .. } => Envelope::new(1.0, 0.0),
            TestFunction::Gaussian { amplitude, .. } | TestFunction::Bump { amplitude, .. } => {
                Envelope::new(amplitude.abs(), 0.0)
            }
            TestFunction::Sawtooth { amplitude, .. } => Envelope::new(amplitude.abs(), 0.0),
            TestFunction::AbsPower {
                exponent,
                coefficient,
            } => Envelope::new(coefficient.abs(), *exponent),
        }
    }

    pub fn is_real(&self) -> bool {
        !matches!(self, TestFunction::PlaneWave { .. })
    }

    /// Gaussian with unit mass in `R^d`.
    pub fn normalized_gaussian(center: Vec<f64>, sigma: f64) -> Self {
        let d = center.len() as i32;
        let amplitude = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.5 * d as f64);
        TestFunction::Gaussian {
            center,
            sigma,
            amplitude,
        }
    }
}

fn bump_profile(q: f64) -> (f64, f64, f64) {
    // g(q) = exp(-1/(1-q)) with q = |x-c|²/R²; returns (g, g', g'') in q
    if q >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let u = 1.0 - q;
    let g = (-1.0 / u).exp();
    let g1 = -g / (u * u);
    let g2 = g / u.powi(4) - 2.0 * g / u.powi(3);
    (g, g1, g2)
}

impl SmoothFn for TestFunction {
    fn value(&self, x: &[f64]) -> Complex64 {
        match self {
            TestFunction::Constant { value } => c(*value),
            TestFunction::Polynomial { terms } => c(terms
                .iter()
                .map(|t| {
                    t.coefficient
                        * t.powers
                            .iter()
                            .zip(x)
                            .map(|(&p, &xi)| xi.powi(p as i32))
                            .product::<f64>()
                })
                .sum()),
            TestFunction::Sin {
                frequency,
                amplitude,
            } => c(amplitude * dot(frequency, x).sin()),
            TestFunction::PlaneWave { frequency } => Complex64::from_polar(1.0, dot(frequency, x)),
            TestFunction::Gaussian {
                center,
                sigma,
                amplitude,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                c(amplitude * (-0.5 * r2 / (sigma * sigma)).exp())
            }
            TestFunction::Bump {
                center,
                radius,
                amplitude,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                c(amplitude * bump_profile(r2 / (radius * radius)).0)
            }
            TestFunction::Sawtooth { period, amplitude } => {
                let s = x[0] / period;
                let dist = (s - s.round()).abs();
                c(2.0 * amplitude * dist)
            }
            TestFunction::AbsPower {
                exponent,
                coefficient,
            } => c(coefficient * norm(x).powf(*exponent)),
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<Complex64> {
        let d = x.len();
        match self {
            TestFunction::Constant { .. } => vec![c(0.0); d],
            TestFunction::Polynomial { terms } => (0..d)
                .map(|i| {
                    c(terms
                        .iter()
                        .map(|t| {
                            if t.powers[i] == 0 {
                                return 0.0;
                            }
                            let mut v = t.coefficient * t.powers[i] as f64;
                            for (j, (&p, &xj)) in t.powers.iter().zip(x).enumerate() {
                                let p = if j == i { p - 1 } else { p };
                                v *= xj.powi(p as i32);
                            }
                            v
                        })
                        .sum())
                })
                .collect(),
            TestFunction::Sin {
                frequency,
                amplitude,
            } => {
                let cs = dot(frequency, x).cos();
                frequency.iter().map(|k| c(amplitude * k * cs)).collect()
            }
            TestFunction::PlaneWave { frequency } => {
                let e = Complex64::from_polar(1.0, dot(frequency, x));
                frequency.iter().map(|k| Complex64::new(0.0, *k) * e).collect()
            }
            TestFunction::Gaussian { center, sigma, .. } => {
                let v = self.value(x).re;
                let s2 = sigma * sigma;
                x.iter().zip(center).map(|(a, b)| c(-(a - b) / s2 * v)).collect()
            }
            TestFunction::Bump {
                center,
                radius,
                amplitude,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                let big = radius * radius;
                let (_, g1, _) = bump_profile(r2 / big);
                x.iter()
                    .zip(center)
                    .map(|(a, b)| c(amplitude * g1 * 2.0 * (a - b) / big))
                    .collect()
            }
            _ => fd_gradient(|y| self.value(y), x, FD_STEP),
        }
    }

    fn hessian(&self, x: &[f64]) -> Vec<Complex64> {
        let d = x.len();
        match self {
            TestFunction::Constant { .. } => vec![c(0.0); d * d],
            TestFunction::Sin {
                frequency,
                amplitude,
            } => {
                let sn = dot(frequency, x).sin();
                let mut h = vec![c(0.0); d * d];
                for i in 0..d {
                    for j in 0..d {
                        h[i * d + j] = c(-amplitude * frequency[i] * frequency[j] * sn);
                    }
                }
                h
            }
            TestFunction::PlaneWave { frequency } => {
                let e = Complex64::from_polar(1.0, dot(frequency, x));
                let mut h = vec![c(0.0); d * d];
                for i in 0..d {
                    for j in 0..d {
                        h[i * d + j] = -frequency[i] * frequency[j] * e;
                    }
                }
                h
            }
            TestFunction::Gaussian { center, sigma, .. } => {
                let v = self.value(x).re;
                let s2 = sigma * sigma;
                let mut h = vec![c(0.0); d * d];
                for i in 0..d {
                    for j in 0..d {
                        let di = x[i] - center[i];
                        let dj = x[j] - center[j];
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[i * d + j] = c((di * dj / (s2 * s2) - delta / s2) * v);
                    }
                }
                h
            }
            TestFunction::Bump {
                center,
                radius,
                amplitude,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                let big = radius * radius;
                let (_, g1, g2) = bump_profile(r2 / big);
                let mut h = vec![c(0.0); d * d];
                for i in 0..d {
                    for j in 0..d {
                        let di = x[i] - center[i];
                        let dj = x[j] - center[j];
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[i * d + j] =
                            c(amplitude * (g2 * 4.0 * di * dj / (big * big) + g1 * 2.0 * delta / big));
                    }
                }
                h
            }
            _ => fd_jacobian(|y| self.gradient(y), x, FD_STEP),
        }
    }

    fn support_radius(&self) -> Option<f64> {
        match self {
            TestFunction::Gaussian { center, sigma, .. } => {
                // exp(-r²/2σ²) < 1e-12 beyond r = σ √(24 ln 10)
                Some(norm(center) + sigma * (24.0 * std::f64::consts::LN_10).sqrt())
            }
            TestFunction::Bump { center, radius, .. } => Some(norm(center) + radius),
            _ => None,
        }
    }

    fn feature_scale(&self) -> f64 {
        match self {
            TestFunction::Sin { frequency, .. } | TestFunction::PlaneWave { frequency } => {
                let k = norm(frequency);
                if k > 0.0 {
                    1.0 / k
                } else {
                    1.0
                }
            }
            TestFunction::Gaussian { sigma, .. } => *sigma,
            TestFunction::Bump { radius, .. } => 0.25 * radius,
            TestFunction::Sawtooth { period, .. } => 0.5 * period,
            _ => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: &TestFunction, x: &[f64]) {
        let g = f.gradient(x);
        let gfd = fd_gradient(|y| f.value(y), x, 1e-6);
        for (a, b) in g.iter().zip(&gfd) {
            assert!((a - b).norm() < 1e-7, "{f:?} gradient {a} vs {b}");
        }
        let h = f.hessian(x);
        let hfd = fd_jacobian(|y| f.gradient(y), x, 1e-6);
        for (a, b) in h.iter().zip(&hfd) {
            assert!((a - b).norm() < 1e-6, "{f:?} hessian {a} vs {b}");
        }
    }

    #[test]
    fn analytic_derivatives_agree_with_differences() {
        let x = [0.3, -0.2];
        fd_check(
            &TestFunction::Gaussian {
                center: vec![0.1, 0.0],
                sigma: 0.7,
                amplitude: 2.0,
            },
            &x,
        );
        fd_check(
            &TestFunction::Bump {
                center: vec![0.0, 0.1],
                radius: 1.2,
                amplitude: 1.0,
            },
            &x,
        );
        fd_check(
            &TestFunction::Sin {
                frequency: vec![1.0, 2.0],
                amplitude: 1.0,
            },
            &x,
        );
        fd_check(
            &TestFunction::Polynomial {
                terms: vec![
                    Monomial {
                        coefficient: 1.0,
                        powers: vec![2, 0],
                    },
                    Monomial {
                        coefficient: -3.0,
                        powers: vec![1, 1],
                    },
                ],
            },
            &x,
        );
        fd_check(&TestFunction::PlaneWave { frequency: vec![0.5, -1.5] }, &x);
    }

    #[test]
    fn envelopes_hold() {
        let fs = [
            TestFunction::Polynomial {
                terms: vec![
                    Monomial {
                        coefficient: 1.0,
                        powers: vec![2, 0],
                    },
                    Monomial {
                        coefficient: -1.0,
                        powers: vec![0, 2],
                    },
                ],
            },
            TestFunction::AbsPower {
                exponent: 0.5,
                coefficient: 1.0,
            },
            TestFunction::Sawtooth {
                period: 1.0,
                amplitude: 1.0,
            },
        ];
        for f in &fs {
            let env = f.envelope();
            for i in 0..100 {
                let x = [i as f64 * 0.37 - 15.0, 7.0 - i as f64 * 0.11];
                assert!(f.value(&x).norm() <= env.bound(&x) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn dsl_round_trips_through_json() {
        let f = TestFunction::Sin {
            frequency: vec![1.0],
            amplitude: 1.0,
        };
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(serde_json::from_str::<TestFunction>(&s).unwrap(), f);
        let parsed: TestFunction =
            serde_json::from_str(r#"{"kind":"gaussian","center":[0.0],"sigma":1.0}"#).unwrap();
        assert_eq!(parsed.envelope().m, 1.0);
        assert!(serde_json::from_str::<TestFunction>(r#"{"kind":"constant","value":1,"x":2}"#).is_err());
    }
}
