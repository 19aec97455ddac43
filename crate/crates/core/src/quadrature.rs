//! Quadrature building blocks shared by the symbol, generator and semigroup code.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_n` from the Tricomi initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared 16-point rule.
    pub fn order16() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(16))
    }

    pub fn order32() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(32))
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    pub fn integrate_complex(&self, a: f64, b: f64, f: impl Fn(f64) -> Complex64) -> Complex64 {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }

    /// Composite rule over `panels` equal sub-intervals of `[a, b]`.
    pub fn composite(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        let panels = panels.max(1);
        let width = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * width;
                self.integrate(lo, lo + width, &f)
            })
            .sum()
    }

    pub fn composite_complex(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        f: impl Fn(f64) -> Complex64,
    ) -> Complex64 {
        let panels = panels.max(1);
        let width = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * width;
                self.integrate_complex(lo, lo + width, &f)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Pairwise summation; deterministic order independent of thread count.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_sum_complex(values: &[Complex64]) -> Complex64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum_complex(&values[..mid]) + pairwise_sum_complex(&values[mid..])
}

/// Ordinary least-squares line `y = slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Outcome of summing dyadic shells `[r 2^j, r 2^{j+1})` towards infinity.
#[derive(Debug, Clone)]
pub struct DyadicSum {
    pub value: f64,
    pub finite: bool,
    pub shell_sums: Vec<f64>,
    /// Geometric-tail correction included in `value`.
    pub tail_estimate: f64,
    pub last_ratio: f64,
}

/// Sum of `shell(j)` over `j = 0, 1, ...` with the shell-ratio divergence rule:
/// `+∞` once `fail_run` consecutive shells fail `S_{j+1}/S_j < decay_ratio`.
/// Converged sums are closed with the geometric tail of the last stable ratio.
pub fn dyadic_outer_sum(
    mut shell: impl FnMut(usize) -> f64,
    decay_ratio: f64,
    fail_run: usize,
    rel_tol: f64,
    max_shells: usize,
) -> DyadicSum {
    let mut sums: Vec<f64> = Vec::new();
    let mut total = 0.0;
    let mut fails = 0usize;
    let mut last_ratio = 0.0;
    for j in 0..max_shells {
        let s = shell(j);
        sums.push(s);
        total += s;
        if j == 0 {
            continue;
        }
        let prev = sums[j - 1];
        if s == 0.0 {
            // compact support reached
            return DyadicSum {
                value: total,
                finite: true,
                shell_sums: sums,
                tail_estimate: 0.0,
                last_ratio: 0.0,
            };
        }
        let ratio = if prev == 0.0 { f64::INFINITY } else { s / prev };
        last_ratio = ratio;
        if !(ratio < decay_ratio) {
            fails += 1;
            if fails >= fail_run {
                return DyadicSum {
                    value: f64::INFINITY,
                    finite: false,
                    shell_sums: sums,
                    tail_estimate: f64::INFINITY,
                    last_ratio,
                };
            }
            continue;
        }
        fails = 0;
        let tail = s * ratio / (1.0 - ratio);
        if tail.abs() <= rel_tol * total.abs() {
            return DyadicSum {
                value: total + tail,
                finite: true,
                shell_sums: sums,
                tail_estimate: tail,
                last_ratio,
            };
        }
        // a run of identical ratios is an exact geometric series; close it
        if j >= 12 {
            let r1 = sums[j - 1] / sums[j - 2];
            let r2 = sums[j - 2] / sums[j - 3];
            if ((ratio - r1) / ratio).abs() < 1e-9 && ((r1 - r2) / r1).abs() < 1e-9 {
                return DyadicSum {
                    value: total + tail,
                    finite: true,
                    shell_sums: sums,
                    tail_estimate: tail,
                    last_ratio,
                };
            }
        }
    }
    let n = sums.len();
    let s = sums[n - 1];
    if last_ratio < decay_ratio && fails == 0 {
        let tail = s * last_ratio / (1.0 - last_ratio);
        DyadicSum {
            value: total + tail,
            finite: true,
            shell_sums: sums,
            tail_estimate: tail,
            last_ratio,
        }
    } else {
        DyadicSum {
            value: f64::INFINITY,
            finite: false,
            shell_sums: sums,
            tail_estimate: f64::INFINITY,
            last_ratio,
        }
    }
}

/// Sum of an alternating sequence by repeated averaging of partial sums
/// (Euler transform). `terms` should alternate in sign with slowly varying magnitude.
pub fn euler_alternating_sum(terms: &[Complex64]) -> Complex64 {
    if terms.is_empty() {
        return Complex64::new(0.0, 0.0);
    }
    let mut partial: Vec<Complex64> = Vec::with_capacity(terms.len());
    let mut acc = Complex64::new(0.0, 0.0);
    for t in terms {
        acc += t;
        partial.push(acc);
    }
    // average neighbouring partial sums until one value is left
    let depth = (terms.len() - 1).min(24);
    let start = partial.len() - 1 - depth;
    let mut row: Vec<Complex64> = partial[start..].to_vec();
    while row.len() > 1 {
        row = row.windows(2).map(|w| (w[0] + w[1]) * 0.5).collect();
    }
    row[0]
}

/// Product angular rule on the unit sphere `S^{d-1}` (weights sum to its area).
#[derive(Debug, Clone)]
pub struct AngularRule {
    pub directions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl AngularRule {
    /// `refinement` multiplies the base order (32 angles on the circle; 16 × 32 on the sphere).
    pub fn new(dimension: usize, refinement: usize) -> Self {
        let refinement = refinement.max(1);
        match dimension {
            1 => Self {
                directions: vec![vec![-1.0], vec![1.0]],
                weights: vec![1.0, 1.0],
            },
            2 => {
                let m = 32 * refinement;
                let directions = (0..m)
                    .map(|i| {
                        let a = 2.0 * PI * (i as f64 + 0.5) / m as f64;
                        vec![a.cos(), a.sin()]
                    })
                    .collect();
                Self {
                    directions,
                    weights: vec![2.0 * PI / m as f64; m],
                }
            }
            3 => {
                let gl = GaussLegendre::new(16 * refinement);
                let m = 32 * refinement;
                let mut directions = Vec::with_capacity(gl.nodes.len() * m);
                let mut weights = Vec::with_capacity(gl.nodes.len() * m);
                for (&c, &w) in gl.nodes.iter().zip(&gl.weights) {
                    let s = (1.0 - c * c).sqrt();
                    for i in 0..m {
                        let a = 2.0 * PI * (i as f64 + 0.5) / m as f64;
                        directions.push(vec![s * a.cos(), s * a.sin(), c]);
                        weights.push(w * 2.0 * PI / m as f64);
                    }
                }
                Self { directions, weights }
            }
            _ => panic!("angular rules are provided for d = 1, 2, 3"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(16);
        // degree 31 is the exactness limit
        let v = gl.integrate(0.0, 2.0, |x| x.powi(31));
        assert_relative_eq!(v, 2f64.powi(32) / 32.0, max_relative = 1e-13);
        assert_relative_eq!(gl.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn gauss_legendre_odd_order_has_center_node() {
        let gl = GaussLegendre::new(7);
        assert_eq!(gl.nodes[3], 0.0);
        assert_relative_eq!(gl.integrate(-1.0, 1.0, |x| x.exp()), 1f64.exp() - (-1f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn dyadic_sum_geometric_and_divergent() {
        // shells of a power law y^{-2} on [1, inf): value 1
        let gl = GaussLegendre::order16();
        let s = dyadic_outer_sum(
            |j| {
                let a = 2f64.powi(j as i32);
                gl.integrate(a, 2.0 * a, |y| y.powi(-2))
            },
            0.95,
            8,
            1e-14,
            400,
        );
        assert!(s.finite);
        assert_relative_eq!(s.value, 1.0, max_relative = 1e-12);
        let d = dyadic_outer_sum(
            |j| {
                let a = 2f64.powi(j as i32);
                gl.integrate(a, 2.0 * a, |y| y.powi(-1))
            },
            0.95,
            8,
            1e-14,
            400,
        );
        assert!(!d.finite);
        assert_eq!(d.shell_sums.len(), 9);
    }

    #[test]
    fn euler_transform_sums_alternating_harmonic() {
        let terms: Vec<Complex64> = (1..=30)
            .map(|k| Complex64::new(if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64, 0.0))
            .collect();
        let s = euler_alternating_sum(&terms);
        assert!((s.re - 2f64.ln()).abs() < 1e-9, "{}", s.re);
    }

    #[test]
    fn angular_rules_have_sphere_area() {
        assert_relative_eq!(AngularRule::new(2, 1).weights.iter().sum::<f64>(), 2.0 * PI, epsilon = 1e-12);
        assert_relative_eq!(AngularRule::new(3, 1).weights.iter().sum::<f64>(), 4.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let (m, c) = linear_fit(&xs, &ys).unwrap();
        assert_relative_eq!(m, 2.5, epsilon = 1e-14);
        assert_relative_eq!(c, -1.0, epsilon = 1e-14);
    }
}
