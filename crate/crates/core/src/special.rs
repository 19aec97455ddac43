//! Normalized Bessel kernels for radial Fourier transforms.
//!
//! `Λ_ν(z) = Γ(ν+1) (2/z)^ν J_ν(z)` is the spherical average of `e^{i z θ·e}`
//! over `S^{k-1}` when `ν = k/2 - 1`. Only integer and half-integer orders occur,
//! so the order is passed doubled (`two_nu = k - 2`).

use std::f64::consts::PI;

/// Surface area of the unit sphere `S^{d-1}` in `R^d`.
pub fn sphere_area(dimension: usize) -> f64 {
    match dimension {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        d => 2.0 * PI * sphere_area(d - 2) / (d - 2) as f64,
    }
}

const SERIES_LIMIT: f64 = 2.0;

fn check_order(two_nu: i32) {
    assert!(two_nu >= -1, "normalized Bessel order must satisfy 2ν ≥ -1");
}

/// `Λ_ν(z)` for `ν = two_nu / 2`.
pub fn normalized_bessel(two_nu: i32, z: f64) -> f64 {
    check_order(two_nu);
    let z = z.abs();
    if two_nu == -1 {
        return z.cos();
    }
    if z < SERIES_LIMIT {
        return 1.0 - series_tail(two_nu, z);
    }
    large_argument(two_nu, z)
}

/// `1 - Λ_ν(z)` without cancellation for small `z`.
pub fn one_minus_normalized_bessel(two_nu: i32, z: f64) -> f64 {
    check_order(two_nu);
    let z = z.abs();
    if z < SERIES_LIMIT {
        return series_tail(two_nu, z);
    }
    1.0 - large_argument(two_nu, z)
}

// Σ_{m≥1} -(-z²/4)^m / (m! (ν+1)...(ν+m))
fn series_tail(two_nu: i32, z: f64) -> f64 {
    let nu = two_nu as f64 / 2.0;
    let q = -0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 0.0;
    for m in 1..200 {
        let mf = m as f64;
        term *= q / (mf * (nu + mf));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -sum
}

fn large_argument(two_nu: i32, z: f64) -> f64 {
    if two_nu % 2 != 0 {
        // ν = n + 1/2: Λ = (2n+1)!! j_n(z) / z^n
        let n = (two_nu - 1) / 2;
        if n == -1 {
            return z.cos();
        }
        let mut jm1 = z.cos() / z;
        let mut j = z.sin() / z;
        let mut double_fact = 1.0;
        let mut scale = 1.0;
        for l in 0..n {
            let next = (2 * l + 1) as f64 / z * j - jm1;
            jm1 = j;
            j = next;
            double_fact *= (2 * l + 3) as f64;
            scale *= z;
        }
        double_fact * j / scale
    } else {
        let n = (two_nu / 2) as u32;
        let mut factorial = 1.0;
        for i in 1..=n {
            factorial *= i as f64;
        }
        factorial * (2.0 / z).powi(n as i32) * bessel_j_integer(n, z)
    }
}

/// `J_n(z)` for integer `n ≥ 0` and `z ≥ 2`.
fn bessel_j_integer(n: u32, z: f64) -> f64 {
    if z >= 30.0 {
        return hankel_asymptotic(n, z);
    }
    // trapezoid rule on the periodic Bessel integral converges geometrically
    let m = (z + 12.0 * z.cbrt() + n as f64 + 40.0).ceil() as usize;
    let nf = n as f64;
    let sum: f64 = (0..m)
        .map(|i| {
            let tau = 2.0 * PI * i as f64 / m as f64;
            (nf * tau - z * tau.sin()).cos()
        })
        .sum();
    sum / m as f64
}

fn hankel_asymptotic(n: u32, z: f64) -> f64 {
    let mu = 4.0 * (n as f64) * (n as f64);
    let chi = z - (n as f64 / 2.0 + 0.25) * PI;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev_abs = f64::INFINITY;
    for k in 0..60 {
        if k > 0 {
            let kf = k as f64;
            term *= (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * z);
        }
        if term.abs() > prev_abs {
            break;
        }
        prev_abs = term.abs();
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    (2.0 / (PI * z)).sqrt() * (p * chi.cos() - q * chi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn j(n: i32, z: f64) -> f64 {
        // Λ_n(z) = n! (2/z)^n J_n(z)
        let mut f = 1.0;
        for i in 1..=n {
            f *= i as f64;
        }
        normalized_bessel(2 * n, z) / (f * (2.0 / z).powi(n))
    }

    #[test]
    fn integer_orders_match_reference_values() {
        // reference values from an independent Bessel implementation
        let cases = [
            (0, 0.5, 0.938469807240813),
            (0, 1.0, 0.7651976865579666),
            (0, 7.9, 0.19436184484127808),
            (0, 8.1, 0.14751745404437772),
            (0, 10.0, -0.24593576445134832),
            (0, 31.0, 0.05120814530454226),
            (0, 50.0, 0.0558123276692518),
            (0, 200.0, -0.015437439930565088),
            (1, 1.0, 0.44005058574493355),
            (1, 8.1, 0.24760776698159281),
            (1, 25.0, -0.1253502495802899),
            (1, 50.0, -0.09751182812517514),
            (2, 10.0, 0.2546303136851206),
            (2, 50.0, -0.05971280079425882),
        ];
        for (n, z, want) in cases {
            assert!((j(n, z) - want).abs() < 2e-14, "J_{n}({z}) = {} vs {want}", j(n, z));
        }
    }

    #[test]
    fn half_integer_orders_are_closed_forms() {
        for &z in &[0.3, 2.0, 7.99, 8.0, 13.7, 120.0] {
            assert_relative_eq!(normalized_bessel(-1, z), z.cos(), epsilon = 1e-14);
            assert_relative_eq!(normalized_bessel(1, z), z.sin() / z, epsilon = 1e-14);
            let l2 = 3.0 * (z.sin() - z * z.cos()) / z.powi(3);
            assert_relative_eq!(normalized_bessel(3, z), l2, epsilon = 1e-13);
        }
    }

    #[test]
    fn one_minus_is_accurate_near_zero() {
        let z = 1e-6;
        assert_relative_eq!(one_minus_normalized_bessel(-1, z), z * z / 2.0, max_relative = 1e-9);
        assert_relative_eq!(one_minus_normalized_bessel(0, z), z * z / 4.0, max_relative = 1e-9);
        assert_eq!(normalized_bessel(2, 0.0), 1.0);
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(3), 4.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(sphere_area(4), 2.0 * PI * PI, epsilon = 1e-13);
    }
}
