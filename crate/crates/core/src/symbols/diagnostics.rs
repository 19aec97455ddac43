//! Moment, growth and zero-set diagnostics for exponents.

use serde::{Deserialize, Serialize};

use super::{LevyMeasureSpec, MomentReport, SymbolSpec};
use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::quadrature::AngularRule;
use crate::tolerances::Tolerances;

/// `∫_{|y|≥1} |y|^β ν(dy)`, `+∞` when the dyadic shells stop decaying.
pub fn levy_measure_moment(nu: &LevyMeasureSpec, beta: f64, tol: &Tolerances) -> Result<MomentReport> {
    nu.moment(beta, tol.moment_decay_ratio, tol.moment_fail_run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthVerdict {
    /// Ratios increase along the probe radii.
    Diverges,
    /// Ratios end below where they started.
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HwRow {
    pub radius: f64,
    pub min_re_psi: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HwReport {
    pub rows: Vec<HwRow>,
    pub verdict: GrowthVerdict,
    /// Always true: a finite table cannot decide a limit.
    pub heuristic: bool,
}

/// Table of `min_{|ξ|=R} Re ψ(ξ) / log R` over the probe radii.
pub fn hartman_wintner_diagnostic(spec: &SymbolSpec, radii: &[f64]) -> Result<HwReport> {
    if radii.iter().any(|&r| r < std::f64::consts::E * (1.0 - 1e-12)) {
        return invalid("probe radii must be at least e");
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("probe radii must increase");
    }
    let rule = AngularRule::new(spec.dimension, 1);
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut min = f64::INFINITY;
        for dir in &rule.directions {
            let xi: Vec<f64> = dir.iter().map(|v| v * r).collect();
            min = min.min(spec.eval(&xi)?.re);
        }
        rows.push(HwRow {
            radius: r,
            min_re_psi: min,
            ratio: min / r.ln(),
        });
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let verdict = if ratios.len() >= 2 && ratios.windows(2).all(|w| w[1] > w[0]) {
        GrowthVerdict::Diverges
    } else if ratios.len() >= 2 && ratios[ratios.len() - 1] < ratios[0] {
        GrowthVerdict::Fails
    } else {
        GrowthVerdict::Inconclusive
    };
    Ok(HwReport {
        rows,
        verdict,
        heuristic: true,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroSetReport {
    pub points: Vec<Vec<f64>>,
    pub tolerance: f64,
    pub max_abs_psi: f64,
    /// A zero away from the origin rules out the Liouville property.
    pub non_liouville_warning: bool,
}

/// Lattice frequencies with `|ψ(ξ)| ≤ tol_zero (1 + max |ψ|)`.
pub fn symbol_zero_set(spec: &SymbolSpec, grid: &Grid, tol: &Tolerances) -> Result<ZeroSetReport> {
    if grid.dimension != spec.dimension {
        return invalid("grid and symbol dimensions differ");
    }
    let psi = spec.on_lattice(grid)?;
    let max_abs = psi.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let threshold = tol.zero_relative * (1.0 + max_abs);
    let mut points: Vec<Vec<f64>> = psi
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() <= threshold)
        .map(|(i, _)| grid.frequency(i))
        .collect();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let non_liouville_warning = points.iter().any(|p| p.iter().any(|&v| v != 0.0));
    Ok(ZeroSetReport {
        points,
        tolerance: threshold,
        max_abs_psi: max_abs,
        non_liouville_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{Atom, Family};
    use std::f64::consts::{E, PI};

    #[test]
    fn growth_table_examples() {
        let st = SymbolSpec::stable(1, 1.0).unwrap();
        let rep = hartman_wintner_diagnostic(&st, &[E, E * E, E.powi(4)]).unwrap();
        let want = [E, E * E / 2.0, E.powi(4) / 4.0];
        for (row, w) in rep.rows.iter().zip(want) {
            assert!((row.ratio - w).abs() < 1e-12);
        }
        assert_eq!(rep.verdict, GrowthVerdict::Diverges);
        let cp = SymbolSpec::new(
            Family::CompoundPoisson {
                atoms: vec![Atom { location: vec![1.0], mass: 1.0 }],
            },
            1,
        )
        .unwrap();
        let rep = hartman_wintner_diagnostic(&cp, &[E, E.powi(3), E.powi(9)]).unwrap();
        assert_eq!(rep.verdict, GrowthVerdict::Fails);
        assert!(hartman_wintner_diagnostic(&st, &[1.0]).is_err());
    }

    #[test]
    fn zero_sets() {
        let tol = Tolerances::default();
        let grid = Grid::new(1, 16, 2.0 * PI / 16.0).unwrap();
        let st = SymbolSpec::stable(1, 0.5).unwrap();
        let z = symbol_zero_set(&st, &grid, &tol).unwrap();
        assert_eq!(z.points, vec![vec![0.0]]);
        assert!(!z.non_liouville_warning);
        // jumps on 2πZ: ψ(k) = 1 - e^{2πik} vanishes at integer frequencies
        let cp = SymbolSpec::new(
            Family::CompoundPoisson {
                atoms: vec![Atom { location: vec![2.0 * PI], mass: 1.0 }],
            },
            1,
        )
        .unwrap();
        // the lattice period 2π·4 puts frequencies on Z/4
        let grid = Grid::new(1, 32, 8.0 * PI / 32.0).unwrap();
        let z = symbol_zero_set(&cp, &grid, &tol).unwrap();
        let ks: Vec<f64> = z.points.iter().map(|p| p[0]).collect();
        assert_eq!(ks.len(), 8);
        for k in ks {
            assert!((k - k.round()).abs() < 1e-12);
        }
        assert!(z.non_liouville_warning);
    }
}
