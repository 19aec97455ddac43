//! Every numerical threshold used by the library, in one place.
//!
//! | field | default | used by |
//! |---|---|---|
//! | `psd` | 1e-12 | eigenvalue floor for the diffusion matrix `Q` |
//! | `quadrature` | 1e-9 | absolute remainder target for ν-integrals |
//! | `zero_relative` | 1e-10 | zero-set threshold, scaled by `1 + max |ψ|` |
//! | `moment_decay_ratio` | 0.95 | shell-ratio threshold for finite moments |
//! | `moment_fail_run` | 8 | consecutive non-decaying shells before declaring `+∞` |
//! | `resolution` | 1e-12 | bound on `e^{-t Re ψ}` at the maximal lattice frequency |
//! | `clip_threshold` | 1e-10 | negative density values below `-clip_threshold` are recorded |
//! | `clip_abort` | 1e-6 | maximal tolerated clipped mass |
//! | `mass` | 1e-6 | total mass deviation after tail accounting |
//! | `boundary_band` | 1e-10 | boundary-band decay required before periodizing |
//! | `imag_residue` | 1e-8 | imaginary residue for real input and symmetric ψ |
//! | `fixed_point` | 1e-5 | fixed-point tolerance, scaled by `1 + sup |u|` |
//! | `constancy` | 1e-6 | sup-variation tolerance of `P_1 u` for bounded `u` |
//! | `poly_fit` | 1e-5 | relative least-squares residual for a polynomial verdict |
//! | `difference` | 1e-9 | iterated-difference tolerance, scaled by `2^{k+1}(1 + sup |u|)` |
//! | `decay_slope_band` | 0.1 | slopes within this band of zero are ambiguous |
//! | `hoelder_spread` | 50 | max/median bound on the Hölder constant ratio |
//! | `fd_step` | 1e-5 | finite-difference step for callables without derivatives |
//! | `weak` | 1e-3 | weak-residual threshold for a harmonic verdict |

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub psd: f64,
    pub quadrature: f64,
    pub zero_relative: f64,
    pub moment_decay_ratio: f64,
    pub moment_fail_run: usize,
    pub resolution: f64,
    pub clip_threshold: f64,
    pub clip_abort: f64,
    pub mass: f64,
    pub boundary_band: f64,
    pub imag_residue: f64,
    pub fixed_point: f64,
    pub constancy: f64,
    pub poly_fit: f64,
    pub difference: f64,
    pub decay_slope_band: f64,
    pub hoelder_spread: f64,
    pub fd_step: f64,
    pub weak: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            psd: 1e-12,
            quadrature: 1e-9,
            zero_relative: 1e-10,
            moment_decay_ratio: 0.95,
            moment_fail_run: 8,
            resolution: 1e-12,
            clip_threshold: 1e-10,
            clip_abort: 1e-6,
            mass: 1e-6,
            boundary_band: 1e-10,
            imag_residue: 1e-8,
            fixed_point: 1e-5,
            constancy: 1e-6,
            poly_fit: 1e-5,
            difference: 1e-9,
            decay_slope_band: 0.1,
            hoelder_spread: 50.0,
            fd_step: 1e-5,
            weak: 1e-3,
        }
    }
}
