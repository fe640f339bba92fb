//! Distances between densities, the H¹ Fourier norm, the Beurling
//! certificate and log-linear decay-rate fits.

use num_complex::Complex64;

use crate::error::{KacError, Result};
use crate::grid::GridFn;
use crate::initial_data::normal_pdf;
use crate::quadrature::trapezoid;

/// Default threshold below which a grid function counts as decayed for
/// [`h1_fourier_norm`].
pub const H1_DECAY_TOL: f64 = 1e-6;

/// Negative density values above this magnitude are inversion failures.
pub const NEGATIVE_LOBE_TOL: f64 = 1e-7;

/// Real density samples on the uniform grid of `[-v_max, v_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    v_max: f64,
    values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(v_max: f64, values: Vec<f64>) -> Result<Self> {
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(KacError::param("v_max", format!("must be positive, got {v_max}")));
        }
        if values.len() < 2 {
            return Err(KacError::param("n_v", "need at least two grid points"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KacError::param("values", "non-finite density sample"));
        }
        Ok(Self { v_max, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(v_max: f64, n_points: usize, f: F) -> Result<Self> {
        if n_points < 2 {
            return Err(KacError::param("n_v", "need at least two grid points"));
        }
        let h = 2.0 * v_max / (n_points - 1) as f64;
        let values = (0..n_points).map(|i| f(-v_max + h * i as f64)).collect();
        Self::new(v_max, values)
    }

    /// Centered normal density `g_sigma`.
    pub fn gaussian(sigma: f64, v_max: f64, n_points: usize) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(KacError::param("sigma", format!("must be positive, got {sigma}")));
        }
        Self::from_fn(v_max, n_points, |v| normal_pdf(v, 0.0, sigma))
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn n_points(&self) -> usize {
        self.values.len()
    }

    pub fn step(&self) -> f64 {
        2.0 * self.v_max / (self.values.len() - 1) as f64
    }

    pub fn v(&self, i: usize) -> f64 {
        -self.v_max + self.step() * i as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.step())
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Fails when some value is below `-tol`; otherwise returns a copy with
    /// the small negative values clamped to zero.
    pub fn clamp_negative_lobes(&self, tol: f64) -> Result<DensityGrid> {
        let min = self.min_value();
        if min < -tol {
            return Err(KacError::numerical("negative density lobe", min, -tol));
        }
        Ok(DensityGrid {
            v_max: self.v_max,
            values: self.values.iter().map(|v| v.max(0.0)).collect(),
        })
    }

    fn check_same_grid(&self, other: &DensityGrid) -> Result<()> {
        if self.v_max == other.v_max && self.values.len() == other.values.len() {
            Ok(())
        } else {
            Err(KacError::GridMismatch(format!(
                "density grids ({}, {}) vs ({}, {})",
                self.v_max,
                self.values.len(),
                other.v_max,
                other.values.len()
            )))
        }
    }
}

/// `int |f1 - f2| dv` by the trapezoid rule (twice the total variation).
pub fn l1_distance(f1: &DensityGrid, f2: &DensityGrid) -> Result<f64> {
    f1.check_same_grid(f2)?;
    let diff: Vec<f64> = f1
        .values
        .iter()
        .zip(&f2.values)
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(trapezoid(&diff, f1.step()))
}

/// `(int |D|^2 + int |D'|^2)^{1/2}` over the whole line for a hermitian-even
/// grid function, with `|D(xi_max)| <= 1e-6` required.
pub fn h1_fourier_norm(cf_diff: &GridFn) -> Result<f64> {
    h1_fourier_norm_with(cf_diff, H1_DECAY_TOL)
}

/// [`h1_fourier_norm`] with an explicit decay threshold at `xi_max`.
pub fn h1_fourier_norm_with(cf_diff: &GridFn, decay_tol: f64) -> Result<f64> {
    if !cf_diff.hermitian_even() {
        return Err(KacError::Unsupported(
            "H1 norm over the line needs a hermitian-even grid function".into(),
        ));
    }
    let vals = cf_diff.values();
    let n = vals.len();
    let tail = vals[n - 1].norm();
    if tail > decay_tol {
        return Err(KacError::DomainTruncation {
            value: tail,
            tol: decay_tol,
        });
    }
    let h = cf_diff.step();
    let sq: Vec<f64> = vals.iter().map(|v| v.norm_sqr()).collect();
    // fourth-order central differences, conjugate mirror below zero
    let at = |i: isize| -> Complex64 {
        if i < 0 {
            vals[(-i) as usize].conj()
        } else {
            vals[i as usize]
        }
    };
    let deriv: Vec<f64> = (0..n)
        .map(|k| {
            let i = k as isize;
            let d = if k + 2 < n {
                (at(i - 2) - at(i - 1) * 8.0 + at(i + 1) * 8.0 - at(i + 2)) / (12.0 * h)
            } else {
                (at(i) - at(i - 1)) / h
            };
            d.norm_sqr()
        })
        .collect();
    Ok((2.0 * (trapezoid(&sq, h) + trapezoid(&deriv, h))).sqrt())
}

/// Outcome of the Beurling-inequality check `sqrt(2) ||f1 - f2||_1 <= ||D||_{H1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeurlingCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn beurling_check(f1: &DensityGrid, f2: &DensityGrid, cf_diff: &GridFn) -> Result<BeurlingCheck> {
    beurling_check_with(f1, f2, cf_diff, H1_DECAY_TOL)
}

pub fn beurling_check_with(
    f1: &DensityGrid,
    f2: &DensityGrid,
    cf_diff: &GridFn,
    decay_tol: f64,
) -> Result<BeurlingCheck> {
    let lhs = 2f64.sqrt() * l1_distance(f1, f2)?;
    let rhs = h1_fourier_norm_with(cf_diff, decay_tol)?;
    Ok(BeurlingCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-6,
    })
}

/// Least-squares fit of `ln d = log_intercept - rate * t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    pub log_intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

/// Fits an exponential decay to the points whose distance exceeds `floor`.
pub fn fit_decay_rate(times: &[f64], distances: &[f64], floor: f64) -> Result<RateFit> {
    if times.len() != distances.len() {
        return Err(KacError::param(
            "distances",
            format!("{} times but {} distances", times.len(), distances.len()),
        ));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(distances)
        .filter(|(t, d)| t.is_finite() && d.is_finite() && **d > floor && **d > 0.0)
        .map(|(&t, &d)| (t, d.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(KacError::InsufficientData(format!(
            "{} points above floor {floor:e}, need 3",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if stt == 0.0 {
        return Err(KacError::InsufficientData("all times coincide".into()));
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        rate: -slope,
        log_intercept: intercept,
        r_squared,
        points_used: pts.len(),
    })
}
