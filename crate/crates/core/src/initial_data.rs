//! Initial velocity laws: densities, characteristic functions, exact moment
//! metadata, samplers and the Fourier tail profile `(p, L_p)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::gamma;

use crate::error::{KacError, Result};
use crate::quadrature::{integrate_adaptive, scan_max};

/// Width of the scan window used for numeric tail sups.
pub const TAIL_SCAN_LIMIT: f64 = 1e3;
const TAIL_SCAN_POINTS: usize = 20_000;

/// Family descriptor of an initial law.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Gaussian {
        sigma: f64,
    },
    Uniform {
        halfwidth: f64,
    },
    /// Mixture of normals `N(means[i], sigmas[i]^2)` with the given weights.
    GaussianMixture {
        weights: Vec<f64>,
        sigmas: Vec<f64>,
        means: Vec<f64>,
    },
    /// `beta / (2 |x|^{1+beta})` on `|x| >= 1`.
    PowerLaw {
        beta: f64,
    },
    /// Characteristic function `sum_n a_n (1 + xi^2)^{-1/n}`; no density.
    CfSeries {
        coeffs: Vec<f64>,
    },
    /// Piecewise-linear density through the points `(v[i], f[i])`.
    CustomGrid {
        v: Vec<f64>,
        f: Vec<f64>,
    },
    /// Even part `(f(x) + f(-x)) / 2` of another family.
    Symmetrized(Box<Family>),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian { .. } => "gaussian",
            Family::Uniform { .. } => "uniform",
            Family::GaussianMixture { .. } => "gaussian_mixture",
            Family::PowerLaw { .. } => "power_law",
            Family::CfSeries { .. } => "cf_series",
            Family::CustomGrid { .. } => "custom_grid",
            Family::Symmetrized(_) => "symmetrized",
        }
    }
}

/// Moments of an initial law. Infinite moments are stored as `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub m2: f64,
    pub m3_abs: f64,
    pub m4: f64,
    /// `m4 - 3 m2^2` when `m4` is finite.
    pub kurtosis_excess: Option<f64>,
}

impl MomentSet {
    fn new(m2: f64, m3_abs: f64, m4: f64) -> Self {
        let kurtosis_excess = m4.is_finite().then_some(m4 - 3.0 * m2 * m2);
        Self {
            m2,
            m3_abs,
            m4,
            kurtosis_excess,
        }
    }
}

/// Power-law decay profile of `|phi_0|`: `|xi|^p |phi_0(xi)| <= L_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailProfile {
    pub p: Option<f64>,
    pub l_p: Option<f64>,
    /// `l_p` came from a finite scan and is only a lower bound on the sup.
    pub scanned_lower_bound: bool,
}

/// An immutable initial velocity law.
#[derive(Debug, Clone)]
pub struct InitialDatum {
    family: Family,
    mean: Option<f64>,
    moments: Option<MomentSet>,
    symmetric: bool,
}

impl InitialDatum {
    /// Validates the descriptor and fills in the exact moments.
    pub fn new(family: Family) -> Result<Self> {
        let family = validate(family)?;
        let symmetric = is_symmetric(&family);
        let (mean, moments) = analytic_moments(&family)?;
        Ok(Self {
            family,
            mean,
            moments,
            symmetric,
        })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(Family::Gaussian { sigma })
    }

    pub fn uniform(halfwidth: f64) -> Result<Self> {
        Self::new(Family::Uniform { halfwidth })
    }

    pub fn power_law(beta: f64) -> Result<Self> {
        Self::new(Family::PowerLaw { beta })
    }

    pub fn gaussian_mixture(weights: Vec<f64>, sigmas: Vec<f64>, means: Vec<f64>) -> Result<Self> {
        Self::new(Family::GaussianMixture {
            weights,
            sigmas,
            means,
        })
    }

    pub fn cf_series(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(Family::CfSeries { coeffs })
    }

    pub fn custom_grid(v: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        Self::new(Family::CustomGrid { v, f })
    }

    /// Custom grid density whose declared `(m2, m4)` must match the
    /// trapezoid moments of the samples to `1e-6` relative.
    pub fn custom_grid_declared(v: Vec<f64>, f: Vec<f64>, m2: f64, m4: f64) -> Result<Self> {
        let datum = Self::custom_grid(v, f)?;
        let computed = datum.moments()?;
        for (name, declared, got) in [("m2", m2, computed.m2), ("m4", m4, computed.m4)] {
            let rel = (declared - got).abs() / got.abs().max(f64::MIN_POSITIVE);
            if rel > 1e-6 {
                return Err(KacError::numerical(
                    format!("declared {name} {declared} vs trapezoid {got}, relative mismatch"),
                    rel,
                    1e-6,
                ));
            }
        }
        Ok(datum)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// First moment, when the law has one.
    pub fn mean(&self) -> Option<f64> {
        self.mean
    }

    /// Second moment `sigma^2` (energy), when known.
    pub fn m2(&self) -> Option<f64> {
        self.moments.map(|m| m.m2)
    }

    pub fn sigma(&self) -> Option<f64> {
        self.m2().map(f64::sqrt)
    }

    pub fn has_density(&self) -> bool {
        !matches!(base_family(&self.family), Family::CfSeries { .. })
    }

    /// Exact moments where the family provides them, trapezoid moments for
    /// grid data.
    pub fn moments(&self) -> Result<MomentSet> {
        self.moments.ok_or_else(|| {
            KacError::Unsupported(format!(
                "{} datum carries no moments (characteristic function only)",
                self.family.name()
            ))
        })
    }

    /// Moments by adaptive quadrature of the density (relative tolerance 1e-8).
    pub fn numeric_moments(&self) -> Result<MomentSet> {
        if !self.has_density() {
            return Err(KacError::Unsupported(
                "numeric moments need a density; cf_series has none".into(),
            ));
        }
        let m = |k: i32| -> f64 {
            let f = |x: f64| x.abs().powi(k) * self.density(x).unwrap_or(0.0);
            self.integrate_density_weighted(f)
        };
        let m4 = if matches!(base_family(&self.family), Family::PowerLaw { .. }) {
            f64::INFINITY
        } else {
            m(4)
        };
        Ok(MomentSet::new(m(2), m(3), m4))
    }

    fn integrate_density_weighted<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let quad = |a: f64, b: f64| integrate_adaptive(&f, a, b, 1e-15, 1e-10).0;
        match base_family(&self.family) {
            Family::Gaussian { sigma } => quad(-40.0 * sigma, 0.0) + quad(0.0, 40.0 * sigma),
            Family::Uniform { halfwidth } => quad(-halfwidth, 0.0) + quad(0.0, *halfwidth),
            Family::GaussianMixture { sigmas, means, .. } => {
                let lo = means
                    .iter()
                    .zip(sigmas)
                    .map(|(m, s)| m - 40.0 * s)
                    .fold(f64::INFINITY, f64::min);
                let hi = means
                    .iter()
                    .zip(sigmas)
                    .map(|(m, s)| m + 40.0 * s)
                    .fold(f64::NEG_INFINITY, f64::max);
                let (lo, hi) = (lo.min(-hi), hi.max(-lo));
                let mut knots: Vec<f64> = vec![lo, 0.0, hi];
                knots.extend(means.iter().flat_map(|&m| [m, -m]));
                knots.sort_by(f64::total_cmp);
                knots.dedup();
                knots.windows(2).map(|w| quad(w[0], w[1])).sum()
            }
            Family::PowerLaw { .. } => {
                // map [1, inf) to (0, 1] with x = 1/u
                let g = |u: f64| {
                    if u <= 0.0 {
                        0.0
                    } else {
                        let x = 1.0 / u;
                        (f(x) + f(-x)) / (u * u)
                    }
                };
                integrate_adaptive(g, 0.0, 1.0, 1e-15, 1e-10).0
            }
            Family::CustomGrid { v, .. } => {
                let lo = v[0].min(-v[v.len() - 1]);
                let hi = v[v.len() - 1].max(-v[0]);
                let mut knots: Vec<f64> = v.iter().flat_map(|&x| [x, -x]).collect();
                knots.push(lo);
                knots.push(hi);
                knots.sort_by(f64::total_cmp);
                knots.dedup();
                knots.windows(2).map(|w| quad(w[0], w[1])).sum()
            }
            Family::CfSeries { .. } | Family::Symmetrized(_) => unreachable!(),
        }
    }

    /// Density at `v`, or `None` for characteristic-function-only data.
    pub fn density(&self, v: f64) -> Option<f64> {
        density_of(&self.family, v)
    }

    /// Characteristic function `phi_0(xi) = E exp(i xi X)`.
    pub fn eval_cf(&self, xi: f64) -> Complex64 {
        if xi == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        cf_of(&self.family, xi)
    }

    /// Even part of the law; the returned characteristic function is the real
    /// part of this one and even moments are unchanged.
    pub fn symmetrize(&self) -> InitialDatum {
        if self.symmetric {
            return self.clone();
        }
        let family = Family::Symmetrized(Box::new(self.family.clone()));
        InitialDatum {
            family,
            mean: self.mean.map(|_| 0.0),
            moments: self.moments,
            symmetric: true,
        }
    }

    /// Whether [`InitialDatum::draw`] is available.
    pub fn can_sample(&self) -> bool {
        self.has_density()
    }

    /// One draw from the law. Panics for characteristic-function-only data;
    /// check [`InitialDatum::can_sample`] first.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        draw_from(&self.family, rng)
    }

    /// Decay profile `(p, L_p)` of the characteristic function.
    pub fn tail_profile(&self) -> TailProfile {
        tail_of(self, &self.family)
    }
}

fn base_family(f: &Family) -> &Family {
    match f {
        Family::Symmetrized(inner) => base_family(inner),
        other => other,
    }
}

fn validate(family: Family) -> Result<Family> {
    let positive = |field: &'static str, x: f64| -> Result<()> {
        if x.is_finite() && x > 0.0 {
            Ok(())
        } else {
            Err(KacError::param(field, format!("must be positive and finite, got {x}")))
        }
    };
    match family {
        Family::Gaussian { sigma } => {
            positive("sigma", sigma)?;
            Ok(Family::Gaussian { sigma })
        }
        Family::Uniform { halfwidth } => {
            positive("halfwidth", halfwidth)?;
            Ok(Family::Uniform { halfwidth })
        }
        Family::GaussianMixture {
            weights,
            sigmas,
            mut means,
        } => {
            if weights.is_empty() {
                return Err(KacError::param("weights", "mixture needs at least one component"));
            }
            if sigmas.len() != weights.len() {
                return Err(KacError::param(
                    "sigmas",
                    format!("expected {} entries, got {}", weights.len(), sigmas.len()),
                ));
            }
            if means.is_empty() {
                means = vec![0.0; weights.len()];
            } else if means.len() != weights.len() {
                return Err(KacError::param(
                    "means",
                    format!("expected {} entries, got {}", weights.len(), means.len()),
                ));
            }
            for &w in &weights {
                positive("weights", w)?;
            }
            for &s in &sigmas {
                positive("sigmas", s)?;
            }
            if means.iter().any(|m| !m.is_finite()) {
                return Err(KacError::param("means", "must be finite"));
            }
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(KacError::param("weights", format!("must sum to 1, got {total}")));
            }
            let weights = weights.iter().map(|w| w / total).collect();
            Ok(Family::GaussianMixture {
                weights,
                sigmas,
                means,
            })
        }
        Family::PowerLaw { beta } => {
            if !(beta > 3.0 && beta < 4.0) {
                return Err(KacError::param("beta", format!("beta must lie in (3,4), got {beta}")));
            }
            Ok(Family::PowerLaw { beta })
        }
        Family::CfSeries { coeffs } => {
            if coeffs.is_empty() {
                return Err(KacError::param("coeffs", "need at least one coefficient"));
            }
            for &a in &coeffs {
                positive("coeffs", a)?;
            }
            let total: f64 = coeffs.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(KacError::param("coeffs", format!("must sum to 1, got {total}")));
            }
            let coeffs = coeffs.iter().map(|a| a / total).collect();
            Ok(Family::CfSeries { coeffs })
        }
        Family::CustomGrid { v, f } => {
            if v.len() < 2 || v.len() != f.len() {
                return Err(KacError::param(
                    "grid_path",
                    format!("need >= 2 matching (v, f) pairs, got {} and {}", v.len(), f.len()),
                ));
            }
            if v.iter().chain(&f).any(|x| !x.is_finite()) {
                return Err(KacError::param("grid_path", "non-finite sample"));
            }
            if v.windows(2).any(|w| w[1] <= w[0]) {
                return Err(KacError::param("grid_path", "abscissae must be strictly increasing"));
            }
            if f.iter().any(|&x| x < 0.0) {
                return Err(KacError::param("grid_path", "density samples must be non-negative"));
            }
            let mass = trapezoid_moment(&v, &f, 0);
            if (mass - 1.0).abs() > 1e-6 {
                return Err(KacError::param(
                    "grid_path",
                    format!("density must integrate to 1 (trapezoid), got {mass}"),
                ));
            }
            Ok(Family::CustomGrid { v, f })
        }
        Family::Symmetrized(inner) => Ok(Family::Symmetrized(Box::new(validate(*inner)?))),
    }
}

fn is_symmetric(f: &Family) -> bool {
    match f {
        Family::Gaussian { .. }
        | Family::Uniform { .. }
        | Family::PowerLaw { .. }
        | Family::CfSeries { .. }
        | Family::Symmetrized(_) => true,
        Family::GaussianMixture { means, .. } => means.iter().all(|&m| m == 0.0),
        Family::CustomGrid { v, f } => {
            let n = v.len();
            let scale = v[n - 1].abs().max(v[0].abs());
            let fmax = f.iter().fold(0.0f64, |a, &b| a.max(b));
            (0..n).all(|i| {
                (v[i] + v[n - 1 - i]).abs() <= 1e-12 * scale
                    && (f[i] - f[n - 1 - i]).abs() <= 1e-12 * fmax
            })
        }
    }
}

fn trapezoid_moment(v: &[f64], f: &[f64], k: i32) -> f64 {
    v.windows(2)
        .zip(f.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (x[0].abs().powi(k) * y[0] + x[1].abs().powi(k) * y[1]))
        .sum()
}

fn signed_trapezoid_first(v: &[f64], f: &[f64]) -> f64 {
    v.windows(2)
        .zip(f.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (x[0] * y[0] + x[1] * y[1]))
        .sum()
}

fn analytic_moments(f: &Family) -> Result<(Option<f64>, Option<MomentSet>)> {
    Ok(match f {
        Family::Gaussian { sigma } => {
            let s2 = sigma * sigma;
            let m3 = 2.0 * (2.0 / PI).sqrt() * sigma.powi(3);
            (Some(0.0), Some(MomentSet::new(s2, m3, 3.0 * s2 * s2)))
        }
        Family::Uniform { halfwidth: a } => (
            Some(0.0),
            Some(MomentSet::new(a * a / 3.0, a.powi(3) / 4.0, a.powi(4) / 5.0)),
        ),
        Family::GaussianMixture {
            weights,
            sigmas,
            means,
        } => {
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            let mut m3 = 0.0;
            let mut m4 = 0.0;
            for ((&w, &s), &mu) in weights.iter().zip(sigmas).zip(means) {
                m1 += w * mu;
                m2 += w * (mu * mu + s * s);
                m3 += w * normal_abs_third_moment(mu, s);
                m4 += w * (mu.powi(4) + 6.0 * mu * mu * s * s + 3.0 * s.powi(4));
            }
            (Some(m1), Some(MomentSet::new(m2, m3, m4)))
        }
        Family::PowerLaw { beta } => (
            Some(0.0),
            Some(MomentSet::new(beta / (beta - 2.0), beta / (beta - 3.0), f64::INFINITY)),
        ),
        Family::CfSeries { .. } => (None, None),
        Family::CustomGrid { v, f } => (
            Some(signed_trapezoid_first(v, f)),
            Some(MomentSet::new(
                trapezoid_moment(v, f, 2),
                trapezoid_moment(v, f, 3),
                trapezoid_moment(v, f, 4),
            )),
        ),
        Family::Symmetrized(inner) => {
            let (mean, m) = analytic_moments(inner)?;
            (mean.map(|_| 0.0), m)
        }
    })
}

/// `E|mu + s Z|^3` for standard normal `Z`, by quadrature.
fn normal_abs_third_moment(mu: f64, s: f64) -> f64 {
    let f = |z: f64| (mu + s * z).abs().powi(3) * (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let zero = -mu / s;
    let mut knots = vec![-40.0, 40.0];
    if zero.abs() < 40.0 {
        knots.insert(1, zero);
    }
    knots
        .windows(2)
        .map(|w| integrate_adaptive(f, w[0], w[1], 1e-15, 1e-13).0)
        .sum()
}

fn density_of(f: &Family, v: f64) -> Option<f64> {
    Some(match f {
        Family::Gaussian { sigma } => normal_pdf(v, 0.0, *sigma),
        Family::Uniform { halfwidth } => {
            if v.abs() <= *halfwidth {
                0.5 / halfwidth
            } else {
                0.0
            }
        }
        Family::GaussianMixture {
            weights,
            sigmas,
            means,
        } => weights
            .iter()
            .zip(sigmas)
            .zip(means)
            .map(|((w, s), m)| w * normal_pdf(v, *m, *s))
            .sum(),
        Family::PowerLaw { beta } => {
            if v.abs() >= 1.0 {
                0.5 * beta / v.abs().powf(1.0 + beta)
            } else {
                0.0
            }
        }
        Family::CfSeries { .. } => return None,
        Family::CustomGrid { v: xs, f: fs } => linear_interp(xs, fs, v),
        Family::Symmetrized(inner) => 0.5 * (density_of(inner, v)? + density_of(inner, -v)?),
    })
}

pub(crate) fn normal_pdf(v: f64, mean: f64, sigma: f64) -> f64 {
    let z = (v - mean) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

fn linear_interp(xs: &[f64], fs: &[f64], v: f64) -> f64 {
    if v < xs[0] || v > xs[xs.len() - 1] {
        return 0.0;
    }
    let i = xs.partition_point(|&x| x <= v).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = (v - x0) / (x1 - x0);
    fs[i - 1] + t * (fs[i] - fs[i - 1])
}

fn cf_of(f: &Family, xi: f64) -> Complex64 {
    match f {
        Family::Gaussian { sigma } => Complex64::new((-0.5 * sigma * sigma * xi * xi).exp(), 0.0),
        Family::Uniform { halfwidth } => Complex64::new(sinc(halfwidth * xi), 0.0),
        Family::GaussianMixture {
            weights,
            sigmas,
            means,
        } => weights
            .iter()
            .zip(sigmas)
            .zip(means)
            .map(|((w, s), m)| {
                Complex64::from_polar(w * (-0.5 * s * s * xi * xi).exp(), m * xi)
            })
            .sum(),
        Family::PowerLaw { beta } => Complex64::new(power_law_cf(*beta, xi), 0.0),
        Family::CfSeries { coeffs } => {
            let base = 1.0 / (1.0 + xi * xi);
            let re = coeffs
                .iter()
                .enumerate()
                .map(|(n, a)| a * base.powf(1.0 / (n as f64 + 1.0)))
                .sum();
            Complex64::new(re, 0.0)
        }
        Family::CustomGrid { v, f } => piecewise_linear_cf(v, f, xi),
        Family::Symmetrized(inner) => Complex64::new(cf_of(inner, xi).re, 0.0),
    }
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Exact characteristic function of the piecewise-linear interpolant.
fn piecewise_linear_cf(v: &[f64], f: &[f64], xi: f64) -> Complex64 {
    let s = Complex64::new(0.0, xi);
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in v.windows(2).zip(f.windows(2)) {
        let h = x[1] - x[0];
        let sh = s * h;
        let (e1, e2) = if sh.norm() < 0.5 {
            // series: e1 = h sum (sh)^k/(k+1)!, e2 = h^2 sum (sh)^k/(k! (k+2))
            let mut e1 = Complex64::new(0.0, 0.0);
            let mut e2 = Complex64::new(0.0, 0.0);
            let mut pow = Complex64::new(1.0, 0.0);
            let mut fact = 1.0;
            for k in 0..24 {
                let kf = k as f64;
                e1 += pow / (fact * (kf + 1.0));
                e2 += pow / (fact * (kf + 2.0));
                pow *= sh;
                fact *= kf + 1.0;
            }
            (e1 * h, e2 * h * h)
        } else {
            let esh = sh.exp();
            let e1 = (esh - 1.0) / s;
            let e2 = esh * h / s - (esh - 1.0) / (s * s);
            (e1, e2)
        };
        let slope = (y[1] - y[0]) / h;
        acc += (s * x[0]).exp() * (e1 * y[0] + e2 * slope);
    }
    acc
}

/// Power-law characteristic function, small-|xi| expansion.
///
/// `1 - beta xi^2 / (2(beta-2)) - Gamma(1-beta) cos(beta pi/2) |xi|^beta
///  - beta sum_{m>=2} (-1)^m xi^{2m} / ((2m)! (2m - beta))`.
pub fn power_law_cf_series(beta: f64, xi: f64) -> f64 {
    let x = xi.abs();
    let x2 = x * x;
    let mut acc = 1.0 - beta / (2.0 * (beta - 2.0)) * x2
        - gamma(1.0 - beta) * (beta * PI / 2.0).cos() * x.powf(beta);
    // xi^{2m} / (2m)!, starting at m = 2
    let mut pow_over_fact = x2 * x2 / 24.0;
    let mut m = 2u32;
    loop {
        let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        let term = beta * sign * pow_over_fact / (2.0 * m as f64 - beta);
        acc -= term;
        if term.abs() < 1e-16 || m > 200 {
            break;
        }
        let k = 2.0 * m as f64;
        pow_over_fact *= x2 / ((k + 1.0) * (k + 2.0));
        m += 1;
    }
    acc
}

/// Power-law characteristic function by oscillatory quadrature of
/// `beta * int_1^inf cos(xi x) x^{-1-beta} dx`.
pub fn power_law_cf_quadrature(beta: f64, xi: f64) -> f64 {
    let x = xi.abs();
    if x == 0.0 {
        return 1.0;
    }
    // substitute u = x * t: beta x^beta int_x^inf cos(u) u^{-1-beta} du
    let s = 1.0 + beta;
    let upper = (x + 40.0 * PI).max(80.0 * PI);
    // integrate in quarter-period chunks so each piece is non-oscillatory
    let chunk = 0.5 * PI;
    let mut a = x;
    let mut head = 0.0;
    while a < upper {
        let b = (a + chunk).min(upper);
        head += integrate_adaptive(|u| u.cos() * u.powf(-s), a, b, 1e-18, 1e-14).0;
        a = b;
    }
    // int_U^inf e^{iu} u^{-s} du = i e^{iU} U^{-s} sum_k (-i)^k (s)_k U^{-k}
    let mut sum = Complex64::new(0.0, 0.0);
    let mut coef = Complex64::new(1.0, 0.0);
    for k in 0..30 {
        sum += coef;
        coef *= Complex64::new(0.0, -1.0) * (s + k as f64) / upper;
        if coef.norm() < 1e-20 {
            break;
        }
    }
    let tail = Complex64::new(0.0, 1.0) * Complex64::from_polar(upper.powf(-s), upper) * sum;
    beta * x.powf(beta) * (head + tail.re)
}

/// Series for `|xi| <= 1`, quadrature beyond.
pub fn power_law_cf(beta: f64, xi: f64) -> f64 {
    if xi.abs() <= 1.0 {
        power_law_cf_series(beta, xi)
    } else {
        power_law_cf_quadrature(beta, xi)
    }
}

fn draw_from<R: Rng + ?Sized>(f: &Family, rng: &mut R) -> f64 {
    match f {
        Family::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
        Family::Uniform { halfwidth } => halfwidth * (2.0 * rng.random::<f64>() - 1.0),
        Family::GaussianMixture {
            weights,
            sigmas,
            means,
        } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut idx = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    idx = i;
                    break;
                }
            }
            means[idx] + sigmas[idx] * rng.sample::<f64, _>(StandardNormal)
        }
        Family::PowerLaw { beta } => {
            // P(|X| > r) = r^{-beta}
            let u: f64 = 1.0 - rng.random::<f64>();
            let r = u.powf(-1.0 / beta);
            if rng.random::<bool>() {
                r
            } else {
                -r
            }
        }
        Family::CfSeries { .. } => panic!("cf_series datum has no sampler"),
        Family::CustomGrid { v, f } => draw_piecewise_linear(v, f, rng),
        Family::Symmetrized(inner) => {
            let x = draw_from(inner, rng);
            if rng.random::<bool>() {
                x
            } else {
                -x
            }
        }
    }
}

fn draw_piecewise_linear<R: Rng + ?Sized>(v: &[f64], f: &[f64], rng: &mut R) -> f64 {
    let masses: Vec<f64> = v
        .windows(2)
        .zip(f.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .collect();
    let total: f64 = masses.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut seg = masses.len() - 1;
    for (i, m) in masses.iter().enumerate() {
        if u < *m {
            seg = i;
            break;
        }
        u -= m;
    }
    let (x0, h) = (v[seg], v[seg + 1] - v[seg]);
    let (f0, f1) = (f[seg], f[seg + 1]);
    // solve f0 s + (f1 - f0) s^2 / (2h) = u for s in [0, h]
    let a = 0.5 * (f1 - f0) / h;
    let s = if a.abs() < 1e-14 * f0.max(f1).max(1e-300) {
        u / f0.max(1e-300)
    } else {
        let disc = (f0 * f0 + 4.0 * a * u).max(0.0);
        2.0 * u / (f0 + disc.sqrt())
    };
    x0 + s.clamp(0.0, h)
}

fn tail_of(datum: &InitialDatum, f: &Family) -> TailProfile {
    let exact = |p: f64, l: f64| TailProfile {
        p: Some(p),
        l_p: Some(l),
        scanned_lower_bound: false,
    };
    let scanned = |p: f64| {
        let (_, l) = scan_max(
            |x| x.powf(p) * datum.eval_cf(x).norm(),
            0.0,
            TAIL_SCAN_LIMIT,
            TAIL_SCAN_POINTS,
        );
        TailProfile {
            p: Some(p),
            l_p: Some(l),
            scanned_lower_bound: true,
        }
    };
    match f {
        // max_{x>=0} x^k e^{-a x^2} = (k / (2 e a))^{k/2} with k = 4, a = sigma^2/2
        Family::Gaussian { sigma } => exact(4.0, (4.0 / (std::f64::consts::E * sigma * sigma)).powi(2)),
        Family::Uniform { halfwidth } => exact(1.0, 1.0 / halfwidth),
        Family::GaussianMixture { .. } => scanned(4.0),
        Family::PowerLaw { .. } | Family::CustomGrid { .. } => scanned(1.0),
        Family::CfSeries { .. } => TailProfile {
            p: None,
            l_p: None,
            scanned_lower_bound: false,
        },
        // |Re phi| <= |phi|, so the inner profile still bounds the even part
        Family::Symmetrized(inner) => tail_of(datum, inner),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn grid(n: usize, lo: f64, hi: f64) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
    }

    fn builtins() -> Vec<InitialDatum> {
        vec![
            InitialDatum::gaussian(1.3).unwrap(),
            InitialDatum::uniform(3f64.sqrt()).unwrap(),
            InitialDatum::gaussian_mixture(vec![0.3, 0.7], vec![0.5, 1.5], vec![]).unwrap(),
            InitialDatum::gaussian_mixture(vec![0.4, 0.6], vec![0.5, 0.8], vec![1.0, -0.2]).unwrap(),
            InitialDatum::power_law(3.5).unwrap(),
            InitialDatum::cf_series(vec![0.5, 0.3, 0.2]).unwrap(),
        ]
    }

    #[test]
    fn gaussian_moments() {
        let d = InitialDatum::gaussian(1.0).unwrap();
        let m = d.moments().unwrap();
        assert_eq!(m.m2, 1.0);
        assert_eq!(m.m4, 3.0);
        assert!(d.is_symmetric());
        let m = InitialDatum::gaussian(2.0).unwrap().moments().unwrap();
        assert_eq!((m.m2, m.m4), (4.0, 48.0));
    }

    #[test]
    fn power_law_moments() {
        let m = InitialDatum::power_law(3.5).unwrap().moments().unwrap();
        assert!((m.m2 - 7.0 / 3.0).abs() < 1e-15);
        assert!(m.m4.is_infinite());
        assert!((m.m3_abs - 7.0).abs() < 1e-14);
        assert_eq!(m.kurtosis_excess, None);
    }

    #[test]
    fn power_law_third_moment_by_quadrature() {
        let d = InitialDatum::power_law(3.5).unwrap();
        let m = d.numeric_moments().unwrap();
        assert!((m.m3_abs - 7.0).abs() / 7.0 < 1e-8, "{}", m.m3_abs);
        assert!((m.m2 - 7.0 / 3.0).abs() / 2.3 < 1e-8);
    }

    #[test]
    fn uniform_moments() {
        let a = 3f64.sqrt();
        let m = InitialDatum::uniform(a).unwrap().moments().unwrap();
        // int_{-a}^{a} v^k / (2a) dv = a^k / (k+1)
        assert!((m.m2 - 1.0).abs() < 1e-15);
        assert!((m.m4 - 9.0 / 5.0).abs() < 1e-14);
        assert!((m.kurtosis_excess.unwrap() + 1.2).abs() < 1e-14);
        assert!((m.m3_abs - a.powi(3) / 4.0).abs() < 1e-15);
        assert!((m.m3_abs - 1.299_038_105_676_658).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters_name_the_field() {
        let cases = [
            (Family::Gaussian { sigma: 0.0 }, "sigma"),
            (Family::Uniform { halfwidth: -1.0 }, "halfwidth"),
            (Family::PowerLaw { beta: 5.0 }, "beta"),
            (Family::PowerLaw { beta: 3.0 }, "beta"),
            (
                Family::GaussianMixture {
                    weights: vec![0.5, 0.6],
                    sigmas: vec![1.0, 1.0],
                    means: vec![],
                },
                "weights",
            ),
            (
                Family::GaussianMixture {
                    weights: vec![0.5, 0.5],
                    sigmas: vec![1.0],
                    means: vec![],
                },
                "sigmas",
            ),
            (Family::CfSeries { coeffs: vec![0.5, -0.5, 1.0] }, "coeffs"),
        ];
        for (family, field) in cases {
            match InitialDatum::new(family) {
                Err(KacError::Parameter { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected parameter error for {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn cf_normalized_and_bounded() {
        for d in builtins() {
            assert_eq!(d.eval_cf(0.0), Complex64::new(1.0, 0.0));
            for xi in grid(1000, -50.0, 50.0) {
                let c = d.eval_cf(xi);
                assert!(c.norm() <= 1.0 + 1e-12, "{} at {xi}: {c}", d.family().name());
                if d.is_symmetric() {
                    assert!(c.im.abs() <= 1e-12);
                    assert!((c - d.eval_cf(-xi)).norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn gaussian_cf_value() {
        let d = InitialDatum::gaussian(1.0).unwrap();
        assert!((d.eval_cf(1.0).re - (-0.5f64).exp()).abs() < 1e-15);
        assert!((d.eval_cf(1.0).re - 0.606_531).abs() < 1e-6);
    }

    #[test]
    fn power_law_cf_at_small_xi() {
        // mpmath quadosc of 3.5 * int_1^inf cos(0.1 x) x^-4.5 dx
        let d = InitialDatum::power_law(3.5).unwrap();
        assert!((d.eval_cf(0.1).re - 0.988_515_546_066_790_5).abs() < 1e-6);
        assert!((d.eval_cf(0.1).re - 0.988_515_546_066_790_5).abs() < 1e-13);
        assert!((d.eval_cf(2.0).re + 0.651_208_909_082_631_4).abs() < 1e-10);
        assert!((d.eval_cf(5.0).re - 0.482_085_244_066_930_9).abs() < 1e-10);
    }

    #[test]
    fn power_law_regimes_agree_on_overlap() {
        for beta in [3.1, 3.5, 3.9] {
            for xi in grid(20, 0.5, 1.0) {
                let s = power_law_cf_series(beta, xi);
                let q = power_law_cf_quadrature(beta, xi);
                assert!((s - q).abs() < 1e-8, "beta {beta} xi {xi}: {s} vs {q}");
            }
        }
    }

    #[test]
    fn second_derivative_at_zero_is_minus_m2() {
        let h = 1e-3;
        for d in [
            InitialDatum::gaussian(0.7).unwrap(),
            InitialDatum::uniform(3f64.sqrt()).unwrap(),
            InitialDatum::gaussian_mixture(vec![0.25, 0.75], vec![0.4, 1.2], vec![]).unwrap(),
        ] {
            let d2 = (d.eval_cf(h).re - 2.0 + d.eval_cf(-h).re) / (h * h);
            let m2 = d.m2().unwrap();
            assert!((-d2 - m2).abs() / m2 < 1e-4, "{}: {} vs {m2}", d.family().name(), -d2);
        }
    }

    #[test]
    fn declared_moments_match_quadrature() {
        for d in builtins().into_iter().filter(|d| d.has_density()) {
            let a = d.moments().unwrap();
            let q = d.numeric_moments().unwrap();
            assert!((a.m2 - q.m2).abs() / a.m2 < 1e-6, "{}", d.family().name());
            assert!((a.m3_abs - q.m3_abs).abs() / a.m3_abs < 1e-6, "{}", d.family().name());
            if a.m4.is_finite() {
                assert!((a.m4 - q.m4).abs() / a.m4 < 1e-6, "{}", d.family().name());
            }
        }
    }

    #[test]
    fn cf_series_has_no_moments_or_sampler() {
        let d = InitialDatum::cf_series(vec![0.6, 0.4]).unwrap();
        assert!(matches!(d.moments(), Err(KacError::Unsupported(_))));
        assert!(matches!(d.numeric_moments(), Err(KacError::Unsupported(_))));
        assert!(!d.can_sample());
        assert!(d.density(0.3).is_none());
        let tail = d.tail_profile();
        assert_eq!((tail.p, tail.l_p), (None, None));
    }

    #[test]
    fn symmetrize_takes_real_part() {
        let d = InitialDatum::gaussian_mixture(vec![0.4, 0.6], vec![0.5, 0.8], vec![1.0, -0.2])
            .unwrap();
        assert!(!d.is_symmetric());
        let s = d.symmetrize();
        assert!(s.is_symmetric());
        for xi in [0.5, 1.0, 2.0] {
            assert!((s.eval_cf(xi).re - d.eval_cf(xi).re).abs() < 1e-15);
            assert_eq!(s.eval_cf(xi).im, 0.0);
        }
        assert!((s.m2().unwrap() - d.m2().unwrap()).abs() <= 1e-12);
        assert_eq!(s.mean(), Some(0.0));
        for v in [-1.3, 0.2, 0.9] {
            let expect = 0.5 * (d.density(v).unwrap() + d.density(-v).unwrap());
            assert!((s.density(v).unwrap() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetrize_is_identity_on_even_data() {
        let d = InitialDatum::uniform(2.0).unwrap();
        let s = d.symmetrize();
        for xi in grid(101, 0.0, 20.0) {
            assert_eq!(s.eval_cf(xi), d.eval_cf(xi));
        }
    }

    #[test]
    fn tail_profiles() {
        let t = InitialDatum::uniform(3f64.sqrt()).unwrap().tail_profile();
        assert_eq!(t.p, Some(1.0));
        assert!((t.l_p.unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let d = InitialDatum::uniform(3f64.sqrt()).unwrap();
        let l = t.l_p.unwrap();
        for xi in grid(5000, 0.0, 1000.0) {
            assert!(xi * d.eval_cf(xi).norm() <= l + 1e-9);
        }
        let sigma: f64 = 1.5;
        let g = InitialDatum::gaussian(sigma).unwrap().tail_profile();
        let (_, scanned) = scan_max(|x| x.powi(4) * (-0.5 * sigma * sigma * x * x).exp(), 0.0, 20.0, 4000);
        assert!((g.l_p.unwrap() - scanned).abs() < 1e-10);
    }

    #[test]
    fn custom_grid_matches_uniform() {
        let a = 1.0;
        let n = 4001;
        let v: Vec<f64> = grid(n, -a, a).collect();
        let f = vec![0.5 / a; n];
        let d = InitialDatum::custom_grid(v.clone(), f.clone()).unwrap();
        let u = InitialDatum::uniform(a).unwrap();
        for xi in [0.3, 1.0, 7.0, 40.0] {
            assert!((d.eval_cf(xi) - u.eval_cf(xi)).norm() < 1e-12, "{xi}");
        }
        assert!(d.is_symmetric());
        let m = d.moments().unwrap();
        assert!((m.m2 - 1.0 / 3.0).abs() < 1e-6);
        assert!(InitialDatum::custom_grid_declared(v.clone(), f.clone(), 1.0 / 3.0, 0.2).is_ok());
        assert!(matches!(
            InitialDatum::custom_grid_declared(v, f, 0.34, 0.2),
            Err(KacError::Numerical { .. })
        ));
    }

    #[test]
    fn samplers_match_second_moment() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        for d in builtins().into_iter().filter(|d| d.can_sample()) {
            let n = 200_000;
            let m = d.moments().unwrap();
            let xs: Vec<f64> = (0..n).map(|_| d.draw(&mut rng)).collect();
            let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
            let tol = if m.m4.is_finite() {
                5.0 * ((m.m4 - m.m2 * m.m2) / n as f64).sqrt()
            } else {
                0.05 * m.m2
            };
            assert!((m2 - m.m2).abs() < tol, "{}: {m2} vs {}", d.family().name(), m.m2);
        }
    }
}
