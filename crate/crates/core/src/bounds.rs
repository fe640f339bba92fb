//! Explicit constants and inequalities: angular moments `alpha_m`, the
//! Gamma envelope of `|phi_0|`, the exponential bound for characteristic
//! functions with a fourth-power tail, Berry–Esseen constants for weighted
//! sums, the relaxation constant `C` and the heavy-tail rate.

use std::f64::consts::{E, PI, SQRT_2};

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{KacError, Result};
use crate::initial_data::{sinc, InitialDatum};
use crate::quadrature::{integrate_adaptive, scan_max, trapezoid};

/// `(1/2pi) int_0^{2pi} |sin th|^m dth` by adaptive quadrature.
pub fn alpha_m(m: f64) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(KacError::param("m", format!("must be positive, got {m}")));
    }
    let (v, _) = integrate_adaptive(|th| th.sin().powf(m), 0.0, 0.5 * PI, 1e-300, 1e-13);
    Ok(v * 2.0 / PI)
}

/// `Gamma((m+1)/2) / (sqrt(pi) Gamma(m/2 + 1))`.
pub fn alpha_m_closed(m: f64) -> f64 {
    (ln_gamma(0.5 * (m + 1.0)) - ln_gamma(0.5 * m + 1.0)).exp() / PI.sqrt()
}

/// `1 - 2 alpha_beta`, the decay rate of `E sum |pi_j|^beta`.
pub fn lower_bound_rate(beta: f64) -> Result<f64> {
    if !(beta > 3.0 && beta < 4.0) {
        return Err(KacError::param("beta", format!("beta must lie in (3,4), got {beta}")));
    }
    Ok(1.0 - 2.0 * alpha_m(beta)?)
}

/// `exp{-3 pi^2 / (64 (3 + L)^2) * (xi / (2 sqrt2 zeta |xi| + pi))^2}`.
pub fn exp_decay_bound(zeta: f64, l: f64, xi: f64) -> Result<f64> {
    if !(zeta > 0.0) {
        return Err(KacError::param("zeta", format!("must be positive, got {zeta}")));
    }
    if !(l >= 0.0) {
        return Err(KacError::param("L", format!("must be non-negative, got {l}")));
    }
    let c = 3.0 * PI * PI / (64.0 * (3.0 + l).powi(2));
    let r = xi / (2.0 * SQRT_2 * zeta * xi.abs() + PI);
    Ok((-c * r * r).exp())
}

/// Constants of the weighted-sum Berry–Esseen bounds at a given `Gamma_n^4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerryEsseen {
    pub gamma_n4: f64,
    /// Bound on the L² distance of characteristic functions over `|xi| <= A`.
    pub l2_cf: f64,
    /// Same for the derivatives.
    pub l2_deriv: f64,
    pub c1: f64,
    pub c2: f64,
}

impl BerryEsseen {
    /// `c1 Gamma_n^4 xi^4 e^{-xi^2/2}`.
    pub fn pointwise_cf(&self, xi: f64) -> f64 {
        self.c1 * self.gamma_n4 * xi.powi(4) * (-0.5 * xi * xi).exp()
    }

    /// `c2 Gamma_n^4 (1 + xi^2) |xi|^3 e^{-xi^2/2}`.
    pub fn pointwise_deriv(&self, xi: f64) -> f64 {
        self.c2 * self.gamma_n4 * (1.0 + xi * xi) * xi.abs().powi(3) * (-0.5 * xi * xi).exp()
    }
}

pub fn berry_esseen_bounds(gamma_n4: f64) -> Result<BerryEsseen> {
    if !(gamma_n4 >= 0.0 && gamma_n4.is_finite()) {
        return Err(KacError::param("gamma_n4", format!("must be non-negative, got {gamma_n4}")));
    }
    let s = gamma(3.5).sqrt();
    Ok(BerryEsseen {
        gamma_n4,
        l2_cf: 0.62 * s * gamma_n4,
        l2_deriv: 3.8 * s * gamma_n4,
        c1: 0.33,
        c2: 0.76,
    })
}

/// `Gamma_n^4 = (m4 / m2^2) sum c_j^4` for weights with `sum c_j^2 = 1`.
pub fn gamma_n4(m2: f64, m4: f64, coeffs: &[f64]) -> f64 {
    m4 / (m2 * m2) * coeffs.iter().map(|c| c.powi(4)).sum::<f64>()
}

/// Dominating envelope `(lambda^2 / (lambda^2 + xi^2))^alpha` of `|phi_0|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEnvelope {
    pub lambda: f64,
    pub alpha: f64,
    pub k: u32,
    /// `sup xi^4 |phi_0|^{2k}`.
    pub l: f64,
    /// Sup of `|phi_0|^{2k}` on the intermediate interval, with safety margin.
    pub m: f64,
    /// Endpoints of the intermediate interval.
    pub interval: (f64, f64),
    /// Worst ratio `|phi_0| / envelope` seen by the audit.
    pub audit_worst_ratio: f64,
    /// The decay `L_p xi^{-p}` stays below the envelope beyond the audit window.
    pub tail_covered: bool,
}

impl GammaEnvelope {
    pub fn eval(&self, xi: f64) -> f64 {
        let l2 = self.lambda * self.lambda;
        (l2 / (l2 + xi * xi)).powf(self.alpha)
    }
}

/// Audit window and resolution for envelope domination.
pub const ENVELOPE_AUDIT_MAX: f64 = 1e3;
pub const ENVELOPE_AUDIT_POINTS: usize = 10_000;

/// Builds the envelope from the datum's moments and tail profile and
/// checks it against `|phi_0|` on `[0, 1e3]`.
pub fn gamma_envelope(datum: &InitialDatum) -> Result<GammaEnvelope> {
    if !datum.is_symmetric() {
        return Err(KacError::Unsupported(
            "Gamma envelope needs symmetric data; symmetrize first".into(),
        ));
    }
    let mom = datum.moments()?;
    if !mom.m3_abs.is_finite() {
        return Err(KacError::Unsupported("infinite third absolute moment".into()));
    }
    let tail = datum.tail_profile();
    let (p, l_p) = match (tail.p, tail.l_p) {
        (Some(p), Some(l)) => (p, l),
        _ => {
            return Err(KacError::Unsupported(
                "datum has no power-law tail profile".into(),
            ))
        }
    };
    let first = build_envelope(datum, mom.m2, mom.m3_abs, p, l_p, 1)?;
    if first.audit_worst_ratio <= 1.0 {
        return Ok(first);
    }
    let refined = build_envelope(datum, mom.m2, mom.m3_abs, p, l_p, 10)?;
    if refined.audit_worst_ratio <= 1.0 {
        return Ok(refined);
    }
    Err(KacError::numerical(
        "envelope audit: max |phi_0| / envelope",
        refined.audit_worst_ratio,
        1.0,
    ))
}

fn build_envelope(
    datum: &InitialDatum,
    m2: f64,
    m3: f64,
    p: f64,
    l_p: f64,
    refine: usize,
) -> Result<GammaEnvelope> {
    let k = (2.0 / p).ceil().max(1.0) as u32;
    let two_k = 2 * k as i32;
    let psi0 = |xi: f64| datum.eval_cf(xi).norm().powi(two_k);
    // xi^4 psi0 <= L_p^{2k} xi^{4 - 2kp}, non-increasing since kp >= 2
    let x_hi = ENVELOPE_AUDIT_MAX.max(l_p.powf(1.0 / p) * 2.0);
    let (_, scanned_l) = scan_max(|x| x.powi(4) * psi0(x), 0.0, x_hi, 100_000 * refine);
    let tail_l = l_p.powi(two_k) * x_hi.powf(4.0 - 2.0 * k as f64 * p);
    let l = scanned_l.max(tail_l);
    let sigma2 = m2;
    let lo = SQRT_2 * sigma2 / (40.0 * (k as f64).sqrt() * m3);
    let hi = SQRT_2 * l.powf(0.25);
    let m = if hi > lo {
        let (_, raw) = scan_max(psi0, lo, hi, 10_000 * refine);
        1.0 - (1.0 - raw.min(1.0)) / 1.01
    } else {
        0.0
    };
    if m >= 1.0 {
        return Err(KacError::numerical("sup of |phi_0|^{2k} on I", m, 1.0));
    }
    let sl = l.sqrt();
    let lambda2 = (3.0 / (2.0 * k as f64 * sigma2))
        .max(2.0 / 3.0 * sl)
        .max(2.0 * m * sl / (1.0 - m));
    let mut env = GammaEnvelope {
        lambda: lambda2.sqrt(),
        alpha: 1.0 / (2.0 * k as f64),
        k,
        l,
        m,
        interval: (lo, hi),
        audit_worst_ratio: 0.0,
        tail_covered: false,
    };
    let h = ENVELOPE_AUDIT_MAX / (ENVELOPE_AUDIT_POINTS - 1) as f64;
    env.audit_worst_ratio = (0..ENVELOPE_AUDIT_POINTS)
        .map(|i| {
            let xi = i as f64 * h;
            datum.eval_cf(xi).norm() / env.eval(xi)
        })
        .fold(0.0, f64::max);
    // beyond the window |phi_0| <= L_p xi^{-p} decays faster than xi^{-1/k}
    env.tail_covered = l_p * ENVELOPE_AUDIT_MAX.powf(-p) <= env.eval(ENVELOPE_AUDIT_MAX)
        && p > 2.0 * env.alpha;
    Ok(env)
}

/// Every ingredient of the relaxation constant `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantBreakdown {
    pub n_bar: u32,
    pub delta_bar: f64,
    pub eps_bar: f64,
    pub k: u32,
    pub alpha: f64,
    pub lambda: f64,
    pub l: f64,
    pub l_p: f64,
    /// Envelope interval sup used for `lambda`.
    pub m_envelope: f64,
    /// Exponential `M` in the closed-form bound on `c_tilde`.
    pub m: f64,
    pub coeff_clt_cf: f64,
    pub coeff_clt_deriv: f64,
    pub coeff_mid_cf: f64,
    pub coeff_mid_deriv: f64,
    pub coeff_low: f64,
    /// Closed-form upper bound for the tail constant (enters `C`).
    pub c_tilde: f64,
    /// The tail constant at the envelope's own `lambda`.
    pub c_tilde_lambda: f64,
    /// `C` when representable in double precision.
    pub c_total: Option<f64>,
    pub log10_c_total: f64,
    pub overflow: bool,
}

impl ConstantBreakdown {
    /// Recomputes `log10 C` from the stored parts and returns the relative
    /// discrepancy.
    pub fn identity_residual(&self) -> f64 {
        let n = self.n_bar as f64;
        let ln_terms = [
            2f64.ln(),
            (2.0 * n).ln(),
            2f64.ln() + n * 2f64.ln() + ln_gamma(n + 1.0),
            (self.coeff_clt_cf + self.coeff_clt_deriv + self.coeff_mid_cf + self.coeff_mid_deriv + self.coeff_low).ln()
                - 0.5 * 2f64.ln(),
            2f64.ln() + self.c_tilde.ln(),
        ];
        let lse = log_sum_exp(&ln_terms) / 10f64.ln();
        ((lse - self.log10_c_total) / self.log10_c_total).abs()
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    mx + xs.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// Assembles `C` from `m4`, `sigma`, the tail profile `(p, L_p)` and the
/// envelope. Factorials and powers are accumulated in log space.
pub fn theorem_constant(
    m4: f64,
    sigma: f64,
    p: f64,
    l_p: f64,
    envelope: &GammaEnvelope,
) -> Result<ConstantBreakdown> {
    for (field, v) in [("m4", m4), ("sigma", sigma), ("p", p), ("L_p", l_p)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(KacError::param(field, format!("must be finite and positive, got {v}")));
        }
    }
    let k = (2.0 / p).ceil().max(1.0) as u32;
    let n_bar = 9 * k;
    let n = n_bar as f64;
    let ln_fact = ln_gamma(n + 1.0);
    let ln2 = 2f64.ln();
    let delta_bar = (-(n * ln2 + ln_fact)).exp();
    let eps_bar = (-(ln2 + ln_fact)).exp();

    let kurt = m4 / sigma.powi(4);
    let s = gamma(3.5).sqrt();
    let coeff_clt_cf = 0.62 * s * kurt;
    let coeff_clt_deriv = 3.8 * s * kurt;
    let coeff_mid_cf = 16.0 * E.powi(-2) * (2.0 * kurt).powf(4.5);
    let c_mid = (5.0 / E).powf(2.5) + 8.0 * SQRT_2 * E.powi(-2);
    let coeff_mid_deriv = c_mid * (2.0 * kurt).powf(4.5);
    let coeff_low = SQRT_2 * (24.0 / E).powi(2) * (2.0 * kurt).powi(4);

    let kf = k as f64;
    let lp4 = l_p.powf(4.0 / p);
    let ratio = SQRT_2 * sigma / (8.0 * kf * sigma.powi(3) + 40.0 * PI * (kf * m4).sqrt());
    let m = (-3.0 * PI * PI / (64.0 * (3.0 + lp4).powi(2)) * ratio * ratio).exp();

    // ln of 4 sqrt2 m4^4 sigma^{-23/2} (2 n!)^{9/(4n)}
    let ln_front = (4.0 * SQRT_2).ln() + 4.0 * m4.ln() - 11.5 * sigma.ln()
        + 9.0 / (4.0 * n) * (ln2 + ln_fact);
    let bracket = (1.5 / (sigma * sigma)).powf(2.25)
        + (2.0 / (1.0 - m)).powf(2.25) * l_p.powf(4.5 / p);
    let ln_c_tilde = ln_front + 1.25 * ln2 + bracket.ln();
    let ln_c_tilde_lambda = ln_front + 4.5 * envelope.lambda.ln();

    let coeff_sum = coeff_clt_cf + coeff_clt_deriv + coeff_mid_cf + coeff_mid_deriv + coeff_low;
    let ln_terms = [
        ln2,
        (2.0 * n).ln(),
        ln2 + n * ln2 + ln_fact,
        coeff_sum.ln() - 0.5 * ln2,
        ln2 + ln_c_tilde,
    ];
    let ln_c = log_sum_exp(&ln_terms);
    let overflow = ln_c >= f64::MAX.ln();
    let c_total = if overflow {
        None
    } else {
        let c_tilde = ln_c_tilde.exp();
        Some(2.0 + 2.0 * (n + (n * ln2 + ln_fact).exp()) + coeff_sum / SQRT_2 + 2.0 * c_tilde)
    };
    Ok(ConstantBreakdown {
        n_bar,
        delta_bar,
        eps_bar,
        k,
        alpha: envelope.alpha,
        lambda: envelope.lambda,
        l: envelope.l,
        l_p,
        m_envelope: envelope.m,
        m,
        coeff_clt_cf,
        coeff_clt_deriv,
        coeff_mid_cf,
        coeff_mid_deriv,
        coeff_low,
        c_tilde: ln_c_tilde.exp(),
        c_tilde_lambda: ln_c_tilde_lambda.exp(),
        c_total,
        log10_c_total: ln_c / 10f64.ln(),
        overflow,
    })
}

/// Envelope and constant for a datum with finite fourth moment.
pub fn theorem_constant_for(datum: &InitialDatum) -> Result<(GammaEnvelope, ConstantBreakdown)> {
    let sym = datum.symmetrize();
    let env = gamma_envelope(&sym)?;
    let mom = sym.moments()?;
    if !mom.m4.is_finite() {
        return Err(KacError::Unsupported("constant C needs a finite fourth moment".into()));
    }
    let tail = sym.tail_profile();
    let (p, l_p) = (tail.p.expect("envelope checked"), tail.l_p.expect("envelope checked"));
    let c = theorem_constant(mom.m4, mom.m2.sqrt(), p, l_p, &env)?;
    Ok((env, c))
}

/// One line of a bound audit: `value <= bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub quantity: String,
    pub value: f64,
    pub bound: f64,
}

impl AuditRow {
    pub fn new(quantity: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            quantity: quantity.into(),
            value,
            bound,
        }
    }

    pub fn margin(&self) -> f64 {
        self.bound - self.value
    }

    pub fn pass(&self) -> bool {
        self.value <= self.bound
    }
}

/// Characteristic function of `sum_j X_j / sqrt(n)` with `X_j` uniform of
/// unit variance.
pub fn equal_weight_uniform_cf(n: usize, xi: f64) -> f64 {
    sinc(3f64.sqrt() * xi / (n as f64).sqrt()).powi(n as i32)
}

/// Pointwise and L² checks of the weighted-sum bounds for equal weights
/// and uniform summands, on `points` grid points of `[0, A]`.
pub fn uniform_sum_audit(n: usize, points: usize) -> Result<Vec<AuditRow>> {
    if n == 0 || points < 3 {
        return Err(KacError::param("n", "need n >= 1 and at least 3 points"));
    }
    let g4 = gamma_n4(1.0, 1.8, &vec![1.0 / (n as f64).sqrt(); n]);
    let be = berry_esseen_bounds(g4)?;
    let a = 0.5 / g4.powf(0.25);
    let h = a / (points - 1) as f64;
    let diff = |xi: f64| equal_weight_uniform_cf(n, xi) - (-0.5 * xi * xi).exp();
    let dh = 1e-4;
    let deriv = |xi: f64| (diff(xi + dh) - diff(xi - dh)) / (2.0 * dh);
    let mut worst_cf = AuditRow::new(format!("uniform_sum_cf_n{n}"), 0.0, 0.0);
    let mut worst_d = AuditRow::new(format!("uniform_sum_deriv_n{n}"), 0.0, 0.0);
    let mut sq = Vec::with_capacity(points);
    let mut dsq = Vec::with_capacity(points);
    for i in 0..points {
        let xi = i as f64 * h;
        // absolute floors absorb cancellation in the differences
        let (v, bv) = (diff(xi).abs(), be.pointwise_cf(xi) + 1e-14);
        let (d, bd) = (deriv(xi).abs(), be.pointwise_deriv(xi) + 1e-10);
        // keep the row with the smallest margin
        if i == 0 || bv - v < worst_cf.margin() {
            worst_cf = AuditRow::new(worst_cf.quantity.clone(), v, bv);
        }
        if i == 0 || bd - d < worst_d.margin() {
            worst_d = AuditRow::new(worst_d.quantity.clone(), d, bd);
        }
        sq.push(diff(xi).powi(2));
        dsq.push(deriv(xi).powi(2));
    }
    // integrals over [-A, A] are twice the half-line values
    let l2 = (2.0 * trapezoid(&sq, h)).sqrt();
    let l2d = (2.0 * trapezoid(&dsq, h)).sqrt();
    Ok(vec![
        worst_cf,
        worst_d,
        AuditRow::new(format!("uniform_sum_l2_cf_n{n}"), l2, be.l2_cf + 1e-6),
        AuditRow::new(format!("uniform_sum_l2_deriv_n{n}"), l2d, be.l2_deriv + 1e-6),
    ])
}

/// Worst margin of `|psi| <= exp_decay_bound` for `psi = (sin(x/2)/(x/2))^4`
/// (`zeta^2 = 1/3`, `L = 16`) on `points` points of `[0, 50]`.
pub fn exp_decay_audit(points: usize) -> Result<AuditRow> {
    let zeta = (1.0f64 / 3.0).sqrt();
    let mut worst: Option<AuditRow> = None;
    for i in 0..points.max(2) {
        let xi = 50.0 * i as f64 / (points.max(2) - 1) as f64;
        let v = sinc(0.5 * xi).powi(4).abs();
        let b = exp_decay_bound(zeta, 16.0, xi)?;
        if worst.as_ref().is_none_or(|w| b - v < w.margin()) {
            worst = Some(AuditRow::new("exp_decay_uniform4", v, b));
        }
    }
    Ok(worst.expect("at least two points"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_values() {
        assert!((alpha_m(4.0).unwrap() - 0.375).abs() < 1e-13);
        assert!((alpha_m(2.0).unwrap() - 0.5).abs() < 1e-13);
        // mpmath quad of (2/pi) int_0^{pi/2} sin^3.5
        assert!((alpha_m(3.5).unwrap() - 0.397_441_353_178_13).abs() < 1e-12);
        assert!((alpha_m(3.5).unwrap() - 0.39742).abs() < 5e-5);
    }

    #[test]
    fn alpha_closed_form_agrees() {
        for m in [1.0, 2.0, 3.0, 3.5, 4.0, 6.0] {
            let q = alpha_m(m).unwrap();
            assert!((q - alpha_m_closed(m)).abs() < 1e-10, "{m}");
        }
        assert!((alpha_m_closed(1.0) - 2.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn lower_rate() {
        let r = lower_bound_rate(3.5).unwrap();
        assert!((r - 0.205_117_293_643_74).abs() < 1e-11);
        assert!((r - 0.20516).abs() < 1e-4);
        assert!((lower_bound_rate(4.0 - 1e-9).unwrap() - 0.25).abs() < 1e-8);
        for b in [3.01, 3.3, 3.7, 3.99] {
            assert!(lower_bound_rate(b).unwrap() < 0.25);
        }
        assert!(matches!(lower_bound_rate(4.5), Err(KacError::Parameter { field: "beta", .. })));
    }

    #[test]
    fn exp_decay_values() {
        let z = (1.0f64 / 3.0).sqrt();
        assert_eq!(exp_decay_bound(z, 16.0, 0.0).unwrap(), 1.0);
        // limit exp(-3 pi^2 / (64 * 361) * 3/8)
        let lim = exp_decay_bound(z, 16.0, 1e12).unwrap();
        assert!((lim - 0.999_519_536_124_95).abs() < 1e-12);
        assert!((lim - 0.999520).abs() < 1e-6);
        assert!(exp_decay_bound(0.7, 2.0, 1.0).unwrap() >= exp_decay_bound(0.7, 2.0, 2.0).unwrap());
    }

    #[test]
    fn berry_esseen_values() {
        let b = berry_esseen_bounds(1.0).unwrap();
        // Gamma(7/2) = 15 sqrt(pi) / 8
        let g = 15.0 * PI.sqrt() / 8.0;
        assert!((b.l2_cf - 0.62 * g.sqrt()).abs() < 1e-14);
        assert!((b.l2_cf - 1.130_263_736_054_6).abs() < 1e-12);
        assert!((b.l2_deriv - 3.8 * g.sqrt()).abs() < 1e-13);
        assert_eq!((b.c1, b.c2), (0.33, 0.76));
        let z = berry_esseen_bounds(0.0).unwrap();
        assert_eq!((z.l2_cf, z.l2_deriv), (0.0, 0.0));
        assert_eq!(z.pointwise_cf(1.3), 0.0);
        assert!((gamma_n4(1.0, 1.8, &[0.5; 4]) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn constant_for_gaussian_kurtosis() {
        let env = GammaEnvelope {
            lambda: 2.0,
            alpha: 0.25,
            k: 2,
            l: 0.1,
            m: 0.5,
            interval: (0.1, 1.0),
            audit_worst_ratio: 0.5,
            tail_covered: true,
        };
        let c = theorem_constant(3.0, 1.0, 1.0, 0.5, &env).unwrap();
        assert_eq!(c.n_bar, 18);
        let f18 = 6_402_373_705_728_000.0f64;
        assert!((c.delta_bar - 1.0 / (2f64.powi(18) * f18)).abs() / c.delta_bar < 1e-12);
        assert!((c.eps_bar - 1.0 / (2.0 * f18)).abs() / c.eps_bar < 1e-12);
        // sqrt2 (24/e)^2 6^4
        assert!((c.coeff_low - 142_874.103_718_07).abs() < 1e-6);
        assert!((c.coeff_low - 142_886.0).abs() / 142_886.0 < 1e-4);
        assert!(!c.overflow);
        assert!(c.identity_residual() < 1e-12);
        let direct = 2.0
            + 2.0 * (18.0 + 2f64.powi(18) * f18)
            + (c.coeff_clt_cf + c.coeff_clt_deriv + c.coeff_mid_cf + c.coeff_mid_deriv + c.coeff_low) / SQRT_2
            + 2.0 * c.c_tilde;
        assert!((c.c_total.unwrap() - direct).abs() / direct < 1e-12);
    }

    #[test]
    fn huge_constants_report_log() {
        let env = GammaEnvelope {
            lambda: 2.0,
            alpha: 0.005,
            k: 100,
            l: 0.1,
            m: 0.5,
            interval: (0.1, 1.0),
            audit_worst_ratio: 0.5,
            tail_covered: true,
        };
        let c = theorem_constant(3.0, 1.0, 0.02, 0.5, &env).unwrap();
        assert_eq!(c.n_bar, 900);
        assert!(c.overflow);
        assert!(c.c_total.is_none());
        assert!(c.log10_c_total.is_finite() && c.log10_c_total > 308.0);
        assert!(c.identity_residual() < 1e-12);
    }

    #[test]
    fn uniform_envelope() {
        let u = InitialDatum::uniform(3f64.sqrt()).unwrap();
        let env = gamma_envelope(&u).unwrap();
        assert_eq!(env.k, 2);
        assert_eq!(env.alpha, 0.25);
        assert!(env.lambda.powi(2) >= 0.75);
        assert_eq!(env.eval(0.0), 1.0);
        assert!(env.audit_worst_ratio <= 1.0);
        assert!(env.tail_covered);
    }

    #[test]
    fn envelope_rejects_asymmetric() {
        let d = InitialDatum::gaussian_mixture(vec![0.5, 0.5], vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert!(matches!(gamma_envelope(&d), Err(KacError::Unsupported(_))));
    }

    #[test]
    fn audits_pass() {
        for n in [4, 16, 64] {
            for row in uniform_sum_audit(n, 2000).unwrap() {
                assert!(row.pass(), "{row:?}");
            }
        }
        assert!(exp_decay_audit(1000).unwrap().pass());
    }
}
