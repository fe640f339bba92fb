//! The computations behind each subcommand, returning plain data so that
//! tests and the runner share one code path.

use num_complex::Complex64;

use crate::bounds::{
    alpha_m, alpha_m_closed, gamma_envelope, exp_decay_audit, uniform_sum_audit, lower_bound_rate,
    theorem_constant_for, AuditRow, ConstantBreakdown, ENVELOPE_AUDIT_MAX,
};
use crate::config::InversionSettings;
use crate::error::{KacError, Result};
use crate::grid::GridFn;
use crate::initial_data::{Family, InitialDatum};
use crate::mckean::{
    conditional_power_sum_mean, estimate_conditional_power_sum, estimate_power_sum,
    expected_power_sum, RngStream, TreeSampleStats,
};
use crate::metrics::{
    fit_decay_rate, h1_fourier_norm_with, l1_distance, DensityGrid, RateFit, NEGATIVE_LOBE_TOL,
};
use crate::wild::{invert_with, solve_cf_times, CfSolution, SolverConfig};

/// Equilibrium `e^{-sigma^2 xi^2 / 2}` on the grid of `like`.
pub fn maxwellian_cf(sigma: f64, like: &GridFn) -> GridFn {
    GridFn::from_fn(like.xi_max(), like.n_points(), true, |xi| {
        Complex64::new((-0.5 * sigma * sigma * xi * xi).exp(), 0.0)
    })
    .expect("grid already validated")
}

/// L¹ distances below this are inversion noise and stay out of rate fits.
pub const L1_RESOLUTION: f64 = 1e-8;

/// One row of a relaxation study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxRow {
    pub t: f64,
    pub l1_distance: f64,
    /// `||cf - cf_eq||_{H1} / sqrt 2`, an upper bound for `l1_distance`.
    pub h1_bound: f64,
    /// `C e^{-t/4}`; `NaN` when `C` is unavailable.
    pub theorem_bound: f64,
    pub tail_bound: f64,
    pub beurling_holds: bool,
}

#[derive(Debug)]
pub struct RelaxStudy {
    pub sigma: f64,
    pub rows: Vec<RelaxRow>,
    pub fit: Result<RateFit>,
    pub floor: f64,
    pub constant: Result<ConstantBreakdown>,
    pub solutions: Vec<CfSolution>,
    pub densities: Vec<DensityGrid>,
    pub equilibrium: DensityGrid,
}

impl RelaxStudy {
    /// First time at which the distance exceeds the theorem bound.
    pub fn bound_violation(&self) -> Option<&RelaxRow> {
        self.rows
            .iter()
            .find(|r| r.theorem_bound.is_finite() && r.l1_distance > r.theorem_bound)
    }
}

pub fn relax_study(
    datum: &InitialDatum,
    times: &[f64],
    solver: &SolverConfig,
    inversion: &InversionSettings,
    floor_factor: f64,
) -> Result<RelaxStudy> {
    let sigma = datum
        .sigma()
        .filter(|s| s.is_finite())
        .ok_or_else(|| KacError::Unsupported("relaxation study needs a finite second moment".into()))?;
    let solutions = solve_cf_times(datum, times, solver)?;
    let v_max = inversion.v_max_for(sigma);
    let opts = inversion.options();
    let equilibrium = DensityGrid::gaussian(sigma, v_max, inversion.n_v)?;
    let constant = theorem_constant_for(datum).map(|(_, c)| c);
    let c_total = constant
        .as_ref()
        .ok()
        .map_or(f64::NAN, |c| c.c_total.unwrap_or(f64::INFINITY));
    let mut rows = Vec::with_capacity(solutions.len());
    let mut densities = Vec::with_capacity(solutions.len());
    for sol in &solutions {
        let f = invert_with(&sol.cf, v_max, inversion.n_v, &opts)?.clamp_negative_lobes(NEGATIVE_LOBE_TOL)?;
        let l1 = l1_distance(&f, &equilibrium)?;
        let diff = sol.cf.sub(&maxwellian_cf(sigma, &sol.cf))?;
        let h1 = h1_fourier_norm_with(&diff, inversion.decay_tol.max(crate::metrics::H1_DECAY_TOL))?;
        rows.push(RelaxRow {
            t: sol.t,
            l1_distance: l1,
            h1_bound: h1 / 2f64.sqrt(),
            theorem_bound: c_total * (-sol.t / 4.0).exp(),
            tail_bound: sol.tail_bound,
            beurling_holds: 2f64.sqrt() * l1 <= h1 + 1e-6,
        });
        densities.push(f);
    }
    let floor = (floor_factor * solutions.iter().map(|s| s.tail_bound).fold(0.0, f64::max))
        .max(L1_RESOLUTION);
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let ds: Vec<f64> = rows.iter().map(|r| r.l1_distance).collect();
    let fit = fit_decay_rate(&ts, &ds, floor);
    Ok(RelaxStudy {
        sigma,
        rows,
        fit,
        floor,
        constant,
        solutions,
        densities,
        equilibrium,
    })
}

#[derive(Debug, Clone)]
pub struct CounterexampleStudy {
    pub beta: f64,
    pub xi_star: f64,
    /// `(t, |phi(xi*, t) - e^{-sigma^2 xi*^2 / 2}|, tail_bound)`.
    pub rows: Vec<(f64, f64, f64)>,
    pub fit: RateFit,
    pub predicted_rate: f64,
}

impl CounterexampleStudy {
    pub fn slower_than_quarter(&self) -> bool {
        self.fit.rate < 0.24
    }
}

pub fn counterexample_study(
    datum: &InitialDatum,
    times: &[f64],
    solver: &SolverConfig,
    xi_star: f64,
    floor_factor: f64,
) -> Result<CounterexampleStudy> {
    let beta = match datum.family() {
        Family::PowerLaw { beta } => *beta,
        other => {
            return Err(KacError::Unsupported(format!(
                "counterexample needs a power_law datum, got {}",
                other.name()
            )))
        }
    };
    let predicted_rate = lower_bound_rate(beta)?;
    let sigma2 = datum.m2().expect("power law has a second moment");
    let solutions = solve_cf_times(datum, times, solver)?;
    let target = (-0.5 * sigma2 * xi_star * xi_star).exp();
    let rows = solutions
        .iter()
        .map(|s| {
            let v = s.cf.at(xi_star).ok_or_else(|| {
                KacError::param("xi_star", format!("{xi_star} lies beyond xi_max = {}", s.cf.xi_max()))
            })?;
            Ok((s.t, (v - target).norm(), s.tail_bound))
        })
        .collect::<Result<Vec<_>>>()?;
    let floor = floor_factor * rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let ts: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ds: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let fit = fit_decay_rate(&ts, &ds, floor)?;
    Ok(CounterexampleStudy {
        beta,
        xi_star,
        rows,
        fit,
        predicted_rate,
    })
}

/// Monte Carlo mean of a weight power sum next to its closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow {
    /// Time, or `NaN` for rows conditioned on the leaf count.
    pub t: f64,
    /// Leaf count for conditional rows, 0 otherwise.
    pub n: usize,
    pub stats: TreeSampleStats,
    pub closed_form: f64,
}

impl MomentRow {
    pub fn z_score(&self) -> f64 {
        self.stats.z_score(self.closed_form)
    }

    pub fn within_3se(&self) -> bool {
        self.z_score().abs() <= 3.0
    }
}

/// Unconditional rows use stream `i` for the `i`-th time; conditional rows
/// stream `1000 + n`.
pub fn moment_check(m: f64, times: &[f64], max_n: usize, trials: u64, seed: u64) -> Result<(Vec<MomentRow>, Vec<MomentRow>)> {
    let uncond = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            Ok(MomentRow {
                t,
                n: 0,
                stats: estimate_power_sum(m, t, trials, &RngStream::new(seed, i as u64))?,
                closed_form: expected_power_sum(m, t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cond = (2..=max_n)
        .map(|n| {
            Ok(MomentRow {
                t: f64::NAN,
                n,
                stats: estimate_conditional_power_sum(m, n, trials, &RngStream::new(seed, 1000 + n as u64))?,
                closed_form: conditional_power_sum_mean(m, n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((uncond, cond))
}

#[derive(Debug, Clone)]
pub struct BoundsAudit {
    pub rows: Vec<AuditRow>,
    pub constant: Option<(String, ConstantBreakdown)>,
}

impl BoundsAudit {
    pub fn first_failure(&self) -> Option<&AuditRow> {
        self.rows.iter().find(|r| !r.pass())
    }
}

/// Built-in data whose envelopes are always audited.
pub fn reference_data() -> Vec<(String, InitialDatum)> {
    vec![
        (
            "uniform".into(),
            InitialDatum::uniform(3f64.sqrt()).expect("valid"),
        ),
        (
            "gaussian_mixture".into(),
            InitialDatum::gaussian_mixture(vec![0.3, 0.7], vec![0.5, 1.2], vec![]).expect("valid"),
        ),
    ]
}

fn envelope_rows(label: &str, datum: &InitialDatum) -> Result<Vec<AuditRow>> {
    let sym = datum.symmetrize();
    let env = match gamma_envelope(&sym) {
        Ok(env) => env,
        Err(KacError::Numerical { value, tol, .. }) => {
            return Ok(vec![AuditRow::new(format!("envelope_ratio_{label}"), value, tol)])
        }
        Err(e) => return Err(e),
    };
    let tail = sym.tail_profile();
    let (p, l_p) = (tail.p.unwrap_or(f64::NAN), tail.l_p.unwrap_or(f64::NAN));
    Ok(vec![
        AuditRow::new(format!("envelope_ratio_{label}"), env.audit_worst_ratio, 1.0),
        AuditRow::new(
            format!("envelope_tail_{label}"),
            if env.tail_covered { l_p * ENVELOPE_AUDIT_MAX.powf(-p) } else { f64::INFINITY },
            env.eval(ENVELOPE_AUDIT_MAX),
        ),
    ])
}

/// Every bound check; the datum, when given, adds its envelope and `C`.
pub fn bounds_audit(datum: Option<(&str, &InitialDatum)>) -> Result<BoundsAudit> {
    let mut rows = Vec::new();
    for m in [1.0, 2.0, 3.0, 3.5, 4.0, 6.0] {
        rows.push(AuditRow::new(
            format!("alpha_m_closed_form_m{m}"),
            (alpha_m(m)? - alpha_m_closed(m)).abs(),
            1e-10,
        ));
    }
    for n in [4, 16, 64] {
        rows.extend(uniform_sum_audit(n, 2001)?);
    }
    rows.push(exp_decay_audit(1000)?);
    for (label, d) in reference_data() {
        rows.extend(envelope_rows(&label, &d)?);
    }
    let mut constant = None;
    if let Some((label, d)) = datum {
        rows.extend(envelope_rows(label, d)?);
        match theorem_constant_for(d) {
            Ok((_, c)) => {
                rows.push(AuditRow::new(
                    format!("constant_identity_{label}"),
                    c.identity_residual(),
                    1e-12,
                ));
                constant = Some((label.to_string(), c));
            }
            Err(KacError::Unsupported(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(BoundsAudit { rows, constant })
}

/// `name, value` rows describing a constant breakdown.
pub fn constant_rows(c: &ConstantBreakdown) -> Vec<(&'static str, f64)> {
    vec![
        ("n_bar", c.n_bar as f64),
        ("delta_bar", c.delta_bar),
        ("eps_bar", c.eps_bar),
        ("k", c.k as f64),
        ("alpha", c.alpha),
        ("lambda", c.lambda),
        ("L", c.l),
        ("L_p", c.l_p),
        ("M_envelope", c.m_envelope),
        ("M", c.m),
        ("coeff_clt_cf", c.coeff_clt_cf),
        ("coeff_clt_deriv", c.coeff_clt_deriv),
        ("coeff_mid_cf", c.coeff_mid_cf),
        ("coeff_mid_deriv", c.coeff_mid_deriv),
        ("coeff_low", c.coeff_low),
        ("c_tilde", c.c_tilde),
        ("c_tilde_lambda", c.c_tilde_lambda),
        ("C_total", c.c_total.unwrap_or(f64::INFINITY)),
        ("log10_C_total", c.log10_c_total),
    ]
}
