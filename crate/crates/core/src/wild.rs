//! Wild-sum solver for the characteristic function of the Kac equation,
//! and spectral inversion back to a velocity density.
//!
//! The solution at time `t` is `sum_n e^{-t} (1 - e^{-t})^{n-1} q_n` with
//! `q_1 = phi_0` and `q_n = (1/(n-1)) sum_k q_k * q_{n-k}` under the
//! angular product `(g1 * g2)(xi) = (1/2pi) int g1(xi cos th) g2(xi sin th) dth`.
//! Long horizons are covered by composing the flow over short steps, each
//! of which is again a truncated Wild sum.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{KacError, Result};
use crate::grid::{EvenStencil, GridFn, LineStencil};
use crate::initial_data::InitialDatum;
use crate::metrics::DensityGrid;
use crate::quadrature::GaussLegendre;

/// CSV schema tag written as the first line of every report.
pub const CSV_HEADER: &str = "# kac-relax v1";

/// Numerical parameters of the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub xi_max: f64,
    pub n_points: usize,
    /// Gauss–Legendre nodes per quarter period of the angle.
    pub quad_nodes: usize,
    /// Sup-norm budget for the discarded Wild-series mass.
    pub tol: f64,
    /// Hard cap on the number of Wild terms in one step.
    pub max_terms: usize,
    /// Longest time covered by a single Wild sum.
    pub max_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            xi_max: 40.0,
            n_points: 4096,
            quad_nodes: 64,
            tol: 1e-10,
            max_terms: 5000,
            max_step: 0.5,
        }
    }
}

impl SolverConfig {
    /// Defaults with `xi_max = 40 / sigma` when the datum has a second moment.
    pub fn for_datum(datum: &InitialDatum) -> Self {
        let mut c = Self::default();
        if let Some(s) = datum.sigma() {
            c.xi_max = 40.0 / s;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |field: &'static str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(KacError::param(field, format!("must be positive, got {x}")))
            }
        };
        pos("xi_max", self.xi_max)?;
        pos("tol", self.tol)?;
        if !(self.max_step > 0.0) {
            return Err(KacError::param("max_step", "must be positive"));
        }
        if self.n_points < 256 {
            return Err(KacError::param("n_points", format!("must be >= 256, got {}", self.n_points)));
        }
        if self.quad_nodes < 8 {
            return Err(KacError::param("quad_nodes", format!("must be >= 8, got {}", self.quad_nodes)));
        }
        if self.max_terms == 0 {
            return Err(KacError::param("max_terms", "must be positive"));
        }
        Ok(())
    }
}

/// Characteristic function of the solution at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct CfSolution {
    pub t: f64,
    pub cf: GridFn,
    /// Wild terms kept in each step.
    pub truncation_n: usize,
    /// Sup-norm bound on the error from truncating the series.
    pub tail_bound: f64,
    /// Number of Wild steps composed to reach `t`.
    pub steps: usize,
}

/// Smallest `N` with `(1 - e^{-t})^N <= tol`.
pub fn truncation_depth(t: f64, tol: f64) -> usize {
    if t <= 0.0 || tol >= 1.0 {
        return 1;
    }
    let ln_q = (-(-t).exp()).ln_1p();
    if ln_q == 0.0 {
        return usize::MAX;
    }
    let mut n = (tol.ln() / ln_q).ceil().max(1.0) as usize;
    // settle rounding at the boundary
    while n > 1 && ((n - 1) as f64 * ln_q) <= tol.ln() {
        n -= 1;
    }
    while (n as f64 * ln_q) > tol.ln() {
        n += 1;
    }
    n
}

/// Angular product of two grid functions.
///
/// Even real inputs use the reduced range `(2/pi) int_0^{pi/2}`; otherwise
/// both inputs must be hermitian-even and the full period is used with
/// `4 * quad_nodes` nodes.
pub fn wild_convolution(g1: &GridFn, g2: &GridFn, quad_nodes: usize) -> Result<GridFn> {
    g1.check_same_grid(g2)?;
    if quad_nodes < 8 {
        return Err(KacError::param("quad_nodes", format!("must be >= 8, got {quad_nodes}")));
    }
    let n = g1.n_points();
    let ang = Angles::new(quad_nodes);
    let q = quad_nodes;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out[0] = g1.values()[0] * g2.values()[0];
    if g1.real_even() && g2.real_even() {
        let (a, b) = (re_parts(g1), re_parts(g2));
        let mut ta = vec![0.0; q];
        let mut tb = vec![0.0; q];
        for (k, o) in out.iter_mut().enumerate().skip(1) {
            for j in 0..q {
                let s = EvenStencil::new(k as f64 * ang.cos[j], n);
                ta[j] = s.apply(|i| a[i]);
                tb[j] = s.apply(|i| b[i]);
            }
            *o = Complex64::new(reversed_dot(&ta, &tb, &ang.reduced_w), 0.0);
        }
    } else if g1.hermitian_even() && g2.hermitian_even() {
        let signed = |g: &GridFn, i: isize| -> Complex64 {
            if i >= 0 {
                g.values()[i as usize]
            } else {
                g.values()[(-i) as usize].conj()
            }
        };
        let mut ta = vec![Complex64::new(0.0, 0.0); q];
        let mut tb = vec![Complex64::new(0.0, 0.0); q];
        for (k, o) in out.iter_mut().enumerate().skip(1) {
            for j in 0..q {
                let s = LineStencil::new(k as f64 * ang.cos[j], n);
                ta[j] = s.apply(|i| signed(g1, i));
                tb[j] = s.apply(|i| signed(g2, i));
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..q {
                let r = q - 1 - j;
                let quarter = ta[j] * tb[r]
                    + ta[r].conj() * tb[j]
                    + (ta[j] * tb[r]).conj()
                    + ta[r] * tb[j].conj();
                acc += quarter * ang.w[j];
            }
            *o = acc / (2.0 * PI);
        }
    } else {
        return Err(KacError::Unsupported(
            "angular product needs hermitian-even inputs to reach negative arguments".into(),
        ));
    }
    GridFn::new(
        g1.xi_max(),
        out,
        g1.hermitian_even() && g2.hermitian_even(),
    )
}

fn re_parts(g: &GridFn) -> Vec<f64> {
    g.values().iter().map(|v| v.re).collect()
}

/// `sum_j w_j a_j b_{q-1-j}`.
#[inline]
fn reversed_dot(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter().rev())
        .zip(w)
        .map(|((x, y), w)| x * y * w)
        .sum()
}

/// Gauss–Legendre angles on `[0, pi/2]`, symmetric about `pi/4`, so that
/// `sin(th_j) = cos(th_{q-1-j})`.
struct Angles {
    cos: Vec<f64>,
    w: Vec<f64>,
    /// `(2/pi) w_j`, the weights of the reduced even product.
    reduced_w: Vec<f64>,
}

impl Angles {
    fn new(q: usize) -> Self {
        let (th, w) = GaussLegendre::new(q).mapped(0.0, 0.5 * PI);
        let cos = th.iter().map(|t| t.cos()).collect();
        let reduced_w = w.iter().map(|w| w * 2.0 / PI).collect();
        Self { cos, w, reduced_w }
    }
}

/// Interpolation plan for one Wild step on even real data: for each grid
/// point `k` and angle `j`, the stencil reading `q(xi_k cos th_j)` from grid
/// values with index at most `max(k, 3)`, so that rows can be filled in
/// increasing `k`.
struct EvenPlan {
    n: usize,
    q: usize,
    base: Vec<u32>,
    w: Vec<[f64; 4]>,
    reduced_w: Vec<f64>,
}

const BLOCK_ROWS: usize = 16;

impl EvenPlan {
    fn new(n: usize, q: usize) -> Self {
        let ang = Angles::new(q);
        let mut base = Vec::with_capacity(n * q);
        let mut w = Vec::with_capacity(n * q);
        for k in 0..n {
            for &c in &ang.cos {
                let pos = k as f64 * c;
                let b = (pos.floor() as isize - 1)
                    .min(k as isize - 3)
                    .clamp(0, n as isize - 4) as usize;
                let nodes = [0, 1, 2, 3].map(|r| ((b + r) as f64).powi(2));
                base.push(b as u32);
                w.push(lagrange4(nodes, pos * pos));
            }
        }
        Self {
            n,
            q,
            base,
            w,
            reduced_w: ang.reduced_w,
        }
    }

    fn fill_row(&self, k: usize, values: &[f64], row: &mut [f64]) {
        let off = k * self.q;
        let taps = self.base[off..off + self.q].iter().zip(&self.w[off..off + self.q]);
        for (r, (&b, w)) in row.iter_mut().zip(taps) {
            let b = b as usize;
            *r = w[0] * values[b] + w[1] * values[b + 1] + w[2] * values[b + 2] + w[3] * values[b + 3];
        }
    }

    /// Terms `q_1..q_N` of one Wild sum with `q_1 = first`; returns
    /// `sum_{n>=2} weights[n] q_n`.
    fn higher_terms(&self, first: &[f64], weights: &[f64]) -> Vec<f64> {
        let (n, q) = (self.n, self.q);
        let terms = weights.len() - 1;
        let mut qs: Vec<Vec<f64>> = vec![Vec::new(); terms + 1];
        qs[1] = first.to_vec();
        for item in qs.iter_mut().skip(2) {
            *item = vec![0.0; n];
        }
        // tables[m][r * q + j] = q_m(xi_k cos th_j) for row k = start + r
        let mut tables = vec![vec![0.0; BLOCK_ROWS * q]; terms + 1];
        let mut start = 0;
        while start < n {
            let end = (start + BLOCK_ROWS).min(n);
            for r in 0..end - start {
                let (k, row) = (start + r, r * q);
                self.fill_row(k, &qs[1], &mut tables[1][row..row + q]);
            }
            for m in 2..=terms {
                let inv = 1.0 / (m - 1) as f64;
                for r in 0..end - start {
                    let k = start + r;
                    let mut s = 0.0;
                    if k == 0 {
                        for a in 1..m {
                            s += qs[a][0] * qs[m - a][0];
                        }
                    } else {
                        let row = r * q;
                        for a in 1..=m / 2 {
                            let b = m - a;
                            let d = reversed_dot(
                                &tables[a][row..row + q],
                                &tables[b][row..row + q],
                                &self.reduced_w,
                            );
                            s += if a == b { d } else { 2.0 * d };
                        }
                    }
                    qs[m][k] = s * inv;
                }
                for r in 0..end - start {
                    let (k, row) = (start + r, r * q);
                    self.fill_row(k, &qs[m], &mut tables[m][row..row + q]);
                }
            }
            start = end;
        }
        let mut out = vec![0.0; n];
        for (m, qm) in qs.iter().enumerate().skip(2) {
            let w = weights[m];
            for (o, v) in out.iter_mut().zip(qm) {
                *o += w * v;
            }
        }
        out
    }
}

fn lagrange4(nodes: [f64; 4], x: f64) -> [f64; 4] {
    let mut w = [1.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                w[i] *= (x - nodes[j]) / (nodes[i] - nodes[j]);
            }
        }
    }
    w
}

/// Wild weights `w_n = e^{-h}(1 - e^{-h})^{n-1}` for `n = 0..=terms`
/// (index 0 unused).
fn wild_weights(h: f64, terms: usize) -> Vec<f64> {
    let e = (-h).exp();
    let mut w = vec![0.0; terms + 1];
    let mut p = e;
    for item in w.iter_mut().skip(1) {
        *item = p;
        p *= 1.0 - e;
    }
    w
}

/// Solves from the characteristic function of a datum.
pub fn solve_cf(datum: &InitialDatum, t: f64, config: &SolverConfig) -> Result<CfSolution> {
    let mut v = solve_cf_times(datum, &[t], config)?;
    Ok(v.pop().expect("one time requested"))
}

/// Solutions at increasing times, each continued from the previous one.
pub fn solve_cf_times(datum: &InitialDatum, times: &[f64], config: &SolverConfig) -> Result<Vec<CfSolution>> {
    config.validate()?;
    let phi0 = GridFn::from_datum(datum, config.xi_max, config.n_points)?;
    solve_grid_times(&phi0, times, config)
}

/// Solves from sampled initial data; the grid of `phi0` overrides the
/// grid fields of `config`.
pub fn solve_grid(phi0: &GridFn, t: f64, config: &SolverConfig) -> Result<CfSolution> {
    let mut v = solve_grid_times(phi0, &[t], config)?;
    Ok(v.pop().expect("one time requested"))
}

pub fn solve_grid_times(phi0: &GridFn, times: &[f64], config: &SolverConfig) -> Result<Vec<CfSolution>> {
    let mut cfg = *config;
    cfg.xi_max = phi0.xi_max();
    cfg.n_points = phi0.n_points();
    cfg.validate()?;
    if !phi0.hermitian_even() {
        return Err(KacError::Unsupported(
            "solver needs the characteristic function of a real law (hermitian-even grid)".into(),
        ));
    }
    if times.is_empty() {
        return Ok(Vec::new());
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(KacError::param("times", "must be finite and non-negative"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(KacError::param("times", "times must be strictly increasing"));
    }
    let t_end = *times.last().expect("non-empty");
    let total_steps: usize = segment_steps(times, cfg.max_step).iter().sum();
    let single = total_steps <= 1;
    // per-step budget so that the propagated sum stays below tol
    let step_tol = if single {
        cfg.tol
    } else {
        cfg.tol * (-t_end).exp() / total_steps as f64
    };

    let plan = EvenPlan::new(phi0.n_points(), cfg.quad_nodes);
    let mut current = phi0.clone();
    let mut now = 0.0;
    let mut bound = 0.0;
    let mut steps_done = 0;
    let mut out = Vec::with_capacity(times.len());
    for (&t, m) in times.iter().zip(segment_steps(times, cfg.max_step)) {
        let mut n_used = 1;
        if m > 0 {
            let h = (t - now) / m as f64;
            let terms = truncation_depth(h, step_tol);
            if terms > cfg.max_terms {
                return Err(KacError::ResourceLimit(format!(
                    "{terms} Wild terms needed for step {h} at tol {step_tol:e}; cap is {} \
                     (raise tol or lower max_step)",
                    cfg.max_terms
                )));
            }
            let r = (-(-h).exp()).ln_1p() * terms as f64;
            let step_bound = r.exp();
            let weights = wild_weights(h, terms);
            for _ in 0..m {
                current = wild_step(&plan, &current, &weights)?;
                bound = bound * h.exp() + step_bound;
            }
            n_used = terms;
            steps_done += m;
        }
        now = t;
        out.push(CfSolution {
            t,
            cf: current.clone(),
            truncation_n: n_used,
            tail_bound: bound,
            steps: steps_done,
        });
    }
    Ok(out)
}

fn segment_steps(times: &[f64], max_step: f64) -> Vec<usize> {
    let mut prev = 0.0;
    times
        .iter()
        .map(|&t| {
            let dt = t - prev;
            prev = t;
            if dt <= 0.0 {
                0
            } else {
                ((dt / max_step) * (1.0 - 1e-12)).ceil().max(1.0) as usize
            }
        })
        .collect()
}

/// One truncated Wild sum applied to `phi`. Only the real part enters the
/// products of order two and above.
fn wild_step(plan: &EvenPlan, phi: &GridFn, weights: &[f64]) -> Result<GridFn> {
    let re = re_parts(phi);
    let higher = plan.higher_terms(&re, weights);
    let w1 = weights[1];
    let values = phi
        .values()
        .iter()
        .zip(&higher)
        .map(|(v, s)| v * w1 + s)
        .collect();
    GridFn::new(phi.xi_max(), values, true)
}

/// Closed-form fourth moment of the solution for symmetric data,
/// `3 m2^2 + (m4 - 3 m2^2) e^{-t/4}`.
pub fn solution_moment4(datum: &InitialDatum, t: f64) -> Result<f64> {
    if !datum.is_symmetric() {
        return Err(KacError::Unsupported("fourth-moment law needs symmetric data".into()));
    }
    let m = datum.moments()?;
    if !m.m4.is_finite() {
        return Err(KacError::Unsupported("datum has infinite fourth moment".into()));
    }
    let g = 3.0 * m.m2 * m.m2;
    Ok(g + (m.m4 - g) * (-t / 4.0).exp())
}

/// Window applied to the spectrum before inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralFilter {
    None,
    /// `exp(-strength (xi / xi_max)^order)`.
    Exponential { order: i32, strength: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions {
    /// Largest `|cf(xi_max)|` accepted.
    pub decay_tol: f64,
    pub filter: SpectralFilter,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            decay_tol: 1e-8,
            filter: SpectralFilter::Exponential {
                order: 8,
                strength: 36.0,
            },
        }
    }
}

/// Density on `n_v` points of `[-v_max, v_max]` from a hermitian-even
/// characteristic function, by the trapezoid rule in `xi`.
pub fn invert_to_density(cf: &GridFn, v_max: f64, n_v: usize) -> Result<DensityGrid> {
    invert_with(cf, v_max, n_v, &InversionOptions::default())
}

pub fn invert_with(cf: &GridFn, v_max: f64, n_v: usize, opts: &InversionOptions) -> Result<DensityGrid> {
    if !cf.hermitian_even() {
        return Err(KacError::Unsupported("inversion needs a hermitian-even grid".into()));
    }
    let vals = cf.values();
    let n = vals.len();
    let tail = vals[n - 1].norm();
    if tail > opts.decay_tol {
        return Err(KacError::DomainTruncation {
            value: tail,
            tol: opts.decay_tol,
        });
    }
    if n_v < 2 {
        return Err(KacError::param("n_v", "need at least two points"));
    }
    let h = cf.step();
    let xi_max = cf.xi_max();
    let weighted: Vec<Complex64> = vals
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let trap = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            let filt = match opts.filter {
                SpectralFilter::None => 1.0,
                SpectralFilter::Exponential { order, strength } => {
                    (-strength * (k as f64 * h / xi_max).powi(order)).exp()
                }
            };
            v * (trap * filt * h / PI)
        })
        .collect();
    DensityGrid::from_fn(v_max, n_v, |x| {
        // Re sum_k c_k phi_k e^{-i xi_k x}, rotation resynced every 64 steps
        let rot = Complex64::from_polar(1.0, -h * x);
        let mut e = Complex64::new(1.0, 0.0);
        let mut acc = 0.0;
        for (k, c) in weighted.iter().enumerate() {
            if k % 64 == 0 {
                e = Complex64::from_polar(1.0, -(k as f64) * h * x);
            }
            acc += c.re * e.re - c.im * e.im;
            e *= rot;
        }
        acc
    })
}

impl CfSolution {
    /// CSV with a provenance line carrying `t`, `truncation_N` and
    /// `tail_bound`, then `xi,re,im` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CSV_HEADER}");
        let _ = writeln!(
            s,
            "# t={:.16e},truncation_N={},tail_bound={:.16e},steps={},xi_max={:.16e},hermitian_even={}",
            self.t,
            self.truncation_n,
            self.tail_bound,
            self.steps,
            self.cf.xi_max(),
            self.cf.hermitian_even()
        );
        s.push_str("xi,re,im\n");
        for (k, v) in self.cf.values().iter().enumerate() {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", self.cf.xi(k), v.re, v.im);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let perr = |line: usize, message: String| KacError::Parse { line: line + 1, message };
        match lines.next() {
            Some((_, l)) if l.trim() == CSV_HEADER => {}
            _ => return Err(perr(0, format!("expected `{CSV_HEADER}`"))),
        }
        let (meta_line, meta) = lines
            .next()
            .ok_or_else(|| perr(1, "missing metadata line".into()))?;
        let meta = meta
            .strip_prefix('#')
            .ok_or_else(|| perr(meta_line, "metadata line must start with `#`".into()))?;
        let mut t = None;
        let mut n_trunc = None;
        let mut tail = None;
        let mut steps = 0usize;
        let mut xi_max = None;
        let mut herm = true;
        for field in meta.split(',') {
            let (k, v) = field
                .trim()
                .split_once('=')
                .ok_or_else(|| perr(meta_line, format!("bad metadata field `{field}`")))?;
            let bad = |e: String| perr(meta_line, format!("`{k}`: {e}"));
            match k {
                "t" => t = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "truncation_N" => n_trunc = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "tail_bound" => tail = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "steps" => steps = v.parse::<usize>().map_err(|e| bad(e.to_string()))?,
                "xi_max" => xi_max = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "hermitian_even" => herm = v.parse::<bool>().map_err(|e| bad(e.to_string()))?,
                _ => return Err(perr(meta_line, format!("unknown metadata field `{k}`"))),
            }
        }
        let missing = |name: &str| perr(meta_line, format!("missing `{name}`"));
        let t = t.ok_or_else(|| missing("t"))?;
        let truncation_n = n_trunc.ok_or_else(|| missing("truncation_N"))?;
        let tail_bound = tail.ok_or_else(|| missing("tail_bound"))?;
        match lines.next() {
            Some((_, l)) if l.trim() == "xi,re,im" => {}
            Some((i, _)) => return Err(perr(i, "expected column header `xi,re,im`".into())),
            None => return Err(perr(2, "missing column header".into())),
        }
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(perr(i, format!("expected 3 columns, got {}", cols.len())));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| perr(i, format!("`{s}`: {e}")))
            };
            xs.push(num(cols[0])?);
            values.push(Complex64::new(num(cols[1])?, num(cols[2])?));
        }
        if values.len() < 2 {
            return Err(perr(0, "need at least two rows".into()));
        }
        let xi_max = xi_max.unwrap_or(xs[xs.len() - 1]);
        let h = xi_max / (values.len() - 1) as f64;
        for (k, x) in xs.iter().enumerate() {
            if (x - k as f64 * h).abs() > 1e-9 * xi_max.max(1.0) {
                return Err(perr(k + 3, format!("xi = {x} is off the uniform grid")));
            }
        }
        let cf = GridFn::new(xi_max, values, herm)?;
        Ok(Self {
            t,
            cf,
            truncation_n,
            tail_bound,
            steps,
        })
    }
}
