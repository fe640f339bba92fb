//! McKean trees: leaf weights `pi_j`, the random sum `V_t = sum pi_j v_j`,
//! and Monte Carlo estimators of weight power sums.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::bounds::alpha_m;
use crate::error::{KacError, Result};
use crate::grid::GridFn;
use crate::initial_data::InitialDatum;

/// Number of independent shards a Monte Carlo run is split into.
pub const SHARDS: u64 = 16;

/// Reproducible random stream: Xoshiro256++ keyed by a splitmix64 hash of
/// `seed` and `stream_id`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: Xoshiro256PlusPlus,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let rng = Xoshiro256PlusPlus::seed_from_u64(splitmix64(seed ^ splitmix64(stream_id)));
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Fresh stream for shard `index`, keyed by the same seed.
    pub fn fork(&self, index: u64) -> RngStream {
        RngStream::new(self.seed, splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(1))))
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Leaf weights of one McKean tree.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    /// Wraps weights whose squares sum to one within `1e-12`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(KacError::param("weights", "need at least one leaf"));
        }
        let s: f64 = weights.iter().map(|w| w * w).sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(KacError::numerical("sum of squared weights - 1", s - 1.0, 1e-12));
        }
        Ok(Self { weights })
    }

    pub fn nu(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_j |pi_j|^m`.
    pub fn power_sum(&self, m: f64) -> f64 {
        power_sum(&self.weights, m)
    }
}

fn power_sum(w: &[f64], m: f64) -> f64 {
    if m == 2.0 {
        lane_sum(w, |x| x * x)
    } else if m == 4.0 {
        lane_sum(w, |x| (x * x) * (x * x))
    } else {
        w.iter().map(|x| x.abs().powf(m)).sum()
    }
}

/// Sum of `g` over `w` with four independent accumulators.
#[inline]
fn lane_sum(w: &[f64], g: impl Fn(f64) -> f64) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = w.chunks_exact(4);
    let rest: f64 = chunks.remainder().iter().map(|&x| g(x)).sum();
    for c in chunks {
        for (a, &x) in acc.iter_mut().zip(c) {
            *a += g(x);
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + rest
}

/// Leaf count `nu` with `P(nu = n) = e^{-t}(1 - e^{-t})^{n-1}`.
pub fn sample_nu<R: Rng + ?Sized>(t: f64, rng: &mut R) -> usize {
    if t <= 0.0 {
        return 1;
    }
    let ln_q = (-(-t).exp()).ln_1p();
    // U in (0, 1]
    let u = 1.0 - rng.random::<f64>();
    let k = (u.ln() / ln_q).floor();
    if k >= (usize::MAX / 2) as f64 {
        usize::MAX / 2
    } else {
        1 + k as usize
    }
}

const TABLE_BITS: u32 = 10;
const TABLE_LEN: usize = 1 << TABLE_BITS;

/// `(cos, sin)` at the centres of `TABLE_LEN` equal arcs of the circle.
fn direction_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..TABLE_LEN)
            .map(|k| {
                let th = 2.0 * PI * (k as f64 + 0.5) / TABLE_LEN as f64;
                (th.cos(), th.sin())
            })
            .collect()
    })
}

const INDEX_BITS: u32 = 22;
const INDEX_MASK: u64 = (1 << INDEX_BITS) - 1;

/// `(cos th, sin th)` from 42 bits: the top `TABLE_BITS` pick an arc, the
/// rest the offset within it.
#[inline]
fn direction_from_bits(table: &[(f64, f64)], bits: u64) -> (f64, f64) {
    const ARC: f64 = 2.0 * PI / TABLE_LEN as f64;
    const FRAC_BITS: u32 = 42 - TABLE_BITS;
    let (c0, s0) = table[(bits >> FRAC_BITS) as usize];
    let frac = (bits & ((1 << FRAC_BITS) - 1)) as f64 + 0.5;
    let d = (frac * (1.0 / (1u64 << FRAC_BITS) as f64) - 0.5) * ARC;
    let d2 = d * d;
    // |d| <= pi/1024: Taylor remainders below 2e-18
    let cd = 1.0 - d2 * (0.5 - d2 * (1.0 / 24.0));
    let sd = d * (1.0 - d2 * (1.0 / 6.0 - d2 * (1.0 / 120.0)));
    (c0 * cd - s0 * sd, s0 * cd + c0 * sd)
}

/// One split: a uniform leaf index in `0..len` and a uniform direction.
/// Small `len` shares a single 64-bit draw: Lemire's multiply-and-reject on
/// the low 22 bits, the angle from the high 42.
#[inline]
fn split_draw<R: Rng + ?Sized>(table: &[(f64, f64)], len: usize, rng: &mut R) -> (usize, (f64, f64)) {
    if len as u64 > INDEX_MASK {
        let i = rng.random_range(0..len);
        return (i, direction_from_bits(table, rng.next_u64() >> 22));
    }
    let n = len as u64;
    loop {
        let bits = rng.next_u64();
        let m = (bits & INDEX_MASK) * n;
        let low = m & INDEX_MASK;
        if low >= n || low >= ((1 << INDEX_BITS) - n) % n {
            return ((m >> INDEX_BITS) as usize, direction_from_bits(table, bits >> INDEX_BITS));
        }
    }
}

/// Runs `nu - 1` uniform leaf splits starting from `[1]`, into `out`.
pub fn split_process_into<R: Rng + ?Sized>(nu: usize, rng: &mut R, out: &mut Vec<f64>) {
    out.clear();
    out.resize(nu, 0.0);
    out[0] = 1.0;
    let table = direction_table();
    for len in 1..nu {
        let (i, (c, s)) = split_draw(table, len, rng);
        let w = out[i];
        out[i] = w * c;
        out[len] = w * s;
    }
}

/// Weights of a tree drawn at time `t`.
pub fn sample_weights<R: Rng + ?Sized>(t: f64, rng: &mut R) -> WeightVector {
    let nu = sample_nu(t, rng);
    let mut w = Vec::new();
    split_process_into(nu, rng, &mut w);
    WeightVector { weights: w }
}

/// Weights of a tree with exactly `nu` leaves.
pub fn sample_weights_given_nu<R: Rng + ?Sized>(nu: usize, rng: &mut R) -> Result<WeightVector> {
    if nu == 0 {
        return Err(KacError::param("nu", "must be at least 1"));
    }
    let mut w = Vec::new();
    split_process_into(nu, rng, &mut w);
    Ok(WeightVector { weights: w })
}

/// One draw of `V_t = sum pi_j v_j` with `v_j` i.i.d. from the datum.
pub fn sample_velocity<R: Rng + ?Sized>(datum: &InitialDatum, t: f64, rng: &mut R) -> Result<f64> {
    if !datum.can_sample() {
        return Err(KacError::Unsupported(format!(
            "{} datum has no sampler",
            datum.family().name()
        )));
    }
    let w = sample_weights(t, rng);
    Ok(w.weights.iter().map(|p| p * datum.draw(rng)).sum())
}

/// `count` draws of `V_t`, sharded over forks of `rng` and concatenated in
/// shard order.
pub fn sample_velocities(datum: &InitialDatum, t: f64, count: usize, rng: &RngStream) -> Result<Vec<f64>> {
    if !datum.can_sample() {
        return Err(KacError::Unsupported(format!(
            "{} datum has no sampler",
            datum.family().name()
        )));
    }
    let parts: Vec<Vec<f64>> = shard_sizes(count)
        .into_par_iter()
        .map(|(shard, n)| {
            let mut r = rng.fork(shard);
            let mut w = Vec::new();
            (0..n)
                .map(|_| {
                    let nu = sample_nu(t, &mut r);
                    split_process_into(nu, &mut r, &mut w);
                    w.iter().map(|p| p * datum.draw(&mut r)).sum()
                })
                .collect()
        })
        .collect();
    Ok(parts.concat())
}

fn shard_sizes(total: usize) -> Vec<(u64, usize)> {
    let s = SHARDS as usize;
    (0..s)
        .map(|i| (i as u64, total / s + usize::from(i < total % s)))
        .collect()
}

/// Largest `|sum pi_j^2 - 1|` over `trials` trees drawn at time `t`.
pub fn max_weight_identity_error(t: f64, trials: u64, rng: &RngStream) -> f64 {
    shard_sizes(trials as usize)
        .into_par_iter()
        .map(|(shard, n)| {
            let mut r = rng.fork(shard);
            let mut buf = Vec::new();
            (0..n)
                .map(|_| {
                    let nu = sample_nu(t, &mut r);
                    split_process_into(nu, &mut r, &mut buf);
                    (power_sum(&buf, 2.0) - 1.0).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// `E[sum |pi_j|^m | nu = n] = Gamma(2 a_m + n - 1) / (Gamma(2 a_m) Gamma(n))`.
pub fn conditional_power_sum_mean(m: f64, n: usize) -> Result<f64> {
    if !(m > 0.0) {
        return Err(KacError::param("m", format!("must be positive, got {m}")));
    }
    if n == 0 {
        return Err(KacError::param("n", "must be at least 1"));
    }
    let a2 = 2.0 * alpha_m(m)?;
    let n = n as f64;
    Ok((ln_gamma(a2 + n - 1.0) - ln_gamma(a2) - ln_gamma(n)).exp())
}

/// `E[sum |pi_j|^m] = e^{-(1 - 2 a_m) t}`.
pub fn expected_power_sum(m: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(KacError::param("t", format!("must be non-negative, got {t}")));
    }
    Ok((-(1.0 - 2.0 * alpha_m(m)?) * t).exp())
}

/// Streaming mean and variance; shards merge associatively.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    pub count: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Accumulator) -> Accumulator {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        Accumulator {
            count: self.count + other.count,
            mean: self.mean + d * other.count as f64 / n,
            m2: self.m2 + other.m2 + d * d * self.count as f64 * other.count as f64 / n,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Monte Carlo estimate of `E sum |pi_j|^m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeSampleStats {
    pub trials: u64,
    pub m: f64,
    pub t: f64,
    pub mean_power_sum: f64,
    pub std_error: f64,
}

impl TreeSampleStats {
    /// `|mean - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean_power_sum - target).abs();
        if self.std_error == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / self.std_error
        }
    }
}

fn sharded_stats<F>(trials: u64, rng: &RngStream, draw: F) -> Accumulator
where
    F: Fn(&mut RngStream, &mut Vec<f64>) -> f64 + Sync,
{
    let accs: Vec<Accumulator> = shard_sizes(trials as usize)
        .into_par_iter()
        .map(|(shard, n)| {
            let mut r = rng.fork(shard);
            let mut buf = Vec::new();
            let mut acc = Accumulator::default();
            for _ in 0..n {
                acc.push(draw(&mut r, &mut buf));
            }
            acc
        })
        .collect();
    accs.iter().fold(Accumulator::default(), |a, b| a.merge(b))
}

pub fn estimate_power_sum(m: f64, t: f64, trials: u64, rng: &RngStream) -> Result<TreeSampleStats> {
    check_trials(m, trials)?;
    let acc = sharded_stats(trials, rng, |r, buf| {
        let nu = sample_nu(t, r);
        split_process_into(nu, r, buf);
        power_sum(buf, m)
    });
    Ok(TreeSampleStats {
        trials,
        m,
        t,
        mean_power_sum: acc.mean(),
        std_error: acc.std_error(),
    })
}

/// Per-trial `(trial, nu, sum |pi_j|^m)` drawn exactly as
/// [`estimate_power_sum`] draws them, trials numbered in shard order.
pub fn sample_power_sums(m: f64, t: f64, trials: u64, rng: &RngStream) -> Result<Vec<(u64, usize, f64)>> {
    check_trials(m, trials)?;
    let parts: Vec<Vec<(usize, f64)>> = shard_sizes(trials as usize)
        .into_par_iter()
        .map(|(shard, n)| {
            let mut r = rng.fork(shard);
            let mut buf = Vec::new();
            (0..n)
                .map(|_| {
                    let nu = sample_nu(t, &mut r);
                    split_process_into(nu, &mut r, &mut buf);
                    (nu, power_sum(&buf, m))
                })
                .collect()
        })
        .collect();
    Ok(parts
        .into_iter()
        .flatten()
        .enumerate()
        .map(|(i, (nu, v))| (i as u64, nu, v))
        .collect())
}

/// Estimate of `E[sum |pi_j|^m | nu = n]`; the returned `t` is `NaN`.
pub fn estimate_conditional_power_sum(m: f64, n: usize, trials: u64, rng: &RngStream) -> Result<TreeSampleStats> {
    check_trials(m, trials)?;
    if n == 0 {
        return Err(KacError::param("n", "must be at least 1"));
    }
    let acc = sharded_stats(trials, rng, |r, buf| {
        split_process_into(n, r, buf);
        power_sum(buf, m)
    });
    Ok(TreeSampleStats {
        trials,
        m,
        t: f64::NAN,
        mean_power_sum: acc.mean(),
        std_error: acc.std_error(),
    })
}

fn check_trials(m: f64, trials: u64) -> Result<()> {
    if trials < 100 {
        return Err(KacError::param("trials", format!("must be >= 100, got {trials}")));
    }
    if !(m > 0.0) {
        return Err(KacError::param("m", format!("must be positive, got {m}")));
    }
    Ok(())
}

/// Mean and standard error of `g(V_t)` over `trials` draws.
pub fn estimate_velocity_moment<G>(
    datum: &InitialDatum,
    t: f64,
    trials: u64,
    rng: &RngStream,
    g: G,
) -> Result<(f64, f64)>
where
    G: Fn(f64) -> f64 + Sync,
{
    if !datum.can_sample() {
        return Err(KacError::Unsupported(format!(
            "{} datum has no sampler",
            datum.family().name()
        )));
    }
    let acc = sharded_stats(trials, rng, |r, buf| {
        let nu = sample_nu(t, r);
        split_process_into(nu, r, buf);
        let v: f64 = buf.iter().map(|p| p * datum.draw(r)).sum();
        g(v)
    });
    Ok((acc.mean(), acc.std_error()))
}

/// `E_h(pi_1^2, ..., pi_nu^2)` from the power sums by Newton's identities.
pub fn elementary_symmetric(weights: &WeightVector, h: usize) -> f64 {
    if h == 0 {
        return 1.0;
    }
    if h > weights.nu() {
        return 0.0;
    }
    let x: Vec<f64> = weights.weights.iter().map(|w| w * w).collect();
    let p: Vec<f64> = (0..=h)
        .map(|j| x.iter().map(|v| v.powi(j as i32)).sum())
        .collect();
    let mut e = vec![0.0; h + 1];
    e[0] = 1.0;
    for k in 1..=h {
        let mut s = 0.0;
        for j in 1..=k {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * e[k - j] * p[j];
        }
        e[k] = s / k as f64;
    }
    e[h]
}

/// `(1/n) sum_j e^{i xi_k x_j}` on the grid of `template`.
pub fn empirical_cf(samples: &[f64], template: &GridFn) -> Result<GridFn> {
    if samples.is_empty() {
        return Err(KacError::InsufficientData("empirical CF of zero samples".into()));
    }
    let n = template.n_points();
    let h = template.step();
    let chunk = samples.len().div_ceil(SHARDS as usize);
    let partial: Vec<Vec<Complex64>> = samples
        .par_chunks(chunk.max(1))
        .map(|xs| {
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for &x in xs {
                let rot = Complex64::from_polar(1.0, h * x);
                let mut e = Complex64::new(1.0, 0.0);
                for (k, a) in acc.iter_mut().enumerate() {
                    if k % 128 == 0 {
                        e = Complex64::from_polar(1.0, k as f64 * h * x);
                    }
                    *a += e;
                    e *= rot;
                }
            }
            acc
        })
        .collect();
    let inv = 1.0 / samples.len() as f64;
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    for p in &partial {
        for (v, a) in values.iter_mut().zip(p) {
            *v += a;
        }
    }
    for v in values.iter_mut() {
        *v *= inv;
    }
    GridFn::new(template.xi_max(), values, true)
}

/// Explicit McKean tree with node angles and leaf depths.
///
/// ```
/// use kac_relax::mckean::{McKeanTree, RngStream};
/// let mut rng = RngStream::new(11, 0);
/// let tree = McKeanTree::sample(2.0, &mut rng);
/// let s: f64 = tree.leaf_weights().iter().map(|w| w * w).sum();
/// assert!((s - 1.0).abs() < 1e-12);
/// assert_eq!(tree.leaf_depths().len(), tree.nu());
/// ```
#[derive(Debug, Clone)]
pub struct McKeanTree {
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf,
    Split { angle: f64, left: usize, right: usize },
}

impl McKeanTree {
    /// Grows a tree by splitting a uniformly chosen leaf `nu - 1` times.
    pub fn sample<R: Rng + ?Sized>(t: f64, rng: &mut R) -> Self {
        let nu = sample_nu(t, rng);
        let mut nodes = vec![Node::Leaf];
        let mut leaves = vec![0usize];
        for len in 1..nu {
            let i = rng.random_range(0..len);
            let angle = rng.random::<f64>() * 2.0 * PI;
            let at = leaves[i];
            let (l, r) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf);
            nodes.push(Node::Leaf);
            nodes[at] = Node::Split {
                angle,
                left: l,
                right: r,
            };
            leaves[i] = l;
            leaves.push(r);
        }
        Self { nodes }
    }

    pub fn nu(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf)).count()
    }

    /// `(weight, depth)` of every leaf, left to right.
    fn walk(&self) -> Vec<(f64, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, 1.0, 0usize)];
        while let Some((i, w, d)) = stack.pop() {
            match self.nodes[i] {
                Node::Leaf => out.push((w, d)),
                Node::Split { angle, left, right } => {
                    stack.push((right, w * angle.sin(), d + 1));
                    stack.push((left, w * angle.cos(), d + 1));
                }
            }
        }
        out
    }

    pub fn leaf_weights(&self) -> Vec<f64> {
        self.walk().into_iter().map(|p| p.0).collect()
    }

    pub fn leaf_depths(&self) -> Vec<usize> {
        self.walk().into_iter().map(|p| p.1).collect()
    }
}
