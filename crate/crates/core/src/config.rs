//! Experiment configuration: flat `key = value` pairs grouped under
//! `[datum]`, `[solver]`, `[inversion]` and `[analysis]` headers. The syntax
//! is TOML restricted to scalars and flat arrays.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{KacError, Result};
use crate::initial_data::{Family, InitialDatum};
use crate::wild::{InversionOptions, SolverConfig, SpectralFilter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Solve,
    RelaxRate,
    MomentCheck,
    BoundsAudit,
    Counterexample,
}

impl Subcommand {
    pub const ALL: [Subcommand; 5] = [
        Subcommand::Solve,
        Subcommand::RelaxRate,
        Subcommand::MomentCheck,
        Subcommand::BoundsAudit,
        Subcommand::Counterexample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Solve => "solve",
            Subcommand::RelaxRate => "relax-rate",
            Subcommand::MomentCheck => "moment-check",
            Subcommand::BoundsAudit => "bounds-audit",
            Subcommand::Counterexample => "counterexample",
        }
    }

    fn needs_datum(self) -> bool {
        matches!(
            self,
            Subcommand::Solve | Subcommand::RelaxRate | Subcommand::Counterexample
        )
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Subcommand::ALL.iter().map(|c| c.name()).collect();
                format!("unknown subcommand `{s}`, expected one of {}", names.join(", "))
            })
    }
}

/// Family descriptor as written in the `[datum]` section.
#[derive(Debug, Clone, PartialEq)]
pub enum DatumSpec {
    Gaussian { sigma: f64 },
    Uniform { halfwidth: f64 },
    GaussianMixture { weights: Vec<f64>, sigmas: Vec<f64>, means: Vec<f64> },
    PowerLaw { beta: f64 },
    CfSeries { coeffs: Vec<f64> },
    CustomGrid { grid_path: PathBuf },
}

/// A family descriptor plus the symmetrization flag.
#[derive(Debug, Clone, PartialEq)]
pub struct DatumConfig {
    pub spec: DatumSpec,
    pub symmetrize: bool,
}

impl DatumConfig {
    /// Builds the datum; `grid_path` is resolved against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<InitialDatum> {
        let family = match &self.spec {
            DatumSpec::Gaussian { sigma } => Family::Gaussian { sigma: *sigma },
            DatumSpec::Uniform { halfwidth } => Family::Uniform {
                halfwidth: *halfwidth,
            },
            DatumSpec::GaussianMixture {
                weights,
                sigmas,
                means,
            } => Family::GaussianMixture {
                weights: weights.clone(),
                sigmas: sigmas.clone(),
                means: means.clone(),
            },
            DatumSpec::PowerLaw { beta } => Family::PowerLaw { beta: *beta },
            DatumSpec::CfSeries { coeffs } => Family::CfSeries {
                coeffs: coeffs.clone(),
            },
            DatumSpec::CustomGrid { grid_path } => {
                let path = base_dir.join(grid_path);
                let text =
                    std::fs::read_to_string(&path).map_err(|e| KacError::io(&path, e))?;
                let (v, f) = parse_density_csv(&text)?;
                Family::CustomGrid { v, f }
            }
        };
        let datum = InitialDatum::new(family)?;
        Ok(if self.symmetrize {
            datum.symmetrize()
        } else {
            datum
        })
    }
}

/// `[solver]` keys; `xi_max` defaults to `40 / sigma` once the datum is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub xi_max: Option<f64>,
    pub n_points: usize,
    pub quad_nodes: usize,
    pub tol: f64,
    pub max_terms: usize,
    pub max_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            xi_max: None,
            n_points: d.n_points,
            quad_nodes: d.quad_nodes,
            tol: d.tol,
            max_terms: d.max_terms,
            max_step: d.max_step,
        }
    }
}

impl SolverSettings {
    pub fn resolve(&self, datum: &InitialDatum) -> SolverConfig {
        let base = SolverConfig::for_datum(datum);
        SolverConfig {
            xi_max: self.xi_max.unwrap_or(base.xi_max),
            n_points: self.n_points,
            quad_nodes: self.quad_nodes,
            tol: self.tol,
            max_terms: self.max_terms,
            max_step: self.max_step,
        }
    }
}

/// `[inversion]` keys; `v_max` defaults to `10 sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionSettings {
    pub v_max: Option<f64>,
    pub n_v: usize,
    pub decay_tol: f64,
    pub filter_order: i32,
    pub filter_strength: f64,
}

impl Default for InversionSettings {
    fn default() -> Self {
        Self {
            v_max: None,
            n_v: 2001,
            decay_tol: 1e-8,
            filter_order: 8,
            filter_strength: 36.0,
        }
    }
}

impl InversionSettings {
    pub fn options(&self) -> InversionOptions {
        InversionOptions {
            decay_tol: self.decay_tol,
            filter: if self.filter_strength == 0.0 {
                SpectralFilter::None
            } else {
                SpectralFilter::Exponential {
                    order: self.filter_order,
                    strength: self.filter_strength,
                }
            },
        }
    }

    pub fn v_max_for(&self, sigma: f64) -> f64 {
        self.v_max.unwrap_or(10.0 * sigma)
    }
}

/// `[analysis]` keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisSettings {
    /// Power `m` of the weight sums in `moment-check`.
    pub m: f64,
    /// Largest leaf count of the conditional table in `moment-check`.
    pub max_n: usize,
    /// Frequency probed by `counterexample`.
    pub xi_star: f64,
    /// Solver distances below this multiple of `tail_bound` are left out of
    /// rate fits.
    pub floor_factor: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            m: 4.0,
            max_n: 10,
            xi_star: 0.25,
            floor_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub subcommand: Subcommand,
    pub datum: Option<DatumConfig>,
    pub times: Vec<f64>,
    pub solver: SolverSettings,
    pub inversion: InversionSettings,
    pub analysis: AnalysisSettings,
    pub trials: u64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub emit_svg: bool,
    /// Write per-trial samples (`trial, nu, value`) where supported.
    pub dump_samples: bool,
}

pub const DEFAULT_TIMES: [f64; 7] = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    subcommand: Option<String>,
    times: Option<Vec<f64>>,
    trials: Option<u64>,
    seed: Option<u64>,
    out_dir: Option<String>,
    emit_svg: Option<bool>,
    dump_samples: Option<bool>,
    datum: Option<RawDatum>,
    solver: Option<RawSolver>,
    inversion: Option<RawInversion>,
    analysis: Option<RawAnalysis>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDatum {
    family: Option<String>,
    sigma: Option<f64>,
    halfwidth: Option<f64>,
    beta: Option<f64>,
    weights: Option<Vec<f64>>,
    sigmas: Option<Vec<f64>>,
    means: Option<Vec<f64>>,
    coeffs: Option<Vec<f64>>,
    grid_path: Option<String>,
    symmetrize: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    xi_max: Option<f64>,
    n_points: Option<usize>,
    quad_nodes: Option<usize>,
    tol: Option<f64>,
    max_terms: Option<usize>,
    max_step: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInversion {
    v_max: Option<f64>,
    n_v: Option<usize>,
    decay_tol: Option<f64>,
    filter_order: Option<i32>,
    filter_strength: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    m: Option<f64>,
    max_n: Option<usize>,
    xi_star: Option<f64>,
    floor_factor: Option<f64>,
}

/// Locates keys in the source text for error reporting.
struct Source<'a> {
    text: &'a str,
}

impl Source<'_> {
    /// 1-based line of `key` inside `section` (`None` for top level), or 0.
    fn line_of(&self, section: Option<&str>, key: &str) -> usize {
        let mut current: Option<String> = None;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(h) = line.strip_prefix('[') {
                current = h.split(']').next().map(|s| s.trim().to_string());
                continue;
            }
            if current.as_deref() == section {
                if let Some((k, _)) = line.split_once('=') {
                    if k.trim() == key {
                        return i + 1;
                    }
                }
            }
        }
        0
    }

    fn error(&self, section: Option<&str>, key: &str, message: impl Into<String>) -> KacError {
        let full = match section {
            Some(s) => format!("{s}.{key}"),
            None => key.to_string(),
        };
        KacError::Config {
            line: self.line_of(section, key),
            key: full,
            message: message.into(),
        }
    }

    fn toml_error(&self, e: toml::de::Error) -> KacError {
        let message = e.message().to_string();
        let (line, key) = match e.span() {
            Some(span) => {
                let start = span.start.min(self.text.len());
                let line = self.text[..start].matches('\n').count() + 1;
                let key = self
                    .text
                    .lines()
                    .nth(line - 1)
                    .and_then(|l| l.split_once('='))
                    .map(|(k, _)| k.trim().to_string())
                    .unwrap_or_default();
                (line, key)
            }
            None => (0, String::new()),
        };
        // serde names the offending key in its own message
        let key = backticked(&message)
            .filter(|_| message.starts_with("unknown field"))
            .unwrap_or(key);
        KacError::Config { line, key, message }
    }
}

fn backticked(s: &str) -> Option<String> {
    let start = s.find('`')? + 1;
    let len = s[start..].find('`')?;
    Some(s[start..start + len].to_string())
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let src = Source { text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| src.toml_error(e))?;

    let subcommand = match raw.subcommand.as_deref() {
        Some(s) => s
            .parse::<Subcommand>()
            .map_err(|m| src.error(None, "subcommand", m))?,
        None => return Err(src.error(None, "subcommand", "missing required key")),
    };

    let times = raw.times.unwrap_or_else(|| DEFAULT_TIMES.to_vec());
    if times.is_empty() {
        return Err(src.error(None, "times", "need at least one time"));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(src.error(None, "times", "times must be finite and non-negative"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(src.error(None, "times", "times must be strictly increasing"));
    }

    let trials = raw.trials.unwrap_or(DEFAULT_TRIALS);
    if subcommand == Subcommand::MomentCheck && trials < 100 {
        return Err(src.error(None, "trials", format!("must be >= 100, got {trials}")));
    }

    let datum = match raw.datum {
        Some(d) => Some(parse_datum(&src, d)?),
        None if subcommand.needs_datum() => {
            return Err(src.error(None, "datum", format!("[datum] section required for {subcommand}")))
        }
        None => None,
    };

    let rs = raw.solver.unwrap_or_default();
    let mut solver = SolverSettings::default();
    solver.xi_max = rs.xi_max;
    solver.n_points = rs.n_points.unwrap_or(solver.n_points);
    solver.quad_nodes = rs.quad_nodes.unwrap_or(solver.quad_nodes);
    solver.tol = rs.tol.unwrap_or(solver.tol);
    solver.max_terms = rs.max_terms.unwrap_or(solver.max_terms);
    solver.max_step = rs.max_step.unwrap_or(solver.max_step);
    let probe = SolverConfig {
        xi_max: solver.xi_max.unwrap_or(1.0),
        n_points: solver.n_points,
        quad_nodes: solver.quad_nodes,
        tol: solver.tol,
        max_terms: solver.max_terms,
        max_step: solver.max_step,
    };
    if let Err(KacError::Parameter { field, reason }) = probe.validate() {
        return Err(src.error(Some("solver"), field, reason));
    }

    let ri = raw.inversion.unwrap_or_default();
    let mut inversion = InversionSettings::default();
    inversion.v_max = ri.v_max;
    inversion.n_v = ri.n_v.unwrap_or(inversion.n_v);
    inversion.decay_tol = ri.decay_tol.unwrap_or(inversion.decay_tol);
    inversion.filter_order = ri.filter_order.unwrap_or(inversion.filter_order);
    inversion.filter_strength = ri.filter_strength.unwrap_or(inversion.filter_strength);
    if let Some(v) = inversion.v_max.filter(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(src.error(Some("inversion"), "v_max", format!("must be positive, got {v}")));
    }
    if inversion.n_v < 2 {
        return Err(src.error(Some("inversion"), "n_v", "need at least two points"));
    }
    if !(inversion.decay_tol > 0.0) {
        return Err(src.error(Some("inversion"), "decay_tol", "must be positive"));
    }
    if inversion.filter_order < 2 || inversion.filter_order % 2 != 0 {
        return Err(src.error(Some("inversion"), "filter_order", "must be an even integer >= 2"));
    }
    if !(inversion.filter_strength >= 0.0 && inversion.filter_strength.is_finite()) {
        return Err(src.error(Some("inversion"), "filter_strength", "must be non-negative"));
    }

    let ra = raw.analysis.unwrap_or_default();
    let mut analysis = AnalysisSettings::default();
    analysis.m = ra.m.unwrap_or(analysis.m);
    analysis.max_n = ra.max_n.unwrap_or(analysis.max_n);
    analysis.xi_star = ra.xi_star.unwrap_or(analysis.xi_star);
    analysis.floor_factor = ra.floor_factor.unwrap_or(analysis.floor_factor);
    if !(analysis.m > 0.0 && analysis.m.is_finite()) {
        return Err(src.error(Some("analysis"), "m", "must be positive"));
    }
    if analysis.max_n < 2 {
        return Err(src.error(Some("analysis"), "max_n", "must be at least 2"));
    }
    if !(analysis.xi_star > 0.0 && analysis.xi_star.is_finite()) {
        return Err(src.error(Some("analysis"), "xi_star", "must be positive"));
    }
    if !(analysis.floor_factor >= 0.0 && analysis.floor_factor.is_finite()) {
        return Err(src.error(Some("analysis"), "floor_factor", "must be non-negative"));
    }

    Ok(ExperimentConfig {
        subcommand,
        datum,
        times,
        solver,
        inversion,
        analysis,
        trials,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        out_dir: PathBuf::from(raw.out_dir.unwrap_or_else(|| "out".into())),
        emit_svg: raw.emit_svg.unwrap_or(false),
        dump_samples: raw.dump_samples.unwrap_or(false),
    })
}

/// Checks the `[datum]` keys against the family and builds every family
/// that does not need a file, so range errors surface here.
fn parse_datum(src: &Source<'_>, d: RawDatum) -> Result<DatumConfig> {
    const SEC: Option<&str> = Some("datum");
    let family = d
        .family
        .clone()
        .ok_or_else(|| src.error(SEC, "family", "missing required key"))?;
    let allowed: &[&str] = match family.as_str() {
        "gaussian" => &["sigma"],
        "uniform" => &["halfwidth"],
        "gaussian_mixture" => &["weights", "sigmas", "means"],
        "power_law" => &["beta"],
        "cf_series" => &["coeffs"],
        "custom_grid" => &["grid_path"],
        other => {
            return Err(src.error(
                SEC,
                "family",
                format!(
                    "unknown family `{other}`, expected gaussian, uniform, gaussian_mixture, \
                     power_law, cf_series or custom_grid"
                ),
            ))
        }
    };
    let present = [
        ("sigma", d.sigma.is_some()),
        ("halfwidth", d.halfwidth.is_some()),
        ("beta", d.beta.is_some()),
        ("weights", d.weights.is_some()),
        ("sigmas", d.sigmas.is_some()),
        ("means", d.means.is_some()),
        ("coeffs", d.coeffs.is_some()),
        ("grid_path", d.grid_path.is_some()),
    ];
    if let Some((key, _)) = present.iter().find(|(k, p)| *p && !allowed.contains(k)) {
        return Err(src.error(SEC, key, format!("not a parameter of family `{family}`")));
    }
    let need = |key: &str, v: Option<f64>| v.ok_or_else(|| src.error(SEC, key, format!("required by family `{family}`")));
    let need_vec = |key: &str, v: Option<Vec<f64>>| {
        v.ok_or_else(|| src.error(SEC, key, format!("required by family `{family}`")))
    };
    let spec = match family.as_str() {
        "gaussian" => DatumSpec::Gaussian {
            sigma: need("sigma", d.sigma)?,
        },
        "uniform" => DatumSpec::Uniform {
            halfwidth: need("halfwidth", d.halfwidth)?,
        },
        "gaussian_mixture" => {
            let weights = need_vec("weights", d.weights)?;
            let means = d.means.unwrap_or_else(|| vec![0.0; weights.len()]);
            DatumSpec::GaussianMixture {
                sigmas: need_vec("sigmas", d.sigmas)?,
                weights,
                means,
            }
        }
        "power_law" => DatumSpec::PowerLaw {
            beta: need("beta", d.beta)?,
        },
        "cf_series" => DatumSpec::CfSeries {
            coeffs: need_vec("coeffs", d.coeffs)?,
        },
        _ => DatumSpec::CustomGrid {
            grid_path: PathBuf::from(
                d.grid_path
                    .ok_or_else(|| src.error(SEC, "grid_path", format!("required by family `{family}`")))?,
            ),
        },
    };
    let cfg = DatumConfig {
        spec,
        symmetrize: d.symmetrize.unwrap_or(false),
    };
    if !matches!(cfg.spec, DatumSpec::CustomGrid { .. }) {
        match cfg.build(Path::new(".")) {
            Ok(_) => {}
            Err(KacError::Parameter { field, reason }) => return Err(src.error(SEC, field, reason)),
            Err(e) => return Err(e),
        }
    }
    Ok(cfg)
}

/// Reads `v,f` pairs, one per line. Lines starting with `#` and a
/// non-numeric first row are skipped.
pub fn parse_density_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut v = Vec::new();
    let mut f = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line_of = |rec: Option<&csv::StringRecord>| {
            rec.and_then(|r| r.position()).map_or(i + 1, |p| p.line() as usize)
        };
        let rec = rec.map_err(|e| KacError::Parse {
            line: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = line_of(Some(&rec));
        if rec.len() != 2 {
            return Err(KacError::Parse {
                line,
                message: format!("expected 2 columns `v,f`, got {}", rec.len()),
            });
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(p) => {
                v.push(p[0]);
                f.push(p[1]);
            }
            Err(_) if v.is_empty() && i == 0 => continue,
            Err(e) => {
                return Err(KacError::Parse {
                    line,
                    message: format!("`{}`: {e}", rec.iter().collect::<Vec<_>>().join(",")),
                })
            }
        }
    }
    if v.len() < 2 {
        return Err(KacError::Parse {
            line: 0,
            message: "need at least two (v, f) rows".into(),
        });
    }
    Ok((v, f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("subcommand = \"solve\"\n[datum]\nfamily = \"gaussian\"\nsigma = 2.0\n").unwrap();
        assert_eq!(c.subcommand, Subcommand::Solve);
        assert_eq!(c.times, DEFAULT_TIMES.to_vec());
        assert_eq!(c.seed, DEFAULT_SEED);
        let d = c.datum.unwrap().build(Path::new(".")).unwrap();
        assert_eq!(c.solver.resolve(&d), SolverConfig::for_datum(&d));
        assert_eq!(c.inversion, InversionSettings::default());
        assert!(!c.emit_svg);
    }

    #[test]
    fn times_must_increase() {
        let e = parse_config("subcommand = \"solve\"\ntimes = [2, 1]\n[datum]\nfamily = \"uniform\"\nhalfwidth = 1\n")
            .unwrap_err();
        match e {
            KacError::Config { line, key, message } => {
                assert_eq!(line, 2);
                assert_eq!(key, "times");
                assert_eq!(message, "times must be strictly increasing");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn beta_range_reported_with_line() {
        let text = "subcommand = \"counterexample\"\n\n[datum]\nfamily = \"power_law\"\nbeta = 5\n";
        match parse_config(text).unwrap_err() {
            KacError::Config { line, key, message } => {
                assert_eq!((line, key.as_str()), (5, "datum.beta"));
                assert!(message.contains("beta must lie in (3,4)"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = "subcommand = \"moment-check\"\n[solver]\nn_point = 10\n";
        match parse_config(text).unwrap_err() {
            KacError::Config { line, key, .. } => {
                assert_eq!(key, "n_point");
                assert_eq!(line, 3);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config("subcommand = \"solve\"\ncolour = 1\n[datum]\nfamily = \"gaussian\"\nsigma = 1\n"),
            Err(KacError::Config { .. })
        ));
    }

    #[test]
    fn type_mismatch_names_line() {
        let text = "subcommand = \"solve\"\n[datum]\nfamily = \"gaussian\"\nsigma = \"wide\"\n";
        match parse_config(text).unwrap_err() {
            KacError::Config { line, key, .. } => assert_eq!((line, key.as_str()), (4, "sigma")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn family_parameters_checked() {
        let text = "subcommand = \"solve\"\n[datum]\nfamily = \"uniform\"\nsigma = 1\n";
        assert!(matches!(parse_config(text), Err(KacError::Config { key, .. }) if key == "datum.sigma"));
        let text = "subcommand = \"solve\"\n[datum]\nfamily = \"uniform\"\n";
        assert!(matches!(parse_config(text), Err(KacError::Config { key, .. }) if key == "datum.halfwidth"));
        let text = "subcommand = \"solve\"\n";
        assert!(matches!(parse_config(text), Err(KacError::Config { key, .. }) if key == "datum"));
    }

    #[test]
    fn mixture_means_default_to_zero() {
        let text = "subcommand = \"solve\"\n[datum]\nfamily = \"gaussian_mixture\"\nweights = [0.5, 0.5]\nsigmas = [1, 2]\n";
        let c = parse_config(text).unwrap();
        match c.datum.unwrap().spec {
            DatumSpec::GaussianMixture { means, .. } => assert_eq!(means, vec![0.0, 0.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn moment_check_needs_trials() {
        let text = "subcommand = \"moment-check\"\ntrials = 50\n";
        assert!(matches!(parse_config(text), Err(KacError::Config { key, .. }) if key == "trials"));
    }

    #[test]
    fn density_csv_round_trip() {
        let (v, f) = parse_density_csv("# comment\nv,f\n-1,0.5\n1,0.5\n").unwrap();
        assert_eq!(v, vec![-1.0, 1.0]);
        assert_eq!(f, vec![0.5, 0.5]);
        assert!(matches!(parse_density_csv("0,1\n1,x\n"), Err(KacError::Parse { line: 2, .. })));
        assert!(parse_density_csv("0,1,2\n").is_err());
        assert!(parse_density_csv("").is_err());
    }
}
