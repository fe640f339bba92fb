//! Runs a parsed configuration and writes its reports.

use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, Subcommand};
use crate::error::{KacError, Result};
use crate::experiments::{
    bounds_audit, constant_rows, counterexample_study, moment_check, relax_study, MomentRow,
};
use crate::initial_data::InitialDatum;
use crate::mckean::{sample_power_sums, RngStream};
use crate::report::{density_table, real, LinePlot, OutputDir, Table};
use crate::wild::{invert_with, solve_cf_times};

/// What a run produced: files written and remarks for the terminal.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

/// Executes `config`; relative `grid_path`s resolve against `base_dir`.
/// Reports are written before any quality failure is returned.
pub fn run(config: &ExperimentConfig, base_dir: &Path) -> Result<RunOutcome> {
    let mut out = OutputDir::create(&config.out_dir)?;
    let mut notes = Vec::new();
    let datum = config.datum.as_ref().map(|d| d.build(base_dir)).transpose()?;
    let status = match config.subcommand {
        Subcommand::Solve => run_solve(config, need(&datum)?, &mut out),
        Subcommand::RelaxRate => run_relax(config, need(&datum)?, &mut out, &mut notes),
        Subcommand::MomentCheck => run_moments(config, &mut out, &mut notes),
        Subcommand::BoundsAudit => run_audit(config, datum.as_ref(), &mut out),
        Subcommand::Counterexample => run_counterexample(config, need(&datum)?, &mut out, &mut notes),
    };
    status.map(|()| RunOutcome {
        files: out.written().to_vec(),
        notes,
    })
}

fn need(d: &Option<InitialDatum>) -> Result<&InitialDatum> {
    d.as_ref().ok_or_else(|| KacError::Config {
        line: 0,
        key: "datum".into(),
        message: "a [datum] section is required".into(),
    })
}

fn t_label(t: f64) -> String {
    format!("{t}")
}

fn run_solve(config: &ExperimentConfig, datum: &InitialDatum, out: &mut OutputDir) -> Result<()> {
    let solver = config.solver.resolve(datum);
    let sols = solve_cf_times(datum, &config.times, &solver)?;
    let sigma = datum.sigma().filter(|s| s.is_finite()).unwrap_or(1.0);
    let v_max = config.inversion.v_max_for(sigma);
    let opts = config.inversion.options();
    let mut summary = Table::new(["t", "truncation_N", "tail_bound", "steps", "m2", "m4"]);
    let mut plot = LinePlot::new("density", "v", "f(v, t)", false);
    for sol in &sols {
        out.write(&format!("cf_t{}.csv", t_label(sol.t)), &sol.to_csv())?;
        summary.push(vec![
            real(sol.t),
            sol.truncation_n.to_string(),
            real(sol.tail_bound),
            sol.steps.to_string(),
            real(sol.cf.second_moment_at_zero()),
            real(sol.cf.fourth_moment_at_zero()),
        ]);
    }
    out.write_table("solve_summary.csv", &summary)?;
    if !datum.has_density() {
        return Ok(());
    }
    for sol in &sols {
        let f = invert_with(&sol.cf, v_max, config.inversion.n_v, &opts)?;
        out.write_table(&format!("density_t{}.csv", t_label(sol.t)), &density_table(&f))?;
        plot.add(
            &format!("t = {}", sol.t),
            (0..f.n_points()).map(|i| (f.v(i), f.values()[i])).collect(),
        );
    }
    if config.emit_svg {
        out.write("density.svg", &plot.to_svg())?;
    }
    Ok(())
}

fn run_relax(
    config: &ExperimentConfig,
    datum: &InitialDatum,
    out: &mut OutputDir,
    notes: &mut Vec<String>,
) -> Result<()> {
    let solver = config.solver.resolve(datum);
    let study = relax_study(datum, &config.times, &solver, &config.inversion, config.analysis.floor_factor)?;
    let mut table = Table::new([
        "t",
        "l1_distance",
        "h1_bound",
        "theorem_bound",
        "tail_bound",
        "beurling_holds",
    ]);
    for r in &study.rows {
        table.push(vec![
            real(r.t),
            real(r.l1_distance),
            real(r.h1_bound),
            real(r.theorem_bound),
            real(r.tail_bound),
            r.beurling_holds.to_string(),
        ]);
    }
    out.write_table("relax_rate.csv", &table)?;
    let mut fit_table = Table::new(["rate", "log_intercept", "r_squared", "points_used", "floor"]);
    match &study.fit {
        Ok(f) => {
            fit_table.push(vec![
                real(f.rate),
                real(f.log_intercept),
                real(f.r_squared),
                f.points_used.to_string(),
                real(study.floor),
            ]);
            notes.push(format!("fitted rate {:.6} (r^2 = {:.6})", f.rate, f.r_squared));
        }
        Err(e) => notes.push(format!("no rate fit: {e}")),
    }
    out.write_table("rate_fit.csv", &fit_table)?;
    match &study.constant {
        Ok(c) => {
            let mut t = Table::new(["name", "value"]);
            for (name, v) in constant_rows(c) {
                t.push(vec![name.into(), real(v)]);
            }
            out.write_table("constant.csv", &t)?;
        }
        Err(e) => notes.push(format!("theorem constant unavailable: {e}")),
    }
    if config.emit_svg {
        let mut plot = LinePlot::new("distance to equilibrium", "t", "distance", true);
        plot.add("l1_distance", study.rows.iter().map(|r| (r.t, r.l1_distance)).collect());
        plot.add("h1_bound", study.rows.iter().map(|r| (r.t, r.h1_bound)).collect());
        out.write("relax_rate.svg", &plot.to_svg())?;
    }
    if let Some(r) = study.rows.iter().find(|r| !r.beurling_holds) {
        return Err(KacError::numerical(
            format!("Beurling excess sqrt2*l1 - h1 at t = {}", r.t),
            2f64.sqrt() * (r.l1_distance - r.h1_bound),
            1e-6,
        ));
    }
    if let Some(r) = study.bound_violation() {
        return Err(KacError::numerical(
            format!("l1 distance above C e^(-t/4) at t = {}", r.t),
            r.l1_distance,
            r.theorem_bound,
        ));
    }
    Ok(())
}

fn moment_table(rows: &[MomentRow], conditional: bool) -> Table {
    let key = if conditional { "n" } else { "t" };
    let mut t = Table::new([key, "m", "trials", "mc_mean", "std_error", "closed_form", "z_score", "within_3se"]);
    for r in rows {
        t.push(vec![
            if conditional { r.n.to_string() } else { real(r.t) },
            real(r.stats.m),
            r.stats.trials.to_string(),
            real(r.stats.mean_power_sum),
            real(r.stats.std_error),
            real(r.closed_form),
            real(r.z_score()),
            r.within_3se().to_string(),
        ]);
    }
    t
}

fn run_moments(config: &ExperimentConfig, out: &mut OutputDir, notes: &mut Vec<String>) -> Result<()> {
    let a = &config.analysis;
    let (uncond, cond) = moment_check(a.m, &config.times, a.max_n, config.trials, config.seed)?;
    out.write_table("moment_check.csv", &moment_table(&uncond, false))?;
    out.write_table("moment_check_conditional.csv", &moment_table(&cond, true))?;
    let misses = uncond.iter().chain(&cond).filter(|r| !r.within_3se()).count();
    if misses > 0 {
        notes.push(format!("{misses} rows outside 3 standard errors"));
    }
    if config.dump_samples {
        for (i, &t) in config.times.iter().enumerate() {
            let samples = sample_power_sums(a.m, t, config.trials, &RngStream::new(config.seed, i as u64))?;
            let mut table = Table::new(["trial", "nu", "value"]);
            for (trial, nu, v) in samples {
                table.push(vec![trial.to_string(), nu.to_string(), real(v)]);
            }
            out.write_table(&format!("samples_t{}.csv", t_label(t)), &table)?;
        }
    }
    if config.emit_svg {
        let mut plot = LinePlot::new("weight power sums", "t", "E sum |pi|^m", true);
        plot.add("monte_carlo", uncond.iter().map(|r| (r.t, r.stats.mean_power_sum)).collect());
        plot.add("closed_form", uncond.iter().map(|r| (r.t, r.closed_form)).collect());
        out.write("moment_check.svg", &plot.to_svg())?;
    }
    Ok(())
}

fn run_audit(config: &ExperimentConfig, datum: Option<&InitialDatum>, out: &mut OutputDir) -> Result<()> {
    let label = datum.map(|d| d.family().name());
    let audit = bounds_audit(label.zip(datum))?;
    let mut table = Table::new(["quantity", "value", "bound", "margin", "pass"]);
    for r in &audit.rows {
        table.push(vec![
            r.quantity.clone(),
            real(r.value),
            real(r.bound),
            real(r.margin()),
            r.pass().to_string(),
        ]);
    }
    out.write_table("bounds_audit.csv", &table)?;
    if let Some((_, c)) = &audit.constant {
        let mut t = Table::new(["name", "value"]);
        for (name, v) in constant_rows(c) {
            t.push(vec![name.into(), real(v)]);
        }
        out.write_table("constant.csv", &t)?;
    }
    if config.emit_svg {
        let mut plot = LinePlot::new("audit margins", "row", "margin", false);
        plot.add("margin", audit.rows.iter().enumerate().map(|(i, r)| (i as f64, r.margin())).collect());
        out.write("bounds_audit.svg", &plot.to_svg())?;
    }
    match audit.first_failure() {
        Some(r) => Err(KacError::numerical(r.quantity.clone(), r.value, r.bound)),
        None => Ok(()),
    }
}

fn run_counterexample(
    config: &ExperimentConfig,
    datum: &InitialDatum,
    out: &mut OutputDir,
    notes: &mut Vec<String>,
) -> Result<()> {
    let solver = config.solver.resolve(datum);
    let a = &config.analysis;
    let study = counterexample_study(datum, &config.times, &solver, a.xi_star, a.floor_factor)?;
    let mut table = Table::new(["t", "cf_deviation", "tail_bound"]);
    for &(t, d, tail) in &study.rows {
        table.push(vec![real(t), real(d), real(tail)]);
    }
    out.write_table("counterexample.csv", &table)?;
    let mut fit = Table::new([
        "beta",
        "xi_star",
        "fitted_rate",
        "predicted_rate",
        "r_squared",
        "points_used",
        "slower_than_quarter",
    ]);
    fit.push(vec![
        real(study.beta),
        real(study.xi_star),
        real(study.fit.rate),
        real(study.predicted_rate),
        real(study.fit.r_squared),
        study.fit.points_used.to_string(),
        study.slower_than_quarter().to_string(),
    ]);
    out.write_table("counterexample_fit.csv", &fit)?;
    notes.push(format!(
        "fitted rate {:.6}, predicted {:.6}{}",
        study.fit.rate,
        study.predicted_rate,
        if study.slower_than_quarter() { ", slower than 1/4" } else { "" }
    ));
    if config.emit_svg {
        let mut plot = LinePlot::new("cf deviation at xi*", "t", "deviation", true);
        plot.add("deviation", study.rows.iter().map(|r| (r.0, r.1)).collect());
        out.write("counterexample.svg", &plot.to_svg())?;
    }
    Ok(())
}
