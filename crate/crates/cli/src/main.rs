mod config;
mod report;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;
use num_rational::BigRational;
use serde_json::{json, Value};

use prodsv::ensemble::DimensionProfile;
use prodsv::experiment::{
    delta_report, effective_spec, moment_comparison, pooled_esd, residual_grid, residual_report, run_trials,
    TrialOutcome,
};
use prodsv::export::{write_density_csv, write_esd_csv, write_moments_csv, write_residual_csv};
use prodsv::limitlaw::density::x_grid;
use prodsv::limitlaw::{density, support_edge, LimitCdf, LimitLawSpec, Variant};
use prodsv::moments::{moment_report, moments_general_y};

use config::{resolve, Cli, CommandKind, ConfigError, ExperimentConfig};
use report::{numbers, write_json};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<prodsv::Error>() {
        Some(prodsv::Error::BranchLoss { .. }) => 3,
        Some(prodsv::Error::InvalidInput(_)) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    let (kind, flags) = cli.command.split();
    let cfg = resolve(kind, flags)?;
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let started = Instant::now();
    match kind {
        CommandKind::Moments => cmd_moments(&cfg)?,
        CommandKind::Limit => cmd_limit(&cfg)?,
        CommandKind::Simulate => cmd_simulate(&cfg)?,
        CommandKind::Convergence => cmd_convergence(&cfg)?,
        CommandKind::Residual => cmd_residual(&cfg)?,
    }
    // timing stays out of the JSON so outputs are byte-identical across runs
    log::info!("{kind:?} finished in {:.3} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn header(command: &str, cfg: &ExperimentConfig) -> Result<serde_json::Map<String, Value>> {
    let mut map = serde_json::Map::new();
    map.insert("command".into(), json!(command));
    map.insert("config".into(), serde_json::to_value(cfg)?);
    Ok(map)
}

fn out_file(cfg: &ExperimentConfig, name: &str) -> Result<Option<std::io::BufWriter<std::fs::File>>> {
    let Some(dir) = &cfg.out else { return Ok(None) };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(Some(std::io::BufWriter::new(file)))
}

/// Prints the summary and mirrors it to `<out>/<name>` when an output directory is set.
fn emit_summary(cfg: &ExperimentConfig, name: &str, summary: serde_json::Map<String, Value>) -> Result<()> {
    let value = numbers(Value::Object(summary));
    let stdout = std::io::stdout();
    write_json(&mut stdout.lock(), &value)?;
    if let Some(mut file) = out_file(cfg, name)? {
        write_json(&mut file, &value)?;
        file.flush()?;
    }
    Ok(())
}

fn exact_ratios(profile: &DimensionProfile) -> Vec<BigRational> {
    (1..=profile.m())
        .map(|l| {
            let (n, p) = profile.ratio_parts(l);
            BigRational::new(n.into(), p.into())
        })
        .collect()
}

fn cmd_moments(cfg: &ExperimentConfig) -> Result<()> {
    let table = moments_general_y(&cfg.ratios_exact(), cfg.k)?;
    let stdout = std::io::stdout();
    write_moments_csv(&mut stdout.lock(), &table)?;
    if let Some(mut file) = out_file(cfg, "moments.csv")? {
        write_moments_csv(&mut file, &table)?;
        file.flush()?;
    }
    Ok(())
}

fn limit_summary(spec: &LimitLawSpec, cfg: &ExperimentConfig, variant: Variant) -> Result<(LimitCdf, Value)> {
    let grid = x_grid(spec, variant, cfg.grid)?;
    let curve = density(spec, variant, &grid, cfg.vmin, true)?;
    let cdf = LimitCdf::from_curve(&curve)?;
    let summary = json!({
        "edge_lo": curve.edge_lo,
        "edge_hi": curve.edge_hi,
        "grid_points": curve.x.len(),
        "cdf_last": curve.cdf[curve.cdf.len() - 1],
        "cdf_tail_deviation": curve.cdf_tail_deviation,
        "trapezoid_mass": curve.trapezoid_mass,
        "negative_excursions": curve.negative_excursions,
    });
    Ok((cdf, summary))
}

fn cmd_limit(cfg: &ExperimentConfig) -> Result<()> {
    let spec = LimitLawSpec::new(cfg.ratios())?;
    let grid = x_grid(&spec, cfg.variant, cfg.grid)?;
    let curve = density(&spec, cfg.variant, &grid, cfg.vmin, true)?;
    let (lo, hi) = support_edge(&spec)?;
    let mut summary = header("limit", cfg)?;
    summary.insert("support".into(), json!({ "edge_lo": lo, "edge_hi": hi }));
    summary.insert("curve_edges".into(), json!([curve.edge_lo, curve.edge_hi]));
    summary.insert("grid_points".into(), json!(curve.x.len()));
    summary.insert("cdf_last".into(), json!(curve.cdf[curve.cdf.len() - 1]));
    summary.insert("trapezoid_mass".into(), json!(curve.trapezoid_mass));
    summary.insert("negative_excursions".into(), json!(curve.negative_excursions));
    if cfg.variant == Variant::Squares {
        let table = moments_general_y(&cfg.ratios_exact(), cfg.k)?;
        let errors = moment_report(&curve, &table, cfg.k)?;
        summary.insert("moment_relative_errors".into(), json!(errors));
    }
    if let Some(mut file) = out_file(cfg, "density.csv")? {
        write_density_csv(&mut file, &curve)?;
        file.flush()?;
    }
    emit_summary(cfg, "limit.json", summary)
}

struct Simulation {
    profile: DimensionProfile,
    trials: Vec<TrialOutcome>,
    spec: LimitLawSpec,
}

fn simulate(cfg: &ExperimentConfig, profile: DimensionProfile) -> Result<Simulation> {
    let trials = run_trials(&profile, cfg.dist, cfg.truncate, cfg.seed, cfg.trials)?;
    let spec = effective_spec(&profile)?;
    Ok(Simulation { profile, trials, spec })
}

fn size_summary(sim: &Simulation) -> Result<serde_json::Map<String, Value>> {
    let mut map = serde_json::Map::new();
    map.insert("n".into(), json!(sim.profile.n()));
    map.insert("sizes".into(), json!(sim.profile.sizes()));
    map.insert("effective_y".into(), json!(sim.profile.ratios()));
    let taus: Vec<Option<f64>> = sim.trials.iter().map(|t| t.tau).collect();
    map.insert("trial_seeds".into(), json!(sim.trials.iter().map(|t| t.seed).collect::<Vec<_>>()));
    map.insert("truncation_levels".into(), json!(taus));
    Ok(map)
}

fn delta_and_moments(cfg: &ExperimentConfig, sim: &Simulation, map: &mut serde_json::Map<String, Value>) -> Result<()> {
    let (cdf, limit) = limit_summary(&sim.spec, cfg, Variant::Squares)?;
    let delta = delta_report(&sim.trials, &cdf)?;
    let limit_moments = moments_general_y(&exact_ratios(&sim.profile), cfg.k)?.to_f64();
    let rows = moment_comparison(&sim.trials, &limit_moments, cfg.k)?;
    map.insert("limit".into(), limit);
    map.insert("delta".into(), serde_json::to_value(&delta)?);
    map.insert("moments".into(), serde_json::to_value(&rows)?);
    Ok(())
}

fn cmd_simulate(cfg: &ExperimentConfig) -> Result<()> {
    let sim = simulate(cfg, cfg.profile()?)?;
    let mut summary = header("simulate", cfg)?;
    summary.extend(size_summary(&sim)?);
    delta_and_moments(cfg, &sim, &mut summary)?;
    let residual = residual_report(&sim.trials, &sim.profile, &sim.spec, &residual_grid())?;
    summary.insert(
        "residual".into(),
        json!({ "max": residual.max, "mean": residual.mean, "mean_stderr": residual.mean_stderr }),
    );
    if let Some(mut file) = out_file(cfg, "esd.csv")? {
        write_esd_csv(&mut file, &pooled_esd(&sim.trials)?)?;
        file.flush()?;
    }
    emit_summary(cfg, "summary.json", summary)
}

fn cmd_convergence(cfg: &ExperimentConfig) -> Result<()> {
    let ratios = cfg.ratios();
    let mut rows = Vec::new();
    let mut table: Vec<(usize, f64, f64)> = Vec::new();
    for &n in &cfg.n_list {
        let profile = DimensionProfile::from_ratios(n, &ratios)?;
        let sim = simulate(cfg, profile)?;
        let mut row = size_summary(&sim)?;
        delta_and_moments(cfg, &sim, &mut row)?;
        let delta = &row["delta"];
        let pooled = delta["pooled"].as_f64().expect("number");
        let stderr = delta["stderr"].as_f64().expect("number");
        table.push((n, pooled, stderr));
        rows.push(Value::Object(row));
    }
    let nonincreasing = table
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 + 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    let mut summary = header("convergence", cfg)?;
    summary.insert("rows".into(), Value::Array(rows));
    summary.insert("nonincreasing_within_2se".into(), json!(nonincreasing));
    if let Some(mut file) = out_file(cfg, "convergence.csv")? {
        writeln!(file, "n,delta,stderr")?;
        for (n, d, se) in &table {
            writeln!(file, "{n},{},{}", prodsv::export::sig12(*d), prodsv::export::sig12(*se))?;
        }
        file.flush()?;
    }
    emit_summary(cfg, "convergence.json", summary)
}

fn cmd_residual(cfg: &ExperimentConfig) -> Result<()> {
    let sim = simulate(cfg, cfg.profile()?)?;
    let report = residual_report(&sim.trials, &sim.profile, &sim.spec, &residual_grid())?;
    let mut summary = header("residual", cfg)?;
    summary.extend(size_summary(&sim)?);
    summary.insert(
        "residual".into(),
        json!({ "max": report.max, "mean": report.mean, "mean_stderr": report.mean_stderr, "points": report.points.len() }),
    );
    if let Some(mut file) = out_file(cfg, "residual.csv")? {
        write_residual_csv(&mut file, &report.points)?;
        file.flush()?;
    }
    emit_summary(cfg, "residual.json", summary)
}
