use std::io::BufRead;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use serde_json::json;

use pt_privacy::collector;
use pt_privacy::experiments::{self, Assertion, HeteroWhich, SweepRecord};
use pt_privacy::solver;

use crate::config::RunConfig;
use crate::{CliError, SweepKind, WhichArg};

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<(), CliError> {
    let market = &cfg.market;
    let grid_points = cfg.experiment.solve.grid_points;
    let closed = solver::solve_closed_form(market);
    let poly = solver::solve_poly_root(market).map_err(|e| CliError::Solver(e.to_string()))?;
    let exhaustive = solver::solve_exhaustive(market, grid_points)
        .map_err(|e| CliError::Solver(e.to_string()))?;

    let closed_json = match &closed {
        Ok(result) => serde_json::to_value(result).expect("result serializes"),
        Err(reason) => json!({ "not_applicable": reason.to_string() }),
    };
    let closed_vs_poly = closed
        .as_ref()
        .ok()
        .map(|c| relative_gap(c.eps_star, poly.eps_star));
    let output = json!({
        "closed_form": closed_json,
        "poly_root": poly,
        "exhaustive": exhaustive,
        "gaps": {
            "closed_vs_poly": closed_vs_poly,
            "poly_vs_exhaustive": relative_gap(poly.eps_star, exhaustive.eps_star),
        },
    });
    let rendered = serde_json::to_string_pretty(&output).expect("json renders");
    println!("{rendered}");
    if let Some(dir) = &cfg.output_path {
        let path = Path::new(dir);
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, format!("{rendered}\n"))?;
    }
    Ok(())
}

/// `solve --roster`: exact optimum over an imported population. The CSV
/// carries no discretization granularity, so the configured `pt.m` applies
/// to every imported individual.
pub fn cmd_solve_roster(cfg: &RunConfig, roster_path: &Path) -> Result<(), CliError> {
    let file = std::fs::File::open(roster_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", roster_path.display())))?;
    let roster =
        pt_privacy::population::read_roster_csv(std::io::BufReader::new(file), cfg.market.pt.m)
            .map_err(|e| CliError::Config(e.to_string()))?;
    let solved = solver::solve_roster(&roster, &cfg.market, cfg.experiment.solve.grid_points)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let output = json!({
        "roster_size": roster.len(),
        "roster_exact": solved,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&output).expect("json renders")
    );
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    config_digest: String,
    assertions: &'a [Assertion],
    artifacts: Vec<String>,
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    PathBuf::from(cfg.output_path.clone().unwrap_or_else(|| ".".into()))
}

fn run_sweep(
    cfg: &RunConfig,
    kind: SweepKind,
    which: HeteroWhich,
) -> Result<(String, Vec<SweepRecord>, Vec<Assertion>), CliError> {
    let market = &cfg.market;
    let exp = &cfg.experiment;
    match kind {
        SweepKind::Gap => {
            let records = experiments::approximation_gap_sweep(
                market,
                &exp.gap.n_values,
                exp.gap.grid_points,
            )?;
            let assertions = experiments::assess_gap(&records);
            Ok(("gap".into(), records, assertions))
        }
        SweepKind::Pt => {
            let records = experiments::pt_parameter_sweep(
                market,
                &exp.pt.lambdas,
                &exp.pt.betas,
                exp.pt.grid_points,
            )?;
            let assertions = experiments::assess_pt_sweep(&records);
            Ok(("pt".into(), records, assertions))
        }
        SweepKind::Refpoint => {
            let refpoint_market = pt_privacy::collector::MarketConfig {
                ref_weighting: exp.refpoint.weighting,
                ..*market
            };
            let records = experiments::reference_point_sweep(
                &refpoint_market,
                exp.refpoint.eps_ref,
                &exp.refpoint.lambdas,
                &exp.refpoint.betas,
                exp.refpoint.grid_points,
            )?;
            let assertions = experiments::assess_reference_point(
                &refpoint_market,
                exp.refpoint.eps_ref,
                &records,
            )?;
            Ok(("refpoint".into(), records, assertions))
        }
        SweepKind::Mismatch => {
            let records = experiments::mismatch_sweep(
                market,
                &exp.mismatch.lambdas,
                &exp.mismatch.betas,
                exp.mismatch.grid_points,
            )?;
            let assertions = experiments::assess_mismatch(&records);
            Ok(("mismatch".into(), records, assertions))
        }
        SweepKind::Hetero => {
            let hetero_market = exp.hetero.resolved_market(which);
            hetero_market
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let records = experiments::hetero_variance_sweep(
                &hetero_market,
                which,
                &exp.hetero.resolved_variances(which),
                exp.hetero.reps,
                cfg.seed,
                exp.hetero.grid_points,
            )?;
            let assertions = experiments::assess_hetero(&records);
            let name = match which {
                HeteroWhich::Lambda => "hetero_lambda",
                HeteroWhich::Beta => "hetero_beta",
            };
            Ok((name.into(), records, assertions))
        }
    }
}

pub fn cmd_sweep(
    cfg: &RunConfig,
    kind: SweepKind,
    which: WhichArg,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let which = match which {
        WhichArg::Lambda => HeteroWhich::Lambda,
        WhichArg::Beta => HeteroWhich::Beta,
    };
    let (name, records, assertions) = match jobs {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Solver(format!("worker pool: {e}")))?;
            pool.install(|| run_sweep(cfg, kind, which))?
        }
        _ => run_sweep(cfg, kind, which)?,
    };

    let dir = out_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    let csv_name = format!("{name}.csv");
    std::fs::write(dir.join(&csv_name), experiments::records_to_csv(&records))?;
    let summary = Summary {
        config_digest: cfg.digest(),
        assertions: &assertions,
        artifacts: vec![csv_name],
    };
    let rendered = serde_json::to_string_pretty(&summary).expect("summary renders");
    std::fs::write(
        dir.join(format!("{name}_summary.json")),
        format!("{rendered}\n"),
    )?;
    println!("{rendered}");

    let failed: Vec<&Assertion> = assertions.iter().filter(|a| !a.pass).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<&str> = failed.iter().map(|a| a.name.as_str()).collect();
        Err(CliError::AssertionFailed(format!(
            "{} of {} assertions failed: {}",
            failed.len(),
            assertions.len(),
            names.join(", ")
        )))
    }
}

fn read_data_column(path: &Path) -> Result<Vec<f64>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let mut values = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(CliError::from)?;
        let text = line.trim().trim_end_matches('\r');
        if text.is_empty() {
            continue;
        }
        match text.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if idx == 0 && text.eq_ignore_ascii_case("value") => continue,
            Err(e) => {
                return Err(CliError::Config(format!(
                    "bad data value `{text}` on line {}: {e}",
                    idx + 1
                )))
            }
        }
    }
    Ok(values)
}

pub fn cmd_noise_demo(
    cfg: &RunConfig,
    data_path: &Path,
    eps: f64,
    trials: Option<u64>,
) -> Result<(), CliError> {
    let data = read_data_column(data_path)?;
    let demo = collector::laplace_noise_demo(&data, eps, cfg.seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut output = json!({
        "n": data.len(),
        "eps": eps,
        "scale": demo.scale,
        "true_mean": demo.true_mean,
        "noisy_mean": demo.noisy_mean,
    });
    if let Some(trials) = trials {
        if trials < 2 {
            return Err(CliError::Config(format!(
                "invalid trials: need >= 2, got {trials}"
            )));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..trials {
            let draw = collector::laplace_sample(&mut rng, demo.scale);
            sum += draw;
            sum_sq += draw * draw;
        }
        let n = trials as f64;
        let mean = sum / n;
        let empirical = (sum_sq - n * mean * mean) / (n - 1.0);
        let n_data = data.len() as f64;
        let predicted = 2.0 / (n_data * n_data * eps * eps);
        output["trials"] = json!({
            "count": trials,
            "noise_mean": mean,
            "empirical_variance": empirical,
            "predicted_variance": predicted,
            "ratio": empirical / predicted,
        });
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&output).expect("json renders")
    );
    Ok(())
}
