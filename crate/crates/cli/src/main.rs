//! `pdelab` — configuration-driven training, diagnostics, and evaluation.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pdelab_core::diagnostics::{curves_csv, gradient_sensitivity, landscape_slice};
use pdelab_core::metrics::{centerline_deviation, parse_centerline_csv};
use pdelab_core::mlp::make_filter_normalized_directions;
use pdelab_core::problems::{by_name, problem_names};
use pdelab_core::run::{load_snapshot_context, run_train, TrainConfig};

#[derive(Parser)]
#[command(name = "pdelab", about = "Constrained collocation training for PDE benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file; omit to use the recommended config for --problem.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem name when no config file is given.
    #[arg(long)]
    problem: Option<String>,
    /// Override a config key by dotted path, e.g. --set optimizer.kind=adam.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<TrainConfig> {
        let text = match (&self.config, &self.problem) {
            (Some(path), _) => fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?,
            (None, Some(problem)) => TrainConfig::recommended(problem).to_toml(),
            (None, None) => bail!("provide --config FILE or --problem NAME"),
        };
        let mut value: toml::Value =
            toml::from_str(&text).context("parsing config TOML")?;
        for pair in &self.overrides {
            let (path, raw) = pair
                .split_once('=')
                .with_context(|| format!("override '{pair}' is not KEY=VALUE"))?;
            apply_override(&mut value, path.trim(), raw.trim())?;
        }
        let merged = toml::to_string(&value)?;
        TrainConfig::from_toml(&merged).map_err(|e| anyhow::anyhow!("{e}"))
    }
}

fn apply_override(root: &mut toml::Value, path: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    let mut cur = root;
    for p in &parts[..parts.len() - 1] {
        let table = cur
            .as_table_mut()
            .with_context(|| format!("config path '{path}' crosses a non-table"))?;
        cur = table
            .entry(p.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    let key = parts.last().unwrap().to_string();
    let value = parse_literal(raw);
    let table = cur
        .as_table_mut()
        .with_context(|| format!("config path '{path}' crosses a non-table"))?;
    table.insert(key, value);
    Ok(())
}

/// Parse a bare TOML literal; anything unparsable is taken as a string.
fn parse_literal(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Value>(&doc) {
        Ok(toml::Value::Table(mut t)) if t.contains_key("v") => t.remove("v").unwrap(),
        _ => toml::Value::String(raw.to_string()),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write the run record.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (default: runs/<problem>-<formulation>-s<seed>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Loss-landscape slice around a trained snapshot.
    Landscape {
        /// Run directory containing config.toml and params.f64.
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 51)]
        resolution: usize,
        /// Half-width of the eps range (slice spans [-range, range]).
        #[arg(long, default_value_t = 1.0)]
        range: f64,
        #[arg(long, default_value_t = 0)]
        direction_seed: u64,
        /// Output CSV (default <run>/landscape.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gradient-sensitivity probe of a trained snapshot.
    Sensitivity {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        direction_seed: u64,
        /// Output stem (default <run>/sensitivity).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error norms of a trained snapshot on the evaluation grid.
    Eval {
        #[arg(long)]
        run: PathBuf,
        /// Evaluation grid points per axis.
        #[arg(long)]
        grid: Option<usize>,
        /// Benchmark centerline CSV (columns y,u and/or x,v) for the cavity.
        #[arg(long)]
        centerline_csv: Option<PathBuf>,
    },
    /// List the benchmark problems.
    ListProblems,
    /// Print the resolved default config (per problem when given).
    PrintDefaults {
        #[arg(long, default_value = "convection-diffusion")]
        problem: String,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train { config, out } => {
            let cfg = config.load()?;
            let out = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| {
                PathBuf::from(format!(
                    "runs/{}-{}-s{}",
                    cfg.problem.name, cfg.formulation.kind, cfg.seed
                ))
            });
            let summary = run_train(cfg, &out).map_err(|e| anyhow::anyhow!("{e}"))?;
            println!("run written to {}", summary.out_dir.display());
            println!(
                "  epochs: {} (early stop: {})",
                summary.metrics.epochs_run, summary.metrics.stopped_early
            );
            println!("  final loss: {:.6e}", summary.metrics.final_loss);
            for (field, r) in &summary.metrics.error_norms {
                match r.relative_l2 {
                    Some(er) => println!("  E_r({field}) = {er:.4e}   E_inf = {:.4e}", r.max_abs),
                    None => println!("  E_r({field}) undefined (zero reference)"),
                }
            }
            Ok(())
        }
        Command::Landscape { run, resolution, range, direction_seed, out } => {
            let ctx = load_snapshot_context(&run).map_err(|e| anyhow::anyhow!("{e}"))?;
            let dirs = make_filter_normalized_directions(&ctx.params, direction_seed);
            let slice = landscape_slice(
                &ctx.net,
                &ctx.params,
                &dirs,
                ctx.problem.as_ref(),
                &ctx.points,
                &ctx.form,
                ctx.targets.as_ref(),
                resolution,
                (-range, range),
                (-range, range),
                direction_seed,
            )
            .map_err(|e| anyhow::anyhow!("{e}"))?;
            let path = out.unwrap_or_else(|| run.join("landscape.csv"));
            fs::write(&path, slice.to_csv())?;
            let mid = resolution / 2;
            println!("landscape written to {} ({resolution}x{resolution})", path.display());
            println!("  center loss: {:.6e}", slice.value_at(mid, mid));
            Ok(())
        }
        Command::Sensitivity { run, eps, direction_seed, out } => {
            let ctx = load_snapshot_context(&run).map_err(|e| anyhow::anyhow!("{e}"))?;
            let dirs = make_filter_normalized_directions(&ctx.params, direction_seed);
            let report = gradient_sensitivity(
                &ctx.net,
                &ctx.params,
                &dirs,
                ctx.problem.as_ref(),
                &ctx.points,
                &ctx.form,
                ctx.targets.as_ref(),
                eps,
                direction_seed,
                201,
            )
            .map_err(|e| anyhow::anyhow!("{e}"))?;
            let stem = out.unwrap_or_else(|| run.join("sensitivity"));
            let json_path = stem.with_extension("json");
            let csv_path = stem.with_extension("curves.csv");
            fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
            fs::write(&csv_path, curves_csv(&report.curves))?;
            println!("sensitivity written to {} and {}", json_path.display(), csv_path.display());
            println!(
                "  |grad| before = {:.4e}, after = {:.4e}, ratio = {:.4e}",
                report.grad_norm_before, report.grad_norm_after, report.ratio
            );
            Ok(())
        }
        Command::Eval { run, grid, centerline_csv } => {
            let ctx = load_snapshot_context(&run).map_err(|e| anyhow::anyhow!("{e}"))?;
            let n = grid.unwrap_or_else(|| {
                ctx.config.eval.grid.unwrap_or_else(|| {
                    pdelab_core::metrics::default_eval_grid(ctx.problem.as_ref())
                })
            });
            if ctx.problem.has_exact() {
                let reports = pdelab_core::metrics::evaluate_on_grid(
                    &ctx.net,
                    &ctx.params,
                    ctx.problem.as_ref(),
                    n,
                )
                .map_err(|e| anyhow::anyhow!("{e}"))?;
                for (field, r) in reports {
                    println!(
                        "E_r({field}) = {}   E_inf = {:.4e}   mean_abs = {:.4e}   msq = {:.4e}",
                        r.relative_l2
                            .map(|v| format!("{v:.4e}"))
                            .unwrap_or_else(|| "undefined".into()),
                        r.max_abs,
                        r.mean_abs,
                        r.paper_msq
                    );
                }
            } else {
                println!("problem '{}' has no exact solution", ctx.problem.name());
            }
            if let Some(path) = centerline_csv {
                let data = parse_centerline_csv(&fs::read_to_string(&path)?)
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                let (du, dv) =
                    centerline_deviation(&ctx.net, &ctx.params, &ctx.problem.domain(), &data, n)
                        .map_err(|e| anyhow::anyhow!("{e}"))?;
                println!("centerline max deviation: u = {du:.4e}, v = {dv:.4e}");
            }
            Ok(())
        }
        Command::ListProblems => {
            for name in problem_names() {
                let p = by_name(name, None, None, None, None, false)
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                let params: Vec<String> =
                    p.parameters().iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!(
                    "{name}: unknowns [{}], params [{}], exact solution: {}",
                    p.unknown_names().join(", "),
                    params.join(", "),
                    if p.has_exact() { "yes" } else { "external benchmark" }
                );
            }
            Ok(())
        }
        Command::PrintDefaults { problem } => {
            print!("{}", TrainConfig::recommended(&problem).to_toml());
            Ok(())
        }
    }
}
