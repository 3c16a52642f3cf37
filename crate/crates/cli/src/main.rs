//! `carryover`: value carryover storage, plan against the resulting rules and
//! run rolling simulations from the command line.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use carryover_core::forecast::{
    gmm_cdf, gmm_quantile, synthesize_forecast, GmmForecast, ScalarGmm,
};
use carryover_core::future::{aggregation_gap, sample_box, write_gap_csv, FutureModelConfig};
use carryover_core::mp::{uniform_grid, write_surface_csv, PartitionConfig, ValuationRules};
use carryover_core::planner::{
    default_epsilon, solve_plan, write_schedule_csv, PlanMode, PlanningProblem,
};
use carryover_core::sim::{
    build_rules, generate_case, run_rolling, sample_line, sample_surface, CaseKind, Scenario,
    SimConfig,
};
use carryover_core::system::{validate_system, CascadeSystem};
use carryover_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "carryover",
    version,
    about = "Future value of carryover storage in hydropower cascades"
)]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Output directory.
    #[arg(long, global = true, env = "CARRYOVER_OUT", default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Horizon {
    /// Current-period weeks.
    #[arg(long = "T", default_value_t = 4)]
    t: usize,
    /// Future-period weeks.
    #[arg(long = "L", default_value_t = 4)]
    l: usize,
    /// Minimum fraction of the future period spent discharging.
    #[arg(long, default_value_t = 0.75)]
    omega: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a system file.
    Validate {
        #[arg(long)]
        system: PathBuf,
    },
    /// Partition the future-period model and write valuation rules.
    Value {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        forecast: PathBuf,
        #[command(flatten)]
        horizon: Horizon,
        /// Rules file to write; `<out>/rules.json` by default.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Solve the current-period plan against valuation rules.
    Plan {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        forecast: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long, default_value = "ccp")]
        mode: PlanMode,
        #[arg(long = "T", default_value_t = 4)]
        t: usize,
        /// Start-of-period storage, comma separated; mid-box by default.
        #[arg(long, value_delimiter = ',')]
        initial: Option<Vec<f64>>,
        /// Weekly risk levels, comma separated.
        #[arg(long, value_delimiter = ',')]
        epsilon: Option<Vec<f64>>,
        /// Fixed big-M for the rules embedding.
        #[arg(long)]
        big_m: Option<f64>,
    },
    /// Rolling-horizon simulation on a synthetic case.
    Simulate {
        #[arg(long, default_value = "two_reservoir")]
        case: CaseKind,
        #[arg(long, default_value_t = 52)]
        weeks: usize,
        #[arg(long = "T", default_value_t = 4)]
        t: usize,
        #[arg(long = "L", default_value_t = 4)]
        l: usize,
        /// Defaults to the case's suggestion.
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long, default_value = "ccp")]
        mode: PlanMode,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "normal")]
        scenario: Scenario,
    },
    /// Sample the future-value surface of a rules file.
    Surface {
        #[arg(long)]
        rules: PathBuf,
        /// Points per axis.
        #[arg(long, default_value_t = 41)]
        grid: usize,
        /// Two reservoir indices to sweep.
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        axes: Vec<usize>,
        /// Storage of the other reservoirs; lower bounds by default.
        #[arg(long, value_delimiter = ',')]
        fixed: Option<Vec<f64>>,
    },
    /// Aggregated versus weekly future-period objective on sampled storage.
    Gap {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        forecast: PathBuf,
        #[command(flatten)]
        horizon: Horizon,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Quantiles of a one-dimensional Gaussian mixture.
    Quantile {
        /// Mixture as JSON (`{"beta":..,"mu":..,"var":..}`) or a path to one.
        #[arg(long, conflicts_with = "normal")]
        gmm: Option<String>,
        /// `MEAN,SD` of a single normal.
        #[arg(long, value_delimiter = ',')]
        normal: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
    },
    /// Write a synthetic case: system, forecast and truth process.
    Generate {
        #[arg(long, default_value = "two_reservoir")]
        case: CaseKind,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long = "T", default_value_t = 4)]
        t: usize,
        #[arg(long = "L", default_value_t = 4)]
        l: usize,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invalid(_) | Error::Domain(_) | Error::Infeasible(_) => 1,
        Error::Io { .. } | Error::Parse(_) => 2,
        Error::Numeric(_) | Error::Resource(_) | Error::Solver(_) => 3,
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn load(system: &Path, forecast: &Path) -> Result<(CascadeSystem, GmmForecast<f64>), Error> {
    let sys = CascadeSystem::read(system)?;
    let f = GmmForecast::read(forecast)?;
    if f.reservoirs.len() != sys.len() {
        return Err(Error::Domain(format!(
            "forecast has {} reservoirs, system has {}",
            f.reservoirs.len(),
            sys.len()
        )));
    }
    Ok((sys, f))
}

fn future_config(h: &Horizon) -> Result<FutureModelConfig, Error> {
    let cfg = FutureModelConfig {
        omega: h.omega,
        ..FutureModelConfig::with_l(h.l)
    };
    cfg.validate()?;
    Ok(cfg)
}

fn print(json: bool, value: serde_json::Value, text: impl FnOnce() -> String) {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&value).expect("json prints")
        );
    } else {
        println!("{}", text());
    }
}

/// Exit status on success paths; errors map through `exit_code`.
fn run(cli: Cli) -> Result<u8, Error> {
    let out = cli.out.clone();
    match cli.command {
        Command::Validate { system } => {
            let text = std::fs::read_to_string(&system).map_err(|e| Error::io(&system, e))?;
            let sys: CascadeSystem = serde_json::from_str(&text)?;
            let v = validate_system(&sys);
            if v.is_empty() {
                print(cli.json, json!({"valid": true, "violations": []}), || {
                    format!("{}: valid ({} reservoirs)", system.display(), sys.len())
                });
                Ok(0)
            } else {
                let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                if cli.json {
                    print(
                        true,
                        json!({"valid": false, "violations": list}),
                        String::new,
                    );
                } else {
                    for l in &list {
                        eprintln!("{l}");
                    }
                }
                Ok(exit_code(&Error::Invalid(v)))
            }
        }
        Command::Value {
            system,
            forecast,
            horizon,
            rules,
        } => {
            let (sys, f) = load(&system, &forecast)?;
            let cfg = future_config(&horizon)?;
            let start = Instant::now();
            let (r, stats) = build_rules(&sys, &f, horizon.t, &cfg, &PartitionConfig::default())?;
            let wall = start.elapsed().as_secs_f64();
            // exhaustiveness self-check on at most ~10k grid points
            let n = sys.len();
            let per = ((10_000f64).powf(1.0 / n as f64).floor() as usize).max(2);
            let cov = r.coverage(&uniform_grid(&r.v_min, &r.v_max, per));
            if !cov.exact() {
                return Err(Error::Numeric(format!(
                    "partition self-check failed: {} uncovered, {} overlapping of {}",
                    cov.uncovered, cov.overlapping, cov.points
                )));
            }
            let path = rules.unwrap_or_else(|| out.join("rules.json"));
            r.write(&path)?;
            let pis: Vec<_> = r
                .regions
                .iter()
                .map(|g| json!({"id": g.id, "pi": g.pi}))
                .collect();
            print(
                cli.json,
                json!({
                    "rules": path.display().to_string(),
                    "regions": r.regions.len(),
                    "wall_time_s": wall,
                    "coverage_points": cov.points,
                    "dual_degenerate_regions": stats.dual_degenerate_regions,
                    "pi": pis,
                }),
                || {
                    let ids: Vec<&str> = sys.reservoirs.iter().map(|x| x.id.as_str()).collect();
                    let mut s = format!(
                        "{} regions in {wall:.2} s, coverage exact on {} points\nrules written to {}\nregion  {}",
                        r.regions.len(),
                        cov.points,
                        path.display(),
                        ids.join("  ")
                    );
                    for g in &r.regions {
                        let row: Vec<String> = g.pi.iter().map(|p| format!("{p:.4}")).collect();
                        s.push_str(&format!("\n{:>6}  {}", g.id, row.join("  ")));
                    }
                    s
                },
            );
            Ok(0)
        }
        Command::Plan {
            system,
            forecast,
            rules,
            mode,
            t,
            initial,
            epsilon,
            big_m,
        } => {
            let (sys, f) = load(&system, &forecast)?;
            if f.horizon() < t {
                return Err(Error::Domain(format!(
                    "forecast covers {} weeks, need {t}",
                    f.horizon()
                )));
            }
            let r = ValuationRules::read(&rules)?;
            let init = initial.unwrap_or_else(|| {
                sys.reservoirs
                    .iter()
                    .map(|x| 0.5 * (x.v_min + x.v_max))
                    .collect()
            });
            let mut p = PlanningProblem::new(sys, t, init, f.head(t), r, mode);
            p.epsilon = epsilon.unwrap_or_else(|| default_epsilon(t));
            p.big_m = big_m;
            let plan = solve_plan(&p)?;
            write_text(&out.join("plan.json"), &plan.to_json())?;
            write_schedule_csv(&plan.schedule, create(&out.join("schedule.csv"))?)?;
            print(
                cli.json,
                serde_json::to_value(&plan).expect("plan serializes"),
                || {
                    format!(
                        "targets {:?}\nimmediate {:.3} MWh, future {:.3} MWh, region {}\nwritten plan.json and schedule.csv to {}",
                        plan.targets,
                        plan.immediate_mwh,
                        plan.future_mwh,
                        plan.region_id,
                        out.display()
                    )
                },
            );
            Ok(0)
        }
        Command::Simulate {
            case,
            weeks,
            t,
            l,
            omega,
            mode,
            seed,
            scenario,
        } => {
            let c = generate_case(case, seed);
            let cfg = SimConfig {
                horizon: weeks,
                t,
                l,
                omega: omega.unwrap_or(c.omega),
                seed,
                scenario,
                mode,
                initial_storage: Some(c.initial_storage.clone()),
                ..SimConfig::default()
            };
            let report = run_rolling(&c.system, &c.truth, &cfg)?;
            write_text(&out.join("sim_report.json"), &report.to_json())?;
            report.write_csv(create(&out.join("sim_report.csv"))?)?;
            print(
                cli.json,
                json!({
                    "seed": report.seed,
                    "config_hash": report.config_hash,
                    "cycles": report.cycles.len(),
                    "total_immediate_mwh": report.total_immediate_mwh,
                    "total_planned_mwh": report.total_planned_mwh,
                    "final_storage": report.final_storage,
                    "final_future_mwh": report.final_future_mwh,
                }),
                || {
                    format!(
                        "{} cycles, {:.3} MWh generated (planned {:.3}), final storage {:?}",
                        report.cycles.len(),
                        report.total_immediate_mwh,
                        report.total_planned_mwh,
                        report.final_storage
                    )
                },
            );
            Ok(0)
        }
        Command::Surface {
            rules,
            grid,
            axes,
            fixed,
        } => {
            let r = ValuationRules::read(&rules)?;
            let fixed = fixed.unwrap_or_else(|| r.v_min.clone());
            let points = if r.dim() == 1 {
                sample_line(&r, 0, grid, &fixed)?
            } else {
                if axes.len() != 2 {
                    return Err(Error::Domain("--axes needs two reservoir indices".into()));
                }
                sample_surface(&r, axes[0], axes[1], grid, &fixed)?
            };
            let path = out.join("surface.csv");
            write_surface_csv(&points, create(&path)?)?;
            let max = points
                .iter()
                .map(|p| p.f_mwh)
                .fold(f64::NEG_INFINITY, f64::max);
            print(
                cli.json,
                json!({"surface": path.display().to_string(), "points": points.len(), "max_f_mwh": max}),
                || format!("{} points written to {}", points.len(), path.display()),
            );
            Ok(0)
        }
        Command::Gap {
            system,
            forecast,
            horizon,
            samples,
            seed,
        } => {
            let (sys, f) = load(&system, &forecast)?;
            let cfg = future_config(&horizon)?;
            let thetas = sample_box(&sys, samples, seed);
            let stats = aggregation_gap(&sys, &f, horizon.t, &cfg, &thetas)?;
            let path = out.join("gap.csv");
            write_gap_csv(&stats, create(&path)?)?;
            print(
                cli.json,
                json!({
                    "samples": stats.samples.len(),
                    "skipped": stats.skipped,
                    "min_pct": stats.min,
                    "mean_pct": stats.mean,
                    "max_pct": stats.max,
                    "csv": path.display().to_string(),
                }),
                || {
                    format!(
                        "gap over {} samples: min {:.6}%, mean {:.6}%, max {:.6}% ({} skipped)",
                        stats.samples.len(),
                        stats.min,
                        stats.mean,
                        stats.max,
                        stats.skipped
                    )
                },
            );
            Ok(0)
        }
        Command::Quantile { gmm, normal, p } => {
            let g: ScalarGmm<f64> = match (gmm, normal) {
                (Some(s), _) => {
                    let text = if Path::new(&s).exists() {
                        std::fs::read_to_string(&s).map_err(|e| Error::io(&s, e))?
                    } else {
                        s
                    };
                    serde_json::from_str(&text)?
                }
                (None, Some(v)) if v.len() == 2 => ScalarGmm::normal(v[0], v[1]),
                (None, Some(_)) => return Err(Error::Domain("--normal takes MEAN,SD".into())),
                (None, None) => return Err(Error::Domain("give --gmm or --normal".into())),
            };
            g.validate()?;
            let mut rows = Vec::with_capacity(p.len());
            for &level in &p {
                let q = gmm_quantile(&g, level)?;
                rows.push((level, q, gmm_cdf(&g, q)));
            }
            print(
                cli.json,
                json!(rows
                    .iter()
                    .map(|(p, q, c)| json!({"p": p, "quantile": q, "cdf": c}))
                    .collect::<Vec<_>>()),
                || {
                    rows.iter()
                        .map(|(p, q, _)| format!("{p}\t{q:.9}"))
                        .collect::<Vec<_>>()
                        .join("\n")
                },
            );
            Ok(0)
        }
        Command::Generate { case, seed, t, l } => {
            let c = generate_case(case, seed);
            let f = synthesize_forecast(seed, &c.system, t, l, &c.truth.profile);
            write_text(&out.join("system.json"), &c.system.to_json())?;
            write_text(&out.join("forecast.json"), &f.to_json(Some(&c.system)))?;
            write_text(
                &out.join("case.json"),
                &serde_json::to_string_pretty(&c).expect("case serializes"),
            )?;
            print(
                cli.json,
                json!({
                    "system": out.join("system.json").display().to_string(),
                    "forecast": out.join("forecast.json").display().to_string(),
                    "case": out.join("case.json").display().to_string(),
                    "initial_storage": c.initial_storage,
                }),
                || {
                    format!(
                        "wrote system.json, forecast.json and case.json to {}",
                        out.display()
                    )
                },
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            if json {
                println!("{}", json!({"error": e.to_string(), "code": exit_code(&e)}));
            }
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
