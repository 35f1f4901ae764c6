use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ngrid_core::casestudy::CaseStudy;
use ngrid_core::io::{
    load_model, load_scenario, read_feature_rows, read_scores, save_model, write_scenario,
    write_sor,
};
use ngrid_core::metrics::{metric_report, MetricReport, DEFAULT_THRESHOLD};
use ngrid_core::sim::{
    emit_report, run_simulation, sweep_repair_time, ChargePolicy, ExecMode, Scenario,
};
use ngrid_core::sor::{build_sor_table, evaluate, train_with_history, TrainParams};
use ngrid_core::Result;

#[derive(Parser)]
#[command(
    name = "ngrid",
    version,
    about = "Outage-risk simulation for nano-grid fleets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo simulation and write CSV reports.
    Simulate(SimulateArgs),
    /// Rerun a scenario over several repair times.
    Sweep {
        #[command(flatten)]
        run: SimulateArgs,
        /// Comma-separated repair times in hours.
        #[arg(long, value_delimiter = ',', required = true)]
        repair: Vec<f64>,
    },
    /// Check a scenario and its files without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Score a `label,score` file.
    Metrics {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Train, apply or evaluate the SoR model.
    #[command(subcommand)]
    Sor(SorCommand),
    /// Write the bundled case-study scenario files.
    Demo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Override the number of replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the grid-tied BESS charging policy.
    #[arg(long, value_enum)]
    precharge: Option<Precharge>,
    /// Run replications on one thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precharge {
    Full,
    Sor,
}

#[derive(Subcommand)]
enum SorCommand {
    /// Fit boosted stumps to a labeled feature file.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = TrainParams::default().n_stumps)]
        n_stumps: usize,
        #[arg(long, default_value_t = TrainParams::default().learning_rate)]
        learning_rate: f64,
        #[arg(long, default_value_t = TrainParams::default().min_leaf_count)]
        min_leaf: usize,
    },
    /// Write a `feeder_id,hour,probability` table from a feature file.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report metrics of a model on a labeled feature file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

fn print_metrics(r: &MetricReport) {
    println!("roc_auc {:.6}", r.roc_auc);
    println!("f1      {:.6}", r.f1);
    println!("prc_auc {:.6}", r.prc_auc);
    println!("fm      {:.6}", r.fm);
}

fn prepare(args: &SimulateArgs) -> Result<(Scenario, ExecMode)> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(reps) = args.reps {
        scenario.replications = reps;
    }
    if let Some(seed) = args.seed {
        scenario.master_seed = seed;
    }
    match args.precharge {
        Some(Precharge::Full) => scenario.policy = ChargePolicy::Full,
        Some(Precharge::Sor) => scenario.policy = ChargePolicy::sor_default(),
        None => {}
    }
    scenario.validate()?;
    let mode = if args.serial {
        ExecMode::Serial
    } else {
        ExecMode::Parallel
    };
    Ok((scenario, mode))
}

fn simulate(args: &SimulateArgs, repair: &[f64]) -> Result<()> {
    let (scenario, mode) = prepare(args)?;
    let report = run_simulation(&scenario, mode)?;
    let sweep = sweep_repair_time(&scenario, repair, mode)?;
    let files = emit_report(&report, &sweep, &args.out)?;
    println!(
        "{} replications: ENS {:.4} MWh, spilled {:.4} MWh, peak RU {:.1} kW",
        scenario.replications,
        report.total_ens_mwh,
        report.total_spilled_mwh,
        report.max_ru_total_kw
    );
    for row in &sweep {
        println!(
            "repair {:>5.2} h: ENS {:.4} MWh, spilled {:.4} MWh",
            row.repair_hours, row.total_ens_mwh, row.total_spilled_mwh
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn sor(cmd: &SorCommand) -> Result<()> {
    match cmd {
        SorCommand::Train {
            data,
            out,
            n_stumps,
            learning_rate,
            min_leaf,
        } => {
            let rows = read_feature_rows(data)?;
            let params = TrainParams {
                n_stumps: *n_stumps,
                learning_rate: *learning_rate,
                min_leaf_count: *min_leaf,
            };
            let (model, history) = train_with_history(&rows, &params)?;
            save_model(out, &model)?;
            println!(
                "{} stumps, training log-loss {:.6} -> {:.6}",
                model.stumps.len(),
                history[0],
                history[history.len() - 1]
            );
            print_metrics(&evaluate(&model, &rows)?);
            println!("wrote {}", out.display());
        }
        SorCommand::Score { model, data, out } => {
            let model = load_model(model)?;
            let table = build_sor_table(&model, &read_feature_rows(data)?)?;
            write_sor(out, &table)?;
            println!(
                "{} feeders x {} hours, wrote {}",
                table.feeders().len(),
                table.horizon(),
                out.display()
            );
        }
        SorCommand::Eval { model, data } => {
            let model = load_model(model)?;
            print_metrics(&evaluate(&model, &read_feature_rows(data)?)?);
        }
    }
    Ok(())
}

fn demo(out: &Path, reps: Option<usize>) -> Result<()> {
    let mut case = CaseStudy::default();
    if let Some(r) = reps {
        case.replications = r;
    }
    let path = write_scenario(&case.build(), out)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(&args, &[]),
        Command::Sweep { run, repair } => simulate(&run, &repair),
        Command::Validate { scenario } => {
            let s = load_scenario(&scenario)?;
            println!(
                "ok: {} feeders, {} n-grids, {} EVs, {} hours",
                s.fleet.feeders.len(),
                s.fleet.ngrids.len(),
                s.fleet.ev_count(),
                s.horizon
            );
            Ok(())
        }
        Command::Metrics { scores, threshold } => {
            print_metrics(&metric_report(&read_scores(&scores)?, threshold)?);
            Ok(())
        }
        Command::Sor(cmd) => sor(&cmd),
        Command::Demo { out, reps } => demo(&out, reps),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
