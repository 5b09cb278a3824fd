//! `opbench`: command-line front end for the operator-learning benchmark
//! suite. All knobs live in a strict `key = value` config file; every
//! subcommand is deterministic given the same config and seed.

use clap::{Parser, Subcommand};
use opbench::complexity::ArchKind;
use opbench::config::ConfigFile;
use opbench::field::Dataset;
use opbench::harness::{
    evaluate_predictor, generate_dataset, run_sweep, select_cases, split_dataset,
    ExperimentConfig, OodSpec, Problem, ProblemSetup,
};
use opbench::models::{build_model, train, ModelConfig, OperatorModel, TrainConfig};
use opbench::opbl::{read_dataset, write_dataset};
use opbench::{verify, Error};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "opbench",
    version,
    about = "Operator-learning benchmark suite: data generation, training, sweeps, and verification"
)]
struct Cli {
    /// Path to the run config (strict `key = value` file with sections)
    #[arg(short, long, global = true, default_value = "opbench.cfg")]
    config: PathBuf,
    /// Final override of the global seed (after OPBENCH_SEED and the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker cap for sweep cells; execution is sequential regardless, so
    /// results never depend on this value
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a dataset for a generative problem and write it to disk
    GenData,
    /// Train one model on an existing dataset and save a checkpoint
    Train,
    /// Evaluate a saved checkpoint on an existing dataset
    Evaluate,
    /// Run the full (architecture, size, N, seed) experiment matrix
    Sweep,
    /// Summarize the CSV outputs of a previous sweep
    Report,
    /// Run the acceptance criteria and print one pass/fail line each
    Verify,
}

fn exit_code(e: &Error) -> ExitCode {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) => ExitCode::from(1),
        Error::Numeric(_) | Error::ZeroNorm => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

const SECTIONS: &[&str] = &["", "data", "model", "train", "sweep"];
const ROOT_KEYS: &[&str] = &["seed"];
const DATA_KEYS: &[&str] = &[
    "problem",
    "scale",
    "n",
    "points",
    "path",
    "ns_nu",
    "ns_t_final",
    "ns_dt",
    "ns_init_seed",
    "ns_forcing_scale",
    "advection_speed",
    "advection_t_final",
    "helmholtz_frequency",
];
const MODEL_KEYS: &[&str] = &[
    "arch",
    "size",
    "d_u",
    "d_v",
    "fno_block_k1",
    "fno_block_k2",
    "fno_two_block",
    "centered_pca",
    "path",
];
const TRAIN_KEYS: &[&str] = &["epochs", "batch", "lr", "decay", "para_points", "n"];
const SWEEP_KEYS: &[&str] = &[
    "archs",
    "sizes",
    "n_list",
    "seeds",
    "ood",
    "ood_factor",
    "ood_samples",
    "record_walltime",
    "dump_cases",
    "out_dir",
];

fn load_config(path: &PathBuf) -> Result<ConfigFile, Error> {
    let cfg = ConfigFile::load(path)?;
    cfg.check_sections(SECTIONS)?;
    cfg.check_known("", ROOT_KEYS)?;
    cfg.check_known("data", DATA_KEYS)?;
    cfg.check_known("model", MODEL_KEYS)?;
    cfg.check_known("train", TRAIN_KEYS)?;
    cfg.check_known("sweep", SWEEP_KEYS)?;
    Ok(cfg)
}

/// Global seed: config value, overridden by OPBENCH_SEED, overridden by
/// `--seed`.
fn resolve_seed(cfg: &ConfigFile, flag: Option<u64>) -> Result<u64, Error> {
    let mut seed = cfg.parse_or::<u64>("", "seed", 0)?;
    if let Ok(env) = std::env::var("OPBENCH_SEED") {
        seed = env.parse().map_err(|_| {
            Error::InvalidArgument(format!("OPBENCH_SEED is not an integer: '{env}'"))
        })?;
    }
    if let Some(s) = flag {
        seed = s;
    }
    Ok(seed)
}

fn build_setup(cfg: &ConfigFile) -> Result<ProblemSetup, Error> {
    let problem = Problem::parse(cfg.require("data", "problem")?)?;
    let mut setup = match cfg.get("data", "scale").unwrap_or("desk") {
        "desk" => ProblemSetup::desk_scale(problem),
        "paper" => ProblemSetup::paper_scale(problem),
        other => {
            return Err(Error::InvalidArgument(format!(
                "data.scale must be 'desk' or 'paper', got '{other}'"
            )))
        }
    };
    if let Some(v) = cfg.parse_value("data", "points")? {
        setup.points = v;
    }
    if let Some(v) = cfg.parse_value("data", "ns_nu")? {
        setup.ns_nu = v;
    }
    if let Some(v) = cfg.parse_value("data", "ns_t_final")? {
        setup.ns_t_final = v;
    }
    if let Some(v) = cfg.parse_value("data", "ns_dt")? {
        setup.ns_dt = v;
    }
    if let Some(v) = cfg.parse_value("data", "ns_init_seed")? {
        setup.ns_init_seed = v;
    }
    if let Some(v) = cfg.parse_value("data", "ns_forcing_scale")? {
        setup.ns_forcing_scale = v;
    }
    if let Some(v) = cfg.parse_value("data", "advection_speed")? {
        setup.advection_speed = v;
    }
    if let Some(v) = cfg.parse_value("data", "advection_t_final")? {
        setup.advection_t_final = v;
    }
    if let Some(v) = cfg.parse_value("data", "helmholtz_frequency")? {
        setup.helmholtz_frequency = v;
    }
    Ok(setup)
}

fn data_path(cfg: &ConfigFile) -> Result<PathBuf, Error> {
    Ok(PathBuf::from(cfg.require("data", "path")?))
}

fn load_dataset(cfg: &ConfigFile) -> Result<Dataset, Error> {
    let path = data_path(cfg)?;
    read_dataset(&path)
}

fn build_model_config(cfg: &ConfigFile, seed: u64) -> Result<ModelConfig, Error> {
    let arch = ArchKind::parse(cfg.require("model", "arch")?)?;
    let size = cfg
        .parse_value::<usize>("model", "size")?
        .ok_or_else(|| Error::InvalidArgument("missing model.size".into()))?;
    let mut mc = ModelConfig::new(arch, size);
    mc.d_u = cfg.parse_or("model", "d_u", 64)?;
    mc.d_v = cfg.parse_or("model", "d_v", 64)?;
    mc.fno_block = (
        cfg.parse_or("model", "fno_block_k1", 12)?,
        cfg.parse_or("model", "fno_block_k2", 12)?,
    );
    mc.fno_two_block = cfg.parse_or("model", "fno_two_block", false)?;
    mc.centered_pca = cfg.parse_or("model", "centered_pca", true)?;
    mc.seed = seed;
    Ok(mc)
}

fn build_train_config(cfg: &ConfigFile, seed: u64) -> Result<TrainConfig, Error> {
    let mut tc = TrainConfig::default();
    tc.epochs = cfg.parse_or("train", "epochs", tc.epochs)?;
    tc.batch = cfg.parse_or("train", "batch", tc.batch)?;
    tc.lr = cfg.parse_or("train", "lr", tc.lr)?;
    tc.decay = cfg.parse_or("train", "decay", tc.decay)?;
    tc.para_points = cfg.parse_or("train", "para_points", tc.para_points)?;
    tc.seed = seed;
    Ok(tc)
}

fn train_n(cfg: &ConfigFile, dataset_len: usize) -> Result<usize, Error> {
    let default = dataset_len - (dataset_len / 10).max(1);
    cfg.parse_or("train", "n", default)
}

fn model_path(cfg: &ConfigFile) -> Result<PathBuf, Error> {
    Ok(PathBuf::from(cfg.require("model", "path")?))
}

fn cmd_gen_data(cfg: &ConfigFile, seed: u64) -> Result<(), Error> {
    let setup = build_setup(cfg)?;
    let n = cfg
        .parse_value::<usize>("data", "n")?
        .ok_or_else(|| Error::InvalidArgument("missing data.n".into()))?;
    let path = data_path(cfg)?;
    println!(
        "generating {n} {} samples ({} points per dim, master seed {seed})",
        setup.problem.as_str(),
        setup.points
    );
    let ds = generate_dataset(&setup, n, seed)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    write_dataset(&ds, &path)?;
    println!("wrote {} samples to {}", ds.len(), path.display());
    Ok(())
}

fn cmd_train(cfg: &ConfigFile, seed: u64) -> Result<(), Error> {
    let ds = load_dataset(cfg)?;
    let n = train_n(cfg, ds.len())?;
    let (tri, tro, _, _) = split_dataset(&ds, n)?;
    let mc = build_model_config(cfg, seed)?;
    let tc = build_train_config(cfg, seed)?;
    println!(
        "training {} (size {}) on {n} samples for {} epochs",
        mc.kind.as_str(),
        mc.size,
        tc.epochs
    );
    let mut model = build_model(&mc, tri, tro)?;
    let report = train(&mut model, tri, tro, &tc, None)?;
    let path = model_path(cfg)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    model.save(&path)?;
    println!(
        "final training loss {:.6e}; {} parameters; checkpoint {}",
        report.loss_history.last().unwrap(),
        model.param_count_enumerated(),
        path.display()
    );
    Ok(())
}

fn cmd_evaluate(cfg: &ConfigFile) -> Result<(), Error> {
    let ds = load_dataset(cfg)?;
    let model = OperatorModel::load(model_path(cfg)?)?;
    let n = train_n(cfg, ds.len())?;
    let (tri, tro, tei, teo) = split_dataset(&ds, n)?;
    let (train_err, _) = evaluate_predictor(&model, tri, tro)?;
    let (test_err, per_sample) = evaluate_predictor(&model, tei, teo)?;
    let (median_idx, worst_idx) = select_cases(&per_sample)?;
    println!("train error {train_err:.6}");
    println!("test error  {test_err:.6} over {} held-out samples", per_sample.len());
    println!(
        "median case index {median_idx} ({:.6}), worst case index {worst_idx} ({:.6})",
        per_sample[median_idx], per_sample[worst_idx]
    );
    Ok(())
}

fn parse_archs(cfg: &ConfigFile) -> Result<Vec<ArchKind>, Error> {
    cfg.require("sweep", "archs")?
        .split(',')
        .map(|s| ArchKind::parse(s.trim()))
        .collect()
}

fn cmd_sweep(cfg: &ConfigFile, seed: u64) -> Result<(), Error> {
    let setup = build_setup(cfg)?;
    let ds = load_dataset(cfg)?;
    let ood = if cfg.parse_or("sweep", "ood", false)? {
        Some(OodSpec {
            factor: cfg.parse_or("sweep", "ood_factor", 4.0)?,
            samples: cfg.parse_or("sweep", "ood_samples", 32)?,
        })
    } else {
        None
    };
    let ec = ExperimentConfig {
        problem: setup.problem,
        archs: parse_archs(cfg)?,
        sizes: cfg
            .parse_list("sweep", "sizes")?
            .ok_or_else(|| Error::InvalidArgument("missing sweep.sizes".into()))?,
        n_list: cfg
            .parse_list("sweep", "n_list")?
            .ok_or_else(|| Error::InvalidArgument("missing sweep.n_list".into()))?,
        seeds: cfg
            .parse_list("sweep", "seeds")?
            .unwrap_or_else(|| vec![seed]),
        train: build_train_config(cfg, seed)?,
        d_u: cfg.parse_or("model", "d_u", 64)?,
        d_v: cfg.parse_or("model", "d_v", 64)?,
        fno_block: (
            cfg.parse_or("model", "fno_block_k1", 12)?,
            cfg.parse_or("model", "fno_block_k2", 12)?,
        ),
        ood,
        record_walltime: cfg.parse_or("sweep", "record_walltime", false)?,
        dump_cases: cfg.parse_or("sweep", "dump_cases", true)?,
        out_dir: PathBuf::from(cfg.get("sweep", "out_dir").unwrap_or("results")),
    };
    let cells = ec.archs.len() * ec.sizes.len() * ec.n_list.len() * ec.seeds.len();
    println!("running {cells} cells into {}", ec.out_dir.display());
    let out = run_sweep(&ec, &setup, &ds)?;
    println!("wrote {} result rows to {}", out.records.len(), ec.out_dir.join("results.csv").display());
    if let Some((a, p)) = out.power_law {
        println!("FNO cost power law: a = {a:.6}, p = {p:.6}");
    }
    Ok(())
}

fn cmd_report(cfg: &ConfigFile) -> Result<(), Error> {
    let out_dir = PathBuf::from(cfg.get("sweep", "out_dir").unwrap_or("results"));
    let results = out_dir.join("results.csv");
    let text = std::fs::read_to_string(&results)?;
    println!("seed-mean rows from {}:", results.display());
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.contains(",mean,") {
            println!("{line}");
        }
    }
    let pl = out_dir.join("power_law.csv");
    if pl.exists() {
        println!("\npower-law fits:");
        print!("{}", std::fs::read_to_string(&pl)?);
    }
    Ok(())
}

fn cmd_verify() -> ExitCode {
    let results = verify::run_all();
    let mut all_pass = true;
    for r in &results {
        println!("{}", r.line());
        all_pass &= r.passed;
    }
    if all_pass {
        println!("all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!(
            "{} of {} criteria failed",
            results.iter().filter(|r| !r.passed).count(),
            results.len()
        );
        ExitCode::from(3)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(1);
    }
    if let Cmd::Verify = cli.cmd {
        return cmd_verify();
    }
    let run = || -> Result<(), Error> {
        let cfg = load_config(&cli.config)?;
        let seed = resolve_seed(&cfg, cli.seed)?;
        match cli.cmd {
            Cmd::GenData => cmd_gen_data(&cfg, seed),
            Cmd::Train => cmd_train(&cfg, seed),
            Cmd::Evaluate => cmd_evaluate(&cfg),
            Cmd::Sweep => cmd_sweep(&cfg, seed),
            Cmd::Report => cmd_report(&cfg),
            Cmd::Verify => unreachable!(),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
