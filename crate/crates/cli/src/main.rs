use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use gradtape::checkpoint::Checkpoint;
use triplet_core::datapipe::{write_dataset, SynthSpec};
use triplet_core::harness::{ablate, evaluate, train, RunConfig};
use triplet_core::model::TripletModel;
use triplet_core::table::Table;

#[derive(Parser)]
#[command(
    name = "triplet",
    version,
    about = "Surgical action-triplet recognition with temporal attention"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// run configuration (TOML); for `synth`, a synthetic dataset spec
    #[arg(long)]
    config: Option<PathBuf>,
    /// overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// assemble batches inline so runs are bit-reproducible
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train from the seeded initialization and write checkpoint.bin
    Train(Common),
    /// Score the evaluation data with a checkpoint
    Eval {
        #[command(flatten)]
        common: Common,
        /// weights to evaluate; defaults to <out>/checkpoint.bin
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train and evaluate every variant of the configured ablation grid
    Ablate(Common),
    /// Write a synthetic dataset in the on-disk layout
    Synth(Common),
}

fn run_config(c: &Common) -> Result<RunConfig> {
    let path = c
        .config
        .as_deref()
        .ok_or_else(|| triplet_core::Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.deterministic |= c.deterministic;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|e| triplet_core::Error::io(&p, e))?;
    Ok(())
}

fn write_table(dir: &Path, stem: &str, t: &Table) -> Result<()> {
    write(dir, &format!("{stem}.csv"), &t.to_csv())?;
    write(dir, &format!("{stem}.txt"), &t.to_text())
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| triplet_core::Error::io(dir, e))?;
    Ok(())
}

fn cmd_train(c: &Common) -> Result<()> {
    let cfg = run_config(c)?;
    let data = cfg.train_data()?;
    mkdir(&c.out)?;
    write(&c.out, "config.toml", &cfg.to_text())?;
    let out = train(&cfg, &data, Some(&c.out))?;
    let t = out.log.table();
    write_table(&c.out, "train_log", &t)?;
    print!("{}", t.to_text());
    Ok(())
}

fn cmd_eval(c: &Common, checkpoint: Option<&Path>) -> Result<()> {
    let cfg = run_config(c)?;
    let path = checkpoint.map_or_else(|| c.out.join("checkpoint.bin"), Path::to_path_buf);
    let ckpt = Checkpoint::read(&path)
        .map_err(|e| triplet_core::Error::io(&path, e))?
        .map_err(triplet_core::Error::from)?;
    let (model, digest) = TripletModel::<f32>::from_checkpoint(&ckpt)?;
    let data = cfg.eval_data()?;
    let out = evaluate(&model, &digest, &data, cfg.batch, Some(&c.out))?;
    print!("{}", out.report.summary_table().to_text());
    Ok(())
}

fn cmd_ablate(c: &Common) -> Result<()> {
    let cfg = run_config(c)?;
    let (train_data, eval_data) = (cfg.train_data()?, cfg.eval_data()?);
    let table = ablate(&cfg, &cfg.ablation, &train_data, &eval_data, Some(&c.out))?;
    print!("{}", table.table().to_text());
    Ok(())
}

fn cmd_synth(c: &Common) -> Result<()> {
    let spec = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| triplet_core::Error::io(p, e))?;
            SynthSpec::parse(&text, &p.display().to_string())?
        }
        None => SynthSpec::default(),
    };
    let data = triplet_core::datapipe::synth_generate(&spec, c.seed.unwrap_or(0))?;
    let split = write_dataset(&data, &c.out)?;
    println!(
        "wrote {} videos, {} frames to {}",
        split.folds.len(),
        data.num_frames(),
        c.out.display()
    );
    Ok(())
}

fn category(e: &anyhow::Error) -> &'static str {
    e.chain()
        .find_map(|c| {
            c.downcast_ref::<triplet_core::Error>()
                .map(triplet_core::Error::category)
        })
        .unwrap_or("internal")
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!(
                "error: category=usage message={}",
                one_line(e.to_string().trim_start_matches("error: "))
            );
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Train(c) => cmd_train(c),
        Command::Eval { common, checkpoint } => cmd_eval(common, checkpoint.as_deref()),
        Command::Ablate(c) => cmd_ablate(c),
        Command::Synth(c) => cmd_synth(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "error: category={} message={}",
                category(&e),
                one_line(&e.to_string())
            );
            ExitCode::FAILURE
        }
    }
}
