use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aedet::eval::EvalReport;
use aedet::pipeline::{self, PipelineConfig, Split};
use clap::{Args, Parser, Subcommand};

/// Acoustic event detection on time-frequency images.
#[derive(Debug, Parser)]
#[command(name = "aedet", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (overrides paths.out_dir).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override a config key, e.g. `--set model.family=mlp`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model family: cnn, mlp, nb, rf or svm (overrides model.family).
    #[arg(long)]
    family: Option<String>,
    /// Time-frequency transform: stft or cwt (overrides transform.kind).
    #[arg(long)]
    transform: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic labelled corpus.
    Synth,
    /// Train the configured model on the training split.
    Train {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Score a split and write metrics, curves and per-unit scores.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        /// Model file (default: <out>/models/<name>.model).
        #[arg(long)]
        model_path: Option<PathBuf>,
        /// train or test.
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Score unlabelled WAV files or directories.
    Predict {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        model_path: Option<PathBuf>,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Recording-level k-fold grid search on the training split.
    Crossval {
        #[command(flatten)]
        model: ModelArgs,
        /// Restrict the grid to this point, e.g. `k=5,n_k=32,n_d=128`. Repeatable.
        #[arg(long = "point")]
        points: Vec<String>,
    },
    /// Class-conditional spectra of a trained model.
    Visualize {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        model_path: Option<PathBuf>,
    },
}

fn load_config(g: &Global, m: Option<&ModelArgs>, points: &[String]) -> aedet::Result<PipelineConfig> {
    let mut ov = Vec::new();
    if let Some(s) = g.seed {
        ov.push(format!("seed={s}"));
    }
    if let Some(o) = &g.out {
        ov.push(format!("paths.out_dir={}", toml_string(o)));
    }
    if let Some(m) = m {
        if let Some(f) = &m.family {
            ov.push(format!("model.family={}", toml_string(Path::new(f))));
        }
        if let Some(t) = &m.transform {
            ov.push(format!("transform.kind={}", toml_string(Path::new(t))));
        }
    }
    ov.extend(g.overrides.iter().cloned());
    let mut cfg = PipelineConfig::load(g.config.as_deref(), &ov)?;
    if !points.is_empty() {
        cfg.crossval.points = points.to_vec();
    }
    Ok(cfg)
}

fn toml_string(p: &Path) -> String {
    let s = p.to_string_lossy();
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn print_report(label: &str, r: &EvalReport) {
    println!(
        "{label:<10} f1={:.4} tpr={:.4} tnr={:.4} roc_area={:.4} pr_area={:.4} (pos={}, neg={})",
        r.f1, r.tpr, r.tnr, r.roc_area, r.pr_area, r.n_pos, r.n_neg
    );
}

fn run(cli: Cli) -> aedet::Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth => {
            let cfg = load_config(g, None, &[])?;
            let s = pipeline::cmd_synth(&cfg)?;
            println!(
                "wrote {} recordings to {} (event fraction {:.3})",
                s.n_recordings,
                s.dir.display(),
                s.positive_fraction
            );
        }
        Command::Train { model } => {
            let cfg = load_config(g, Some(model), &[])?;
            let s = pipeline::cmd_train(&cfg)?;
            for e in &s.history {
                println!(
                    "epoch {:>2}: train_loss={:.4} train_acc={:.4} val_loss={:.4} val_acc={:.4}",
                    e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc
                );
            }
            if let Some(b) = s.best_epoch {
                println!("kept epoch {b}");
            }
            let metrics: Vec<String> = s.metrics.iter().map(|(k, v)| format!("{k}={v:.4}")).collect();
            println!("{}: {} parameters, {} training units; {}", s.name, s.n_params, s.n_units, metrics.join(" "));
            println!("saved {}", s.model_path.display());
        }
        Command::Eval { model, model_path, split } => {
            let cfg = load_config(g, Some(model), &[])?;
            let split: Split = split.parse()?;
            let s = pipeline::cmd_eval(&cfg, model_path.as_deref(), split)?;
            println!("{} on {} split:", s.name, s.split.as_str());
            print_report("raw", &s.report.raw);
            print_report("filtered", &s.report.filtered);
            for f in &s.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Predict { model, model_path, inputs } => {
            let cfg = load_config(g, Some(model), &[])?;
            let s = pipeline::cmd_predict(&cfg, model_path.as_deref(), inputs)?;
            for (r, f) in s.scores.iter().zip(&s.filtered) {
                let hits = f.scores.iter().filter(|&&p| p >= cfg.eval.threshold).count();
                println!("{}: {hits}/{} units detected", r.id, r.scores.len());
            }
            println!("wrote {}", s.file.display());
        }
        Command::Crossval { model, points } => {
            let cfg = load_config(g, Some(model), points)?;
            let s = pipeline::cmd_crossval(&cfg)?;
            for &i in &s.result.ranking() {
                let e = &s.result.entries[i];
                match &e.error {
                    Some(err) => println!("{:<28} failed: {err}", e.point.to_string()),
                    None => println!("{:<28} pr_area={:.4} params={}", e.point.to_string(), e.mean_score, e.n_params),
                }
            }
            println!("best: {}", s.result.best_entry().point);
            println!("wrote {}", s.file.display());
        }
        Command::Visualize { model, model_path } => {
            let cfg = load_config(g, Some(model), &[])?;
            let s = pipeline::cmd_visualize(&cfg, model_path.as_deref())?;
            println!(
                "{}: class 0 peak {:.1} Hz, class 1 peak {:.1} Hz",
                s.name,
                s.spectra.peak_hz(0),
                s.spectra.peak_hz(1)
            );
            for f in &s.files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
