use clap::{Args, Parser, Subcommand};
use mvlab_core::harness::{self, list_presets, ExperimentConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mvlab", version, about = "McKean-Vlasov SDE laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// List the built-in coefficient presets.
    Presets {
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Parse and validate a config, printing the effective settings.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; relative paths resolve under $MVLAB_OUTPUT_ROOT.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override any config key, e.g. `--set density.t=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn pairs(&self) -> Result<Vec<(String, String)>, String> {
        let mut out = Vec::new();
        if let Some(v) = self.seed {
            out.push(("plan.seed".into(), v.to_string()));
        }
        if let Some(v) = self.particles {
            out.push(("plan.particles".into(), v.to_string()));
        }
        if let Some(v) = self.steps {
            out.push(("plan.steps".into(), v.to_string()));
        }
        if let Some(v) = self.workers {
            out.push(("plan.workers".into(), v.to_string()));
        }
        if let Some(p) = &self.output {
            let quoted = serde_json::to_string(&p.to_string_lossy()).map_err(|e| e.to_string())?;
            out.push(("output".into(), quoted));
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }
}

fn load(path: &PathBuf, overrides: &Overrides) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let pairs = overrides.pairs()?;
    ExperimentConfig::from_toml_with(&text, &pairs).map_err(|e| e.to_string())
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets { json } => {
            let presets = list_presets();
            if json {
                match serde_json::to_string_pretty(&presets) {
                    Ok(s) => println!("{s}"),
                    Err(e) => return fail(e),
                }
            } else {
                for p in presets {
                    println!("{:<26} {}", p.name, p.description);
                }
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config, overrides } => match load(&config, &overrides) {
            Ok(cfg) => {
                print!("{}", cfg.to_toml());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Run { config, overrides } => {
            let cfg = match load(&config, &overrides) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let dir = harness::output_dir(&cfg);
            let report = match harness::run_in(&cfg, &dir) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            for c in &report.checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("artifacts in {}", dir.display());
            if report.pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
    }
}
