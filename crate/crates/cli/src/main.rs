use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use twochoice_cli::checks::evaluate;
use twochoice_cli::config::{preset_description, preset_names, ExperimentConfig};
use twochoice_cli::runner::{execute, write_artifacts};
use twochoice_cli::CliError;

/// Balanced-allocation experiment runner.
#[derive(Parser)]
#[command(name = "twochoice", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its report files.
    Run(RunArgs),
    /// Parse and validate a config, printing the resolved values.
    Validate(ConfigArgs),
    /// List the bundled table presets.
    ListPresets,
}

#[derive(Args)]
struct ConfigArgs {
    /// Bundled preset name (see `list-presets`).
    #[arg(long)]
    preset: Option<String>,

    /// Path to a `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Experiment kind: balls, compare, queue, fluid, coupled or ancestry.
    #[arg(long)]
    kind: Option<String>,

    /// Comma-separated scheme tags (random_wr, random_distinct, double,
    /// dleft_random, dleft_double).
    #[arg(long, alias = "scheme")]
    schemes: Option<String>,

    /// Number of bins / queues.
    #[arg(long)]
    n: Option<u64>,

    /// Number of balls.
    #[arg(long)]
    m: Option<u64>,

    /// Number of choices per ball.
    #[arg(long)]
    d: Option<usize>,

    /// Trials (or seeds, for queue/coupled/ancestry kinds).
    #[arg(long)]
    trials: Option<u64>,

    /// Master seed; every trial derives its own substream from it.
    #[arg(long = "seed")]
    master_seed: Option<u64>,

    /// Tie-breaking rule: random or leftmost.
    #[arg(long)]
    tie_break: Option<String>,

    /// Arrival intensity per queue (queue and fluid kinds).
    #[arg(long)]
    lambda: Option<f64>,

    /// Simulated seconds (queue kind).
    #[arg(long)]
    horizon: Option<f64>,

    /// Seconds excluded from statistics (queue kind).
    #[arg(long)]
    burn_in: Option<f64>,

    /// Fluid-limit end time, i.e. balls per bin (fluid and ancestry kinds).
    #[arg(long = "t-end", alias = "T")]
    t_end: Option<f64>,

    /// ODE truncation level.
    #[arg(long)]
    truncation: Option<usize>,

    /// ODE step size.
    #[arg(long)]
    step: Option<f64>,

    /// Include the fluid-limit column in comparison reports.
    #[arg(long)]
    include_fluid: bool,

    /// Output directory for report files.
    #[arg(long = "out")]
    output: Option<PathBuf>,

    /// Extra `key=value` override (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Run at the paper's trial counts with the tighter tolerances.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// Verify the preset's expected values and exit 3 on any miss.
    #[arg(long)]
    check: bool,

    /// Worker threads for trial fan-out (0 = one per core). Does not
    /// affect report contents.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl ConfigArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                pairs.push((key.to_string(), v));
            }
        };
        push("kind", self.kind.clone());
        push("schemes", self.schemes.clone());
        push("n", self.n.map(|v| v.to_string()));
        push("m", self.m.map(|v| v.to_string()));
        push("d", self.d.map(|v| v.to_string()));
        push("trials", self.trials.map(|v| v.to_string()));
        push("master_seed", self.master_seed.map(|v| v.to_string()));
        push("tie_break", self.tie_break.clone());
        push("lambda", self.lambda.map(|v| v.to_string()));
        push("horizon", self.horizon.map(|v| v.to_string()));
        push("burn_in", self.burn_in.map(|v| v.to_string()));
        push("t_end", self.t_end.map(|v| v.to_string()));
        push("truncation", self.truncation.map(|v| v.to_string()));
        push("step", self.step.map(|v| v.to_string()));
        if self.include_fluid {
            push("include_fluid", Some("true".to_string()));
        }
        push(
            "output",
            self.output.as_ref().map(|p| p.display().to_string()),
        );
        for entry in &self.set {
            let (k, v) = entry.split_once('=').ok_or_else(|| {
                CliError::config(format!("--set expects key=value, got `{entry}`"))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(pairs)
    }

    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::resolve(
            self.preset.as_deref(),
            self.config.as_deref(),
            &self.overrides()?,
            self.paper_scale,
        )
    }
}

fn run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = args.config.resolve()?;
    let artifacts = execute(&cfg, args.threads)?;
    let paths = write_artifacts(&artifacts, cfg.output.as_ref())?;
    print!("{}", artifacts.summary);
    for path in &paths {
        println!("wrote {}", path.display());
    }
    if args.check {
        if cfg.expectations.is_empty() {
            println!("check: no expectations declared for this configuration");
        } else {
            let results = evaluate(&artifacts.report, &cfg.expectations, args.config.paper_scale);
            let mut failed = 0;
            for result in &results {
                println!("{}", result.line());
                if !result.pass {
                    failed += 1;
                }
            }
            if failed > 0 {
                return Err(CliError::ChecksFailed(failed));
            }
        }
    }
    Ok(())
}

fn validate(args: &ConfigArgs) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    println!("configuration is valid:");
    for (key, value) in &cfg.raw {
        println!("  {key} = {value}");
    }
    Ok(())
}

fn list_presets() -> Result<(), CliError> {
    for name in preset_names() {
        println!("{name:<10} {}", preset_description(name)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version listings are not errors.
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Validate(args) => validate(args),
        Command::ListPresets => list_presets(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
