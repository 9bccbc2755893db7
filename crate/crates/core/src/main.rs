use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use diffloc::experiment::{self, Config};

/// Reproduces the localization error-probability sweeps and writes CSV files.
#[derive(Parser, Debug)]
#[command(name = "diffloc", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a preset or a config file (the default command).
    Run(RunArgs),
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Preset name, as an alternative to --preset.
    #[arg(value_name = "PRESET")]
    preset_pos: Option<String>,
    /// fig3, fig4, fig5, fig6 or custom.
    #[arg(long)]
    preset: Option<String>,
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// collab or noncollab.
    #[arg(long)]
    strategy: Option<String>,
    /// ideal or noisy.
    #[arg(long)]
    channel: Option<String>,
    /// Clusters per side.
    #[arg(long = "L")]
    l: Option<usize>,
    /// Amplification factor at the fusion centers.
    #[arg(long)]
    alpha: Option<u64>,
    /// Fusion-center to gateway distance, in multiples of the side length.
    #[arg(long)]
    dfg: Option<f64>,
}

fn resolve(args: &RunArgs) -> diffloc::Result<Config> {
    let mut cfg = Config::default();
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    if let (Some(a), Some(b)) = (&args.preset_pos, &args.preset) {
        if a != b {
            return Err(diffloc::Error::Config(format!(
                "conflicting presets '{a}' and '{b}'"
            )));
        }
    }
    let overrides = [
        (
            "preset",
            args.preset.clone().or_else(|| args.preset_pos.clone()),
        ),
        ("trials", args.trials.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
        ("strategy", args.strategy.clone()),
        ("channel", args.channel.clone()),
        ("L", args.l.map(|v| v.to_string())),
        ("alpha", args.alpha.map(|v| v.to_string())),
        ("dfg", args.dfg.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = match cli.command {
        Some(Command::Run(a)) => a,
        None => cli.run,
    };
    let result = resolve(&args).and_then(|cfg| experiment::run(&cfg, &args.out));
    match result {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
