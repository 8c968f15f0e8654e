use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nested_ki::engine::StepOrder;
use nested_ki::verify::{self, Hooks, Level};
use nested_ki_cli::config;
use nested_ki_cli::{execute, preset_listing, write_outputs, Failure};

#[derive(Parser)]
#[command(name = "nested-ki", version, about = "Decoherence of a central qubit system in nested kicked Ising environments")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON configuration (or a metadata sidecar).
    Run {
        config: PathBuf,
        /// `key=value`, with a dotted path or a bare key naming one setting.
        #[arg(long = "override", short = 'o', value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory. Defaults to the config's `output_dir`, then
        /// $NESTED_KI_OUTPUT_DIR, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List topology presets and the figure each reproduces.
    ListPresets,
    /// Run the oracle and invariant checks.
    Verify {
        #[arg(value_enum, default_value_t = VerifyLevel::Quick)]
        level: VerifyLevel,
        #[arg(long, hide = true)]
        flip_gate_order: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyLevel {
    Quick,
    Full,
}

fn run(config_path: &PathBuf, overrides: &[String], out: Option<PathBuf>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let cfg = config::load(&text, overrides)?;
    let dir = out.unwrap_or_else(|| cfg.output_dir());
    let output = execute(&cfg)?;
    let written = write_outputs(&dir, &cfg, overrides, &output)
        .map_err(|e| Failure::Config(format!("cannot write to {}: {e}", dir.display())))?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match cli.command {
        Command::Run { config, overrides, out } => match run(&config, &overrides, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(f) => {
                eprintln!("error: {}", f.message());
                ExitCode::from(f.exit_code() as u8)
            }
        },
        Command::ListPresets => {
            for line in preset_listing() {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Command::Verify { level, flip_gate_order } => {
            let level = match level {
                VerifyLevel::Quick => Level::Quick,
                VerifyLevel::Full => Level::Full,
            };
            let hooks = Hooks {
                step_order: if flip_gate_order { StepOrder::KickThenIsing } else { StepOrder::IsingThenKick },
            };
            let mut failed = 0;
            for c in verify::criteria().iter().filter(|c| level == Level::Full || c.quick) {
                let outcome = c.run(&hooks);
                failed += usize::from(!outcome.passed);
                println!("{outcome}");
            }
            if failed == 0 {
                println!("all checks passed");
                ExitCode::SUCCESS
            } else {
                println!("{failed} check(s) failed");
                ExitCode::from(1)
            }
        }
    }
}
