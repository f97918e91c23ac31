use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rhc_cli::commands;

/// Parameter estimation for nonlinear ODE systems by drive-response
/// synchronization under a real-time receding-horizon controller.
#[derive(Parser)]
#[command(name = "rhc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (built-in preset name or TOML file) and write the
    /// trajectory CSV plus SVG figures
    Run {
        /// Preset name (case1, case2) or path to a scenario file
        target: String,
        /// Override a scalar config value, e.g. --set nrhc.t_s=0.01
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// CSV output path (defaults to the scenario's configured path)
        #[arg(long, value_name = "PATH")]
        out_csv: Option<PathBuf>,
        /// Figure output stem; three files are derived from it
        #[arg(long, value_name = "PATH")]
        out_svg: Option<PathBuf>,
    },
    /// Run the oracle cross-checks (steady state, derivatives, Riccati
    /// symmetry, shooting agreement) on a preset
    Verify {
        /// Preset name (case1, case2)
        preset: String,
    },
    /// List the built-in presets
    ListPresets,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RHC_LOG", "info"))
        .format_timestamp(None)
        .init();

    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { target, set, out_csv, out_svg } => {
            commands::cmd_run(&target, &set, out_csv.as_deref(), out_svg.as_deref())
        }
        Command::Verify { preset } => commands::cmd_verify(&preset),
        Command::ListPresets => commands::cmd_list_presets(),
    };
    ExitCode::from(code)
}
