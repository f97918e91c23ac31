//! Subcommand implementations shared by the binary and the test suite.

use std::path::{Path, PathBuf};

use rhc_core::sim::{builtin_scenarios, run_scenario, Scenario, TrajectoryLog};

use crate::config::load_target;
use crate::exit;
use crate::{csvio, svg, verify};

/// Resolves output paths: explicit flag, then scenario config, then a
/// default derived from the scenario name.
fn resolve_path(flag: Option<&Path>, configured: Option<&Path>, default: String) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| configured.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(default))
}

fn write_outputs(scenario: &Scenario, log: &TrajectoryLog, out_csv: Option<&Path>, out_svg: Option<&Path>) -> u8 {
    let csv_path = resolve_path(out_csv, scenario.csv_path.as_deref(), format!("{}.csv", scenario.name));
    if let Err(e) = csvio::write_csv_file(&csv_path, log) {
        log::error!("cannot write {}: {e}", csv_path.display());
        return exit::CONFIG;
    }
    log::info!("wrote {} ({} rows)", csv_path.display(), log.rows.len());

    let svg_stem = resolve_path(out_svg, scenario.svg_path.as_deref(), format!("{}.svg", scenario.name));
    match svg::write_figures(&svg_stem, log) {
        Ok(paths) => {
            for p in &paths {
                log::info!("wrote {}", p.display());
            }
        }
        Err(e) => {
            log::error!("cannot write figures at {}: {e}", svg_stem.display());
            return exit::CONFIG;
        }
    }
    exit::OK
}

/// `run <preset|config-path> [--set k=v]... [--out-csv P] [--out-svg P]`
pub fn cmd_run(
    target: &str,
    sets: &[String],
    out_csv: Option<&Path>,
    out_svg: Option<&Path>,
) -> u8 {
    let (name, mut config) = match load_target(target) {
        Ok(v) => v,
        Err(e) => {
            log::error!("{e}");
            return exit::CONFIG;
        }
    };
    for set in sets {
        let Some((key, value)) = set.split_once('=') else {
            log::error!("--set expects KEY=VALUE, got '{set}'");
            return exit::CONFIG;
        };
        if let Err(e) = config.apply_set(key.trim(), value.trim()) {
            log::error!("{e}");
            return exit::CONFIG;
        }
    }
    let scenario = match config.into_scenario(&name) {
        Ok(s) => s,
        Err(e) => {
            log::error!("{e}");
            return exit::CONFIG;
        }
    };

    log::info!(
        "running '{}': {} days at t_s = {} ({} samples)",
        scenario.name,
        scenario.duration,
        scenario.cfg.t_s,
        rhc_core::sim::sample_count(scenario.duration, scenario.cfg.t_s)
    );
    match run_scenario(&scenario) {
        Ok(log_data) => {
            if log_data.cost_violations > 0 {
                log::warn!(
                    "horizon-cost monitor flagged {} rising moving-average samples",
                    log_data.cost_violations
                );
            }
            write_outputs(&scenario, &log_data, out_csv, out_svg)
        }
        Err(failure) => {
            log::error!("{failure}");
            // flush whatever was logged before the failure
            let code = write_outputs(&scenario, &failure.partial, out_csv, out_svg);
            if code != exit::OK {
                return code;
            }
            exit::DIVERGED
        }
    }
}

/// `verify <preset>`: runs the oracle cross-checks and prints the table.
pub fn cmd_verify(preset_name: &str) -> u8 {
    let Some(scenario) = rhc_core::sim::preset(preset_name) else {
        log::error!("unknown preset '{preset_name}' (expected case1 or case2)");
        return exit::CONFIG;
    };
    log::info!("verifying '{}' over {} days", scenario.name, scenario.duration);
    match verify::run_verify(&scenario) {
        Ok(report) => {
            println!("{:<42} {:<6} detail", "check", "result");
            for check in &report.checks {
                println!(
                    "{:<42} {:<6} {}",
                    check.name,
                    if check.passed { "PASS" } else { "FAIL" },
                    check.detail
                );
            }
            if report.all_passed() {
                exit::OK
            } else {
                exit::CHECK_FAILED
            }
        }
        Err(failure) => {
            log::error!("verification run aborted: {failure}");
            exit::DIVERGED
        }
    }
}

/// `list-presets`
pub fn cmd_list_presets() -> u8 {
    for sc in builtin_scenarios() {
        let varying = if sc.signals.s.is_constant() {
            "constant parameters"
        } else {
            "time-varying proliferation rate"
        };
        println!(
            "{:<8} {} days, estimates {{{}}}, {}",
            sc.name,
            sc.duration,
            sc.unknown
                .iter()
                .map(|u| u.name())
                .collect::<Vec<_>>()
                .join(", "),
            varying
        );
    }
    exit::OK
}
