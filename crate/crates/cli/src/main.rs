use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vvlab::harness::{
    emit_plotdata, list_flows, resolve_out_dir, run_with_jobs, ExperimentConfig, ExperimentKind,
    EXIT_USAGE,
};

/// Truncation, decay and vanishing-viscosity experiments on expanding domains.
#[derive(Parser, Debug)]
#[command(name = "vvlab", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Multiply solver resolutions by this factor.
    #[arg(long, global = true, default_value_t = 1.0)]
    resolution_scale: f64,
    /// Output directory (overrides the config and $VVLAB_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment config and write CSVs plus a manifest.
    Run { config: PathBuf },
    /// List the reference flows.
    ListFlows,
    /// List the experiment kinds.
    ListExperiments,
    /// Write plot data for a manifest.
    EmitPlots { manifest: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(dispatch(cli) as u8)
}

fn dispatch(cli: Cli) -> i32 {
    if !(cli.resolution_scale.is_finite() && cli.resolution_scale > 0.0) {
        eprintln!("error: --resolution-scale must be positive");
        return EXIT_USAGE;
    }
    if cli.jobs == Some(0) {
        eprintln!("error: --jobs must be at least 1");
        return EXIT_USAGE;
    }
    match cli.command {
        Command::ListFlows => {
            for (name, case, dim, desc) in list_flows() {
                println!("{name:<20} case {case:<3} {dim}D  {desc}");
            }
            0
        }
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<24} {}", k.name(), k.description());
            }
            0
        }
        Command::EmitPlots { manifest } => match emit_plotdata(&manifest, cli.out.as_deref()) {
            Ok((files, notices)) => {
                for n in notices {
                    eprintln!("note: {n}");
                }
                for f in files {
                    println!("{}", f.display());
                }
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::Run { config } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return e.exit_code();
                }
            };
            cfg.resolution = cfg.resolution.scaled(cli.resolution_scale);
            let out = resolve_out_dir(cli.out.as_deref(), &cfg);
            match run_with_jobs(&cfg, &out, cli.jobs) {
                Ok(m) => {
                    for f in &m.fits {
                        println!(
                            "fit {:<16} slope {:>9.4} predicted {:>8.4} {:?} {}",
                            f.name,
                            f.fit.slope,
                            f.fit.predicted,
                            f.fit.semantics,
                            if f.fit.pass { "pass" } else { "FAIL" }
                        );
                    }
                    for c in &m.checks {
                        println!(
                            "check {:<30} {:.4e} {} {:.4e} {}",
                            c.name,
                            c.value,
                            c.relation,
                            c.threshold,
                            if c.pass { "pass" } else { "FAIL" }
                        );
                    }
                    for v in &m.vacuous {
                        println!("vacuous {v} (identically zero)");
                    }
                    println!(
                        "{} -> {}",
                        if m.pass { "PASS" } else { "FAIL" },
                        out.display()
                    );
                    m.exit_code()
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_global_flags_after_the_subcommand() {
        let cli = Cli::try_parse_from([
            "vvlab",
            "run",
            "c.toml",
            "--jobs",
            "2",
            "--resolution-scale",
            "0.5",
        ])
        .unwrap();
        assert_eq!(cli.jobs, Some(2));
        assert_eq!(cli.resolution_scale, 0.5);
        assert!(matches!(cli.command, Command::Run { .. }));
    }

    #[test]
    fn bad_scale_is_a_usage_error() {
        let cli = Cli::try_parse_from(["vvlab", "--resolution-scale=-1", "list-flows"]).unwrap();
        assert_eq!(dispatch(cli), EXIT_USAGE);
    }
}
