use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Scenario};
use crate::error::{CliError, Result};
use crate::run::{execute, Artifact, RunOptions};
use crate::table::Delimiter;

#[derive(Debug, Parser)]
#[command(name = "sleepwake", version, about = "Plan, simulate and learn sleep-wake schedules")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the plan and its bounds
    Solve(Common),
    /// Simulate the plan and compare with the closed forms
    Simulate(Common),
    /// Run certainty-equivalence learning and write its trace
    Learn(Common),
    /// Run a parameter sweep (any sweep_* scenario)
    Sweep(Common),
    /// Compare the plan with the fixed-rate baseline
    Compare(Common),
    /// Estimate the oracle cost per sampled step
    Oracle(Common),
    /// Check a config without running it
    Validate(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (default: the config's `output`, else stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of seeds, overriding the config
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Worker threads (capped by SLEEPWAKE_MAX_JOBS)
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also write per-event simulation traces
    #[arg(long)]
    pub trace: bool,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Solve(c)
            | Command::Simulate(c)
            | Command::Learn(c)
            | Command::Sweep(c)
            | Command::Compare(c)
            | Command::Oracle(c)
            | Command::Validate(c) => c,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Simulate(_) => "simulate",
            Command::Learn(_) => "learn",
            Command::Sweep(_) => "sweep",
            Command::Compare(_) => "compare",
            Command::Oracle(_) => "oracle",
            Command::Validate(_) => "validate",
        }
    }

    fn accepts(&self, s: Scenario) -> bool {
        match self {
            Command::Solve(_) => s == Scenario::Solve,
            Command::Simulate(_) => s == Scenario::Simulate,
            Command::Learn(_) => s == Scenario::Learn,
            Command::Sweep(_) => s.is_sweep(),
            Command::Compare(_) => s == Scenario::CompareBaselines,
            Command::Oracle(_) => s == Scenario::Oracle,
            Command::Validate(_) => true,
        }
    }
}

/// `dir/name.ext` becomes `dir/name.suffix.ext`.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{suffix}"),
    };
    path.with_file_name(name)
}

fn write_file(path: &Path, a: &Artifact) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path.display(), e))?;
    let mut w = BufWriter::new(file);
    a.table.write_to(&mut w)?;
    w.flush().map_err(|e| CliError::io(path.display(), e))
}

/// Main artifact to `out` (stdout without one), the rest next to it.
pub fn write_artifacts(artifacts: &[Artifact], out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for a in artifacts {
        match (out, &a.suffix) {
            (Some(p), None) => {
                write_file(p, a)?;
                written.push(p.to_path_buf());
            }
            (Some(p), Some(s)) => {
                let mut p = with_suffix(p, s);
                p.set_extension(match a.table.delimiter {
                    Delimiter::Comma => "csv",
                    Delimiter::Tab => "tsv",
                });
                write_file(&p, a)?;
                written.push(p);
            }
            (None, None) => {
                let stdout = io::stdout();
                let mut lock = stdout.lock();
                a.table.write_to(&mut lock)?;
            }
            (None, Some(_)) => {
                return Err(CliError::Config(
                    "this run writes several files: give --out or an output path in the config".into(),
                ))
            }
        }
    }
    Ok(written)
}

pub fn run(cli: &Cli) -> Result<()> {
    let c = cli.command.common();
    let cfg = ExperimentConfig::load(&c.config)?;
    if !cli.command.accepts(cfg.scenario) {
        return Err(CliError::Config(format!(
            "subcommand {} does not run scenario {}",
            cli.command.name(),
            cfg.scenario.name()
        )));
    }
    if let Command::Validate(_) = cli.command {
        let notes = cfg.validate()?;
        println!("{}: ok (scenario {})", c.config.display(), cfg.scenario.name());
        for n in notes.0 {
            println!("note: {n}");
        }
        return Ok(());
    }
    let opts = RunOptions {
        seeds: c.seeds,
        jobs: c.jobs,
        trace: c.trace,
    };
    let artifacts = execute(&cfg, &opts)?;
    let out = c.out.clone().or_else(|| cfg.output.clone());
    for p in write_artifacts(&artifacts, out.as_deref())? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes_go_before_the_extension() {
        assert_eq!(with_suffix(Path::new("out/a.csv"), "seed1"), PathBuf::from("out/a.seed1.csv"));
        assert_eq!(with_suffix(Path::new("trace"), "seed1"), PathBuf::from("trace.seed1"));
    }

    #[test]
    fn parses_the_flags() {
        let cli = Cli::try_parse_from([
            "sleepwake", "sweep", "--config", "c.json", "--out", "o.csv", "--seeds", "4", "--jobs", "2", "--trace",
        ])
        .unwrap();
        let c = cli.command.common();
        assert_eq!(c.seeds, Some(4));
        assert_eq!(c.jobs, Some(2));
        assert!(c.trace);
        assert!(cli.command.accepts(Scenario::SweepLifetime));
        assert!(!cli.command.accepts(Scenario::Solve));
    }
}
