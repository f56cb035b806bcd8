use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use histrepair::context::HeuristicKind;
use histrepair_cli::pipeline::Campaign;
use histrepair_cli::*;

#[derive(Parser)]
#[command(name = "histrepair", version, about = "History-aware automated program repair")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Campaign configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Blame availability study over the manifest.
    Study {
        #[command(flatten)]
        common: Common,
        /// Manifest to study; overrides `manifest`.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Build and persist the historical context and prompts for one bug.
    Context {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bug: String,
        #[arg(long, default_value = "fl_diff")]
        heuristic: HeuristicKind,
    },
    /// Run the repair agent on one bug under one configuration.
    Repair {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bug: String,
        #[arg(long, default_value = "fl_diff")]
        heuristic: HeuristicKind,
    },
    /// Run every (bug, configuration) job, resuming finished ones.
    Batch {
        #[command(flatten)]
        common: Common,
        /// Restrict to these bugs (repeatable).
        #[arg(long)]
        bug: Vec<String>,
        /// Restrict to these configurations (repeatable).
        #[arg(long)]
        heuristic: Vec<HeuristicKind>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Aggregate a campaign output directory into reports.
    Report {
        /// Campaign output directory.
        dir: PathBuf,
    },
    /// Repair the bundled toy project under all four configurations.
    Demo {
        #[arg(long, default_value = "histrepair-demo")]
        out: PathBuf,
    },
}

fn campaign(common: &Common, mut o: Overrides) -> Result<Campaign, CliError> {
    o.output_dir = common.out.clone();
    Campaign::open(CampaignConfig::load(&common.config, &o)?)
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Cmd::Study { common, manifest } => {
            let c = campaign(&common, Overrides { manifest, ..Default::default() })?;
            let out = cmd_study(&c)?;
            print!("{}", out.report.render_table());
            println!("wrote {}", out.dir.display());
            Ok(0)
        }
        Cmd::Context { common, bug, heuristic } => {
            let c = campaign(&common, Overrides::default())?;
            let (p, dir) = cmd_context(&c, &bug, heuristic)?;
            println!("token estimate: {}", p.bundle.token_estimate);
            println!("wrote {}", dir.display());
            Ok(0)
        }
        Cmd::Repair { common, bug, heuristic } => {
            let c = campaign(&common, Overrides::default())?;
            let out = cmd_repair(&c, &bug, heuristic)?;
            println!("{}", out.path.display());
            let code = out.exit_code();
            if code != 0 {
                eprintln!("repair did not pass: {}", termination_message(&out.record));
            }
            Ok(code)
        }
        Cmd::Batch { common, bug, heuristic, workers } => {
            let configs = (!heuristic.is_empty()).then_some(heuristic);
            let c = campaign(&common, Overrides { workers, configs, ..Default::default() })?;
            let bugs = (!bug.is_empty()).then_some(bug);
            let s = cmd_batch(&c, bugs.as_deref())?;
            println!("ran {} job(s), skipped {} finished, {} failed", s.ran.len(), s.skipped, s.failed.len());
            for (t, n) in &s.terminations {
                println!("  {t}: {n}");
            }
            for f in &s.failed {
                let config = f.config.map_or("-".to_string(), |k| k.to_string());
                eprintln!("failed {} [{config}]: {}", f.bug_id, f.error);
            }
            Ok(batch_exit_code(&s))
        }
        Cmd::Report { dir } => {
            let r = cmd_report(&dir)?;
            print!("{}\n{}", r.repair_table, r.stats);
            println!("wrote {}", r.dir.display());
            Ok(0)
        }
        Cmd::Demo { out } => {
            let d = cmd_demo(&out)?;
            print!("{}", d.report.repair_table);
            println!("wrote {}", d.report.dir.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
