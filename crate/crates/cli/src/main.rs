use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use patchsearch::attack::Strategy;
use patchsearch::config::KeyValues;
use patchsearch::detector::{Task, ToyDetectorConfig};
use patchsearch_cli::{
    cmd_ablate, cmd_ada, cmd_attack, cmd_gen_suite, cmd_report, read_scene_list, seed_range, Axis, Method, Overrides,
    RunManifest, RunOutcome,
};

#[derive(Parser)]
#[command(name = "patchsearch", version, about = "Adversarial patch search against a toy detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a detector-validated scene suite.
    GenSuite {
        /// Number of scenes, with seeds `seed..seed+count`.
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Scene-list file (`seed [category=K] [distractor=P] [clutter=K]` per line); overrides --count/--seed.
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// Detector config file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attack every suite scene with every manifest method.
    Attack(RunArgs),
    /// Compare variants of the primitive search along one axis.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// primitives, strategy, no_region_search or no_texture_constraint.
        #[arg(long)]
        axis: Axis,
    },
    /// Train and score a patch detector per method on an attack output directory.
    Ada {
        #[command(flatten)]
        run: RunArgs,
        /// Also emit ADA against training-set size.
        #[arg(long)]
        curve: bool,
    },
    /// Recompute summary.json from report.csv.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        area_threshold: Option<f64>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Run manifest.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Attack seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (all cores by default).
    #[arg(long)]
    jobs: Option<usize>,
    /// Comma-separated methods: ldap, dpatch, advpatch, rp2, two_rects_h, four_rects.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// cls or loc.
    #[arg(long)]
    task: Option<Task>,
    /// soft, a1 or ae.
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    n_primitives: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Patch-to-object area fraction for ASR.
    #[arg(long)]
    area_threshold: Option<f64>,
}

impl RunArgs {
    fn manifest(&self) -> Result<RunManifest> {
        let mut m = RunManifest::load(&self.config)?;
        m.apply(&Overrides {
            seed: self.seed,
            methods: self.methods.clone(),
            task: self.task,
            strategy: self.strategy,
            n_primitives: self.n_primitives,
            max_steps: self.max_steps,
            area_threshold: self.area_threshold,
        })?;
        Ok(m)
    }
}

fn finish(outcome: RunOutcome) -> ExitCode {
    print!("{}", outcome.summary.table());
    if outcome.errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} job(s) failed; see errors.txt", outcome.errors.len());
        ExitCode::FAILURE
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenSuite {
            count,
            seed,
            scenes,
            config,
            out,
        } => {
            let specs = match scenes {
                Some(p) => read_scene_list(&p)?,
                None => seed_range(count, seed)?,
            };
            let det = match config {
                Some(p) => ToyDetectorConfig::from_key_values(&KeyValues::load(p)?)?,
                None => ToyDetectorConfig::default(),
            };
            let entries = cmd_gen_suite(&specs, &det, &out)?;
            println!("wrote {} scenes to {}", entries.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Attack(a) => Ok(finish(cmd_attack(&a.manifest()?, &a.out, a.jobs)?)),
        Command::Ablate { run, axis } => Ok(finish(cmd_ablate(&run.manifest()?, axis, &run.out, run.jobs)?)),
        Command::Ada { run, curve } => {
            let report = cmd_ada(&run.manifest()?, &run.out, curve)?;
            println!("{:<24} {:>8} {:>12}", "method", "ada", "shuffled_ada");
            for r in &report.rows {
                println!("{:<24} {:>8.3} {:>12.3}", r.method, r.ada, r.shuffled_ada);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { out, area_threshold } => {
            print!("{}", cmd_report(&out, area_threshold)?.table());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
