//! The `rowcol` batch runner.
//!
//! Exit codes: 0 when every hard check passes, 1 when a check fails or a computation
//! errors out, 2 for usage, configuration and I/O problems.

mod config;
mod run;

pub use config::*;
pub use run::{grid_weak_type, grid_with_crossovers};

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "rowcol", version, about = "Row/column K-functional and Khintchine experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "ROWCOL_JOBS")]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// k_t lower bounds against K_t upper bounds for the row/column couple.
    Sandwich(Common),
    /// Ratio study between two Khintchine-type functionals.
    Khintchine(Common),
    /// Simultaneous row/column splitting with certificates.
    Decompose(Common),
    /// Rectangle decomposition of g(i) ∧ f(j).
    Layercake(Common),
    /// GUE semicircle check and the p = ∞ divergence experiment.
    Freeprob(Common),
    /// Sampled K-functional curves and (θ,q) brackets.
    Ktcurve(Common),
    /// Weak-type functional against its grid supremum.
    Weaktype(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Sandwich(c) => ("sandwich", c),
            Command::Khintchine(c) => ("khintchine", c),
            Command::Decompose(c) => ("decompose", c),
            Command::Layercake(c) => ("layercake", c),
            Command::Freeprob(c) => ("freeprob", c),
            Command::Ktcurve(c) => ("ktcurve", c),
            Command::Weaktype(c) => ("weaktype", c),
        }
    }
}

/// Reads and validates a configuration file. Errors carry the line and column.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    ExperimentConfig::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

enum Failure {
    Usage(String),
    Check(Vec<String>),
    Compute(String),
}

fn execute(kind: &str, common: &Common) -> Result<Vec<PathBuf>, Failure> {
    let cfg = load_config(&common.config).map_err(Failure::Usage)?;
    if cfg.kind() != kind {
        return Err(Failure::Usage(format!(
            "configuration kind `{}` does not match subcommand `{kind}`",
            cfg.kind()
        )));
    }
    let seed = common.seed.or(cfg.seed());
    if cfg.is_randomized() && seed.is_none() {
        return Err(Failure::Usage("this experiment is randomized: give a seed in the config or via --seed".into()));
    }
    std::fs::create_dir_all(&common.out)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", common.out.display())))?;
    let base = common.config.parent().unwrap_or(Path::new("."));
    let load = |spec: &InstanceSpec| -> Result<Vec<Instance>, Failure> {
        let v = spec.load(seed, base).map_err(Failure::Usage)?;
        if v.is_empty() {
            return Err(Failure::Usage("no instances".into()));
        }
        Ok(v)
    };
    let check_grid = |g: &GridSpec| g.validate().map_err(Failure::Usage);
    let out = &common.out;
    let outcome = match &cfg {
        ExperimentConfig::Sandwich(c) => {
            check_grid(&c.t_grid)?;
            run::sandwich(c, &load(&c.instances)?, out)
        }
        ExperimentConfig::Khintchine(c) => {
            if c.count == 0 {
                return Err(Failure::Usage("no instances".into()));
            }
            run::khintchine(c, seed.unwrap(), out)
        }
        ExperimentConfig::Decompose(c) => run::decompose(c, &load(&c.instances)?, out),
        ExperimentConfig::Layercake(c) => {
            if c.triples.is_empty() && c.count == 0 {
                return Err(Failure::Usage("no instances".into()));
            }
            run::layercake(c, seed, out)
        }
        ExperimentConfig::Freeprob(c) => run::freeprob(c, seed.unwrap(), out),
        ExperimentConfig::Ktcurve(c) => {
            check_grid(&c.t_grid)?;
            run::ktcurve(c, &load(&c.instances)?, out)
        }
        ExperimentConfig::Weaktype(c) => {
            check_grid(&c.t_grid)?;
            run::weaktype(c, &load(&c.instances)?, out)
        }
    }
    .map_err(|e| Failure::Compute(e.0))?;
    if outcome.failures.is_empty() {
        Ok(outcome.files)
    } else {
        Err(Failure::Check(outcome.failures))
    }
}

/// Parses `args` (including the program name) and runs the experiment.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let (kind, common) = cli.command.parts();
    if let Some(j) = common.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        // a second initialization only happens when embedding; keep the existing pool then
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let start = Instant::now();
    let result = execute(kind, common);
    let elapsed = start.elapsed().as_secs_f64();
    match result {
        Ok(files) => {
            for f in &files {
                eprintln!("wrote {}", f.display());
            }
            eprintln!("{kind}: all checks passed ({elapsed:.2} s)");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(m)) => {
            eprintln!("{kind}: computation failed: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Check(list)) => {
            for m in &list {
                eprintln!("check failed: {m}");
            }
            eprintln!("{kind}: {} check(s) failed ({elapsed:.2} s)", list.len());
            ExitCode::from(1)
        }
    }
}
