use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bloodmatch::config::load_config;
use bloodmatch::core::oracle::{brute_force_opt, brute_force_policy_expectation, find_proportional_allocation};
use bloodmatch::core::sim::{fixed_realization, NormalizationProtocol};
use bloodmatch::core::synth::generate_city;
use bloodmatch::core::{PolicySpec, Regime};
use bloodmatch::error::Result;
use bloodmatch::format::{read_scenario, write_scenario};
use bloodmatch::pipeline::{self, default_gammas, pipeline_solver, Experiment, RunConfig};
use clap::{Parser, Subcommand, ValueEnum};

/// Fair online matching of blood donors to donation opportunities.
#[derive(Debug, Parser)]
#[command(name = "bloodmatch", version)]
struct Cli {
    /// Root seed (overrides a config's seed for `generate`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum, default_value_t = Mode::Fixed)]
    mode: Mode,

    /// Monte Carlo trials per policy.
    #[arg(long, global = true, default_value_t = 50)]
    trials: usize,

    /// Rand trials for the normalization scores when the scenario has none.
    #[arg(long, global = true, default_value_t = 100)]
    normalization_trials: usize,

    /// `fixed`: all trials and m_v share one realization; `expectation`:
    /// every trial draws its own.
    #[arg(long, global = true, value_enum, default_value_t = Protocol::Fixed)]
    protocol: Protocol,

    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Fixed,
    Rate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Protocol {
    Fixed,
    Expectation,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic city from a config file or a bundled name
    /// (city_small, jakarta, istanbul, sao_paulo, san_francisco).
    Generate {
        config: String,
        /// Output file; defaults to `<out-dir>/scenario.json`.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate one policy, e.g. `max`, `randmax:0.3`, `adaptmatch:0.5`.
    Run { scenario: PathBuf, policy: String },
    /// Max, Rand and one policy point per γ.
    Sweep {
        scenario: PathBuf,
        /// Comma-separated γ values; defaults to 0, 0.1, …, 1.
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
    },
    /// Exhaustive reference values on a tiny scenario.
    #[command(hide = true)]
    Oracle {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        /// Also compute a policy's exact expected outcome.
        #[arg(long)]
        policy: Option<String>,
    },
}

impl Cli {
    fn regime(&self) -> Regime {
        match self.mode {
            Mode::Fixed => Regime::FixedTime,
            Mode::Rate => Regime::RateLimited,
        }
    }

    fn run_config(&self) -> RunConfig {
        RunConfig {
            seed: self.seed.unwrap_or(0),
            mode: self.regime(),
            trials: self.trials,
            normalization_trials: self.normalization_trials,
            protocol: match self.protocol {
                Protocol::Fixed => NormalizationProtocol::FixedRealization,
                Protocol::Expectation => NormalizationProtocol::Expectation,
            },
            ..RunConfig::default()
        }
    }
}

fn generate(cli: &Cli, config: &str, output: Option<&Path>) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let s = generate_city(&cfg)?;
    let path = output.map(Path::to_path_buf).unwrap_or_else(|| cli.out_dir.join("scenario.json"));
    write_scenario(&path, &s)?;
    let statics = s
        .recipients()
        .iter()
        .filter(|r| r.kind == bloodmatch::core::RecipientKind::Static)
        .count();
    eprintln!(
        "wrote {}: {} donors, {} recipients ({} static), {} edges, T={}, K={}",
        path.display(),
        s.donor_count(),
        s.recipient_count(),
        statics,
        s.edge_count(),
        s.horizon(),
        s.rate_limit()
    );
    Ok(())
}

fn run(cli: &Cli, scenario: &Path, policy: &str) -> Result<()> {
    let spec: PolicySpec = policy.parse()?;
    let exp = Experiment::new(&read_scenario(scenario)?, cli.run_config())?;
    let out = pipeline::run(&exp, &spec, &pipeline_solver())?;
    pipeline::write_run(&cli.out_dir, &exp, &out)?;
    let a = &out.aggregate;
    eprintln!(
        "{}: mean weight {:.6} ± {:.6}, Gamma {:.4} over {} trials; wrote {}",
        spec,
        a.mean_total_weight,
        a.std_err_total,
        a.gamma_empirical,
        a.trials,
        cli.out_dir.display()
    );
    Ok(())
}

fn sweep(cli: &Cli, scenario: &Path, gammas: Option<&[f64]>) -> Result<()> {
    let gammas = gammas.map(<[f64]>::to_vec).unwrap_or_else(default_gammas);
    let exp = Experiment::new(&read_scenario(scenario)?, cli.run_config())?;
    let rows = pipeline::sweep(&exp, &gammas, &pipeline_solver())?;
    let title = scenario.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    pipeline::write_sweep_outputs(&cli.out_dir, &exp, &rows, &title)?;
    eprintln!("{} sweep points; wrote {}", rows.len(), cli.out_dir.display());
    Ok(())
}

fn oracle(cli: &Cli, scenario: &Path, gamma: f64, policy: Option<&str>) -> Result<()> {
    let s = read_scenario(scenario)?;
    let r = fixed_realization(&s, &cli.run_config().root());
    let (objective, outcome) = brute_force_opt(&s, &r, gamma, cli.regime())?;
    eprintln!("brute-force optimum at gamma {gamma}: {objective}");
    for (t, e) in outcome.matches() {
        eprintln!("  t={t} {}", s.edge_label(e));
    }
    match find_proportional_allocation(&s, gamma)? {
        Some(edges) => eprintln!(
            "proportional allocation: {}",
            edges.iter().map(|&e| s.edge_label(e)).collect::<Vec<_>>().join(", ")
        ),
        None => eprintln!("no non-empty {gamma}-proportional allocation"),
    }
    if let Some(text) = policy {
        let spec = text.parse::<PolicySpec>()?.with_mode(cli.regime());
        let exp = Experiment::new(&s, cli.run_config())?;
        let prepared = exp.prepare(&spec, &pipeline_solver())?;
        let y = brute_force_policy_expectation(&exp.scenario, &prepared, None)?;
        for (rec, yv) in exp.scenario.recipients().iter().zip(y) {
            eprintln!("  E[Y_{}] = {yv}", rec.name);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate { config, output } => generate(&cli, config, output.as_deref()),
        Command::Run { scenario, policy } => run(&cli, scenario, policy),
        Command::Sweep { scenario, gammas } => sweep(&cli, scenario, gammas.as_deref()),
        Command::Oracle {
            scenario,
            gamma,
            policy,
        } => oracle(&cli, scenario, *gamma, policy.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
