use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcarzf::rmt::golden;
use mcarzf::sim::SchemeId;
use mcarzf_cli::checks::property_suite;
use mcarzf_cli::manifest::resolve;
use mcarzf_cli::{exit, run_sweep, CliError, FileConfig, Overrides, SweepKind, DEFAULT_OUT_DIR, OUT_DIR_ENV};

/// Multi-cell-aware RZF precoding simulator.
#[derive(Parser)]
#[command(name = "mcarzf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum rate against SNR (rho_dl = rho_tr) at fixed N.
    SweepSnr {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated SNR points in dB.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        rho_db: Option<Vec<f64>>,
        /// Antennas per BS.
        #[arg(long)]
        antennas: Option<usize>,
    },
    /// Minimum rate against the number of BS antennas at fixed SNR.
    SweepAntennas {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated antenna counts.
        #[arg(long, value_delimiter = ',')]
        antennas: Option<Vec<usize>>,
        /// SNR in dB used for both data and training.
        #[arg(long, allow_negative_numbers = true)]
        rho_db: Option<f64>,
    },
    /// Run the exact invariant suite on random small drops.
    Validate {
        #[arg(long, default_value_t = 40)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Closed-form equilibrium of the single-user identity-covariance case.
    Golden {
        #[arg(long, default_value_t = 1)]
        antennas: usize,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    drops: Option<usize>,
    /// Monte-Carlo trials per drop.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Comma-separated scheme names.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<SchemeId>>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR)]
    out: PathBuf,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            drops: self.drops,
            trials: self.trials,
            threads: self.threads,
            schemes: self.schemes.clone(),
            ..Default::default()
        }
    }
}

fn sweep(common: &CommonArgs, kind: SweepKind, ov: Overrides) -> Result<(), CliError> {
    let file = match &common.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let manifest = resolve(file, kind, &ov, Path::new(&common.out))?;
    let quiet = common.quiet;
    let outcome = run_sweep(&manifest, &mut |p| {
        if !quiet {
            eprintln!("point {}/{} drop {}/{}", p.point + 1, p.points, p.drop + 1, p.drops);
        }
    });
    match &outcome {
        Ok(res) => eprintln!("finished in {:.1} s", res.wall_time_s),
        Err(CliError::Failed { .. }) => {}
        Err(_) => return outcome.map(|_| ()),
    }
    println!("{}", manifest.csv_path.display());
    println!("{}", manifest.json_path.display());
    outcome.map(|_| ())
}

fn validate(cases: usize, seed: u64) -> Result<(), CliError> {
    let results = property_suite(cases, seed)?;
    let mut failed = 0;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status} {:<44} cases={:<5} worst={:.3e} limit={:.2e}", r.name, r.cases, r.worst, r.limit);
        if !r.passed {
            failed += 1;
            if let Some(d) = &r.detail {
                println!("     worst at {d}");
            }
        }
    }
    let g = golden(1);
    let want = (5f64.sqrt() - 1.0) / 2.0;
    let ok = (g.delta - want).abs() <= 1e-8;
    println!("{} {:<44} delta={:.12}", if ok { "PASS" } else { "FAIL" }, "golden scalar equilibrium", g.delta);
    if !ok {
        failed += 1;
    }
    if failed > 0 {
        return Err(CliError::Validation(failed));
    }
    Ok(())
}

fn print_golden(antennas: usize) -> Result<(), CliError> {
    if antennas == 0 {
        return Err(CliError::Config(vec!["antennas must be at least 1".into()]));
    }
    let g = golden(antennas);
    println!("antennas {}", g.antennas);
    println!("delta    {:.12}", g.delta);
    println!("T        {:.12}", g.t);
    println!("F        {:.12}", g.f);
    println!("xi_bar   {:.12}", g.xi_bar);
    println!("sinr     {:.12}", g.sinr);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SweepSnr { common, rho_db, antennas } => {
            let ov = Overrides { points: rho_db.clone(), antennas: *antennas, ..common.overrides() };
            sweep(common, SweepKind::Snr, ov)
        }
        Command::SweepAntennas { common, antennas, rho_db } => {
            let points = antennas.as_ref().map(|a| a.iter().map(|&n| n as f64).collect());
            let ov = Overrides { points, rho_db: *rho_db, ..common.overrides() };
            sweep(common, SweepKind::Antennas, ov)
        }
        Command::Validate { cases, seed } => validate(*cases, *seed),
        Command::Golden { antennas } => print_golden(*antennas),
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
