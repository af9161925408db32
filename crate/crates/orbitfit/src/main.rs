use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use orbitfit::config::{RawConfig, Scenario};
use orbitfit::io::read_text;
use orbitfit::scenario::{self, batch_dir};
use orbitfit::{HarnessError, ScenarioConfig, ScenarioReport};

#[derive(Parser)]
#[command(
    name = "orbitfit",
    version,
    about = "Potential reconstruction from a single trajectory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one seeded torus trajectory under the drift gate.
    Simulate(Common),
    /// Simulate, observe and fit a band-limited potential.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// True potential as a `k1,k2,a,b` CSV instead of the seeded one.
        #[arg(long)]
        potential: Option<PathBuf>,
    },
    /// Closed-orbit search over an ensemble of seeded starts.
    DetectOrbits(Common),
    /// Grid occupancy and circle crossings of one trajectory.
    Coverage {
        #[command(flatten)]
        common: Common,
        /// Free flow with velocity direction (1, SLOPE) instead of the potential.
        #[arg(long)]
        slope: Option<f64>,
    },
    /// Run one scenario and score it.
    Scenario {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<Scenario>,
    },
    /// Run several scenarios concurrently, each into its own directory.
    Batch {
        /// Config files; all six scenarios at defaults when none are given.
        configs: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 2)]
        jobs: usize,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    kmax: Option<u32>,
    #[arg(long, value_parser = ["exact", "positions-only"])]
    mode: Option<String>,
}

impl Common {
    fn resolve(&self, scenario: Option<Scenario>) -> Result<ScenarioConfig, HarnessError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::parse(&read_text(path)?)?,
            None => RawConfig::default(),
        };
        if let Some(s) = scenario {
            raw.set("scenario", s.as_str())?;
        }
        let overrides = [
            ("seed", self.seed.map(|x| x.to_string())),
            ("dt", self.dt.map(|x| format!("{x:?}"))),
            ("t_final", self.t_final.map(|x| format!("{x:?}"))),
            ("kmax", self.kmax.map(|x| x.to_string())),
            ("mode", self.mode.clone()),
            (
                "output_dir",
                self.out_dir.as_ref().map(|p| p.display().to_string()),
            ),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                raw.set(key, v)?;
            }
        }
        Ok(raw.resolve()?)
    }
}

fn print_report(report: &ScenarioReport) {
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    println!(
        "{verdict} {} seed={} ({:.2}s) -> {}",
        report.config.scenario,
        report.config.seed,
        report.duration.as_secs_f64(),
        report.config.output_dir.display()
    );
    for c in &report.checks {
        let mark = if c.pass { "ok  " } else { "FAIL" };
        println!(
            "  {mark} {} = {:e} {} {:e}",
            c.name, c.value, c.op, c.threshold
        );
    }
}

fn finish(result: Result<ScenarioReport, HarnessError>) -> ExitCode {
    match result {
        Ok(report) => {
            print_report(&report);
            ExitCode::from(if report.passed() { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn batch(configs: &[PathBuf], out_dir: &std::path::Path, jobs: usize) -> ExitCode {
    let mut resolved = Vec::new();
    if configs.is_empty() {
        for s in Scenario::ALL {
            let mut raw = RawConfig::default();
            raw.set("scenario", s.as_str()).expect("known key");
            resolved.push(raw.resolve().expect("defaults are valid"));
        }
    } else {
        for path in configs {
            let cfg = read_text(path).and_then(|t| Ok(RawConfig::parse(&t)?.resolve()?));
            match cfg {
                Ok(c) => resolved.push(c),
                Err(e) => {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(e.exit_code() as u8);
                }
            }
        }
    }
    for (i, cfg) in resolved.iter_mut().enumerate() {
        cfg.output_dir = batch_dir(out_dir, cfg, i);
    }
    let mut code = 0u8;
    for result in scenario::run_batch(&resolved, jobs) {
        match result {
            Ok(report) => {
                print_report(&report);
                if !report.passed() {
                    code = code.max(1);
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                code = code.max(e.exit_code() as u8);
            }
        }
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = |common: &Common,
               scenario: Option<Scenario>,
               f: &dyn Fn(&ScenarioConfig) -> Result<ScenarioReport, HarnessError>| {
        finish(common.resolve(scenario).and_then(|cfg| f(&cfg)))
    };
    match &cli.command {
        Command::Simulate(common) => run(common, None, &scenario::simulate),
        Command::Reconstruct { common, potential } => run(common, None, &|cfg| {
            scenario::reconstruct(cfg, potential.as_deref())
        }),
        Command::DetectOrbits(common) => run(common, None, &scenario::detect_orbits),
        Command::Coverage { common, slope } => {
            run(common, None, &|cfg| scenario::coverage(cfg, *slope))
        }
        Command::Scenario { common, scenario } => run(common, *scenario, &scenario::run_scenario),
        Command::Batch {
            configs,
            out_dir,
            jobs,
        } => batch(configs, out_dir, *jobs),
    }
}
