//! `varnav`: run truth simulations, estimator experiments and sweeps.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use varnav::harness::{
    reference_config, run_experiment, sweep, write_log, write_text, write_truth, ExperimentConfig,
    SweepAxis, VelocityMode,
};
use varnav::Error;

#[derive(Parser)]
#[command(
    name = "varnav",
    version,
    about = "Variational pose estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the truth trajectory only.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Override the simulated duration, s.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Run truth, sensors and estimator and write the run log.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Repeat the run over several values of one parameter, in parallel.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to vary.
        #[arg(long, value_enum)]
        param: Param,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; the built-in reference scenario if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Bump noise half-width applied to every sensor channel.
    #[arg(long)]
    noise_width: Option<f64>,
    #[arg(long, value_enum)]
    velocity_mode: Option<Mode>,
    /// Turn all sensor noise off.
    #[arg(long, conflicts_with = "noise_width")]
    no_noise: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Direct,
    Gyro,
    Points,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    Dt,
    NoiseWidth,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => reference_config(),
        };
        if let Some(seed) = self.seed {
            cfg.sensors.seed = seed;
        }
        if let Some(w) = self.noise_width {
            cfg.sensors.set_noise_width(w);
        }
        if self.no_noise {
            cfg.sensors.set_noise_width(0.0);
        }
        if let Some(mode) = self.velocity_mode {
            cfg.estimator.velocity_mode = match mode {
                Mode::Direct => VelocityMode::Direct,
                Mode::Gyro => VelocityMode::Gyro,
                Mode::Points => VelocityMode::Points,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_owned(),
        source,
    })
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { common, duration } => {
            let mut cfg = common.config()?;
            if let Some(d) = duration {
                cfg.sim.duration = d;
                cfg.validate()?;
            }
            out_dir(&common.out)?;
            let truth = cfg.truth()?;
            let path = common.out.join("truth.csv");
            write_truth(&truth, cfg.sim.dt, &path)?;
            eprintln!("wrote {} ({} samples)", path.display(), truth.len());
        }
        Command::Run { common } => {
            let cfg = common.config()?;
            out_dir(&common.out)?;
            let log = run_experiment(&cfg)?;
            write_text(&common.out.join("config.toml"), &cfg.to_toml_string())?;
            let path = common.out.join("run.csv");
            write_log(&log, &path)?;
            if let Some(last) = log.last() {
                eprintln!(
                    "wrote {} ({} records); final errors: angle {:.3e} rad, position {:.3e} m",
                    path.display(),
                    log.len(),
                    last.errors.angle,
                    last.errors.position
                );
            }
        }
        Command::Sweep {
            common,
            param,
            values,
        } => {
            let cfg = common.config()?;
            let axis = match param {
                Param::Dt => SweepAxis::Dt,
                Param::NoiseWidth => SweepAxis::NoiseWidth,
            };
            for &v in &values {
                let mut c = cfg.clone();
                axis.apply(&mut c, v);
                c.validate()?;
            }
            out_dir(&common.out)?;
            let name = match param {
                Param::Dt => "dt",
                Param::NoiseWidth => "noise_width",
            };
            let mut summary = format!(
                "{name},records,final_err_angle,final_err_pos,final_err_omega,final_err_nu\n"
            );
            let mut first_err = None;
            for (v, result) in sweep(&cfg, axis, &values) {
                match result {
                    Ok(log) => {
                        write_log(&log, &common.out.join(format!("run_{name}_{v}.csv")))?;
                        let e = log.last().map(|r| r.errors).unwrap_or_default();
                        summary.push_str(&format!(
                            "{v},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                            log.len(),
                            e.angle,
                            e.position,
                            e.omega,
                            e.nu
                        ));
                    }
                    Err(e) => {
                        eprintln!("{name} = {v}: {e}");
                        first_err.get_or_insert(e);
                    }
                }
            }
            write_text(&common.out.join("sweep_summary.csv"), &summary)?;
            if let Some(e) = first_err {
                return Err(e);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else if e.is_numerical() {
                if let Some(step) = e.step() {
                    eprintln!("failed at step {step}");
                }
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
