use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qtrace::pipeline::{emit_distribution, run_scaling_experiment, RenderJob, RenderMode, ScalingConfig};
use qtrace::{load_scene, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "qtrace", version, about = "Quantum-counting ray tracing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Quantum,
    Classical,
    Reference,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene to a binary PPM.
    Render {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Maximum path depth D.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Path-id bits r, split evenly over the depths.
        #[arg(long = "path-bits", default_value_t = 8)]
        path_bits: u32,
        /// Comparator bits c.
        #[arg(long = "comparator-bits", default_value_t = 6)]
        comparator_bits: u32,
        /// Integer bits b: colors are clamped to [0, 2^b).
        #[arg(long = "integer-bits", default_value_t = 0, allow_negative_numbers = true)]
        integer_bits: i32,
        /// Counting-register bits t (T = 2^t).
        #[arg(long = "counting-bits", default_value_t = 10)]
        counting_bits: u32,
        /// Independent counting repetitions B.
        #[arg(long, default_value_t = 8)]
        reps: usize,
        /// Rays per pixel for the classical tracer.
        #[arg(long, default_value_t = 256)]
        rays: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per pixel/channel diagnostics CSV (quantum mode).
        #[arg(long)]
        diag: Option<PathBuf>,
        /// Linear-radiance CSV of the rendered image.
        #[arg(long)]
        linear: Option<PathBuf>,
    },
    /// Sweep query budgets and compare error scaling of both arms.
    Scaling {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write the quantum-counting outcome distribution for a phase.
    Distribution {
        #[arg(long)]
        theta: f64,
        #[arg(long = "t-bits")]
        t_bits: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> qtrace::Result<()> {
    match cli.command {
        Command::Render {
            mode,
            scene,
            out,
            depth,
            path_bits,
            comparator_bits,
            integer_bits,
            counting_bits,
            reps,
            rays,
            seed,
            diag,
            linear,
        } => {
            let job = RenderJob {
                scene_path: scene,
                mode: match mode {
                    Mode::Quantum => RenderMode::Quantum,
                    Mode::Classical => RenderMode::Classical,
                    Mode::Reference => RenderMode::Reference,
                },
                depth,
                path_bits,
                comparator_bits,
                integer_bits,
                t_bits: counting_bits,
                reps,
                rays,
                seed,
                out,
                diagnostics: diag,
                linear_csv: linear,
            };
            job.run().map(|_| ())
        }
        Command::Scaling {
            scene,
            out,
            trials,
            seed,
        } => {
            let scene = load_scene(&scene)?;
            let cfg = ScalingConfig {
                trials,
                seed,
                ..ScalingConfig::default()
            };
            let report = run_scaling_experiment(&scene, &cfg)?;
            std::fs::write(&out, report.to_csv()).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            println!("{}", report.summary());
            Ok(())
        }
        Command::Distribution { theta, t_bits, out } => {
            let csv = emit_distribution(theta, t_bits)?;
            std::fs::write(&out, csv).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qtrace: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_IO })
        }
    }
}
