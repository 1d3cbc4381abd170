//! Rendering jobs and the error-scaling comparison.
//!
//! Three arms share one scene description:
//! * quantum: per pixel and channel, enumerate the path table and estimate
//!   its mean by comparator counting;
//! * reference: the exact mean of the same path table (ground truth for the
//!   quantum arm);
//! * classical: the Monte Carlo path tracer.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::classical::{render_classical, render_classical_with_error, TracerConfig};
use crate::counting::{counting_distribution, counting_error_bound, CountingConfig, DEFAULT_QUBIT_CAP};
use crate::error::{Error, Result};
use crate::estimator::{estimate_mean, CountingBackend, FixedPointFormat, MeanEstimate};
use crate::image::{write_file, Image, Rgb};
use crate::paths::{evaluate_color_table, lattice_mean_image, PathIdLayout, DEFAULT_PATH_BITS_CAP};
use crate::rng::{splitmix64, stream_rng, Domain};
use crate::scene::{load_scene, Scene};

/// Widest counting register accepted by the analytic sampler (T = 2^24).
pub const MAX_COUNTING_BITS: u32 = 24;
/// Widest id register (r + c) accepted by the posterior search.
pub const MAX_ID_BITS: u32 = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumConfig {
    pub layout: PathIdLayout,
    pub format: FixedPointFormat,
    pub t_bits: u32,
    pub reps: usize,
    pub seed: u64,
    pub backend: CountingBackend,
    pub path_bits_cap: u32,
}

impl QuantumConfig {
    /// `path_bits` split evenly over `depth`, colors in `[0, 2^integer_bits)`.
    pub fn new(
        depth: usize,
        path_bits: u32,
        comparator_bits: u32,
        integer_bits: i32,
        t_bits: u32,
        reps: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = QuantumConfig {
            layout: PathIdLayout::equal_split(path_bits, depth, comparator_bits)?,
            format: FixedPointFormat::new(integer_bits, comparator_bits)?,
            t_bits,
            reps,
            seed,
            backend: CountingBackend::Analytic,
            path_bits_cap: DEFAULT_PATH_BITS_CAP,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layout.comparator_bits() != self.format.comparator_bits {
            return Err(Error::config("layout and fixed-point format disagree on c"));
        }
        let r = self.layout.path_bits();
        if r > self.path_bits_cap {
            return Err(Error::config(format!(
                "path bits r = {r} exceeds the cap of {}",
                self.path_bits_cap
            )));
        }
        let n = self.layout.id_bits();
        match self.backend {
            CountingBackend::Analytic => {
                if self.t_bits > MAX_COUNTING_BITS {
                    return Err(Error::config(format!(
                        "counting bits t = {} exceeds the cap of {MAX_COUNTING_BITS}",
                        self.t_bits
                    )));
                }
                if n > MAX_ID_BITS {
                    return Err(Error::config(format!(
                        "id bits r + c = {n} exceeds the cap of {MAX_ID_BITS}"
                    )));
                }
            }
            CountingBackend::Statevector => {
                if n + self.t_bits > DEFAULT_QUBIT_CAP {
                    return Err(Error::config(format!(
                        "r + c + t = {} exceeds the statevector cap of {DEFAULT_QUBIT_CAP}",
                        n + self.t_bits
                    )));
                }
            }
        }
        self.counting().map(|_| ())
    }

    pub fn counting(&self) -> Result<CountingConfig> {
        CountingConfig::new(self.layout.id_bits(), self.t_bits, self.reps, self.seed)
    }

    /// Oracle queries spent per pixel and channel: (T - 1) B.
    pub fn queries_per_channel(&self) -> u64 {
        ((1u64 << self.t_bits) - 1) * self.reps as u64
    }
}

/// Per pixel/channel record of a quantum render.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDiagnostics {
    pub x: usize,
    pub y: usize,
    pub channel: usize,
    pub reference: f64,
    pub estimate: MeanEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumRender {
    pub image: Image,
    pub reference: Image,
    pub diagnostics: Vec<ChannelDiagnostics>,
}

fn channel_stream(pixel_index: usize, channel: usize) -> u64 {
    (pixel_index * 3 + channel) as u64
}

fn estimate_pixel(
    tables: &[Rgb],
    cfg: &QuantumConfig,
    counting: &CountingConfig,
    seed: u64,
    pixel_index: usize,
) -> Result<[MeanEstimate; 3]> {
    let mut out = Vec::with_capacity(3);
    for channel in 0..3 {
        let table: Vec<f64> = tables.iter().map(|c| c[channel]).collect();
        let mut rng = stream_rng(seed, Domain::Counting, channel_stream(pixel_index, channel), 0);
        out.push(estimate_mean(&table, cfg.format, counting, cfg.backend, &mut rng)?);
    }
    Ok(out.try_into().expect("three channels"))
}

/// Path-color tables for every pixel, row-major.
pub fn color_tables(scene: &Scene, layout: &PathIdLayout, cap: u32) -> Result<Vec<Vec<Rgb>>> {
    let cam = &scene.camera;
    (0..cam.pixel_count())
        .into_par_iter()
        .map(|i| evaluate_color_table((i % cam.width, i / cam.width), scene, layout, cap))
        .collect()
}

fn table_mean(table: &[Rgb]) -> Rgb {
    table.iter().fold(Rgb::ZERO, |a, &c| a + c) / table.len() as f64
}

/// Quantum render from precomputed tables; `seed` selects the counting streams.
pub fn render_quantum_from_tables(
    scene: &Scene,
    tables: &[Vec<Rgb>],
    cfg: &QuantumConfig,
    seed: u64,
) -> Result<QuantumRender> {
    cfg.validate()?;
    let counting = cfg.counting()?;
    let cam = &scene.camera;
    let estimates: Vec<[MeanEstimate; 3]> = tables
        .par_iter()
        .enumerate()
        .map(|(i, t)| estimate_pixel(t, cfg, &counting, seed, i))
        .collect::<Result<_>>()?;

    let mut pixels = Vec::with_capacity(estimates.len());
    let mut reference = Vec::with_capacity(estimates.len());
    let mut diagnostics = Vec::with_capacity(3 * estimates.len());
    for (i, (est, table)) in estimates.into_iter().zip(tables).enumerate() {
        let ref_mean = table_mean(table);
        pixels.push(Rgb::new(est[0].mean, est[1].mean, est[2].mean));
        reference.push(ref_mean);
        for (channel, e) in est.into_iter().enumerate() {
            diagnostics.push(ChannelDiagnostics {
                x: i % cam.width,
                y: i / cam.width,
                channel,
                reference: ref_mean[channel],
                estimate: e,
            });
        }
    }
    Ok(QuantumRender {
        image: Image::from_pixels(cam.width, cam.height, pixels),
        reference: Image::from_pixels(cam.width, cam.height, reference),
        diagnostics,
    })
}

/// Evaluates every path table and estimates each pixel/channel mean.
pub fn render_quantum(scene: &Scene, cfg: &QuantumConfig) -> Result<QuantumRender> {
    cfg.validate()?;
    let tables = color_tables(scene, &cfg.layout, cfg.path_bits_cap)?;
    render_quantum_from_tables(scene, &tables, cfg, cfg.seed)
}

/// Exact mean of every pixel's path table. Independent of any seed.
pub fn render_reference(scene: &Scene, layout: &PathIdLayout, cap: u32) -> Result<Image> {
    lattice_mean_image(scene, layout, cap)
}

/// CSV with one row per pixel/channel.
pub fn diagnostics_csv(diags: &[ChannelDiagnostics]) -> String {
    let mut s = String::from(
        "x,y,channel,reference,estimate,s_true,s_map,theta_map,clamp_count,clamp_bias,outcomes\n",
    );
    for d in diags {
        let e = &d.estimate;
        let outcomes: Vec<String> = e
            .diagnostics
            .outcomes
            .iter()
            .map(|o| format!("{}/{}", o.numerator, o.resolution))
            .collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            d.x,
            d.y,
            d.channel,
            d.reference,
            e.mean,
            e.diagnostics.s_true,
            e.diagnostics.s_map,
            e.diagnostics.theta_map,
            e.diagnostics.clamp_count,
            e.diagnostics.clamp_bias,
            outcomes.join(" ")
        );
    }
    s
}

/// `theta_tilde,probability` rows of the counting distribution.
pub fn emit_distribution(theta: f64, t_bits: u32) -> Result<String> {
    if !(0.0..=0.5).contains(&theta) {
        return Err(Error::config(format!("theta = {theta} outside [0, 1/2]")));
    }
    if t_bits == 0 || t_bits > MAX_COUNTING_BITS {
        return Err(Error::config(format!("t = {t_bits} outside [1, {MAX_COUNTING_BITS}]")));
    }
    let t = 1u64 << t_bits;
    let mut s = String::from("theta_tilde,probability\n");
    for (k, p) in counting_distribution(theta, t).iter().enumerate() {
        let _ = writeln!(s, "{},{}", k as f64 / t as f64, p);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    Quantum,
    Classical,
    Reference,
}

/// Everything needed to run one render from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderJob {
    pub scene_path: PathBuf,
    pub mode: RenderMode,
    pub depth: usize,
    pub path_bits: u32,
    pub comparator_bits: u32,
    pub integer_bits: i32,
    pub t_bits: u32,
    pub reps: usize,
    pub rays: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub diagnostics: Option<PathBuf>,
    pub linear_csv: Option<PathBuf>,
}

impl RenderJob {
    pub fn quantum_config(&self) -> Result<QuantumConfig> {
        QuantumConfig::new(
            self.depth,
            self.path_bits,
            self.comparator_bits,
            self.integer_bits,
            self.t_bits,
            self.reps,
            self.seed,
        )
    }

    pub fn layout(&self) -> Result<PathIdLayout> {
        PathIdLayout::equal_split(self.path_bits, self.depth, self.comparator_bits)
    }

    pub fn tracer_config(&self) -> Result<TracerConfig> {
        TracerConfig::new(self.depth, self.rays, self.seed)
    }

    /// Validates the mode-specific settings without touching the filesystem.
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            RenderMode::Quantum => self.quantum_config().map(|_| ()),
            RenderMode::Classical => self.tracer_config().map(|_| ()),
            RenderMode::Reference => {
                let layout = self.layout()?;
                if layout.path_bits() > DEFAULT_PATH_BITS_CAP {
                    return Err(Error::config(format!(
                        "path bits r = {} exceeds the cap of {DEFAULT_PATH_BITS_CAP}",
                        layout.path_bits()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Renders and writes the PPM plus optional CSV outputs.
    pub fn run(&self) -> Result<Image> {
        self.validate()?;
        let scene = load_scene(&self.scene_path)?;
        let image = match self.mode {
            RenderMode::Quantum => {
                let render = render_quantum(&scene, &self.quantum_config()?)?;
                if let Some(path) = &self.diagnostics {
                    write_file(path, diagnostics_csv(&render.diagnostics).as_bytes())?;
                }
                render.image
            }
            RenderMode::Classical => render_classical(&scene, &self.tracer_config()?),
            RenderMode::Reference => render_reference(&scene, &self.layout()?, DEFAULT_PATH_BITS_CAP)?,
        };
        image.write_ppm(&self.out)?;
        if let Some(path) = &self.linear_csv {
            image.write_csv(path)?;
        }
        Ok(image)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingConfig {
    pub depth: usize,
    pub path_bits: u32,
    pub comparator_bits: u32,
    pub integer_bits: i32,
    pub reps: usize,
    /// Counting-register widths to sweep (T = 2^t).
    pub t_bits: Vec<u32>,
    pub trials: usize,
    /// Samples per pixel of the converged classical reference.
    pub classical_reference_rays: usize,
    pub seed: u64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            depth: 2,
            path_bits: 8,
            comparator_bits: 12,
            integer_bits: 0,
            reps: 4,
            t_bits: (4..=10).collect(),
            trials: 20,
            classical_reference_rays: 1 << 18,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Quantum,
    Classical,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Quantum => "quantum",
            Arm::Classical => "classical",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub arm: Arm,
    /// Oracle queries (path traces) per pixel, per channel for the quantum arm.
    pub budget: u64,
    pub t_bits: u32,
    pub rmse: f64,
    /// RMS over pixel/channels of `2 pi sqrt(S)/T + pi^2/T^2` with S the raw
    /// count, rescaled to mean units by `2^(b - n)`. Quantum rows only.
    pub count_bound: Option<f64>,
    /// Same expression with S read as the marked fraction S/N, times 2^b.
    pub fraction_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub quantum_slope: f64,
    pub classical_slope: f64,
}

impl ScalingReport {
    pub fn arm_rows(&self, arm: Arm) -> impl Iterator<Item = &ScalingRow> {
        self.rows.iter().filter(move |r| r.arm == arm)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("arm,budget,t_bits,rmse,count_bound,fraction_bound\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.arm.name(),
                r.budget,
                r.t_bits,
                r.rmse,
                opt(r.count_bound),
                opt(r.fraction_bound)
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "quantum slope {:.3}, classical slope {:.3} (log RMSE vs log queries)",
            self.quantum_slope, self.classical_slope
        )
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn trial_seed(seed: u64, arm: Arm, t_bits: u32, trial: usize) -> u64 {
    splitmix64(seed ^ splitmix64(((arm as u64) << 48) ^ ((t_bits as u64) << 32) ^ trial as u64))
}

/// Sweeps T for the quantum arm and the matching path budget R = (T - 1) B
/// for the classical arm, measuring RMSE against each arm's exact target:
/// the path-table mean for the quantum arm and a converged Monte Carlo
/// image for the classical arm.
pub fn run_scaling_experiment(scene: &Scene, cfg: &ScalingConfig) -> Result<ScalingReport> {
    if cfg.trials == 0 || cfg.t_bits.len() < 2 {
        return Err(Error::config("scaling needs >= 1 trial and >= 2 counting widths"));
    }
    let base = QuantumConfig::new(
        cfg.depth,
        cfg.path_bits,
        cfg.comparator_bits,
        cfg.integer_bits,
        cfg.t_bits[0],
        cfg.reps,
        cfg.seed,
    )?;
    let tables = color_tables(scene, &base.layout, base.path_bits_cap)?;
    let reference: Vec<Rgb> = tables.iter().map(|t| table_mean(t)).collect();
    let classical_reference = render_classical(
        scene,
        &TracerConfig::new(cfg.depth, cfg.classical_reference_rays, splitmix64(cfg.seed ^ 0x5eed))?,
    );

    let mut rows = Vec::new();
    for &t_bits in &cfg.t_bits {
        let qcfg = QuantumConfig { t_bits, ..base.clone() };
        qcfg.validate()?;
        let budget = qcfg.queries_per_channel();
        let mut sq_err = 0.0;
        let mut count_bound_sq = 0.0;
        let mut fraction_bound_sq = 0.0;
        for trial in 0..cfg.trials {
            let render =
                render_quantum_from_tables(scene, &tables, &qcfg, trial_seed(cfg.seed, Arm::Quantum, t_bits, trial))?;
            for d in &render.diagnostics {
                let err = d.estimate.mean - reference[d.y * scene.camera.width + d.x][d.channel];
                sq_err += err * err;
                if trial == 0 {
                    let t = 1u64 << t_bits;
                    let n = qcfg.layout.id_bits();
                    let s = d.estimate.diagnostics.s_true as f64;
                    let scale = 2f64.powi(qcfg.format.integer_bits);
                    let cb = counting_error_bound(s, t) * scale / 2f64.powi(n as i32);
                    let fb = counting_error_bound(s / 2f64.powi(n as i32), t) * scale;
                    count_bound_sq += cb * cb;
                    fraction_bound_sq += fb * fb;
                }
            }
        }
        let channels = 3 * tables.len();
        rows.push(ScalingRow {
            arm: Arm::Quantum,
            budget,
            t_bits,
            rmse: (sq_err / (channels * cfg.trials) as f64).sqrt(),
            count_bound: Some((count_bound_sq / channels as f64).sqrt()),
            fraction_bound: Some((fraction_bound_sq / channels as f64).sqrt()),
        });

        let mut sq_err = 0.0;
        for trial in 0..cfg.trials {
            let tracer = TracerConfig::new(
                cfg.depth,
                budget as usize,
                trial_seed(cfg.seed, Arm::Classical, t_bits, trial),
            )?;
            let img = render_classical(scene, &tracer);
            let e = img.rmse(&classical_reference);
            sq_err += e * e;
        }
        rows.push(ScalingRow {
            arm: Arm::Classical,
            budget,
            t_bits,
            rmse: (sq_err / cfg.trials as f64).sqrt(),
            count_bound: None,
            fraction_bound: None,
        });
    }

    let slope = |arm: Arm| {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.arm == arm)
            .map(|r| (r.budget as f64, r.rmse))
            .collect();
        log_log_slope(&pts)
    };
    Ok(ScalingReport {
        quantum_slope: slope(Arm::Quantum),
        classical_slope: slope(Arm::Classical),
        rows,
    })
}

/// Classical render with per-pixel standard errors, for convergence checks.
pub use crate::classical::ClassicalRender;

pub fn render_classical_reference(scene: &Scene, depth: usize, rays: usize, seed: u64) -> Result<ClassicalRender> {
    Ok(render_classical_with_error(scene, &TracerConfig::new(depth, rays, seed)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..8).map(|i| (2f64.powi(i), 3.0 * 2f64.powi(-i))).collect();
        assert!((log_log_slope(&pts) + 1.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = (1..8).map(|i| (4f64.powi(i), 2f64.powi(-i))).collect();
        assert!((log_log_slope(&pts) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn distribution_csv_shape() {
        let csv = emit_distribution(0.0, 3).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "theta_tilde,probability");
        assert_eq!(lines.len(), 1 + 5);
        assert_eq!(lines[1], "0,1");
        assert!(emit_distribution(0.6, 3).is_err());
        assert!(emit_distribution(0.2, 0).is_err());
    }

    #[test]
    fn query_accounting() {
        let q = QuantumConfig::new(2, 8, 6, 0, 10, 8, 0).unwrap();
        assert_eq!(q.queries_per_channel(), 1023 * 8);
        assert_eq!(q.counting().unwrap().total_queries(), q.queries_per_channel());
    }

    #[test]
    fn caps_are_enforced() {
        assert!(QuantumConfig::new(2, 22, 6, 0, 10, 8, 0).is_err());
        assert!(QuantumConfig::new(2, 8, 6, 0, 25, 8, 0).is_err());
        let mut q = QuantumConfig::new(2, 8, 6, 0, 10, 8, 0).unwrap();
        q.backend = CountingBackend::Statevector;
        assert!(q.validate().is_err());
    }
}
