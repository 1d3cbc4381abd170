//! Monte Carlo path tracer used as the classical baseline.
//!
//! One random continuation per bounce, fixed maximum depth, uniform
//! hemisphere sampling and a Lambertian BSDF. Samples are never clamped.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Frame, Vec3};
use crate::image::{Image, Rgb};
use crate::rng::{stream_rng, Domain};
use crate::scene::{nearest_chain, primary_ray, Ray, Scene};

pub const UNIFORM_HEMISPHERE_PDF: f64 = 1.0 / (2.0 * PI);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TracerConfig {
    /// Maximum number of path segments (1 = primary ray only).
    pub max_depth: usize,
    pub rays_per_pixel: usize,
    pub seed: u64,
}

impl TracerConfig {
    pub fn new(max_depth: usize, rays_per_pixel: usize, seed: u64) -> Result<Self> {
        if max_depth == 0 {
            return Err(Error::config("max depth must be at least 1"));
        }
        if rays_per_pixel == 0 {
            return Err(Error::config("rays per pixel must be at least 1"));
        }
        if max_depth > 16 {
            return Err(Error::config("max depth above 16 exceeds the per-sample rng window"));
        }
        Ok(TracerConfig {
            max_depth,
            rays_per_pixel,
            seed,
        })
    }
}

/// Uniform direction on the hemisphere around `frame.normal`, with its pdf.
pub fn sample_direction_uniform<R: Rng + ?Sized>(rng: &mut R, frame: &Frame) -> (Vec3, f64) {
    let u: f64 = rng.random();
    let z: f64 = rng.random();
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * PI * u;
    let local = Vec3::new(r * phi.cos(), r * phi.sin(), z);
    (frame.to_world(local), UNIFORM_HEMISPHERE_PDF)
}

/// Radiance carried back along one random path starting with `ray`.
pub fn trace_path_mc<R: Rng + ?Sized>(
    ray: Ray,
    scene: &Scene,
    max_depth: usize,
    rng: &mut R,
) -> Rgb {
    let mut radiance = Rgb::ZERO;
    let mut throughput = Rgb::ONE;
    let mut ray = ray;
    for depth in 1..=max_depth {
        let hit = nearest_chain(&ray, scene);
        if !hit.exists {
            radiance += throughput.mul_elem(scene.background);
            break;
        }
        let material = scene.material(&hit);
        radiance += throughput.mul_elem(material.emission);
        if depth == max_depth {
            break;
        }
        let frame = Frame::from_normal(hit.normal);
        let (dir, pdf) = sample_direction_uniform(rng, &frame);
        let cos = hit.normal.dot(dir);
        let bsdf = material.albedo / PI;
        throughput = throughput.mul_elem(bsdf) * (cos / pdf);
        ray = Ray {
            origin: hit.position,
            direction: dir,
        };
    }
    radiance
}

/// One jittered sample of pixel `(x, y)`, drawn from its own substream.
pub fn pixel_sample(scene: &Scene, cfg: &TracerConfig, x: usize, y: usize, sample: u64) -> Rgb {
    let pixel_index = (y * scene.camera.width + x) as u64;
    let mut rng = stream_rng(cfg.seed, Domain::Tracer, pixel_index, sample);
    let jitter = (rng.random::<f64>(), rng.random::<f64>());
    let ray = primary_ray(&scene.camera, (x, y), jitter);
    trace_path_mc(ray, scene, cfg.max_depth, &mut rng)
}

/// Per-pixel sample mean and standard error of the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalRender {
    pub mean: Image,
    pub std_error: Image,
}

/// Averages `rays_per_pixel` independent samples per pixel.
pub fn render_classical(scene: &Scene, cfg: &TracerConfig) -> Image {
    render_classical_with_error(scene, cfg).mean
}

pub fn render_classical_with_error(scene: &Scene, cfg: &TracerConfig) -> ClassicalRender {
    let cam = &scene.camera;
    let stats: Vec<(Rgb, Rgb)> = (0..cam.pixel_count())
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % cam.width, i / cam.width);
            // Welford accumulation per channel
            let mut mean = Rgb::ZERO;
            let mut m2 = Rgb::ZERO;
            for s in 0..cfg.rays_per_pixel {
                let v = pixel_sample(scene, cfg, x, y, s as u64);
                let delta = v - mean;
                mean += delta / (s + 1) as f64;
                m2 += delta.mul_elem(v - mean);
            }
            let n = cfg.rays_per_pixel as f64;
            let se = if cfg.rays_per_pixel > 1 {
                let var = m2 / (n - 1.0);
                Rgb::new(var.x.sqrt(), var.y.sqrt(), var.z.sqrt()) / n.sqrt()
            } else {
                Rgb::ZERO
            };
            (mean, se)
        })
        .collect();
    let (mean, se): (Vec<Rgb>, Vec<Rgb>) = stats.into_iter().unzip();
    ClassicalRender {
        mean: Image::from_pixels(cam.width, cam.height, mean),
        std_error: Image::from_pixels(cam.width, cam.height, se),
    }
}
