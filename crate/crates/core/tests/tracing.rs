use std::path::{Path, PathBuf};

use qtrace::classical::{render_classical, render_classical_with_error, sample_direction_uniform, TracerConfig};
use qtrace::paths::{evaluate_color_table, lattice_mean, lattice_mean_image, trace_path_deterministic, PathIdLayout};
use qtrace::pipeline::log_log_slope;
use qtrace::rng::{stream_rng, Domain};
use qtrace::{load_scene, Frame, Image, Scene, Vec3};

fn fixture(name: &str) -> Scene {
    let path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name);
    load_scene(path).unwrap()
}

#[test]
fn hemisphere_sampler_is_uniform_in_solid_angle() {
    // Equal-solid-angle bins: 10 bands of z times 10 sectors of azimuth.
    let frame = Frame::from_normal(Vec3::new(0.3, -0.5, 0.8).normalize());
    let mut rng = stream_rng(11, Domain::Tracer, 0, 0);
    let n = 100_000;
    let mut bins = [0u32; 100];
    for _ in 0..n {
        let (d, pdf) = sample_direction_uniform(&mut rng, &frame);
        assert_eq!(pdf, 1.0 / (2.0 * std::f64::consts::PI));
        let l = frame.to_local(d);
        assert!(l.z >= 0.0);
        let zb = ((l.z * 10.0) as usize).min(9);
        let phi = l.y.atan2(l.x).rem_euclid(2.0 * std::f64::consts::PI);
        let pb = ((phi / (2.0 * std::f64::consts::PI) * 10.0) as usize).min(9);
        bins[zb * 10 + pb] += 1;
    }
    let expected = n as f64 / 100.0;
    let chi2: f64 = bins.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    // 99 degrees of freedom; 148 is the 0.999 quantile.
    assert!(chi2 < 148.0, "chi-square {chi2}");
}

#[test]
fn emissive_scene_is_exact_for_any_ray_count() {
    let scene = fixture("emissive.scene");
    for rays in [1, 7, 64] {
        let img = render_classical(&scene, &TracerConfig::new(3, rays, 5).unwrap());
        assert!(img.pixels.iter().all(|p| *p == Vec3::splat(0.5)));
    }
}

#[test]
fn lattice_furnace_is_exact() {
    // Midpoint lattice integrates the linear cosine exactly, so the
    // deterministic tracer reproduces L (1 + albedo) to rounding.
    let scene = fixture("furnace.scene");
    let layout = PathIdLayout::equal_split(8, 2, 0).unwrap();
    let img = lattice_mean_image(&scene, &layout, 20).unwrap();
    for p in &img.pixels {
        assert!((p.x - 0.75).abs() < 1e-12, "{p:?}");
    }
}

#[test]
fn streamed_mean_equals_table_mean() {
    let scene = fixture("cornell.scene");
    let layout = PathIdLayout::equal_split(8, 2, 0).unwrap();
    for pixel in [(0, 0), (3, 4), (7, 2)] {
        let table = evaluate_color_table(pixel, &scene, &layout, 20).unwrap();
        let two_pass = table.iter().fold(Vec3::ZERO, |a, &c| a + c) / table.len() as f64;
        let mut streamed = Vec3::ZERO;
        for raw in 0..layout.path_count() {
            streamed += trace_path_deterministic(raw, pixel, &scene, &layout);
        }
        streamed = streamed / layout.path_count() as f64;
        assert!((two_pass - streamed).length() < 1e-12);
        assert!((lattice_mean(pixel, &scene, &layout) - two_pass).length() < 1e-12);
    }
}

#[test]
fn classical_error_falls_as_inverse_square_root() {
    let scene = fixture("cornell.scene");
    let reference = render_classical(&scene, &TracerConfig::new(2, 1 << 17, 99).unwrap());
    let trials = 6;
    let points: Vec<(f64, f64)> = (6..=12)
        .map(|k| {
            let rays = 1usize << k;
            let mse: f64 = (0..trials)
                .map(|s| {
                    let img = render_classical(&scene, &TracerConfig::new(2, rays, 1000 + s).unwrap());
                    img.rmse(&reference).powi(2)
                })
                .sum::<f64>()
                / trials as f64;
            (rays as f64, mse.sqrt())
        })
        .collect();
    let slope = log_log_slope(&points);
    assert!((slope + 0.5).abs() <= 0.1, "slope {slope}, points {points:?}");
}

fn rmse(a: &Image, b: &Image) -> f64 {
    a.rmse(b)
}

#[test]
fn lattice_mean_converges_towards_monte_carlo() {
    let scene = fixture("cornell.scene");
    let mc = render_classical_with_error(&scene, &TracerConfig::new(2, 100_000, 3).unwrap());
    let errors: Vec<f64> = [4u32, 8, 12, 16]
        .iter()
        .map(|&r| {
            let layout = PathIdLayout::equal_split(r, 2, 0).unwrap();
            rmse(&lattice_mean_image(&scene, &layout, 20).unwrap(), &mc.mean)
        })
        .collect();
    let steps_down = errors.windows(2).filter(|w| w[1] <= w[0]).count();
    assert_eq!(steps_down, 3, "errors {errors:?}");
}
