//! Deterministic enumeration of the fixed-depth path tree.
//!
//! A path id is a bit string split into one field per depth. The depth-1
//! field selects a cell-centered jitter point inside the pixel; every later
//! field selects a cell-centered lattice point that the equal-area map sends
//! onto the hemisphere above the previous hit. Evaluating every id gives the
//! table of path colors whose average the counting stage estimates.
//!
//! Bit order of a raw path id (most significant first):
//! `depth 1 | depth 2 | ... | depth D`, and within each depth field the
//! first lattice axis occupies the high half.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Frame, Vec3};
use crate::image::{Image, Rgb};
use crate::scene::{nearest_chain, primary_ray, Ray, Scene};

/// Default cap on path bits: 2^20 paths per pixel.
pub const DEFAULT_PATH_BITS_CAP: u32 = 20;

/// Jacobian determinant of the equal-area hemisphere map.
pub const HEMISPHERE_JACOBIAN: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathIdLayout {
    bits_per_depth: Vec<u32>,
    comparator_bits: u32,
}

impl PathIdLayout {
    /// Explicit per-depth allocation. Each entry must be even (two lattice axes).
    pub fn new(bits_per_depth: Vec<u32>, comparator_bits: u32) -> Result<Self> {
        if bits_per_depth.is_empty() {
            return Err(Error::config("path layout needs at least one depth"));
        }
        if let Some((k, b)) = bits_per_depth.iter().enumerate().find(|(_, b)| *b % 2 != 0) {
            return Err(Error::config(format!(
                "depth {} has {b} bits; per-depth bit counts must be even",
                k + 1
            )));
        }
        let layout = PathIdLayout {
            bits_per_depth,
            comparator_bits,
        };
        if layout.id_bits() > 62 {
            return Err(Error::config("id register wider than 62 bits"));
        }
        Ok(layout)
    }

    /// Splits `path_bits` as evenly as possible over `depth` depths, in whole
    /// axis pairs; leftover pairs go to the shallowest depths.
    pub fn equal_split(path_bits: u32, depth: usize, comparator_bits: u32) -> Result<Self> {
        if depth == 0 {
            return Err(Error::config("depth must be at least 1"));
        }
        if path_bits % 2 != 0 {
            return Err(Error::config(format!(
                "path bits r = {path_bits} must be even"
            )));
        }
        let pairs = path_bits / 2;
        let d = depth as u32;
        let bits = (0..d)
            .map(|k| 2 * (pairs / d + u32::from(k < pairs % d)))
            .collect();
        PathIdLayout::new(bits, comparator_bits)
    }

    pub fn depth(&self) -> usize {
        self.bits_per_depth.len()
    }

    pub fn bits_per_depth(&self) -> &[u32] {
        &self.bits_per_depth
    }

    pub fn comparator_bits(&self) -> u32 {
        self.comparator_bits
    }

    /// r: total path bits.
    pub fn path_bits(&self) -> u32 {
        self.bits_per_depth.iter().sum()
    }

    /// n = r + c: width of the full id register.
    pub fn id_bits(&self) -> u32 {
        self.path_bits() + self.comparator_bits
    }

    pub fn path_count(&self) -> u64 {
        1u64 << self.path_bits()
    }

    /// Shift of depth `k` (0-based) inside a raw path id.
    fn shift(&self, k: usize) -> u32 {
        self.bits_per_depth[k + 1..].iter().sum()
    }
}

/// Lattice coordinates of one depth field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeIndex {
    pub u: u64,
    pub v: u64,
    pub axis_bits: u32,
}

impl LatticeIndex {
    pub fn point(&self) -> (f64, f64) {
        (
            lattice_point(self.u, self.axis_bits),
            lattice_point(self.v, self.axis_bits),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathId {
    pub raw: u64,
    pub per_depth: Vec<LatticeIndex>,
}

impl PathId {
    pub fn decompose(layout: &PathIdLayout, raw: u64) -> PathId {
        debug_assert!(raw < layout.path_count());
        let per_depth = (0..layout.depth()).map(|k| field(layout, raw, k)).collect();
        PathId { raw, per_depth }
    }

    pub fn compose(layout: &PathIdLayout, per_depth: &[LatticeIndex]) -> u64 {
        per_depth.iter().enumerate().fold(0, |acc, (k, idx)| {
            let half = layout.bits_per_depth[k] / 2;
            acc | (((idx.u << half) | idx.v) << layout.shift(k))
        })
    }
}

fn field(layout: &PathIdLayout, raw: u64, k: usize) -> LatticeIndex {
    let bits = layout.bits_per_depth[k];
    let half = bits / 2;
    let value = (raw >> layout.shift(k)) & ((1u64 << bits) - 1);
    LatticeIndex {
        u: value >> half,
        v: value & ((1u64 << half) - 1),
        axis_bits: half,
    }
}

/// Cell-centered lattice coordinate `(index + 0.5) / 2^axis_bits`.
pub fn lattice_point(index: u64, axis_bits: u32) -> f64 {
    debug_assert!(index < (1u64 << axis_bits));
    (index as f64 + 0.5) / (1u64 << axis_bits) as f64
}

/// Lambert cylindrical equal-area map from the unit square onto the
/// hemisphere around `frame.normal`: height `v`, azimuth `2 pi u`.
/// Returns the direction and the (constant) Jacobian determinant.
pub fn map_hemisphere(u: f64, v: f64, frame: &Frame) -> (Vec3, f64) {
    let z = v;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * PI * u;
    let local = Vec3::new(r * phi.cos(), r * phi.sin(), z);
    (frame.to_world(local), HEMISPHERE_JACOBIAN)
}

/// Color of path `raw` through `pixel`: the deterministic counterpart of
/// [`crate::classical::trace_path_mc`], with the Jacobian in place of `1/pdf`.
pub fn trace_path_deterministic(
    raw: u64,
    pixel: (usize, usize),
    scene: &Scene,
    layout: &PathIdLayout,
) -> Rgb {
    let jitter = field(layout, raw, 0).point();
    let mut ray = primary_ray(&scene.camera, pixel, jitter);
    let max_depth = layout.depth();
    let mut radiance = Rgb::ZERO;
    let mut throughput = Rgb::ONE;
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
        let (u, v) = field(layout, raw, depth).point();
        let frame = Frame::from_normal(hit.normal);
        let (dir, jacobian) = map_hemisphere(u, v, &frame);
        let cos = hit.normal.dot(dir);
        throughput = throughput.mul_elem(material.albedo / PI) * (cos * jacobian);
        ray = Ray {
            origin: hit.position,
            direction: dir,
        };
    }
    radiance
}

fn check_cap(layout: &PathIdLayout, cap: u32) -> Result<()> {
    if layout.path_bits() > cap {
        return Err(Error::config(format!(
            "path bits r = {} exceeds the cap of {cap}",
            layout.path_bits()
        )));
    }
    Ok(())
}

/// RGB color of every path id for one pixel, in id order.
pub fn evaluate_color_table(
    pixel: (usize, usize),
    scene: &Scene,
    layout: &PathIdLayout,
    cap: u32,
) -> Result<Vec<Rgb>> {
    check_cap(layout, cap)?;
    Ok((0..layout.path_count())
        .map(|raw| trace_path_deterministic(raw, pixel, scene, layout))
        .collect())
}

/// One channel of [`evaluate_color_table`]: the oracle content for every id.
pub fn evaluate_oracle_table(
    pixel: (usize, usize),
    channel: usize,
    scene: &Scene,
    layout: &PathIdLayout,
    cap: u32,
) -> Result<Vec<f64>> {
    assert!(channel < 3, "channel index {channel} out of range");
    Ok(evaluate_color_table(pixel, scene, layout, cap)?
        .into_iter()
        .map(|c| c[channel])
        .collect())
}

/// Streaming average over all path ids, without materializing the table.
pub fn lattice_mean(pixel: (usize, usize), scene: &Scene, layout: &PathIdLayout) -> Rgb {
    let n = layout.path_count();
    let sum = (0..n).fold(Rgb::ZERO, |acc, raw| {
        acc + trace_path_deterministic(raw, pixel, scene, layout)
    });
    sum / n as f64
}

/// Per-pixel lattice means for the whole image.
pub fn lattice_mean_image(scene: &Scene, layout: &PathIdLayout, cap: u32) -> Result<Image> {
    check_cap(layout, cap)?;
    let cam = &scene.camera;
    let pixels = (0..cam.pixel_count())
        .into_par_iter()
        .map(|i| lattice_mean((i % cam.width, i / cam.width), scene, layout))
        .collect();
    Ok(Image::from_pixels(cam.width, cam.height, pixels))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct TableKey {
    scene: u64,
    pixel: (usize, usize),
    channel: usize,
    layout: PathIdLayout,
}

/// Memoizes oracle tables keyed by (scene hash, pixel, channel, layout).
#[derive(Debug, Default)]
pub struct OracleCache {
    tables: Mutex<HashMap<TableKey, Arc<Vec<f64>>>>,
}

impl OracleCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_evaluate(
        &self,
        pixel: (usize, usize),
        channel: usize,
        scene: &Scene,
        layout: &PathIdLayout,
        cap: u32,
    ) -> Result<Arc<Vec<f64>>> {
        let key = TableKey {
            scene: scene.content_hash(),
            pixel,
            channel,
            layout: layout.clone(),
        };
        if let Some(t) = self.tables.lock().unwrap().get(&key) {
            return Ok(Arc::clone(t));
        }
        // evaluated outside the lock; a racing duplicate is identical
        let table = Arc::new(evaluate_oracle_table(pixel, channel, scene, layout, cap)?);
        let mut guard = self.tables.lock().unwrap();
        Ok(Arc::clone(guard.entry(key).or_insert(table)))
    }

    pub fn len(&self) -> usize {
        self.tables.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `id,color` CSV of one oracle table.
pub fn oracle_table_csv(table: &[f64]) -> String {
    let mut s = String::from("id,color\n");
    for (i, c) in table.iter().enumerate() {
        s.push_str(&format!("{i},{c}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Camera, Material, Triangle};
    use proptest::prelude::*;

    #[test]
    fn lattice_points() {
        assert_eq!(lattice_point(0, 1), 0.25);
        assert_eq!(lattice_point(1, 1), 0.75);
        assert_eq!(lattice_point(5, 3), 0.6875);
        assert_eq!(lattice_point(0, 0), 0.5);
    }

    #[test]
    fn hemisphere_map_landmarks() {
        let frame = Frame::from_normal(Vec3::new(0.0, 0.0, 1.0));
        let (pole, jac) = map_hemisphere(0.3, 1.0, &frame);
        assert!((pole - frame.normal).length() < 1e-12);
        assert_eq!(jac, 2.0 * PI);
        let (d, _) = map_hemisphere(0.0, 0.0, &frame);
        assert!((d - frame.tangent).length() < 1e-12);
        let (d, _) = map_hemisphere(0.25, 0.0, &frame);
        assert!((d - frame.bitangent).length() < 1e-12);
    }

    #[test]
    fn equal_split_distributes_pairs() {
        let l = PathIdLayout::equal_split(8, 2, 6).unwrap();
        assert_eq!(l.bits_per_depth(), &[4, 4]);
        assert_eq!(l.id_bits(), 14);
        let l = PathIdLayout::equal_split(6, 2, 0).unwrap();
        assert_eq!(l.bits_per_depth(), &[4, 2]);
        let l = PathIdLayout::equal_split(0, 3, 1).unwrap();
        assert_eq!(l.bits_per_depth(), &[0, 0, 0]);
        assert_eq!(l.path_count(), 1);
        assert!(PathIdLayout::equal_split(7, 2, 0).is_err());
        assert!(PathIdLayout::new(vec![3, 4], 0).is_err());
    }

    #[test]
    fn field_layout_is_depth_one_most_significant() {
        let l = PathIdLayout::new(vec![4, 2], 0).unwrap();
        // depth 1: u=0b10, v=0b01 ; depth 2: u=1, v=0
        let raw = 0b10_01_1_0;
        let id = PathId::decompose(&l, raw);
        assert_eq!((id.per_depth[0].u, id.per_depth[0].v), (2, 1));
        assert_eq!((id.per_depth[1].u, id.per_depth[1].v), (1, 0));
    }

    proptest! {
        #[test]
        fn decompose_compose_is_identity(
            bits in proptest::collection::vec(0u32..4, 1..4),
            seed in any::<u64>(),
        ) {
            let bits: Vec<u32> = bits.into_iter().map(|b| 2 * b).collect();
            let layout = PathIdLayout::new(bits, 0).unwrap();
            let raw = seed % layout.path_count();
            let id = PathId::decompose(&layout, raw);
            prop_assert_eq!(PathId::compose(&layout, &id.per_depth), raw);
        }

        #[test]
        fn mapped_directions_are_unit_and_above_surface(
            u in 0.0f64..1.0, v in 0.0f64..1.0,
            nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in -1.0f64..1.0,
        ) {
            let n = Vec3::new(nx, ny, nz);
            prop_assume!(n.length() > 1e-3);
            let frame = Frame::from_normal(n.normalize());
            let (d, _) = map_hemisphere(u, v, &frame);
            prop_assert!((d.length() - 1.0).abs() < 1e-9);
            prop_assert!(d.dot(frame.normal) >= -1e-12);
        }
    }

    fn emissive_scene(e: Vec3, albedo: Vec3) -> Scene {
        let cam = Camera::new(
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            1.0,
            2,
            2,
        )
        .unwrap();
        let tri = Triangle::new(
            Vec3::new(-100.0, -100.0, -1.0),
            Vec3::new(100.0, -100.0, -1.0),
            Vec3::new(0.0, 100.0, -1.0),
            0,
        );
        Scene::new(
            vec![tri],
            vec![Material::new(albedo, e).unwrap()],
            cam,
            Vec3::new(0.3, 0.1, 0.2),
        )
        .unwrap()
    }

    #[test]
    fn emissive_scene_table_is_constant() {
        let e = Vec3::new(0.25, 0.5, 0.75);
        let scene = emissive_scene(e, Vec3::ZERO);
        let layout = PathIdLayout::equal_split(6, 2, 0).unwrap();
        for ch in 0..3 {
            let t = evaluate_oracle_table((1, 0), ch, &scene, &layout, 20).unwrap();
            assert_eq!(t.len(), 64);
            assert!(t.iter().all(|&c| c == e[ch]));
        }
    }

    #[test]
    fn zero_albedo_ignores_bounce_indices() {
        let scene = emissive_scene(Vec3::new(0.4, 0.2, 0.1), Vec3::ZERO);
        let layout = PathIdLayout::new(vec![0, 4, 4], 0).unwrap();
        let first = trace_path_deterministic(0, (0, 1), &scene, &layout);
        for raw in 0..layout.path_count() {
            assert_eq!(trace_path_deterministic(raw, (0, 1), &scene, &layout), first);
        }
    }

    #[test]
    fn single_path_table() {
        let scene = emissive_scene(Vec3::splat(0.5), Vec3::splat(0.5));
        let layout = PathIdLayout::equal_split(0, 2, 0).unwrap();
        let t = evaluate_oracle_table((0, 0), 0, &scene, &layout, 20).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn cap_violation_names_r_and_cap() {
        let scene = emissive_scene(Vec3::splat(0.5), Vec3::ZERO);
        let layout = PathIdLayout::equal_split(8, 2, 0).unwrap();
        let err = evaluate_oracle_table((0, 0), 0, &scene, &layout, 6).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("r = 8") && msg.contains("cap of 6"), "{msg}");
    }

    #[test]
    fn cache_returns_identical_tables() {
        let scene = emissive_scene(Vec3::splat(0.5), Vec3::splat(0.5));
        let layout = PathIdLayout::equal_split(4, 2, 0).unwrap();
        let cache = OracleCache::new();
        let a = cache.get_or_evaluate((0, 0), 1, &scene, &layout, 20).unwrap();
        let b = cache.get_or_evaluate((0, 0), 1, &scene, &layout, 20).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
        let fresh = evaluate_oracle_table((0, 0), 1, &scene, &layout, 20).unwrap();
        assert_eq!(*a, fresh);
    }

    #[test]
    fn oracle_csv_format() {
        assert_eq!(oracle_table_csv(&[0.5, 0.25]), "id,color\n0,0.5\n1,0.25\n");
    }
}
