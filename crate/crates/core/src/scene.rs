//! Scene description shared by the classical and superposed tracers.
//!
//! Geometry is a flat list of triangles; intersection queries walk that list
//! in order and keep the nearest hit, with no acceleration structure.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Hits closer than this along a ray are ignored (self-intersection offset).
pub const RAY_EPSILON: f64 = 1e-4;

const DEGENERATE_AREA: f64 = 1e-12;
const FRAME_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Creates a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Ray {
            origin,
            direction: direction.normalize(),
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v0: Vec3,
    pub v1: Vec3,
    pub v2: Vec3,
    pub material_id: usize,
}

impl Triangle {
    pub fn new(v0: Vec3, v1: Vec3, v2: Vec3, material_id: usize) -> Self {
        Triangle {
            v0,
            v1,
            v2,
            material_id,
        }
    }

    /// Twice the triangle area.
    pub fn doubled_area(&self) -> f64 {
        (self.v1 - self.v0).cross(self.v2 - self.v0).length()
    }

    pub fn is_degenerate(&self) -> bool {
        self.doubled_area() <= DEGENERATE_AREA
    }
}

/// Lambertian reflector with optional emission. The BSDF is `albedo / pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub albedo: Vec3,
    pub emission: Vec3,
}

impl Material {
    pub fn new(albedo: Vec3, emission: Vec3) -> Result<Self> {
        let m = Material { albedo, emission };
        m.validate().map_err(Error::config)?;
        Ok(m)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let albedo_ok = self
            .albedo
            .to_array()
            .iter()
            .all(|c| (0.0..=1.0).contains(c));
        if !albedo_ok {
            return Err(format!("albedo {:?} outside [0, 1]", self.albedo.to_array()));
        }
        let emission_ok = self
            .emission
            .to_array()
            .iter()
            .all(|c| c.is_finite() && *c >= 0.0);
        if !emission_ok {
            return Err(format!(
                "emission {:?} must be finite and non-negative",
                self.emission.to_array()
            ));
        }
        Ok(())
    }
}

/// Hit record. A miss is the canonical [`Intersection::NONE`] record whose
/// distance is `f64::MAX`, so "nearer" comparisons need no special case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intersection {
    pub exists: bool,
    pub distance: f64,
    pub position: Vec3,
    pub normal: Vec3,
    pub material_id: usize,
}

impl Intersection {
    pub const NONE: Intersection = Intersection {
        exists: false,
        distance: f64::MAX,
        position: Vec3::ZERO,
        normal: Vec3::ZERO,
        material_id: 0,
    };
}

/// Möller–Trumbore ray/triangle test. Two-sided: the returned normal always
/// faces back toward the ray origin.
pub fn intersect_triangle(ray: &Ray, tri: &Triangle) -> Intersection {
    let e1 = tri.v1 - tri.v0;
    let e2 = tri.v2 - tri.v0;
    let p = ray.direction.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return Intersection::NONE;
    }
    let inv_det = 1.0 / det;
    let s = ray.origin - tri.v0;
    let u = s.dot(p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return Intersection::NONE;
    }
    let q = s.cross(e1);
    let v = ray.direction.dot(q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return Intersection::NONE;
    }
    let t = e2.dot(q) * inv_det;
    if t <= RAY_EPSILON {
        return Intersection::NONE;
    }
    let mut normal = e1.cross(e2).normalize();
    if normal.dot(ray.direction) > 0.0 {
        normal = -normal;
    }
    Intersection {
        exists: true,
        distance: t,
        position: ray.at(t),
        normal,
        material_id: tri.material_id,
    }
}

/// Nearest hit over all triangles, folded sequentially in scene order.
/// On equal distances the earlier triangle is kept.
pub fn nearest_chain(ray: &Ray, scene: &Scene) -> Intersection {
    scene
        .triangles
        .iter()
        .fold(Intersection::NONE, |nearest, tri| {
            let hit = intersect_triangle(ray, tri);
            if hit.distance < nearest.distance {
                hit
            } else {
                nearest
            }
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
    /// Vertical field of view in radians.
    pub vertical_fov: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    /// Builds a pinhole camera. `right` and `up` are normalized and must be
    /// orthogonal; the camera looks along `up x right` (right-handed, so the
    /// default `right = +x, up = +y` looks down `-z`).
    pub fn new(
        position: Vec3,
        right: Vec3,
        up: Vec3,
        vertical_fov: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        Camera::build(position, right, up, vertical_fov, width, height).map_err(Error::config)
    }

    fn build(
        position: Vec3,
        right: Vec3,
        up: Vec3,
        vertical_fov: f64,
        width: usize,
        height: usize,
    ) -> std::result::Result<Self, String> {
        if right.length() == 0.0 || up.length() == 0.0 {
            return Err("camera right/up vectors must be non-zero".into());
        }
        let right = right.normalize();
        let up = up.normalize();
        if right.dot(up).abs() > FRAME_TOLERANCE {
            return Err(format!(
                "camera right and up are not orthogonal (dot = {:e})",
                right.dot(up)
            ));
        }
        if !(vertical_fov > 0.0 && vertical_fov < std::f64::consts::PI) {
            return Err(format!("vertical fov {vertical_fov} rad outside (0, pi)"));
        }
        if width == 0 || height == 0 {
            return Err("image resolution must be at least 1x1".into());
        }
        Ok(Camera {
            position,
            right,
            up,
            forward: up.cross(right),
            vertical_fov,
            width,
            height,
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Image-plane coordinates (at unit distance along `forward`) of the
    /// continuous screen position `(sx, sy)` in pixel units, y pointing down.
    pub fn screen_to_plane(&self, sx: f64, sy: f64) -> (f64, f64) {
        let tan_half = (self.vertical_fov * 0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        let px = (2.0 * sx / self.width as f64 - 1.0) * tan_half * aspect;
        let py = (1.0 - 2.0 * sy / self.height as f64) * tan_half;
        (px, py)
    }
}

/// Ray through the continuous screen position `(x + u, y + v)` on the
/// pinhole image plane. Pixel `(0, 0)` is the top-left corner.
pub fn primary_ray(camera: &Camera, pixel: (usize, usize), jitter: (f64, f64)) -> Ray {
    let (px, py) = camera.screen_to_plane(pixel.0 as f64 + jitter.0, pixel.1 as f64 + jitter.1);
    let dir = camera.forward + camera.right * px + camera.up * py;
    Ray::new(camera.position, dir)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub triangles: Vec<Triangle>,
    pub materials: Vec<Material>,
    pub camera: Camera,
    pub background: Vec3,
}

impl Scene {
    pub fn new(
        triangles: Vec<Triangle>,
        materials: Vec<Material>,
        camera: Camera,
        background: Vec3,
    ) -> Result<Self> {
        for (i, tri) in triangles.iter().enumerate() {
            if tri.material_id >= materials.len() {
                return Err(Error::config(format!(
                    "triangle {i} references material {} but only {} defined",
                    tri.material_id,
                    materials.len()
                )));
            }
            if tri.is_degenerate() {
                return Err(Error::config(format!("triangle {i} is degenerate")));
            }
        }
        for m in &materials {
            m.validate().map_err(Error::config)?;
        }
        if !background.to_array().iter().all(|c| c.is_finite() && *c >= 0.0) {
            return Err(Error::config("background emission must be non-negative"));
        }
        Ok(Scene {
            triangles,
            materials,
            camera,
            background,
        })
    }

    pub fn material(&self, hit: &Intersection) -> &Material {
        &self.materials[hit.material_id]
    }

    /// Stable 64-bit FNV-1a digest of every number in the scene.
    pub fn content_hash(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut eat = |bits: u64| {
            for byte in bits.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        let eat_vec = |v: Vec3, eat: &mut dyn FnMut(u64)| {
            for c in v.to_array() {
                eat(c.to_bits());
            }
        };
        let c = &self.camera;
        for v in [c.position, c.right, c.up, self.background] {
            eat_vec(v, &mut eat);
        }
        eat(c.vertical_fov.to_bits());
        eat(c.width as u64);
        eat(c.height as u64);
        for m in &self.materials {
            eat_vec(m.albedo, &mut eat);
            eat_vec(m.emission, &mut eat);
        }
        for t in &self.triangles {
            for v in [t.v0, t.v1, t.v2] {
                eat_vec(v, &mut eat);
            }
            eat(t.material_id as u64);
        }
        h
    }

    /// Serializes the scene in the line-oriented file format.
    pub fn to_scene_text(&self) -> String {
        let mut out = String::new();
        let c = &self.camera;
        let _ = writeln!(
            out,
            "camera {} {} {}  {} {} {}  {} {} {}  {} {} {}",
            c.position.x,
            c.position.y,
            c.position.z,
            c.right.x,
            c.right.y,
            c.right.z,
            c.up.x,
            c.up.y,
            c.up.z,
            c.vertical_fov.to_degrees(),
            c.width,
            c.height
        );
        let b = self.background;
        let _ = writeln!(out, "background {} {} {}", b.x, b.y, b.z);
        for m in &self.materials {
            let (a, e) = (m.albedo, m.emission);
            let _ = writeln!(
                out,
                "material {} {} {} {} {} {}",
                a.x, a.y, a.z, e.x, e.y, e.z
            );
        }
        for t in &self.triangles {
            let _ = writeln!(
                out,
                "triangle {} {} {} {} {} {} {} {} {} {}",
                t.v0.x, t.v0.y, t.v0.z, t.v1.x, t.v1.y, t.v1.z, t.v2.x, t.v2.y, t.v2.z, t.material_id
            );
        }
        out
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&text, path)
}

/// Parses scene text. `origin` is used only for error messages.
pub fn parse_scene(text: &str, origin: &Path) -> Result<Scene> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let invalid = |line: usize, message: String| Error::Validation {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let mut camera: Option<Camera> = None;
    let mut background: Option<Vec3> = None;
    let mut materials = Vec::new();
    let mut triangles: Vec<(usize, Triangle)> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let content = raw.split('#').next().unwrap_or("");
        let mut fields = content.split_whitespace();
        let Some(keyword) = fields.next() else {
            continue;
        };
        let args: Vec<&str> = fields.collect();
        let numbers = |expected: usize| -> Result<Vec<f64>> {
            if args.len() != expected {
                return Err(parse_err(
                    line_no,
                    format!("`{keyword}` expects {expected} values, found {}", args.len()),
                ));
            }
            args.iter()
                .map(|a| {
                    a.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| parse_err(line_no, format!("`{a}` is not a finite number")))
                })
                .collect()
        };
        let integer = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| parse_err(line_no, format!("`{s}` is not a non-negative integer")))
        };

        match keyword {
            "camera" => {
                if args.len() != 12 {
                    return Err(parse_err(
                        line_no,
                        format!("`camera` expects 12 values, found {}", args.len()),
                    ));
                }
                if camera.is_some() {
                    return Err(invalid(line_no, "camera defined more than once".into()));
                }
                let n: Vec<f64> = args[..10]
                    .iter()
                    .map(|a| {
                        a.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| parse_err(line_no, format!("`{a}` is not a finite number")))
                    })
                    .collect::<Result<_>>()?;
                let width = integer(args[10])?;
                let height = integer(args[11])?;
                let cam = Camera::build(
                    Vec3::new(n[0], n[1], n[2]),
                    Vec3::new(n[3], n[4], n[5]),
                    Vec3::new(n[6], n[7], n[8]),
                    n[9].to_radians(),
                    width,
                    height,
                )
                .map_err(|m| invalid(line_no, m))?;
                camera = Some(cam);
            }
            "background" => {
                let n = numbers(3)?;
                if background.is_some() {
                    return Err(invalid(line_no, "background defined more than once".into()));
                }
                let b = Vec3::new(n[0], n[1], n[2]);
                if b.min_elem() < 0.0 {
                    return Err(invalid(line_no, "background emission must be non-negative".into()));
                }
                background = Some(b);
            }
            "material" => {
                let n = numbers(6)?;
                let m = Material {
                    albedo: Vec3::new(n[0], n[1], n[2]),
                    emission: Vec3::new(n[3], n[4], n[5]),
                };
                m.validate().map_err(|msg| invalid(line_no, msg))?;
                materials.push(m);
            }
            "triangle" => {
                if args.len() != 10 {
                    return Err(parse_err(
                        line_no,
                        format!("`triangle` expects 10 values, found {}", args.len()),
                    ));
                }
                let n: Vec<f64> = args[..9]
                    .iter()
                    .map(|a| {
                        a.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| parse_err(line_no, format!("`{a}` is not a finite number")))
                    })
                    .collect::<Result<_>>()?;
                let material_id = integer(args[9])?;
                let tri = Triangle::new(
                    Vec3::new(n[0], n[1], n[2]),
                    Vec3::new(n[3], n[4], n[5]),
                    Vec3::new(n[6], n[7], n[8]),
                    material_id,
                );
                if tri.is_degenerate() {
                    return Err(invalid(line_no, "degenerate triangle (zero area)".into()));
                }
                triangles.push((line_no, tri));
            }
            other => {
                return Err(parse_err(line_no, format!("unknown keyword `{other}`")));
            }
        }
    }

    for (line_no, tri) in &triangles {
        if tri.material_id >= materials.len() {
            return Err(invalid(
                *line_no,
                format!(
                    "material index {} out of range ({} materials defined)",
                    tri.material_id,
                    materials.len()
                ),
            ));
        }
    }
    let camera = camera.ok_or_else(|| invalid(last_line, "no `camera` line".into()))?;

    Ok(Scene {
        triangles: triangles.into_iter().map(|(_, t)| t).collect(),
        materials,
        camera,
        background: background.unwrap_or(Vec3::ZERO),
    })
}
