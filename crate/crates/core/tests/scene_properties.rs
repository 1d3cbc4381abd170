use proptest::prelude::*;
use qtrace::scene::{intersect_triangle, nearest_chain, primary_ray, Intersection};
use qtrace::{Camera, Material, Ray, Scene, Triangle, Vec3};

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn triangle() -> impl Strategy<Value = Triangle> {
    (vec3(3.0), vec3(3.0), vec3(3.0))
        .prop_map(|(a, b, c)| Triangle::new(a, b, c, 0))
        .prop_filter("non-degenerate", |t| !t.is_degenerate())
}

fn scene_of(triangles: Vec<Triangle>) -> Scene {
    let cam = Camera::new(
        Vec3::new(0.0, 0.0, 5.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        1.0,
        4,
        4,
    )
    .unwrap();
    let mat = Material::new(Vec3::splat(0.5), Vec3::ZERO).unwrap();
    Scene::new(triangles, vec![mat], cam, Vec3::ZERO).unwrap()
}

fn brute_force_nearest(ray: &Ray, tris: &[Triangle]) -> Intersection {
    let mut best = Intersection::NONE;
    for t in tris {
        let h = intersect_triangle(ray, t);
        if h.exists && (!best.exists || h.distance < best.distance) {
            best = h;
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn nearest_chain_agrees_with_brute_force(
        tris in prop::collection::vec(triangle(), 0..12),
        origin in vec3(4.0),
        dir in vec3(1.0).prop_filter("nonzero", |d| d.length() > 1e-3),
    ) {
        let ray = Ray::new(origin, dir);
        let got = nearest_chain(&ray, &scene_of(tris.clone()));
        let want = brute_force_nearest(&ray, &tris);
        prop_assert_eq!(got.exists, want.exists);
        if want.exists {
            prop_assert_eq!(got.distance, want.distance);
        } else {
            prop_assert_eq!(got.distance, f64::MAX);
        }
    }

    #[test]
    fn cyclic_vertex_order_does_not_change_hits(
        tri in triangle(),
        origin in vec3(4.0),
        dir in vec3(1.0).prop_filter("nonzero", |d| d.length() > 1e-3),
    ) {
        let ray = Ray::new(origin, dir);
        let a = intersect_triangle(&ray, &tri);
        let b = intersect_triangle(&ray, &Triangle::new(tri.v1, tri.v2, tri.v0, 0));
        let c = intersect_triangle(&ray, &Triangle::new(tri.v2, tri.v0, tri.v1, 0));
        // Rays grazing an edge may legitimately flip between hit and miss.
        prop_assume!(a.exists == b.exists && b.exists == c.exists || !a.exists);
        if a.exists && b.exists && c.exists {
            prop_assert!((a.distance - b.distance).abs() < 1e-9);
            prop_assert!((a.distance - c.distance).abs() < 1e-9);
            prop_assert!(a.normal.dot(ray.direction) <= 0.0);
            prop_assert!(b.normal.dot(ray.direction) <= 0.0);
        }
    }

    #[test]
    fn primary_rays_stay_in_their_pixel_frustum(
        px in 0usize..6, py in 0usize..4, u in 0.0..1.0f64, v in 0.0..1.0f64,
    ) {
        let cam = Camera::new(
            Vec3::new(1.0, 2.0, 3.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 1.0, 0.0),
            0.9,
            6,
            4,
        ).unwrap();
        let ray = primary_ray(&cam, (px, py), (u, v));
        // Cone through the pixel's corners: every jittered ray must be at
        // least as close to the pixel center as the farthest corner.
        let center = primary_ray(&cam, (px, py), (0.5, 0.5)).direction;
        let min_cos = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
            .iter()
            .map(|&j| primary_ray(&cam, (px, py), j).direction.dot(center))
            .fold(f64::INFINITY, f64::min);
        prop_assert!(ray.direction.dot(center) >= min_cos - 1e-12);
        prop_assert!((ray.direction.length() - 1.0).abs() < 1e-12);
        prop_assert_eq!(ray.origin, cam.position);
    }
}
