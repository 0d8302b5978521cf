use foothold_core::geom::Vec3;
use foothold_core::grid::Grid;
use foothold_core::sensor::{apply_noise, render_depth, CameraModel, NoiseModel, Raycaster, RobotPose};
use foothold_core::terrain::{generate, HeightField, TerrainKind, TerrainSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn inside(hf: &HeightField, p: Vec3) -> bool {
    hf.height_at(p.x, p.y).is_some_and(|h| p.z <= h)
}

/// First surface crossing by fixed-step marching, refined by bisection.
fn march(hf: &HeightField, o: Vec3, d: Vec3, max_t: f64, step: f64) -> Option<f64> {
    let n = (max_t / step).ceil() as usize;
    if inside(hf, o) {
        return Some(0.0);
    }
    let mut prev = 0.0;
    for k in 1..=n {
        let t = (k as f64 * step).min(max_t);
        if inside(hf, o + d * t) {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if inside(hf, o + d * mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        prev = t;
    }
    None
}

fn agrees(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= 1e-3,
        _ => false,
    }
}

fn random_field(seed: u64) -> HeightField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = Grid::from_fn(40, 40, |_, _| rng.random_range(-0.5..0.3));
    HeightField::from_grids(0.05, [-1.0, -1.0], h, Grid::filled(40, 40, true))
}

fn fields() -> Vec<HeightField> {
    let mut v: Vec<HeightField> = [TerrainKind::SteppingStones, TerrainKind::SteppingBeams, TerrainKind::Gaps]
        .into_iter()
        .map(|k| generate(&TerrainSpec::new(k, 1.0, 11)).unwrap())
        .collect();
    v.push(random_field(3));
    v
}

#[test]
fn exact_traversal_matches_marching_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let max_t = 3.0;
    for hf in fields() {
        let b = hf.bounds();
        let caster = Raycaster::new(&hf);
        for _ in 0..400 {
            let ox = rng.random_range(b.x0..b.x1);
            let oy = rng.random_range(b.y0..b.y1);
            let o = Vec3::new(ox, oy, hf.max_height() + rng.random_range(0.05..0.6));
            let d = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..0.05),
            )
            .normalized();
            let exact = caster.cast(o, d, max_t);
            let mut step = 0.01;
            let mut ok = false;
            while step >= 1e-5 {
                if agrees(exact, march(&hf, o, d, max_t, step)) {
                    ok = true;
                    break;
                }
                step *= 0.5;
            }
            assert!(ok, "origin {o:?} dir {d:?}: exact {exact:?}, march {:?}", march(&hf, o, d, max_t, 1e-5));
        }
    }
}

#[test]
fn ranges_land_on_the_surface() {
    let hf = generate(&TerrainSpec::new(TerrainKind::SteppingStones, 1.0, 5)).unwrap();
    let cam = CameraModel::default();
    let pose = RobotPose::new(1.5, 0.1, 0.3, 0.2);
    let img = render_depth(&hf, &pose, &cam).unwrap();
    let (o, rot) = pose.camera_frame(&cam);
    for (r, c, &t) in img.ranges.indexed() {
        if img.is_no_return(t) {
            continue;
        }
        let d = rot.apply(cam.pixel_direction(r, c));
        assert!(inside(&hf, o + d * (t + 1e-6)), "pixel ({r},{c}) stops short of the terrain");
        assert!(!inside(&hf, o + d * (t - 1e-6)), "pixel ({r},{c}) passed through terrain");
    }
}

#[test]
fn raising_terrain_never_lengthens_a_ray() {
    let cam = CameraModel::default();
    let base = generate(&TerrainSpec::new(TerrainKind::SteppingBeams, 0.8, 9)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let pose = RobotPose::new(rng.random_range(0.0..3.0), rng.random_range(-0.5..0.5), 0.3, rng.random_range(-0.5..0.5));
        let before = render_depth(&base, &pose, &cam).unwrap();
        let mut heights = base.heights.clone();
        let (r0, c0) = base.cell_of(pose.position.x + 0.8, pose.position.y).unwrap();
        for r in r0.saturating_sub(3)..(r0 + 3).min(heights.rows()) {
            for c in c0.saturating_sub(2)..(c0 + 2).min(heights.cols()) {
                heights[(r, c)] += rng.random_range(0.0..0.15);
            }
        }
        let raised = HeightField::from_grids(base.cell_m, base.origin, heights, base.safe.clone());
        let after = render_depth(&raised, &pose, &cam).unwrap();
        for (a, b) in after.ranges.iter().zip(before.ranges.iter()) {
            assert!(*a <= *b + 1e-9, "range grew from {b} to {a}");
        }
    }
}

#[test]
fn noise_is_keyed_by_seed_and_timestamp() {
    let hf = HeightField::flat(200, 120, 0.05, [-2.0, -3.0], 0.0);
    let cam = CameraModel::default();
    let mut img = render_depth(&hf, &RobotPose::new(0.0, 0.0, 0.3, 0.0), &cam).unwrap();
    let nm = NoiseModel {
        gaussian_sigma_m: 0.02,
        dropout_prob: 0.1,
        seed: 5,
    };
    let a = apply_noise(&img, &nm);
    assert_eq!(a, apply_noise(&img, &nm));
    assert_ne!(a, apply_noise(&img, &NoiseModel { seed: 6, ..nm }));
    img.timestamp_s = 0.1;
    assert_ne!(a.ranges, apply_noise(&img, &nm).ranges);

    let clean = render_depth(&hf, &RobotPose::new(0.0, 0.0, 0.3, 0.0), &cam).unwrap();
    let mut dropped = 0;
    let mut returns = 0;
    for (n, c) in a.ranges.iter().zip(clean.ranges.iter()) {
        if clean.is_no_return(*c) {
            assert!(a.is_no_return(*n), "no-return pixel gained a range");
            continue;
        }
        returns += 1;
        if a.is_no_return(*n) {
            dropped += 1;
        }
        assert!(*n >= cam.min_range_m && *n <= cam.max_range_m);
    }
    let frac = dropped as f64 / returns as f64;
    assert!((0.06..0.14).contains(&frac), "dropout fraction {frac}");
}
