//! Egocentric depth camera simulated by raycasting the heightfield.
//!
//! The heightfield is a set of flat-topped columns, one per cell. Each ray is
//! walked cell by cell through every column it crosses; within a column the
//! surface is a plane, so the hit is solved in closed form. Ranges are
//! distances along the ray (not z-depth). Pixels with no return inside
//! `[min_range_m, max_range_m]` carry the sentinel `max_range_m`.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::geom::{Rot3, Vec3};
use crate::grid::Grid;
use crate::seed;
use crate::terrain::HeightField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("pose is below the terrain surface ({0})")]
    InvalidPose(String),
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("depth rate {depth_hz} Hz does not divide policy rate {policy_hz} Hz")]
    RateMismatch { policy_hz: u32, depth_hz: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CameraModel {
    pub width_px: usize,
    pub height_px: usize,
    pub hfov_rad: f64,
    pub vfov_rad: f64,
    /// Optical center in the base frame.
    pub mount_offset: Vec3,
    /// Downward tilt of the optical axis.
    pub mount_pitch_rad: f64,
    pub min_range_m: f64,
    pub max_range_m: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            width_px: 96,
            height_px: 64,
            hfov_rad: 87f64.to_radians(),
            vfov_rad: 58f64.to_radians(),
            mount_offset: Vec3::new(0.20, 0.0, 0.05),
            mount_pitch_rad: 30f64.to_radians(),
            min_range_m: 0.1,
            max_range_m: 3.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), SensorError> {
        let bad = |m: String| Err(SensorError::InvalidCamera(m));
        if self.width_px == 0 || self.height_px == 0 {
            return bad("image needs at least one pixel per axis".into());
        }
        let pi = std::f64::consts::PI;
        for (name, fov) in [("hfov", self.hfov_rad), ("vfov", self.vfov_rad)] {
            if !(fov > 0.0 && fov < pi) {
                return bad(format!("{name} {fov} outside (0, pi)"));
            }
        }
        if !(self.min_range_m > 0.0 && self.min_range_m < self.max_range_m && self.max_range_m.is_finite()) {
            return bad(format!(
                "range clip [{}, {}] must satisfy 0 < min < max",
                self.min_range_m, self.max_range_m
            ));
        }
        if !(self.mount_offset.is_finite() && self.mount_pitch_rad.is_finite()) {
            return bad("mount must be finite".into());
        }
        Ok(())
    }

    /// Unit ray direction of pixel `(row, col)` in the camera frame.
    /// Row 0 is the top of the image, column 0 its left edge.
    #[inline]
    pub fn pixel_direction(&self, row: usize, col: usize) -> Vec3 {
        let u = 2.0 * (col as f64 + 0.5) / self.width_px as f64 - 1.0;
        let v = 2.0 * (row as f64 + 0.5) / self.height_px as f64 - 1.0;
        Vec3::new(1.0, -u * (self.hfov_rad / 2.0).tan(), -v * (self.vfov_rad / 2.0).tan()).normalized()
    }

    pub fn pixel_count(&self) -> usize {
        self.width_px * self.height_px
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RobotPose {
    pub position: Vec3,
    pub yaw_rad: f64,
    pub pitch_rad: f64,
    pub roll_rad: f64,
}

impl RobotPose {
    pub fn new(x: f64, y: f64, z: f64, yaw_rad: f64) -> Self {
        Self {
            position: Vec3::new(x, y, z),
            yaw_rad,
            pitch_rad: 0.0,
            roll_rad: 0.0,
        }
    }

    pub fn rotation(&self) -> Rot3 {
        Rot3::from_ypr(self.yaw_rad, self.pitch_rad, self.roll_rad)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.yaw_rad.is_finite() && self.pitch_rad.is_finite() && self.roll_rad.is_finite()
    }

    /// World position and orientation of the camera.
    pub fn camera_frame(&self, cam: &CameraModel) -> (Vec3, Rot3) {
        let base = self.rotation();
        let origin = self.position + base.apply(cam.mount_offset);
        (origin, base * Rot3::rot_y(cam.mount_pitch_rad))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub camera: CameraModel,
    /// `height_px × width_px` ranges along each pixel ray, meters.
    pub ranges: Grid<f64>,
    pub timestamp_s: f64,
}

impl DepthImage {
    pub fn is_no_return(&self, range: f64) -> bool {
        range >= self.camera.max_range_m
    }
}

/// Precomputed per-pixel camera-frame directions.
#[derive(Clone, Debug, PartialEq)]
pub struct RayBundle {
    dirs: Vec<Vec3>,
}

impl RayBundle {
    pub fn new(cam: &CameraModel) -> Self {
        let mut dirs = Vec::with_capacity(cam.pixel_count());
        for r in 0..cam.height_px {
            for c in 0..cam.width_px {
                dirs.push(cam.pixel_direction(r, c));
            }
        }
        Self { dirs }
    }

    pub fn dirs(&self) -> &[Vec3] {
        &self.dirs
    }
}

fn check_pose(hf: &HeightField, pose: &RobotPose, cam_origin: Vec3) -> Result<(), SensorError> {
    if !pose.is_finite() {
        return Err(SensorError::InvalidPose("non-finite pose".into()));
    }
    if let Some(h) = hf.height_at(pose.position.x, pose.position.y) {
        if pose.position.z < h - 1e-6 {
            return Err(SensorError::InvalidPose(format!(
                "base z {:.4} below terrain {h:.4}",
                pose.position.z
            )));
        }
    }
    if let Some(h) = hf.height_at(cam_origin.x, cam_origin.y) {
        if cam_origin.z <= h {
            return Err(SensorError::InvalidPose(format!(
                "camera z {:.4} inside terrain {h:.4}",
                cam_origin.z
            )));
        }
    }
    Ok(())
}

/// Renders a depth image of `hf` seen from `pose`.
pub fn render_depth(hf: &HeightField, pose: &RobotPose, cam: &CameraModel) -> Result<DepthImage, SensorError> {
    render_depth_with(hf, pose, cam, &RayBundle::new(cam), 0.0)
}

pub fn render_depth_with(
    hf: &HeightField,
    pose: &RobotPose,
    cam: &CameraModel,
    rays: &RayBundle,
    timestamp_s: f64,
) -> Result<DepthImage, SensorError> {
    cam.validate()?;
    let (origin, rot) = pose.camera_frame(cam);
    check_pose(hf, pose, origin)?;
    let caster = Raycaster::new(hf);
    let ranges: Vec<f64> = rays
        .dirs()
        .iter()
        .map(|&d| {
            let dir = rot.apply(d);
            match caster.cast(origin, dir, cam.max_range_m) {
                Some(t) if t >= cam.min_range_m => t,
                _ => cam.max_range_m,
            }
        })
        .collect();
    Ok(DepthImage {
        camera: cam.clone(),
        ranges: Grid::from_vec(cam.height_px, cam.width_px, ranges),
        timestamp_s,
    })
}

/// Ray-heightfield intersection by exact cell traversal.
pub struct Raycaster<'a> {
    hf: &'a HeightField,
    top: f64,
}

impl<'a> Raycaster<'a> {
    pub fn new(hf: &'a HeightField) -> Self {
        Self {
            hf,
            top: hf.max_height(),
        }
    }

    /// Distance along the unit ray `dir` to the first terrain surface, if
    /// one lies within `max_t`. Leaving the grid means no terrain.
    pub fn cast(&self, origin: Vec3, dir: Vec3, max_t: f64) -> Option<f64> {
        let hf = self.hf;
        let cell = hf.cell_m;
        let b = hf.bounds();

        // Nothing to hit above the highest column.
        let mut t0 = 0.0f64;
        if origin.z > self.top {
            if dir.z >= 0.0 {
                return None;
            }
            t0 = (origin.z - self.top) / -dir.z;
        }
        let mut t1 = max_t;

        // Clip to the grid footprint.
        for (o, d, lo, hi) in [(origin.x, dir.x, b.x0, b.x1), (origin.y, dir.y, b.y0, b.y1)] {
            if d == 0.0 {
                if o < lo || o >= hi {
                    return None;
                }
            } else {
                let (ta, tb) = ((lo - o) / d, (hi - o) / d);
                let (ta, tb) = if ta < tb { (ta, tb) } else { (tb, ta) };
                t0 = t0.max(ta);
                t1 = t1.min(tb);
            }
        }
        if t0 >= t1 {
            return None;
        }

        let start = origin + dir * t0;
        let mut col = (((start.x - hf.origin[0]) / cell).floor() as i64).clamp(0, hf.cols() as i64 - 1);
        let mut row = (((start.y - hf.origin[1]) / cell).floor() as i64).clamp(0, hf.rows() as i64 - 1);

        let axis = |o: f64, d: f64, idx: i64, org: f64| -> (i64, f64, f64) {
            if d > 0.0 {
                (1, (org + (idx + 1) as f64 * cell - o) / d, cell / d)
            } else if d < 0.0 {
                (-1, (org + idx as f64 * cell - o) / d, -cell / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_c, mut next_c, delta_c) = axis(origin.x, dir.x, col, hf.origin[0]);
        let (step_r, mut next_r, delta_r) = axis(origin.y, dir.y, row, hf.origin[1]);

        let mut ta = t0;
        loop {
            let h = hf.heights[(row as usize, col as usize)];
            let tb = next_c.min(next_r).min(t1);
            let za = origin.z + ta * dir.z;
            if za <= h {
                // Entered the column through its side.
                return Some(ta);
            }
            if dir.z < 0.0 {
                let zb = origin.z + tb * dir.z;
                if zb <= h {
                    let t = (origin.z - h) / -dir.z;
                    return Some(t.clamp(ta, tb));
                }
            }
            if tb >= t1 {
                return None;
            }
            if next_c < next_r {
                col += step_c;
                ta = next_c;
                next_c += delta_c;
            } else {
                row += step_r;
                ta = next_r;
                next_r += delta_r;
            }
            if col < 0 || row < 0 || col >= hf.cols() as i64 || row >= hf.rows() as i64 {
                return None;
            }
        }
    }
}

/// Optional sim-to-real noise. Off by default.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoiseModel {
    pub gaussian_sigma_m: f64,
    pub dropout_prob: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn gaussian(sigma_m: f64, seed_value: u64) -> Self {
        Self {
            gaussian_sigma_m: sigma_m,
            dropout_prob: 0.0,
            seed: seed_value,
        }
    }

    pub fn is_off(&self) -> bool {
        self.gaussian_sigma_m == 0.0 && self.dropout_prob == 0.0
    }
}

/// Adds Gaussian range noise and dropout. The perturbation of each pixel is
/// a function of `(seed, timestamp, pixel index)` only. No-return pixels stay
/// no-return.
pub fn apply_noise(img: &DepthImage, nm: &NoiseModel) -> DepthImage {
    let mut out = img.clone();
    if nm.is_off() {
        return out;
    }
    let cam = &img.camera;
    let frame_seed = seed::derive_indexed(nm.seed, seed::STREAM_NOISE, img.timestamp_s.to_bits());
    let mut rng = seed::rng(frame_seed);
    for r in out.ranges.as_mut_slice() {
        let u: f64 = rng.random();
        let n: f64 = rng.sample(StandardNormal);
        if *r >= cam.max_range_m {
            continue;
        }
        if u < nm.dropout_prob {
            *r = cam.max_range_m;
        } else {
            *r = (*r + n * nm.gaussian_sigma_m).clamp(cam.min_range_m, cam.max_range_m);
        }
    }
    out
}

/// One entry per policy tick: whether a fresh depth frame arrives.
pub fn sensor_clock(policy_hz: u32, depth_hz: u32, ticks: u64) -> Result<Vec<(u64, bool)>, SensorError> {
    let clock = SensorClock::new(policy_hz, depth_hz)?;
    Ok((0..ticks).map(|t| (t, clock.has_new_depth(t))).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SensorClock {
    pub policy_hz: u32,
    pub depth_hz: u32,
    period: u64,
}

impl SensorClock {
    pub fn new(policy_hz: u32, depth_hz: u32) -> Result<Self, SensorError> {
        if policy_hz == 0 || depth_hz == 0 || depth_hz > policy_hz || !policy_hz.is_multiple_of(depth_hz) {
            return Err(SensorError::RateMismatch { policy_hz, depth_hz });
        }
        Ok(Self {
            policy_hz,
            depth_hz,
            period: u64::from(policy_hz / depth_hz),
        })
    }

    #[inline]
    pub fn has_new_depth(&self, tick: u64) -> bool {
        tick.is_multiple_of(self.period)
    }

    pub fn tick_seconds(&self, tick: u64) -> f64 {
        tick as f64 / f64::from(self.policy_hz)
    }
}

impl Default for SensorClock {
    fn default() -> Self {
        Self::new(50, 10).expect("50 Hz / 10 Hz")
    }
}
