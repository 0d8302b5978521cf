//! Depth-and-odometry fusion into a rolling robot-local elevation memory.
//!
//! The memory is a yaw-locked grid that extends the local heightmap window
//! by 0.5 m on every side. Its lattice stays fixed in the world while the
//! base moves: the contents shift by whole cells once the base drifts more
//! than half a cell from the lattice anchor, so fused heights are carried
//! without resampling. A change of heading resamples the memory onto the new
//! axes by nearest cell. Heights are stored as absolute elevations and
//! reported relative to the current base.
//!
//! Alongside heights the memory keeps a free-space ceiling per cell: the
//! lowest height at which any ray passed over the cell without hitting it.
//! Refinement uses it to avoid filling shadowed voids with plateau heights.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::geom::{rotate2, wrap_angle, Vec3};
use crate::grid::Grid;
use crate::localmap::{LocalHeightmap, MAP_CELL_M, MAP_COLS, MAP_ROWS};
use crate::seed;
use crate::sensor::{CameraModel, DepthImage, RayBundle, RobotPose};

pub const MEM_MARGIN_M: f64 = 0.5;
pub const MEM_ROWS: usize = MAP_ROWS + 2 * 10;
pub const MEM_COLS: usize = MAP_COLS + 2 * 10;
const MEM_X0_M: f64 = crate::localmap::MAP_X0_M - MEM_MARGIN_M;
const MEM_Y0_M: f64 = crate::localmap::MAP_Y0_M - MEM_MARGIN_M;

/// Largest Chebyshev distance, in cells, searched when filling holes.
pub const FILL_RADIUS: i64 = 3;
/// Longest run of invalid cells that refinement fills.
pub const MAX_FILL_GAP: usize = 2;
/// A fill value may exceed the observed free-space ceiling by this much.
pub const CEILING_TOL_M: f64 = 0.01;
/// Height difference that counts as a terrain edge when sharpening.
pub const SNAP_JUMP_M: f64 = 0.1;
/// Rays do not mark free space within this distance of their return, or
/// within [`STANDOFF_SIGMAS`] noise deviations if that is larger.
const CEILING_STANDOFF_M: f64 = 0.02;
const STANDOFF_SIGMAS: f64 = 3.0;
/// Offset past the measured range so a return lands inside the surface it hit.
const UNPROJECT_EPS_M: f64 = 1e-6;
/// Half-width, in noise standard deviations, of a return's position uncertainty.
const AMBIGUITY_SIGMAS: f64 = 2.0;
/// Largest per-tick base displacement accepted from odometry.
pub const MAX_TICK_TRANSLATION_M: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconError {
    #[error("depth frame camera does not match the reconstructor's camera model")]
    CameraMismatch,
    #[error("no cells are valid in both heightmaps")]
    NoValidCells,
    #[error("invalid odometry delta: {0}")]
    InvalidDelta(String),
}

/// Gaussian perturbation of one odometry increment, seeded per tick.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OdometryNoise {
    pub translation_sigma_m: f64,
    pub yaw_sigma_rad: f64,
    pub seed: u64,
    pub index: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OdometryDelta {
    /// Displacement expressed in the previous base frame.
    pub translation: Vec3,
    pub yaw_delta_rad: f64,
    pub noise: Option<OdometryNoise>,
}

impl OdometryDelta {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Exact increment taking `from` to `to`.
    pub fn between(from: &RobotPose, to: &RobotPose) -> Self {
        let d = to.position - from.position;
        let t = rotate2([d.x, d.y], -from.yaw_rad);
        Self {
            translation: Vec3::new(t[0], t[1], d.z),
            yaw_delta_rad: wrap_angle(to.yaw_rad - from.yaw_rad),
            noise: None,
        }
    }

    pub fn with_noise(mut self, noise: OdometryNoise) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn validate(&self) -> Result<(), ReconError> {
        if !(self.translation.is_finite() && self.yaw_delta_rad.is_finite()) {
            return Err(ReconError::InvalidDelta("non-finite increment".into()));
        }
        if self.translation.norm() >= MAX_TICK_TRANSLATION_M {
            return Err(ReconError::InvalidDelta(format!(
                "translation {:.4} m exceeds {MAX_TICK_TRANSLATION_M} m per tick",
                self.translation.norm()
            )));
        }
        Ok(())
    }

    /// The increment with its noise applied.
    pub fn realized(&self) -> (Vec3, f64) {
        let Some(n) = self.noise else {
            return (self.translation, self.yaw_delta_rad);
        };
        let mut rng = seed::rng(seed::derive_indexed(n.seed, seed::STREAM_ODOMETRY, n.index));
        let ex: f64 = rng.sample(StandardNormal);
        let ey: f64 = rng.sample(StandardNormal);
        let eyaw: f64 = rng.sample(StandardNormal);
        let t = self.translation;
        (
            Vec3::new(t.x + ex * n.translation_sigma_m, t.y + ey * n.translation_sigma_m, t.z),
            self.yaw_delta_rad + eyaw * n.yaw_sigma_rad,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructorState {
    /// Absolute elevations, `MEM_ROWS × MEM_COLS`.
    pub memory: Grid<f64>,
    pub valid: Grid<bool>,
    /// Updates since each cell was last written.
    pub age_ticks: Grid<u32>,
    /// Lowest free-space ray height seen over each cell.
    pub ceiling: Grid<f64>,
    /// Pose estimate from integrated odometry.
    pub last_pose: RobotPose,
    pub camera: CameraModel,
    /// Cells older than this are invalidated; `None` keeps them forever.
    pub max_age_ticks: Option<u32>,
    /// Expected standard deviation of range noise, meters.
    pub range_sigma_m: f64,
    frame_origin: [f64; 2],
    frame_yaw: f64,
    anchor: [i64; 2],
    last_frame_ts: Option<f64>,
    rays: RayBundle,
}

/// Fresh state with the default camera.
pub fn init_state(pose: RobotPose) -> ReconstructorState {
    ReconstructorState::new(pose, CameraModel::default())
}

fn snap(v: f64) -> f64 {
    (v / MAP_CELL_M).round() * MAP_CELL_M
}

impl ReconstructorState {
    pub fn new(pose: RobotPose, camera: CameraModel) -> Self {
        Self {
            memory: Grid::filled(MEM_ROWS, MEM_COLS, 0.0),
            valid: Grid::filled(MEM_ROWS, MEM_COLS, false),
            age_ticks: Grid::filled(MEM_ROWS, MEM_COLS, 0),
            ceiling: Grid::filled(MEM_ROWS, MEM_COLS, f64::INFINITY),
            last_pose: pose,
            rays: RayBundle::new(&camera),
            camera,
            max_age_ticks: None,
            range_sigma_m: 0.0,
            frame_origin: [snap(pose.position.x), snap(pose.position.y)],
            frame_yaw: pose.yaw_rad,
            anchor: [0, 0],
            last_frame_ts: None,
        }
    }

    pub fn with_max_age(mut self, ticks: Option<u32>) -> Self {
        self.max_age_ticks = ticks;
        self
    }

    pub fn with_range_sigma(mut self, sigma_m: f64) -> Self {
        self.range_sigma_m = sigma_m;
        self
    }

    /// Memory-frame center of cell `(i, j)` relative to the anchor.
    #[inline]
    fn mem_center(i: usize, j: usize) -> [f64; 2] {
        [
            MEM_X0_M + (i as f64 + 0.5) * MAP_CELL_M,
            MEM_Y0_M + (j as f64 + 0.5) * MAP_CELL_M,
        ]
    }

    /// World position of cell `(i, j)`'s center.
    pub fn cell_world(&self, i: usize, j: usize) -> [f64; 2] {
        let c = Self::mem_center(i, j);
        let a = [
            self.anchor[0] as f64 * MAP_CELL_M + c[0],
            self.anchor[1] as f64 * MAP_CELL_M + c[1],
        ];
        let r = rotate2(a, self.frame_yaw);
        [self.frame_origin[0] + r[0], self.frame_origin[1] + r[1]]
    }

    /// Memory cell containing a world point.
    #[inline]
    pub fn cell_at(&self, w: [f64; 2]) -> Option<(usize, usize)> {
        let l = rotate2([w[0] - self.frame_origin[0], w[1] - self.frame_origin[1]], -self.frame_yaw);
        let i = ((l[0] - MEM_X0_M) / MAP_CELL_M).floor() as i64 - self.anchor[0];
        let j = ((l[1] - MEM_Y0_M) / MAP_CELL_M).floor() as i64 - self.anchor[1];
        if i >= 0 && j >= 0 && (i as usize) < MEM_ROWS && (j as usize) < MEM_COLS {
            Some((i as usize, j as usize))
        } else {
            None
        }
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid.iter().filter(|&&v| v).count() as f64 / self.valid.len() as f64
    }

    fn shift(&mut self, si: i64, sj: i64) {
        let src_memory = self.memory.clone();
        let src_valid = self.valid.clone();
        let src_age = self.age_ticks.clone();
        let src_ceiling = self.ceiling.clone();
        for i in 0..MEM_ROWS {
            for j in 0..MEM_COLS {
                let (oi, oj) = (i as i64 + si, j as i64 + sj);
                match src_valid.get_signed(oi, oj) {
                    Some(&v) => {
                        let o = (oi as usize, oj as usize);
                        self.memory[(i, j)] = src_memory[o];
                        self.valid[(i, j)] = v;
                        self.age_ticks[(i, j)] = src_age[o];
                        self.ceiling[(i, j)] = src_ceiling[o];
                    }
                    None => {
                        self.memory[(i, j)] = 0.0;
                        self.valid[(i, j)] = false;
                        self.age_ticks[(i, j)] = 0;
                        self.ceiling[(i, j)] = f64::INFINITY;
                    }
                }
            }
        }
        self.anchor[0] += si;
        self.anchor[1] += sj;
    }

    fn reframe(&mut self, pose: &RobotPose) {
        let old = self.clone();
        self.frame_origin = [snap(pose.position.x), snap(pose.position.y)];
        self.frame_yaw = pose.yaw_rad;
        self.anchor = [0, 0];
        for i in 0..MEM_ROWS {
            for j in 0..MEM_COLS {
                match old.cell_at(self.cell_world(i, j)) {
                    Some(o) => {
                        self.memory[(i, j)] = old.memory[o];
                        self.valid[(i, j)] = old.valid[o];
                        self.age_ticks[(i, j)] = old.age_ticks[o];
                        self.ceiling[(i, j)] = old.ceiling[o];
                    }
                    None => {
                        self.memory[(i, j)] = 0.0;
                        self.valid[(i, j)] = false;
                        self.age_ticks[(i, j)] = 0;
                        self.ceiling[(i, j)] = f64::INFINITY;
                    }
                }
            }
        }
    }

    /// Moves the lattice anchor to within half a cell of the pose.
    fn follow(&mut self, pose: &RobotPose) {
        if wrap_angle(pose.yaw_rad - self.frame_yaw).abs() > 1e-9 {
            self.reframe(pose);
        }
        let l = rotate2(
            [pose.position.x - self.frame_origin[0], pose.position.y - self.frame_origin[1]],
            -self.frame_yaw,
        );
        let si = (l[0] / MAP_CELL_M).round() as i64 - self.anchor[0];
        let sj = (l[1] / MAP_CELL_M).round() as i64 - self.anchor[1];
        if si != 0 || sj != 0 {
            self.shift(si, sj);
        }
    }

    fn fuse(&mut self, frame: &DepthImage, pose: &RobotPose) {
        let cam = &self.camera;
        let (origin, rot) = pose.camera_frame(cam);
        let mut dirs = Vec::with_capacity(self.rays.dirs().len());
        let mut hits = Vec::new();
        let mut top = f64::NEG_INFINITY;
        let ranges = &frame.ranges;
        for (d, &r) in self.rays.dirs().iter().zip(ranges.iter()) {
            let dir = rot.apply(*d);
            dirs.push(dir);
            if r >= cam.max_range_m {
                continue;
            }
            let p = origin + dir * (r + UNPROJECT_EPS_M);
            if let Some(rc) = self.cell_at([p.x, p.y]) {
                hits.push((rc, r, p, dir));
                top = top.max(p.z);
            }
        }
        let mut highest = Grid::filled(MEM_ROWS, MEM_COLS, f64::NEG_INFINITY);
        for &(rc, _, p, _) in &hits {
            highest[rc] = highest[rc].max(p.z);
        }
        for (v, &z) in self.valid.iter().zip(self.memory.iter()) {
            if *v {
                top = top.max(z);
            }
        }
        if top.is_finite() {
            self.mark_free_space(origin, &dirs, ranges, top + CEILING_TOL_M);
        }

        // A return is kept only if no ray has passed below it over its cell.
        let mut best: Vec<(f64, f64)> = vec![(f64::INFINITY, 0.0); MEM_ROWS * MEM_COLS];
        let spread = AMBIGUITY_SIGMAS * self.range_sigma_m;
        for &(rc, r, p, dir) in &hits {
            let z = p.z;
            // Within noise of a markedly higher neighbor, the return may belong to its wall.
            let ambiguous = spread > 0.0
                && [p - dir * spread, p + dir * spread].iter().any(|q| {
                    self.cell_at([q.x, q.y])
                        .is_some_and(|o| o != rc && highest[o] > z + spread * dir.z.abs())
                });
            let k = rc.0 * MEM_COLS + rc.1;
            if !ambiguous && z <= self.ceiling[rc] + CEILING_TOL_M && r < best[k].0 {
                best[k] = (r, z);
            }
        }
        for (k, &(r, z)) in best.iter().enumerate() {
            let rc = (k / MEM_COLS, k % MEM_COLS);
            if r.is_finite() {
                self.memory[rc] = z;
                self.valid[rc] = true;
                self.age_ticks[rc] = 0;
            } else if self.valid[rc] && self.memory[rc] > self.ceiling[rc] + CEILING_TOL_M {
                self.valid[rc] = false;
            }
        }
    }

    /// Lowers the ceiling of every cell a ray crosses below `top` before its return.
    fn mark_free_space(&mut self, origin: Vec3, dirs: &[Vec3], ranges: &Grid<f64>, top: f64) {
        let step = 0.5 * MAP_CELL_M;
        let max_range = self.camera.max_range_m;
        let standoff = CEILING_STANDOFF_M.max(STANDOFF_SIGMAS * self.range_sigma_m);
        for (dir, &r) in dirs.iter().zip(ranges.iter()) {
            if dir.z >= 0.0 {
                continue;
            }
            let t_end = if r >= max_range { max_range } else { r - standoff };
            let mut t = ((origin.z - top) / -dir.z).max(0.0);
            while t < t_end {
                let p = origin + *dir * t;
                let z_low = p.z + dir.z * step;
                if let Some(rc) = self.cell_at([p.x, p.y]) {
                    if z_low < self.ceiling[rc] {
                        self.ceiling[rc] = z_low;
                    }
                }
                t += step;
            }
        }
    }

    /// Base-relative window sampled from memory at `pose`.
    pub fn window(&self, pose: &RobotPose) -> LocalHeightmap {
        let mut map = LocalHeightmap::invalid(*pose);
        for i in 0..MAP_ROWS {
            for j in 0..MAP_COLS {
                if let Some(rc) = self.cell_at(map.to_world(LocalHeightmap::cell_center(i, j))) {
                    if self.valid[rc] {
                        map.grid[(i, j)] = self.memory[rc] - pose.position.z;
                        map.valid[(i, j)] = true;
                    }
                }
            }
        }
        map
    }

    /// Base-relative free-space ceiling over the window at `pose`.
    pub fn ceiling_window(&self, pose: &RobotPose) -> Grid<f64> {
        let frame = LocalHeightmap::invalid(*pose);
        Grid::from_fn(MAP_ROWS, MAP_COLS, |i, j| {
            match self.cell_at(frame.to_world(LocalHeightmap::cell_center(i, j))) {
                Some(rc) => self.ceiling[rc] - pose.position.z,
                None => f64::INFINITY,
            }
        })
    }

    /// Refined window at the current pose estimate, with ceiling-guarded filling.
    pub fn refined(&self) -> LocalHeightmap {
        let rough = self.window(&self.last_pose);
        refine_with_ceiling(&rough, Some(&self.ceiling_window(&self.last_pose)))
    }
}

/// Advances `state` by one tick: integrate odometry, follow the base,
/// fuse new depth frames and return the rough window.
///
/// The estimated heading and horizontal position come from odometry; height,
/// pitch and roll come from `pose`. Frames are fused only if newer than
/// every frame fused before, using the current pose estimate.
pub fn update(
    state: &mut ReconstructorState,
    frames: &[DepthImage],
    delta: &OdometryDelta,
    pose: &RobotPose,
) -> Result<LocalHeightmap, ReconError> {
    if frames.iter().any(|f| f.camera != state.camera) {
        return Err(ReconError::CameraMismatch);
    }
    delta.validate()?;
    let (t, dyaw) = delta.realized();
    let prev = state.last_pose;
    let m = rotate2([t.x, t.y], prev.yaw_rad);
    let est = RobotPose {
        position: Vec3::new(prev.position.x + m[0], prev.position.y + m[1], pose.position.z),
        yaw_rad: wrap_angle(prev.yaw_rad + dyaw),
        pitch_rad: pose.pitch_rad,
        roll_rad: pose.roll_rad,
    };
    state.last_pose = est;

    for a in state.age_ticks.as_mut_slice() {
        *a = a.saturating_add(1);
    }
    if let Some(max_age) = state.max_age_ticks {
        let (ages, valid) = (&state.age_ticks, &mut state.valid);
        for (v, &a) in valid.as_mut_slice().iter_mut().zip(ages.iter()) {
            if a > max_age {
                *v = false;
            }
        }
    }

    state.follow(&est);
    for frame in frames {
        if state.last_frame_ts.is_some_and(|ts| frame.timestamp_s <= ts) {
            continue;
        }
        state.fuse(frame, &est);
        state.last_frame_ts = Some(frame.timestamp_s);
    }
    Ok(state.window(&est))
}

/// Hole filling, center-weighted 3×3 median and edge snapping.
pub fn refine(rough: &LocalHeightmap) -> LocalHeightmap {
    refine_with_ceiling(rough, None)
}

/// [`refine`] where a hole is only filled if the fill height does not
/// exceed the observed free-space ceiling over it by more than
/// [`CEILING_TOL_M`].
pub fn refine_with_ceiling(rough: &LocalHeightmap, ceiling: Option<&Grid<f64>>) -> LocalHeightmap {
    let (rows, cols) = (rough.grid.rows(), rough.grid.cols());
    let mut filled = rough.clone();
    for i in 0..rows {
        for j in 0..cols {
            if rough.valid[(i, j)] {
                continue;
            }
            if !bracketed(rough, i, j) {
                continue;
            }
            if let Some(v) = nearest_valid(rough, i, j) {
                let allowed = ceiling.is_none_or(|c| v <= c[(i, j)] + CEILING_TOL_M);
                if allowed {
                    filled.grid[(i, j)] = v;
                    filled.valid[(i, j)] = true;
                }
            }
        }
    }

    let mut smoothed = filled.clone();
    let mut buf = Vec::with_capacity(11);
    for i in 0..rows {
        for j in 0..cols {
            if !filled.valid[(i, j)] {
                continue;
            }
            buf.clear();
            let c = filled.grid[(i, j)];
            buf.extend([c, c]);
            for_neighbors(&filled, i, j, |v| buf.push(v));
            buf.sort_by(f64::total_cmp);
            smoothed.grid[(i, j)] = buf[buf.len() / 2];
        }
    }

    let mut out = smoothed.clone();
    for i in 0..rows {
        for j in 0..cols {
            if !smoothed.valid[(i, j)] {
                continue;
            }
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for_neighbors(&smoothed, i, j, |v| {
                lo = lo.min(v);
                hi = hi.max(v);
            });
            if hi - lo > SNAP_JUMP_M {
                let v = smoothed.grid[(i, j)];
                out.grid[(i, j)] = if hi - v <= v - lo { hi } else { lo };
            }
        }
    }
    out
}

/// Calls `f` with each valid value in the 3×3 block around `(i, j)`.
fn for_neighbors(m: &LocalHeightmap, i: usize, j: usize, mut f: impl FnMut(f64)) {
    for di in -1i64..=1 {
        for dj in -1i64..=1 {
            let (r, c) = (i as i64 + di, j as i64 + dj);
            if let Some(true) = m.valid.get_signed(r, c) {
                f(m.grid[(r as usize, c as usize)]);
            }
        }
    }
}

/// True if `(i, j)` lies in a run of at most [`MAX_FILL_GAP`] invalid cells
/// closed by valid cells at both ends, along a row or a column.
fn bracketed(m: &LocalHeightmap, i: usize, j: usize) -> bool {
    let reach = |di: i64, dj: i64| {
        (1..=MAX_FILL_GAP as i64).find(|&k| m.valid.get_signed(i as i64 + k * di, j as i64 + k * dj) == Some(&true))
    };
    let closed = |a: Option<i64>, b: Option<i64>| matches!((a, b), (Some(a), Some(b)) if a + b - 1 <= MAX_FILL_GAP as i64);
    closed(reach(1, 0), reach(-1, 0)) || closed(reach(0, 1), reach(0, -1))
}

fn nearest_valid(m: &LocalHeightmap, i: usize, j: usize) -> Option<f64> {
    let mut best: Option<(i64, f64)> = None;
    for di in -FILL_RADIUS..=FILL_RADIUS {
        for dj in -FILL_RADIUS..=FILL_RADIUS {
            let (r, c) = (i as i64 + di, j as i64 + dj);
            if let Some(true) = m.valid.get_signed(r, c) {
                let d2 = di * di + dj * dj;
                if best.is_none_or(|(b, _)| d2 < b) {
                    best = Some((d2, m.grid[(r as usize, c as usize)]));
                }
            }
        }
    }
    best.map(|(_, v)| v)
}

/// Mean absolute height error in centimeters over cells valid in both maps.
pub fn mae(recon: &LocalHeightmap, gt: &LocalHeightmap) -> Result<f64, ReconError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((a, va), (b, vb)) in recon
        .grid
        .iter()
        .zip(recon.valid.iter())
        .zip(gt.grid.iter().zip(gt.valid.iter()))
    {
        if *va && *vb {
            sum += (a - b).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(ReconError::NoValidCells);
    }
    Ok(100.0 * sum / n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaeTraceRow {
    pub tick: u64,
    pub mae_cm: f64,
    pub valid_fraction: f64,
}

impl MaeTraceRow {
    pub const HEADER: &'static str = "tick,mae_cm,valid_fraction";

    pub fn to_csv(&self) -> String {
        format!("{},{:.6},{:.6}", self.tick, self.mae_cm, self.valid_fraction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localmap::sample_gt;
    use crate::sensor::render_depth_with;
    use crate::terrain::HeightField;

    fn flat_ground() -> HeightField {
        HeightField::flat(80, 160, 0.05, [-3.0, -2.0], 0.0)
    }

    #[test]
    fn init_is_empty() {
        let s = init_state(RobotPose::new(0.0, 0.0, 0.3, 0.0));
        assert!(s.valid.iter().all(|&v| !v));
        assert_eq!(s, init_state(RobotPose::new(0.0, 0.0, 0.3, 0.0)));
        let w = s.window(&s.last_pose);
        let gt = sample_gt(&flat_ground(), &s.last_pose).unwrap();
        assert_eq!(mae(&w, &gt), Err(ReconError::NoValidCells));
    }

    #[test]
    fn idle_update_only_ages() {
        let pose = RobotPose::new(0.0, 0.0, 0.3, 0.0);
        let mut s = init_state(pose);
        let before = s.clone();
        update(&mut s, &[], &OdometryDelta::zero(), &pose).unwrap();
        assert!(s.age_ticks.iter().all(|&a| a == 1));
        s.age_ticks = before.age_ticks.clone();
        assert_eq!(s, before);
    }

    #[test]
    fn stationary_flat_round_trip() {
        let hf = flat_ground();
        let pose = RobotPose::new(0.0, 0.0, 0.3, 0.0);
        let mut s = init_state(pose);
        let img = render_depth_with(&hf, &pose, &s.camera, &RayBundle::new(&s.camera), 0.0).unwrap();
        let rough = update(&mut s, &[img], &OdometryDelta::zero(), &pose).unwrap();
        let gt = sample_gt(&hf, &pose).unwrap();
        assert!(rough.valid_count() > 0);
        for (i, j, &v) in rough.valid.indexed() {
            if v {
                assert!((rough.grid[(i, j)] - gt.grid[(i, j)]).abs() < 0.5 * MAP_CELL_M);
            }
        }
    }

    #[test]
    fn mismatched_camera() {
        let hf = flat_ground();
        let pose = RobotPose::new(0.0, 0.0, 0.3, 0.0);
        let cam = CameraModel {
            width_px: 8,
            height_px: 6,
            ..CameraModel::default()
        };
        let img = render_depth_with(&hf, &pose, &cam, &RayBundle::new(&cam), 0.0).unwrap();
        let mut s = init_state(pose);
        assert_eq!(
            update(&mut s, &[img], &OdometryDelta::zero(), &pose),
            Err(ReconError::CameraMismatch)
        );
    }

    fn flat_map(h: f64) -> LocalHeightmap {
        let mut m = LocalHeightmap::invalid(RobotPose::default());
        m.grid.fill(h);
        m.valid.fill(true);
        m
    }

    #[test]
    fn refine_examples() {
        let flat = flat_map(-0.3);
        assert_eq!(refine(&flat), flat);

        let mut spike = flat.clone();
        spike.grid[(10, 8)] += 0.3;
        let out = refine(&spike);
        assert!(out.grid.iter().all(|&h| (h + 0.3).abs() < 1e-6));

        let mut hole = flat.clone();
        hole.valid[(5, 5)] = false;
        hole.grid[(5, 5)] = 0.0;
        let out = refine(&hole);
        assert!(out.valid[(5, 5)]);
        assert!((out.grid[(5, 5)] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn ceiling_blocks_fill() {
        let mut m = flat_map(-0.3);
        m.valid[(5, 5)] = false;
        let mut ceiling = Grid::filled(MAP_ROWS, MAP_COLS, f64::INFINITY);
        ceiling[(5, 5)] = -0.5;
        let out = refine_with_ceiling(&m, Some(&ceiling));
        assert!(!out.valid[(5, 5)]);
    }

    #[test]
    fn mae_offsets() {
        let a = flat_map(-0.3);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        let b = flat_map(-0.25);
        assert!((mae(&b, &a).unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn odometry_between_round_trips() {
        let a = RobotPose::new(1.0, 2.0, 0.3, 0.4);
        let b = RobotPose::new(1.03, 2.01, 0.3, 0.45);
        let d = OdometryDelta::between(&a, &b);
        let m = rotate2([d.translation.x, d.translation.y], a.yaw_rad);
        assert!((a.position.x + m[0] - b.position.x).abs() < 1e-12);
        assert!((a.position.y + m[1] - b.position.y).abs() < 1e-12);
        assert!(OdometryDelta {
            translation: Vec3::new(0.2, 0.0, 0.0),
            ..OdometryDelta::zero()
        }
        .validate()
        .is_err());
    }
}
