//! Kinematic foothold-planning walker and episode runner.
//!
//! The walker trots: diagonal pairs (FL+RR, FR+RL) alternate, one pair
//! touching down every 10 policy ticks. At lift-off each swinging foot picks
//! a target cell from its perception source inside a reach window around the
//! nominal footfall; over the swing the base moves toward the centroid of the
//! new support. Ground truth decides whether a touchdown is safe.
//!
//! Every episode starts with a blind lead-in on the flat apron from
//! `x = -1 m` to `x = 0`, so the reconstruction has seen the ground under the
//! robot before the course begins. Lead-in touchdowns are neither logged nor
//! rewarded.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::edt;
use crate::geom::Vec3;
use crate::grid::Grid;
use crate::localmap::{
    self, edge_penalty, mean_edge_violation, FootId, FootState, FootstepLog, LocalHeightmap, LocalMapError,
    MAP_CELL_M, MAP_COLS, MAP_ROWS, STANDING_HEIGHT_M,
};
use crate::reconstructor::{self, mae, MaeTraceRow, OdometryDelta, OdometryNoise, ReconError, ReconstructorState};
use crate::seed;
use crate::sensor::{apply_noise, render_depth_with, CameraModel, NoiseModel, RayBundle, RobotPose, SensorClock, SensorError};
use crate::terrain::{self, edge_features, HeightField, TerrainError, TerrainKind, TerrainSpec};

pub const COURSE_M: f64 = 6.0;
pub const LEAD_IN_START_M: f64 = -1.0;
pub const TICKS_PER_STEP: u64 = 10;
pub const STALL_LIMIT_TICKS: u64 = 100;
pub const DEFAULT_MAX_TICKS: u64 = 4000;
/// Cells lower than standing ground by more than this are treated as voids.
pub const SAFE_DROP_M: f64 = 0.1;
/// Edge clearance beyond this earns no extra score.
pub const CLEARANCE_CAP_M: f64 = 0.10;
/// Fraction of the nominal stride placed ahead of the hip.
const NOMINAL_LEAD: f64 = 0.75;

/// Hip positions in the base frame, indexed by [`FootId::index`].
pub const HIP_OFFSETS: [[f64; 2]; 4] = [[0.175, 0.10], [0.175, -0.10], [-0.175, 0.10], [-0.175, -0.10]];
pub const TROT_PAIRS: [[FootId; 2]; 2] = [[FootId::FL, FootId::RR], [FootId::FR, FootId::RL]];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("no estimated-safe foothold for {0} inside the reach window")]
    NoFoothold(FootId),
    #[error("invalid planner: {0}")]
    InvalidPlanner(String),
    #[error("course needs length_m >= {COURSE_M}, got {0}")]
    CourseTooShort(f64),
    #[error(transparent)]
    Terrain(#[from] TerrainError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Reconstruction(#[from] ReconError),
    #[error(transparent)]
    LocalMap(#[from] LocalMapError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Perception {
    GroundTruth,
    Reconstructed,
    Blind,
}

impl Perception {
    pub const ALL: [Perception; 3] = [Perception::GroundTruth, Perception::Reconstructed, Perception::Blind];

    pub fn name(self) -> &'static str {
        match self {
            Perception::GroundTruth => "ground_truth",
            Perception::Reconstructed => "reconstructed",
            Perception::Blind => "blind",
        }
    }
}

impl fmt::Display for Perception {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Perception {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().replace('-', "_").as_str() {
            "ground_truth" | "gt" => Ok(Perception::GroundTruth),
            "reconstructed" | "recon" => Ok(Perception::Reconstructed),
            "blind" => Ok(Perception::Blind),
            other => Err(format!("unknown perception `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReachWindow {
    pub long_m: f64,
    pub lat_m: f64,
}

impl Default for ReachWindow {
    fn default() -> Self {
        Self { long_m: 0.15, lat_m: 0.08 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannerConfig {
    pub perception: Perception,
    pub nominal_step_m: f64,
    pub reach_window: ReachWindow,
    pub edge_margin_weight: f64,
    pub forward_weight: f64,
    /// Base seed for the episode's noise streams.
    pub seed: u64,
}

impl PlannerConfig {
    pub fn new(perception: Perception) -> Self {
        Self {
            perception,
            nominal_step_m: 0.20,
            reach_window: ReachWindow::default(),
            edge_margin_weight: 2.0,
            forward_weight: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidPlanner(m));
        let w = self.reach_window;
        if !(w.long_m > 0.0 && w.lat_m > 0.0 && w.long_m.is_finite() && w.lat_m.is_finite()) {
            return bad(format!("reach window ({}, {}) must be positive", w.long_m, w.lat_m));
        }
        for (name, v) in [("edge_margin_weight", self.edge_margin_weight), ("forward_weight", self.forward_weight)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} {v} must be finite and non-negative"));
            }
        }
        if !(self.nominal_step_m.is_finite() && self.nominal_step_m > 0.0) {
            return bad(format!("nominal_step_m {} must be positive", self.nominal_step_m));
        }
        Ok(())
    }

    /// Base-frame nominal footfall of `foot`.
    pub fn nominal(&self, foot: FootId) -> [f64; 2] {
        let hip = HIP_OFFSETS[foot.index()];
        [hip[0] + NOMINAL_LEAD * self.nominal_step_m, hip[1]]
    }
}

/// Safety and edge clearance as estimated from a heightmap.
#[derive(Clone, Debug, PartialEq)]
pub struct SafetyEstimate {
    pub safe: Grid<bool>,
    /// Distance to the nearest estimated edge, meters; 0 on unsafe cells.
    pub clearance: Grid<f64>,
}

/// Valid cells no more than [`SAFE_DROP_M`] below standing ground are safe;
/// invalid cells are not.
pub fn estimate_safety(map: &LocalHeightmap) -> SafetyEstimate {
    let floor = -STANDING_HEIGHT_M - SAFE_DROP_M;
    let safe = Grid::from_fn(MAP_ROWS, MAP_COLS, |i, j| map.valid[(i, j)] && map.grid[(i, j)] >= floor);
    let features = edge_features(&map.grid, &safe);
    let sq = edt::squared_distance_transform(&features);
    let clearance = Grid::from_fn(MAP_ROWS, MAP_COLS, |i, j| {
        if safe[(i, j)] {
            (edt::to_meters(sq[(i, j)], MAP_CELL_M) - 0.5 * MAP_CELL_M).max(0.0)
        } else {
            0.0
        }
    });
    SafetyEstimate { safe, clearance }
}

/// Chooses a base-frame footfall for `foot` near `nominal`.
pub fn plan_step(
    map: &LocalHeightmap,
    planner: &PlannerConfig,
    foot: FootId,
    nominal: [f64; 2],
) -> Result<[f64; 2], HarnessError> {
    if planner.perception == Perception::Blind {
        return Ok(nominal);
    }
    plan_with_estimate(&estimate_safety(map), planner, foot, nominal)
}

pub fn plan_with_estimate(
    est: &SafetyEstimate,
    planner: &PlannerConfig,
    foot: FootId,
    nominal: [f64; 2],
) -> Result<[f64; 2], HarnessError> {
    let w = planner.reach_window;
    let eps = 1e-9;
    // (score, forward, lateral offset) of the best candidate and its center.
    let mut best: Option<((f64, f64, f64), [f64; 2])> = None;
    for i in 0..MAP_ROWS {
        for j in 0..MAP_COLS {
            if !est.safe[(i, j)] {
                continue;
            }
            let c = LocalHeightmap::cell_center(i, j);
            let fwd = c[0] - nominal[0];
            let lat = (c[1] - nominal[1]).abs();
            if fwd.abs() > w.long_m + eps || lat > w.lat_m + eps {
                continue;
            }
            let score = planner.forward_weight * fwd
                + planner.edge_margin_weight * est.clearance[(i, j)].min(CLEARANCE_CAP_M);
            let key = (score, fwd, lat);
            let better = match best {
                None => true,
                Some((b, _)) => {
                    key.0 > b.0 || (key.0 == b.0 && (key.1 > b.1 || (key.1 == b.1 && key.2 < b.2)))
                }
            };
            if better {
                best = Some((key, c));
            }
        }
    }
    best.map(|(_, c)| c).ok_or(HarnessError::NoFoothold(foot))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub success: bool,
    pub traversing_rate: f64,
    pub mev: f64,
    pub reward_sum: f64,
    pub footsteps: FootstepLog,
    pub mae_trace: Option<Vec<MaeTraceRow>>,
    pub ticks: u64,
    pub fell: bool,
}

impl EpisodeResult {
    pub fn mean_mae_cm(&self) -> Option<f64> {
        let t = self.mae_trace.as_ref()?;
        if t.is_empty() {
            return None;
        }
        Some(t.iter().map(|r| r.mae_cm).sum::<f64>() / t.len() as f64)
    }
}

/// Everything about an episode besides terrain and planner.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeOptions {
    pub noise: NoiseModel,
    pub odometry_noise: Option<OdometryNoise>,
    pub camera: CameraModel,
    pub clock: SensorClock,
    pub max_ticks: u64,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            noise: NoiseModel::none(),
            odometry_noise: None,
            camera: CameraModel::default(),
            clock: SensorClock::default(),
            max_ticks: DEFAULT_MAX_TICKS,
        }
    }
}

/// Generates the terrain for `spec` and runs one episode on it.
pub fn run_episode(
    spec: &TerrainSpec,
    planner: &PlannerConfig,
    noise: &NoiseModel,
    odo_noise: Option<OdometryNoise>,
) -> Result<EpisodeResult, HarnessError> {
    let opts = EpisodeOptions {
        noise: *noise,
        odometry_noise: odo_noise,
        ..EpisodeOptions::default()
    };
    run_spec(spec, planner, &opts)
}

pub fn run_spec(spec: &TerrainSpec, planner: &PlannerConfig, opts: &EpisodeOptions) -> Result<EpisodeResult, HarnessError> {
    if spec.length_m < COURSE_M {
        return Err(HarnessError::CourseTooShort(spec.length_m));
    }
    let hf = terrain::generate(spec)?;
    run_on(&hf, planner, opts)
}

struct Walker<'a> {
    hf: &'a HeightField,
    planner: &'a PlannerConfig,
    opts: &'a EpisodeOptions,
    pose: RobotPose,
    feet: [Vec3; 4],
    /// Tick at which each foot's current run of failed plans began.
    stall: [Option<u64>; 4],
    tick: u64,
    recon: Option<Recon>,
}

struct Recon {
    state: ReconstructorState,
    rays: RayBundle,
    frames: Vec<crate::sensor::DepthImage>,
    trace: Vec<MaeTraceRow>,
}

impl Walker<'_> {
    fn ground(&self, x: f64, y: f64) -> f64 {
        self.hf.height_at(x, y).unwrap_or(0.0)
    }

    /// Advances one policy tick with the base at `next`.
    fn tick_to(&mut self, next: RobotPose) -> Result<(), HarnessError> {
        let prev = self.pose;
        self.pose = next;
        self.tick += 1;
        let Some(rc) = self.recon.as_mut() else {
            return Ok(());
        };
        if self.opts.clock.has_new_depth(self.tick) {
            let ts = self.opts.clock.tick_seconds(self.tick);
            let img = render_depth_with(self.hf, &self.pose, &self.opts.camera, &rc.rays, ts)?;
            let img = if self.opts.noise.is_off() { img } else { apply_noise(&img, &self.opts.noise) };
            if rc.frames.len() == 2 {
                rc.frames.remove(0);
            }
            rc.frames.push(img);
        }
        let mut delta = OdometryDelta::between(&prev, &self.pose);
        if let Some(n) = self.opts.odometry_noise {
            delta = delta.with_noise(OdometryNoise { index: self.tick, ..n });
        }
        reconstructor::update(&mut rc.state, &rc.frames, &delta, &self.pose)?;
        Ok(())
    }

    /// Perception map for planning, in its own frame, if the planner uses one.
    fn perceive(&mut self) -> Result<Option<LocalHeightmap>, HarnessError> {
        match self.planner.perception {
            Perception::Blind => Ok(None),
            Perception::GroundTruth => Ok(Some(localmap::sample_gt(self.hf, &self.pose)?)),
            Perception::Reconstructed => {
                let rc = self.recon.as_mut().expect("reconstructed perception keeps a state");
                let refined = rc.state.refined();
                let gt = localmap::sample_gt(self.hf, &self.pose)?;
                if let Ok(m) = mae(&refined, &gt) {
                    rc.trace.push(MaeTraceRow {
                        tick: self.tick,
                        mae_cm: m,
                        valid_fraction: refined.valid_fraction(),
                    });
                }
                Ok(Some(refined))
            }
        }
    }
}

/// Runs one episode on a prepared heightfield.
pub fn run_on(hf: &HeightField, planner: &PlannerConfig, opts: &EpisodeOptions) -> Result<EpisodeResult, HarnessError> {
    planner.validate()?;
    opts.camera.validate()?;
    let start_z = hf.height_at(LEAD_IN_START_M, 0.0).unwrap_or(0.0) + STANDING_HEIGHT_M;
    let pose = RobotPose::new(LEAD_IN_START_M, 0.0, start_z, 0.0);
    let feet = HIP_OFFSETS.map(|h| {
        let (x, y) = (pose.position.x + h[0], pose.position.y + h[1]);
        Vec3::new(x, y, hf.height_at(x, y).unwrap_or(0.0))
    });
    let recon = (planner.perception == Perception::Reconstructed).then(|| Recon {
        state: ReconstructorState::new(pose, opts.camera.clone()).with_range_sigma(opts.noise.gaussian_sigma_m),
        rays: RayBundle::new(&opts.camera),
        frames: Vec::with_capacity(2),
        trace: Vec::new(),
    });
    let mut w = Walker {
        hf,
        planner,
        opts,
        pose,
        feet,
        stall: [None; 4],
        tick: 0,
        recon,
    };

    if let Some(rc) = w.recon.as_mut() {
        let img = render_depth_with(hf, &w.pose, &opts.camera, &rc.rays, 0.0)?;
        let img = if opts.noise.is_off() { img } else { apply_noise(&img, &opts.noise) };
        rc.frames.push(img);
        reconstructor::update(&mut rc.state, &rc.frames, &OdometryDelta::zero(), &w.pose)?;
    }

    let mut log = FootstepLog::new();
    let mut reward_sum = 0.0;
    let mut progress: f64 = 0.0;
    let mut fell = false;
    let mut success = false;
    let mut event = 0usize;

    while w.tick + TICKS_PER_STEP <= opts.max_ticks {
        if w.pose.position.x >= COURSE_M {
            success = true;
            break;
        }
        let lead_in = w.pose.position.x < 0.0;
        let pair = TROT_PAIRS[event % 2];
        event += 1;

        let map = if lead_in { None } else { w.perceive()? };
        let est = map.as_ref().map(estimate_safety);
        let mut targets: [Option<Vec3>; 2] = [None, None];
        for (k, &foot) in pair.iter().enumerate() {
            let nominal = planner.nominal(foot);
            let local = match (&map, &est) {
                (Some(m), Some(e)) => plan_with_estimate(e, planner, foot, nominal).map(|p| m.to_world(p)),
                _ => Ok(LocalHeightmap::invalid(w.pose).to_world(nominal)),
            };
            match local {
                Ok(p) => {
                    targets[k] = Some(Vec3::new(p[0], p[1], w.ground(p[0], p[1])));
                    w.stall[foot.index()] = None;
                }
                Err(HarnessError::NoFoothold(_)) => {
                    w.stall[foot.index()].get_or_insert(w.tick);
                }
                Err(e) => return Err(e),
            }
        }

        let mut next_feet = w.feet;
        for (k, &foot) in pair.iter().enumerate() {
            if let Some(t) = targets[k] {
                next_feet[foot.index()] = t;
            }
        }
        let cx = next_feet.iter().map(|f| f.x).sum::<f64>() / 4.0;
        let cy = next_feet.iter().map(|f| f.y).sum::<f64>() / 4.0;
        let start = w.pose;
        let end_z = w.ground(cx, cy).max(next_feet.iter().map(|f| f.z).fold(f64::NEG_INFINITY, f64::max))
            + STANDING_HEIGHT_M;
        for s in 1..=TICKS_PER_STEP {
            let a = s as f64 / TICKS_PER_STEP as f64;
            let mut p = start;
            p.position = Vec3::new(
                start.position.x + (cx - start.position.x) * a,
                start.position.y + (cy - start.position.y) * a,
                start.position.z + (end_z - start.position.z) * a,
            );
            w.tick_to(p)?;
        }
        w.feet = next_feet;

        let mut landed_unsafe = false;
        for (k, &foot) in pair.iter().enumerate() {
            let Some(t) = targets[k] else { continue };
            if !hf.is_safe_at(t.x, t.y) {
                landed_unsafe = true;
            }
            if !lead_in {
                progress = progress.max(t.x);
                log.push(
                    w.tick,
                    FootState {
                        foot_id: foot,
                        position: t,
                        contact: true,
                    },
                )?;
            }
        }
        if !lead_in && targets.iter().any(Option::is_some) {
            let stance: Vec<FootState> = FootId::ALL
                .iter()
                .map(|&f| FootState {
                    foot_id: f,
                    position: w.feet[f.index()],
                    contact: true,
                })
                .collect();
            reward_sum += edge_penalty(&stance, hf);
        }
        if landed_unsafe || w.stall.iter().flatten().any(|&t0| w.tick - t0 >= STALL_LIMIT_TICKS) {
            fell = true;
            break;
        }
    }
    if !fell && w.pose.position.x >= COURSE_M {
        success = true;
    }

    let traversing_rate = if success { 1.0 } else { (progress / COURSE_M).clamp(0.0, 1.0) };
    let mev = match mean_edge_violation(&log, hf) {
        Ok(v) => v,
        Err(LocalMapError::EmptyLog) => 0.0,
        Err(e) => return Err(e.into()),
    };
    Ok(EpisodeResult {
        success,
        traversing_rate,
        mev,
        reward_sum,
        footsteps: log,
        mae_trace: w.recon.map(|r| r.trace),
        ticks: w.tick,
        fell,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub kind: TerrainKind,
    pub difficulty: f64,
    pub perception: Perception,
    pub success_rate: f64,
    pub trav_mean: f64,
    pub trav_sd: f64,
    pub mev: f64,
    /// `NaN` when no episode produced a reconstruction.
    pub mae_cm: f64,
}

impl AggregateRow {
    pub const HEADER: &'static str = "kind,difficulty,perception,success_rate,trav_mean,trav_sd,mev,mae_cm";

    pub fn from_results(spec: &TerrainSpec, perception: Perception, results: &[EpisodeResult]) -> Self {
        let n = results.len().max(1) as f64;
        let success_rate = results.iter().filter(|r| r.success).count() as f64 / n;
        let trav: Vec<f64> = results.iter().map(|r| r.traversing_rate).collect();
        let trav_mean = trav.iter().sum::<f64>() / n;
        let trav_sd = if trav.len() > 1 {
            (trav.iter().map(|t| (t - trav_mean).powi(2)).sum::<f64>() / (trav.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mev = results.iter().map(|r| r.mev).sum::<f64>() / n;
        let maes: Vec<f64> = results.iter().filter_map(EpisodeResult::mean_mae_cm).collect();
        let mae_cm = if maes.is_empty() {
            f64::NAN
        } else {
            maes.iter().sum::<f64>() / maes.len() as f64
        };
        Self {
            kind: spec.kind,
            difficulty: spec.difficulty,
            perception,
            success_rate,
            trav_mean,
            trav_sd,
            mev,
            mae_cm,
        }
    }

    pub fn to_csv(&self) -> String {
        let mae = if self.mae_cm.is_nan() {
            "nan".to_string()
        } else {
            format!("{:.6}", self.mae_cm)
        };
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
            self.kind.name(),
            terrain::fmt_f64(self.difficulty),
            self.perception.name(),
            self.success_rate,
            self.trav_mean,
            self.trav_sd,
            self.mev,
            mae
        )
    }
}

/// Spec of episode `index` within an evaluation of `spec`.
pub fn episode_spec(spec: &TerrainSpec, index: u64) -> TerrainSpec {
    TerrainSpec {
        seed: seed::derive_indexed(spec.seed, seed::STREAM_TERRAIN, index),
        ..*spec
    }
}

/// Options of episode `index`, with noise streams reseeded per episode.
pub fn episode_options(base: &EpisodeOptions, planner: &PlannerConfig, index: u64) -> EpisodeOptions {
    let mut o = base.clone();
    o.noise.seed = seed::derive_indexed(base.noise.seed ^ planner.seed, seed::STREAM_NOISE, index);
    if let Some(n) = o.odometry_noise.as_mut() {
        n.seed = seed::derive_indexed(n.seed ^ planner.seed, seed::STREAM_ODOMETRY, index);
    }
    o
}

/// Runs episodes `0..n_seeds` of `spec` and returns them in order.
pub fn run_batch(
    spec: &TerrainSpec,
    planner: &PlannerConfig,
    n_seeds: usize,
    opts: &EpisodeOptions,
) -> Result<Vec<EpisodeResult>, HarnessError> {
    let run = |i: usize| run_spec(&episode_spec(spec, i as u64), planner, &episode_options(opts, planner, i as u64));
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(n_seeds.max(1));
    if threads <= 1 {
        return (0..n_seeds).map(run).collect();
    }
    let mut slots: Vec<Option<Result<EpisodeResult, HarnessError>>> = vec![None; n_seeds];
    std::thread::scope(|s| {
        for (t, chunk) in slots.chunks_mut(n_seeds.div_ceil(threads)).enumerate() {
            let base = t * n_seeds.div_ceil(threads);
            let run = &run;
            s.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(run(base + k));
                }
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every slot is filled")).collect()
}

/// Aggregates per spec over episodes `0..n_seeds`.
pub fn evaluate(
    specs: &[TerrainSpec],
    planner: &PlannerConfig,
    n_seeds: usize,
    opts: &EpisodeOptions,
) -> Result<Vec<AggregateRow>, HarnessError> {
    specs
        .iter()
        .map(|spec| {
            let results = run_batch(spec, planner, n_seeds.max(1), opts)?;
            Ok(AggregateRow::from_results(spec, planner.perception, &results))
        })
        .collect()
}

/// A straight, constant-speed base trajectory for reconstruction runs.
#[derive(Clone, Debug, PartialEq)]
pub struct StraightWalk {
    pub start: [f64; 2],
    pub yaw_rad: f64,
    pub distance_m: f64,
    pub step_m_per_tick: f64,
    pub noise: NoiseModel,
    pub odometry_noise: Option<OdometryNoise>,
    pub camera: CameraModel,
    pub clock: SensorClock,
    pub max_age_ticks: Option<u32>,
    pub keep_frames: bool,
}

impl Default for StraightWalk {
    fn default() -> Self {
        Self {
            start: [LEAD_IN_START_M, 0.0],
            yaw_rad: 0.0,
            distance_m: COURSE_M - LEAD_IN_START_M,
            step_m_per_tick: 0.01,
            noise: NoiseModel::none(),
            odometry_noise: None,
            camera: CameraModel::default(),
            clock: SensorClock::default(),
            max_age_ticks: None,
            keep_frames: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WalkResult {
    /// One row per depth frame, refined map against ground truth.
    pub trace: Vec<MaeTraceRow>,
    pub state: ReconstructorState,
    pub pose: RobotPose,
    pub rough: LocalHeightmap,
    pub refined: LocalHeightmap,
    pub gt: LocalHeightmap,
    pub frames: Vec<crate::sensor::DepthImage>,
}

impl WalkResult {
    pub fn final_mae_cm(&self) -> Result<f64, ReconError> {
        mae(&self.refined, &self.gt)
    }

    pub fn mean_mae_cm(&self) -> Option<f64> {
        (!self.trace.is_empty()).then(|| self.trace.iter().map(|r| r.mae_cm).sum::<f64>() / self.trace.len() as f64)
    }
}

/// Pose of a straight walk after `tick` ticks.
pub fn walk_pose(hf: &HeightField, walk: &StraightWalk, tick: u64) -> RobotPose {
    let z = hf.height_at(walk.start[0], walk.start[1]).unwrap_or(0.0) + STANDING_HEIGHT_M;
    let d = (tick as f64 * walk.step_m_per_tick).min(walk.distance_m);
    let (s, c) = walk.yaw_rad.sin_cos();
    RobotPose::new(walk.start[0] + c * d, walk.start[1] + s * d, z, walk.yaw_rad)
}

/// Runs the reconstructor along a straight walk, calling `on_tick` after
/// every update with the tick, the true pose and the state.
pub fn walk_straight_with(
    hf: &HeightField,
    walk: &StraightWalk,
    mut on_tick: impl FnMut(u64, &RobotPose, &ReconstructorState),
) -> Result<WalkResult, HarnessError> {
    walk.camera.validate()?;
    if !(walk.step_m_per_tick > 0.0 && walk.step_m_per_tick < reconstructor::MAX_TICK_TRANSLATION_M) {
        return Err(HarnessError::InvalidPlanner(format!(
            "walk step {} m per tick outside (0, {})",
            walk.step_m_per_tick,
            reconstructor::MAX_TICK_TRANSLATION_M
        )));
    }
    let ticks = (walk.distance_m.max(0.0) / walk.step_m_per_tick).round() as u64;
    let b = hf.bounds();
    for t in [0, ticks] {
        let p = walk_pose(hf, walk, t);
        if !b.contains(p.position.x, p.position.y) {
            return Err(LocalMapError::OutOfBounds.into());
        }
    }
    let rays = RayBundle::new(&walk.camera);
    let mut pose = walk_pose(hf, walk, 0);
    let mut state = ReconstructorState::new(pose, walk.camera.clone())
        .with_max_age(walk.max_age_ticks)
        .with_range_sigma(walk.noise.gaussian_sigma_m);
    let mut frames: Vec<crate::sensor::DepthImage> = Vec::with_capacity(2);
    let mut kept = Vec::new();
    let mut trace = Vec::new();
    let mut rough = LocalHeightmap::invalid(pose);
    for tick in 0..=ticks {
        let prev = pose;
        pose = walk_pose(hf, walk, tick);
        let fresh = walk.clock.has_new_depth(tick);
        if fresh {
            let img = render_depth_with(hf, &pose, &walk.camera, &rays, walk.clock.tick_seconds(tick))?;
            let img = if walk.noise.is_off() { img } else { apply_noise(&img, &walk.noise) };
            if walk.keep_frames {
                kept.push(img.clone());
            }
            if frames.len() == 2 {
                frames.remove(0);
            }
            frames.push(img);
        }
        let mut delta = OdometryDelta::between(&prev, &pose);
        if let Some(n) = walk.odometry_noise {
            delta = delta.with_noise(OdometryNoise { index: tick, ..n });
        }
        rough = reconstructor::update(&mut state, &frames, &delta, &pose)?;
        if fresh {
            let refined = state.refined();
            let gt = localmap::sample_gt(hf, &pose)?;
            if let Ok(m) = mae(&refined, &gt) {
                trace.push(MaeTraceRow {
                    tick,
                    mae_cm: m,
                    valid_fraction: refined.valid_fraction(),
                });
            }
        }
        on_tick(tick, &pose, &state);
    }
    let refined = state.refined();
    let gt = localmap::sample_gt(hf, &pose)?;
    Ok(WalkResult {
        trace,
        state,
        pose,
        rough,
        refined,
        gt,
        frames: kept,
    })
}

pub fn walk_straight(hf: &HeightField, walk: &StraightWalk) -> Result<WalkResult, HarnessError> {
    walk_straight_with(hf, walk, |_, _, _| {})
}
