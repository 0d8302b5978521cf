//! Robot-frame local heightmap, the foot-edge penalty and the mean edge
//! violation metric.
//!
//! The window covers 0.5 m behind to 1.1 m ahead of the base and 0.4 m to
//! either side, in 5 cm cells. Row `i` is longitudinal, column `j` lateral.
//! Heights are relative to the base origin, so flat ground under a standing
//! robot reads `-STANDING_HEIGHT_M`.

use thiserror::Error;

use crate::geom::{rotate2, Vec3};
use crate::grid::Grid;
use crate::sensor::RobotPose;
use crate::terrain::HeightField;

pub const MAP_ROWS: usize = 32;
pub const MAP_COLS: usize = 16;
pub const MAP_CELL_M: f64 = 0.05;
/// Rear edge of the window, base frame.
pub const MAP_X0_M: f64 = -0.5;
/// Right edge of the window, base frame.
pub const MAP_Y0_M: f64 = -0.4;
pub const STANDING_HEIGHT_M: f64 = 0.30;
/// Width of the band around terrain edges that the penalty and MEV watch.
pub const EDGE_BAND_M: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalMapError {
    #[error("heightmap window lies entirely outside the terrain")]
    OutOfBounds,
    #[error("footstep log is empty")]
    EmptyLog,
    #[error("touchdown of {foot} at tick {tick} is not after its previous touchdown")]
    NonMonotonicTick { foot: FootId, tick: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalHeightmap {
    pub grid: Grid<f64>,
    pub valid: Grid<bool>,
    pub frame: RobotPose,
}

impl LocalHeightmap {
    pub fn invalid(frame: RobotPose) -> Self {
        Self {
            grid: Grid::filled(MAP_ROWS, MAP_COLS, 0.0),
            valid: Grid::filled(MAP_ROWS, MAP_COLS, false),
            frame,
        }
    }

    /// Base-frame center of cell `(i, j)`.
    #[inline]
    pub fn cell_center(i: usize, j: usize) -> [f64; 2] {
        [
            MAP_X0_M + (i as f64 + 0.5) * MAP_CELL_M,
            MAP_Y0_M + (j as f64 + 0.5) * MAP_CELL_M,
        ]
    }

    /// Cell containing a base-frame point.
    pub fn cell_of(x: f64, y: f64) -> Option<(usize, usize)> {
        let i = ((x - MAP_X0_M) / MAP_CELL_M).floor();
        let j = ((y - MAP_Y0_M) / MAP_CELL_M).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < MAP_ROWS && (j as usize) < MAP_COLS {
            Some((i as usize, j as usize))
        } else {
            None
        }
    }

    /// World position of a base-frame point under this map's frame.
    pub fn to_world(&self, p: [f64; 2]) -> [f64; 2] {
        let r = rotate2(p, self.frame.yaw_rad);
        [self.frame.position.x + r[0], self.frame.position.y + r[1]]
    }

    /// Base-frame position of a world point.
    pub fn to_local(&self, w: [f64; 2]) -> [f64; 2] {
        rotate2(
            [w[0] - self.frame.position.x, w[1] - self.frame.position.y],
            -self.frame.yaw_rad,
        )
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid_count() as f64 / self.valid.len() as f64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sampling {
    #[default]
    Nearest,
    Bilinear,
}

/// Ground-truth local heightmap at `pose`, nearest-cell sampling.
pub fn sample_gt(hf: &HeightField, pose: &RobotPose) -> Result<LocalHeightmap, LocalMapError> {
    sample_gt_with(hf, pose, Sampling::Nearest)
}

pub fn sample_gt_with(hf: &HeightField, pose: &RobotPose, sampling: Sampling) -> Result<LocalHeightmap, LocalMapError> {
    let mut map = LocalHeightmap::invalid(*pose);
    let mut any = false;
    for i in 0..MAP_ROWS {
        for j in 0..MAP_COLS {
            let w = map.to_world(LocalHeightmap::cell_center(i, j));
            let h = match sampling {
                Sampling::Nearest => hf.height_at(w[0], w[1]),
                Sampling::Bilinear => bilinear(hf, w[0], w[1]),
            };
            if let Some(h) = h {
                map.grid[(i, j)] = h - pose.position.z;
                map.valid[(i, j)] = true;
                any = true;
            }
        }
    }
    if any {
        Ok(map)
    } else {
        Err(LocalMapError::OutOfBounds)
    }
}

fn bilinear(hf: &HeightField, x: f64, y: f64) -> Option<f64> {
    let fx = (x - hf.origin[0]) / hf.cell_m - 0.5;
    let fy = (y - hf.origin[1]) / hf.cell_m - 0.5;
    let (c0, r0) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - c0, fy - r0);
    let (c0, r0) = (c0 as i64, r0 as i64);
    let h = |r: i64, c: i64| hf.heights.get_signed(r, c).copied();
    let (a, b) = (h(r0, c0)?, h(r0, c0 + 1)?);
    let (c, d) = (h(r0 + 1, c0)?, h(r0 + 1, c0 + 1)?);
    Some((a * (1.0 - tx) + b * tx) * (1.0 - ty) + (c * (1.0 - tx) + d * tx) * ty)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FootId {
    FL,
    FR,
    RL,
    RR,
}

impl FootId {
    pub const ALL: [FootId; 4] = [FootId::FL, FootId::FR, FootId::RL, FootId::RR];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FootId::FL => "FL",
            FootId::FR => "FR",
            FootId::RL => "RL",
            FootId::RR => "RR",
        }
    }
}

impl std::fmt::Display for FootId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FootState {
    pub foot_id: FootId,
    pub position: Vec3,
    pub contact: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FootstepLog {
    events: Vec<(u64, FootState)>,
    last_tick: [Option<u64>; 4],
}

impl FootstepLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tick: u64, foot: FootState) -> Result<(), LocalMapError> {
        let slot = &mut self.last_tick[foot.foot_id.index()];
        if slot.is_some_and(|t| tick <= t) {
            return Err(LocalMapError::NonMonotonicTick {
                foot: foot.foot_id,
                tick,
            });
        }
        *slot = Some(tick);
        self.events.push((tick, foot));
        Ok(())
    }

    pub fn events(&self) -> &[(u64, FootState)] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Ramp of the edge penalty: 1 at the edge, 0 from [`EDGE_BAND_M`] outward.
#[inline]
pub fn edge_reward_term(d_edge: f64) -> f64 {
    ((EDGE_BAND_M - d_edge) / EDGE_BAND_M).clamp(0.0, 1.0)
}

/// Edge distance of a point foot; 0 on unsafe ground.
#[inline]
pub fn foot_edge_distance(hf: &HeightField, p: Vec3) -> f64 {
    hf.edge_clearance_at(p.x, p.y)
}

/// Foot-edge reward, `-sum(c_i * E(d_i))`.
pub fn edge_penalty(feet: &[FootState], hf: &HeightField) -> f64 {
    -feet
        .iter()
        .filter(|f| f.contact)
        .map(|f| edge_reward_term(foot_edge_distance(hf, f.position)))
        .sum::<f64>()
}

pub fn is_edge_violation(hf: &HeightField, p: Vec3) -> bool {
    foot_edge_distance(hf, p) < EDGE_BAND_M
}

/// Fraction of touchdowns landing within the edge band.
pub fn mean_edge_violation(log: &FootstepLog, hf: &HeightField) -> Result<f64, LocalMapError> {
    if log.is_empty() {
        return Err(LocalMapError::EmptyLog);
    }
    let hits = log
        .events()
        .iter()
        .filter(|(_, f)| is_edge_violation(hf, f.position))
        .count();
    Ok(hits as f64 / log.len() as f64)
}
