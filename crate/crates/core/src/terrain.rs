//! Procedural sparse-foothold terrains.
//!
//! Every terrain is a heightfield on a square cell lattice with a flat start
//! apron, a structured band, and a flat end apron. Safe surfaces sit at
//! height 0; void cells sit [`VOID_DEPTH_M`] below them. The grid spans
//! `x ∈ [-1.5, length_m + 1.5]` and `y ∈ [-width_m/2, width_m/2]`; the
//! structured band starts at `x = 1.0` and always ends at least 0.5 m before
//! `length_m`.
//!
//! Sparsity is the unsafe fraction of the structured band. The band is always
//! an integer number of lattice periods, so aprons never dilute it.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::config::{ConfigError, KvConfig};
use crate::edt;
use crate::grid::Grid;
use crate::schedule::{CurriculumStage, Phase};
use crate::seed;

/// Depth of void cells below the safe surface.
pub const VOID_DEPTH_M: f64 = 0.5;
/// Height jump between neighbouring safe cells that counts as an edge.
pub const EDGE_STEP_M: f64 = 0.1;
/// Heights are stored on this quantum.
pub const HEIGHT_QUANTUM_M: f64 = 1e-6;
/// Nose-to-tail length of the simulated robot (a 0.7 m gap is twice this).
pub const ROBOT_BODY_LENGTH_M: f64 = 0.35;

pub const APRON_BEHIND_M: f64 = 1.5;
pub const APRON_AHEAD_M: f64 = 1.5;
pub const BAND_START_M: f64 = 1.0;
pub const BAND_END_MARGIN_M: f64 = 0.5;

/// Lattice spacing of stepping stones (both axes).
pub const STONE_SPACING_M: f64 = 0.30;
/// Longitudinal spacing of stepping beams; at full sparsity each beam is
/// exactly two 5 cm cells deep.
pub const BEAM_SPACING_M: f64 = 0.85 / 3.0;
/// Platform length between consecutive gaps.
pub const GAP_PLATFORM_M: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TerrainError {
    #[error("invalid terrain spec: {field} {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("infeasible terrain: {0}")]
    SpecInfeasible(String),
    #[error("region contains no cells")]
    EmptyRegion,
    #[error("region lies outside the heightfield")]
    RegionOutOfBounds,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TerrainKind {
    SteppingStones,
    BalanceBeams,
    SteppingBeams,
    Gaps,
    Flat,
    PretrainStones,
    PretrainBeams,
}

impl TerrainKind {
    pub const ALL: [TerrainKind; 7] = [
        TerrainKind::SteppingStones,
        TerrainKind::BalanceBeams,
        TerrainKind::SteppingBeams,
        TerrainKind::Gaps,
        TerrainKind::Flat,
        TerrainKind::PretrainStones,
        TerrainKind::PretrainBeams,
    ];

    /// The four evaluation families.
    pub const FAMILIES: [TerrainKind; 4] = [
        TerrainKind::SteppingStones,
        TerrainKind::BalanceBeams,
        TerrainKind::SteppingBeams,
        TerrainKind::Gaps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TerrainKind::SteppingStones => "stepping_stones",
            TerrainKind::BalanceBeams => "balance_beams",
            TerrainKind::SteppingBeams => "stepping_beams",
            TerrainKind::Gaps => "gaps",
            TerrainKind::Flat => "flat",
            TerrainKind::PretrainStones => "pretrain_stones",
            TerrainKind::PretrainBeams => "pretrain_beams",
        }
    }

    fn index(self) -> u64 {
        Self::ALL.iter().position(|&k| k == self).unwrap() as u64
    }
}

impl fmt::Display for TerrainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TerrainKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().replace('-', "_").to_ascii_lowercase();
        TerrainKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| format!("unknown terrain kind `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TerrainSpec {
    pub kind: TerrainKind,
    pub difficulty: f64,
    pub seed: u64,
    pub length_m: f64,
    pub width_m: f64,
    pub cell_m: f64,
}

pub const TERRAIN_KEYS: [&str; 6] = ["kind", "difficulty", "seed", "length_m", "width_m", "cell_m"];

impl TerrainSpec {
    pub fn new(kind: TerrainKind, difficulty: f64, seed: u64) -> Self {
        Self {
            kind,
            difficulty,
            seed,
            length_m: 6.0,
            width_m: 4.0,
            cell_m: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), TerrainError> {
        if !(0.0..=1.0).contains(&self.difficulty) {
            return Err(TerrainError::InvalidSpec {
                field: "difficulty",
                reason: format!("{} is outside [0, 1]", self.difficulty),
            });
        }
        for (field, v) in [
            ("length_m", self.length_m),
            ("width_m", self.width_m),
            ("cell_m", self.cell_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(TerrainError::InvalidSpec {
                    field,
                    reason: format!("{v} must be a positive finite number"),
                });
            }
        }
        if self.cell_m > 0.25 {
            return Err(TerrainError::InvalidSpec {
                field: "cell_m",
                reason: format!("{} m cells cannot resolve footholds", self.cell_m),
            });
        }
        if self.length_m < BAND_START_M + BAND_END_MARGIN_M + 0.5 {
            return Err(TerrainError::InvalidSpec {
                field: "length_m",
                reason: format!("{} m leaves no structured band", self.length_m),
            });
        }
        if self.width_m < 1.0 {
            return Err(TerrainError::InvalidSpec {
                field: "width_m",
                reason: format!("{} m is narrower than the robot's reach", self.width_m),
            });
        }
        let cells = ((self.length_m + APRON_BEHIND_M + APRON_AHEAD_M) / self.cell_m)
            * (self.width_m / self.cell_m);
        if cells > 64e6 {
            return Err(TerrainError::InvalidSpec {
                field: "cell_m",
                reason: "grid exceeds 64M cells".into(),
            });
        }
        Ok(())
    }

    /// Reads a spec from flat config text. Missing dimension keys take their
    /// defaults; `kind`, `difficulty` and `seed` are required.
    pub fn from_config(cfg: &KvConfig) -> Result<Self, TerrainError> {
        cfg.check_keys(&TERRAIN_KEYS)?;
        Self::from_config_lenient(cfg)
    }

    /// Like [`from_config`](Self::from_config) but ignores keys it does not own.
    pub fn from_config_lenient(cfg: &KvConfig) -> Result<Self, TerrainError> {
        let kind: TerrainKind = cfg.require("kind")?;
        let difficulty: f64 = cfg.require("difficulty")?;
        let seed: u64 = cfg.require("seed")?;
        let mut spec = TerrainSpec::new(kind, difficulty, seed);
        spec.length_m = cfg.parse_or("length_m", spec.length_m)?;
        spec.width_m = cfg.parse_or("width_m", spec.width_m)?;
        spec.cell_m = cfg.parse_or("cell_m", spec.cell_m)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn parse(text: &str) -> Result<Self, TerrainError> {
        Self::from_config(&KvConfig::parse(text)?)
    }

    pub fn to_config(&self) -> KvConfig {
        let mut cfg = KvConfig::new();
        // Values produced here always satisfy `KvConfig::set`.
        for (k, v) in [
            ("kind", self.kind.to_string()),
            ("difficulty", fmt_f64(self.difficulty)),
            ("seed", self.seed.to_string()),
            ("length_m", fmt_f64(self.length_m)),
            ("width_m", fmt_f64(self.width_m)),
            ("cell_m", fmt_f64(self.cell_m)),
        ] {
            cfg.set(k, &v).expect("canonical terrain value");
        }
        cfg
    }
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Axis-aligned world rectangle, half-open: `[x0, x1) × [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// Global terrain grid. Rows index `y`, columns index `x`; cell `(r, c)` has
/// its center at `origin + ((c + 0.5) * cell_m, (r + 0.5) * cell_m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightField {
    pub cell_m: f64,
    pub origin: [f64; 2],
    pub heights: Grid<f64>,
    pub safe: Grid<bool>,
    pub edge_dist: Grid<f64>,
    /// Structured band the sparsity target refers to.
    pub band: Rect,
    pub target_sparsity: f64,
}

impl HeightField {
    /// Builds a field from heights and safety, computing `edge_dist`.
    pub fn from_grids(cell_m: f64, origin: [f64; 2], heights: Grid<f64>, safe: Grid<bool>) -> Self {
        assert_eq!(heights.rows(), safe.rows());
        assert_eq!(heights.cols(), safe.cols());
        let band = Rect::new(
            origin[0],
            origin[1],
            origin[0] + heights.cols() as f64 * cell_m,
            origin[1] + heights.rows() as f64 * cell_m,
        );
        let edge_dist = Grid::filled(heights.rows(), heights.cols(), f64::INFINITY);
        let unsafe_cells = safe.iter().filter(|&&s| !s).count();
        let hf = Self {
            cell_m,
            origin,
            heights,
            safe,
            edge_dist,
            band,
            target_sparsity: unsafe_cells as f64 / band_cells(band, cell_m).max(1) as f64,
        };
        edge_distance_transform(hf)
    }

    /// Flat, all-safe field of `rows × cols` cells at height `z`.
    pub fn flat(rows: usize, cols: usize, cell_m: f64, origin: [f64; 2], z: f64) -> Self {
        Self::from_grids(
            cell_m,
            origin,
            Grid::filled(rows, cols, z),
            Grid::filled(rows, cols, true),
        )
    }

    pub fn rows(&self) -> usize {
        self.heights.rows()
    }

    pub fn cols(&self) -> usize {
        self.heights.cols()
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(
            self.origin[0],
            self.origin[1],
            self.origin[0] + self.cols() as f64 * self.cell_m,
            self.origin[1] + self.rows() as f64 * self.cell_m,
        )
    }

    /// Cell `(row, col)` containing the world point, if inside the grid.
    #[inline]
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.origin[0]) / self.cell_m).floor();
        let r = ((y - self.origin[1]) / self.cell_m).floor();
        if c >= 0.0 && r >= 0.0 && (c as usize) < self.cols() && (r as usize) < self.rows() {
            Some((r as usize, c as usize))
        } else {
            None
        }
    }

    #[inline]
    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.origin[0] + (col as f64 + 0.5) * self.cell_m,
            self.origin[1] + (row as f64 + 0.5) * self.cell_m,
        ]
    }

    #[inline]
    pub fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        self.cell_of(x, y).map(|rc| self.heights[rc])
    }

    /// Safety at a world point; out-of-grid points are unsafe.
    pub fn is_safe_at(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).is_some_and(|rc| self.safe[rc])
    }

    /// Distance from a point to the nearest terrain edge, for point feet.
    ///
    /// Uses the cell containing the point: the cell-center distance to the
    /// nearest edge cell, less half a cell (the edge cell's near boundary).
    /// Unsafe and out-of-grid points are at distance 0.
    pub fn edge_clearance_at(&self, x: f64, y: f64) -> f64 {
        match self.cell_of(x, y) {
            Some(rc) if self.safe[rc] => (self.edge_dist[rc] - 0.5 * self.cell_m).max(0.0),
            _ => 0.0,
        }
    }

    /// Highest height in the grid.
    pub fn max_height(&self) -> f64 {
        self.heights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_height(&self) -> f64 {
        self.heights.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn band_cells(band: Rect, cell_m: f64) -> usize {
    ((band.width() / cell_m).round() * (band.height() / cell_m).round()).max(0.0) as usize
}

#[inline]
pub fn quantize_height(h: f64) -> f64 {
    (h / HEIGHT_QUANTUM_M).round() * HEIGHT_QUANTUM_M
}

/// Cells that count as edges: unsafe cells and safe cells with a 4-neighbour
/// safe cell more than [`EDGE_STEP_M`] higher or lower.
pub fn edge_features(heights: &Grid<f64>, safe: &Grid<bool>) -> Grid<bool> {
    Grid::from_fn(heights.rows(), heights.cols(), |r, c| {
        if !safe[(r, c)] {
            return true;
        }
        let h = heights[(r, c)];
        let (r, c) = (r as i64, c as i64);
        [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
            .into_iter()
            .any(|(nr, nc)| {
                matches!(
                    (safe.get_signed(nr, nc), heights.get_signed(nr, nc)),
                    (Some(true), Some(&nh)) if (nh - h).abs() > EDGE_STEP_M
                )
            })
    })
}

/// Fills `edge_dist` with the exact Euclidean cell-center distance to the
/// nearest edge cell. A grid without edge cells is `+inf` everywhere.
pub fn edge_distance_transform(mut hf: HeightField) -> HeightField {
    let features = edge_features(&hf.heights, &hf.safe);
    let sq = edt::squared_distance_transform(&features);
    hf.edge_dist = sq.map(|&d| edt::to_meters(d, hf.cell_m));
    hf
}

/// Unsafe-cell fraction of the cells whose centers lie in `band`.
pub fn measure_sparsity(hf: &HeightField, band: Rect) -> Result<f64, TerrainError> {
    let b = hf.bounds();
    let eps = 1e-9;
    if band.x0 < b.x0 - eps || band.y0 < b.y0 - eps || band.x1 > b.x1 + eps || band.y1 > b.y1 + eps
    {
        return Err(TerrainError::RegionOutOfBounds);
    }
    let (c0, c1) = center_index_range(band.x0, band.x1, hf.origin[0], hf.cell_m, hf.cols());
    let (r0, r1) = center_index_range(band.y0, band.y1, hf.origin[1], hf.cell_m, hf.rows());
    if c0 >= c1 || r0 >= r1 {
        return Err(TerrainError::EmptyRegion);
    }
    let mut unsafe_cells = 0usize;
    for r in r0..r1 {
        unsafe_cells += hf.safe.row(r)[c0..c1].iter().filter(|&&s| !s).count();
    }
    Ok(unsafe_cells as f64 / ((r1 - r0) * (c1 - c0)) as f64)
}

/// Index range `[lo, hi)` of cells whose centers lie in `[a, b)`.
fn center_index_range(a: f64, b: f64, origin: f64, cell: f64, n: usize) -> (usize, usize) {
    // center k = origin + (k + 0.5) cell; k >= (a - origin)/cell - 0.5
    let lo = ((a - origin) / cell - 0.5).ceil().max(0.0);
    let hi = ((b - origin) / cell - 0.5).ceil().max(0.0);
    (lo.min(n as f64) as usize, hi.min(n as f64) as usize)
}

// ---------------------------------------------------------------------------
// Difficulty map

/// Parameters at one difficulty. `feature_width_m` is the lattice spacing for
/// stones and stepping beams, the beam width for balance beams, and the gap
/// width for gaps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TerrainParams {
    pub sparsity: f64,
    pub randomness: f64,
    pub feature_width_m: f64,
}

/// Linear anchors at difficulty 0 and difficulty 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Anchors {
    pub sparsity: (f64, f64),
    pub randomness: (f64, f64),
    pub feature_width_m: (f64, f64),
}

impl Anchors {
    fn at(&self, d: f64) -> TerrainParams {
        let lerp = |(a, b): (f64, f64)| a + (b - a) * d;
        TerrainParams {
            sparsity: lerp(self.sparsity),
            randomness: lerp(self.randomness),
            feature_width_m: lerp(self.feature_width_m),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DifficultyMap {
    pub stepping_stones: Anchors,
    pub balance_beams: Anchors,
    pub stepping_beams: Anchors,
    pub gaps: Anchors,
    pub pretrain_stones: Anchors,
    pub pretrain_beams: Anchors,
}

impl Default for DifficultyMap {
    fn default() -> Self {
        let beam_sparsity = |w: f64| 1.0 - w / 4.0;
        let gap_sparsity = |g: f64| g / (g + GAP_PLATFORM_M);
        Self {
            stepping_stones: Anchors {
                sparsity: (0.40, 0.763),
                randomness: (0.0, 0.48),
                feature_width_m: (STONE_SPACING_M, STONE_SPACING_M),
            },
            balance_beams: Anchors {
                sparsity: (beam_sparsity(0.50), beam_sparsity(0.175)),
                randomness: (0.0, 0.0),
                feature_width_m: (0.50, 0.175),
            },
            stepping_beams: Anchors {
                sparsity: (0.30, 0.647),
                randomness: (0.0, 0.48),
                feature_width_m: (BEAM_SPACING_M, BEAM_SPACING_M),
            },
            gaps: Anchors {
                sparsity: (gap_sparsity(0.10), gap_sparsity(0.70)),
                randomness: (0.0, 0.0),
                feature_width_m: (0.10, 0.70),
            },
            pretrain_stones: Anchors {
                sparsity: (0.30, 0.55),
                randomness: (0.0, 0.12),
                feature_width_m: (STONE_SPACING_M, STONE_SPACING_M),
            },
            pretrain_beams: Anchors {
                sparsity: (beam_sparsity(0.80), beam_sparsity(0.40)),
                randomness: (0.0, 0.0),
                feature_width_m: (0.80, 0.40),
            },
        }
    }
}

impl DifficultyMap {
    pub fn anchors(&self, kind: TerrainKind) -> Option<&Anchors> {
        match kind {
            TerrainKind::SteppingStones => Some(&self.stepping_stones),
            TerrainKind::BalanceBeams => Some(&self.balance_beams),
            TerrainKind::SteppingBeams => Some(&self.stepping_beams),
            TerrainKind::Gaps => Some(&self.gaps),
            TerrainKind::PretrainStones => Some(&self.pretrain_stones),
            TerrainKind::PretrainBeams => Some(&self.pretrain_beams),
            TerrainKind::Flat => None,
        }
    }

    pub fn params(&self, kind: TerrainKind, difficulty: f64) -> TerrainParams {
        match self.anchors(kind) {
            Some(a) => a.at(difficulty.clamp(0.0, 1.0)),
            None => TerrainParams {
                sparsity: 0.0,
                randomness: 0.0,
                feature_width_m: 0.0,
            },
        }
    }

    /// Whether every emitted parameter moves in its difficulty direction:
    /// sparsity, randomness and gap width never decrease; beam width never
    /// increases.
    pub fn is_monotone(&self) -> bool {
        TerrainKind::ALL.into_iter().all(|kind| {
            let Some(a) = self.anchors(kind) else {
                return true;
            };
            let width_ok = match kind {
                TerrainKind::BalanceBeams | TerrainKind::PretrainBeams => {
                    a.feature_width_m.1 <= a.feature_width_m.0
                }
                TerrainKind::Gaps => a.feature_width_m.1 >= a.feature_width_m.0,
                _ => a.feature_width_m.1 == a.feature_width_m.0,
            };
            a.sparsity.1 >= a.sparsity.0 && a.randomness.1 >= a.randomness.0 && width_ok
        })
    }
}

// ---------------------------------------------------------------------------
// Generation

/// Generates the terrain for `spec` with the default [`DifficultyMap`].
pub fn generate(spec: &TerrainSpec) -> Result<HeightField, TerrainError> {
    generate_with(spec, &DifficultyMap::default())
}

pub fn generate_with(spec: &TerrainSpec, map: &DifficultyMap) -> Result<HeightField, TerrainError> {
    spec.validate()?;
    let layout = Layout::new(spec);
    let params = map.params(spec.kind, spec.difficulty);
    let mut canvas = Canvas::new(&layout);

    let (band, target) = match spec.kind {
        TerrainKind::Flat => (layout.full_band(), 0.0),
        TerrainKind::SteppingStones | TerrainKind::PretrainStones => {
            build_stones(&layout, &mut canvas, params, spec.seed)?
        }
        TerrainKind::SteppingBeams => build_stepping_beams(&layout, &mut canvas, params, spec.seed)?,
        TerrainKind::BalanceBeams | TerrainKind::PretrainBeams => {
            build_balance_beam(&layout, &mut canvas, params)?
        }
        TerrainKind::Gaps => build_gaps(&layout, &mut canvas, params)?,
    };

    let heights = canvas.safe.map(|&s| if s { 0.0 } else { quantize_height(-VOID_DEPTH_M) });
    let mut hf = HeightField::from_grids(layout.cell, layout.origin, heights, canvas.safe);
    hf.band = band;
    hf.target_sparsity = target;
    Ok(hf)
}

struct Layout {
    cell: f64,
    origin: [f64; 2],
    rows: usize,
    cols: usize,
    band_x0: f64,
    band_max_x1: f64,
    y_half: f64,
}

impl Layout {
    fn new(spec: &TerrainSpec) -> Self {
        let cell = spec.cell_m;
        let behind = (APRON_BEHIND_M / cell).round();
        let cols = ((spec.length_m + APRON_AHEAD_M) / cell).round() as usize + behind as usize;
        let rows = ((spec.width_m / cell).round() as usize).max(1);
        // Origin on the cell lattice so world multiples of cell_m are cell corners.
        let origin = [-behind * cell, -((rows / 2) as f64) * cell];
        Self {
            cell,
            origin,
            rows,
            cols,
            band_x0: (BAND_START_M / cell).round() * cell,
            band_max_x1: spec.length_m - BAND_END_MARGIN_M,
            y_half: spec.width_m / 2.0,
        }
    }

    fn full_band(&self) -> Rect {
        Rect::new(
            self.band_x0,
            self.origin[1],
            self.band_max_x1,
            self.origin[1] + self.rows as f64 * self.cell,
        )
    }

    fn col_range(&self, x0: f64, x1: f64) -> (usize, usize) {
        center_index_range(x0, x1, self.origin[0], self.cell, self.cols)
    }

    fn row_range(&self, y0: f64, y1: f64) -> (usize, usize) {
        center_index_range(y0, y1, self.origin[1], self.cell, self.rows)
    }
}

struct Canvas {
    safe: Grid<bool>,
}

impl Canvas {
    fn new(layout: &Layout) -> Self {
        Self {
            safe: Grid::filled(layout.rows, layout.cols, true),
        }
    }

    fn set_rect(&mut self, layout: &Layout, rect: Rect, value: bool) {
        let (c0, c1) = layout.col_range(rect.x0, rect.x1);
        let (r0, r1) = layout.row_range(rect.y0, rect.y1);
        for r in r0..r1 {
            for c in c0..c1 {
                self.safe[(r, c)] = value;
            }
        }
    }
}

/// Voids every cell across the full grid width for `x ∈ [x0, x1)`.
fn void_span(layout: &Layout, canvas: &mut Canvas, x0: f64, x1: f64) {
    let rect = Rect::new(x0, layout.origin[1], x1, layout.origin[1] + layout.rows as f64 * layout.cell);
    canvas.set_rect(layout, rect, false);
}

fn check_jitter(side: f64, spacing: f64, randomness: f64, what: &str) -> Result<(), TerrainError> {
    if !(0.0..1.0).contains(&randomness) {
        return Err(TerrainError::SpecInfeasible(format!(
            "randomness {randomness} must lie in [0, 1)"
        )));
    }
    if side + randomness * spacing >= spacing {
        return Err(TerrainError::SpecInfeasible(format!(
            "{what} of {side:.3} m with jitter range {:.3} m can touch neighbours at spacing {spacing:.3} m",
            randomness * spacing
        )));
    }
    Ok(())
}

fn build_stones(
    layout: &Layout,
    canvas: &mut Canvas,
    p: TerrainParams,
    seed_value: u64,
) -> Result<(Rect, f64), TerrainError> {
    let s = p.feature_width_m;
    if !(0.0..1.0).contains(&p.sparsity) {
        return Err(TerrainError::SpecInfeasible(format!("sparsity {} out of range", p.sparsity)));
    }
    let side = s * (1.0 - p.sparsity).sqrt();
    if side < layout.cell {
        return Err(TerrainError::SpecInfeasible(format!(
            "stone side {side:.3} m is below one cell"
        )));
    }
    check_jitter(side, s, p.randomness, "stone side")?;

    let nx = ((layout.band_max_x1 - layout.band_x0) / s + 1e-9).floor() as usize;
    let ny = ((2.0 * layout.y_half) / s + 1e-9).floor() as usize;
    if nx == 0 || ny == 0 {
        return Err(TerrainError::SpecInfeasible("terrain too small for one stone period".into()));
    }
    let band = Rect::new(
        layout.band_x0,
        -(ny as f64) * s / 2.0,
        layout.band_x0 + nx as f64 * s,
        (ny as f64) * s / 2.0,
    );
    void_span(layout, canvas, band.x0, band.x1);

    let mut rng = seed::rng(seed::derive(seed_value, seed::STREAM_TERRAIN));
    let half_range = 0.5 * p.randomness * s;
    for i in 0..nx {
        for j in 0..ny {
            let jx = (rng.random::<f64>() * 2.0 - 1.0) * half_range;
            let jy = (rng.random::<f64>() * 2.0 - 1.0) * half_range;
            let cx = band.x0 + (i as f64 + 0.5) * s + jx;
            let cy = band.y0 + (j as f64 + 0.5) * s + jy;
            let h = side / 2.0;
            canvas.set_rect(layout, Rect::new(cx - h, cy - h, cx + h, cy + h), true);
        }
    }
    Ok((band, p.sparsity))
}

fn build_stepping_beams(
    layout: &Layout,
    canvas: &mut Canvas,
    p: TerrainParams,
    seed_value: u64,
) -> Result<(Rect, f64), TerrainError> {
    let s = p.feature_width_m;
    if !(0.0..1.0).contains(&p.sparsity) {
        return Err(TerrainError::SpecInfeasible(format!("sparsity {} out of range", p.sparsity)));
    }
    let depth = s * (1.0 - p.sparsity);
    if depth < layout.cell {
        return Err(TerrainError::SpecInfeasible(format!(
            "beam depth {depth:.3} m is below one cell"
        )));
    }
    check_jitter(depth, s, p.randomness, "beam depth")?;

    let n = ((layout.band_max_x1 - layout.band_x0) / s + 1e-9).floor() as usize;
    if n == 0 {
        return Err(TerrainError::SpecInfeasible("terrain too small for one beam period".into()));
    }
    let full = layout.full_band();
    let band = Rect::new(layout.band_x0, full.y0, layout.band_x0 + n as f64 * s, full.y1);
    void_span(layout, canvas, band.x0, band.x1);

    let mut rng = seed::rng(seed::derive(seed_value, seed::STREAM_TERRAIN));
    let half_range = 0.5 * p.randomness * s;
    for i in 0..n {
        let jx = (rng.random::<f64>() * 2.0 - 1.0) * half_range;
        let cx = band.x0 + (i as f64 + 0.5) * s + jx;
        canvas.set_rect(layout, Rect::new(cx - depth / 2.0, band.y0, cx + depth / 2.0, band.y1), true);
    }
    Ok((band, p.sparsity))
}

fn build_balance_beam(
    layout: &Layout,
    canvas: &mut Canvas,
    p: TerrainParams,
) -> Result<(Rect, f64), TerrainError> {
    let w = p.feature_width_m;
    if w < layout.cell {
        return Err(TerrainError::SpecInfeasible(format!("beam width {w:.3} m is below one cell")));
    }
    let full = layout.full_band();
    let band = Rect::new(full.x0, full.y0, full.x1, full.y1);
    void_span(layout, canvas, band.x0, band.x1);
    canvas.set_rect(layout, Rect::new(band.x0, -w / 2.0, band.x1, w / 2.0), true);
    Ok((band, 1.0 - w / band.height()))
}

fn build_gaps(
    layout: &Layout,
    canvas: &mut Canvas,
    p: TerrainParams,
) -> Result<(Rect, f64), TerrainError> {
    let cell = layout.cell;
    let g = (p.feature_width_m / cell).round() * cell;
    let platform = (GAP_PLATFORM_M / cell).round() * cell;
    if g < cell {
        return Err(TerrainError::SpecInfeasible(format!("gap width {g:.3} m is below one cell")));
    }
    let period = g + platform;
    let n = ((layout.band_max_x1 - layout.band_x0) / period + 1e-9).floor() as usize;
    if n == 0 {
        return Err(TerrainError::SpecInfeasible("terrain too small for one gap period".into()));
    }
    let full = layout.full_band();
    let band = Rect::new(layout.band_x0, full.y0, layout.band_x0 + n as f64 * period, full.y1);
    for i in 0..n {
        let x0 = band.x0 + i as f64 * period;
        void_span(layout, canvas, x0, x0 + g);
    }
    Ok((band, g / period))
}

/// Width of the gap at a difficulty, as generated (snapped to the default 5 cm cells).
pub fn gap_width_m(difficulty: f64) -> f64 {
    DifficultyMap::default()
        .params(TerrainKind::Gaps, difficulty)
        .feature_width_m
}

// ---------------------------------------------------------------------------
// Curriculum

/// Highest difficulty any pretraining level uses.
pub const BASE_MAX_DIFFICULTY: f64 = 0.3;

/// Terrain specs for a curriculum stage. Base levels use the pretraining
/// variants at difficulty ≤ [`BASE_MAX_DIFFICULTY`]; advanced levels use the
/// four evaluation families with difficulty rising to 1.0 at the last level.
pub fn curriculum_terrains(stage: &CurriculumStage, seed_value: u64) -> Vec<TerrainSpec> {
    let level = stage.level.min(stage.total_levels.saturating_sub(1));
    let (kinds, difficulty): (&[TerrainKind], f64) = match stage.phase() {
        Phase::Base => {
            let steps = stage.base_levels.saturating_sub(1).max(1) as f64;
            (
                &[TerrainKind::Flat, TerrainKind::PretrainStones, TerrainKind::PretrainBeams],
                BASE_MAX_DIFFICULTY * f64::from(level) / steps,
            )
        }
        Phase::Advanced => {
            let advanced = stage.total_levels - stage.base_levels;
            let k = level - stage.base_levels;
            (&TerrainKind::FAMILIES, f64::from(k + 1) / f64::from(advanced.max(1)))
        }
    };
    kinds
        .iter()
        .map(|&kind| {
            let s = seed::derive_indexed(seed_value, "curriculum", u64::from(level) * 16 + kind.index());
            TerrainSpec::new(kind, difficulty.min(1.0), s)
        })
        .collect()
}
