//! Acceptance run: one PASS/FAIL line per criterion, each against its own
//! time budget. Criteria run one after another so timings are not skewed by
//! sibling tests competing for cores.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use foothold_core::geom::Vec3;
use foothold_core::grid::Grid;
use foothold_core::harness::{
    run_batch, walk_straight, walk_straight_with, EpisodeOptions, Perception, PlannerConfig, StraightWalk,
};
use foothold_core::localmap::{
    edge_penalty, edge_reward_term, mean_edge_violation, sample_gt, FootId, FootState, FootstepLog, LocalHeightmap,
    MAP_CELL_M, MAP_COLS, MAP_ROWS,
};
use foothold_core::schedule::{adasmpl_prob, RewardWindow};
use foothold_core::sensor::{render_depth, CameraModel, NoiseModel, RobotPose};
use foothold_core::terrain::{generate, HeightField, Rect, TerrainKind, TerrainSpec, HEIGHT_QUANTUM_M};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion(n: u32, name: &str, budget_s: u64, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = panic::catch_unwind(AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let o = result.unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    });
    let in_time = elapsed <= Duration::from_secs(budget_s);
    let pass = o.pass && in_time;
    println!(
        "{} criterion {n} ({name}): {} [{:.1} s, budget {budget_s} s{}]",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64(),
        if in_time { "" } else { ", over budget" }
    );
    pass
}

/// Unsafe fraction over cells whose centers lie in `band`.
fn band_sparsity(hf: &HeightField, band: Rect) -> f64 {
    let (mut total, mut void) = (0usize, 0usize);
    for (r, c, &safe) in hf.safe.indexed() {
        let [x, y] = hf.cell_center(r, c);
        if x >= band.x0 && x < band.x1 && y >= band.y0 && y < band.y1 {
            total += 1;
            void += usize::from(!safe);
        }
    }
    void as f64 / total as f64
}

fn band_cols(hf: &HeightField) -> Vec<usize> {
    (0..hf.cols())
        .filter(|&c| {
            let x = hf.cell_center(0, c)[0];
            x >= hf.band.x0 && x < hf.band.x1
        })
        .collect()
}

fn terrain_calibration() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (kind, target) in [(TerrainKind::SteppingStones, 0.763), (TerrainKind::SteppingBeams, 0.647)] {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for seed in 0..100 {
            let hf = generate(&TerrainSpec::new(kind, 1.0, seed)).unwrap();
            let s = band_sparsity(&hf, hf.band);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        pass &= (lo - target).abs() <= 0.02 && (hi - target).abs() <= 0.02;
        lines.push(format!("{kind} sparsity {lo:.4}..{hi:.4} (target {target})"));
    }

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 0..100 {
        let hf = generate(&TerrainSpec::new(TerrainKind::BalanceBeams, 1.0, seed)).unwrap();
        for c in band_cols(&hf) {
            let w = (0..hf.rows()).filter(|&r| hf.safe[(r, c)]).count() as f64 * hf.cell_m;
            lo = lo.min(w);
            hi = hi.max(w);
        }
    }
    pass &= (lo - 0.175).abs() <= 0.05 + 1e-9 && (hi - 0.175).abs() <= 0.05 + 1e-9;
    lines.push(format!("beam width {lo:.3}..{hi:.3} m (target 0.175)"));

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 0..100 {
        let hf = generate(&TerrainSpec::new(TerrainKind::Gaps, 1.0, seed)).unwrap();
        let cols = band_cols(&hf);
        for r in 0..hf.rows() {
            let mut run = 0usize;
            for &c in cols.iter().chain(std::iter::once(&usize::MAX)) {
                if c != usize::MAX && !hf.safe[(r, c)] {
                    run += 1;
                } else if run > 0 {
                    let w = run as f64 * hf.cell_m;
                    lo = lo.min(w);
                    hi = hi.max(w);
                    run = 0;
                }
            }
        }
    }
    pass &= lo.is_finite() && (lo - 0.70).abs() <= 0.05 + 1e-9 && (hi - 0.70).abs() <= 0.05 + 1e-9;
    lines.push(format!("gap width {lo:.3}..{hi:.3} m (target 0.70)"));
    outcome(pass, lines.join("; "))
}

fn brute_edge_dist(heights: &Grid<f64>, safe: &Grid<bool>, cell: f64) -> Grid<f64> {
    let (rows, cols) = (heights.rows(), heights.cols());
    let mut feats = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let step = [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)].iter().any(|&(dr, dc)| {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                nr >= 0
                    && nc >= 0
                    && (nr as usize) < rows
                    && (nc as usize) < cols
                    && safe[(nr as usize, nc as usize)]
                    && (heights[(nr as usize, nc as usize)] - heights[(r, c)]).abs() > 0.1
            });
            if !safe[(r, c)] || step {
                feats.push((r as i64, c as i64));
            }
        }
    }
    Grid::from_fn(rows, cols, |r, c| {
        feats
            .iter()
            .map(|&(fr, fc)| ((fr - r as i64).pow(2) + (fc - c as i64).pow(2)) as u64)
            .min()
            .map_or(f64::INFINITY, |d| (d as f64).sqrt() * cell)
    })
}

fn distance_transform_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatched = 0;
    let mut cells = 0usize;
    for _ in 0..500 {
        let rows = rng.random_range(1..=64);
        let cols = rng.random_range(1..=64);
        let p_void = rng.random_range(0.0..0.5);
        let stepped = rng.random_bool(0.5);
        let safe = Grid::from_fn(rows, cols, |_, _| !rng.random_bool(p_void));
        let heights = Grid::from_fn(rows, cols, |_, _| {
            if stepped {
                [0.0, 0.05, 0.2][rng.random_range(0..3)]
            } else {
                0.0
            }
        });
        let hf = HeightField::from_grids(0.05, [0.0, 0.0], heights.clone(), safe.clone());
        let oracle = brute_edge_dist(&heights, &safe, 0.05);
        cells += rows * cols;
        if hf.edge_dist != oracle {
            mismatched += 1;
        }
    }
    outcome(mismatched == 0, format!("{mismatched} of 500 masks differ ({cells} cells compared)"))
}

fn heightmap_contract() -> Outcome {
    let first = LocalHeightmap::cell_center(0, 0);
    let last = LocalHeightmap::cell_center(MAP_ROWS - 1, MAP_COLS - 1);
    let lo = [first[0] - MAP_CELL_M / 2.0, first[1] - MAP_CELL_M / 2.0];
    let hi = [last[0] + MAP_CELL_M / 2.0, last[1] + MAP_CELL_M / 2.0];
    let near = |a: f64, b: f64| (a - b).abs() < 1e-12;
    let geometry = MAP_ROWS == 32
        && MAP_COLS == 16
        && MAP_CELL_M == 0.05
        && near(lo[0], -0.5)
        && near(hi[0], 1.1)
        && near(lo[1], -0.4)
        && near(hi[1], 0.4);

    let hf = generate(&TerrainSpec::new(TerrainKind::SteppingStones, 1.0, 3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad_poses = 0;
    for _ in 0..1000 {
        let pose = RobotPose::new(
            rng.random_range(-3.0..8.0),
            rng.random_range(-2.5..2.5),
            rng.random_range(0.0..0.6),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let (s, c) = pose.yaw_rad.sin_cos();
        let mut expect = Vec::new();
        for i in 0..32 {
            for j in 0..16 {
                let lx = -0.5 + 0.05 * (i as f64 + 0.5);
                let ly = -0.4 + 0.05 * (j as f64 + 0.5);
                let wx = pose.position.x + c * lx - s * ly;
                let wy = pose.position.y + s * lx + c * ly;
                let col = ((wx - hf.origin[0]) / hf.cell_m).floor();
                let row = ((wy - hf.origin[1]) / hf.cell_m).floor();
                let inside = col >= 0.0 && row >= 0.0 && (col as usize) < hf.cols() && (row as usize) < hf.rows();
                expect.push(inside.then(|| hf.heights[(row as usize, col as usize)] - pose.position.z));
            }
        }
        let ok = match sample_gt(&hf, &pose) {
            Ok(m) => {
                m.grid.rows() == 32
                    && m.grid.cols() == 16
                    && expect.iter().enumerate().all(|(k, e)| {
                        let ij = (k / 16, k % 16);
                        m.valid[ij] == e.is_some() && e.is_none_or(|h| m.grid[ij] == h)
                    })
            }
            Err(_) => expect.iter().all(Option::is_none),
        };
        bad_poses += usize::from(!ok);
    }
    outcome(
        geometry && bad_poses == 0,
        format!(
            "window x [{:.3}, {:.3}] y [{:.3}, {:.3}], {bad_poses} of 1000 poses differ from per-cell lookup",
            lo[0], hi[0], lo[1], hi[1]
        ),
    )
}

fn reconstruction_accuracy() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in TerrainKind::FAMILIES {
        let (mut clean_max, mut noisy_max) = (0.0f64, 0.0f64);
        for seed in 0..20 {
            let hf = generate(&TerrainSpec::new(kind, 1.0, seed)).unwrap();
            let clean = walk_straight(&hf, &StraightWalk::default()).unwrap();
            clean_max = clean_max.max(clean.final_mae_cm().unwrap());
            let noisy = walk_straight(
                &hf,
                &StraightWalk {
                    noise: NoiseModel::gaussian(0.02, seed),
                    ..StraightWalk::default()
                },
            )
            .unwrap();
            let worst = noisy.trace.iter().map(|r| r.mae_cm).fold(0.0, f64::max);
            noisy_max = noisy_max.max(worst.max(noisy.final_mae_cm().unwrap()));
        }
        pass &= clean_max < 1.0 && noisy_max < 8.0;
        parts.push(format!("{kind} noiseless final <= {clean_max:.3} cm, noisy <= {noisy_max:.3} cm"));
    }
    outcome(pass, parts.join("; "))
}

/// Connected safe regions inside the structured band.
fn stones(hf: &HeightField) -> Vec<Vec<(usize, usize)>> {
    let mut label = Grid::filled(hf.rows(), hf.cols(), usize::MAX);
    let in_band = |r: usize, c: usize| {
        let [x, y] = hf.cell_center(r, c);
        hf.safe[(r, c)] && x >= hf.band.x0 && x < hf.band.x1 && y >= hf.band.y0 && y < hf.band.y1
    };
    let mut out = Vec::new();
    for r in 0..hf.rows() {
        for c in 0..hf.cols() {
            if !in_band(r, c) || label[(r, c)] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut cells = Vec::new();
            let mut queue = VecDeque::from([(r, c)]);
            label[(r, c)] = id;
            while let Some((a, b)) = queue.pop_front() {
                cells.push((a, b));
                for (da, db) in [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)] {
                    let (na, nb) = (a as i64 + da, b as i64 + db);
                    if na < 0 || nb < 0 || na as usize >= hf.rows() || nb as usize >= hf.cols() {
                        continue;
                    }
                    let (na, nb) = (na as usize, nb as usize);
                    if in_band(na, nb) && label[(na, nb)] == usize::MAX {
                        label[(na, nb)] = id;
                        queue.push_back((na, nb));
                    }
                }
            }
            out.push(cells);
        }
    }
    out
}

struct Sighting {
    x: f64,
    heights: Vec<((usize, usize), f64)>,
    done: bool,
}

fn memory_property() -> Outcome {
    let cam = CameraModel::default();
    let mut verified_total = 0usize;
    let mut violations = 0usize;
    let mut max_drift = 0.0f64;
    let mut min_verified = usize::MAX;
    for k in 0..10u64 {
        let hf = generate(&TerrainSpec::new(TerrainKind::SteppingStones, 1.0, 100 + k)).unwrap();
        let regions = stones(&hf);
        let mut owner = HashMap::new();
        for (id, cells) in regions.iter().enumerate() {
            for &rc in cells {
                owner.insert(rc, id);
            }
        }
        let walk = StraightWalk {
            start: [-1.0, -0.1 + 0.02 * k as f64],
            ..StraightWalk::default()
        };
        let mut sightings: HashMap<usize, Sighting> = HashMap::new();
        walk_straight_with(&hf, &walk, |tick, pose, state| {
            let mut seen = HashSet::new();
            if walk.clock.has_new_depth(tick) {
                let img = render_depth(&hf, pose, &cam).unwrap();
                let (o, rot) = pose.camera_frame(&cam);
                for (r, c, &t) in img.ranges.indexed() {
                    if img.is_no_return(t) {
                        continue;
                    }
                    let p = o + rot.apply(cam.pixel_direction(r, c)) * (t + 1e-6);
                    if let Some(id) = hf.cell_of(p.x, p.y).and_then(|rc| owner.get(&rc)) {
                        seen.insert(*id);
                    }
                }
                for &id in &seen {
                    let heights = regions[id]
                        .iter()
                        .filter_map(|&rc| {
                            let m = state.cell_at(hf.cell_center(rc.0, rc.1))?;
                            state.valid[m].then(|| (rc, state.memory[m]))
                        })
                        .collect();
                    sightings.insert(
                        id,
                        Sighting {
                            x: pose.position.x,
                            heights,
                            done: false,
                        },
                    );
                }
            }
            for (id, s) in sightings.iter_mut() {
                if s.done || seen.contains(id) {
                    continue;
                }
                for &(rc, h) in &s.heights {
                    let cell = state.cell_at(hf.cell_center(rc.0, rc.1));
                    match cell {
                        Some(m) if state.valid[m] => {
                            let d = (state.memory[m] - h).abs();
                            max_drift = max_drift.max(d);
                            violations += usize::from(d > HEIGHT_QUANTUM_M);
                        }
                        _ => violations += 1,
                    }
                }
                if pose.position.x - s.x >= 1.0 {
                    s.done = true;
                }
            }
        })
        .unwrap();
        let verified = sightings.values().filter(|s| s.done && !s.heights.is_empty()).count();
        min_verified = min_verified.min(verified);
        verified_total += verified;
    }
    outcome(
        violations == 0 && min_verified > 0,
        format!(
            "{verified_total} stones held for 1 m after leaving view over 10 walks (fewest per walk {min_verified}), \
             {violations} lost or drifted cells, max drift {max_drift:.2e} m"
        ),
    )
}

fn edge_term_and_mev() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();

    let mut worst = 0.0f64;
    for k in 0..=10 {
        let d = 0.005 * k as f64;
        worst = worst.max((edge_reward_term(d) - (1.0 - d / 0.05)).abs());
    }
    pass &= worst < 1e-12 && edge_reward_term(0.05) == 0.0 && edge_reward_term(0.2) == 0.0;
    notes.push(format!("E(d) off the linear ramp by {worst:.1e} at 11 distances"));

    // Fine 5 mm grid with one void column; foot clearances step through the band.
    let cell = 0.005;
    let mut safe = Grid::filled(40, 200, true);
    for r in 0..40 {
        safe[(r, 100)] = false;
    }
    let hf = HeightField::from_grids(cell, [0.0, 0.0], Grid::filled(40, 200, 0.0), safe);
    let foot = |id, x: f64, contact| FootState {
        foot_id: id,
        position: Vec3::new(x, 0.1, 0.0),
        contact,
    };
    let mut ramp_err = 0.0f64;
    for k in 0..=14 {
        let x = (100.5 + k as f64) * cell;
        let clearance = if k == 0 { 0.0 } else { k as f64 * cell - cell / 2.0 };
        let expect = -(1.0 - clearance / 0.05).max(0.0);
        ramp_err = ramp_err.max((edge_penalty(&[foot(FootId::FL, x, true)], &hf) - expect).abs());
    }
    let on_edge = 100.5 * cell;
    let all = FootId::ALL.map(|id| foot(id, on_edge, true));
    let two = [
        foot(FootId::FL, on_edge, true),
        foot(FootId::FR, on_edge, false),
        foot(FootId::RL, on_edge, true),
        foot(FootId::RR, on_edge, false),
    ];
    let far = FootId::ALL.map(|id| foot(id, 180.5 * cell, true));
    let counts_ok = edge_penalty(&all, &hf) == -4.0 && edge_penalty(&two, &hf) == -2.0 && edge_penalty(&far, &hf) == 0.0;
    pass &= ramp_err < 1e-12 && counts_ok;
    notes.push(format!(
        "penalty off oracle by {ramp_err:.1e}, -1 per contact at the edge: {counts_ok}"
    ));

    let stones_hf = generate(&TerrainSpec::new(TerrainKind::SteppingStones, 1.0, 9)).unwrap();
    let oracle = brute_edge_dist(&stones_hf.heights, &stones_hf.safe, stones_hf.cell_m);
    let clearance = |p: Vec3| match stones_hf.cell_of(p.x, p.y) {
        Some(rc) if stones_hf.safe[rc] => (oracle[rc] - stones_hf.cell_m / 2.0).max(0.0),
        _ => 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..80);
        let mut log = FootstepLog::new();
        let mut hits = 0;
        for t in 0..n {
            let p = Vec3::new(rng.random_range(0.5..5.5), rng.random_range(-1.5..1.5), 0.0);
            hits += usize::from(clearance(p) < 0.05);
            log.push(t, FootState {
                foot_id: FootId::ALL[rng.random_range(0..4)],
                position: p,
                contact: true,
            })
            .unwrap();
        }
        if mean_edge_violation(&log, &stones_hf).unwrap() != hits as f64 / n as f64 {
            mismatches += 1;
        }
    }
    pass &= mismatches == 0;
    notes.push(format!("MEV differs from enumeration on {mismatches} of 200 logs"));
    outcome(pass, notes.join("; "))
}

fn reference_tanh(x: f64) -> f64 {
    let e = (-2.0 * x).exp();
    (1.0 - e) / (1.0 + e)
}

fn adasmpl() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut scale_breaks = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=100);
        let center = rng.random_range(-50.0..50.0);
        let spread = rng.random_range(0.0..30.0);
        let rewards: Vec<f64> = (0..n).map(|_| center + rng.random_range(-1.0..1.0) * spread).collect();
        let w = RewardWindow::from_rewards(100, &rewards);
        let mean = rewards.iter().sum::<f64>() / n as f64;
        let sd = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let cv = if mean.abs() < 1e-9 { 10.0 } else { (sd / mean.abs()).min(10.0) };
        let p = adasmpl_prob(&w).unwrap();
        worst = worst.max((p - reference_tanh(cv)).abs());
        let e = rng.random_range(-20..=20);
        let scaled: Vec<f64> = rewards.iter().map(|r| r * 2f64.powi(e)).collect();
        if adasmpl_prob(&RewardWindow::from_rewards(100, &scaled)).unwrap() != p {
            scale_breaks += 1;
        }
    }
    let mut constant_nonzero = 0;
    for _ in 0..200 {
        let r = rng.random_range(-100.0..100.0);
        let n = rng.random_range(2..=100);
        if adasmpl_prob(&RewardWindow::from_rewards(100, &vec![r; n])).unwrap() != 0.0 {
            constant_nonzero += 1;
        }
    }
    outcome(
        worst <= 1e-9 && scale_breaks == 0 && constant_nonzero == 0,
        format!(
            "max |p - tanh(CV)| {worst:.1e} over 1000 windows, {scale_breaks} scale-invariance breaks, \
             {constant_nonzero} non-zero constant windows"
        ),
    )
}

fn success_rate(kind: TerrainKind, planner: &PlannerConfig, n: usize) -> (f64, f64) {
    let rs = run_batch(&TerrainSpec::new(kind, 1.0, 0), planner, n, &EpisodeOptions::default()).unwrap();
    let s = rs.iter().filter(|r| r.success).count() as f64 / n as f64;
    let mev = rs.iter().map(|r| r.mev).sum::<f64>() / n as f64;
    (s, mev)
}

fn perception_ordering() -> Outcome {
    let n = 200;
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in TerrainKind::FAMILIES {
        let gt = success_rate(kind, &PlannerConfig::new(Perception::GroundTruth), n).0;
        let rc = success_rate(kind, &PlannerConfig::new(Perception::Reconstructed), n).0;
        let bl = success_rate(kind, &PlannerConfig::new(Perception::Blind), n).0;
        pass &= gt >= rc && rc >= bl;
        parts.push(format!("{kind} {gt:.3}/{rc:.3}/{bl:.3}"));
    }
    let aware = success_rate(TerrainKind::SteppingStones, &PlannerConfig::new(Perception::GroundTruth), n).1;
    let ignoring = success_rate(
        TerrainKind::SteppingStones,
        &PlannerConfig {
            edge_margin_weight: 0.0,
            ..PlannerConfig::new(Perception::GroundTruth)
        },
        n,
    )
    .1;
    pass &= aware <= ignoring;
    parts.push(format!("stones MEV edge-aware {aware:.3} vs edge-ignoring {ignoring:.3}"));
    outcome(pass, format!("success GT/Recon/Blind: {}", parts.join("; ")))
}

fn hash_tree(dir: &Path) -> BTreeMap<PathBuf, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let digest = Sha256::digest(std::fs::read(&p).unwrap());
                let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), hex);
            }
        }
    }
    out
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = root.join("eval.cfg");
    std::fs::write(
        &cfg,
        "kinds = stepping_stones, gaps\nperceptions = ground_truth, reconstructed, blind\nn_seeds = 4\nseed = 5\n",
    )
    .unwrap();
    let eval_a = root.join("evaluate_a");
    let runs: Vec<(&str, Vec<String>)> = vec![
        ("generate", vec!["--kind", "stepping_stones", "--difficulty", "1.0", "--seed", "7"]),
        (
            "walk",
            vec!["--kind", "stepping_stones", "--difficulty", "1.0", "--seed", "3", "--noise-sigma", "0.02", "--dump-depth", "on", "--snapshot-every", "100"],
        ),
        ("evaluate", vec!["--config", cfg.to_str().unwrap()]),
        ("sweep", vec!["--episodes", "20", "--seed", "2"]),
        ("report", vec!["--input", eval_a.join("aggregate.csv").to_str().unwrap()]),
    ]
    .into_iter()
    .map(|(c, a)| (c, a.into_iter().map(String::from).collect()))
    .collect();

    let mut diffs = Vec::new();
    let mut files = 0;
    for (cmd, args) in &runs {
        let mut trees = Vec::new();
        for tag in ["a", "b"] {
            let out = root.join(format!("{cmd}_{tag}"));
            let status = Command::new(env!("CARGO_BIN_EXE_foothold"))
                .arg(cmd)
                .args(args)
                .arg("--out")
                .arg(&out)
                .status()
                .unwrap();
            if !status.success() {
                diffs.push(format!("{cmd} exited with {status}"));
            }
            trees.push(hash_tree(&out));
        }
        files += trees[0].len();
        if trees[0] != trees[1] || trees[0].is_empty() {
            diffs.push(format!("{cmd} outputs differ"));
        }
    }
    outcome(
        diffs.is_empty(),
        if diffs.is_empty() {
            format!("5 commands rerun, {files} files byte-identical by SHA-256")
        } else {
            diffs.join("; ")
        },
    )
}

fn main() {
    let results = [
        criterion(1, "terrain calibration", 10, terrain_calibration),
        criterion(2, "distance transform oracle", 30, distance_transform_oracle),
        criterion(3, "heightmap contract", 10, heightmap_contract),
        criterion(4, "reconstruction accuracy", 120, reconstruction_accuracy),
        criterion(5, "memory of unseen terrain", 30, memory_property),
        criterion(6, "foot-edge term and MEV", 5, edge_term_and_mev),
        criterion(7, "adaptive sampling probability", 5, adasmpl),
        criterion(8, "perception ordering", 300, perception_ordering),
        criterion(9, "CLI determinism", 60, cli_determinism),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
