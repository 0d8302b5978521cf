use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use foothold_core::config::KvConfig;
use foothold_core::grid::Grid;
use foothold_core::harness::{
    self, AggregateRow, EpisodeOptions, Perception, PlannerConfig, StraightWalk, DEFAULT_MAX_TICKS,
};
use foothold_core::io;
use foothold_core::localmap::{self, LocalHeightmap};
use foothold_core::reconstructor::{MaeTraceRow, OdometryNoise};
use foothold_core::schedule::{CurriculumStage, HeightmapSource, ScheduleTraceRow, Scheduler};
use foothold_core::seed;
use foothold_core::sensor::NoiseModel;
use foothold_core::terrain::{self, fmt_f64, TerrainKind, TerrainSpec};

use crate::options::{config_err, CliError};

pub const GENERATE_DEFAULTS: &[(&str, &str)] = &[
    ("kind", "stepping_stones"),
    ("difficulty", "1.0"),
    ("seed", "0"),
    ("length_m", "6.0"),
    ("width_m", "4.0"),
    ("cell_m", "0.05"),
];

pub const WALK_DEFAULTS: &[(&str, &str)] = &[
    ("kind", "flat"),
    ("difficulty", "0.0"),
    ("seed", "0"),
    ("length_m", "6.0"),
    ("width_m", "4.0"),
    ("cell_m", "0.05"),
    ("start_x", "-1.0"),
    ("start_y", "0.0"),
    ("distance_m", "7.0"),
    ("step_m", "0.01"),
    ("noise_sigma", "0.0"),
    ("dropout", "0.0"),
    ("odometry_sigma_m", "0.0"),
    ("odometry_yaw_sigma_rad", "0.0"),
    ("max_age_ticks", "0"),
    ("dump_depth", "off"),
    ("snapshot_every", "0"),
];

pub const EVALUATE_DEFAULTS: &[(&str, &str)] = &[
    ("kinds", "stepping_stones,balance_beams,stepping_beams,gaps"),
    ("difficulties", "1.0"),
    ("perceptions", "ground_truth,reconstructed,blind"),
    ("n_seeds", "50"),
    ("seed", "0"),
    ("length_m", "6.0"),
    ("width_m", "4.0"),
    ("cell_m", "0.05"),
    ("nominal_step_m", "0.2"),
    ("edge_margin_weight", "2.0"),
    ("forward_weight", "1.0"),
    ("noise_sigma", "0.0"),
    ("dropout", "0.0"),
    ("odometry_sigma_m", "0.0"),
    ("odometry_yaw_sigma_rad", "0.0"),
    ("max_ticks", "4000"),
    ("check_ordering", "off"),
];

pub const SWEEP_DEFAULTS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("episodes", "60"),
    ("base_levels", "3"),
    ("total_levels", "6"),
    ("promote_threshold", "0.8"),
    ("window", "100"),
    ("promote_every", "10"),
    ("noise_sigma", "0.0"),
];

pub const REPORT_DEFAULTS: &[(&str, &str)] = &[("input", "aggregate.csv"), ("check_ordering", "off")];

fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn terrain_spec(cfg: &KvConfig) -> Result<TerrainSpec, CliError> {
    Ok(TerrainSpec::from_config_lenient(cfg)?)
}

fn non_negative(cfg: &KvConfig, key: &str) -> Result<f64, CliError> {
    let v: f64 = cfg.require(key)?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(config_err(key, format!("{v} must be finite and non-negative")));
    }
    Ok(v)
}

fn probability(cfg: &KvConfig, key: &str) -> Result<f64, CliError> {
    let v = non_negative(cfg, key)?;
    if v >= 1.0 {
        return Err(config_err(key, format!("{v} must be below 1")));
    }
    Ok(v)
}

fn noise_model(cfg: &KvConfig, global: u64) -> Result<NoiseModel, CliError> {
    Ok(NoiseModel {
        gaussian_sigma_m: non_negative(cfg, "noise_sigma")?,
        dropout_prob: if cfg.contains("dropout") { probability(cfg, "dropout")? } else { 0.0 },
        seed: seed::derive(global, seed::STREAM_NOISE),
    })
}

fn odometry_noise(cfg: &KvConfig, global: u64) -> Result<Option<OdometryNoise>, CliError> {
    let t = non_negative(cfg, "odometry_sigma_m")?;
    let y = non_negative(cfg, "odometry_yaw_sigma_rad")?;
    Ok((t > 0.0 || y > 0.0).then(|| OdometryNoise {
        translation_sigma_m: t,
        yaw_sigma_rad: y,
        seed: seed::derive(global, seed::STREAM_ODOMETRY),
        index: 0,
    }))
}

/// Heights of valid cells, `NaN` elsewhere.
fn masked(map: &LocalHeightmap) -> Grid<f64> {
    Grid::from_fn(map.grid.rows(), map.grid.cols(), |i, j| {
        if map.valid[(i, j)] {
            map.grid[(i, j)]
        } else {
            f64::NAN
        }
    })
}

pub fn generate(cfg: &KvConfig, out: &Path) -> Result<(), CliError> {
    let spec = terrain_spec(cfg)?;
    let hf = terrain::generate(&spec)?;
    write(out, "heightfield.pgm", io::heightfield_pgm(&hf))?;
    write(out, "heightfield.csv", io::grid_to_csv(&hf.heights))?;
    write(out, "safety.pgm", io::mask_pgm(&hf.safe))?;
    write(out, "edge_dist.csv", io::grid_to_csv(&hf.edge_dist))?;
    Ok(())
}

pub fn walk(cfg: &KvConfig, out: &Path) -> Result<(), CliError> {
    let spec = terrain_spec(cfg)?;
    let step: f64 = cfg.require("step_m")?;
    if !(step > 0.0 && step < 0.1) {
        return Err(config_err("step_m", format!("{step} must lie in (0, 0.1)")));
    }
    let distance = non_negative(cfg, "distance_m")?;
    let max_age: u32 = cfg.require("max_age_ticks")?;
    let snapshot_every: u64 = cfg.require("snapshot_every")?;
    let dump_depth = cfg.parse_bool("dump_depth", false)?;
    let walk = StraightWalk {
        start: [cfg.require("start_x")?, cfg.require("start_y")?],
        distance_m: distance,
        step_m_per_tick: step,
        noise: noise_model(cfg, spec.seed)?,
        odometry_noise: odometry_noise(cfg, spec.seed)?,
        max_age_ticks: (max_age > 0).then_some(max_age),
        keep_frames: dump_depth,
        ..StraightWalk::default()
    };
    for key in ["start_x", "start_y"] {
        let v: f64 = cfg.require(key)?;
        if !v.is_finite() {
            return Err(config_err(key, "must be finite"));
        }
    }

    let hf = terrain::generate(&spec)?;
    let mut snapshots: Vec<(u64, Grid<f64>, Grid<f64>)> = Vec::new();
    let mut gt_error = None;
    let result = harness::walk_straight_with(&hf, &walk, |tick, pose, state| {
        if snapshot_every > 0 && tick % snapshot_every == 0 {
            match localmap::sample_gt(&hf, pose) {
                Ok(gt) => snapshots.push((tick, masked(&state.refined()), masked(&gt))),
                Err(e) => gt_error = Some(e),
            }
        }
    })
    .context("walk failed")?;
    if let Some(e) = gt_error {
        return Err(anyhow::Error::from(e).context("ground-truth snapshot failed").into());
    }

    let mut trace = String::from(MaeTraceRow::HEADER);
    trace.push('\n');
    for row in &result.trace {
        trace.push_str(&row.to_csv());
        trace.push('\n');
    }
    write(out, "mae_trace.csv", trace)?;
    write(out, "recon_heights.csv", io::grid_to_csv(&masked(&result.refined)))?;
    write(out, "recon_rough.csv", io::grid_to_csv(&masked(&result.rough)))?;
    write(out, "gt_heights.csv", io::grid_to_csv(&masked(&result.gt)))?;
    write(out, "memory_heights.csv", io::grid_to_csv(&result.state.memory))?;
    write(out, "memory_valid.csv", io::bool_grid_to_csv(&result.state.valid))?;
    write(out, "memory_age.csv", io::u32_grid_to_csv(&result.state.age_ticks))?;
    for (tick, recon, gt) in &snapshots {
        write(out, &format!("snapshots/tick_{tick:05}_recon.csv"), io::grid_to_csv(recon))?;
        write(out, &format!("snapshots/tick_{tick:05}_gt.csv"), io::grid_to_csv(gt))?;
    }
    for (k, frame) in result.frames.iter().enumerate() {
        write(out, &format!("depth/frame_{k:05}.pgm"), io::depth_pgm(frame))?;
    }

    let mut summary = String::new();
    let final_mae = result.final_mae_cm().ok();
    let fmt_opt = |v: Option<f64>| v.map_or("nan".to_string(), |v| format!("{v:.6}"));
    writeln!(summary, "terrain: {} difficulty {} seed {}", spec.kind, fmt_f64(spec.difficulty), spec.seed).unwrap();
    writeln!(summary, "frames fused: {}", result.trace.len()).unwrap();
    writeln!(summary, "final mae_cm: {}", fmt_opt(final_mae)).unwrap();
    writeln!(summary, "mean mae_cm: {}", fmt_opt(result.mean_mae_cm())).unwrap();
    writeln!(summary, "final valid_fraction: {:.6}", result.refined.valid_fraction()).unwrap();
    write(out, "summary.txt", summary)?;
    Ok(())
}

fn planner_for(cfg: &KvConfig, perception: Perception) -> Result<PlannerConfig, CliError> {
    let mut p = PlannerConfig::new(perception);
    p.nominal_step_m = cfg.require("nominal_step_m")?;
    p.edge_margin_weight = cfg.require("edge_margin_weight")?;
    p.forward_weight = cfg.require("forward_weight")?;
    p.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(p)
}

/// Pairs of (kind, difficulty) where a better-informed perception succeeded
/// less often than a worse-informed one.
pub fn ordering_violations(rows: &[AggregateRow]) -> Vec<String> {
    let rank = |p: Perception| match p {
        Perception::GroundTruth => 0,
        Perception::Reconstructed => 1,
        Perception::Blind => 2,
    };
    let mut groups: BTreeMap<(TerrainKind, String), Vec<&AggregateRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.kind, fmt_f64(r.difficulty))).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((kind, diff), group) in groups {
        for a in &group {
            for b in &group {
                if rank(a.perception) < rank(b.perception) && a.success_rate < b.success_rate {
                    out.push(format!(
                        "{kind} difficulty {diff}: {} success {:.4} < {} success {:.4}",
                        a.perception, a.success_rate, b.perception, b.success_rate
                    ));
                }
            }
        }
    }
    out
}

fn summary_table(rows: &[AggregateRow], violations: &[String]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:<16} {:>10} {:<14} {:>8} {:>9} {:>8} {:>7} {:>8}",
        "kind", "difficulty", "perception", "success", "trav", "trav_sd", "mev", "mae_cm"
    )
    .unwrap();
    for r in rows {
        writeln!(
            s,
            "{:<16} {:>10} {:<14} {:>8.3} {:>9.3} {:>8.3} {:>7.3} {:>8}",
            r.kind.name(),
            fmt_f64(r.difficulty),
            r.perception.name(),
            r.success_rate,
            r.trav_mean,
            r.trav_sd,
            r.mev,
            if r.mae_cm.is_nan() { "-".to_string() } else { format!("{:.3}", r.mae_cm) }
        )
        .unwrap();
    }
    s.push('\n');
    if violations.is_empty() {
        s.push_str("perception ordering: holds\n");
    } else {
        s.push_str("perception ordering: violated\n");
        for v in violations {
            writeln!(s, "  {v}").unwrap();
        }
    }
    s
}

fn gate(cfg: &KvConfig, violations: &[String]) -> Result<(), CliError> {
    for v in violations {
        eprintln!("ordering violation: {v}");
    }
    if cfg.parse_bool("check_ordering", false)? && !violations.is_empty() {
        return Err(CliError::Gate(format!("{} perception ordering violation(s)", violations.len())));
    }
    Ok(())
}

pub fn evaluate(cfg: &KvConfig, out: &Path) -> Result<(), CliError> {
    let kinds: Vec<TerrainKind> = cfg.parse_list("kinds")?.unwrap_or_default();
    let difficulties: Vec<f64> = cfg.parse_list("difficulties")?.unwrap_or_default();
    let perceptions: Vec<Perception> = cfg.parse_list("perceptions")?.unwrap_or_default();
    let n_seeds: usize = cfg.require("n_seeds")?;
    if n_seeds == 0 {
        return Err(config_err("n_seeds", "must be at least 1"));
    }
    let global: u64 = cfg.require("seed")?;
    let max_ticks: u64 = cfg.parse_or("max_ticks", DEFAULT_MAX_TICKS)?;
    let opts = EpisodeOptions {
        noise: noise_model(cfg, global)?,
        odometry_noise: odometry_noise(cfg, global)?,
        max_ticks,
        ..EpisodeOptions::default()
    };
    let mut specs = Vec::new();
    for &kind in &kinds {
        for &difficulty in &difficulties {
            let mut spec = TerrainSpec::new(kind, difficulty, global);
            spec.length_m = cfg.require("length_m")?;
            spec.width_m = cfg.require("width_m")?;
            spec.cell_m = cfg.require("cell_m")?;
            spec.validate()?;
            specs.push(spec);
        }
    }
    let planners = perceptions
        .iter()
        .map(|&p| planner_for(cfg, p))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    for spec in &specs {
        for planner in &planners {
            let results = harness::run_batch(spec, planner, n_seeds, &opts)
                .with_context(|| format!("{} difficulty {} {}", spec.kind, fmt_f64(spec.difficulty), planner.perception))?;
            rows.push(AggregateRow::from_results(spec, planner.perception, &results));
        }
    }
    let violations = ordering_violations(&rows);
    write(out, "aggregate.csv", io::aggregate_to_csv(&rows))?;
    write(out, "summary.txt", summary_table(&rows, &violations))?;
    gate(cfg, &violations)
}

pub fn sweep(cfg: &KvConfig, out: &Path) -> Result<(), CliError> {
    let global: u64 = cfg.require("seed")?;
    let episodes: u64 = cfg.require("episodes")?;
    let base_levels: u32 = cfg.require("base_levels")?;
    let total_levels: u32 = cfg.require("total_levels")?;
    if base_levels == 0 || total_levels <= base_levels {
        return Err(config_err("total_levels", "need base_levels >= 1 and total_levels > base_levels"));
    }
    let threshold: f64 = cfg.require("promote_threshold")?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(config_err("promote_threshold", format!("{threshold} is outside [0, 1]")));
    }
    let window: usize = cfg.require("window")?;
    if window < 2 {
        return Err(config_err("window", "must hold at least 2 rewards"));
    }
    let promote_every: usize = cfg.require("promote_every")?;
    if promote_every == 0 {
        return Err(config_err("promote_every", "must be at least 1"));
    }
    let base_opts = EpisodeOptions {
        noise: noise_model(cfg, global)?,
        ..EpisodeOptions::default()
    };

    let stage = CurriculumStage::new(base_levels, total_levels, threshold, window);
    let mut scheduler = Scheduler::new(stage, global, promote_every);
    let mut rows: Vec<ScheduleTraceRow> = Vec::new();
    for ep in 0..episodes {
        let pool = terrain::curriculum_terrains(&scheduler.stage, seed::derive_indexed(global, seed::STREAM_TERRAIN, ep));
        let spec = pool[(ep % pool.len() as u64) as usize].clone();
        let source = scheduler.next_source();
        let perception = match source {
            HeightmapSource::GroundTruth => Perception::GroundTruth,
            HeightmapSource::Reconstructed => Perception::Reconstructed,
        };
        let planner = PlannerConfig::new(perception);
        let opts = harness::episode_options(&base_opts, &planner, ep);
        let result = harness::run_spec(&spec, &planner, &opts)
            .with_context(|| format!("episode {ep} on {} difficulty {}", spec.kind, fmt_f64(spec.difficulty)))?;
        let reward = 10.0 * result.traversing_rate + result.reward_sum;
        rows.push(scheduler.record(reward, result.traversing_rate, source));
    }

    let mut csv = String::from(ScheduleTraceRow::HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.to_csv());
        csv.push('\n');
    }
    write(out, "schedule_trace.csv", csv)?;
    let gt = rows.iter().filter(|r| r.source == HeightmapSource::GroundTruth).count();
    let mut summary = String::new();
    writeln!(summary, "episodes: {}", rows.len()).unwrap();
    writeln!(summary, "ground-truth draws: {gt}").unwrap();
    writeln!(summary, "final stage: {} level {}", scheduler.stage.phase(), scheduler.stage.level).unwrap();
    write(out, "summary.txt", summary)?;
    Ok(())
}

pub fn report(cfg: &KvConfig, out: &Path) -> Result<(), CliError> {
    let input: String = cfg.require("input")?;
    let text = fs::read_to_string(&input).with_context(|| format!("reading {input}"))?;
    let rows = io::aggregate_from_csv(&text).with_context(|| format!("parsing {input}"))?;
    let violations = ordering_violations(&rows);
    write(out, "report.txt", summary_table(&rows, &violations))?;
    gate(cfg, &violations)
}
