use std::collections::HashMap;

use foothold_core::harness::{walk_straight, StraightWalk};
use foothold_core::localmap::LocalHeightmap;
use foothold_core::reconstructor::{
    refine, update, OdometryDelta, ReconError, ReconstructorState, MEM_COLS, MEM_ROWS,
};
use foothold_core::sensor::{render_depth, CameraModel, NoiseModel, RobotPose};
use foothold_core::terrain::{generate, HeightField, TerrainKind, TerrainSpec};

fn key(w: [f64; 2]) -> (i64, i64) {
    ((w[0] / 0.05).floor() as i64, (w[1] / 0.05).floor() as i64)
}

fn memory_by_world(state: &ReconstructorState) -> HashMap<(i64, i64), f64> {
    let mut m = HashMap::new();
    for i in 0..MEM_ROWS {
        for j in 0..MEM_COLS {
            if state.valid[(i, j)] {
                m.insert(key(state.cell_world(i, j)), state.memory[(i, j)]);
            }
        }
    }
    m
}

#[test]
fn translation_without_frames_conserves_memory() {
    let hf = generate(&TerrainSpec::new(TerrainKind::SteppingStones, 1.0, 4)).unwrap();
    let cam = CameraModel::default();
    let mut pose = RobotPose::new(1.0, 0.0, 0.3, 0.0);
    let mut state = ReconstructorState::new(pose, cam.clone());
    let frame = render_depth(&hf, &pose, &cam).unwrap();
    update(&mut state, std::slice::from_ref(&frame), &OdometryDelta::zero(), &pose).unwrap();
    let before = memory_by_world(&state);
    assert!(before.len() > 100);

    for _ in 0..60 {
        let next = RobotPose::new(pose.position.x + 0.01, pose.position.y, 0.3, 0.0);
        // The stale frame is offered again and must be ignored.
        update(&mut state, std::slice::from_ref(&frame), &OdometryDelta::between(&pose, &next), &next).unwrap();
        pose = next;
    }
    let mut kept = 0;
    for i in 0..MEM_ROWS {
        for j in 0..MEM_COLS {
            if let Some(&h) = before.get(&key(state.cell_world(i, j))) {
                assert!(state.valid[(i, j)], "cell ({i},{j}) lost");
                assert_eq!(state.memory[(i, j)], h);
                kept += 1;
            } else {
                assert!(!state.valid[(i, j)], "cell ({i},{j}) appeared without a frame");
            }
        }
    }
    assert!(kept > 100, "only {kept} cells survived the shift");
}

#[test]
fn noise_does_not_improve_reconstruction() {
    for kind in [TerrainKind::SteppingStones, TerrainKind::Gaps] {
        let hf = generate(&TerrainSpec::new(kind, 1.0, 8)).unwrap();
        let clean = walk_straight(&hf, &StraightWalk::default()).unwrap();
        let noisy = walk_straight(
            &hf,
            &StraightWalk {
                noise: NoiseModel::gaussian(0.02, 8),
                ..StraightWalk::default()
            },
        )
        .unwrap();
        let (c, n) = (clean.mean_mae_cm().unwrap(), noisy.mean_mae_cm().unwrap());
        assert!(n >= c, "{kind}: noisy {n} < clean {c}");
    }
}

#[test]
fn flat_walk_is_exact() {
    let hf = HeightField::flat(200, 160, 0.05, [-3.0, -4.0], 0.0);
    let r = walk_straight(
        &hf,
        &StraightWalk {
            distance_m: 3.0,
            ..StraightWalk::default()
        },
    )
    .unwrap();
    assert!(r.final_mae_cm().unwrap() < 0.01);
    assert_eq!(r.refined.valid_fraction(), 1.0);
}

#[test]
fn refine_keeps_a_complete_flat_map() {
    let mut map = LocalHeightmap::invalid(RobotPose::new(0.0, 0.0, 0.3, 0.0));
    map.grid.fill(-0.3);
    map.valid.fill(true);
    assert_eq!(refine(&map), map);
}

#[test]
fn refine_fills_only_short_closed_gaps() {
    let mut map = LocalHeightmap::invalid(RobotPose::new(0.0, 0.0, 0.3, 0.0));
    for &(i, j) in &[(10, 2), (10, 5), (20, 2), (20, 6)] {
        map.grid[(i, j)] = -0.3;
        map.valid[(i, j)] = true;
    }
    let out = refine(&map);
    for (i, j, &v) in out.valid.indexed() {
        let expect = map.valid[(i, j)] || (i == 10 && (3..5).contains(&j));
        assert_eq!(v, expect, "cell ({i},{j})");
    }
}

#[test]
fn old_cells_expire() {
    let hf = generate(&TerrainSpec::new(TerrainKind::Flat, 0.0, 0)).unwrap();
    let cam = CameraModel::default();
    let pose = RobotPose::new(0.0, 0.0, 0.3, 0.0);
    let mut state = ReconstructorState::new(pose, cam.clone()).with_max_age(Some(5));
    let frame = render_depth(&hf, &pose, &cam).unwrap();
    update(&mut state, &[frame], &OdometryDelta::zero(), &pose).unwrap();
    assert!(state.valid_fraction() > 0.0);
    for _ in 0..6 {
        update(&mut state, &[], &OdometryDelta::zero(), &pose).unwrap();
    }
    assert_eq!(state.valid_fraction(), 0.0);
}

#[test]
fn foreign_camera_is_rejected() {
    let hf = generate(&TerrainSpec::new(TerrainKind::Flat, 0.0, 0)).unwrap();
    let pose = RobotPose::new(0.0, 0.0, 0.3, 0.0);
    let other = CameraModel {
        width_px: 32,
        ..CameraModel::default()
    };
    let frame = render_depth(&hf, &pose, &other).unwrap();
    let mut state = ReconstructorState::new(pose, CameraModel::default());
    assert_eq!(
        update(&mut state, &[frame], &OdometryDelta::zero(), &pose).unwrap_err(),
        ReconError::CameraMismatch
    );
}
