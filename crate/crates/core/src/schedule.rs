//! Adaptive ground-truth sampling and the two-phase terrain curriculum.
//!
//! Both are trainer-agnostic: they consume a stream of finished-episode
//! statistics and emit decisions. The sampling probability is
//! `tanh(CV(R))` over a window of recent episode rewards, so noisy returns
//! push the policy input towards ground truth and stable returns towards the
//! reconstruction.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::seed;

pub const DEFAULT_WINDOW: usize = 100;
/// |mean| below this is treated as zero.
pub const MEAN_EPSILON: f64 = 1e-9;
/// CV used when the mean reward is (numerically) zero.
pub const CV_CAP: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("need at least 2 rewards, have {0}")]
    InsufficientData(usize),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
}

/// Ring buffer of the last `capacity` episode rewards.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardWindow {
    capacity: usize,
    rewards: VecDeque<f64>,
}

impl RewardWindow {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            capacity,
            rewards: VecDeque::with_capacity(capacity),
        }
    }

    pub fn from_rewards(capacity: usize, rewards: &[f64]) -> Self {
        let mut w = Self::new(capacity);
        rewards.iter().for_each(|&r| w.push(r));
        w
    }

    pub fn push(&mut self, reward: f64) {
        if self.rewards.len() == self.capacity {
            self.rewards.pop_front();
        }
        self.rewards.push_back(reward);
    }

    pub fn count(&self) -> usize {
        self.rewards.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.rewards.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.rewards.iter().copied()
    }

    pub fn mean(&self) -> Option<f64> {
        if self.rewards.is_empty() {
            return None;
        }
        Some(self.rewards.iter().sum::<f64>() / self.rewards.len() as f64)
    }

    /// Sample (n - 1) standard deviation.
    pub fn std(&self) -> Option<f64> {
        let n = self.rewards.len();
        if n < 2 {
            return None;
        }
        let first = self.rewards[0];
        if self.rewards.iter().all(|&r| r == first) {
            return Some(0.0);
        }
        let mean = self.mean()?;
        let ss: f64 = self.rewards.iter().map(|r| (r - mean) * (r - mean)).sum();
        Some((ss / (n - 1) as f64).sqrt())
    }

    /// Coefficient of variation `std / |mean|`, capped at [`CV_CAP`] when the
    /// mean is numerically zero.
    pub fn cv(&self) -> Result<f64, ScheduleError> {
        let (Some(mean), Some(std)) = (self.mean(), self.std()) else {
            return Err(ScheduleError::InsufficientData(self.count()));
        };
        if mean.abs() < MEAN_EPSILON {
            return Ok(CV_CAP);
        }
        Ok((std / mean.abs()).min(CV_CAP))
    }
}

impl Default for RewardWindow {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW)
    }
}

/// Probability of feeding ground truth instead of the reconstruction.
pub fn adasmpl_prob(window: &RewardWindow) -> Result<f64, ScheduleError> {
    Ok(window.cv()?.tanh())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeightmapSource {
    GroundTruth,
    Reconstructed,
}

impl HeightmapSource {
    pub fn name(self) -> &'static str {
        match self {
            HeightmapSource::GroundTruth => "ground_truth",
            HeightmapSource::Reconstructed => "reconstructed",
        }
    }
}

impl fmt::Display for HeightmapSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Draws ground truth with probability `p`.
pub fn sample_source<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<HeightmapSource, ScheduleError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ScheduleError::BadProbability(p));
    }
    // random() is in [0, 1): p = 0 never, p = 1 always.
    Ok(if rng.random::<f64>() < p {
        HeightmapSource::GroundTruth
    } else {
        HeightmapSource::Reconstructed
    })
}

/// Seeded source sampler with a hard deployment switch.
#[derive(Clone, Debug)]
pub struct SourceSampler {
    rng: ChaCha8Rng,
    pub deployment: bool,
}

impl SourceSampler {
    pub fn new(seed_value: u64) -> Self {
        Self {
            rng: seed::rng(seed_value),
            deployment: false,
        }
    }

    pub fn deployed(seed_value: u64) -> Self {
        Self {
            deployment: true,
            ..Self::new(seed_value)
        }
    }

    pub fn draw(&mut self, p: f64) -> Result<HeightmapSource, ScheduleError> {
        // Draw even in deployment so both modes consume the stream identically.
        let s = sample_source(p, &mut self.rng)?;
        Ok(if self.deployment {
            HeightmapSource::Reconstructed
        } else {
            s
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Base,
    Advanced,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Base => "base",
            Phase::Advanced => "advanced",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Curriculum position. Levels `0..base_levels` are the pretraining phase,
/// `base_levels..total_levels` the finetuning phase.
#[derive(Clone, Debug, PartialEq)]
pub struct CurriculumStage {
    pub phase: Phase,
    pub level: u32,
    pub promote_threshold: f64,
    pub base_levels: u32,
    pub total_levels: u32,
    pub window: RewardWindow,
}

impl CurriculumStage {
    pub fn new(base_levels: u32, total_levels: u32, promote_threshold: f64, window: usize) -> Self {
        let base_levels = base_levels.max(1);
        let total_levels = total_levels.max(base_levels + 1);
        Self {
            phase: Phase::Base,
            level: 0,
            promote_threshold,
            base_levels,
            total_levels,
            window: RewardWindow::new(window),
        }
    }

    pub fn phase(&self) -> Phase {
        if self.level < self.base_levels {
            Phase::Base
        } else {
            Phase::Advanced
        }
    }

    pub fn terminal_level(&self) -> u32 {
        self.total_levels - 1
    }

    pub fn is_terminal(&self) -> bool {
        self.level >= self.terminal_level()
    }
}

/// Promotes one level when `mean_traversing_rate` reaches the threshold.
/// Never demotes; the reward window restarts on promotion.
pub fn curriculum_step(stage: &CurriculumStage, mean_traversing_rate: f64) -> CurriculumStage {
    let mut next = stage.clone();
    if mean_traversing_rate >= stage.promote_threshold && !stage.is_terminal() {
        next.level += 1;
        next.window.clear();
    }
    next.phase = next.phase();
    next
}

/// One row of the schedule trace CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleTraceRow {
    pub episode: u64,
    pub mean: f64,
    pub std: f64,
    pub cv: f64,
    pub p_smpl: f64,
    pub source: HeightmapSource,
    pub phase: Phase,
    pub level: u32,
}

impl ScheduleTraceRow {
    pub const HEADER: &'static str = "episode,mean,std,cv,p_smpl,source_drawn,stage_phase,stage_level";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6},{},{},{}",
            self.episode, self.mean, self.std, self.cv, self.p_smpl, self.source, self.phase, self.level
        )
    }
}

/// AdaSmpl + curriculum driven by a stream of episode outcomes.
#[derive(Clone, Debug)]
pub struct Scheduler {
    pub stage: CurriculumStage,
    sampler: SourceSampler,
    episode: u64,
    /// Traversing rates since the last promotion check.
    recent_traversal: Vec<f64>,
    /// Episodes per promotion decision.
    pub promote_every: usize,
}

impl Scheduler {
    pub fn new(stage: CurriculumStage, seed_value: u64, promote_every: usize) -> Self {
        Self {
            stage,
            sampler: SourceSampler::new(seed::derive(seed_value, seed::STREAM_SCHEDULER)),
            episode: 0,
            recent_traversal: Vec::new(),
            promote_every: promote_every.max(1),
        }
    }

    /// Current ground-truth probability. With fewer than two rewards the
    /// policy has no track record, so ground truth is always used.
    pub fn p_smpl(&self) -> f64 {
        adasmpl_prob(&self.stage.window).unwrap_or(1.0)
    }

    pub fn next_source(&mut self) -> HeightmapSource {
        let p = self.p_smpl();
        self.sampler.draw(p).expect("p_smpl lies in [0, 1]")
    }

    /// Records a finished episode and returns its trace row.
    pub fn record(&mut self, reward: f64, traversing_rate: f64, source: HeightmapSource) -> ScheduleTraceRow {
        self.stage.window.push(reward);
        let w = &self.stage.window;
        let row = ScheduleTraceRow {
            episode: self.episode,
            mean: w.mean().unwrap_or(0.0),
            std: w.std().unwrap_or(0.0),
            cv: w.cv().unwrap_or(0.0),
            p_smpl: self.p_smpl(),
            source,
            phase: self.stage.phase(),
            level: self.stage.level,
        };
        self.episode += 1;
        self.recent_traversal.push(traversing_rate);
        if self.recent_traversal.len() >= self.promote_every {
            let mean = self.recent_traversal.iter().sum::<f64>() / self.recent_traversal.len() as f64;
            self.stage = curriculum_step(&self.stage, mean);
            self.recent_traversal.clear();
        }
        row
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rewards_give_zero() {
        let w = RewardWindow::from_rewards(100, &[5.0, 5.0, 5.0, 5.0]);
        assert_eq!(adasmpl_prob(&w).unwrap(), 0.0);
    }

    #[test]
    fn cv_of_one() {
        // mean 1, sample std 1
        let w = RewardWindow::from_rewards(100, &[0.0, 1.0, 2.0]);
        assert!((w.cv().unwrap() - 1.0).abs() < 1e-15);
        assert!((adasmpl_prob(&w).unwrap() - 0.761_594_155_955_764_9).abs() < 1e-12);
    }

    #[test]
    fn zero_mean_is_capped() {
        let w = RewardWindow::from_rewards(100, &[1.0, -1.0, 1.0, -1.0]);
        let p = adasmpl_prob(&w).unwrap();
        assert_eq!(p, 10f64.tanh());
        assert!((1.0 - p - 4.122e-9).abs() < 1e-11);
    }

    #[test]
    fn insufficient_data() {
        let w = RewardWindow::from_rewards(10, &[3.0]);
        assert_eq!(adasmpl_prob(&w), Err(ScheduleError::InsufficientData(1)));
    }

    #[test]
    fn window_evicts_oldest() {
        let w = RewardWindow::from_rewards(3, &[100.0, 1.0, 1.0, 1.0]);
        assert_eq!(w.count(), 3);
        assert_eq!(adasmpl_prob(&w).unwrap(), 0.0);
    }

    #[test]
    fn extreme_probabilities() {
        let mut rng = seed::rng(1);
        for _ in 0..1000 {
            assert_eq!(sample_source(0.0, &mut rng).unwrap(), HeightmapSource::Reconstructed);
            assert_eq!(sample_source(1.0, &mut rng).unwrap(), HeightmapSource::GroundTruth);
        }
        assert!(sample_source(1.5, &mut rng).is_err());
    }

    #[test]
    fn deployment_is_always_reconstructed() {
        let mut s = SourceSampler::deployed(3);
        for _ in 0..100 {
            assert_eq!(s.draw(1.0).unwrap(), HeightmapSource::Reconstructed);
        }
    }

    #[test]
    fn curriculum_promotion() {
        let stage = CurriculumStage::new(2, 5, 0.7, 10);
        assert_eq!(curriculum_step(&stage, 0.5), stage);
        let mut s = stage.clone();
        let mut steps = 0;
        while !s.is_terminal() {
            s = curriculum_step(&s, 1.0);
            steps += 1;
        }
        assert_eq!(steps, 4);
        assert_eq!(s.phase, Phase::Advanced);
        assert_eq!(curriculum_step(&s, 1.0).level, 4);
    }

    #[test]
    fn zero_threshold_promotes_every_call() {
        let mut s = CurriculumStage::new(1, 4, 0.0, 10);
        for expected in 1..=3 {
            s = curriculum_step(&s, 0.0);
            assert_eq!(s.level, expected);
        }
        assert_eq!(curriculum_step(&s, 0.0).level, 3);
    }
}
