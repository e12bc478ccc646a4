//! Seeded Monte Carlo propagation of parameter uncertainty to NPV and BCR.
//!
//! Trial `n` draws from a ChaCha8 generator seeded with `master_seed` and
//! positioned on stream `n`, so results do not depend on how trials are
//! scheduled across threads.

use std::f64::consts::PI;

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appraisal::{multipliers_from_f64, Appraiser};
use crate::model::{MoneyM, MONEY_DP};
use crate::scenario::{ImpactMatrix, ScenarioError, UncertainParam};

pub const DEFAULT_TRUNCATION_SD: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("no trials to summarize")]
    EmptyTrialSet,
    #[error("n_trials must be at least 1")]
    ZeroTrials,
    #[error("invalid distribution for {param}: {reason}")]
    InvalidDistribution { param: UncertainParam, reason: String },
    #[error("{0} is bound but has no impact-matrix row")]
    UnboundParam(UncertainParam),
    #[error("{0} is bound more than once")]
    DuplicateBinding(UncertainParam),
    #[error("histogram needs at least one bin")]
    NoBins,
    #[error("trial {index}: {source}")]
    Trial { index: u64, source: ScenarioError },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    Triangular { min: f64, mode: f64, max: f64 },
    Uniform { lo: f64, hi: f64 },
    Degenerate { value: f64 },
}

/// Uniform draw on [0, 1) with 53 bits of precision.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl Distribution {
    pub fn validate(&self) -> Result<(), String> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match *self {
            Distribution::Normal { mean, sd } => {
                if !finite(&[mean, sd]) {
                    return Err("non-finite parameter".into());
                }
                if sd < 0.0 {
                    return Err(format!("sd {sd} < 0"));
                }
            }
            Distribution::Triangular { min, mode, max } => {
                if !finite(&[min, mode, max]) {
                    return Err("non-finite parameter".into());
                }
                if !(min <= mode && mode <= max) {
                    return Err(format!("need min <= mode <= max, got {min}, {mode}, {max}"));
                }
            }
            Distribution::Uniform { lo, hi } => {
                if !finite(&[lo, hi]) {
                    return Err("non-finite parameter".into());
                }
                if lo > hi {
                    return Err(format!("lo {lo} > hi {hi}"));
                }
            }
            Distribution::Degenerate { value } => {
                if !value.is_finite() {
                    return Err("non-finite parameter".into());
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Normal { mean, .. } => mean,
            Distribution::Triangular { min, mode, max } => (min + mode + max) / 3.0,
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            Distribution::Degenerate { value } => value,
        }
    }

    /// Draws one value. Normals are truncated at `truncation_sd` standard
    /// deviations by rejection; `Degenerate` leaves the generator untouched.
    pub fn sample(&self, rng: &mut ChaCha8Rng, truncation_sd: f64) -> f64 {
        match *self {
            Distribution::Degenerate { value } => value,
            Distribution::Uniform { lo, hi } => lo + (hi - lo) * unit(rng),
            Distribution::Triangular { min, mode, max } => {
                let u = unit(rng);
                let w = max - min;
                if w == 0.0 {
                    return min;
                }
                let fc = (mode - min) / w;
                if u < fc {
                    min + (u * w * (mode - min)).sqrt()
                } else {
                    max - ((1.0 - u) * w * (max - mode)).sqrt()
                }
            }
            Distribution::Normal { mean, sd } => loop {
                let u1 = 1.0 - unit(rng);
                let u2 = unit(rng);
                let z = (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos();
                if z.abs() <= truncation_sd {
                    return mean + sd * z;
                }
            },
        }
    }
}

fn default_truncation() -> f64 {
    DEFAULT_TRUNCATION_SD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Binding {
    pub param: UncertainParam,
    pub dist: Distribution,
    /// Truncation of normal draws in standard deviations.
    #[serde(default = "default_truncation")]
    pub truncation_sd: f64,
}

impl Binding {
    pub fn new(param: UncertainParam, dist: Distribution) -> Self {
        Binding {
            param,
            dist,
            truncation_sd: DEFAULT_TRUNCATION_SD,
        }
    }
}

fn default_trials() -> u64 {
    50_000
}

fn default_bins() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_trials")]
    pub n_trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub bindings: Vec<Binding>,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default)]
    pub dump_trials: bool,
}

impl McConfig {
    pub fn validate(&self, matrix: &ImpactMatrix) -> Result<(), McError> {
        if self.n_trials == 0 {
            return Err(McError::ZeroTrials);
        }
        if self.histogram_bins == 0 {
            return Err(McError::NoBins);
        }
        let mut seen = Vec::new();
        for b in &self.bindings {
            if seen.contains(&b.param) {
                return Err(McError::DuplicateBinding(b.param));
            }
            seen.push(b.param);
            if !matrix.contains(b.param) {
                return Err(McError::UnboundParam(b.param));
            }
            b.dist
                .validate()
                .map_err(|reason| McError::InvalidDistribution { param: b.param, reason })?;
            if !(b.truncation_sd > 0.0) {
                return Err(McError::InvalidDistribution {
                    param: b.param,
                    reason: format!("truncation {} must be positive", b.truncation_sd),
                });
            }
        }
        Ok(())
    }
}

/// Generator for trial `n`.
pub fn trial_rng(master_seed: u64, n: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(n);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    /// Sampled values in binding order.
    pub params: Vec<f64>,
    pub npv: MoneyM,
    pub bcr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoneyStats {
    pub mean: MoneyM,
    pub sd: f64,
    pub p5: MoneyM,
    pub p50: MoneyM,
    pub p95: MoneyM,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioStats {
    pub mean: f64,
    pub sd: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub n_trials: u64,
    pub npv: MoneyStats,
    /// `None` when no trial had positive costs.
    pub bcr: Option<RatioStats>,
    pub prob_npv_pos: f64,
    pub prob_bcr_gt1: f64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McOutput {
    pub summary: McSummary,
    /// Bound parameters, in the order of [`TrialRecord::params`].
    pub params: Vec<UncertainParam>,
    pub trials: Option<Vec<TrialRecord>>,
}

fn run_one(base: &Appraiser, matrix: &ImpactMatrix, cfg: &McConfig, n: u64) -> Result<TrialRecord, ScenarioError> {
    let d = *base.discount();
    let mut rng = trial_rng(cfg.master_seed, n);
    let mut params = Vec::with_capacity(cfg.bindings.len());
    let mut dev = Vec::with_capacity(cfg.bindings.len());
    for b in &cfg.bindings {
        let v = b.dist.sample(&mut rng, b.truncation_sd);
        params.push(v);
        dev.push((b.param, v - b.param.base_value(&d)));
    }
    let eff = matrix.effect(&dev, &d)?;
    let val = base.evaluate(&multipliers_from_f64(&eff.multipliers), eff.rate)?;
    Ok(TrialRecord {
        trial: n,
        params,
        npv: val.npv,
        bcr: val.bcr(),
    })
}

/// Runs all trials (in parallel on the current rayon pool) and summarizes them.
pub fn run_trials(base: &Appraiser, matrix: &ImpactMatrix, cfg: &McConfig) -> Result<McOutput, McError> {
    cfg.validate(matrix)?;
    let results: Vec<Result<TrialRecord, ScenarioError>> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|n| run_one(base, matrix, cfg, n))
        .collect();
    let mut trials = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => trials.push(t),
            Err(source) => {
                return Err(McError::Trial {
                    index: i as u64,
                    source,
                })
            }
        }
    }
    let pairs: Vec<(MoneyM, Option<f64>)> = trials.iter().map(|t| (t.npv, t.bcr)).collect();
    let summary = summarize(&pairs, cfg.histogram_bins)?;
    Ok(McOutput {
        summary,
        params: cfg.bindings.iter().map(|b| b.param).collect(),
        trials: cfg.dump_trials.then_some(trials),
    })
}

/// 1-based nearest rank `ceil(p·N)`, clamped to [1, N].
fn nearest_rank(p: f64, n: usize) -> usize {
    ((p * n as f64).ceil() as usize).clamp(1, n) - 1
}

fn sd_of(values: impl Iterator<Item = f64>, mean: f64, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Summary statistics with nearest-rank percentiles, accumulated in trial order.
pub fn summarize(trials: &[(MoneyM, Option<f64>)], bins: usize) -> Result<McSummary, McError> {
    let n = trials.len();
    if n == 0 {
        return Err(McError::EmptyTrialSet);
    }
    if bins == 0 {
        return Err(McError::NoBins);
    }
    let total: Decimal = trials.iter().map(|t| t.0.value()).sum();
    let mean = MoneyM(
        (total / Decimal::from(n as u64)).round_dp_with_strategy(MONEY_DP, RoundingStrategy::MidpointNearestEven),
    );
    let mean_f = mean.to_f64();
    let npv_f: Vec<f64> = trials
        .iter()
        .map(|t| t.0.value().to_f64().unwrap_or(f64::NAN))
        .collect();
    let mut sorted: Vec<MoneyM> = trials.iter().map(|t| t.0).collect();
    sorted.sort();
    let npv = MoneyStats {
        mean,
        sd: sd_of(npv_f.iter().copied(), mean_f, n),
        p5: sorted[nearest_rank(0.05, n)],
        p50: sorted[nearest_rank(0.50, n)],
        p95: sorted[nearest_rank(0.95, n)],
    };

    let ratios: Vec<f64> = trials.iter().filter_map(|t| t.1).collect();
    let bcr = if ratios.is_empty() {
        None
    } else {
        let m = ratios.len();
        let mean = ratios.iter().sum::<f64>() / m as f64;
        let mut s = ratios.clone();
        s.sort_by(f64::total_cmp);
        Some(RatioStats {
            mean,
            sd: sd_of(ratios.iter().copied(), mean, m),
            p5: s[nearest_rank(0.05, m)],
            p50: s[nearest_rank(0.50, m)],
            p95: s[nearest_rank(0.95, m)],
        })
    };

    let pos = trials.iter().filter(|t| t.0 > MoneyM::ZERO).count();
    let gt1 = ratios.iter().filter(|&&r| r > 1.0).count();

    let lo = sorted[0].to_f64();
    let hi = sorted[n - 1].to_f64();
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0u64; bins];
    for v in &npv_f {
        let k = if hi > lo {
            (((v - lo) / (hi - lo)) * bins as f64).floor() as usize
        } else {
            0
        };
        counts[k.min(bins - 1)] += 1;
    }

    Ok(McSummary {
        n_trials: n as u64,
        npv,
        bcr,
        prob_npv_pos: pos as f64 / n as f64,
        prob_bcr_gt1: gt1 as f64 / n as f64,
        histogram: Histogram { edges, counts },
    })
}

/// Shipped calibration: normals for AI accuracy, adoption and data
/// availability (truncated at ±2 sd), a triangular electricity price and
/// uniform CAPEX/OPEX scalars. The discount rate is not sampled.
pub fn default_bindings() -> Vec<Binding> {
    let normal = |param, sd| Binding {
        param,
        dist: Distribution::Normal { mean: 1.0, sd },
        truncation_sd: 2.0,
    };
    vec![
        normal(UncertainParam::AiAccuracy, 0.095),
        normal(UncertainParam::AdoptionRate, 0.03),
        normal(UncertainParam::DataAvailability, 0.02),
        Binding::new(
            UncertainParam::ElectricityPrice,
            Distribution::Triangular {
                min: 0.95,
                mode: 1.0,
                max: 1.05,
            },
        ),
        Binding::new(UncertainParam::Capex, Distribution::Uniform { lo: 0.97, hi: 1.03 }),
        Binding::new(UncertainParam::Opex, Distribution::Uniform { lo: 0.97, hi: 1.03 }),
    ]
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_trials: default_trials(),
            master_seed: 20_260_101,
            bindings: default_bindings(),
            histogram_bins: default_bins(),
            dump_trials: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rust_decimal_macros::dec;

    #[test]
    fn degenerate_leaves_state() {
        let mut a = trial_rng(7, 0);
        let b = a.clone();
        assert_eq!(Distribution::Degenerate { value: 5.0 }.sample(&mut a, 4.0), 5.0);
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_and_triangular_means() {
        let mut rng = trial_rng(1, 0);
        let n = 100_000;
        let u: f64 = (0..n)
            .map(|_| Distribution::Uniform { lo: 0.0, hi: 1.0 }.sample(&mut rng, 4.0))
            .sum::<f64>()
            / n as f64;
        assert!((u - 0.5).abs() < 0.01);
        let t: f64 = (0..n)
            .map(|_| {
                Distribution::Triangular {
                    min: 0.0,
                    mode: 0.5,
                    max: 1.0,
                }
                .sample(&mut rng, 4.0)
            })
            .sum::<f64>()
            / n as f64;
        assert!((t - 0.5).abs() < 0.01);
    }

    #[test]
    fn single_trial_and_sign_count() {
        let s = summarize(&[(MoneyM(dec!(3)), Some(1.5))], 10).unwrap();
        assert_eq!(s.npv.mean, MoneyM(dec!(3)));
        assert_eq!(s.npv.p5, s.npv.p95);
        assert_eq!(s.npv.p50, MoneyM(dec!(3)));
        let s = summarize(&[(MoneyM(dec!(-1)), Some(0.5)), (MoneyM(dec!(1)), Some(1.5))], 2).unwrap();
        assert_eq!(s.prob_npv_pos, 0.5);
        assert_eq!(s.prob_bcr_gt1, 0.5);
        assert!(matches!(summarize(&[], 5), Err(McError::EmptyTrialSet)));
    }

    #[test]
    fn standard_normal_quantile() {
        let mut rng = trial_rng(42, 0);
        let trials: Vec<(MoneyM, Option<f64>)> = (0..10_000)
            .map(|_| {
                let z = Distribution::Normal { mean: 0.0, sd: 1.0 }.sample(&mut rng, 8.0);
                (MoneyM::from_f64(z).unwrap(), None)
            })
            .collect();
        let s = summarize(&trials, 20).unwrap();
        assert!((s.npv.p5.to_f64() + 1.645).abs() < 0.05, "{}", s.npv.p5);
    }
}
