//! Multi-timescale Gaussian-copula generation of long representative
//! renewable/load scenarios.
//!
//! The pipeline aggregates the historical records into coarse blocks, fits
//! per-(series, block) empirical marginals and one high-dimensional Gaussian
//! copula over the aggregates, samples new aggregate trajectories, restores
//! fine-grained periods inside each block with sequential 2-D copula draws,
//! and finally rescales every block so its sum hits the sampled aggregate.

mod copula;
mod marginal;

pub use copula::{
    cholesky, correlate, fit_copula, kendall_tau_b, std_normal_cdf, std_normal_inv_cdf,
    Correlation, CorrelationFit,
};
pub use marginal::EmpiricalMarginal;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample contains a non-finite value")]
    NonFiniteSample,
    #[error("uniform matrix rows have inconsistent dimensions")]
    RaggedMatrix,
    #[error("horizon {horizon} is not divisible by block length {block_len}")]
    HorizonNotDivisible { horizon: usize, block_len: usize },
    #[error("scenario set is empty")]
    EmptyScenarioSet,
    #[error("scenario {scenario}: series count {got} differs from sources {expected}")]
    SeriesCountMismatch {
        scenario: usize,
        got: usize,
        expected: usize,
    },
    #[error("scenario {scenario}, series {series}: horizon {got} differs from {expected}")]
    HorizonMismatch {
        scenario: usize,
        series: usize,
        got: usize,
        expected: usize,
    },
    #[error("series '{series}': negative value {value} at scenario {scenario}, period {period}")]
    NegativeValue {
        series: String,
        scenario: usize,
        period: usize,
        value: f64,
    },
    #[error("series '{series}': value {value} exceeds capacity {capacity} at scenario {scenario}, period {period}")]
    CapacityExceeded {
        series: String,
        scenario: usize,
        period: usize,
        value: f64,
        capacity: f64,
    },
    #[error("aggregate blocks ({blocks} x {block_len}) inconsistent with horizon {horizon}")]
    BlockStructureMismatch {
        blocks: usize,
        block_len: usize,
        horizon: usize,
    },
    #[error("correlation matrix is not positive definite even after repair")]
    CholeskyFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Re,
    Ld,
}

/// Identity, kind and (for renewables) capacity of one series.
#[derive(Debug, Clone)]
pub struct SourceInfo {
    pub id: String,
    pub kind: SeriesKind,
    /// Physical cap used to clip generated renewable values; `None` for
    /// loads or when no system is attached.
    pub capacity: Option<f64>,
}

/// Per-scenario, per-period renewable availability and load demand in MW.
#[derive(Debug, Clone)]
pub struct ScenarioSet {
    pub sources: Vec<SourceInfo>,
    /// `data[scenario][series][period]`.
    pub data: Vec<Vec<Vec<f64>>>,
    horizon: usize,
}

impl ScenarioSet {
    pub fn new(sources: Vec<SourceInfo>, data: Vec<Vec<Vec<f64>>>) -> Result<Self, ScenarioError> {
        if data.is_empty() {
            return Err(ScenarioError::EmptyScenarioSet);
        }
        let horizon = data[0].first().map(|s| s.len()).unwrap_or(0);
        for (si, scen) in data.iter().enumerate() {
            if scen.len() != sources.len() {
                return Err(ScenarioError::SeriesCountMismatch {
                    scenario: si,
                    got: scen.len(),
                    expected: sources.len(),
                });
            }
            for (ri, series) in scen.iter().enumerate() {
                if series.len() != horizon {
                    return Err(ScenarioError::HorizonMismatch {
                        scenario: si,
                        series: ri,
                        got: series.len(),
                        expected: horizon,
                    });
                }
                for (t, &v) in series.iter().enumerate() {
                    let nonnegative = v >= 0.0; // false for NaN as well
                    if !nonnegative {
                        return Err(ScenarioError::NegativeValue {
                            series: sources[ri].id.clone(),
                            scenario: si,
                            period: t,
                            value: v,
                        });
                    }
                    if let Some(cap) = sources[ri].capacity {
                        if v > cap * (1.0 + 1e-9) {
                            return Err(ScenarioError::CapacityExceeded {
                                series: sources[ri].id.clone(),
                                scenario: si,
                                period: t,
                                value: v,
                                capacity: cap,
                            });
                        }
                    }
                }
            }
        }
        Ok(ScenarioSet {
            sources,
            data,
            horizon,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_scenarios(&self) -> usize {
        self.data.len()
    }

    pub fn n_series(&self) -> usize {
        self.sources.len()
    }

    pub fn series_index(&self, id: &str) -> Option<usize> {
        self.sources.iter().position(|s| s.id == id)
    }

    /// Per-period mean across scenarios, `[series][period]`.
    pub fn mean_scenario(&self) -> Vec<Vec<f64>> {
        let n = self.n_scenarios() as f64;
        let mut mean = vec![vec![0.0; self.horizon]; self.n_series()];
        for scen in &self.data {
            for (ri, series) in scen.iter().enumerate() {
                for (t, &v) in series.iter().enumerate() {
                    mean[ri][t] += v / n;
                }
            }
        }
        mean
    }
}

/// Block-aggregated energy per scenario (MWh-equivalent sums).
#[derive(Debug, Clone)]
pub struct AggregatedScenarioSet {
    pub sources: Vec<SourceInfo>,
    pub blocks: usize,
    pub block_len: usize,
    /// `data[scenario][series][block]`.
    pub data: Vec<Vec<Vec<f64>>>,
}

/// Sums each series over consecutive blocks of `block_len` periods.
pub fn aggregate_blocks(
    hist: &ScenarioSet,
    block_len: usize,
) -> Result<AggregatedScenarioSet, ScenarioError> {
    let horizon = hist.horizon();
    if block_len == 0 || !horizon.is_multiple_of(block_len) {
        return Err(ScenarioError::HorizonNotDivisible { horizon, block_len });
    }
    let blocks = horizon / block_len;
    let data = hist
        .data
        .iter()
        .map(|scen| {
            scen.iter()
                .map(|series| {
                    (0..blocks)
                        .map(|k| series[k * block_len..(k + 1) * block_len].iter().sum())
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(AggregatedScenarioSet {
        sources: hist.sources.clone(),
        blocks,
        block_len,
        data,
    })
}

/// The fitted long-term model: one empirical marginal per (series, block)
/// plus the Gaussian copula correlation over all aggregated variables.
#[derive(Debug, Clone)]
pub struct CopulaModel {
    pub sources: Vec<SourceInfo>,
    pub blocks: usize,
    pub block_len: usize,
    /// Flattened `[series * blocks + block]`.
    pub marginals: Vec<EmpiricalMarginal>,
    pub correlation: Correlation,
    /// Dimension pairs with undefined tau (constant aggregates).
    pub warnings: Vec<(usize, usize)>,
}

impl CopulaModel {
    pub fn dimension(&self) -> usize {
        self.sources.len() * self.blocks
    }

    /// Fits marginals and copula from historical aggregates.
    pub fn fit(agg: &AggregatedScenarioSet) -> Result<Self, ScenarioError> {
        let n_series = agg.sources.len();
        let dim = n_series * agg.blocks;
        let n_hist = agg.data.len();
        let mut marginals = Vec::with_capacity(dim);
        for r in 0..n_series {
            for k in 0..agg.blocks {
                let samples: Vec<f64> = agg.data.iter().map(|s| s[r][k]).collect();
                marginals.push(EmpiricalMarginal::fit(&samples)?);
            }
        }
        let uniforms: Vec<Vec<f64>> = (0..n_hist)
            .map(|h| {
                (0..dim)
                    .map(|d| {
                        let (r, k) = (d / agg.blocks, d % agg.blocks);
                        marginals[d].cdf(agg.data[h][r][k])
                    })
                    .collect()
            })
            .collect();
        let fit = fit_copula(&uniforms)?;
        Ok(CopulaModel {
            sources: agg.sources.clone(),
            blocks: agg.blocks,
            block_len: agg.block_len,
            marginals,
            correlation: fit.correlation,
            warnings: fit.warnings,
        })
    }
}

/// Deterministic per-scenario RNG stream. Aggregate sampling uses even
/// streams, intra-block restoration odd ones, so the two stages never share
/// draws and scenarios can be generated in parallel in any order.
fn scenario_rng(seed: u64, scenario: usize, intra: bool) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * scenario as u64 + intra as u64);
    rng
}

/// Draws `n` aggregated scenarios from the fitted copula.
pub fn sample_aggregate(
    model: &CopulaModel,
    n: usize,
    seed: u64,
) -> Result<AggregatedScenarioSet, ScenarioError> {
    let dim = model.dimension();
    let l = cholesky(&model.correlation)?;
    let n_series = model.sources.len();
    let data: Vec<Vec<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let mut rng = scenario_rng(seed, s, false);
            let mut z: Vec<f64> = (0..dim)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            correlate(&l, &mut z, dim);
            let mut scen = vec![vec![0.0; model.blocks]; n_series];
            for d in 0..dim {
                let (r, k) = (d / model.blocks, d % model.blocks);
                let u = std_normal_cdf(z[d]);
                scen[r][k] = model.marginals[d].inverse_cdf(u);
            }
            scen
        })
        .collect();
    Ok(AggregatedScenarioSet {
        sources: model.sources.clone(),
        blocks: model.blocks,
        block_len: model.block_len,
        data,
    })
}

/// Intra-block statistics pooled across historical scenarios for one
/// (series, block position).
struct BlockLaw {
    first: EmpiricalMarginal,
    pooled: EmpiricalMarginal,
    rho: f64,
}

fn fit_block_laws(
    hist: &ScenarioSet,
    blocks: usize,
    block_len: usize,
) -> Result<Vec<Vec<BlockLaw>>, ScenarioError> {
    let n_series = hist.n_series();
    let mut laws = Vec::with_capacity(n_series);
    for r in 0..n_series {
        let mut per_block = Vec::with_capacity(blocks);
        for k in 0..blocks {
            let start = k * block_len;
            let firsts: Vec<f64> = hist.data.iter().map(|s| s[r][start]).collect();
            let pooled: Vec<f64> = hist
                .data
                .iter()
                .flat_map(|s| s[r][start..start + block_len].iter().copied())
                .collect();
            let mut pairs_x = Vec::new();
            let mut pairs_y = Vec::new();
            for scen in &hist.data {
                for a in 0..block_len.saturating_sub(1) {
                    pairs_x.push(scen[r][start + a]);
                    pairs_y.push(scen[r][start + a + 1]);
                }
            }
            let rho = if pairs_x.len() >= 3 {
                match kendall_tau_b(&pairs_x, &pairs_y) {
                    Some(tau) => (std::f64::consts::PI * tau / 2.0)
                        .sin()
                        .clamp(-0.999, 0.999),
                    None => 0.0,
                }
            } else {
                0.0
            };
            per_block.push(BlockLaw {
                first: EmpiricalMarginal::fit(&firsts)?,
                pooled: EmpiricalMarginal::fit(&pooled)?,
                rho,
            });
        }
        laws.push(per_block);
    }
    Ok(laws)
}

/// Restores fine-grained periods inside every block of every aggregated
/// scenario: the first period is drawn from the historical marginal of that
/// block position, subsequent periods from the sequential 2-D Gaussian
/// copula, and the whole block is rescaled so its sum matches the aggregate
/// target. Renewable values are clipped to capacity with the clipped excess
/// redistributed proportionally inside the block.
pub fn sample_intra_block(
    hist: &ScenarioSet,
    aggregate: &AggregatedScenarioSet,
    seed: u64,
) -> Result<ScenarioSet, ScenarioError> {
    let blocks = aggregate.blocks;
    let block_len = aggregate.block_len;
    if blocks * block_len != hist.horizon() {
        return Err(ScenarioError::BlockStructureMismatch {
            blocks,
            block_len,
            horizon: hist.horizon(),
        });
    }
    let laws = fit_block_laws(hist, blocks, block_len)?;
    let n_series = hist.n_series();

    let data: Vec<Vec<Vec<f64>>> = (0..aggregate.data.len())
        .into_par_iter()
        .map(|s| {
            let mut rng = scenario_rng(seed, s, true);
            let mut scen = vec![vec![0.0; blocks * block_len]; n_series];
            for r in 0..n_series {
                for k in 0..blocks {
                    let law = &laws[r][k];
                    let mut block = vec![0.0; block_len];
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    block[0] = law.first.inverse_cdf(std_normal_cdf(z));
                    for a in 1..block_len {
                        let u_prev = law.pooled.cdf(block[a - 1]);
                        let z_prev = std_normal_inv_cdf(u_prev);
                        let noise: f64 = rng.sample(rand_distr::StandardNormal);
                        let z_next = law.rho * z_prev + (1.0 - law.rho * law.rho).sqrt() * noise;
                        block[a] = law.pooled.inverse_cdf(std_normal_cdf(z_next));
                    }
                    scale_block(&mut block, aggregate.data[s][r][k]);
                    if let Some(cap) = hist.sources[r].capacity {
                        clip_redistribute(&mut block, cap);
                    }
                    scen[r][k * block_len..(k + 1) * block_len].copy_from_slice(&block);
                }
            }
            scen
        })
        .collect();

    ScenarioSet::new(hist.sources.clone(), data)
}

/// Multiplicative rescale of a block to the aggregate target; falls back to
/// a uniform spread when the raw draw sums to zero.
fn scale_block(block: &mut [f64], target: f64) {
    let sum: f64 = block.iter().sum();
    if sum > 1e-12 {
        let factor = target / sum;
        for v in block.iter_mut() {
            *v *= factor;
        }
    } else if target.abs() <= 1e-12 {
        for v in block.iter_mut() {
            *v = 0.0;
        }
    } else {
        let each = target / block.len() as f64;
        for v in block.iter_mut() {
            *v = each;
        }
    }
}

/// Clips values to `cap` and redistributes the excess proportionally over
/// the unsaturated periods; preserves the block sum whenever the target is
/// feasible (`target <= cap * len`).
fn clip_redistribute(block: &mut [f64], cap: f64) {
    for _ in 0..200 {
        let mut excess = 0.0;
        for v in block.iter_mut() {
            if *v > cap {
                excess += *v - cap;
                *v = cap;
            }
        }
        if excess <= 1e-12 {
            return;
        }
        let unsat: Vec<usize> = (0..block.len())
            .filter(|&i| block[i] < cap - 1e-12)
            .collect();
        if unsat.is_empty() {
            return; // fully saturated: the target was infeasible
        }
        let base: f64 = unsat.iter().map(|&i| block[i]).sum();
        if base > 1e-12 {
            for &i in &unsat {
                block[i] += excess * block[i] / base;
            }
        } else {
            let each = excess / unsat.len() as f64;
            for &i in &unsat {
                block[i] += each;
            }
        }
    }
}

/// Runs the whole multi-timescale pipeline: aggregate, fit, sample, restore,
/// concatenate. Reproducible from `seed`.
pub fn generate_representative(
    hist: &ScenarioSet,
    n_rep: usize,
    block_len: usize,
    seed: u64,
) -> Result<ScenarioSet, ScenarioError> {
    if hist.n_scenarios() == 0 {
        return Err(ScenarioError::EmptyScenarioSet);
    }
    let agg = aggregate_blocks(hist, block_len)?;
    let model = CopulaModel::fit(&agg)?;
    let agg_samples = sample_aggregate(&model, n_rep, seed)?;
    sample_intra_block(hist, &agg_samples, seed)
}
