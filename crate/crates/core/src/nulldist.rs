//! Null distribution of aggregated p*-values.
//!
//! Analytic forms assume independent uniform p-values under the null. The
//! two estimators work from the data: the symmetric upper-tail estimator
//! mirrors the p*-values above 0.5, and the composite estimator mixes in
//! components for null sites whose neighborhood reaches into the signal.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::aggregate::median_in_place;
use crate::error::{Error, Result};
use crate::grid::{Lattice, Mask, NeighborhoodTable};
use crate::rng;

/// CDF of the median of `k` i.i.d. uniforms, i.e. Beta((k+1)/2, (k+1)/2), for odd `k`.
pub fn beta_median_cdf(k: usize, t: f64) -> Result<f64> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::UnsupportedAnalytic(format!(
            "median null law has no closed form for even k = {k}; use a Monte Carlo null"
        )));
    }
    Ok(median_cdf_odd(k, t))
}

// P(at least (k+1)/2 of k uniforms fall below t), summed on the short side.
fn median_cdf_odd(k: usize, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    if t > 0.5 {
        return 1.0 - median_cdf_odd(k, 1.0 - t);
    }
    let m = k.div_ceil(2);
    let mut binom = 1.0f64;
    for i in 0..m {
        binom = binom * (k - i) as f64 / (i + 1) as f64;
    }
    let mut total = 0.0;
    for i in m..=k {
        total += binom * t.powi(i as i32) * (1.0 - t).powi((k - i) as i32);
        binom = binom * (k - i) as f64 / (i + 1) as f64;
    }
    total.min(1.0)
}

pub fn normal_approx_variance(k: usize) -> f64 {
    1.0 / (4.0 * (k as f64 + 2.0))
}

/// Normal approximation to the median null, mean 0.5 and variance `1/(4(k+2))`.
pub fn normal_approx_cdf(k: usize, t: f64) -> Result<f64> {
    if k < 5 {
        return Err(Error::UnsupportedAnalytic(format!(
            "normal approximation needs k >= 5, got {k}"
        )));
    }
    let normal = Normal::new(0.5, normal_approx_variance(k).sqrt())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(normal.cdf(t))
}

fn count_below(sorted: &[f64], t: f64) -> usize {
    sorted.partition_point(|&x| x < t)
}

fn count_at_most(sorted: &[f64], t: f64) -> usize {
    sorted.partition_point(|&x| x <= t)
}

/// Upper-tail symmetric estimator of the null CDF.
///
/// Only p*-values at or above one half enter the estimate, so only those
/// are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricEcdf {
    #[serde(rename = "knots")]
    upper: Vec<f64>,
    denominator: usize,
}

impl SymmetricEcdf {
    pub fn denominator(&self) -> usize {
        self.denominator
    }

    pub fn eval(&self, t: f64) -> f64 {
        let d = self.denominator as f64;
        let n = self.upper.len();
        if t <= 0.5 {
            (n - count_below(&self.upper, 1.0 - t)) as f64 / d
        } else {
            1.0 - (n - count_at_most(&self.upper, t)) as f64 / d
        }
    }

    fn eval_left(&self, t: f64) -> f64 {
        let d = self.denominator as f64;
        let n = self.upper.len();
        if t <= 0.5 {
            (n - count_at_most(&self.upper, 1.0 - t)) as f64 / d
        } else {
            1.0 - (n - count_below(&self.upper, t)) as f64 / d
        }
    }

    fn knots(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.upper.iter().map(|&x| 1.0 - x).collect();
        k.extend(self.upper.iter().copied().filter(|&x| x > 0.5));
        k
    }
}

/// Plain right-continuous empirical CDF of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEcdf {
    #[serde(rename = "knots")]
    sorted: Vec<f64>,
}

impl SampleEcdf {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::InvalidParameter("empirical CDF of an empty sample".into()));
        }
        if sample.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidParameter("NaN in empirical CDF sample".into()));
        }
        sample.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted: sample })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        count_at_most(&self.sorted, t) as f64 / self.sorted.len() as f64
    }

    fn eval_left(&self, t: f64) -> f64 {
        count_below(&self.sorted, t) as f64 / self.sorted.len() as f64
    }
}

/// One mixture component of the composite null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// Number of neighbors inside the estimated signal region.
    pub j: usize,
    pub weight: f64,
    pub cdf: NullCdf,
}

/// Evaluable CDF of a null p*-value on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum NullCdf {
    /// `G(t) = t`; the law of an unaggregated null p-value.
    Uniform,
    BetaAnalytic { k: usize },
    NormalApprox { k: usize },
    Empirical(SymmetricEcdf),
    Sample(SampleEcdf),
    Composite { components: Vec<Component> },
}

impl NullCdf {
    pub fn beta(k: usize) -> Result<Self> {
        beta_median_cdf(k, 0.5)?;
        Ok(NullCdf::BetaAnalytic { k })
    }

    pub fn normal(k: usize) -> Result<Self> {
        normal_approx_cdf(k, 0.5)?;
        Ok(NullCdf::NormalApprox { k })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            NullCdf::Uniform => t.clamp(0.0, 1.0),
            NullCdf::BetaAnalytic { k } => median_cdf_odd(*k, t),
            NullCdf::NormalApprox { k } => {
                if t >= 1.0 {
                    1.0
                } else if t < 0.0 {
                    0.0
                } else {
                    normal_approx_cdf(*k, t).expect("validated at construction")
                }
            }
            NullCdf::Empirical(e) => e.eval(t),
            NullCdf::Sample(s) => s.eval(t),
            NullCdf::Composite { components } => {
                if t >= 1.0 {
                    return 1.0;
                }
                components
                    .iter()
                    .map(|c| c.weight * c.cdf.eval(t))
                    .sum::<f64>()
                    .clamp(0.0, 1.0)
            }
        }
    }

    /// Left limit `G(t-)`.
    pub fn eval_left(&self, t: f64) -> f64 {
        match self {
            NullCdf::Empirical(e) => e.eval_left(t),
            NullCdf::Sample(s) => s.eval_left(t),
            NullCdf::Composite { components } => components
                .iter()
                .map(|c| c.weight * c.cdf.eval_left(t))
                .sum::<f64>()
                .clamp(0.0, 1.0),
            continuous => continuous.eval(t),
        }
    }

    /// Jump locations of the step-function parts, unsorted.
    pub fn knots(&self) -> Vec<f64> {
        match self {
            NullCdf::Empirical(e) => e.knots(),
            NullCdf::Sample(s) => s.sorted.clone(),
            NullCdf::Composite { components } => {
                components.iter().flat_map(|c| c.cdf.knots()).collect()
            }
            _ => Vec::new(),
        }
    }

    fn is_continuous(&self) -> bool {
        match self {
            NullCdf::Uniform | NullCdf::BetaAnalytic { .. } | NullCdf::NormalApprox { .. } => true,
            NullCdf::Composite { components } => components.iter().all(|c| c.cdf.is_continuous()),
            _ => false,
        }
    }
}

/// `sup_t |a(t) - b(t)|` over `[0, 1]`.
///
/// Exact whenever at least one side is a step function and the rest is
/// monotone between knots; two continuous laws are compared on a
/// 10⁴-interval grid.
pub fn sup_distance(a: &NullCdf, b: &NullCdf) -> f64 {
    let mut points: Vec<f64> = a.knots();
    points.extend(b.knots());
    if a.is_continuous() && b.is_continuous() {
        points.extend((0..=10_000).map(|i| i as f64 / 10_000.0));
    }
    points.extend([0.0, 1.0]);
    points.retain(|t| (0.0..=1.0).contains(t));
    points
        .iter()
        .map(|&t| {
            let right = (a.eval(t) - b.eval(t)).abs();
            let left = (a.eval_left(t) - b.eval_left(t)).abs();
            right.max(left)
        })
        .fold(0.0, f64::max)
}

/// Symmetric upper-tail estimate of the null CDF of `pstar`.
pub fn method1_ghat(pstar: &Lattice) -> Result<NullCdf> {
    method1_from_values(pstar.values())
}

fn method1_from_values(values: &[f64]) -> Result<NullCdf> {
    if let Some(site) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::NotAProbability {
            site,
            value: values[site],
        });
    }
    let mut upper: Vec<f64> = values.iter().copied().filter(|&x| x >= 0.5).collect();
    upper.sort_unstable_by(f64::total_cmp);
    let at_half = upper.partition_point(|&x| x == 0.5);
    let denominator = 2 * (upper.len() - at_half) + at_half;
    if denominator == 0 {
        return Err(Error::DegenerateNull(
            "no p*-value reaches 0.5, so the upper tail is empty; the signal saturates \
             the lattice or the neighborhood is too wide"
                .into(),
        ));
    }
    Ok(NullCdf::Empirical(SymmetricEcdf { upper, denominator }))
}

/// Estimated number of true nulls from the p*-values above `lambda`,
/// clamped to `[0, n]`.
pub fn estimate_n0(pstar: &Lattice, lambda: f64, gstar: &NullCdf) -> Result<f64> {
    check_lambda(lambda)?;
    let g = gstar.eval(lambda);
    if g >= 1.0 {
        return Err(Error::DegenerateNull(format!(
            "estimated null CDF equals 1 at lambda = {lambda}"
        )));
    }
    let above = pstar.values().iter().filter(|&&x| x > lambda).count();
    Ok((above as f64 / (1.0 - g)).clamp(0.0, pstar.len() as f64))
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must lie in (0, 1), got {lambda}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Method2Options {
    /// Split point for the null-count estimate.
    pub lambda: f64,
    /// Exclusion/resampling draws per site and per `j`; their CDFs are averaged.
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for Method2Options {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            repetitions: 1,
            seed: 0,
        }
    }
}

/// Composite estimate plus the intermediate quantities behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Method2Fit {
    pub cdf: NullCdf,
    pub n0_hat: f64,
    /// Size of the estimated signal set.
    pub n_signal_hat: usize,
    /// Mixture weights indexed by the number of signal neighbors.
    pub theta: Vec<f64>,
    /// Set when no null site had a signal-free neighborhood and the fit
    /// reverted to the symmetric estimator.
    pub fell_back: bool,
}

pub fn method2_ghat(
    p: &Lattice,
    pstar: &Lattice,
    nbrs: &NeighborhoodTable,
    lambda: f64,
    seed: u64,
) -> Result<Method2Fit> {
    method2_ghat_with(
        p,
        pstar,
        nbrs,
        &Method2Options {
            lambda,
            repetitions: 1,
            seed,
        },
    )
}

/// Composite null estimate.
///
/// 1. estimate `n0` with the symmetric estimator;
/// 2. call the `n - n0` smallest p*-values signal (ties at the cut included);
/// 3. weight each `j` by the share of estimated null sites with `j` signal neighbors;
/// 4. for `j >= 1`, rebuild the p* of every signal-free null site after
///    swapping `j` of its neighbor p-values for p-values drawn from the
///    signal set;
/// 5. mix.
pub fn method2_ghat_with(
    p: &Lattice,
    pstar: &Lattice,
    nbrs: &NeighborhoodTable,
    opts: &Method2Options,
) -> Result<Method2Fit> {
    p.ensure_dims(pstar.dims())?;
    nbrs.ensure_dims(p.dims())?;
    p.ensure_probabilities()?;
    if opts.repetitions == 0 {
        return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
    }
    let n = pstar.len();
    let base = method1_ghat(pstar)?;
    let n0_hat = estimate_n0(pstar, opts.lambda, &base)?;
    let n_signal_target = n - (n0_hat.round() as usize).min(n);

    let values = pstar.values();
    let in_signal: Vec<bool> = if n_signal_target == 0 {
        vec![false; n]
    } else {
        let mut scratch = values.to_vec();
        let (_, cut, _) = scratch.select_nth_unstable_by(n_signal_target - 1, f64::total_cmp);
        let cut = *cut;
        values.iter().map(|&x| x <= cut).collect()
    };
    let signal_sites: Vec<usize> = (0..n).filter(|&v| in_signal[v]).collect();

    let k = nbrs.full_size();
    let mut by_j = vec![0usize; k];
    let mut clean_sites = Vec::new();
    for v in (0..n).filter(|&v| !in_signal[v]) {
        let j = nbrs.neighbors(v).iter().filter(|&&u| in_signal[u]).count();
        by_j[j.min(k - 1)] += 1;
        if j == 0 {
            clean_sites.push(v);
        }
    }
    let null_total: usize = by_j.iter().sum();
    let fallback = |theta: Vec<f64>| Method2Fit {
        cdf: base.clone(),
        n0_hat,
        n_signal_hat: signal_sites.len(),
        theta,
        fell_back: true,
    };
    if null_total == 0 {
        return Ok(fallback(Vec::new()));
    }
    let theta: Vec<f64> = by_j
        .iter()
        .map(|&c| c as f64 / null_total as f64)
        .collect();
    if clean_sites.is_empty() {
        return Ok(fallback(theta));
    }

    let mut rng = rng::stream(opts.seed, rng::RESAMPLING_STREAM);
    let pv = p.values();
    let mut components = vec![Component {
        j: 0,
        weight: theta[0],
        cdf: base.clone(),
    }];
    let mut buf = Vec::with_capacity(k);
    for j in (1..k).filter(|&j| by_j[j] > 0) {
        let mut sample = Vec::with_capacity(clean_sites.len() * opts.repetitions);
        for &v in &clean_sites {
            for _ in 0..opts.repetitions {
                buf.clear();
                buf.extend(nbrs.neighbors(v).iter().map(|&u| pv[u]));
                let swap = j.min(buf.len());
                for i in 0..swap {
                    let r = rng.random_range(i..buf.len());
                    buf.swap(i, r);
                }
                if signal_sites.len() >= swap {
                    for (slot, pick) in index::sample(&mut rng, signal_sites.len(), swap)
                        .into_iter()
                        .enumerate()
                    {
                        buf[slot] = pv[signal_sites[pick]];
                    }
                } else {
                    for slot in buf.iter_mut().take(swap) {
                        *slot = pv[signal_sites[rng.random_range(0..signal_sites.len())]];
                    }
                }
                sample.push(median_in_place(&mut buf));
            }
        }
        components.push(Component {
            j,
            weight: theta[j],
            cdf: NullCdf::Sample(SampleEcdf::new(sample)?),
        });
    }
    components.retain(|c| c.weight > 0.0);
    Ok(Method2Fit {
        cdf: NullCdf::Composite { components },
        n0_hat,
        n_signal_hat: signal_sites.len(),
        theta,
        fell_back: false,
    })
}

/// Monte Carlo law of the median of `k` i.i.d. uniforms; covers even `k`,
/// where no closed form is implemented.
pub fn monte_carlo_median_null(k: usize, draws: usize, seed: u64) -> Result<NullCdf> {
    if k == 0 || draws == 0 {
        return Err(Error::InvalidParameter(
            "Monte Carlo null needs k >= 1 and at least one draw".into(),
        ));
    }
    let mut rng = rng::stream(seed, rng::MONTE_CARLO_STREAM);
    let mut buf = vec![0.0; k];
    let sample = (0..draws)
        .map(|_| {
            buf.iter_mut().for_each(|x| *x = rng.random::<f64>());
            median_in_place(&mut buf)
        })
        .collect();
    Ok(NullCdf::Sample(SampleEcdf::new(sample)?))
}

/// Empirical CDF of p* over the sites that are truly null. Needs ground
/// truth, so it only serves simulations.
pub fn true_null_ecdf(pstar: &Lattice, truth: &Mask) -> Result<NullCdf> {
    pstar.ensure_dims(truth.dims())?;
    let sample: Vec<f64> = pstar
        .values()
        .iter()
        .zip(truth.values())
        .filter(|(_, &signal)| !signal)
        .map(|(&x, _)| x)
        .collect();
    Ok(NullCdf::Sample(SampleEcdf::new(sample)?))
}
