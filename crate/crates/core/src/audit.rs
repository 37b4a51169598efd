//! Finite-population permutation audits of a sample's cluster composition.
//!
//! Under the null the sample is a simple random sample without replacement,
//! so its cluster counts are multivariate hypergeometric. Null samples are
//! drawn cluster by cluster from the conditional univariate hypergeometric
//! laws. Replicate `s` always uses the stream keyed by `(seed, s)`, so the
//! results do not depend on the number of workers.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Hypergeometric};

use crate::error::{Error, Result};
use crate::rng::{self, domain};
use crate::stats::upper_quantile_nonneg;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AuditInput {
    /// Population cluster counts `c_i`.
    #[cfg_attr(feature = "serde", serde(rename = "c"))]
    pub population: Vec<u64>,
    /// Sample cluster counts `x_i`.
    #[cfg_attr(feature = "serde", serde(rename = "x"))]
    pub sample: Vec<u64>,
    #[cfg_attr(feature = "serde", serde(rename = "Q", alias = "q", default = "default_permutations"))]
    pub permutations: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
}

#[cfg(feature = "serde")]
fn default_permutations() -> usize {
    10_000
}

impl AuditInput {
    pub fn new(population: Vec<u64>, sample: Vec<u64>, permutations: usize, seed: u64) -> Self {
        AuditInput { population, sample, permutations, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population.is_empty() {
            return Err(Error::Empty("population counts"));
        }
        if self.population.len() != self.sample.len() {
            return Err(Error::DimensionMismatch { expected: self.population.len(), actual: self.sample.len() });
        }
        if let Some(i) = (0..self.sample.len()).find(|&i| self.sample[i] > self.population[i]) {
            return Err(Error::MalformedInput(alloc::format!(
                "cluster {i}: sample count {} exceeds population count {}",
                self.sample[i],
                self.population[i]
            )));
        }
        if self.sample_size() == 0 {
            return Err(Error::Empty("sample"));
        }
        if self.permutations < 1 {
            return Err(Error::Config("at least one permutation is required".into()));
        }
        Ok(())
    }

    pub fn population_size(&self) -> u64 {
        self.population.iter().sum()
    }

    pub fn sample_size(&self) -> u64 {
        self.sample.iter().sum()
    }

    /// Population shares `p_i = c_i / n`.
    pub fn shares(&self) -> Vec<f64> {
        let n = self.population_size() as f64;
        self.population.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Draws the cluster counts of a simple random sample of `size` units.
pub fn draw_sample<R: Rng + ?Sized>(population: &[u64], size: u64, rng: &mut R, out: &mut [u64]) {
    let mut remaining: u64 = population.iter().sum();
    let mut draws = size.min(remaining);
    for (o, &c) in out.iter_mut().zip(population) {
        *o = if draws == 0 || c == 0 {
            0
        } else if c == remaining {
            draws
        } else {
            hypergeometric(remaining, c, draws, rng)
        };
        remaining -= c;
        draws -= *o;
    }
}

/// One hypergeometric draw: successes among `draws` units taken without
/// replacement from `total` units of which `marked` are successes.
pub fn hypergeometric<R: Rng + ?Sized>(total: u64, marked: u64, draws: u64, rng: &mut R) -> u64 {
    let others = total - marked;
    let mode = libm::floor((draws + 1) as f64 * (marked + 1) as f64 / (total + 2) as f64);
    if mode - (draws.saturating_sub(others) as f64) < INVERSION_MODE {
        return hypergeometric_inversion(total, marked, draws, rng);
    }
    match Hypergeometric::new(total, marked, draws) {
        Ok(dist) => dist.sample(rng),
        Err(_) => hypergeometric_inversion(total, marked, draws, rng),
    }
}

/// `ln n!`; Stirling's series above 255 (error below 1e-19), `lgamma` below.
fn ln_factorial(n: u64) -> f64 {
    if n < 256 {
        return libm::lgamma(n as f64 + 1.0);
    }
    const HALF_LN_TAU: f64 = 0.918_938_533_204_672_8;
    let x = n as f64;
    let r = 1.0 / x;
    let r2 = r * r;
    (x + 0.5) * libm::log(x) - x + HALF_LN_TAU + r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 / 1260.0))
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

// Below this distance between mode and lower support bound rand_distr also
// inverts, but sets up its starting mass with a loop over the whole
// population.
const INVERSION_MODE: f64 = 10.0;

// Sequential inversion from the lower end of the support, with the starting
// mass taken in log space.
fn hypergeometric_inversion<R: Rng + ?Sized>(total: u64, marked: u64, draws: u64, rng: &mut R) -> u64 {
    let lo = (draws + marked).saturating_sub(total);
    let hi = draws.min(marked);
    let others = total - marked;
    let ln_start = if lo == 0 {
        // C(others, k) / C(total, k)
        ln_factorial(others) - ln_factorial(others - draws) - ln_factorial(total) + ln_factorial(total - draws)
    } else {
        ln_choose(marked, lo) + ln_choose(others, draws - lo) - ln_choose(total, draws)
    };
    let mut pmf = libm::exp(ln_start);
    let mut u: f64 = rng.random();
    let mut x = lo;
    while x < hi {
        u -= pmf;
        if u <= 0.0 {
            break;
        }
        let (xf, m, o, k) = (x as f64, marked as f64, others as f64, draws as f64);
        pmf *= (m - xf) * (k - xf) / ((xf + 1.0) * (o - k + xf + 1.0));
        x += 1;
    }
    x
}

/// `S = sum_i |x_i / L - p_i| * 100`.
pub fn misfit_statistic(sample: &[u64], shares: &[f64], size: u64) -> f64 {
    let l = size as f64;
    sample.iter().zip(shares).map(|(&x, &p)| (x as f64 / l - p).abs()).sum::<f64>() * 100.0
}

/// `(#{s : null_s >= observed} + 1) / (Q + 1)`.
pub fn upper_tail_p(null: &[f64], observed: f64) -> f64 {
    let hits = null.iter().filter(|&&s| s >= observed).count();
    (hits + 1) as f64 / (null.len() + 1) as f64
}

/// Evaluates `stat` on each of `q` null samples.
fn simulate<F>(population: &[u64], size: u64, q: usize, seed: u64, stream: u64, stat: F) -> Vec<[f64; 2]>
where
    F: Fn(&[u64]) -> [f64; 2] + Sync,
{
    let one = |s: usize| {
        let mut rng = rng::keyed(seed, stream, s as u64);
        let mut buf = alloc::vec![0u64; population.len()];
        draw_sample(population, size, &mut rng, &mut buf);
        stat(&buf)
    };
    #[cfg(feature = "std")]
    {
        use rayon::prelude::*;
        (0..q).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "std"))]
    {
        (0..q).map(one).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GlobalMisfit {
    pub s_obs: f64,
    pub p_global: f64,
}

/// Global goodness-of-fit test on the summed absolute share deviation.
pub fn global_misfit(input: &AuditInput) -> Result<GlobalMisfit> {
    input.validate()?;
    let shares = input.shares();
    let size = input.sample_size();
    let s_obs = misfit_statistic(&input.sample, &shares, size);
    let null: Vec<f64> = simulate(&input.population, size, input.permutations, input.seed, domain::AUDIT, |x| {
        [misfit_statistic(x, &shares, size), 0.0]
    })
    .into_iter()
    .map(|s| s[0])
    .collect();
    Ok(GlobalMisfit { s_obs, p_global: upper_tail_p(&null, s_obs) })
}

/// Typical absolute share deviation `w(p)` in percentage points, linear
/// between grid shares and anchored at `w(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WiggleCurve {
    pub shares: Vec<f64>,
    pub values: Vec<f64>,
}

impl WiggleCurve {
    pub fn eval(&self, p: f64) -> f64 {
        if p <= 0.0 || self.shares.is_empty() {
            return 0.0;
        }
        let (mut x0, mut y0) = (0.0, 0.0);
        for (&x1, &y1) in self.shares.iter().zip(&self.values) {
            if p <= x1 {
                return if x1 > x0 { y0 + (y1 - y0) * (p - x0) / (x1 - x0) } else { y1 };
            }
            (x0, y0) = (x1, y1);
        }
        y0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct WiggleConfig {
    pub grid_points: usize,
    pub min_share: f64,
    pub sims: usize,
}

impl Default for WiggleConfig {
    fn default() -> Self {
        WiggleConfig { grid_points: 30, min_share: 1e-4, sims: 1000 }
    }
}

/// `points` log-spaced shares from `min_share` to `max_share`.
pub fn log_grid(min_share: f64, max_share: f64, points: usize) -> Vec<f64> {
    if points <= 1 || max_share <= min_share {
        return alloc::vec![max_share];
    }
    let (a, b) = (libm::log(min_share), libm::log(max_share));
    (0..points).map(|i| libm::exp(a + (b - a) * i as f64 / (points - 1) as f64)).collect()
}

/// Estimates `w(p)` by simulating, for each grid share, the sampled count
/// of a cluster of `round(p n)` units and taking the median absolute
/// deviation of its sample share from its population share.
pub fn wiggle_curve(population_size: u64, sample_size: u64, grid: &[f64], sims: usize, seed: u64) -> Result<WiggleCurve> {
    if sims < 100 {
        return Err(Error::Config("wiggle estimation needs at least 100 simulations per share".into()));
    }
    if sample_size == 0 || sample_size > population_size {
        return Err(Error::Config("sample size must lie in [1, population size]".into()));
    }
    if grid.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("wiggle grid must be increasing shares in (0, 1]".into()));
    }
    let l = sample_size as f64;
    let n = population_size as f64;
    let values = grid
        .iter()
        .enumerate()
        .map(|(g, &p)| {
            let c = libm::round(p * n).clamp(0.0, n) as u64;
            if c == 0 {
                return 0.0;
            }
            let share = c as f64 / n;
            let mut rng = rng::keyed(seed, domain::WIGGLE, g as u64);
            let mut draw: alloc::boxed::Box<dyn FnMut(&mut rng::StreamRng) -> u64> =
                match Hypergeometric::new(population_size, c, sample_size) {
                    Ok(dist) => alloc::boxed::Box::new(move |r| dist.sample(r)),
                    Err(_) => alloc::boxed::Box::new(move |r| hypergeometric_inversion(population_size, c, sample_size, r)),
                };
            let mut devs: Vec<f64> = (0..sims).map(|_| (draw(&mut rng) as f64 / l - share).abs() * 100.0).collect();
            median(&mut devs)
        })
        .collect();
    Ok(WiggleCurve { shares: grid.to_vec(), values })
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// `w(p)` on the default grid for the population of `input`.
pub fn default_wiggle(input: &AuditInput, config: &WiggleConfig) -> Result<WiggleCurve> {
    input.validate()?;
    let max_share = input.shares().into_iter().fold(0.0, f64::max);
    let grid = log_grid(config.min_share.min(max_share), max_share, config.grid_points);
    wiggle_curve(input.population_size(), input.sample_size(), &grid, config.sims, input.seed)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterTest {
    pub alpha: f64,
    /// `c_T*`.
    pub threshold: f64,
    /// Observed `T_i`; `None` for clusters with `w(p_i) = 0`.
    pub scores: Vec<Option<f64>>,
    pub flags: Vec<usize>,
    pub excluded: Vec<usize>,
    pub t_max_obs: f64,
    pub p_tmax: f64,
}

struct Standardizer {
    shares: Vec<f64>,
    wiggle: Vec<f64>,
    size: f64,
}

impl Standardizer {
    fn new(input: &AuditInput, w: &WiggleCurve) -> Self {
        let shares = input.shares();
        let wiggle = shares.iter().map(|&p| w.eval(p)).collect();
        Standardizer { shares, wiggle, size: input.sample_size() as f64 }
    }

    fn score(&self, i: usize, x: u64) -> Option<f64> {
        let w = self.wiggle[i];
        (w > 0.0).then(|| (x as f64 / self.size - self.shares[i]).abs() * 100.0 / w)
    }

    fn t_max(&self, x: &[u64]) -> f64 {
        x.iter().enumerate().filter_map(|(i, &xi)| self.score(i, xi)).fold(0.0, f64::max)
    }
}

fn cluster_verdict(input: &AuditInput, std: &Standardizer, mut t_null: Vec<f64>, alpha: f64) -> Result<ClusterTest> {
    let scores: Vec<Option<f64>> = input.sample.iter().enumerate().map(|(i, &x)| std.score(i, x)).collect();
    let excluded: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].is_none()).collect();
    if excluded.len() == scores.len() {
        return Err(Error::Undefined("every cluster has zero expected wiggle".into()));
    }
    let t_max_obs = scores.iter().flatten().copied().fold(0.0, f64::max);
    let p_tmax = upper_tail_p(&t_null, t_max_obs);
    let threshold = upper_quantile_nonneg(&mut t_null, 1.0 - alpha);
    let flags = (0..scores.len()).filter(|&i| matches!(scores[i], Some(t) if t > threshold)).collect();
    Ok(ClusterTest { alpha, threshold, scores, flags, excluded, t_max_obs, p_tmax })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Config(alloc::format!("alpha must lie in [0, 1], got {alpha}")))
    }
}

/// Per-cluster anomaly test calibrated on the null distribution of
/// `T_max = max_i T_i`.
pub fn per_cluster_test(input: &AuditInput, w: &WiggleCurve, alpha: f64) -> Result<ClusterTest> {
    input.validate()?;
    check_alpha(alpha)?;
    let std = Standardizer::new(input, w);
    let t_null = simulate(&input.population, input.sample_size(), input.permutations, input.seed, domain::AUDIT, |x| {
        [std.t_max(x), 0.0]
    })
    .into_iter()
    .map(|s| s[0])
    .collect();
    cluster_verdict(input, &std, t_null, alpha)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AuditResult {
    pub population_size: u64,
    pub sample_size: u64,
    pub permutations: usize,
    pub seed: u64,
    pub s_obs: f64,
    pub p_global: f64,
    pub wiggle: WiggleCurve,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub clusters: ClusterTest,
}

/// Both tests on one shared set of null samples.
pub fn audit(input: &AuditInput, alpha: f64, wiggle: &WiggleConfig) -> Result<AuditResult> {
    input.validate()?;
    let w = default_wiggle(input, wiggle)?;
    audit_with_wiggle(input, alpha, w)
}

/// [`audit`] with a precomputed `w(p)` curve, for repeated audits of
/// samples of one size from one population.
pub fn audit_with_wiggle(input: &AuditInput, alpha: f64, w: WiggleCurve) -> Result<AuditResult> {
    input.validate()?;
    check_alpha(alpha)?;
    let std = Standardizer::new(input, &w);
    let size = input.sample_size();
    let null = simulate(&input.population, size, input.permutations, input.seed, domain::AUDIT, |x| {
        [misfit_statistic(x, &std.shares, size), std.t_max(x)]
    });
    let s_null: Vec<f64> = null.iter().map(|s| s[0]).collect();
    let s_obs = misfit_statistic(&input.sample, &std.shares, size);
    let clusters = cluster_verdict(input, &std, null.iter().map(|s| s[1]).collect(), alpha)?;
    Ok(AuditResult {
        population_size: input.population_size(),
        sample_size: size,
        permutations: input.permutations,
        seed: input.seed,
        s_obs,
        p_global: upper_tail_p(&s_null, s_obs),
        wiggle: w,
        clusters,
    })
}

/// One row of funnel-plot data.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FunnelPoint {
    pub cluster: usize,
    pub share: f64,
    /// Signed deviation `(x_i / L - p_i) * 100`.
    pub deviation: f64,
    /// Half-width `c_T* w(p_i)` of the envelope.
    pub envelope: f64,
    pub flagged: bool,
}

pub fn funnel(input: &AuditInput, result: &AuditResult) -> Vec<FunnelPoint> {
    let l = input.sample_size() as f64;
    input
        .shares()
        .into_iter()
        .enumerate()
        .map(|(i, p)| FunnelPoint {
            cluster: i,
            share: p,
            deviation: (input.sample[i] as f64 / l - p) * 100.0,
            envelope: result.clusters.threshold * result.wiggle.eval(p),
            flagged: result.clusters.flags.contains(&i),
        })
        .collect()
}
