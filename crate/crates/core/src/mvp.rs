//! Mean-variance portfolios from a Monte-Carlo cloud of random long-only
//! weightings, plus the closed-form global minimum-variance solution used as
//! a reference point.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{portfolio_return, portfolio_variance, sharpe_ratio, CovMatrix};
use crate::backtest::check_simplex;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const DEFAULT_SAMPLES: usize = 10_000;

/// Points drawn per RNG stream. Fixed so clouds do not depend on thread count.
const CHUNK: usize = 1024;

/// Long-only weight vector on the unit simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio<T> {
    tickers: Vec<String>,
    weights: Vec<T>,
}

impl<T: Scalar> Portfolio<T> {
    pub fn new(tickers: Vec<String>, weights: Vec<T>) -> Result<Self> {
        if tickers.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "{} tickers for {} weights",
                tickers.len(),
                weights.len()
            )));
        }
        check_simplex(&weights).map_err(Error::InvalidPortfolio)?;
        Ok(Self { tickers, weights })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight_of(&self, ticker: &str) -> Option<T> {
        self.tickers
            .iter()
            .position(|t| t == ticker)
            .map(|i| self.weights[i])
    }
}

/// `1/n` in every asset.
pub fn equal_weight<T: Scalar>(tickers: &[String]) -> Result<Portfolio<T>> {
    if tickers.is_empty() {
        return Err(Error::InvalidPortfolio("equal weight over no assets".into()));
    }
    let w = T::one() / T::from_count(tickers.len());
    Portfolio::new(tickers.to_vec(), vec![w; tickers.len()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint<T> {
    pub annual_volatility: T,
    pub annual_return: T,
    pub sharpe: T,
    pub weights: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierCloud<T> {
    pub points: Vec<FrontierPoint<T>>,
    pub seed: u64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SampleOptions<T> {
    pub count: usize,
    pub risk_free: T,
    pub trading_days: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for SampleOptions<T> {
    fn default() -> Self {
        Self {
            count: DEFAULT_SAMPLES,
            risk_free: T::lit(crate::analytics::DEFAULT_RISK_FREE),
            trading_days: crate::analytics::DEFAULT_TRADING_DAYS,
            seed: 0,
        }
    }
}

/// Evaluates one weight vector: annualized volatility from the daily
/// covariance, Sharpe against `risk_free`.
pub fn frontier_point<T: Scalar>(
    weights: Vec<T>,
    annual_mu: &[T],
    cov: &CovMatrix<T>,
    risk_free: T,
    trading_days: usize,
) -> Result<FrontierPoint<T>> {
    let annual_return = portfolio_return(&weights, annual_mu)?;
    let var = portfolio_variance(&weights, cov)?.max(T::zero());
    let annual_volatility = (var * T::from_count(trading_days)).sqrt();
    let sharpe = sharpe_ratio(annual_return, risk_free, annual_volatility)?;
    Ok(FrontierPoint {
        annual_volatility,
        annual_return,
        sharpe,
        weights,
    })
}

fn draw_weights<T: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> Vec<T> {
    let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Open01)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<T> = raw.iter().map(|&x| T::lit(x / total)).collect();
    // push the rounding residue onto the largest weight so the sum is 1 to the last ulp
    let residue = T::one() - w.iter().copied().sum::<T>();
    if let Some(big) = w
        .iter_mut()
        .reduce(|a, b| if *b > *a { b } else { a })
    {
        *big = *big + residue;
    }
    w
}

/// Random-search cloud of `count` long-only portfolios.
///
/// Each weight vector normalizes `N` independent uniform(0, 1) draws. Point
/// `k` comes from RNG stream `k / 1024` of the master seed, so a cloud of
/// `n` points is a prefix of any larger cloud with the same seed, and the
/// result does not depend on how many worker threads run.
pub fn sample_portfolios<T: Scalar>(
    annual_mu: &[T],
    cov: &CovMatrix<T>,
    opts: &SampleOptions<T>,
) -> Result<FrontierCloud<T>> {
    let n = cov.dim();
    if annual_mu.len() != n {
        return Err(Error::Dimension(format!(
            "{} mean returns for {n} assets",
            annual_mu.len()
        )));
    }
    if opts.count == 0 {
        return Err(Error::Invalid("sample count must be at least 1".into()));
    }
    let chunks = opts.count.div_ceil(CHUNK);
    let parts: Vec<Vec<FrontierPoint<T>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(opts.count - c * CHUNK);
            (0..len)
                .map(|_| {
                    frontier_point(
                        draw_weights(&mut rng, n),
                        annual_mu,
                        cov,
                        opts.risk_free,
                        opts.trading_days,
                    )
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(FrontierCloud {
        points: parts.into_iter().flatten().collect(),
        seed: opts.seed,
        sample_count: opts.count,
    })
}

fn arg_best<T: Scalar>(
    cloud: &FrontierCloud<T>,
    better: impl Fn(&FrontierPoint<T>, &FrontierPoint<T>) -> bool,
) -> Result<&FrontierPoint<T>> {
    let mut iter = cloud.points.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::Invalid("empty frontier cloud".into()))?;
    // strict comparison keeps the lowest index on ties
    Ok(iter.fold(first, |best, p| if better(p, best) { p } else { best }))
}

/// The leftmost point of the cloud.
pub fn min_risk_portfolio<T: Scalar>(cloud: &FrontierCloud<T>) -> Result<&FrontierPoint<T>> {
    arg_best(cloud, |p, best| p.annual_volatility < best.annual_volatility)
}

pub fn max_sharpe_portfolio<T: Scalar>(cloud: &FrontierCloud<T>) -> Result<&FrontierPoint<T>> {
    arg_best(cloud, |p, best| p.sharpe > best.sharpe)
}

/// Upper envelope of the cloud: the volatility range is cut into `bins`
/// equal-width bins and the highest-return point of each non-empty bin is
/// kept, in order of increasing volatility.
pub fn efficient_frontier<T: Scalar>(cloud: &FrontierCloud<T>, bins: usize) -> Result<Vec<FrontierPoint<T>>> {
    if bins == 0 {
        return Err(Error::Invalid("frontier needs at least one bin".into()));
    }
    let Some(first) = cloud.points.first() else {
        return Ok(Vec::new());
    };
    let (lo, hi) = cloud.points.iter().fold(
        (first.annual_volatility, first.annual_volatility),
        |(lo, hi), p| (lo.min(p.annual_volatility), hi.max(p.annual_volatility)),
    );
    let width = hi - lo;
    let nb = T::from_count(bins);
    let mut best: Vec<Option<&FrontierPoint<T>>> = vec![None; bins];
    for p in &cloud.points {
        let b = if width > T::zero() {
            ((p.annual_volatility - lo) / width * nb)
                .floor()
                .to_usize()
                .unwrap_or(0)
                .min(bins - 1)
        } else {
            0
        };
        match best[b] {
            Some(cur) if p.annual_return <= cur.annual_return => {}
            _ => best[b] = Some(p),
        }
    }
    Ok(best.into_iter().flatten().cloned().collect())
}

/// Unconstrained-sign global minimum-variance weights `S^-1 1 / (1' S^-1 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinVarianceSolution<T> {
    pub tickers: Vec<String>,
    pub weights: Vec<T>,
    /// False when some weight is negative, i.e. the optimum needs short positions.
    pub long_only: bool,
    /// True when a 1e-10 ridge had to be added to make the system solvable.
    pub regularized: bool,
}

impl<T: Scalar> MinVarianceSolution<T> {
    pub fn portfolio(&self) -> Result<Portfolio<T>> {
        Portfolio::new(self.tickers.clone(), self.weights.clone())
    }
}

pub fn closed_form_min_variance<T: Scalar>(cov: &CovMatrix<T>) -> Result<MinVarianceSolution<T>> {
    let n = cov.dim();
    if n == 0 {
        return Err(Error::Invalid("empty covariance matrix".into()));
    }
    let ones = vec![T::one(); n];
    let tol = T::epsilon() * T::from_count(n);
    let (x, regularized) = match cov.values().solve(&ones, tol) {
        Ok(x) => (x, false),
        Err(Error::Singular(_)) => {
            let ridge = Matrix::from_fn(n, n, |r, c| {
                cov.values()[(r, c)] + if r == c { T::lit(1e-10) } else { T::zero() }
            });
            (ridge.solve(&ones, tol)?, true)
        }
        Err(e) => return Err(e),
    };
    let total: T = x.iter().copied().sum();
    if total == T::zero() || !total.is_finite() {
        return Err(Error::Singular("1' S^-1 1 vanishes".into()));
    }
    let weights: Vec<T> = x.iter().map(|&v| v / total).collect();
    let long_only = weights.iter().all(|&w| w >= T::zero());
    Ok(MinVarianceSolution {
        tickers: cov.tickers().to_vec(),
        weights,
        long_only,
        regularized,
    })
}
