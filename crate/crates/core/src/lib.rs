//! Portfolio allocation toolkit.
//!
//! Three allocators share one data pipeline: a Monte-Carlo mean-variance
//! frontier ([`mvp`]), hierarchical risk parity ([`hrp`]) and a deep
//! Q-network that rebalances by small buy/sell steps ([`rl`]). Prices are
//! loaded and cleaned in [`market_data`], turned into returns and risk
//! statistics in [`analytics`] and scored out of sample in [`backtest`].
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`; [`single`] has the
//! `f32` versions.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod backtest;
pub mod error;
pub mod hrp;
pub mod linalg;
pub mod market_data;
pub mod mvp;
pub mod rl;
pub mod scalar;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::Matrix<f64>;
pub type PriceTable = market_data::PriceTable<f64>;
pub type ReturnTable = analytics::ReturnTable<f64>;
pub type CovMatrix = analytics::CovMatrix<f64>;
pub type CorrMatrix = analytics::CorrMatrix<f64>;
pub type AssetStats = analytics::AssetStats<f64>;
pub type Portfolio = mvp::Portfolio<f64>;
pub type FrontierPoint = mvp::FrontierPoint<f64>;
pub type FrontierCloud = mvp::FrontierCloud<f64>;
pub type SampleOptions = mvp::SampleOptions<f64>;
pub type DistanceMatrix = hrp::DistanceMatrix<f64>;
pub type LinkageTree = hrp::LinkageTree<f64>;
pub type HrpAllocation = hrp::HrpAllocation<f64>;
pub type Hyperparams = rl::Hyperparams<f64>;
pub type QNetwork = rl::QNetwork<f64>;
pub type WeightSchedule = backtest::WeightSchedule<f64>;
pub type BacktestReport = backtest::BacktestReport<f64>;
pub type ComparisonTable = backtest::ComparisonTable<f64>;

pub use backtest::{Method, Phase};
pub use market_data::DateSplit;

/// Single-precision aliases.
pub mod single {
    use super::{analytics, backtest, hrp, linalg, market_data, mvp, rl};

    pub type Matrix = linalg::Matrix<f32>;
    pub type PriceTable = market_data::PriceTable<f32>;
    pub type ReturnTable = analytics::ReturnTable<f32>;
    pub type CovMatrix = analytics::CovMatrix<f32>;
    pub type CorrMatrix = analytics::CorrMatrix<f32>;
    pub type Portfolio = mvp::Portfolio<f32>;
    pub type FrontierCloud = mvp::FrontierCloud<f32>;
    pub type LinkageTree = hrp::LinkageTree<f32>;
    pub type Hyperparams = rl::Hyperparams<f32>;
    pub type QNetwork = rl::QNetwork<f32>;
    pub type WeightSchedule = backtest::WeightSchedule<f32>;
    pub type BacktestReport = backtest::BacktestReport<f32>;
}
