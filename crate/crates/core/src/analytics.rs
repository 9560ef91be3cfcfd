//! Return series, sample statistics and portfolio-level aggregates.
//!
//! All estimators use the sample (n - 1) divisor. Annualization multiplies
//! mean daily returns by `trading_days` and daily volatilities by its
//! square root.

use chrono::NaiveDate;

use crate::backtest::WeightSchedule;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::market_data::PriceTable;
use crate::scalar::{variance_floor, Scalar};

pub const DEFAULT_TRADING_DAYS: usize = 252;
pub const DEFAULT_RISK_FREE: f64 = 0.01;

/// Cumulative return curve: one compounded fraction per date.
pub type Curve<T> = Vec<(NaiveDate, T)>;

/// Daily returns, dated by the later of the two closes they span.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnTable<T> {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    values: Matrix<T>,
}

impl<T: Scalar> ReturnTable<T> {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, values: Matrix<T>) -> Result<Self> {
        if values.nrows() != dates.len() || values.ncols() != tickers.len() {
            return Err(Error::Dimension(format!(
                "{}x{} returns for {} dates and {} tickers",
                values.nrows(),
                values.ncols(),
                dates.len(),
                tickers.len()
            )));
        }
        if !values.all_finite() {
            return Err(Error::Invalid("returns must be finite".into()));
        }
        if dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("return dates must be strictly increasing".into()));
        }
        Ok(Self {
            dates,
            tickers,
            values,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, t: usize) -> &[T] {
        self.values.row(t)
    }

    pub fn column(&self, i: usize) -> Vec<T> {
        self.values.column(i)
    }

    /// Rows `start..end` as a new table.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            dates: self.dates[start..end].to_vec(),
            tickers: self.tickers.clone(),
            values: self.values.row_range(start, end),
        }
    }
}

fn returns_with<T: Scalar>(table: &PriceTable<T>, f: impl Fn(T, T) -> T) -> Result<ReturnTable<T>> {
    let n = table.n_assets();
    let rows = table.n_rows();
    if rows < 2 {
        return Err(Error::InsufficientData("returns need at least 2 price rows".into()));
    }
    let mut data = Vec::with_capacity((rows - 1) * n);
    for t in 0..rows - 1 {
        for i in 0..n {
            data.push(f(table.require(t, i)?, table.require(t + 1, i)?));
        }
    }
    ReturnTable::new(
        table.dates()[1..].to_vec(),
        table.tickers().to_vec(),
        Matrix::from_vec(rows - 1, n, data)?,
    )
}

/// `P[t+1] / P[t] - 1` per ticker.
pub fn simple_returns<T: Scalar>(table: &PriceTable<T>) -> Result<ReturnTable<T>> {
    returns_with(table, |prev, next| next / prev - T::one())
}

/// `ln(P[t+1] / P[t])` per ticker.
pub fn log_returns<T: Scalar>(table: &PriceTable<T>) -> Result<ReturnTable<T>> {
    returns_with(table, |prev, next| (next / prev).ln())
}

pub fn mean<T: Scalar>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::from_count(xs.len())
}

/// Sample variance, divisor `n - 1`.
pub fn sample_variance<T: Scalar>(xs: &[T]) -> T {
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_count(xs.len() - 1)
}

pub fn sample_std<T: Scalar>(xs: &[T]) -> T {
    sample_variance(xs).sqrt()
}

/// Per-ticker return and risk summary.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetStats<T> {
    pub tickers: Vec<String>,
    pub mean_daily: Vec<T>,
    pub daily_volatility: Vec<T>,
    pub annual_volatility: Vec<T>,
    pub annual_mean: Vec<T>,
    pub trading_days: usize,
}

pub fn volatility<T: Scalar>(returns: &ReturnTable<T>, trading_days: usize) -> Result<AssetStats<T>> {
    if returns.n_rows() < 2 {
        return Err(Error::InsufficientData(format!(
            "volatility needs at least 2 return rows, found {}",
            returns.n_rows()
        )));
    }
    let days = T::from_count(trading_days);
    let root = days.sqrt();
    let mut stats = AssetStats {
        tickers: returns.tickers().to_vec(),
        mean_daily: Vec::new(),
        daily_volatility: Vec::new(),
        annual_volatility: Vec::new(),
        annual_mean: Vec::new(),
        trading_days,
    };
    for i in 0..returns.n_assets() {
        let col = returns.column(i);
        let m = mean(&col);
        let sd = sample_std(&col);
        stats.mean_daily.push(m);
        stats.daily_volatility.push(sd);
        stats.annual_volatility.push(sd * root);
        stats.annual_mean.push(m * days);
    }
    Ok(stats)
}

/// Sample covariance matrix, daily return units.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix<T> {
    tickers: Vec<String>,
    values: Matrix<T>,
}

impl<T: Scalar> CovMatrix<T> {
    /// Checks squareness, symmetry (1e-12) and a non-negative diagonal.
    /// Positive semidefiniteness is not verified here.
    pub fn new(tickers: Vec<String>, values: Matrix<T>) -> Result<Self> {
        check_square(&tickers, &values)?;
        if values.max_asymmetry() > T::lit(1e-12) {
            return Err(Error::Invalid("covariance matrix is not symmetric".into()));
        }
        if values.diagonal().iter().any(|&v| v < T::zero()) {
            return Err(Error::Invalid("covariance diagonal must be non-negative".into()));
        }
        Ok(Self { tickers, values })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.tickers.len()
    }

    pub fn variances(&self) -> Vec<T> {
        self.values.diagonal()
    }

    /// Restriction to the given asset indices.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            tickers: idx.iter().map(|&i| self.tickers[i].clone()).collect(),
            values: self.values.select(idx),
        }
    }

    /// Correlation under the zero-variance rule.
    pub fn to_correlation(&self) -> CorrMatrix<T> {
        CorrMatrix {
            tickers: self.tickers.clone(),
            values: correlation_from_covariance(&self.values),
        }
    }
}

/// Pearson correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix<T> {
    tickers: Vec<String>,
    values: Matrix<T>,
}

impl<T: Scalar> CorrMatrix<T> {
    pub fn new(tickers: Vec<String>, values: Matrix<T>) -> Result<Self> {
        check_square(&tickers, &values)?;
        if values.max_asymmetry() > T::lit(1e-12) {
            return Err(Error::Invalid("correlation matrix is not symmetric".into()));
        }
        if values.diagonal().iter().any(|&v| v != T::one()) {
            return Err(Error::Invalid("correlation diagonal must be exactly 1".into()));
        }
        if values.as_slice().iter().any(|&v| !(v >= -T::one() && v <= T::one())) {
            return Err(Error::Invalid("correlations must lie in [-1, 1]".into()));
        }
        Ok(Self { tickers, values })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.tickers.len()
    }
}

fn check_square<T: Scalar>(tickers: &[String], values: &Matrix<T>) -> Result<()> {
    if !values.is_square() || values.nrows() != tickers.len() {
        return Err(Error::Dimension(format!(
            "{}x{} matrix for {} tickers",
            values.nrows(),
            values.ncols(),
            tickers.len()
        )));
    }
    Ok(())
}

/// Column-wise sample covariance of a `T x N` matrix.
pub fn covariance_of<T: Scalar>(values: &Matrix<T>) -> Matrix<T> {
    let (rows, n) = (values.nrows(), values.ncols());
    let means: Vec<T> = (0..n)
        .map(|i| values.rows_iter().map(|r| r[i]).sum::<T>() / T::from_count(rows))
        .collect();
    let denom = T::from_count(rows - 1);
    let mut cov = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: T = values
                .rows_iter()
                .map(|r| (r[i] - means[i]) * (r[j] - means[j]))
                .sum();
            cov[(i, j)] = s / denom;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    cov
}

/// Normalizes a covariance matrix into correlations.
///
/// Entries involving a column whose variance is at or below the 1e-12
/// floor are 0; the diagonal is exactly 1 and every entry is clamped to
/// [-1, 1].
pub fn correlation_from_covariance<T: Scalar>(cov: &Matrix<T>) -> Matrix<T> {
    let n = cov.nrows();
    let floor = variance_floor::<T>();
    let sd: Vec<Option<T>> = cov
        .diagonal()
        .into_iter()
        .map(|v| (v > floor).then(|| v.sqrt()))
        .collect();
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            return T::one();
        }
        match (sd[i], sd[j]) {
            (Some(si), Some(sj)) => (cov[(i, j)] / (si * sj)).max(-T::one()).min(T::one()),
            _ => T::zero(),
        }
    })
}

pub fn covariance<T: Scalar>(returns: &ReturnTable<T>) -> Result<CovMatrix<T>> {
    if returns.n_rows() < 2 {
        return Err(Error::InsufficientData("covariance needs at least 2 rows".into()));
    }
    Ok(CovMatrix {
        tickers: returns.tickers().to_vec(),
        values: covariance_of(returns.values()),
    })
}

pub fn correlation<T: Scalar>(returns: &ReturnTable<T>) -> Result<CorrMatrix<T>> {
    Ok(covariance(returns)?.to_correlation())
}

/// Expected portfolio return, `sum_i w_i * mu_i`.
pub fn portfolio_return<T: Scalar>(weights: &[T], mean_returns: &[T]) -> Result<T> {
    if weights.len() != mean_returns.len() {
        return Err(Error::Dimension(format!(
            "{} weights against {} mean returns",
            weights.len(),
            mean_returns.len()
        )));
    }
    Ok(weights.iter().zip(mean_returns).map(|(&w, &m)| w * m).sum())
}

/// Number of distinct terms in the expanded variance sum: N variance terms
/// plus N(N-1)/2 doubled covariance terms.
pub fn variance_term_count(n: usize) -> usize {
    n + n * (n.saturating_sub(1)) / 2
}

/// Portfolio variance as the expanded double sum
/// `sum_i w_i^2 s_ii + 2 sum_{i<j} w_i w_j s_ij`.
pub fn portfolio_variance<T: Scalar>(weights: &[T], cov: &CovMatrix<T>) -> Result<T> {
    let n = cov.dim();
    if weights.len() != n {
        return Err(Error::Dimension(format!(
            "{} weights against {n}x{n} covariance",
            weights.len()
        )));
    }
    let s = cov.values();
    let two = T::lit(2.0);
    let mut var = T::zero();
    for i in 0..n {
        var = var + weights[i] * weights[i] * s[(i, i)];
        for j in (i + 1)..n {
            var = var + two * weights[i] * weights[j] * s[(i, j)];
        }
    }
    Ok(var)
}

/// `(R_c - R_f) / sigma_c`.
pub fn sharpe_ratio<T: Scalar>(portfolio_return: T, risk_free: T, portfolio_vol: T) -> Result<T> {
    if !(portfolio_vol > T::zero()) || !portfolio_vol.is_finite() {
        return Err(Error::UndefinedSharpe);
    }
    Ok((portfolio_return - risk_free) / portfolio_vol)
}

/// Daily portfolio returns `sum_i w[t,i] * r[t,i]` under a schedule whose
/// dates match the return table.
pub fn portfolio_returns<T: Scalar>(
    returns: &ReturnTable<T>,
    schedule: &WeightSchedule<T>,
) -> Result<Vec<T>> {
    if schedule.dates() != returns.dates() {
        return Err(Error::Alignment(format!(
            "schedule has {} dates, returns have {} (or the dates differ)",
            schedule.dates().len(),
            returns.dates().len()
        )));
    }
    if schedule.n_assets() != returns.n_assets() {
        return Err(Error::Alignment(format!(
            "schedule has {} assets, returns have {}",
            schedule.n_assets(),
            returns.n_assets()
        )));
    }
    Ok((0..returns.n_rows())
        .map(|t| crate::linalg::dot(schedule.row(t), returns.row(t)))
        .collect())
}

/// Compounds a return stream: `prod(1 + r) - 1` at each step.
pub fn compound<T: Scalar>(stream: &[T]) -> Vec<T> {
    let mut growth = T::one();
    stream
        .iter()
        .map(|&r| {
            growth = growth * (T::one() + r);
            growth - T::one()
        })
        .collect()
}

pub fn cumulative_returns<T: Scalar>(
    returns: &ReturnTable<T>,
    schedule: &WeightSchedule<T>,
) -> Result<Curve<T>> {
    let stream = portfolio_returns(returns, schedule)?;
    Ok(returns.dates().iter().copied().zip(compound(&stream)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::static_schedule;

    fn dates(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        (0..n).map(|i| start + chrono::Days::new(i as u64)).collect()
    }

    fn prices(cols: &[&[f64]]) -> PriceTable<f64> {
        let rows = cols[0].len();
        let tickers = (0..cols.len()).map(|i| format!("T{i}")).collect();
        let data = (0..rows)
            .map(|r| cols.iter().map(|c| Some(c[r])).collect())
            .collect();
        PriceTable::new(dates(rows), tickers, data).unwrap()
    }

    fn returns(cols: &[&[f64]]) -> ReturnTable<f64> {
        let rows = cols[0].len();
        let m = Matrix::from_fn(rows, cols.len(), |r, c| cols[c][r]);
        ReturnTable::new(dates(rows), (0..cols.len()).map(|i| format!("T{i}")).collect(), m).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn simple_returns_direct_ratio() {
        let r = simple_returns(&prices(&[&[100.0, 110.0, 99.0], &[100.0, 100.0, 100.0]])).unwrap();
        assert!(close(r.column(0)[0], 0.10, 1e-15));
        assert!(close(r.column(0)[1], -0.10, 1e-15));
        assert_eq!(r.column(1), vec![0.0, 0.0]);
        assert_eq!(r.dates(), &dates(3)[1..]);

        let r = simple_returns(&prices(&[&[100.0, 105.0, 110.25], &[1.0, 1.0, 1.0]])).unwrap();
        assert!(close(r.column(0)[0], 0.05, 1e-15));
        assert!(close(r.column(0)[1], 0.05, 1e-15));
    }

    #[test]
    fn simple_returns_reject_missing() {
        let t = PriceTable::new(
            dates(3),
            vec!["A".into(), "B".into()],
            vec![vec![Some(1.0), Some(1.0)], vec![None, Some(1.0)], vec![Some(1.0), Some(1.0)]],
        )
        .unwrap();
        assert!(matches!(simple_returns(&t), Err(Error::MissingValue { .. })));
    }

    #[test]
    fn log_returns_analytic() {
        let e = std::f64::consts::E;
        let r = log_returns(&prices(&[&[100.0, 100.0 * e], &[100.0, 110.0]])).unwrap();
        assert!(close(r.row(0)[0], 1.0, 1e-15));
        assert!(close(r.row(0)[1], 0.0953101798043249, 1e-15));
        let r = log_returns(&prices(&[&[5.0, 5.0, 5.0], &[1.0, 1.0, 1.0]])).unwrap();
        assert!(r.values().as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn volatility_alternating() {
        let s = volatility(&returns(&[&[0.01, -0.01, 0.01, -0.01]]), 252).unwrap();
        let expected = (4e-4f64 / 3.0).sqrt();
        assert!(close(s.daily_volatility[0], expected, 1e-15));
        assert!(close(s.daily_volatility[0], 0.0115470, 1e-7));
        assert!(close(s.annual_volatility[0], expected * 252f64.sqrt(), 1e-12));
        assert_eq!(s.mean_daily[0], 0.0);
    }

    #[test]
    fn volatility_constant_and_scaling() {
        let s = volatility(&returns(&[&[0.002; 5]]), 252).unwrap();
        assert!(s.daily_volatility[0].abs() < 1e-18);
        assert!(close(s.annual_mean[0], 0.002 * 252.0, 1e-15));
        assert!(close(0.01 * 252f64.sqrt(), 0.1587451, 1e-7));
    }

    #[test]
    fn volatility_needs_two_rows() {
        assert!(matches!(
            volatility(&returns(&[&[0.1]]), 252),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn identical_columns_fully_correlated() {
        let x = [0.01, -0.02, 0.03, 0.0, 0.015];
        let r = returns(&[&x, &x]);
        let cov = covariance(&r).unwrap();
        let corr = correlation(&r).unwrap();
        assert!(close(corr.values()[(0, 1)], 1.0, 1e-15));
        assert!(close(cov.values()[(0, 1)], sample_variance(&x), 1e-18));
    }

    #[test]
    fn negated_columns_anticorrelated() {
        let x = [0.01, -0.02, 0.03, 0.0, 0.015];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let corr = correlation(&returns(&[&x, &neg])).unwrap();
        assert!(close(corr.values()[(0, 1)], -1.0, 1e-15));
    }

    #[test]
    fn constant_column_zero_correlation() {
        let x = [0.01, -0.02, 0.03, 0.0, 0.015];
        let r = returns(&[&x, &[0.0; 5]]);
        let corr = correlation(&r).unwrap();
        assert_eq!(corr.values()[(0, 1)], 0.0);
        assert_eq!(corr.values()[(1, 1)], 1.0);
        assert_eq!(covariance(&r).unwrap().values()[(1, 1)], 0.0);
        assert!(CorrMatrix::new(corr.tickers().to_vec(), corr.values().clone()).is_ok());
    }

    #[test]
    fn portfolio_return_cases() {
        assert!(close(portfolio_return(&[0.5, 0.5], &[0.1, 0.2]).unwrap(), 0.15, 1e-15));
        assert_eq!(portfolio_return(&[1.0, 0.0], &[0.3, 0.2]).unwrap(), 0.3);
        assert!(close(portfolio_return(&[0.1; 10], &[0.07; 10]).unwrap(), 0.07, 1e-15));
        assert!(portfolio_return(&[1.0], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn portfolio_variance_cases() {
        let names = vec!["A".to_string(), "B".to_string()];
        let diag = CovMatrix::new(names.clone(), Matrix::from_diagonal(&[0.04, 0.04])).unwrap();
        assert!(close(portfolio_variance(&[0.5, 0.5], &diag).unwrap(), 0.02, 1e-15));
        let full = CovMatrix::new(names, Matrix::from_vec(2, 2, vec![0.04; 4]).unwrap()).unwrap();
        assert!(close(portfolio_variance(&[0.5, 0.5], &full).unwrap(), 0.04, 1e-15));
        assert_eq!(variance_term_count(10), 55);
    }

    #[test]
    fn sharpe_cases() {
        assert!(close(sharpe_ratio(0.10, 0.01, 0.09).unwrap(), 1.0, 1e-15));
        assert_eq!(sharpe_ratio(0.01, 0.01, 0.3).unwrap(), 0.0);
        let s = sharpe_ratio(0.376, 0.01, 0.216563).unwrap();
        assert!(close(s, 0.366 / 0.216563, 1e-15));
        assert!(s > 1.69 && s < 1.70);
        assert!(matches!(sharpe_ratio(0.1, 0.01, 0.0), Err(Error::UndefinedSharpe)));
    }

    #[test]
    fn cumulative_compounding() {
        let r = returns(&[&[0.01, 0.01, 0.01], &[0.01, 0.01, 0.01]]);
        let sched = static_schedule(&[0.5, 0.5], r.dates()).unwrap();
        let curve = cumulative_returns(&r, &sched).unwrap();
        assert!(close(curve[2].1, 0.030301, 1e-15));

        let z = returns(&[&[0.0; 4], &[0.0; 4]]);
        let flat = cumulative_returns(&z, &static_schedule(&[0.3, 0.7], z.dates()).unwrap()).unwrap();
        assert!(flat.iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn single_asset_pass_through() {
        let a = [0.02, -0.01, 0.03];
        let r = returns(&[&a, &[0.5, 0.5, 0.5]]);
        let curve = cumulative_returns(&r, &static_schedule(&[1.0, 0.0], r.dates()).unwrap()).unwrap();
        let expected = 1.02 * 0.99 * 1.03 - 1.0;
        assert!(close(curve[2].1, expected, 1e-15));
    }

    #[test]
    fn misaligned_schedule_rejected() {
        let r = returns(&[&[0.0; 4], &[0.0; 4]]);
        let sched = static_schedule(&[0.5, 0.5], &r.dates()[1..]).unwrap();
        assert!(matches!(cumulative_returns(&r, &sched), Err(Error::Alignment(_))));
    }

    #[test]
    fn works_in_single_precision() {
        let r: ReturnTable<f32> = ReturnTable::new(
            dates(4),
            vec!["A".into(), "B".into()],
            Matrix::from_rows(&[vec![0.01, 0.02], vec![-0.01, 0.0], vec![0.02, 0.01], vec![0.0, -0.02]]).unwrap(),
        )
        .unwrap();
        let corr = correlation(&r).unwrap();
        assert_eq!(corr.values()[(0, 0)], 1.0f32);
        assert!(corr.values()[(0, 1)].abs() <= 1.0);
    }
}
