//! Deterministic synthetic close prices with a sector factor structure.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::market_data::PriceTable;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Sector id of each asset; the asset count is its length.
    pub sectors: Vec<usize>,
    /// Mean simple return per day, one per asset.
    pub daily_drift: Vec<f64>,
    pub daily_vol: f64,
    /// Share of each asset's variance explained by its sector factor.
    pub sector_share: f64,
    /// `(row, asset)` cells left empty; never row 0.
    pub missing: Vec<(usize, usize)>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    /// Ten assets over 2017-11-17..=2020-02-27; asset 0 drifts +0.3% a day,
    /// the rest have zero drift.
    fn default() -> Self {
        let mut daily_drift = vec![0.0; 10];
        daily_drift[0] = 0.003;
        Self {
            start: NaiveDate::from_ymd_opt(2017, 11, 17).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2020, 2, 27).expect("valid date"),
            sectors: vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 2],
            daily_drift,
            daily_vol: 0.01,
            sector_share: 0.4,
            missing: vec![(41, 3), (202, 7), (203, 7), (455, 5)],
            seed: 20_191_129,
        }
    }
}

/// Weekdays in `start..=end`.
pub fn business_days(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    start
        .iter_days()
        .take_while(|d| *d <= end)
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

/// Rounded to four decimals, as a price feed would quote.
fn quote(p: f64) -> f64 {
    (p * 1e4).round() / 1e4
}

pub fn generate(cfg: &SyntheticConfig) -> Result<PriceTable<f64>> {
    let n = cfg.sectors.len();
    if cfg.daily_drift.len() != n {
        return Err(Error::Dimension("one drift per asset required".into()));
    }
    if !(0.0..=1.0).contains(&cfg.sector_share) || !(cfg.daily_vol >= 0.0) {
        return Err(Error::Invalid("sector share must lie in [0, 1] and vol be non-negative".into()));
    }
    let dates = business_days(cfg.start, cfg.end);
    if cfg.missing.iter().any(|&(r, a)| r == 0 || r >= dates.len() || a >= n) {
        return Err(Error::Invalid("missing cells must be inside the table and after row 0".into()));
    }
    let n_sectors = cfg.sectors.iter().max().map_or(0, |m| m + 1);
    let load = cfg.sector_share.sqrt();
    let idio = (1.0 - cfg.sector_share).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut price = vec![100.0; n];
    let mut rows = Vec::with_capacity(dates.len());
    rows.push(price.iter().map(|&p| Some(quote(p))).collect::<Vec<_>>());
    for _ in 1..dates.len() {
        let factors: Vec<f64> = (0..n_sectors).map(|_| StandardNormal.sample(&mut rng)).collect();
        for (i, p) in price.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            let shock = load * factors[cfg.sectors[i]] + idio * z;
            *p *= 1.0 + cfg.daily_drift[i] + cfg.daily_vol * shock;
        }
        rows.push(price.iter().map(|&p| Some(quote(p))).collect());
    }
    for &(r, a) in &cfg.missing {
        rows[r][a] = None;
    }
    let tickers = (0..n).map(|i| format!("SYN{i}")).collect();
    PriceTable::new(dates, tickers, rows)
}
