use std::path::{Path, PathBuf};

use plab_core::analytics::{covariance, simple_returns, volatility};
use plab_core::backtest::{compare_methods, run_backtest, static_schedule, ReportLabel};
use plab_core::market_data::{forward_fill, load_prices, split_by_date, write_prices};
use plab_core::mvp::{efficient_frontier, equal_weight, max_sharpe_portfolio, min_risk_portfolio, sample_portfolios};
use plab_core::rl::{evaluate, load_model, save_model, train, write_training_log};
use plab_core::synthetic::{generate, SyntheticConfig};
use plab_core::{hrp, BacktestReport, Method, Phase, QNetwork, ReturnTable, SampleOptions, WeightSchedule};

use crate::export::{
    curves_csv, frontier_csv, read_reports, weight_bars_csv, write_json, write_text, DatedWeights, ScheduleEntry,
    WeightsEntry,
};
use crate::{CliError, RunConfig};

pub const MODEL_FILE: &str = "rl_model.txt";
pub const REPORT_FILES: [&str; 3] = ["mvp_report.json", "hrp_report.json", "rl_report.json"];

/// Cleaned training and test returns.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: ReturnTable,
    pub test: ReturnTable,
}

impl Dataset {
    pub fn load(cfg: &RunConfig) -> Result<Self, CliError> {
        let prices = forward_fill(&load_prices::<f64>(&cfg.data).map_err(|e| data_error(&cfg.data, e))?)?;
        let (train, test) = split_by_date(&prices, cfg.split()?)?;
        Ok(Self {
            train: simple_returns(&train)?,
            test: simple_returns(&test)?,
        })
    }

    pub fn tickers(&self) -> &[String] {
        self.train.tickers()
    }

    fn phases(&self) -> [(Phase, &ReturnTable); 2] {
        [(Phase::Train, &self.train), (Phase::Test, &self.test)]
    }
}

fn data_error(path: &Path, e: plab_core::Error) -> CliError {
    CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn static_reports(
    cfg: &RunConfig,
    data: &Dataset,
    method: Method,
    weights: &[f64],
) -> Result<Vec<BacktestReport>, CliError> {
    data.phases()
        .into_iter()
        .map(|(phase, returns)| {
            let schedule = static_schedule(weights, returns.dates())?;
            let label = ReportLabel {
                dataset: &cfg.dataset,
                method,
                phase,
            };
            Ok(run_backtest(label, &schedule, returns, cfg.risk_free, cfg.trading_days)?)
        })
        .collect()
}

fn entry(method: Method, tickers: &[String], weights: &[f64]) -> WeightsEntry {
    WeightsEntry {
        method: method.to_string(),
        tickers: tickers.to_vec(),
        weights: weights.to_vec(),
    }
}

pub fn cmd_mvp(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let data = Dataset::load(cfg)?;
    let stats = volatility(&data.train, cfg.trading_days)?;
    let cov = covariance(&data.train)?;
    let opts = SampleOptions {
        count: cfg.mc_samples,
        risk_free: cfg.risk_free,
        trading_days: cfg.trading_days,
        seed: cfg.seed,
    };
    let cloud = sample_portfolios(&stats.annual_mean, &cov, &opts)?;
    let best = max_sharpe_portfolio(&cloud)?;
    let safest = min_risk_portfolio(&cloud)?;
    let envelope = efficient_frontier(&cloud, cfg.frontier_bins)?;

    let mut reports = static_reports(cfg, &data, Method::Mvp, &best.weights)?;
    reports.extend(static_reports(cfg, &data, Method::MvpMinRisk, &safest.weights)?);
    let weights = vec![
        entry(Method::Mvp, data.tickers(), &best.weights),
        entry(Method::MvpMinRisk, data.tickers(), &safest.weights),
    ];
    let out = &cfg.output_dir;
    Ok(vec![
        write_text(&out.join("mvp_frontier.csv"), &frontier_csv(&cloud.points))?,
        write_text(&out.join("mvp_efficient_frontier.csv"), &frontier_csv(&envelope))?,
        write_json(&out.join("mvp_weights.json"), &weights)?,
        write_json(&out.join("mvp_report.json"), &reports)?,
    ])
}

pub fn cmd_hrp(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let data = Dataset::load(cfg)?;
    let alloc = hrp::hrp_allocate(&data.train)?;
    let weights = alloc.portfolio.weights();
    let reports = static_reports(cfg, &data, Method::Hrp, weights)?;
    let out = &cfg.output_dir;
    Ok(vec![
        write_json(&out.join("hrp_weights.json"), &[entry(Method::Hrp, data.tickers(), weights)])?,
        write_json(&out.join("hrp_linkage.json"), &alloc.tree.merges)?,
        write_text(
            &out.join("hrp_weight_bars.csv"),
            &weight_bars_csv(data.tickers(), weights, alloc.order.as_slice()),
        )?,
        write_json(&out.join("hrp_report.json"), &reports)?,
    ])
}

pub fn cmd_rl_train(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let data = Dataset::load(cfg)?;
    let hp = cfg.hyperparams()?;
    let (net, log) = train(&data.train, &hp)?;
    let out = &cfg.output_dir;
    let model_path = out.join(MODEL_FILE);
    let mut log_csv = Vec::new();
    write_training_log(&log, &mut log_csv)?;
    let mut written = vec![write_text(&out.join("rl_training_log.csv"), &String::from_utf8_lossy(&log_csv))?];
    save_model(&net, &model_path).map_err(|e| data_error(&model_path, e))?;
    written.push(model_path);
    written.extend(rl_outputs(cfg, &data, &net)?);
    Ok(written)
}

pub fn cmd_rl_eval(cfg: &RunConfig, model: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let data = Dataset::load(cfg)?;
    let path = model.map_or_else(|| cfg.output_dir.join(MODEL_FILE), Path::to_path_buf);
    let net: QNetwork = load_model(&path).map_err(|e| data_error(&path, e))?;
    let expected = plab_core::rl::qnet_init(data.tickers().len(), &cfg.hyperparams()?).dims();
    if net.dims() != expected {
        return Err(CliError::Format {
            path,
            message: format!("model layers {:?} do not match this config ({expected:?})", net.dims()),
        });
    }
    rl_outputs(cfg, &data, &net)
}

fn schedule_entry(tickers: &[String], schedule: &WeightSchedule) -> ScheduleEntry {
    ScheduleEntry {
        method: Method::Rl.to_string(),
        phase: Phase::Test.to_string(),
        tickers: tickers.to_vec(),
        schedule: schedule
            .dates()
            .iter()
            .enumerate()
            .map(|(t, &date)| DatedWeights {
                date,
                weights: schedule.row(t).to_vec(),
            })
            .collect(),
    }
}

fn rl_outputs(cfg: &RunConfig, data: &Dataset, net: &QNetwork) -> Result<Vec<PathBuf>, CliError> {
    let hp = cfg.hyperparams()?;
    let mut reports = Vec::new();
    let mut test_schedule = None;
    for (phase, returns) in data.phases() {
        let ev = evaluate(net, returns, &hp)?;
        let label = ReportLabel {
            dataset: &cfg.dataset,
            method: Method::Rl,
            phase,
        };
        reports.push(run_backtest(label, &ev.schedule, returns, cfg.risk_free, cfg.trading_days)?);
        if phase == Phase::Test {
            test_schedule = Some(ev.schedule);
        }
    }
    let schedule = test_schedule.expect("test phase evaluated");
    let equal = equal_weight::<f64>(data.tickers())?;
    let equal_test = &static_reports(cfg, data, Method::Equal, equal.weights())?[1];
    let rl_test = &reports[1];
    let curve = |r: &BacktestReport| r.curve.iter().map(|&(_, v)| v).collect::<Vec<_>>();
    let out = &cfg.output_dir;
    Ok(vec![
        write_json(&out.join("rl_weights.json"), &schedule_entry(data.tickers(), &schedule))?,
        write_json(&out.join("rl_report.json"), &reports)?,
        write_text(
            &out.join("rl_curve.csv"),
            &curves_csv(&["RL", "EQUAL"], data.test.dates(), &[curve(rl_test), curve(equal_test)]),
        )?,
    ])
}

/// Reads whichever method reports exist in the output directory, adds the
/// equal-weight baseline and writes the comparison table.
pub fn cmd_compare(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let data = Dataset::load(cfg)?;
    let out = &cfg.output_dir;
    let equal = equal_weight::<f64>(data.tickers())?;
    let equal_reports = static_reports(cfg, &data, Method::Equal, equal.weights())?;
    let mut all = equal_reports.clone();
    for name in REPORT_FILES {
        let path = out.join(name);
        if path.exists() {
            all.extend(read_reports(&path)?.into_iter().filter(|r| r.dataset == cfg.dataset));
        }
    }
    let table = compare_methods(&all)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    Ok(vec![
        write_json(&out.join("equal_weights.json"), &[entry(Method::Equal, data.tickers(), equal.weights())])?,
        write_json(&out.join("equal_report.json"), &equal_reports)?,
        write_text(&out.join("comparison.csv"), &String::from_utf8_lossy(&csv))?,
    ])
}

pub fn cmd_synth(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    let table = generate(&SyntheticConfig::default())?;
    let mut csv = Vec::new();
    write_prices(&table, &mut csv)?;
    Ok(vec![write_text(path, &String::from_utf8_lossy(&csv))?])
}
