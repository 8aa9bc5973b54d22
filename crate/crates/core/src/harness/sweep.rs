use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::fmt_num;
use crate::error::{Error, Result};
use crate::params::EngineParams;
use crate::reduced::{lifting_condition_qutrit, work_rate_qutrit, RateMode};
use crate::thermo::carnot_row;

use super::{simulate, sweepable_params, to_json_pretty, write_file, ScenarioConfig, WORKERS_ENV};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub param: String,
    pub grid: Vec<f64>,
}

/// Parses `a,b,c` or `start:stop:count` (inclusive, evenly spaced).
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |reason: String| Error::invalid("grid", reason);
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| bad(format!("`{}` is not a number", t.trim())))
    };
    let grid = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts[..] else {
            return Err(bad("range form is start:stop:count".into()));
        };
        let (start, stop) = (num(start)?, num(stop)?);
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| bad(format!("`{}` is not a point count", count.trim())))?;
        match count {
            0 => Vec::new(),
            1 => vec![start],
            n => (0..n)
                .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    } else {
        s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect::<Result<_>>()?
    };
    if grid.is_empty() {
        return Err(bad("grid is empty".into()));
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    /// Columns after the swept value, in header order. NaN for failed points.
    pub columns: Vec<f64>,
    pub sim_drift: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub param: String,
    pub header: Vec<String>,
    pub points: Vec<SweepPoint>,
}

impl SweepOutcome {
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        let with_sim = self.header.last().is_some_and(|h| h == "sim_drift");
        for p in &self.points {
            let mut fields = vec![fmt_num(p.value)];
            fields.extend(p.columns.iter().map(|&x| fmt_num(x)));
            if with_sim {
                fields.push(fmt_num(p.sim_drift.unwrap_or(f64::NAN)));
            }
            s.push_str(&fields.join(","));
            s.push('\n');
        }
        s
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }
}

fn header(params: &EngineParams, param: &str, with_sim: bool) -> Vec<String> {
    let first = if param == "th" { "Th" } else { param };
    let rest: &[&str] = match params {
        EngineParams::TwoQubit(_) => &["bias_gap", "work_rate", "eta_ideal", "eta_carnot"],
        EngineParams::Qutrit(_) => &["work_rate", "lifting_general", "lifting_equal_rates"],
    };
    let mut h = vec![first.to_string()];
    h.extend(rest.iter().map(|s| s.to_string()));
    if with_sim {
        h.push("sim_drift".into());
    }
    h
}

fn closed_form_columns(params: &EngineParams) -> Result<Vec<f64>> {
    params.validate()?;
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    match params {
        EngineParams::TwoQubit(p) => {
            let r = carnot_row(p)?;
            Ok(vec![r.bias_gap, r.work_rate, r.eta_ideal, r.eta_carnot])
        }
        EngineParams::Qutrit(q) => {
            let w = work_rate_qutrit(q, RateMode::General)?.rate;
            let l = lifting_condition_qutrit(q)?;
            Ok(vec![w, flag(l.general), l.equal_rates_form.map_or(f64::NAN, flag)])
        }
    }
}

fn evaluate(cfg: &ScenarioConfig, spec: &SweepSpec, value: f64, ncols: usize, with_sim: bool) -> SweepPoint {
    let run = || -> Result<(Vec<f64>, Option<f64>)> {
        let point = cfg.with_param(&spec.param, value)?;
        let cols = closed_form_columns(&point.params)?;
        let drift = if with_sim {
            let out = simulate(&point)?;
            let fit = out
                .summary
                .fit
                .ok_or_else(|| Error::InsufficientData("drift fit unavailable".into()))?;
            Some(fit.drift)
        } else {
            None
        };
        Ok((cols, drift))
    };
    match run() {
        Ok((columns, sim_drift)) => SweepPoint {
            value,
            columns,
            sim_drift,
            error: None,
        },
        Err(e) => {
            log::warn!("sweep point {}={value}: {e}", spec.param);
            SweepPoint {
                value,
                columns: vec![f64::NAN; ncols],
                sim_drift: None,
                error: Some(e.to_string()),
            }
        }
    }
}

fn worker_count() -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .map_or(available, |n| n.min(available))
}

/// Evaluates every grid point. Per-point failures are recorded, not raised.
pub fn sweep(cfg: &ScenarioConfig, spec: &SweepSpec, with_sim: bool) -> Result<SweepOutcome> {
    cfg.validate()?;
    if !sweepable_params(cfg.kind()).contains(&spec.param.as_str()) {
        // Produces the error naming the accepted parameters.
        cfg.with_param(&spec.param, 0.0)?;
    }
    if spec.grid.is_empty() {
        return Err(Error::invalid("grid", "grid is empty"));
    }
    let header = header(&cfg.params, &spec.param, with_sim);
    let ncols = header.len() - 1 - usize::from(with_sim);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let points = pool.install(|| {
        spec.grid
            .par_iter()
            .map(|&v| evaluate(cfg, spec, v, ncols, with_sim))
            .collect()
    });
    Ok(SweepOutcome {
        param: spec.param.clone(),
        header,
        points,
    })
}

/// `sweep` command: writes `<prefix>_sweep.csv` and `<prefix>_sweep.json`.
pub fn run_sweep(cfg: &ScenarioConfig, spec: &SweepSpec, with_sim: bool, out_dir: &Path) -> Result<SweepOutcome> {
    let outcome = sweep(cfg, spec, with_sim)?;
    let prefix = &cfg.output.prefix;
    write_file(out_dir, &format!("{prefix}_sweep.csv"), &outcome.to_csv())?;
    write_file(out_dir, &format!("{prefix}_sweep.json"), &to_json_pretty(&outcome)?)?;
    Ok(outcome)
}
