//! Output artifacts: time-series and ECDF CSVs, the JSON run summary, the
//! schedule dump and the percentile table.
//!
//! Every float written is rounded to 9 significant digits so files diff
//! cleanly and are byte-stable for a fixed seed.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::engine::{RunConfig, SchedulerRun};
use crate::error::{Error, Result};
use crate::metrics::{after_burn_in, mean, percentile, Ecdf, LossSample};
use crate::scheduler::{SchedulerPolicy, Selection};

pub const TIMESERIES_SCHEMA: &str = "voi-formation/timeseries/1";
pub const ECDF_SCHEMA: &str = "voi-formation/ecdf/1";
pub const SCHEDULE_SCHEMA: &str = "voi-formation/schedule/1";
pub const SUMMARY_SCHEMA: &str = "voi-formation/summary/1";
pub const FORMATION_SCHEMA: &str = "voi-formation/formation/1";

/// ECDF points kept in the summary; the CSV files carry the full curve.
const SUMMARY_ECDF_POINTS: usize = 200;

/// `%.9g`-style formatting: 9 significant digits, trailing zeros dropped,
/// scientific notation outside `1e-5 ..= 1e9`.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// `x` rounded to 9 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_sig(x).parse().expect("formatted float parses")
    } else {
        x
    }
}

/// Rounds every non-integer number inside a JSON value.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(num) if num.is_f64() => {
            let x = num.as_f64().expect("f64 number");
            *v = serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Pretty JSON with rounded floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

impl Percentiles {
    pub fn of(values: &[f64]) -> Result<Self> {
        Ok(Percentiles {
            p50: percentile(values, 0.50)?,
            p90: percentile(values, 0.90)?,
            p99: percentile(values, 0.99)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub loss_true: f64,
    pub loss_est: f64,
}

/// Statistics of one scheduler over the batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchedulerSummary {
    pub scheduler: SchedulerPolicy,
    pub episodes: usize,
    /// Samples at or after the burn-in, pooled over episodes.
    pub samples: usize,
    pub mean_loss_true: f64,
    pub mean_loss_est: f64,
    pub percentiles_true: Percentiles,
    pub percentiles_est: Percentiles,
    /// Episode-averaged loss at every sampling instant (burn-in included).
    pub mean_curve: Vec<CurvePoint>,
    /// Thinned ECDF of the post-burn-in true loss as `[loss, probability]`.
    pub ecdf: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparisons {
    /// p99(MV) / p99(MAF) of the true loss.
    pub mv_over_maf_p99: Option<f64>,
    /// |p99(MEE) − p99(MV)| / min(p99(MEE), p99(MV)).
    pub mee_mv_p99_relative_difference: Option<f64>,
    /// mean(MAF|MEE|MV) − mean(Oracle) of the true loss, per scheduler.
    pub excess_over_oracle: Vec<(SchedulerPolicy, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema: &'static str,
    pub seed: u64,
    pub formation: String,
    pub config: RunConfig,
    pub units: Units,
    pub schedulers: Vec<SchedulerSummary>,
    pub comparisons: Comparisons,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Units {
    pub time: &'static str,
    pub position: &'static str,
    pub loss: &'static str,
}

const UNITS: Units = Units {
    time: "s",
    position: "m",
    loss: "dimensionless",
};

pub fn summarize_scheduler(run: &SchedulerRun, burn_in: f64) -> Result<SchedulerSummary> {
    let samples: Vec<LossSample> = run.samples().copied().collect();
    let truth = after_burn_in(&samples, burn_in, |s| s.loss_true);
    if truth.is_empty() {
        return Err(Error::EmptyAfterBurnIn { burn_in });
    }
    let est = after_burn_in(&samples, burn_in, |s| s.loss_estimated);
    Ok(SchedulerSummary {
        scheduler: run.policy,
        episodes: run.traces.len(),
        samples: truth.len(),
        mean_loss_true: mean(&truth),
        mean_loss_est: mean(&est),
        percentiles_true: Percentiles::of(&truth)?,
        percentiles_est: Percentiles::of(&est)?,
        mean_curve: mean_curve(run),
        ecdf: Ecdf::new(&truth)?.thinned(SUMMARY_ECDF_POINTS),
    })
}

/// Arithmetic mean over episodes at each sampling instant. All episodes of
/// a batch share the same sampling grid.
pub fn mean_curve(run: &SchedulerRun) -> Vec<CurvePoint> {
    let Some(first) = run.traces.first() else {
        return Vec::new();
    };
    let m = run.traces.len() as f64;
    (0..first.samples.len())
        .map(|k| {
            let (tr, es) = run
                .traces
                .iter()
                .map(|t| &t.samples[k])
                .fold((0.0, 0.0), |(a, b), s| (a + s.loss_true, b + s.loss_estimated));
            CurvePoint {
                t: first.samples[k].t,
                loss_true: tr / m,
                loss_est: es / m,
            }
        })
        .collect()
}

pub fn summarize(config: &RunConfig, formation: &str, runs: &[SchedulerRun]) -> Result<Summary> {
    let schedulers = runs
        .iter()
        .map(|r| summarize_scheduler(r, config.burn_in))
        .collect::<Result<Vec<_>>>()?;
    let find = |p: SchedulerPolicy| schedulers.iter().find(|s| s.scheduler == p);
    let p99 = |p| find(p).map(|s: &SchedulerSummary| s.percentiles_true.p99);

    let mv_over_maf_p99 = p99(SchedulerPolicy::Mv)
        .zip(p99(SchedulerPolicy::Maf))
        .map(|(mv, maf)| mv / maf);
    let mee_mv_p99_relative_difference = p99(SchedulerPolicy::Mee)
        .zip(p99(SchedulerPolicy::Mv))
        .map(|(a, b)| (a - b).abs() / a.min(b));
    let excess_over_oracle = match find(SchedulerPolicy::Oracle) {
        Some(oracle) => schedulers
            .iter()
            .filter(|s| s.scheduler != SchedulerPolicy::Oracle)
            .map(|s| (s.scheduler, s.mean_loss_true - oracle.mean_loss_true))
            .collect(),
        None => Vec::new(),
    };

    Ok(Summary {
        schema: SUMMARY_SCHEMA,
        seed: config.seed,
        formation: formation.to_string(),
        config: config.clone(),
        units: UNITS,
        schedulers,
        comparisons: Comparisons {
            mv_over_maf_p99,
            mee_mv_p99_relative_difference,
            excess_over_oracle,
        },
    })
}

fn provenance(config: &RunConfig, formation: &str) -> String {
    let e = &config.episode;
    format!(
        "# seed={} formation={} episodes={} duration_s={} slot_period_s={} dt_s={} k_e={} k_p={} k_f={} sigma0={} d0_m={} burn_in_s={}\n",
        config.seed,
        formation,
        config.episodes,
        fmt_sig(e.duration),
        fmt_sig(e.slot_period),
        fmt_sig(e.dt),
        fmt_sig(e.k_e),
        fmt_sig(e.k_p),
        fmt_sig(e.k_f),
        fmt_sig(e.sigma0),
        fmt_sig(e.d0),
        fmt_sig(config.burn_in),
    )
}

/// One row per (scheduler, episode, sampling instant). Losses are
/// dimensionless, time is in seconds, episodes are zero-based.
pub fn write_timeseries(
    mut w: impl Write,
    config: &RunConfig,
    formation: &str,
    runs: &[SchedulerRun],
) -> io::Result<()> {
    writeln!(w, "# schema={TIMESERIES_SCHEMA}")?;
    w.write_all(provenance(config, formation).as_bytes())?;
    writeln!(w, "scheduler,episode,t_s,loss_true,loss_est")?;
    for run in runs {
        for s in run.samples() {
            writeln!(
                w,
                "{},{},{},{},{}",
                run.policy,
                s.episode,
                fmt_sig(s.t),
                fmt_sig(s.loss_true),
                fmt_sig(s.loss_estimated)
            )?;
        }
    }
    w.flush()
}

/// Full step ECDF of the post-burn-in true loss.
pub fn write_ecdf(
    mut w: impl Write,
    config: &RunConfig,
    formation: &str,
    policy: SchedulerPolicy,
    ecdf: &Ecdf,
) -> io::Result<()> {
    writeln!(w, "# schema={ECDF_SCHEMA} scheduler={policy} samples={}", ecdf.count)?;
    w.write_all(provenance(config, formation).as_bytes())?;
    writeln!(w, "loss_true,probability")?;
    for &(x, p) in &ecdf.points {
        writeln!(w, "{},{}", fmt_sig(x), fmt_sig(p))?;
    }
    w.flush()
}

/// Schedule dump; agents are one-based, Oracle rows read `all`.
pub fn write_schedule(
    mut w: impl Write,
    policy: SchedulerPolicy,
    formation: &str,
    slot_period: f64,
    schedule: &[Selection],
) -> io::Result<()> {
    writeln!(w, "# schema={SCHEDULE_SCHEMA} scheduler={policy} formation={formation}")?;
    writeln!(w, "slot,t_s,agent")?;
    for (k, sel) in schedule.iter().enumerate() {
        let slot = k + 1;
        writeln!(w, "{slot},{},{sel}", fmt_sig(slot as f64 * slot_period))?;
    }
    w.flush()
}

/// Percentile table of the post-burn-in true loss, one line per scheduler.
pub fn percentile_table(summary: &Summary) -> String {
    let mut out = format!(
        "{:<8} {:>16} {:>16} {:>16} {:>16}\n",
        "sched", "p50", "p90", "p99", "mean"
    );
    for s in &summary.schedulers {
        let p = &s.percentiles_true;
        out.push_str(&format!(
            "{:<8} {:>16} {:>16} {:>16} {:>16}\n",
            s.scheduler.name(),
            fmt_sig(p.p50),
            fmt_sig(p.p90),
            fmt_sig(p.p99),
            fmt_sig(s.mean_loss_true)
        ));
    }
    out
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, fill: impl FnOnce(&mut io::BufWriter<fs::File>) -> io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(io_at(path))?;
    let mut w = io::BufWriter::new(file);
    fill(&mut w).map_err(io_at(path))
}

/// Writes `timeseries.csv`, `summary.json` and one `ecdf_<scheduler>.csv`
/// per scheduler into `dir`, creating it if needed.
pub fn write_run_outputs(
    dir: &Path,
    config: &RunConfig,
    formation: &str,
    runs: &[SchedulerRun],
) -> Result<(Summary, Vec<PathBuf>)> {
    let summary = summarize(config, formation, runs)?;
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let mut written = Vec::new();

    let path = dir.join("timeseries.csv");
    write_file(&path, |w| write_timeseries(w, config, formation, runs))?;
    written.push(path);

    for run in runs {
        let samples: Vec<LossSample> = run.samples().copied().collect();
        let ecdf = crate::metrics::ecdf(&samples, config.burn_in)?;
        let path = dir.join(format!("ecdf_{}.csv", run.policy));
        write_file(&path, |w| write_ecdf(w, config, formation, run.policy, &ecdf))?;
        written.push(path);
    }

    let path = dir.join("summary.json");
    let json = to_json(&summary)?;
    fs::write(&path, json).map_err(io_at(&path))?;
    written.push(path);
    Ok((summary, written))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(0.1), "0.1");
        assert_eq!(fmt_sig(-2.5), "-2.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig(123456.789012), "123456.789");
        assert_eq!(fmt_sig(873083.0623), "873083.062");
        assert_eq!(fmt_sig(9.9999999999), "10");
        assert_eq!(fmt_sig(1.234e-7), "1.234e-7");
        assert_eq!(fmt_sig(6.02214076e23), "6.02214076e23");
        assert_eq!(fmt_sig(123456789.4), "123456789");
        assert_eq!(fmt_sig(1234567894.0), "1.23456789e9");
        assert_eq!(fmt_sig(0.0001), "0.0001");
    }

    #[test]
    fn rounding_is_idempotent() {
        for x in [std::f64::consts::PI, 1e-300, 7.777777777777e12, -0.000123456789123] {
            let r = round_sig(x);
            assert_eq!(round_sig(r), r);
            assert!((r - x).abs() <= 5e-9 * x.abs());
        }
    }

    #[test]
    fn json_floats_are_rounded_integers_kept() {
        let mut v = serde_json::json!({"a": 1.0 / 3.0, "b": [2, 0.1 + 0.2], "c": 7});
        round_json(&mut v);
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"{"a":0.333333333,"b":[2,0.3],"c":7}"#
        );
    }

    #[test]
    fn schedule_csv_layout() {
        let mut buf = Vec::new();
        let sched = [Selection::Agent(0), Selection::Agent(7), Selection::All];
        write_schedule(&mut buf, SchedulerPolicy::Maf, "symmetric", 0.1, &sched).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().skip(2).collect();
        assert_eq!(rows, ["1,0.1,1", "2,0.2,8", "3,0.3,all"]);
    }
}
