//! Stability, service and interference indices, and comparison tables.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulator::{EpisodeLog, PassengerClass};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("stability indices need at least two departures, got {0}")]
    TooFewStages(usize),
    #[error("no runs to aggregate")]
    NoRuns,
    #[error("cannot compare runs on different lines ({0} vs {1})")]
    MismatchedConfigs(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub sum_sigma: f64,
    /// First stability index: mean of the per-departure `σ_H`.
    pub fsi: f64,
    /// Second stability index: sample standard deviation of the per-departure `σ_H`.
    pub ssi: f64,
    pub max_sigma: f64,
    pub min_sigma: f64,
    pub n_t: usize,
    pub bunching: bool,
}

pub fn stability_from_sigmas(sigmas: &[f64], bunching: bool) -> Result<StabilityReport, MetricsError> {
    let n = sigmas.len();
    if n < 2 {
        return Err(MetricsError::TooFewStages(n));
    }
    let sum: f64 = sigmas.iter().sum();
    let fsi = sum / n as f64;
    let ssi = (sigmas.iter().map(|s| (s - fsi).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    Ok(StabilityReport {
        sum_sigma: sum,
        fsi,
        ssi,
        max_sigma: sigmas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_sigma: sigmas.iter().copied().fold(f64::INFINITY, f64::min),
        n_t: n,
        bunching,
    })
}

pub fn stability(log: &EpisodeLog) -> Result<StabilityReport, MetricsError> {
    let sigmas: Vec<f64> = log.stages.iter().map(|s| s.sigma_h_s).collect();
    stability_from_sigmas(&sigmas, log.bunching)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation over the class.
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub count: usize,
    pub waiting: Option<MeanStd>,
    pub riding: Option<MeanStd>,
    pub travel: Option<MeanStd>,
}

/// Time attributes of the passengers who alighted (P1), are onboard at the
/// horizon (P2) and never boarded (P3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceReport {
    pub p1: ClassStats,
    pub p2: ClassStats,
    pub p3: ClassStats,
}

impl ServiceReport {
    pub fn class(&self, class: PassengerClass) -> &ClassStats {
        match class {
            PassengerClass::Alighted => &self.p1,
            PassengerClass::Onboard => &self.p2,
            PassengerClass::Waiting => &self.p3,
        }
    }

    pub fn total(&self) -> usize {
        self.p1.count + self.p2.count + self.p3.count
    }
}

pub fn service(log: &EpisodeLog, horizon_s: f64) -> ServiceReport {
    let (mut w1, mut r1, mut t1) = (Vec::new(), Vec::new(), Vec::new());
    let (mut w2, mut r2) = (Vec::new(), Vec::new());
    let mut w3 = Vec::new();
    for p in &log.passengers {
        match (p.board_s, p.alight_s) {
            (Some(b), Some(a)) => {
                w1.push(b - p.arrive_s);
                r1.push(a - b);
                t1.push(a - p.arrive_s);
            }
            (Some(b), None) => {
                w2.push(b - p.arrive_s);
                r2.push(horizon_s - b);
            }
            _ => w3.push(horizon_s - p.arrive_s),
        }
    }
    ServiceReport {
        p1: ClassStats { count: w1.len(), waiting: MeanStd::of(&w1), riding: MeanStd::of(&r1), travel: MeanStd::of(&t1) },
        p2: ClassStats { count: w2.len(), waiting: MeanStd::of(&w2), riding: MeanStd::of(&r2), travel: None },
        p3: ClassStats { count: w3.len(), waiting: MeanStd::of(&w3), riding: None, travel: None },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceReport {
    /// Total holding time.
    pub a_sigma: f64,
    /// Holding time with idle doors.
    pub c_a: f64,
    pub a_bar: f64,
    pub sigma_a: f64,
    pub n_m: usize,
}

pub fn interference_from_holds(holds: &[f64], idle: &[f64]) -> InterferenceReport {
    let n = holds.len();
    let a_sigma: f64 = holds.iter().sum();
    let a_bar = if n > 0 { a_sigma / n as f64 } else { 0.0 };
    let sigma_a = if n > 1 {
        (holds.iter().map(|a| (a - a_bar).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    InterferenceReport { a_sigma, c_a: idle.iter().sum(), a_bar, sigma_a, n_m: n }
}

/// Holding statistics over the control stages of the log.
pub fn interference(log: &EpisodeLog) -> InterferenceReport {
    let (holds, idle): (Vec<f64>, Vec<f64>) = log.controlled_stages().map(|s| (s.hold_s, s.idle_hold_s)).unzip();
    interference_from_holds(&holds, &idle)
}

/// All reports of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub stability: StabilityReport,
    pub service: ServiceReport,
    pub interference: InterferenceReport,
}

impl RunReport {
    pub fn from_log(log: &EpisodeLog) -> Result<Self, MetricsError> {
        Ok(Self {
            seed: log.seed,
            stability: stability(log)?,
            service: service(log, log.horizon_s),
            interference: interference(log),
        })
    }
}

/// Mean of each index over the runs of one scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: String,
    pub line: String,
    pub fingerprint: String,
    pub runs: usize,
    pub bunched_runs: usize,
    pub stability: StabilityReport,
    pub service: ServiceReport,
    pub interference: InterferenceReport,
    /// Per-run first stability index, for spread estimates.
    pub fsi_runs: Vec<f64>,
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn mean_opt(values: impl Iterator<Item = Option<MeanStd>>) -> Option<MeanStd> {
    let present: Vec<MeanStd> = values.flatten().collect();
    if present.is_empty() {
        return None;
    }
    Some(MeanStd { mean: mean_of(present.iter().map(|m| m.mean)), std: mean_of(present.iter().map(|m| m.std)) })
}

fn mean_class<'a>(classes: impl Iterator<Item = &'a ClassStats> + Clone) -> ClassStats {
    let n = classes.clone().count().max(1);
    ClassStats {
        count: (classes.clone().map(|c| c.count).sum::<usize>() as f64 / n as f64).round() as usize,
        waiting: mean_opt(classes.clone().map(|c| c.waiting)),
        riding: mean_opt(classes.clone().map(|c| c.riding)),
        travel: mean_opt(classes.map(|c| c.travel)),
    }
}

impl SchemeSummary {
    pub fn from_runs(
        scheme: impl Into<String>,
        line: impl Into<String>,
        fingerprint: impl Into<String>,
        runs: &[RunReport],
    ) -> Result<Self, MetricsError> {
        if runs.is_empty() {
            return Err(MetricsError::NoRuns);
        }
        let st = |f: fn(&StabilityReport) -> f64| mean_of(runs.iter().map(|r| f(&r.stability)));
        let it = |f: fn(&InterferenceReport) -> f64| mean_of(runs.iter().map(|r| f(&r.interference)));
        let bunched_runs = runs.iter().filter(|r| r.stability.bunching).count();
        Ok(Self {
            scheme: scheme.into(),
            line: line.into(),
            fingerprint: fingerprint.into(),
            runs: runs.len(),
            bunched_runs,
            stability: StabilityReport {
                sum_sigma: st(|s| s.sum_sigma),
                fsi: st(|s| s.fsi),
                ssi: st(|s| s.ssi),
                max_sigma: st(|s| s.max_sigma),
                min_sigma: st(|s| s.min_sigma),
                n_t: mean_of(runs.iter().map(|r| r.stability.n_t as f64)).round() as usize,
                bunching: bunched_runs > 0,
            },
            service: ServiceReport {
                p1: mean_class(runs.iter().map(|r| &r.service.p1)),
                p2: mean_class(runs.iter().map(|r| &r.service.p2)),
                p3: mean_class(runs.iter().map(|r| &r.service.p3)),
            },
            interference: InterferenceReport {
                a_sigma: it(|i| i.a_sigma),
                c_a: it(|i| i.c_a),
                a_bar: it(|i| i.a_bar),
                sigma_a: it(|i| i.sigma_a),
                n_m: mean_of(runs.iter().map(|r| r.interference.n_m as f64)).round() as usize,
            },
            fsi_runs: runs.iter().map(|r| r.stability.fsi).collect(),
        })
    }

    /// Standard error of the mean first stability index.
    pub fn fsi_standard_error(&self) -> f64 {
        let n = self.fsi_runs.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.fsi_runs.iter().sum::<f64>() / n as f64;
        let var = self.fsi_runs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }
}

/// Schemes evaluated on the same line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<SchemeSummary>,
}

pub const STABILITY_TABLE_HEADER: [&str; 16] = [
    "scheme",
    "line",
    "runs",
    "n_T",
    "sum_sigma_H",
    "fsi",
    "ssi",
    "max_sigma_H",
    "min_sigma_H",
    "bunching",
    "bunched_runs",
    "a_sigma",
    "c_a",
    "a_bar",
    "sigma_a",
    "n_M",
];

pub const SERVICE_TABLE_HEADER: [&str; 10] = [
    "scheme",
    "class",
    "n",
    "waiting_mean_s",
    "waiting_std_s",
    "riding_mean_s",
    "riding_std_s",
    "travel_mean_s",
    "travel_std_s",
    "line",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

impl Comparison {
    pub fn new(rows: Vec<SchemeSummary>) -> Result<Self, MetricsError> {
        if let Some(first) = rows.first() {
            if let Some(other) = rows.iter().find(|r| r.fingerprint != first.fingerprint) {
                return Err(MetricsError::MismatchedConfigs(
                    format!("{} on {} [{}]", first.scheme, first.line, first.fingerprint),
                    format!("{} on {} [{}]", other.scheme, other.line, other.fingerprint),
                ));
            }
        }
        Ok(Self { rows })
    }

    /// One row per scheme: stability and interference indices.
    pub fn write_stability_table(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(STABILITY_TABLE_HEADER)?;
        for r in &self.rows {
            let s = &r.stability;
            let i = &r.interference;
            w.write_record([
                r.scheme.clone(),
                r.line.clone(),
                r.runs.to_string(),
                s.n_t.to_string(),
                format!("{:.2}", s.sum_sigma),
                format!("{:.2}", s.fsi),
                format!("{:.2}", s.ssi),
                format!("{:.2}", s.max_sigma),
                format!("{:.2}", s.min_sigma),
                if s.bunching { "Yes" } else { "No" }.to_string(),
                r.bunched_runs.to_string(),
                format!("{:.2}", i.a_sigma),
                format!("{:.2}", i.c_a),
                format!("{:.2}", i.a_bar),
                format!("{:.2}", i.sigma_a),
                i.n_m.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Three rows per scheme (P1, P2, P3): passenger time attributes.
    pub fn write_service_table(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SERVICE_TABLE_HEADER)?;
        for r in &self.rows {
            for class in [PassengerClass::Alighted, PassengerClass::Onboard, PassengerClass::Waiting] {
                let c = r.service.class(class);
                w.write_record([
                    r.scheme.clone(),
                    class.label().to_string(),
                    c.count.to_string(),
                    cell(c.waiting.map(|m| m.mean)),
                    cell(c.waiting.map(|m| m.std)),
                    cell(c.riding.map(|m| m.mean)),
                    cell(c.riding.map(|m| m.std)),
                    cell(c.travel.map(|m| m.mean)),
                    cell(c.travel.map(|m| m.std)),
                    r.line.clone(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
