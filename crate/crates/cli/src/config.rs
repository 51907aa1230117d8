//! Report settings resolved from defaults, an optional `key = value` file and
//! command-line flags, in that order of precedence.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use eop_core::io::{read_key_values, KeyValues};
use eop_core::report::{Aggregation, Metric};

use crate::GlobalArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Raw,
    BestBehavioral,
    MinMax,
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "raw" => Ok(MetricKind::Raw),
            "best-behavioral" => Ok(MetricKind::BestBehavioral),
            "min-max" => Ok(MetricKind::MinMax),
            other => Err(format!("metric must be raw, best-behavioral or min-max, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub runs: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub metric: Metric,
    pub aggregation: Aggregation,
    pub budget_max: Option<usize>,
    pub strategies: Vec<String>,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
}

const KEYS: [&str; 10] = [
    "runs",
    "scores",
    "metric",
    "offset",
    "v_best",
    "aggregation",
    "budget_max",
    "strategies",
    "out_dir",
    "seed",
];

fn parse<T: FromStr>(kv: &KeyValues, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    Ok(kv.parse(key)?)
}

impl ReportConfig {
    pub fn resolve(global: &GlobalArgs) -> Result<Self> {
        let kv = match &global.config {
            Some(path) => read_key_values(path).with_context(|| path.display().to_string())?,
            None => KeyValues::default(),
        };
        if let Some(key) = kv.keys().find(|k| !KEYS.contains(k)) {
            bail!(
                "{}: line {}: unknown report key `{key}`",
                global.config.as_deref().unwrap_or(Path::new("")).display(),
                kv.line_of(key).unwrap_or(0)
            );
        }
        let base = global.config.as_deref().and_then(Path::parent).unwrap_or(Path::new(""));
        let path = |key: &str| kv.get(key).map(|p| base.join(p));

        let kind = match global.metric {
            Some(k) => k,
            None => parse(&kv, "metric")?.unwrap_or(MetricKind::Raw),
        };
        let offset = global.offset.or(parse(&kv, "offset")?);
        let v_best = global.v_best.or(parse(&kv, "v_best")?);
        let metric = match kind {
            MetricKind::Raw => Metric::Raw,
            MetricKind::MinMax => Metric::MinMax,
            MetricKind::BestBehavioral => Metric::BestBehavioral {
                v_best: v_best.context("metric best-behavioral needs --v-best")?,
                offset: offset.unwrap_or(0.0),
            },
        };
        let strategies = kv.parse_list::<String>("strategies")?.unwrap_or_default();
        let cfg = Self {
            runs: path("runs"),
            scores: path("scores"),
            metric,
            aggregation: match global.aggregation {
                Some(a) => a,
                None => parse(&kv, "aggregation")?.unwrap_or_default(),
            },
            budget_max: global.budget_max.or(parse(&kv, "budget_max")?),
            strategies,
            out_dir: path("out_dir"),
            seed: global.seed.or(parse(&kv, "seed")?).unwrap_or(0),
        };
        if cfg.budget_max == Some(0) {
            bail!("budget-max must be positive");
        }
        for p in [&cfg.runs, &cfg.scores].into_iter().flatten() {
            if !p.exists() {
                bail!("{}: file does not exist", p.display());
            }
        }
        Ok(cfg)
    }

    /// `explicit` if given, otherwise the configured path for `what`.
    pub fn input(&self, explicit: Option<PathBuf>, what: &str) -> Result<PathBuf> {
        let configured = match what {
            "runs" => self.runs.clone(),
            _ => self.scores.clone(),
        };
        explicit
            .or(configured)
            .with_context(|| format!("no {what} file given; pass it or set `{what}` in --config"))
    }

    pub fn output_dir(&self, explicit: Option<PathBuf>) -> Result<PathBuf> {
        explicit
            .or_else(|| self.out_dir.clone())
            .context("no output directory given; pass --out-dir or set `out_dir` in --config")
    }
}
