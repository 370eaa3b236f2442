//! Experiment configuration: one TOML file plus command-line overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use diffdata::attributes::{Attribute, AttributeConfig, Hardship};
use diffdata::dataset::CityConfig;
use diffdata::metrics::Metric;
use diffdata::obfuscate::{FakeMix, DEFAULT_NOISE_THRESHOLD};
use diffdata::recommend::MfHyper;
use diffdata::Seed;
use serde::{Deserialize, Serialize};

pub const PIPELINES: [&str; 14] = [
    "ingest",
    "split",
    "diff",
    "zscore",
    "baseline",
    "stability-users",
    "stability-data",
    "suppress",
    "fake",
    "replace",
    "reduce",
    "synth",
    "report",
    "stability",
];

pub const DATASET_KINDS: [&str; 5] = ["checkins", "movielens", "ratings", "synthetic", "city"];
pub const RECOMMENDERS: [&str; 2] = ["cosine", "mf"];

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Option<String>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub dataset: DatasetSection,
    pub attribute: AttributeSection,
    pub recommender: RecommenderSection,
    pub metric: MetricSection,
    pub baseline: BaselineSection,
    pub stability: StabilitySection,
    pub suppress: SuppressSection,
    pub fake: FakeSection,
    pub replace: ReplaceSection,
    pub reduce: ReduceSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub kind: String,
    pub path: Option<PathBuf>,
    /// Per-user share of points held out for testing.
    pub test_fraction: f64,
    pub synthetic: SyntheticSection,
    pub city: CityConfig,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            kind: "city".into(),
            path: None,
            test_fraction: 0.2,
            synthetic: SyntheticSection::default(),
            city: CityConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub n_users: usize,
    pub n_items: usize,
    pub n_factors: usize,
    pub n_ratings: usize,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        SyntheticSection {
            n_users: 600,
            n_items: 400,
            n_factors: 20,
            n_ratings: 100_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributeSection {
    pub name: String,
    /// Clusters for k-means hardship.
    pub k: usize,
    pub min_frac: f64,
    pub max_frac: f64,
    pub chunks: usize,
    pub min_points: usize,
}

impl Default for AttributeSection {
    fn default() -> Self {
        AttributeSection {
            name: "hardship-density".into(),
            k: 2,
            min_frac: 0.10,
            max_frac: 0.15,
            chunks: 10,
            min_points: diffdata::attributes::DEFAULT_MIN_POINTS,
        }
    }
}

impl AttributeSection {
    pub fn attribute(&self) -> Result<Attribute> {
        let base = Attribute::from_str(&self.name)?;
        Ok(match base {
            Attribute::HardshipKmeans { .. } => Attribute::HardshipKmeans { k: self.k },
            Attribute::Time { .. } => Attribute::Time {
                min_frac: self.min_frac,
                max_frac: self.max_frac,
            },
            other => other,
        })
    }

    pub fn config(&self, seed: Seed) -> Result<AttributeConfig> {
        let mut cfg = AttributeConfig::new(self.attribute()?, seed.derive("attribute"));
        cfg.n_chunks = self.chunks;
        cfg.min_points = self.min_points;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecommenderSection {
    pub name: String,
    pub mf: MfHyper,
    /// Clamp MF predictions to `[lo, hi]` before scoring.
    pub clamp: Option<[f64; 2]>,
    /// Cache trained MF models under `<out_dir>/model-cache`.
    pub cache: bool,
}

impl Default for RecommenderSection {
    fn default() -> Self {
        RecommenderSection {
            name: "cosine".into(),
            mf: MfHyper::default(),
            clamp: None,
            cache: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSection {
    /// Defaults to precision for cosine and RMSE for MF.
    pub name: Option<String>,
    pub top_n: usize,
}

impl Default for MetricSection {
    fn default() -> Self {
        MetricSection {
            name: None,
            top_n: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub enabled: bool,
    pub n_trials: usize,
    /// Defaults to one chunk's share, `1 / chunks`.
    pub fraction: Option<f64>,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            enabled: true,
            n_trials: 20,
            fraction: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    pub by: String,
    pub n_groups: usize,
    pub n_folds: usize,
}

impl Default for StabilitySection {
    fn default() -> Self {
        StabilitySection {
            by: "users".into(),
            n_groups: 4,
            n_folds: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuppressSection {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl Default for SuppressSection {
    fn default() -> Self {
        SuppressSection {
            alphas: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            betas: vec![0.0, 1.0, 3.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FakeSection {
    pub multiplier: usize,
    /// Defaults to `multiplier`.
    pub n_chunks: Option<usize>,
    /// `density` or `kmeans`.
    pub hardship: String,
    pub k: usize,
}

impl Default for FakeSection {
    fn default() -> Self {
        FakeSection {
            multiplier: 10,
            n_chunks: None,
            hardship: "density".into(),
            k: 2,
        }
    }
}

impl FakeSection {
    pub fn hardship(&self) -> Result<Hardship> {
        match self.hardship.as_str() {
            "density" | "hardship-density" => Ok(Hardship::Density),
            "kmeans" | "hardship-kmeans" => Ok(Hardship::KMeans { k: self.k }),
            other => bail!("unknown fake hardship `{other}`; expected density or kmeans"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplaceSection {
    pub fractions: Vec<f64>,
    pub beta: f64,
    pub mix: FakeMix,
}

impl Default for ReplaceSection {
    fn default() -> Self {
        ReplaceSection {
            fractions: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            beta: 3.0,
            mix: FakeMix::Uniform,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReduceSection {
    pub targets: Vec<f64>,
    pub noise_threshold: f64,
    /// Use time intervals as noise candidates.
    pub use_time: bool,
    /// Re-cut each plan by the realized share on the target data.
    pub calibrate: bool,
}

impl Default for ReduceSection {
    fn default() -> Self {
        ReduceSection {
            targets: vec![0.1, 0.2, 0.3, 0.4],
            noise_threshold: DEFAULT_NOISE_THRESHOLD,
            use_time: true,
            calibrate: true,
        }
    }
}

/// Command-line values that replace config entries when given.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub metric: Option<String>,
    pub top_n: Option<usize>,
    pub chunks: Option<usize>,
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub attribute: Option<String>,
    pub recommender: Option<String>,
    pub kind: Option<String>,
    pub input: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads `path`; a relative dataset path is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        if let (Some(p), Some(dir)) = (&cfg.dataset.path, path.parent()) {
            if p.is_relative() {
                cfg.dataset.path = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = Some(d.clone());
        }
        if let Some(m) = &o.metric {
            self.metric.name = Some(m.clone());
        }
        if let Some(n) = o.top_n {
            self.metric.top_n = n;
        }
        if let Some(c) = o.chunks {
            self.attribute.chunks = c;
        }
        if let Some(a) = &o.alpha {
            self.suppress.alphas = a.clone();
            self.replace.fractions = a.clone();
        }
        if let Some(b) = &o.beta {
            self.suppress.betas = b.clone();
            if let Some(&last) = b.last() {
                self.replace.beta = last;
            }
        }
        if let Some(a) = &o.attribute {
            self.attribute.name = a.clone();
        }
        if let Some(r) = &o.recommender {
            self.recommender.name = r.clone();
        }
        if let Some(k) = &o.kind {
            self.dataset.kind = k.clone();
        }
        if let Some(p) = &o.input {
            self.dataset.path = Some(p.clone());
        }
    }

    pub fn seed(&self) -> Result<Seed> {
        self.seed
            .map(Seed::new)
            .ok_or_else(|| anyhow!("no seed given; set `seed` in the config or pass --seed"))
    }

    pub fn metric(&self) -> Result<Metric> {
        match &self.metric.name {
            Some(m) => Ok(Metric::from_str(m)?),
            None if self.recommender.name == "mf" => Ok(Metric::Rmse),
            None => Ok(Metric::Precision),
        }
    }

    pub fn is_checkin_kind(&self) -> bool {
        matches!(self.dataset.kind.as_str(), "checkins" | "city")
    }

    /// Checks names and ranges that do not need the data.
    /// `uses_data` is false when the pipeline only reads earlier results.
    pub fn validate(&self, pipeline: &str, uses_data: bool) -> Result<()> {
        if !PIPELINES.contains(&pipeline) {
            bail!(
                "unknown pipeline `{pipeline}`; expected one of {}",
                PIPELINES.join(", ")
            );
        }
        self.seed()?;
        let d = &self.dataset;
        if !DATASET_KINDS.contains(&d.kind.as_str()) {
            bail!(
                "unknown dataset kind `{}`; expected one of {}",
                d.kind,
                DATASET_KINDS.join(", ")
            );
        }
        if matches!(d.kind.as_str(), "checkins" | "movielens" | "ratings") && d.path.is_none() {
            bail!("dataset kind `{}` needs a path", d.kind);
        }
        if !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
            bail!("dataset.test_fraction {} not in (0, 1)", d.test_fraction);
        }
        let attribute = self.attribute.attribute()?;
        let metric = self.metric()?;
        if !uses_data {
            return Ok(());
        }
        if self.attribute.chunks < 2 {
            bail!("attribute.chunks must be at least 2");
        }
        if !RECOMMENDERS.contains(&self.recommender.name.as_str()) {
            bail!(
                "unknown recommender `{}`; registered recommenders: {}",
                self.recommender.name,
                RECOMMENDERS.join(", ")
            );
        }
        match self.recommender.name.as_str() {
            "mf" if metric.is_ranking() => bail!("metric {metric} needs the cosine recommender"),
            "cosine" if !metric.is_ranking() => bail!("metric {metric} needs the mf recommender"),
            _ => {}
        }
        if self.metric.top_n == 0 {
            bail!("metric.top_n must be at least 1");
        }
        if self.recommender.name == "mf" && self.is_checkin_kind() {
            bail!("the mf recommender needs rating data, not `{}`", d.kind);
        }
        if self.is_checkin_kind() && attribute == Attribute::Rating {
            bail!("attribute rating needs rating data, not `{}`", d.kind);
        }
        if !self.is_checkin_kind() && attribute != Attribute::Rating && needs_partition(pipeline) {
            bail!(
                "attribute {attribute} needs check-in data, not `{}`",
                d.kind
            );
        }
        for &a in &self.suppress.alphas {
            if !(0.0..=1.0).contains(&a) {
                bail!("suppression level {a} not in [0, 1]");
            }
        }
        for &b in &self.suppress.betas {
            if !b.is_finite() || b < 0.0 {
                bail!("beta {b} must be finite and non-negative");
            }
        }
        for &f in &self.replace.fractions {
            if !(0.0..=1.0).contains(&f) {
                bail!("replacement fraction {f} not in [0, 1]");
            }
        }
        for &t in &self.reduce.targets {
            if !(t > 0.0 && t < 1.0) {
                bail!("reduction target {t} not in (0, 1)");
            }
        }
        if let Some(f) = self.baseline.fraction {
            if !(f > 0.0 && f < 1.0) {
                bail!("baseline.fraction {f} not in (0, 1)");
            }
        }
        if !matches!(self.stability.by.as_str(), "users" | "data") {
            bail!(
                "stability.by must be `users` or `data`, not `{}`",
                self.stability.by
            );
        }
        self.fake.hardship()?;
        if matches!(pipeline, "fake" | "replace" | "reduce") && !self.is_checkin_kind() {
            bail!("pipeline {pipeline} needs check-in data, not `{}`", d.kind);
        }
        if matches!(pipeline, "replace" | "reduce")
            && !matches!(
                attribute,
                Attribute::HardshipDensity | Attribute::HardshipKmeans { .. }
            )
        {
            bail!("pipeline {pipeline} needs a hardship attribute, not {attribute}");
        }
        Ok(())
    }
}

fn needs_partition(pipeline: &str) -> bool {
    !matches!(
        pipeline,
        "ingest" | "split" | "synth" | "report" | "baseline" | "fake"
    )
}
