//! Experiment configuration files: one JSON object with a "kind" discriminator.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::kfun::{KPair, SearchStrategy, ThetaQ};
use crate::khintchine::{Functional, SignMode};
use crate::lorentz::{extended_real, Exponents};
use crate::matcore::{derive_seed, random_instance, InstanceFamily};
use crate::seqnorms::{MatrixSeq, DEFAULT_BUDGET};

#[derive(Clone, Debug)]
pub enum ExperimentConfig {
    Sandwich(SandwichConfig),
    Khintchine(KhintchineConfig),
    Decompose(DecomposeConfig),
    Layercake(LayerCakeConfig),
    Freeprob(FreeProbConfig),
    Ktcurve(KtCurveConfig),
    Weaktype(WeakTypeConfig),
}

pub const KINDS: [&str; 7] = [
    "sandwich",
    "khintchine",
    "decompose",
    "layercake",
    "freeprob",
    "ktcurve",
    "weaktype",
];

#[derive(Deserialize)]
struct KindOnly {
    kind: String,
}

impl ExperimentConfig {
    /// Parses a configuration document. The "kind" field is read first and the whole
    /// document is then parsed as that kind, so error messages keep their line and column.
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        let k: KindOnly = serde_json::from_str(text)?;
        Ok(match k.kind.as_str() {
            "sandwich" => ExperimentConfig::Sandwich(serde_json::from_str(text)?),
            "khintchine" => ExperimentConfig::Khintchine(serde_json::from_str(text)?),
            "decompose" => ExperimentConfig::Decompose(serde_json::from_str(text)?),
            "layercake" => ExperimentConfig::Layercake(serde_json::from_str(text)?),
            "freeprob" => ExperimentConfig::Freeprob(serde_json::from_str(text)?),
            "ktcurve" => ExperimentConfig::Ktcurve(serde_json::from_str(text)?),
            "weaktype" => ExperimentConfig::Weaktype(serde_json::from_str(text)?),
            other => {
                return Err(serde::de::Error::custom(format!(
                    "unknown kind `{other}`, expected one of {}",
                    KINDS.join(", ")
                )))
            }
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Sandwich(_) => "sandwich",
            ExperimentConfig::Khintchine(_) => "khintchine",
            ExperimentConfig::Decompose(_) => "decompose",
            ExperimentConfig::Layercake(_) => "layercake",
            ExperimentConfig::Freeprob(_) => "freeprob",
            ExperimentConfig::Ktcurve(_) => "ktcurve",
            ExperimentConfig::Weaktype(_) => "weaktype",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ExperimentConfig::Sandwich(c) => c.seed,
            ExperimentConfig::Khintchine(c) => c.seed,
            ExperimentConfig::Decompose(c) => c.seed,
            ExperimentConfig::Layercake(c) => c.seed,
            ExperimentConfig::Freeprob(c) => c.seed,
            ExperimentConfig::Ktcurve(c) => c.seed,
            ExperimentConfig::Weaktype(c) => c.seed,
        }
    }

    /// Whether some step draws random numbers (and therefore needs a seed).
    pub fn is_randomized(&self) -> bool {
        match self {
            ExperimentConfig::Sandwich(c) => c.instances.is_generated(),
            ExperimentConfig::Decompose(c) => c.instances.is_generated(),
            ExperimentConfig::Ktcurve(c) => c.instances.is_generated(),
            ExperimentConfig::Weaktype(c) => c.instances.is_generated(),
            ExperimentConfig::Layercake(c) => c.triples.is_empty(),
            ExperimentConfig::Khintchine(_) | ExperimentConfig::Freeprob(_) => true,
        }
    }
}

fn default_family() -> InstanceFamily {
    InstanceFamily::Ginibre
}
fn one() -> usize {
    1
}

/// Where the matrix sequences come from: a JSON file (one sequence or a list of them),
/// or a generated suite in which instance k has seed derive_seed(seed, k).
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default = "default_family")]
    pub family: InstanceFamily,
    #[serde(default)]
    pub count: usize,
    #[serde(default = "one")]
    pub n_max: usize,
    #[serde(default = "one")]
    pub len_max: usize,
}

/// One input sequence with the seed it was drawn from (none for file input).
pub struct Instance {
    pub id: usize,
    pub seed: Option<u64>,
    pub x: MatrixSeq,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SeqFile {
    One(MatrixSeq),
    Many(Vec<MatrixSeq>),
}

impl InstanceSpec {
    pub fn is_generated(&self) -> bool {
        self.file.is_none()
    }

    /// Size of instance k of a generated suite.
    pub fn size(&self, k: usize) -> (usize, usize) {
        (1 + k % self.n_max.max(1), 1 + (k / self.n_max.max(1)) % self.len_max.max(1))
    }

    pub fn load(&self, seed: Option<u64>, base: &Path) -> Result<Vec<Instance>, String> {
        if let Some(file) = &self.file {
            let path = base.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let parsed: SeqFile = serde_json::from_str(&text)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            let seqs = match parsed {
                SeqFile::One(x) => vec![x],
                SeqFile::Many(v) => v,
            };
            return Ok(seqs
                .into_iter()
                .enumerate()
                .map(|(id, x)| Instance { id, seed: None, x })
                .collect());
        }
        let seed = seed.ok_or("a seed is required for generated instances")?;
        if self.n_max == 0 || self.len_max == 0 {
            return Err("n_max and len_max must be at least 1".into());
        }
        Ok((0..self.count)
            .map(|k| {
                let (n, len) = self.size(k);
                let s = derive_seed(seed, k as u64);
                Instance {
                    id: k,
                    seed: Some(s),
                    x: random_instance(s, n, len, self.family),
                }
            })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lo: 0.1,
            hi: 10.0,
            count: 9,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lo > 0.0 && self.hi >= self.lo && self.hi.is_finite() && self.count >= 1) {
            return Err(format!(
                "t_grid needs 0 < lo ≤ hi < ∞ and count ≥ 1, got lo = {}, hi = {}, count = {}",
                self.lo, self.hi, self.count
            ));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        crate::kfun::log_grid(self.lo, self.hi, self.count)
    }
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SandwichConfig {
    /// The discriminator, checked before the rest of the file is read.
    pub kind: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub instances: InstanceSpec,
    #[serde(default)]
    pub t_grid: GridSpec,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub search: SearchStrategy,
    /// Also fail the run when K_upper > 2·k_lower·(1 + slack).
    #[serde(default)]
    pub require_factor_two: bool,
    #[serde(default = "default_slack")]
    pub factor_two_slack: f64,
}

fn default_slack() -> f64 {
    0.02
}

fn default_big_n() -> usize {
    128
}
fn default_sign_mode() -> SignMode {
    SignMode::Exact
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KhintchineConfig {
    /// The discriminator, checked before the rest of the file is read.
    pub kind: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub left: Functional,
    pub right: Functional,
    #[serde(default = "default_family")]
    pub family: InstanceFamily,
    pub count: usize,
    pub n_max: usize,
    pub len_max: usize,
    pub exponents: Vec<Exponents>,
    #[serde(default = "default_big_n")]
    pub big_n: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_sign_mode")]
    pub sign_mode: SignMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    /// The (∞, 2) case with row/column operator-norm reporting.
    Rc,
    Schur,
}

fn infinity() -> f64 {
    f64::INFINITY
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    /// The discriminator, checked before the rest of the file is read.
    pub kind: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub instances: InstanceSpec,
    pub method: SplitMethod,
    /// Used by `schur`; `rc` always works at p0 = ∞.
    #[serde(default = "infinity", with = "extended_real")]
    pub p0: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Triple {
    pub g: Vec<f64>,
    pub f: Vec<f64>,
    pub t: f64,
}

fn default_size() -> usize {
    6
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LayerCakeConfig {
    /// The discriminator, checked before the rest of the file is read.
    pub kind: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Explicit inputs; when empty, `count` random triples are drawn.
    #[serde(default)]
    pub triples: Vec<Triple>,
    #[serde(default)]
    pub count: usize,
    #[serde(default = "default_size")]
    pub size_max: usize,
}

fn default_ks_dims() -> Vec<usize> {
    vec![256]
}
fn default_ks_seeds() -> usize {
    1
}
fn default_terms() -> Vec<usize> {
    vec![4, 8, 16, 32]
}
fn default_div_n() -> usize {
    256
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FreeProbConfig {
    /// The discriminator, checked before the rest of the file is read.
    pub kind: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// GUE dimensions for the semicircle KS check.
    #[serde(default = "default_ks_dims")]
    pub ks_dims: Vec<usize>,
    #[serde(default = "default_ks_seeds")]
    pub ks_seeds: usize,
    #[serde(default = "default_ks_tol")]
    pub ks_tol: f64,
    /// Term counts for the p = ∞ divergence experiment.
    #[serde(default = "default_terms")]
    pub divergence_terms: Vec<usize>,
    #[serde(default = "default_div_n")]
    pub divergence_dim: usize,
}

fn default_ks_tol() -> f64 {
    0.05
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KtCurveConfig {
    /// The discriminator, checked before the rest of the file is read.
    pub kind: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub instances: InstanceSpec,
    pub pair: KPair,
    #[serde(default)]
    pub t_grid: GridSpec,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// (θ, q) norms to bracket from each curve.
    #[serde(default)]
    pub norms: Vec<ThetaQ>,
    #[serde(default)]
    pub search: SearchStrategy,
}

fn default_thetas() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WeakTypeConfig {
    /// The discriminator, checked before the rest of the file is read.
    pub kind: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub instances: InstanceSpec,
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    #[serde(default)]
    pub t_grid: GridSpec,
    #[serde(default)]
    pub search: SearchStrategy,
}
