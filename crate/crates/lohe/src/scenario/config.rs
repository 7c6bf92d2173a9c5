//! Declarative scenario configuration. The on-disk form is a TOML tree that
//! mirrors these structs exactly; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::diagnostics::MonitorKind;
use crate::error::{Error, Result};
use crate::integrate::IntegratorConfig;
use crate::model::ModelKind;
use crate::scenario::gen::FreqKind;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Which reduction to run.
    pub model: ModelKind,
    /// Dimension list, interpreted per model:
    /// lt: full tensor shape; sds: [d1, d2]; sms: one sphere dimension per
    /// component; dm: [d1, d2, d3, d4]; dum/dsom: [n, m]; mm: [r1, c1, r2,
    /// c2, ...]; mum: one size per component.
    pub dims: Vec<usize>,
    pub oscillators: usize,
    pub seed: u64,
    pub coupling: CouplingCfg,
    #[serde(default)]
    pub frequency: FrequencyCfg,
    pub init: InitCfg,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub monitors: Vec<MonitorKind>,
    #[serde(default)]
    pub compare: Option<CompareCfg>,
    /// Co-integrate the full tensor flow from the same data and record the
    /// separability residual (dm and mm models only).
    #[serde(default)]
    pub separability: bool,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub outputs: OutputCfg,
    /// Name echo when built from a preset.
    #[serde(default)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingCfg {
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub kappa1: Option<f64>,
    #[serde(default)]
    pub kappa2: Option<f64>,
    /// Set κ to this multiple of the critical coupling computed from the
    /// frequency diameters.
    #[serde(default)]
    pub kappa_c_multiple: Option<f64>,
    /// Full index-vector map for tensor runs, keys like "0111".
    #[serde(default)]
    pub map: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyCfg {
    #[serde(default)]
    pub kind: FrequencyChoice,
    /// Diameter target for the first component's generators.
    #[serde(default)]
    pub d_h: f64,
    /// Diameter target for the second component's generators.
    #[serde(default)]
    pub d_g: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyChoice {
    #[default]
    None,
    Hermitian,
    Skew,
    /// Random rank-4 skew tensors (dm/mm models).
    Rank4,
}

impl FrequencyChoice {
    pub fn as_freq_kind(self) -> Option<FreqKind> {
        match self {
            FrequencyChoice::Hermitian => Some(FreqKind::Hermitian),
            FrequencyChoice::Skew => Some(FreqKind::Skew),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum InitCfg {
    /// Near-identity group data with a total-functional target.
    NearIdentity {
        /// Target value of L at t = 0 (split evenly across the components).
        l_target: f64,
    },
    /// Generic random feasible data.
    Random {
        /// For sphere models: target minimum pairwise inner product.
        #[serde(default)]
        min_inner_product: Option<f64>,
    },
    /// Explicit states from a JSON file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareCfg {
    pub mode: CompareMode,
    /// Time shift T for `time-shift` mode.
    #[serde(default = "default_shift")]
    pub shift: f64,
    /// Seed of the second run for `independent` mode.
    #[serde(default)]
    pub seed2: Option<u64>,
    /// Horizon of the comparison metrics (defaults to integrator t_end).
    #[serde(default)]
    pub horizon: Option<f64>,
}

fn default_shift() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompareMode {
    TimeShift,
    Independent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputCfg {
    pub dir: PathBuf,
    #[serde(default)]
    pub frames: Option<String>,
    #[serde(default)]
    pub summary: Option<String>,
}

impl Default for OutputCfg {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), frames: None, summary: None }
    }
}

impl OutputCfg {
    pub fn frames_path(&self, stem: &str) -> PathBuf {
        match &self.frames {
            Some(name) => self.dir.join(name),
            None => self.dir.join(format!("{stem}.frames.csv")),
        }
    }

    pub fn summary_path(&self, stem: &str) -> PathBuf {
        match &self.summary {
            Some(name) => self.dir.join(name),
            None => self.dir.join(format!("{stem}.summary.json")),
        }
    }
}

/// Acceptance checks a run can carry; each one becomes a named pass/fail
/// verdict in the summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum CheckSpec {
    /// Feasibility defect stays below tol at every frame.
    DefectBelow { tol: f64 },
    /// Product potential is non-increasing frame to frame within tol.
    EnergyNonincreasing { tol: f64 },
    /// −dE/dt from central differences matches the dissipation sum.
    DissipationMatches { rel_tol: f64 },
    /// L at t_end, either absolute or relative to L(0).
    LFinalBelow {
        #[serde(default)]
        abs: Option<f64>,
        #[serde(default)]
        rel_to_initial: Option<f64>,
    },
    /// L non-increasing (within tol) for t >= t0.
    LMonotoneAfter { t0: f64, tol: f64 },
    /// Fitted decay rate of L is negative with at least this r².
    DecayRateNegative { min_r2: f64, floor: f64 },
    /// F decreases monotonically from its peak until it crosses threshold,
    /// and ends below it.
    FMonotoneBelow { threshold: f64 },
    /// Relative-product drift at t_end.
    ProductDriftBelow { tol: f64 },
    /// velocity_sync <= 2 kappa (m + n) F at all comparison samples.
    VelocityBound {},
    /// Max pairwise distance of every component at t_end.
    ComponentDiametersBelow { tol: f64 },
    /// Combined phases of the 1×1 unitary run match an independently written
    /// scalar oscillator integrator.
    KuramotoMatch { tol: f64 },
    /// Common-generator run equals exp(−iH₀t) times the zero-generator run.
    SplittingMatch { tol: f64 },
    /// Right-translated initial data reproduce the D/S/L series.
    GaugeInvariance { tol: f64 },
    /// Integration wall time.
    RuntimeBelow { seconds: f64 },
    /// Separability residual of the co-integrated tensor run.
    SeparabilityBelow { tol: f64 },
    /// L at the comparison shift stays below ν₂.
    ShiftWithinBasin {},
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::DefectBelow { .. } => "defect-below",
            CheckSpec::EnergyNonincreasing { .. } => "energy-nonincreasing",
            CheckSpec::DissipationMatches { .. } => "dissipation-matches",
            CheckSpec::LFinalBelow { .. } => "l-final-below",
            CheckSpec::LMonotoneAfter { .. } => "l-monotone-after",
            CheckSpec::DecayRateNegative { .. } => "decay-rate-negative",
            CheckSpec::FMonotoneBelow { .. } => "f-monotone-below",
            CheckSpec::ProductDriftBelow { .. } => "product-drift-below",
            CheckSpec::VelocityBound {} => "velocity-bound",
            CheckSpec::ComponentDiametersBelow { .. } => "component-diameters-below",
            CheckSpec::KuramotoMatch { .. } => "kuramoto-match",
            CheckSpec::SplittingMatch { .. } => "splitting-match",
            CheckSpec::GaugeInvariance { .. } => "gauge-invariance",
            CheckSpec::RuntimeBelow { .. } => "runtime-below",
            CheckSpec::SeparabilityBelow { .. } => "separability-below",
            CheckSpec::ShiftWithinBasin {} => "shift-within-basin",
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Toml(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Toml(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Stem for default output file names.
    pub fn stem(&self) -> String {
        self.preset.clone().unwrap_or_else(|| format!("{}", self.model))
    }

    /// Apply a dotted-path override like `integrator.dt=5e-4`.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let text = self.to_toml_string()?;
        let mut doc: toml::Value = toml::from_str(&text).map_err(|e| Error::Toml(e.to_string()))?;
        let parsed: toml::Value = parse_scalar(value);
        let mut cursor = &mut doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            if i + 1 == parts.len() {
                match cursor {
                    toml::Value::Table(t) => {
                        t.insert(part.to_string(), parsed.clone());
                    }
                    _ => return Err(Error::Toml(format!("cannot set key '{key}'"))),
                }
            } else {
                cursor = match cursor {
                    toml::Value::Table(t) => t
                        .entry(part.to_string())
                        .or_insert(toml::Value::Table(Default::default())),
                    _ => return Err(Error::Toml(format!("cannot traverse key '{key}'"))),
                };
            }
        }
        let text = toml::to_string(&doc).map_err(|e| Error::Toml(e.to_string()))?;
        Self::from_toml_str(&text)
    }
}

fn parse_scalar(value: &str) -> toml::Value {
    if let Ok(b) = value.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = value.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = value.parse::<f64>() {
        return toml::Value::Float(f);
    }
    toml::Value::String(value.to_string())
}
