//! Run configuration loaded from TOML.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sigkern::dualsig::{Algorithm, KernelConfig, Normalization, Order};
use sigkern::preprocess::AugmentorOptions;
use sigkern::primalsig::{SigFeatureConfig, SigVariant};
use sigkern::staticfeat::StaticFeatureSpec;
use sigkern::statickern::StaticKernelSpec;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Synth,
    Gram,
    Features,
    Mape,
    Bench,
    Classify,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub tabulate: TabulateSection,
    #[serde(default)]
    pub augment: AugmentorOptions,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub features: FeatureSection,
    #[serde(default)]
    pub mape: MapeSection,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub classify: ClassifySection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub n_sequences: usize,
    pub length: usize,
    pub dim: usize,
    /// Mean of every increment, per channel.
    pub drift: Option<Vec<f64>>,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            n_sequences: 10,
            length: 100,
            dim: 5,
            drift: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TabulateSection {
    pub max_len: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    #[serde(rename = "static")]
    pub static_kernel: StaticKernelSpec,
    /// Replace the static bandwidth by the median pairwise distance of the
    /// data's points.
    pub median_bandwidth: bool,
    pub n_levels: usize,
    pub order: Order,
    pub difference: bool,
    pub normalization: Normalization,
    pub algorithm: Algorithm,
}

impl Default for KernelSection {
    fn default() -> Self {
        let k = KernelConfig::default();
        KernelSection {
            static_kernel: k.static_kernel,
            median_bandwidth: false,
            n_levels: k.n_levels,
            order: k.order,
            difference: k.difference,
            normalization: k.normalization,
            algorithm: Algorithm::Dp,
        }
    }
}

impl KernelSection {
    pub fn kernel_config(&self, median: Option<f64>) -> KernelConfig {
        let mut static_kernel = self.static_kernel;
        if let Some(bw) = median {
            static_kernel.bandwidth = bw;
        }
        KernelConfig {
            static_kernel,
            n_levels: self.n_levels,
            order: self.order,
            difference: self.difference,
            normalization: self.normalization,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSection {
    pub variant: SigVariant,
    #[serde(rename = "static")]
    pub static_features: Option<StaticFeatureSpec>,
    pub median_bandwidth: bool,
    pub n_components: usize,
    pub projection_size: Option<usize>,
    pub n_levels: usize,
    pub order: Order,
    pub difference: bool,
    pub normalize: bool,
}

impl Default for FeatureSection {
    fn default() -> Self {
        let f = SigFeatureConfig::default();
        FeatureSection {
            variant: f.variant,
            static_features: None,
            median_bandwidth: false,
            n_components: f.n_components,
            projection_size: None,
            n_levels: f.n_levels,
            order: f.order,
            difference: f.difference,
            normalize: f.normalize,
        }
    }
}

impl FeatureSection {
    /// Feature configuration for `variant` with `D = n_components` and
    /// `Q = projection_size` (default `D`).
    pub fn feature_config(&self, variant: SigVariant, n_components: usize, n_levels: usize, median: Option<f64>) -> SigFeatureConfig {
        let mut cfg = SigFeatureConfig::new(variant, n_components, n_levels, 1.0);
        if let Some(s) = self.static_features {
            cfg.static_features = s;
        }
        if let Some(bw) = median {
            cfg.static_features.bandwidth = bw;
        }
        cfg.projection_size = self.projection_size.unwrap_or(n_components);
        cfg.order = self.order;
        cfg.difference = self.difference;
        cfg.normalize = self.normalize;
        cfg
    }

    pub fn config(&self, median: Option<f64>) -> SigFeatureConfig {
        self.feature_config(self.variant, self.n_components, self.n_levels, median)
    }
}

/// The dual reference for the `mape` command.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactKind {
    /// The signature kernel of the static kernel the features approximate.
    #[default]
    Static,
    /// The signature kernel of the features' own finite-rank static kernels
    /// (`rfsf_full` only).
    Lifted,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapeSection {
    pub exact: ExactKind,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    /// `dual_dp`, `dual_pde`, or a feature variant name.
    pub methods: Vec<String>,
    pub lengths: Vec<usize>,
    pub n_sequences: Vec<usize>,
    /// `D = Q` values for primal methods.
    pub components: Vec<usize>,
    pub levels: Vec<usize>,
    pub dim: usize,
    /// Compute the MAPE of primal methods against the dual kernel.
    pub with_mape: bool,
    /// Number of feature seeds; MAPE is reported as their median.
    pub seeds: usize,
    /// Measure wall time; when false `wall_ms` is 0 so runs are reproducible.
    pub wall_clock: bool,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection {
            methods: vec!["dual_dp".into(), "trp".into()],
            lengths: vec![100],
            n_sequences: vec![10],
            components: vec![100],
            levels: vec![5],
            dim: 5,
            with_mape: false,
            seeds: 1,
            wall_clock: true,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySection {
    pub n_per_class: usize,
    pub length: usize,
    pub dim: usize,
    /// Per-step increment mean in channel 0: `+drift` for class 0 and
    /// `−drift` for class 1.
    pub drift: f64,
    pub lambdas: Vec<f64>,
    pub folds: usize,
    pub test_fraction: f64,
    pub repeats: usize,
}

impl Default for ClassifySection {
    fn default() -> Self {
        ClassifySection {
            n_per_class: 100,
            length: 50,
            dim: 3,
            drift: 0.5,
            lambdas: vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3],
            folds: 5,
            test_fraction: 0.5,
            repeats: 1,
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        let inner = inner.trim();
        if path == "." || path.is_empty() {
            CliError::Config(inner.to_string())
        } else {
            CliError::Config(format!("{path}: {inner}"))
        }
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

impl RunConfig {
    /// Validates the sections `command` reads, naming the offending field.
    pub fn validate(&self, command: Command) -> Result<(), CliError> {
        let err = |path: &str, msg: String| Err(CliError::Config(format!("{path}: {msg}")));
        if let Some(c) = self.command {
            if c != command {
                return err("command", format!("config is for {c:?} but {command:?} was requested"));
            }
        }
        if let Some(input) = &self.input {
            if command != Command::Synth && command != Command::Bench && command != Command::Classify && !input.exists() {
                return err("input", format!("{} does not exist", input.display()));
            }
        }
        let uses_data = matches!(command, Command::Synth | Command::Gram | Command::Features | Command::Mape);
        if uses_data && self.input.is_none() {
            let s = &self.synth;
            if s.n_sequences == 0 {
                return err("synth.n_sequences", "must be at least 1".into());
            }
            if s.length < 2 {
                return err("synth.length", "must be at least 2".into());
            }
            if s.dim == 0 {
                return err("synth.dim", "must be at least 1".into());
            }
            if let Some(d) = &s.drift {
                if d.len() != s.dim {
                    return err("synth.drift", format!("has {} entries for {} channels", d.len(), s.dim));
                }
            }
        }
        if uses_data {
            self.augment.validate().or_else(|e| err("augment", e.to_string()))?;
        }
        if matches!(command, Command::Gram | Command::Classify) {
            self.kernel.static_kernel.validate().or_else(|e| err("kernel.static", e.to_string()))?;
        }
        if matches!(command, Command::Gram | Command::Classify) && self.kernel.algorithm == Algorithm::Pde && self.kernel.normalization == Normalization::Levelwise {
            return err("kernel.normalization", "levelwise normalization is not available for the pde algorithm".into());
        }
        if matches!(command, Command::Features | Command::Mape) {
            self.features.config(None).validate().or_else(|e| err("features", e.to_string()))?;
        }
        if command == Command::Mape && self.mape.exact == ExactKind::Lifted && self.features.variant != SigVariant::RfsfFull {
            return err("mape.exact", "lifted reference needs variant = \"rfsf_full\"".into());
        }
        if command == Command::Bench {
            let b = &self.bench;
            for (name, v) in [("bench.lengths", &b.lengths), ("bench.n_sequences", &b.n_sequences), ("bench.levels", &b.levels)] {
                if v.is_empty() {
                    return err(name, "must not be empty".into());
                }
            }
            if b.lengths.iter().any(|&l| l < 2) {
                return err("bench.lengths", "lengths must be at least 2".into());
            }
            if b.n_sequences.iter().any(|&n| n == 0) {
                return err("bench.n_sequences", "must be positive".into());
            }
            if b.dim == 0 {
                return err("bench.dim", "must be at least 1".into());
            }
            if b.seeds == 0 {
                return err("bench.seeds", "must be at least 1".into());
            }
            for m in &b.methods {
                if m != "dual_dp" && m != "dual_pde" && m.parse::<SigVariant>().is_err() {
                    return err("bench.methods", format!("unknown method {m:?}"));
                }
            }
            if b.methods.iter().any(|m| m.parse::<SigVariant>().is_ok()) && b.components.is_empty() {
                return err("bench.components", "primal methods need at least one value".into());
            }
        }
        if command == Command::Classify {
            let c = &self.classify;
            if c.n_per_class < 2 || c.length < 2 || c.dim == 0 {
                return err("classify", "needs n_per_class ≥ 2, length ≥ 2 and dim ≥ 1".into());
            }
            if !(c.test_fraction > 0.0 && c.test_fraction < 1.0) {
                return err("classify.test_fraction", format!("must lie in (0, 1), got {}", c.test_fraction));
            }
            if c.lambdas.is_empty() {
                return err("classify.lambdas", "must not be empty".into());
            }
            if c.repeats == 0 {
                return err("classify.repeats", "must be at least 1".into());
            }
        }
        Ok(())
    }
}
