use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gtwnn_core::diagnostics::IsotropyConfig;
use gtwnn_core::eval::DEFAULT_EPSILON;
use gtwnn_core::ingest::{Crs, Schema, TimeResolution};
use gtwnn_core::models::ArchKind;
use gtwnn_core::nn::{AdamConfig, TrainConfig};
use gtwnn_core::synth::SynthParams;
use serde::{Deserialize, Serialize};

/// Everything a pipeline run needs. Every field has a default except the
/// raw input path, which only `ingest` requires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seeds: SeedConfig,
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub search: SearchConfig,
    pub diagnose: DiagnoseConfig,
    pub eval: EvalConfig,
    pub synth: SynthSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            output_dir: PathBuf::from("out"),
            seeds: SeedConfig::default(),
            grid: GridConfig::default(),
            model: ModelConfig::default(),
            train: TrainSection::default(),
            search: SearchConfig::default(),
            diagnose: DiagnoseConfig::default(),
            eval: EvalConfig::default(),
            synth: SynthSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// One master seed fans out to named sub-seeds; any of them can be pinned.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub master: u64,
    pub shuffle: Option<u64>,
    pub init: Option<u64>,
    pub nas: Option<u64>,
    pub synth: Option<u64>,
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sub-seed for `name`, stable across platforms and releases.
pub fn derive_seed(master: u64, name: &str) -> u64 {
    let tag = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    mix(master ^ mix(tag))
}

impl SeedConfig {
    pub fn shuffle(&self) -> u64 {
        self.shuffle
            .unwrap_or_else(|| derive_seed(self.master, "shuffle"))
    }
    pub fn init(&self) -> u64 {
        self.init
            .unwrap_or_else(|| derive_seed(self.master, "init"))
    }
    pub fn nas(&self) -> u64 {
        self.nas.unwrap_or_else(|| derive_seed(self.master, "nas"))
    }
    pub fn synth(&self) -> u64 {
        self.synth
            .unwrap_or_else(|| derive_seed(self.master, "synth"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub crs: Crs,
    pub resolution: TimeResolution,
    /// Initial N of the N-by-N grid search.
    pub seed_n: usize,
    pub skip_inactive_cells: bool,
    pub schema: Schema,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            crs: Crs::Bng,
            resolution: TimeResolution::Monthly,
            seed_n: 32,
            skip_inactive_cells: false,
            schema: Schema::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: ArchKind,
    /// Width of each hidden layer of every block.
    pub neurons: Vec<usize>,
    /// Spatial bandwidth in km; defaults to one cell width.
    pub bandwidth_h: Option<f64>,
    /// Temporal bandwidth in time steps.
    pub bandwidth_ht: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            architecture: ArchKind::Gtwnn,
            neurons: vec![8],
            bandwidth_h: None,
            bandwidth_ht: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        let base = TrainConfig::default();
        TrainSection {
            epochs: base.epochs,
            batch_size: base.batch_size,
            adam: base.adam,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, shuffle_seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: shuffle_seed,
            adam: self.adam,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub budget: usize,
    /// Defaults to the architecture's own depth range.
    pub layers_range: Option<(usize, usize)>,
    pub neurons_range: (usize, usize),
    pub per_layer_neurons: bool,
    /// Fill the wall-time column of the trial log (breaks byte-identical
    /// reruns).
    pub record_wall_time: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: 50,
            layers_range: None,
            neurons_range: (1, 15),
            per_layer_neurons: true,
            record_wall_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub alpha: f64,
    pub acf_max_lag: Option<usize>,
    pub pacf_max_lag: Option<usize>,
    pub spatial_max_lag: Option<usize>,
    pub isotropy_window: usize,
    pub isotropy_sample_frac: f64,
    pub isotropy_threshold: f64,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        let iso = IsotropyConfig::default();
        DiagnoseConfig {
            alpha: 0.05,
            acf_max_lag: None,
            pacf_max_lag: None,
            spatial_max_lag: None,
            isotropy_window: iso.window,
            isotropy_sample_frac: iso.sample_frac,
            isotropy_threshold: iso.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub epsilon: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub rows: usize,
    pub cols: usize,
    pub t_steps: usize,
    pub temporal_coeffs: Vec<f64>,
    pub spatial_kernel_radius: usize,
    pub anisotropy: f64,
    pub base_rate: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let p = SynthParams::default();
        SynthSection {
            rows: p.rows,
            cols: p.cols,
            t_steps: p.t_steps,
            temporal_coeffs: p.temporal_coeffs,
            spatial_kernel_radius: p.spatial_kernel_radius,
            anisotropy: p.anisotropy,
            base_rate: p.base_rate,
        }
    }
}

impl SynthSection {
    pub fn to_params(&self, seed: u64) -> SynthParams {
        SynthParams {
            rows: self.rows,
            cols: self.cols,
            t_steps: self.t_steps,
            temporal_coeffs: self.temporal_coeffs.clone(),
            spatial_kernel_radius: self.spatial_kernel_radius,
            anisotropy: self.anisotropy,
            base_rate: self.base_rate,
            seed,
        }
    }
}
