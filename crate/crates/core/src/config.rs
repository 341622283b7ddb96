//! Pipeline settings and the flat `key = value` config file.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::cnn::TrainConfig;
use crate::cycles::SegmentParams;
use crate::error::{GaitError, Result};
use crate::normalize::DEFAULT_N;
use crate::pca::PcaMode;
use crate::sprt::{ScoreFamily, SprtConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OsvmConfig {
    pub nu: f64,
    pub gamma: f64,
    /// Number of PCA components kept.
    pub s: usize,
    pub pca_mode: PcaMode,
}

impl Default for OsvmConfig {
    fn default() -> Self {
        OsvmConfig {
            nu: 0.02,
            gamma: 0.3,
            s: 20,
            pca_mode: PcaMode::Lowest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprtSettings {
    pub alpha_err: f64,
    pub beta_err: f64,
    pub max_cycles: usize,
    pub family: ScoreFamily,
}

impl Default for SprtSettings {
    fn default() -> Self {
        SprtSettings {
            alpha_err: 0.01,
            beta_err: 0.01,
            max_cycles: 30,
            family: ScoreFamily::Gaussian,
        }
    }
}

impl SprtSettings {
    pub fn config(&self) -> Result<SprtConfig> {
        SprtConfig::new(self.alpha_err, self.beta_err, self.max_cycles)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub rate_hz: f64,
    pub fir_cutoff: f64,
    pub cycle_cutoff: f64,
    pub phi_th: f64,
    /// Template averaging weight.
    pub template_alpha: f64,
    pub n: usize,
    pub use_gyro: bool,
    pub cnn: TrainConfig,
    pub osvm: OsvmConfig,
    pub sprt: SprtSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let seg = SegmentParams::default();
        PipelineConfig {
            rate_hz: 200.0,
            fir_cutoff: 40.0,
            cycle_cutoff: seg.cycle_cutoff_hz,
            phi_th: seg.phi_th,
            template_alpha: seg.alpha,
            n: DEFAULT_N,
            use_gyro: true,
            cnn: TrainConfig::default(),
            osvm: OsvmConfig::default(),
            sprt: SprtSettings::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| GaitError::Parameter(format!("{key}: cannot parse {value:?}")))
}

impl PipelineConfig {
    pub fn segment_params(&self) -> SegmentParams {
        SegmentParams {
            phi_th: self.phi_th,
            cycle_cutoff_hz: self.cycle_cutoff,
            alpha: self.template_alpha,
        }
    }

    pub fn rows(&self) -> usize {
        if self.use_gyro {
            8
        } else {
            4
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz > 0.0) || !(self.fir_cutoff > 0.0 && self.fir_cutoff < self.rate_hz / 2.0) {
            return Err(GaitError::Parameter(format!(
                "FIR cutoff {} Hz must lie below Nyquist of {} Hz",
                self.fir_cutoff, self.rate_hz
            )));
        }
        if !(self.cycle_cutoff > 0.0 && self.cycle_cutoff < self.rate_hz / 2.0) {
            return Err(GaitError::Parameter(format!("cycle cutoff {} Hz out of range", self.cycle_cutoff)));
        }
        if !(0.0..=2.0).contains(&self.phi_th) || !(0.0..=1.0).contains(&self.template_alpha) {
            return Err(GaitError::Parameter("phi_th must lie in [0, 2] and template_alpha in [0, 1]".into()));
        }
        if self.n < 2 {
            return Err(GaitError::Parameter(format!("N = {} is too small", self.n)));
        }
        self.cnn.validate()?;
        if !(self.osvm.nu > 0.0 && self.osvm.nu <= 1.0) || !(self.osvm.gamma >= 0.0) || self.osvm.s == 0 {
            return Err(GaitError::Parameter("osvm needs ν in (0, 1], γ ≥ 0 and S ≥ 1".into()));
        }
        self.sprt.config()?;
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "rate_hz" => self.rate_hz = parse(key, value)?,
            "fir_cutoff" => self.fir_cutoff = parse(key, value)?,
            "cycle_cutoff" => self.cycle_cutoff = parse(key, value)?,
            "phi_th" => self.phi_th = parse(key, value)?,
            "template_alpha" => self.template_alpha = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "use_gyro" => self.use_gyro = parse(key, value)?,
            "seed" | "cnn.seed" => self.cnn.seed = parse(key, value)?,
            "cnn.q1" => self.cnn.q1 = parse(key, value)?,
            "cnn.q2" => self.cnn.q2 = parse(key, value)?,
            "cnn.features" => self.cnn.features = parse(key, value)?,
            "cnn.learning_rate" => self.cnn.learning_rate = parse(key, value)?,
            "cnn.batch_size" => self.cnn.batch_size = parse(key, value)?,
            "cnn.max_epochs" => self.cnn.max_epochs = parse(key, value)?,
            "cnn.patience" => self.cnn.patience = parse(key, value)?,
            "cnn.n_train" => self.cnn.n_train = parse(key, value)?,
            "cnn.n_test" => self.cnn.n_test = parse(key, value)?,
            "cnn.validation_fraction" => self.cnn.validation_fraction = parse(key, value)?,
            "osvm.nu" => self.osvm.nu = parse(key, value)?,
            "osvm.gamma" => self.osvm.gamma = parse(key, value)?,
            "osvm.s" => self.osvm.s = parse(key, value)?,
            "osvm.pca_mode" => self.osvm.pca_mode = value.parse()?,
            "sprt.alpha_err" => self.sprt.alpha_err = parse(key, value)?,
            "sprt.beta_err" => self.sprt.beta_err = parse(key, value)?,
            "sprt.max_cycles" => self.sprt.max_cycles = parse(key, value)?,
            "sprt.family" => self.sprt.family = value.parse()?,
            other => return Err(GaitError::Parameter(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parses a config file on top of the defaults. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| GaitError::Parse {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| GaitError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every setting, one per line, in a form [`PipelineConfig::parse`] reads back.
    pub fn to_text(&self) -> String {
        let c = &self.cnn;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("rate_hz", self.rate_hz.to_string());
        put("fir_cutoff", self.fir_cutoff.to_string());
        put("cycle_cutoff", self.cycle_cutoff.to_string());
        put("phi_th", self.phi_th.to_string());
        put("template_alpha", self.template_alpha.to_string());
        put("n", self.n.to_string());
        put("use_gyro", self.use_gyro.to_string());
        put("seed", c.seed.to_string());
        put("cnn.q1", c.q1.to_string());
        put("cnn.q2", c.q2.to_string());
        put("cnn.features", c.features.to_string());
        put("cnn.learning_rate", c.learning_rate.to_string());
        put("cnn.batch_size", c.batch_size.to_string());
        put("cnn.max_epochs", c.max_epochs.to_string());
        put("cnn.patience", c.patience.to_string());
        put("cnn.n_train", c.n_train.to_string());
        put("cnn.n_test", c.n_test.to_string());
        put("cnn.validation_fraction", c.validation_fraction.to_string());
        put("osvm.nu", self.osvm.nu.to_string());
        put("osvm.gamma", self.osvm.gamma.to_string());
        put("osvm.s", self.osvm.s.to_string());
        put("osvm.pca_mode", self.osvm.pca_mode.to_string());
        put("sprt.alpha_err", self.sprt.alpha_err.to_string());
        put("sprt.beta_err", self.sprt.beta_err.to_string());
        put("sprt.max_cycles", self.sprt.max_cycles.to_string());
        put("sprt.family", self.sprt.family.to_string());
        out
    }
}
