//! Detector settings shared by every command, with JSON round trip so a
//! `run.json` can be fed back through `--config`.

use std::path::Path;

use clap::Args;
use holoscope::detector::{DetectorConfig, DEFAULT_CAP_EXPONENT, DEFAULT_NUM_SEEDS, DEFAULT_TIME_BIN};
use holoscope::graph::RatingScale;
use holoscope::suspiciousness::{KappaScaling, ScoreConfig, Signals, DEFAULT_BASE};
use holoscope::{Detector, Graph};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 42;

/// Everything that determines a detection run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectSettings {
    pub scale: RatingScale,
    /// Rating values excluded from the divergence; `None` takes the middle of
    /// the scale.
    pub neutral: Option<Vec<f64>>,
    /// Requested signals; `None` enables all of them and drops whichever the
    /// input cannot support.
    pub signals: Option<String>,
    pub base: f64,
    pub num_seeds: usize,
    pub time_bin: i64,
    pub cap_exponent: f64,
    pub kappa_scaling: KappaScaling,
    pub seed: u64,
}

impl Default for DetectSettings {
    fn default() -> Self {
        Self {
            scale: RatingScale::half_star(),
            neutral: None,
            signals: None,
            base: DEFAULT_BASE,
            num_seeds: DEFAULT_NUM_SEEDS,
            time_bin: DEFAULT_TIME_BIN,
            cap_exponent: DEFAULT_CAP_EXPONENT,
            kappa_scaling: KappaScaling::Evolving,
            seed: DEFAULT_SEED,
        }
    }
}

/// Detector flags. Each one overrides the config file when given.
#[derive(Args, Clone, Debug, Default)]
pub struct DetectArgs {
    /// JSON settings, or a previous run.json whose `config` is reused.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Rating scale as min:max:step [default: 0.5:5:0.5].
    #[arg(long)]
    pub scale: Option<String>,
    /// Neutral rating values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub neutral: Option<Vec<f64>>,
    /// Subset of alpha,phi,kappa.
    #[arg(long)]
    pub signals: Option<String>,
    /// Base b of the contrast exponent.
    #[arg(long)]
    pub base: Option<f64>,
    /// Number of singular vectors used for seeding.
    #[arg(long)]
    pub num_seeds: Option<usize>,
    /// Time bin in seconds for the seeding matrix.
    #[arg(long)]
    pub time_bin: Option<i64>,
    /// Seeds hold at most |U|^cap_exponent users.
    #[arg(long)]
    pub cap_exponent: Option<f64>,
    #[arg(long, value_enum)]
    pub kappa_scaling: Option<KappaArg>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum KappaArg {
    Evolving,
    Initial,
}

impl DetectArgs {
    pub fn resolve(&self) -> Result<DetectSettings, CliError> {
        let mut s = match &self.config {
            Some(path) => load_settings(path)?,
            None => DetectSettings::default(),
        };
        if let Some(scale) = &self.scale {
            s.scale = RatingScale::parse(scale)?;
        }
        if let Some(n) = &self.neutral {
            s.neutral = Some(n.clone());
        }
        if let Some(sig) = &self.signals {
            Signals::parse(sig)?;
            s.signals = Some(sig.clone());
        }
        if let Some(b) = self.base {
            s.base = b;
        }
        if let Some(k) = self.num_seeds {
            s.num_seeds = k;
        }
        if let Some(t) = self.time_bin {
            s.time_bin = t;
        }
        if let Some(c) = self.cap_exponent {
            s.cap_exponent = c;
        }
        if let Some(k) = self.kappa_scaling {
            s.kappa_scaling = match k {
                KappaArg::Evolving => KappaScaling::Evolving,
                KappaArg::Initial => KappaScaling::Initial,
            };
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s.validate()?;
        Ok(s)
    }
}

fn load_settings(path: &Path) -> Result<DetectSettings, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let inner = value.get("config").cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

impl DetectSettings {
    fn validate(&self) -> Result<(), CliError> {
        if self.num_seeds == 0 {
            return Err(CliError::Usage("--num-seeds must be positive".into()));
        }
        if self.time_bin <= 0 {
            return Err(CliError::Usage("--time-bin must be positive".into()));
        }
        if !(self.cap_exponent > 0.0 && self.cap_exponent <= 1.0) {
            return Err(CliError::Usage("--cap-exponent must lie in (0, 1]".into()));
        }
        if !(self.base > 1.0) {
            return Err(CliError::Usage("--base must exceed 1".into()));
        }
        Ok(())
    }

    /// Signals that will be asked of the detector. An explicit request for a
    /// signal the input cannot support is an error rather than a silent
    /// downgrade.
    pub fn signals_for(&self, has_timestamps: bool, has_ratings: bool) -> Result<Signals, CliError> {
        match &self.signals {
            None => Ok(Signals::ALL),
            Some(s) => {
                let sig = Signals::parse(s)?;
                if sig.phi && !has_timestamps {
                    return Err(holoscope::Error::MissingTimestamps.into());
                }
                if sig.kappa && !has_ratings {
                    return Err(holoscope::Error::MissingRatings.into());
                }
                Ok(sig)
            }
        }
    }

    pub fn neutral_categories(&self) -> Result<Option<Vec<u16>>, CliError> {
        let Some(values) = &self.neutral else {
            return Ok(None);
        };
        values
            .iter()
            .map(|&x| {
                self.scale
                    .category(x)
                    .ok_or_else(|| CliError::Usage(format!("neutral rating {x} is not on the scale")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn detector(&self, g: &Graph) -> Result<Detector, CliError> {
        self.detector_for(g.has_timestamps(), g.has_ratings())
    }

    pub fn detector_for(&self, has_timestamps: bool, has_ratings: bool) -> Result<Detector, CliError> {
        let score = ScoreConfig {
            base: self.base,
            signals: self.signals_for(has_timestamps, has_ratings)?,
            neutral: self.neutral_categories()?,
            kappa_scaling: self.kappa_scaling,
            ..ScoreConfig::default()
        };
        Ok(Detector::new(DetectorConfig {
            score,
            num_seeds: self.num_seeds,
            cap_exponent: self.cap_exponent,
            time_bin: self.time_bin,
            svd_seed: self.seed,
            ..DetectorConfig::default()
        }))
    }
}
