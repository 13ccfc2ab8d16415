use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Activation;

/// How the latent code enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conditioning {
    /// A ReLU modulator turns `z` into per-layer amplitudes.
    Modulated,
    /// `z` is concatenated with the (encoded) coordinates.
    Concat,
    /// Unconditioned single-signal network.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InputEncoding {
    Raw,
    /// Random Gaussian Fourier features `[cos(2 pi B x), sin(2 pi B x)]`, `B ~ N(0, sigma^2)`.
    FourierFeatures {
        sigma: f64,
        feature_count: usize,
    },
}

/// Activation of the synthesis hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthActivation {
    Sine,
    Relu,
}

impl From<SynthActivation> for Activation {
    fn from(a: SynthActivation) -> Self {
        match a {
            SynthActivation::Sine => Activation::Sine,
            SynthActivation::Relu => Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Coordinate dimension `n`.
    pub input_dim: usize,
    /// Signal dimension `m`.
    pub output_dim: usize,
    /// Latent dimension `d`.
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    /// Number of hidden synthesis layers `K`.
    #[serde(default = "default_layers")]
    pub hidden_layers: usize,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    #[serde(default = "default_conditioning")]
    pub conditioning: Conditioning,
    #[serde(default = "default_encoding")]
    pub input_encoding: InputEncoding,
    #[serde(default = "default_activation")]
    pub activation: SynthActivation,
    /// Initial value of every modulator bias.
    #[serde(default)]
    pub modulator_bias: f64,
    /// Divisor of the hidden sine layers' init bound `sqrt(6/fan_in)`.
    /// `None` uses `omega0`.
    #[serde(default)]
    pub hidden_init_omega: Option<f64>,
}

fn default_latent_dim() -> usize {
    256
}
fn default_layers() -> usize {
    3
}
fn default_width() -> usize {
    64
}
fn default_omega0() -> f64 {
    30.0
}
fn default_conditioning() -> Conditioning {
    Conditioning::Modulated
}
fn default_encoding() -> InputEncoding {
    InputEncoding::Raw
}
fn default_activation() -> SynthActivation {
    SynthActivation::Sine
}

impl ModelConfig {
    /// Modulated sine network with the default `d = 256`, `K = 3`, width 64, `omega0 = 30`.
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            latent_dim: default_latent_dim(),
            hidden_layers: default_layers(),
            width: default_width(),
            omega0: default_omega0(),
            conditioning: Conditioning::Modulated,
            input_encoding: InputEncoding::Raw,
            activation: SynthActivation::Sine,
            modulator_bias: 0.0,
            hidden_init_omega: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("output_dim", self.output_dim),
            ("latent_dim", self.latent_dim),
            ("hidden_layers", self.hidden_layers),
            ("width", self.width),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be >= 1")));
            }
        }
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::config("omega0 must be a positive finite number"));
        }
        if !self.modulator_bias.is_finite() {
            return Err(Error::config("modulator_bias must be finite"));
        }
        if let Some(w) = self.hidden_init_omega {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::config("hidden_init_omega must be a positive finite number"));
            }
        }
        if let InputEncoding::FourierFeatures { sigma, feature_count } = self.input_encoding {
            if self.activation != SynthActivation::Relu {
                return Err(Error::config(
                    "Fourier-feature encoding is only available for ReLU synthesis networks",
                ));
            }
            if feature_count == 0 || !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::config("Fourier features need feature_count >= 1 and sigma > 0"));
            }
        }
        Ok(())
    }

    /// Length of the coordinate encoding fed to the synthesis network.
    pub fn coord_features(&self) -> usize {
        match self.input_encoding {
            InputEncoding::Raw => self.input_dim,
            InputEncoding::FourierFeatures { feature_count, .. } => 2 * feature_count,
        }
    }

    /// Length of the synthesis network input `h_0`.
    pub fn synth_input_dim(&self) -> usize {
        match self.conditioning {
            Conditioning::Concat => self.coord_features() + self.latent_dim,
            Conditioning::Modulated | Conditioning::None => self.coord_features(),
        }
    }

    pub fn uses_latent(&self) -> bool {
        self.conditioning != Conditioning::None
    }

    pub fn is_modulated(&self) -> bool {
        self.conditioning == Conditioning::Modulated
    }
}
