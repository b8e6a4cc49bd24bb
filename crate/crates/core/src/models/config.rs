use std::fmt;
use std::str::FromStr;

use super::ModelError;
use crate::dsp::N_BINS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    Blstm,
    Cnn,
    CnnBlstm,
    SimilarityScalar,
    SimilarityTwoClass,
}

impl Architecture {
    pub const ALL: [Architecture; 5] = [
        Architecture::Blstm,
        Architecture::Cnn,
        Architecture::CnnBlstm,
        Architecture::SimilarityScalar,
        Architecture::SimilarityTwoClass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Blstm => "blstm",
            Architecture::Cnn => "cnn",
            Architecture::CnnBlstm => "cnn-blstm",
            Architecture::SimilarityScalar => "similarity-scalar",
            Architecture::SimilarityTwoClass => "similarity-2class",
        }
    }

    pub fn is_similarity(self) -> bool {
        matches!(self, Architecture::SimilarityScalar | Architecture::SimilarityTwoClass)
    }

    pub fn uses_cnn(self) -> bool {
        !matches!(self, Architecture::Blstm)
    }

    pub fn uses_blstm(self) -> bool {
        matches!(self, Architecture::Blstm | Architecture::CnnBlstm)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| ModelError::UnknownArchitecture(s.to_string()))
    }
}

/// Widths and regularization of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub architecture: Architecture,
    /// One entry per conv block; each block is three 3x3 conv layers.
    pub channels: Vec<usize>,
    pub blstm_hidden: usize,
    pub fc_hidden: usize,
    pub dropout_rate: f64,
    pub n_bins: usize,
}

impl ModelConfig {
    /// Default widths: channels `[16, 32, 64, 128]`, BLSTM-128, and FC-64
    /// (BLSTM, CNN) or FC-128 (CNN-BLSTM and the similarity heads).
    pub fn new(architecture: Architecture) -> Self {
        let fc_hidden = match architecture {
            Architecture::Blstm | Architecture::Cnn => 64,
            _ => 128,
        };
        Self {
            architecture,
            channels: vec![16, 32, 64, 128],
            blstm_hidden: 128,
            fc_hidden,
            dropout_rate: 0.3,
            n_bins: N_BINS,
        }
    }

    /// Shrinks every width by `factor`, keeping each at least 1.
    pub fn scaled(mut self, factor: f64) -> Self {
        let shrink = |w: usize| ((w as f64 * factor).round() as usize).max(1);
        self.channels = self.channels.iter().map(|&c| shrink(c)).collect();
        self.blstm_hidden = shrink(self.blstm_hidden);
        self.fc_hidden = shrink(self.fc_hidden);
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.architecture.uses_cnn() && self.channels.is_empty() {
            return bad("channel schedule is empty".into());
        }
        if self.channels.contains(&0) {
            return bad(format!("channel schedule {:?} has a zero width", self.channels));
        }
        if self.blstm_hidden == 0 || self.fc_hidden == 0 || self.n_bins == 0 {
            return bad("widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        Ok(())
    }

    /// Canonical `key=value` lines, keys sorted.
    pub fn to_text(&self) -> String {
        let channels: Vec<String> = self.channels.iter().map(|c| c.to_string()).collect();
        format!(
            "architecture={}\nblstm_hidden={}\nchannels={}\ndropout_rate={}\nfc_hidden={}\nn_bins={}\n",
            self.architecture,
            self.blstm_hidden,
            channels.join(","),
            self.dropout_rate,
            self.fc_hidden,
            self.n_bins
        )
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let mut cfg: Option<ModelConfig> = None;
        let mut pairs = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ModelError::InvalidConfig(format!("malformed line '{line}'")))?;
            if k == "architecture" {
                cfg = Some(ModelConfig::new(v.parse()?));
            } else {
                pairs.push((k.to_string(), v.to_string()));
            }
        }
        let mut cfg = cfg.ok_or_else(|| ModelError::InvalidConfig("missing architecture".into()))?;
        let num = |k: &str, v: &str| {
            v.parse::<usize>()
                .map_err(|_| ModelError::InvalidConfig(format!("{k}: '{v}' is not an integer")))
        };
        for (k, v) in pairs {
            match k.as_str() {
                "blstm_hidden" => cfg.blstm_hidden = num(&k, &v)?,
                "fc_hidden" => cfg.fc_hidden = num(&k, &v)?,
                "n_bins" => cfg.n_bins = num(&k, &v)?,
                "dropout_rate" => {
                    cfg.dropout_rate = v
                        .parse()
                        .map_err(|_| ModelError::InvalidConfig(format!("dropout_rate: '{v}'")))?
                }
                "channels" => {
                    cfg.channels = if v.is_empty() {
                        Vec::new()
                    } else {
                        v.split(',').map(|c| num(&k, c)).collect::<Result<_, _>>()?
                    }
                }
                other => {
                    return Err(ModelError::InvalidConfig(format!("unknown key '{other}'")));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_form_round_trips() {
        for arch in Architecture::ALL {
            let cfg = ModelConfig::new(arch).scaled(0.25);
            assert_eq!(ModelConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        }
    }

    #[test]
    fn unknown_architecture_is_rejected() {
        assert!(matches!(
            "transformer".parse::<Architecture>(),
            Err(ModelError::UnknownArchitecture(_))
        ));
    }

    #[test]
    fn table_widths_by_architecture() {
        assert_eq!(ModelConfig::new(Architecture::Blstm).fc_hidden, 64);
        assert_eq!(ModelConfig::new(Architecture::Cnn).fc_hidden, 64);
        assert_eq!(ModelConfig::new(Architecture::CnnBlstm).fc_hidden, 128);
        assert_eq!(ModelConfig::new(Architecture::Cnn).channels, vec![16, 32, 64, 128]);
    }

    #[test]
    fn invalid_widths_are_rejected() {
        let mut cfg = ModelConfig::new(Architecture::Cnn);
        cfg.channels.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::new(Architecture::Cnn);
        cfg.dropout_rate = 1.0;
        assert!(cfg.validate().is_err());
    }
}
