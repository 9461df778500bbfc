use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::handles::NineDotConfig;
use crate::mask::ContourHandleConfig;
use crate::mls::DEFAULT_ALPHA;

/// Which annotations accompany the images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Class label only; nine-dot handles.
    Classify,
    /// Label mask; contour handles; emits warped masks.
    Segment,
    /// Label mask; contour handles; emits boxes derived from warped masks.
    Detect,
}

impl Mode {
    pub fn uses_mask(self) -> bool {
        !matches!(self, Mode::Classify)
    }
}

/// How the backward warp field of a variant is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarpRoute {
    /// One basis on the source handles per sample; each variant's forward
    /// lattice is inverted numerically.
    #[default]
    Inverse,
    /// A fresh basis on the role-swapped handles for every variant.
    RoleSwap,
}

/// Everything that controls a run. Field names double as the JSON config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub nine_dot: NineDotConfig,
    pub contour: ContourHandleConfig,
    pub alpha: f64,
    pub lattice_spacing: u32,
    pub variants_per_image: u64,
    /// Pin the four image corners (`q = p`) in the mask-driven modes.
    pub anchor_corners: bool,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub parallelism: usize,
    pub warp_route: WarpRoute,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Classify,
            nine_dot: NineDotConfig::default(),
            contour: ContourHandleConfig::default(),
            alpha: DEFAULT_ALPHA,
            lattice_spacing: 1,
            variants_per_image: 2004,
            anchor_corners: true,
            output_dir: PathBuf::from("out"),
            parallelism: 0,
            warp_route: WarpRoute::Inverse,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.nine_dot.validate()?;
        self.contour.validate()?;
        if !(self.alpha.is_finite() && self.alpha > 1.0) {
            return invalid(format!("alpha must be > 1, got {}", self.alpha));
        }
        if self.lattice_spacing == 0 {
            return invalid("lattice_spacing must be >= 1");
        }
        if self.variants_per_image == 0 {
            return invalid("variants_per_image must be >= 1");
        }
        Ok(())
    }

    /// The parameters that determine output pixels and annotations.
    pub fn snapshot(&self) -> ParamSnapshot {
        ParamSnapshot {
            mode: self.mode,
            alpha: self.alpha,
            lattice_spacing: self.lattice_spacing,
            warp_route: self.warp_route,
            nine_dot: (self.mode == Mode::Classify).then_some(self.nine_dot),
            contour: self.mode.uses_mask().then(|| self.contour.clone()),
            anchor_corners: self.mode.uses_mask() && self.anchor_corners,
        }
    }
}

/// Output-relevant parameters recorded with every variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSnapshot {
    pub mode: Mode,
    pub alpha: f64,
    pub lattice_spacing: u32,
    pub warp_route: WarpRoute,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nine_dot: Option<NineDotConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub contour: Option<ContourHandleConfig>,
    pub anchor_corners: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_roundtrip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"mode": "detect", "nine_dot": {"k_p": 0.3}, "lattice_spacing": 4}"#,
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::Detect);
        assert_eq!(cfg.nine_dot.k_p, 0.3);
        assert_eq!(cfg.nine_dot.k_l, 0.14);
        assert_eq!(cfg.lattice_spacing, 4);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let cfg = RunConfig {
            alpha: 1.0,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig {
            variants_per_image: 0,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
