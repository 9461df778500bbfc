use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::raster::Raster;

/// One input image with its optional class label and label mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub image_path: PathBuf,
    pub image: Raster,
    pub class_label: Option<String>,
    pub mask: Option<Raster>,
    /// Mask file the mask was read from, when loaded from disk.
    pub mask_path: Option<PathBuf>,
}

impl LabeledSample {
    pub fn new(image_path: impl Into<PathBuf>, image: Raster) -> Self {
        LabeledSample {
            image_path: image_path.into(),
            image,
            class_label: None,
            mask: None,
            mask_path: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.class_label = Some(label.into());
        self
    }

    /// Attaches a mask; it must match the image dimensions and have one channel.
    pub fn with_mask(mut self, mask: Raster) -> Result<Self> {
        if mask.dims() != self.image.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.image.dims(),
                actual: mask.dims(),
            });
        }
        self.mask = Some(mask.first_channel());
        Ok(self)
    }
}
