//! Annotation propagation through a deformation.
//!
//! Boxes are always recomputed from deformed object pixels. Deforming the
//! corners of the original box does not bound the deformed object.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Point2;
use crate::raster::Raster;
use crate::sample::LabeledSample;
use crate::warp::{warp_image, warp_mask, Fill, Sampling, WarpField};

/// Axis-aligned box: min corner `(x, y)`, horizontal extent `w`, vertical extent `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn max_x(&self) -> f64 {
        self.x + self.w
    }

    pub fn max_y(&self) -> f64 {
        self.y + self.h
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x && p.x <= self.max_x() && p.y >= self.y && p.y <= self.max_y()
    }

    /// Restricts the box to pixel centers `[0, width-1] × [0, height-1]`.
    pub fn clamp_to(&self, width: u32, height: u32) -> BBox {
        let (xmax, ymax) = ((width - 1) as f64, (height - 1) as f64);
        let x0 = self.x.clamp(0.0, xmax);
        let y0 = self.y.clamp(0.0, ymax);
        let x1 = self.max_x().clamp(0.0, xmax);
        let y1 = self.max_y().clamp(0.0, ymax);
        BBox {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }
}

/// Tight box around a point set.
pub fn bbox_from_points(points: &[Point2]) -> Result<BBox> {
    let Some(first) = points.first() else {
        return invalid("cannot bound an empty point set");
    };
    let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
    for p in &points[1..] {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    Ok(BBox {
        x: x0,
        y: y0,
        w: x1 - x0,
        h: y1 - y0,
    })
}

/// Tight box around every nonzero pixel of a mask.
pub fn bbox_from_mask(mask: &Raster) -> Result<BBox> {
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
    let mut any = false;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.value(x, y) != 0 {
                any = true;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    if !any {
        return Err(Error::EmptyObject);
    }
    Ok(BBox {
        x: x0 as f64,
        y: y0 as f64,
        w: (x1 - x0) as f64,
        h: (y1 - y0) as f64,
    })
}

/// Class label with its box, tied to the variant that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub class_label: String,
    pub bbox: BBox,
    pub source_variant: String,
}

/// One entry of the per-image detection document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub class: String,
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl From<&Annotation> for Detection {
    fn from(a: &Annotation) -> Self {
        Detection {
            class: a.class_label.clone(),
            x: a.bbox.x.round() as i64,
            y: a.bbox.y.round() as i64,
            w: a.bbox.w.round() as i64,
            h: a.bbox.h.round() as i64,
        }
    }
}

/// Serializes the detection document for one image.
pub fn detection_json(annotations: &[Annotation]) -> Result<String> {
    let dets: Vec<Detection> = annotations.iter().map(Detection::from).collect();
    Ok(serde_json::to_string_pretty(&dets)?)
}

/// Label used when a sample has none.
pub const DEFAULT_CLASS: &str = "object";

/// Deformed image, mask and box for one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagated {
    pub image: Raster,
    pub mask: Raster,
    pub annotation: Annotation,
}

/// Warps the sample's image and mask with the same field and boxes the warped mask.
///
/// Fails with [`Error::EmptyObject`] when the object leaves the frame; the
/// caller records that variant as rejected.
pub fn propagate(sample: &LabeledSample, field: &WarpField, variant: &str) -> Result<Propagated> {
    let Some(mask) = &sample.mask else {
        return invalid(format!("{} has no mask", sample.image_path.display()));
    };
    let image = warp_image(
        &sample.image,
        field,
        Sampling::Bilinear,
        Fill::ReplicateEdge,
    )?;
    let mask = warp_mask(mask, field)?;
    let bbox = match bbox_from_mask(&mask) {
        Ok(b) => b.clamp_to(mask.width(), mask.height()),
        Err(e) => {
            warn!("{variant}: warped mask is empty, variant rejected");
            return Err(e);
        }
    };
    let class_label = sample
        .class_label
        .clone()
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| DEFAULT_CLASS.to_string());
    Ok(Propagated {
        image,
        mask,
        annotation: Annotation {
            class_label,
            bbox,
            source_variant: variant.to_string(),
        },
    })
}
