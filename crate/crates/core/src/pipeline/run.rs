use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::handles::{
    displaced_target, displacement_length, nine_dot_points, offset_point, pattern_at,
    pattern_space, ImageDims, MovePattern,
};
use crate::labels::{detection_json, propagate, Annotation};
use crate::mask::{contour_handles, contour_length, largest_region};
use crate::mls::{precompute_basis, HandleSet, PrecomputedBasis, MIN_HANDLE_SEPARATION};
use crate::pipeline::config::{Mode, ParamSnapshot, RunConfig, WarpRoute};
use crate::pipeline::dataset::{relative, Dataset, FileError};
use crate::raster::Raster;
use crate::sample::LabeledSample;
use crate::warp::{
    build_inverse_warp_field, build_warp_field, warp_image, Fill, Sampling, WarpField,
};

/// How a sample's handles were placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    NineDot,
    Contour,
}

/// Handles of one sample and the rule that displaces them.
///
/// `sources[..movable]` take part in move patterns; the rest are fixed anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub scheme: Scheme,
    pub sources: Vec<Point2>,
    pub movable: usize,
    pub directions: usize,
    pub length: f64,
    phi0: f64,
    step: f64,
    k_s: f64,
}

impl SamplePlan {
    pub fn for_sample(cfg: &RunConfig, sample: &LabeledSample) -> Result<Self> {
        let (w, h) = sample.image.dims();
        let dims = ImageDims::new(w, h);
        match cfg.mode {
            Mode::Classify => {
                let nd = &cfg.nine_dot;
                nd.validate()?;
                let sources = nine_dot_points(dims, nd.k_p)?;
                Ok(SamplePlan {
                    scheme: Scheme::NineDot,
                    movable: sources.len(),
                    sources,
                    directions: nd.direction_count(),
                    length: displacement_length(dims, nd.k_p, nd.k_l),
                    phi0: nd.phi0,
                    step: 360.0 * nd.k_s,
                    k_s: nd.k_s,
                })
            }
            Mode::Segment | Mode::Detect => {
                let mask = sample
                    .mask
                    .as_ref()
                    .ok_or_else(|| Error::MissingMask(sample.image_path.clone()))?;
                let region = largest_region(mask)?;
                let mut sources = contour_handles(&region, &cfg.contour)?;
                let movable = sources.len();
                if cfg.anchor_corners {
                    let (xm, ym) = ((w - 1) as f64, (h - 1) as f64);
                    for corner in [
                        Point2::new(0.0, 0.0),
                        Point2::new(xm, 0.0),
                        Point2::new(0.0, ym),
                        Point2::new(xm, ym),
                    ] {
                        if sources
                            .iter()
                            .all(|s| s.dist(corner) >= MIN_HANDLE_SEPARATION)
                        {
                            sources.push(corner);
                        }
                    }
                }
                Ok(SamplePlan {
                    scheme: Scheme::Contour,
                    sources,
                    movable,
                    directions: cfg.contour.direction_count(),
                    length: contour_length(&region, cfg.contour.k_l),
                    phi0: cfg.contour.phi0,
                    step: cfg.contour.phi_step,
                    k_s: 0.0,
                })
            }
        }
    }

    /// Number of distinct move patterns.
    pub fn capacity(&self) -> u128 {
        pattern_space(self.movable, self.directions)
    }

    pub fn pattern(&self, index: u64) -> Result<MovePattern> {
        pattern_at(self.movable, self.directions, index)
    }

    pub fn targets(&self, pattern: &MovePattern) -> Vec<Point2> {
        pattern.apply(&self.sources, |p, j| match self.scheme {
            Scheme::NineDot => displaced_target(p, self.length, self.phi0, self.k_s, j),
            Scheme::Contour => offset_point(p, self.length, self.phi0 + j as f64 * self.step),
        })
    }
}

/// Builds the backward field for one target set.
///
/// `basis` is the shared forward basis on `sources` and is required for
/// [`WarpRoute::Inverse`]; the role-swap route builds its own.
pub fn variant_field(
    route: WarpRoute,
    basis: Option<&PrecomputedBasis>,
    sources: &[Point2],
    targets: &[Point2],
    alpha: f64,
    dims: (u32, u32),
    g: u32,
) -> Result<WarpField> {
    match route {
        WarpRoute::Inverse => {
            let owned;
            let basis = match basis {
                Some(b) => b,
                None => {
                    owned = precompute_basis(sources, alpha, dims.0, dims.1, g)?;
                    &owned
                }
            };
            build_inverse_warp_field(basis, targets)
        }
        WarpRoute::RoleSwap => {
            let handles = HandleSet::new(sources.to_vec(), targets.to_vec(), alpha)?;
            let swapped = precompute_basis(handles.targets(), alpha, dims.0, dims.1, g)?;
            build_warp_field(&swapped, &handles, dims.0, dims.1)
        }
    }
}

/// One generated (or rejected) variant. Together with the source sample it
/// determines the output pixels exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub source_path: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source_mask: Option<String>,
    pub variant_index: u64,
    pub variant_id: String,
    pub scheme: Scheme,
    pub pattern: MovePattern,
    pub sources: Vec<Point2>,
    pub targets: Vec<Point2>,
    pub parameters: ParamSnapshot,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub output_image: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub output_mask: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub output_annotation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub annotation: Option<Annotation>,
    pub rejected: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

/// Everything a run produced, in sample order then variant order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub parameters: ParamSnapshot,
    pub variants_per_image: u64,
    pub requested: u64,
    pub emitted: u64,
    pub rejected: u64,
    pub errors: Vec<FileError>,
    pub records: Vec<VariantRecord>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl Manifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// True when any input file or sample failed.
    pub fn is_partial(&self) -> bool {
        !self.errors.is_empty()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Output file stem for a sample: its relative path without extension.
fn output_stem(rel: &str) -> String {
    match rel.rfind('.') {
        Some(dot) if !rel[dot..].contains('/') => rel[..dot].to_string(),
        _ => rel.to_string(),
    }
}

struct Rendered {
    image: Raster,
    mask: Option<Raster>,
    annotation: Option<Annotation>,
}

fn render(
    cfg: &ParamSnapshot,
    sample: &LabeledSample,
    field: &WarpField,
    variant_id: &str,
) -> Result<Rendered> {
    match cfg.mode {
        Mode::Classify => Ok(Rendered {
            image: warp_image(
                &sample.image,
                field,
                Sampling::Bilinear,
                Fill::ReplicateEdge,
            )?,
            mask: None,
            annotation: None,
        }),
        Mode::Segment | Mode::Detect => {
            let out = propagate(sample, field, variant_id)?;
            Ok(Rendered {
                image: out.image,
                mask: Some(out.mask),
                annotation: Some(out.annotation),
            })
        }
    }
}

/// Runs every sample of `dataset` through the configured augmentation and
/// writes images, masks, detection files and `manifest.json` under
/// `cfg.output_dir`.
///
/// The forward basis is built once per sample and shared by all of its
/// variants. Variants are rendered in parallel; records are gathered in
/// variant order, so the manifest bytes do not depend on scheduling.
pub fn run_augmentation(cfg: &RunConfig, dataset: &Dataset) -> Result<Manifest> {
    cfg.validate()?;
    let out_dir = &cfg.output_dir;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;

    let snapshot = cfg.snapshot();
    let mut errors = dataset.errors.clone();
    let mut records = Vec::new();
    for sample in &dataset.samples {
        let rel = dataset.relative_path(sample);
        match pool.install(|| run_sample(cfg, &snapshot, dataset, sample, &rel)) {
            Ok(mut recs) => records.append(&mut recs),
            Err(e) => {
                warn!("{rel}: {e}");
                errors.push(FileError {
                    path: rel,
                    reason: e.to_string(),
                });
            }
        }
    }
    errors.sort_by(|a, b| a.path.cmp(&b.path));

    let rejected = records.iter().filter(|r| r.rejected).count() as u64;
    let manifest = Manifest {
        parameters: snapshot,
        variants_per_image: cfg.variants_per_image,
        requested: cfg.variants_per_image * dataset.samples.len() as u64,
        emitted: records.len() as u64 - rejected,
        rejected,
        errors,
        records,
    };
    let path = out_dir.join(MANIFEST_NAME);
    std::fs::write(&path, manifest.to_json()?).map_err(io_err(&path))?;
    info!(
        "{} variants emitted, {} rejected, {} errors",
        manifest.emitted,
        manifest.rejected,
        manifest.errors.len()
    );
    Ok(manifest)
}

fn run_sample(
    cfg: &RunConfig,
    snapshot: &ParamSnapshot,
    dataset: &Dataset,
    sample: &LabeledSample,
    rel: &str,
) -> Result<Vec<VariantRecord>> {
    let plan = SamplePlan::for_sample(cfg, sample)?;
    let count = cfg.variants_per_image;
    if count as u128 > plan.capacity() {
        return Err(Error::Exhausted {
            requested: count,
            available: plan.capacity().min(u64::MAX as u128) as u64,
        });
    }
    let dims = sample.image.dims();
    let g = cfg.lattice_spacing;
    let basis = match cfg.warp_route {
        WarpRoute::Inverse => Some(precompute_basis(
            &plan.sources,
            cfg.alpha,
            dims.0,
            dims.1,
            g,
        )?),
        WarpRoute::RoleSwap => None,
    };
    let stem = output_stem(rel);
    if let Some(parent) = cfg.output_dir.join(&stem).parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let source_mask = sample
        .mask_path
        .as_ref()
        .map(|m| relative(&dataset.root, m));

    (0..count)
        .into_par_iter()
        .map(|index| {
            let pattern = plan.pattern(index)?;
            let targets = plan.targets(&pattern);
            let variant_id = format!("{}_v{index}", stem.rsplit('/').next().unwrap_or(&stem));
            let mut record = VariantRecord {
                source_path: rel.to_string(),
                source_mask: source_mask.clone(),
                variant_index: index,
                variant_id: variant_id.clone(),
                scheme: plan.scheme,
                pattern,
                sources: plan.sources.clone(),
                targets,
                parameters: snapshot.clone(),
                output_image: None,
                output_mask: None,
                output_annotation: None,
                annotation: None,
                rejected: false,
                reason: None,
            };
            let rendered = variant_field(
                cfg.warp_route,
                basis.as_ref(),
                &record.sources,
                &record.targets,
                cfg.alpha,
                dims,
                g,
            )
            .and_then(|field| render(snapshot, sample, &field, &variant_id));
            let rendered = match rendered {
                Ok(r) => r,
                Err(e @ Error::EmptyObject) => {
                    record.rejected = true;
                    record.reason = Some(e.to_string());
                    return Ok(record);
                }
                Err(e) => return Err(e),
            };
            write_outputs(
                &cfg.output_dir,
                &stem,
                index,
                snapshot.mode,
                &rendered,
                &mut record,
            )?;
            Ok(record)
        })
        .collect()
}

fn write_outputs(
    out_dir: &Path,
    stem: &str,
    index: u64,
    mode: Mode,
    rendered: &Rendered,
    record: &mut VariantRecord,
) -> Result<()> {
    let image_rel = format!("{stem}_v{index}.png");
    rendered.image.save_png(out_dir.join(&image_rel))?;
    record.output_image = Some(image_rel);
    if mode == Mode::Segment {
        if let Some(mask) = &rendered.mask {
            let mask_rel = format!("{stem}_v{index}_mask.png");
            mask.save_png(out_dir.join(&mask_rel))?;
            record.output_mask = Some(mask_rel);
        }
    }
    if let Some(ann) = &rendered.annotation {
        if mode == Mode::Detect {
            let json_rel = format!("{stem}_v{index}.json");
            let path = out_dir.join(&json_rel);
            std::fs::write(&path, detection_json(std::slice::from_ref(ann))?)
                .map_err(io_err(&path))?;
            record.output_annotation = Some(json_rel);
        }
        record.annotation = Some(ann.clone());
    }
    Ok(())
}

/// Pixels of a variant re-rendered from its record alone.
#[derive(Debug, Clone, PartialEq)]
pub struct Replayed {
    pub image: Raster,
    pub mask: Option<Raster>,
    pub annotation: Option<Annotation>,
}

/// Re-renders a variant from its manifest record and the source sample.
pub fn replay_variant(record: &VariantRecord, sample: &LabeledSample) -> Result<Replayed> {
    let p = &record.parameters;
    let field = variant_field(
        p.warp_route,
        None,
        &record.sources,
        &record.targets,
        p.alpha,
        sample.image.dims(),
        p.lattice_spacing,
    )?;
    let r = render(p, sample, &field, &record.variant_id)?;
    Ok(Replayed {
        image: r.image,
        mask: r.mask,
        annotation: r.annotation,
    })
}

/// Source file of a record, resolved against the dataset root.
pub fn record_source(root: &Path, record: &VariantRecord) -> PathBuf {
    if root.is_file() {
        root.to_path_buf()
    } else {
        root.join(&record.source_path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_drop_extension_only() {
        assert_eq!(output_stem("a/b/c.png"), "a/b/c");
        assert_eq!(output_stem("x.y/c"), "x.y/c");
        assert_eq!(output_stem("c"), "c");
    }

    #[test]
    fn nine_dot_plan_targets_match_scheme() {
        let cfg = RunConfig::default();
        let sample = LabeledSample::new("d/x.png", Raster::filled(28, 28, 1, 0).unwrap());
        let plan = SamplePlan::for_sample(&cfg, &sample).unwrap();
        assert_eq!(plan.capacity(), 5u128.pow(9) - 1);
        let pat = plan.pattern(5).unwrap();
        let t = plan.targets(&pat);
        let moved = pat.moved[0];
        assert_eq!(
            t[moved],
            displaced_target(
                plan.sources[moved],
                plan.length,
                45.0,
                0.25,
                pat.directions[0]
            )
        );
        assert_eq!(
            t.iter().zip(&plan.sources).filter(|(a, b)| a != b).count(),
            1
        );
    }

    #[test]
    fn contour_plan_has_anchors() {
        let mask = Raster::from_fn(64, 64, 1, |x, y| {
            let (dx, dy) = (x as f64 - 32.0, y as f64 - 32.0);
            [if dx * dx + dy * dy <= 400.0 { 255 } else { 0 }, 0, 0]
        })
        .unwrap();
        let sample = LabeledSample::new("s.png", Raster::filled(64, 64, 3, 9).unwrap())
            .with_mask(mask)
            .unwrap();
        let cfg = RunConfig {
            mode: Mode::Segment,
            ..Default::default()
        };
        let plan = SamplePlan::for_sample(&cfg, &sample).unwrap();
        assert_eq!(plan.movable, 8);
        assert_eq!(plan.sources.len(), 12);
        assert_eq!(plan.sources[8], Point2::new(0.0, 0.0));
        assert!((plan.length - 0.14 * 40.0).abs() < 1e-12);
        let t = plan.targets(&plan.pattern(0).unwrap());
        assert_eq!(&t[8..], &plan.sources[8..]);
    }
}
