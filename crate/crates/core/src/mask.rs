//! Object regions in label masks and contour-anchored handles.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Point2;
use crate::handles::offset_point;
use crate::raster::Raster;

/// Axis-aligned extent of a pixel set. `width = max_x - min_x`, likewise `height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBox {
    pub min_x: u32,
    pub min_y: u32,
    pub width: u32,
    pub height: u32,
}

impl PixelBox {
    pub fn max_x(&self) -> u32 {
        self.min_x + self.width
    }

    pub fn max_y(&self) -> u32 {
        self.min_y + self.height
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.min_x && x <= self.max_x() && y >= self.min_y && y <= self.max_y()
    }
}

/// One 8-connected foreground component.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionModel {
    /// Member pixels in raster-scan order.
    pub pixels: Vec<(u32, u32)>,
    pub bbox: PixelBox,
    /// Intensity-weighted centroid, once computed.
    pub barycenter: Option<Point2>,
    /// Outer boundary in tracing order, once traced.
    pub contour: Vec<Point2>,
}

impl RegionModel {
    fn from_pixels(mut pixels: Vec<(u32, u32)>) -> Self {
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for &(x, y) in &pixels {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        RegionModel {
            pixels,
            bbox: PixelBox {
                min_x: x0,
                min_y: y0,
                width: x1 - x0,
                height: y1 - y0,
            },
            barycenter: None,
            contour: Vec::new(),
        }
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    /// Fills in the barycenter and contour.
    pub fn analyze(mut self, mask: &Raster) -> Result<Self> {
        self.barycenter = Some(barycenter(&self, mask)?);
        self.contour = trace_contour(&self)?;
        Ok(self)
    }

    /// Membership bitmap over the bbox padded by one pixel on each side.
    fn bitmap(&self) -> Bitmap {
        let w = self.bbox.width as usize + 3;
        let h = self.bbox.height as usize + 3;
        let mut bits = vec![false; w * h];
        for &(x, y) in &self.pixels {
            let lx = (x - self.bbox.min_x) as usize + 1;
            let ly = (y - self.bbox.min_y) as usize + 1;
            bits[ly * w + lx] = true;
        }
        Bitmap { w, h, bits }
    }
}

struct Bitmap {
    w: usize,
    h: usize,
    bits: Vec<bool>,
}

impl Bitmap {
    fn get(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.w
            && (y as usize) < self.h
            && self.bits[y as usize * self.w + x as usize]
    }
}

const NEIGHBORS_8: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// 8-connected foreground components of a 1-channel mask, largest first.
///
/// Ties in area keep the order in which components are met in a raster scan.
/// Barycenter and contour are left empty; see [`RegionModel::analyze`].
pub fn connected_components(mask: &Raster) -> Result<Vec<RegionModel>> {
    if mask.channels() != 1 {
        return invalid("mask must have exactly one channel");
    }
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut seen = vec![false; (w * h) as usize];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            let idx = (y * w + x) as usize;
            if seen[idx] || mask.value(x as u32, y as u32) == 0 {
                continue;
            }
            seen[idx] = true;
            queue.push_back((x, y));
            let mut pixels = Vec::new();
            while let Some((cx, cy)) = queue.pop_front() {
                pixels.push((cx as u32, cy as u32));
                for (dx, dy) in NEIGHBORS_8 {
                    let (nx, ny) = (cx + dx, cy + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let nidx = (ny * w + nx) as usize;
                    if !seen[nidx] && mask.value(nx as u32, ny as u32) != 0 {
                        seen[nidx] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
            regions.push(RegionModel::from_pixels(pixels));
        }
    }
    regions.sort_by_key(|r| std::cmp::Reverse(r.area()));
    Ok(regions)
}

/// The largest component with barycenter and contour filled in.
pub fn largest_region(mask: &Raster) -> Result<RegionModel> {
    connected_components(mask)?
        .into_iter()
        .next()
        .ok_or(Error::EmptyObject)?
        .analyze(mask)
}

/// Centroid of the region weighted by the mask's gray values.
pub fn barycenter(region: &RegionModel, mask: &Raster) -> Result<Point2> {
    if region.pixels.is_empty() {
        return invalid("region is empty");
    }
    let (mut su, mut sv, mut total) = (0.0, 0.0, 0.0);
    for &(u, v) in &region.pixels {
        let f = mask.value(u, v) as f64;
        su += u as f64 * f;
        sv += v as f64 * f;
        total += f;
    }
    if total <= 0.0 {
        return invalid("region has zero total intensity");
    }
    Ok(Point2::new(su / total, sv / total))
}

// Clockwise on screen (y down), starting west.
const MOORE: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn moore_index(dx: i64, dy: i64) -> usize {
    MOORE
        .iter()
        .position(|&d| d == (dx, dy))
        .expect("backtrack is always a Moore neighbor")
}

/// Outer boundary by Moore-neighbor tracing.
///
/// Starts at the first pixel in raster-scan order and walks clockwise,
/// stopping when the first move out of the start pixel is about to repeat.
/// That is Jacob's criterion stated on moves rather than entry directions, so
/// it also terminates when the start pixel is a pinch point. The sequence is
/// closed (its last pixel neighbors the first) and every listed pixel has a
/// 4-neighbor outside the region.
pub fn trace_contour(region: &RegionModel) -> Result<Vec<Point2>> {
    let Some(&(sx, sy)) = region.pixels.first() else {
        return invalid("region is empty");
    };
    let map = region.bitmap();
    let to_local = |x: u32, y: u32| {
        (
            (x - region.bbox.min_x) as i64 + 1,
            (y - region.bbox.min_y) as i64 + 1,
        )
    };
    let to_global = |(x, y): (i64, i64)| {
        Point2::new(
            (x - 1) as f64 + region.bbox.min_x as f64,
            (y - 1) as f64 + region.bbox.min_y as f64,
        )
    };

    let start = to_local(sx, sy);
    let mut contour = vec![to_global(start)];
    let mut cur = start;
    // raster-scan first pixel: its west neighbor is outside the region
    let mut back = (start.0 - 1, start.1);
    let mut first_move = None;
    // bounded by the number of (pixel, entry direction) states
    let limit = 8 * region.pixels.len() + 8;
    for _ in 0..limit {
        let b = moore_index(back.0 - cur.0, back.1 - cur.1);
        let mut next = None;
        for step in 1..=8 {
            let k = (b + step) % 8;
            let cand = (cur.0 + MOORE[k].0, cur.1 + MOORE[k].1);
            if map.get(cand.0, cand.1) {
                let prev = (b + step - 1) % 8;
                next = Some((cand, (cur.0 + MOORE[prev].0, cur.1 + MOORE[prev].1)));
                break;
            }
        }
        let Some((n, nb)) = next else {
            // isolated pixel
            return Ok(contour);
        };
        match first_move {
            None => first_move = Some(n),
            Some(f) if cur == start && n == f => {
                contour.pop();
                return Ok(contour);
            }
            Some(_) => {}
        }
        cur = n;
        back = nb;
        contour.push(to_global(cur));
    }
    invalid("contour tracing did not close")
}

/// Parameters of the contour-anchored handle scheme. Angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourHandleConfig {
    /// Ray angles from the barycenter.
    pub ray_angles: Vec<f64>,
    /// Angular tolerance for a contour point to count as on a ray.
    pub xi: f64,
    /// Displacement magnitude as a fraction of the smaller bbox side.
    pub k_l: f64,
    pub phi0: f64,
    pub phi_step: f64,
    /// Handles closer than this to an already selected one are merged into it.
    pub dedupe_dist: f64,
}

impl Default for ContourHandleConfig {
    fn default() -> Self {
        ContourHandleConfig {
            ray_angles: (0..8).map(|i| i as f64 * 45.0).collect(),
            xi: 6.0,
            k_l: 0.14,
            phi0: 45.0,
            phi_step: 90.0,
            dedupe_dist: 1.5,
        }
    }
}

impl ContourHandleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return invalid(format!("xi must be positive, got {}", self.xi));
        }
        if !(self.k_l > 0.0 && self.k_l < 1.0) {
            return invalid(format!("contour k_l must lie in (0, 1), got {}", self.k_l));
        }
        if !(self.phi_step > 0.0 && self.phi_step <= 360.0) {
            return invalid(format!(
                "phi_step must lie in (0, 360], got {}",
                self.phi_step
            ));
        }
        if !self.phi0.is_finite() || self.dedupe_dist.is_nan() || self.dedupe_dist < 0.0 {
            return invalid("phi0 must be finite and dedupe_dist non-negative");
        }
        if self.ray_angles.is_empty() || !self.ray_angles.iter().all(|a| a.is_finite()) {
            return invalid("ray_angles must be a non-empty list of finite angles");
        }
        Ok(())
    }

    /// Number of distinct displacement directions, `floor(360 / phi_step)`.
    pub fn direction_count(&self) -> usize {
        (360.0 / self.phi_step + 1e-9).floor().max(1.0) as usize
    }
}

/// Signed difference `a - b` wrapped into `(-180, 180]` degrees.
fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

// Crossings within this many pixels of the farthest one belong to the same
// (outermost) crossing of the ray with the contour.
const OUTER_BAND: f64 = 1.5;

/// Contour point where the ray from the barycenter at angle `beta` leaves the region.
///
/// Candidates are contour points whose bearing from the barycenter is within
/// `xi` degrees of `beta`. Of those, the ones within [`OUTER_BAND`] of the
/// farthest form the outermost crossing, and the one closest to the ray line
/// is returned.
pub fn ray_intersection(region: &RegionModel, beta: f64, xi: f64) -> Result<Point2> {
    if xi.is_nan() || xi <= 0.0 {
        return invalid(format!("xi must be positive, got {xi}"));
    }
    let Some(center) = region.barycenter else {
        return invalid("region barycenter not computed");
    };
    if region.contour.is_empty() {
        return invalid("region contour not traced");
    }
    let dir = Point2::from_angle_deg(beta);
    let candidates: Vec<(Point2, f64)> = region
        .contour
        .iter()
        .filter_map(|&c| {
            let d = c - center;
            let r = d.norm();
            if r == 0.0 {
                return None;
            }
            let bearing = d.y.atan2(d.x).to_degrees();
            (angle_diff(bearing, beta).abs() <= xi).then_some((c, r))
        })
        .collect();
    let Some(r_max) = candidates.iter().map(|c| c.1).reduce(f64::max) else {
        return Err(Error::NoIntersection { beta, xi });
    };
    let off_ray = |p: Point2| {
        let d = p - center;
        (d.x * dir.y - d.y * dir.x).abs()
    };
    let mut best: Option<(Point2, f64)> = None;
    for &(c, r) in &candidates {
        if r < r_max - OUTER_BAND {
            continue;
        }
        let off = off_ray(c);
        if best.is_none_or(|(_, b)| off < b) {
            best = Some((c, off));
        }
    }
    Ok(best
        .expect("the farthest candidate is always in the band")
        .0)
}

/// One source handle per ray angle, dropping rays that miss and merging near-duplicates.
pub fn contour_handles(region: &RegionModel, cfg: &ContourHandleConfig) -> Result<Vec<Point2>> {
    cfg.validate()?;
    let mut out: Vec<Point2> = Vec::with_capacity(cfg.ray_angles.len());
    for &beta in &cfg.ray_angles {
        match ray_intersection(region, beta, cfg.xi) {
            Ok(p) => {
                if out
                    .iter()
                    .all(|q| q.dist(p) >= cfg.dedupe_dist.max(crate::mls::MIN_HANDLE_SEPARATION))
                {
                    out.push(p);
                }
            }
            Err(Error::NoIntersection { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if out.len() < 3 {
        return Err(Error::DegenerateRegion { found: out.len() });
    }
    Ok(out)
}

/// Displacement length for the contour scheme: `k_l · min(bbox width, bbox height)`.
pub fn contour_length(region: &RegionModel, k_l: f64) -> f64 {
    k_l * region.bbox.width.min(region.bbox.height) as f64
}

/// Target of a contour handle moved in direction `i`: `φ_i = φ_0 + i·phi_step`.
pub fn contour_target(
    p: Point2,
    region: &RegionModel,
    cfg: &ContourHandleConfig,
    i: usize,
) -> Point2 {
    offset_point(
        p,
        contour_length(region, cfg.k_l),
        cfg.phi0 + i as f64 * cfg.phi_step,
    )
}
