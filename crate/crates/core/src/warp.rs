//! Backward warp fields and raster resampling.
//!
//! A [`WarpField`] stores, for every lattice vertex of the *output* raster, the
//! coordinate in the *source* raster that should be sampled there. Pixels
//! between vertices interpolate those coordinates bilinearly. Two ways to build
//! one are provided:
//!
//! * [`build_warp_field`] evaluates the transform of the role-swapped handle
//!   set (sources `q`, targets `p`) directly at each output vertex. Its basis
//!   depends on the targets, so it is rebuilt for every variant.
//! * [`build_inverse_warp_field`] evaluates the forward transform with a basis
//!   on the original sources `p`, which is shared by every target set, and
//!   inverts the resulting forward lattice numerically.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Mat2, Point2};
use crate::mls::{lattice_len, HandleSet, PrecomputedBasis};
use crate::raster::Raster;

/// Source-sample coordinates on a lattice over the output raster.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpField {
    width: u32,
    height: u32,
    lattice_spacing: u32,
    cols: usize,
    rows: usize,
    samples: Vec<Point2>,
}

impl WarpField {
    /// Wraps row-major vertex samples. `samples.len()` must match the lattice size.
    pub fn from_samples(width: u32, height: u32, g: u32, samples: Vec<Point2>) -> Result<Self> {
        if width == 0 || height == 0 || g == 0 {
            return invalid("warp field dims and spacing must be positive");
        }
        let (cols, rows) = (lattice_len(width, g), lattice_len(height, g));
        if samples.len() != cols * rows {
            return invalid(format!(
                "{} samples for a {cols}x{rows} lattice",
                samples.len()
            ));
        }
        if !samples.iter().all(|p| p.is_finite()) {
            return invalid("warp field samples must be finite");
        }
        Ok(WarpField {
            width,
            height,
            lattice_spacing: g,
            cols,
            rows,
            samples,
        })
    }

    /// The field that samples every pixel at its own position.
    pub fn identity(width: u32, height: u32, g: u32) -> Result<Self> {
        let (cols, rows) = (lattice_len(width, g), lattice_len(height, g));
        let gf = g as f64;
        let samples = (0..rows)
            .flat_map(|j| (0..cols).map(move |i| Point2::new(i as f64 * gf, j as f64 * gf)))
            .collect();
        WarpField::from_samples(width, height, g, samples)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn lattice_spacing(&self) -> u32 {
        self.lattice_spacing
    }

    pub fn lattice_dims(&self) -> (usize, usize) {
        (self.cols, self.rows)
    }

    pub fn samples(&self) -> &[Point2] {
        &self.samples
    }

    #[inline]
    pub fn vertex_sample(&self, i: usize, j: usize) -> Point2 {
        self.samples[j * self.cols + i]
    }

    /// Source coordinate for output pixel `(x, y)`.
    #[inline]
    pub fn source_coord(&self, x: u32, y: u32) -> Point2 {
        let g = self.lattice_spacing;
        if g == 1 {
            return self.samples[y as usize * self.cols + x as usize];
        }
        let (i, j) = ((x / g) as usize, (y / g) as usize);
        let gf = g as f64;
        let s = (x % g) as f64 / gf;
        let t = (y % g) as f64 / gf;
        let p00 = self.vertex_sample(i, j);
        if s == 0.0 && t == 0.0 {
            return p00;
        }
        let p10 = self.vertex_sample(i + 1, j);
        let p01 = self.vertex_sample(i, j + 1);
        let p11 = self.vertex_sample(i + 1, j + 1);
        bilerp(p00, p10, p01, p11, s, t)
    }
}

#[inline]
fn bilerp(p00: Point2, p10: Point2, p01: Point2, p11: Point2, s: f64, t: f64) -> Point2 {
    let top = p00 + s * (p10 - p00);
    let bottom = p01 + s * (p11 - p01);
    top + t * (bottom - top)
}

/// Backward field from a basis built on the role-swapped handles.
///
/// `basis` must have been built from `handles.targets()`; each output vertex is
/// mapped through the transform that carries `q_i` back to `p_i`.
pub fn build_warp_field(
    basis: &PrecomputedBasis,
    handles: &HandleSet,
    width: u32,
    height: u32,
) -> Result<WarpField> {
    if basis.sources() != handles.targets() {
        return invalid("basis was not built from the role-swapped handle set");
    }
    if (basis.width(), basis.height()) != (width, height) {
        return Err(Error::DimensionMismatch {
            expected: (basis.width(), basis.height()),
            actual: (width, height),
        });
    }
    let samples = basis.transform_lattice(handles.sources())?;
    WarpField::from_samples(width, height, basis.lattice_spacing(), samples)
}

/// Residual below which the inversion stops, in pixels.
const INVERSE_TOLERANCE: f64 = 1e-9;
const INVERSE_MAX_ITERS: usize = 32;
/// Cells visited when following a preimage across cell borders.
const CELL_WALK_LIMIT: usize = 8;
/// Cell-local tolerance for a preimage on a shared cell edge.
const CELL_EDGE_SLACK: f64 = 1e-9;

/// Backward field that inverts the forward transform of `basis` (built on the
/// original sources) for the given targets.
///
/// The forward map is evaluated at every lattice vertex from the cached basis,
/// extended bilinearly between vertices (linearly beyond the border), and each
/// output vertex `v` is solved for `F(u) = v` in closed form on the cell that
/// contains `v - (F(v) - v)`, walking to neighboring cells if the preimage lies
/// elsewhere. Where the map folds over, Newton iteration takes over and keeps
/// the iterate with the smallest residual.
pub fn build_inverse_warp_field(basis: &PrecomputedBasis, targets: &[Point2]) -> Result<WarpField> {
    let forward = basis.transform_lattice(targets)?;
    let (cols, rows) = basis.lattice_dims();
    let g = basis.lattice_spacing();
    let displacement: Vec<Point2> = (0..rows)
        .flat_map(|j| (0..cols).map(move |i| (i, j)))
        .zip(&forward)
        .map(|((i, j), f)| *f - basis.vertex(i, j))
        .collect();
    let lattice = DisplacementLattice {
        cols,
        rows,
        g: g as f64,
        disp: &displacement,
    };
    let mut samples = Vec::with_capacity(cols * rows);
    for j in 0..rows {
        for i in 0..cols {
            let v = basis.vertex(i, j);
            samples.push(lattice.invert(v, displacement[j * cols + i]));
        }
    }
    WarpField::from_samples(basis.width(), basis.height(), g, samples)
}

struct DisplacementLattice<'a> {
    cols: usize,
    rows: usize,
    g: f64,
    disp: &'a [Point2],
}

impl DisplacementLattice<'_> {
    /// Displacement at `u` and its Jacobian, bilinear inside the lattice and
    /// extrapolated from the nearest border cell outside it.
    fn eval(&self, u: Point2) -> (Point2, Mat2) {
        let fx = u.x / self.g;
        let fy = u.y / self.g;
        // float-to-usize casts truncate and saturate negatives to 0
        let i = (fx as usize).min(self.cols - 2);
        let j = (fy as usize).min(self.rows - 2);
        let s = fx - i as f64;
        let t = fy - j as f64;
        let d00 = self.disp[j * self.cols + i];
        let d10 = self.disp[j * self.cols + i + 1];
        let d01 = self.disp[(j + 1) * self.cols + i];
        let d11 = self.disp[(j + 1) * self.cols + i + 1];
        let d = bilerp(d00, d10, d01, d11, s, t);
        let ds = (1.0 - t) * (d10 - d00) + t * (d11 - d01);
        let dt = (1.0 - s) * (d01 - d00) + s * (d11 - d10);
        let inv_g = 1.0 / self.g;
        // columns are the partial derivatives along x and y
        let jac = Mat2 {
            m11: 1.0 + ds.x * inv_g,
            m12: dt.x * inv_g,
            m21: ds.y * inv_g,
            m22: 1.0 + dt.y * inv_g,
        };
        (d, jac)
    }

    /// Forward position of vertex `(i, j)`.
    #[inline]
    fn corner(&self, i: usize, j: usize) -> Point2 {
        let d = self.disp[j * self.cols + i];
        Point2::new(i as f64 * self.g + d.x, j as f64 * self.g + d.y)
    }

    /// Cell-local `(s, t)` with `F(s, t) = v` on the bilinear patch of cell
    /// `(i, j)`, preferring the root nearest the cell.
    ///
    /// The patch is `a + s·e + t·f + s·t·k` with `a` the image of vertex
    /// `(i, j)`; `t` solves the quadratic obtained by crossing both sides with
    /// `e + t·k`.
    fn cell_preimage(&self, i: usize, j: usize, v: Point2) -> Option<(f64, f64)> {
        let a = self.corner(i, j);
        let e = self.corner(i + 1, j) - a;
        let f = self.corner(i, j + 1) - a;
        let k = a - self.corner(i + 1, j) + self.corner(i + 1, j + 1) - self.corner(i, j + 1);
        let h = v - a;
        let cross = |p: Point2, q: Point2| p.x * q.y - p.y * q.x;
        let k2 = cross(k, f);
        let k1 = cross(e, f) + cross(h, k);
        let k0 = cross(h, e);
        let solve_s = |t: f64| {
            let den = e + t * k;
            let num = h - t * f;
            if den.x.abs() >= den.y.abs() {
                num.x / den.x
            } else {
                num.y / den.y
            }
        };
        if k2.abs() <= 1e-12 * k1.abs() {
            let t = -k0 / k1;
            return t.is_finite().then(|| (solve_s(t), t));
        }
        let disc = k1 * k1 - 4.0 * k2 * k0;
        if disc < 0.0 {
            return None;
        }
        let q = -0.5 * (k1 + disc.sqrt().copysign(k1));
        // k0/q is the root that stays bounded as the patch tends to affine
        let mut best: Option<((f64, f64), f64)> = None;
        for t in [k0 / q, q / k2] {
            let st = (solve_s(t), t);
            if !(st.0.is_finite() && t.is_finite()) {
                continue;
            }
            let out = self.outside(i, j, st);
            if out <= CELL_EDGE_SLACK {
                return Some(st);
            }
            if best.is_none_or(|(_, o)| out < o) {
                best = Some((st, out));
            }
        }
        best.map(|(st, _)| st)
    }

    /// How far cell-local `(s, t)` lies outside the part of the domain that
    /// cell `(i, j)` covers. Border cells also cover everything beyond the border.
    fn outside(&self, i: usize, j: usize, (s, t): (f64, f64)) -> f64 {
        let excess = |x: f64, first: bool, last: bool| {
            let below = if first { 0.0 } else { (-x).max(0.0) };
            let above = if last { 0.0 } else { (x - 1.0).max(0.0) };
            below + above
        };
        excess(s, i == 0, i + 2 == self.cols) + excess(t, j == 0, j + 2 == self.rows)
    }

    fn cell_of(&self, u: Point2) -> (usize, usize) {
        let i = ((u.x / self.g) as usize).min(self.cols - 2);
        let j = ((u.y / self.g) as usize).min(self.rows - 2);
        (i, j)
    }

    /// Solves `u + D(u) = v`. `d_at_v` is the displacement at `v` itself.
    fn invert(&self, v: Point2, d_at_v: Point2) -> Point2 {
        let (mut i, mut j) = self.cell_of(v - d_at_v);
        for _ in 0..CELL_WALK_LIMIT {
            let Some((s, t)) = self.cell_preimage(i, j, v) else {
                break;
            };
            if self.outside(i, j, (s, t)) <= CELL_EDGE_SLACK {
                return Point2::new((i as f64 + s) * self.g, (j as f64 + t) * self.g);
            }
            let step = |x: f64, at: usize, len: usize| {
                (at as f64 + floor(x)).clamp(0.0, (len - 2) as f64) as usize
            };
            let next = (step(s, i, self.cols), step(t, j, self.rows));
            if next == (i, j) {
                break;
            }
            (i, j) = next;
        }
        self.newton(v, d_at_v)
    }

    /// Fallback for folded cells: Newton on the bilinear extension, keeping
    /// the iterate with the smallest residual.
    fn newton(&self, v: Point2, d_at_v: Point2) -> Point2 {
        let mut u = v - d_at_v;
        let mut best = (f64::INFINITY, u);
        for _ in 0..INVERSE_MAX_ITERS {
            let (d, jac) = self.eval(u);
            let residual = u + d - v;
            let err = residual.norm();
            if err < best.0 {
                best = (err, u);
            }
            if err < INVERSE_TOLERANCE || !err.is_finite() {
                break;
            }
            u = match jac.solve(residual) {
                Some(step) => u - step,
                None => u - residual,
            };
        }
        best.1
    }
}

/// Interpolation used when reading the source raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    Bilinear,
    Nearest,
}

/// Value used for samples that fall outside the source raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fill {
    ReplicateEdge,
    Constant(u8),
}

// Coordinates this close to an integer are read as that integer, so fields that
// are the identity up to rounding noise reproduce the input exactly.
const SNAP: f64 = 1e-9;

#[inline]
fn snap(c: f64) -> f64 {
    let r = floor(c + 0.5);
    if (c - r).abs() < SNAP {
        r
    } else {
        c
    }
}

/// `f64::floor` without the libm call on targets lacking a rounding instruction.
/// Valid for `|x| < 2^63`, which covers every pixel coordinate.
#[inline]
fn floor(x: f64) -> f64 {
    let t = x as i64 as f64;
    if t > x {
        t - 1.0
    } else {
        t
    }
}

#[inline]
fn quantize(v: f64) -> u8 {
    // saturating cast: truncation is floor on the non-negative range
    (v + 0.5) as u8
}

/// Resamples `src` through `field`: `out(v) = src(field(v))`.
pub fn warp_image(
    src: &Raster,
    field: &WarpField,
    sampling: Sampling,
    fill: Fill,
) -> Result<Raster> {
    if src.dims() != field.dims() {
        return Err(Error::DimensionMismatch {
            expected: field.dims(),
            actual: src.dims(),
        });
    }
    let (w, h) = src.dims();
    let c = src.channels() as usize;
    let mut out = Vec::with_capacity(w as usize * h as usize * c);
    let mut px = [0u8; 3];
    for y in 0..h {
        for x in 0..w {
            let p = field.source_coord(x, y);
            let (sx, sy) = (snap(p.x), snap(p.y));
            match sampling {
                Sampling::Nearest => sample_nearest(src, sx, sy, fill, &mut px[..c]),
                Sampling::Bilinear => sample_bilinear(src, sx, sy, fill, &mut px[..c]),
            }
            out.extend_from_slice(&px[..c]);
        }
    }
    Raster::new(w, h, src.channels(), out)
}

/// Warps a label mask: nearest sampling, background (0) outside the source.
pub fn warp_mask(src: &Raster, field: &WarpField) -> Result<Raster> {
    if src.channels() != 1 {
        return invalid("mask must have exactly one channel");
    }
    warp_image(src, field, Sampling::Nearest, Fill::Constant(0))
}

/// Pixel at integer `(x, y)`, or `None` when outside the raster under a constant fill.
#[inline]
fn fetch(src: &Raster, x: i64, y: i64, fill: Fill) -> Option<&[u8]> {
    let (w, h) = (src.width() as i64, src.height() as i64);
    match fill {
        Fill::ReplicateEdge => Some(src.pixel(x.clamp(0, w - 1) as u32, y.clamp(0, h - 1) as u32)),
        Fill::Constant(_) => {
            if x < 0 || y < 0 || x >= w || y >= h {
                None
            } else {
                Some(src.pixel(x as u32, y as u32))
            }
        }
    }
}

#[inline]
fn fill_value(fill: Fill) -> f64 {
    match fill {
        Fill::Constant(c) => c as f64,
        Fill::ReplicateEdge => 0.0,
    }
}

fn sample_nearest(src: &Raster, x: f64, y: f64, fill: Fill, out: &mut [u8]) {
    // round half up, matching the intensity quantization
    let (xi, yi) = (floor(x + 0.5) as i64, floor(y + 0.5) as i64);
    match fetch(src, xi, yi, fill) {
        Some(px) => out.copy_from_slice(px),
        None => out.fill(fill_value(fill) as u8),
    }
}

fn sample_bilinear(src: &Raster, x: f64, y: f64, fill: Fill, out: &mut [u8]) {
    let (x0, y0) = (floor(x), floor(y));
    let (fx, fy) = (x - x0, y - y0);
    let (xi, yi) = (x0 as i64, y0 as i64);
    let (w, h) = (src.width() as i64, src.height() as i64);
    if xi >= 0 && yi >= 0 && xi + 1 < w && yi + 1 < h {
        let c = out.len();
        let row = w as usize * c;
        let o = (yi as usize * w as usize + xi as usize) * c;
        let px = &src.pixels()[o..o + row + 2 * c];
        for (k, dst) in out.iter_mut().enumerate() {
            let top = px[k] as f64 + fx * (px[c + k] as f64 - px[k] as f64);
            let bottom = px[row + k] as f64 + fx * (px[row + c + k] as f64 - px[row + k] as f64);
            *dst = quantize(top + fy * (bottom - top));
        }
        return;
    }
    let taps = [
        (xi, yi, (1.0 - fx) * (1.0 - fy)),
        (xi + 1, yi, fx * (1.0 - fy)),
        (xi, yi + 1, (1.0 - fx) * fy),
        (xi + 1, yi + 1, fx * fy),
    ];
    let constant = fill_value(fill);
    let mut acc = [0.0f64; 3];
    for (tx, ty, wgt) in taps {
        if wgt == 0.0 {
            continue;
        }
        match fetch(src, tx, ty, fill) {
            Some(px) => {
                for (a, v) in acc.iter_mut().zip(px) {
                    *a += wgt * *v as f64;
                }
            }
            None => {
                for a in acc.iter_mut() {
                    *a += wgt * constant;
                }
            }
        }
    }
    for (o, a) in out.iter_mut().zip(acc) {
        *o = quantize(a);
    }
}
