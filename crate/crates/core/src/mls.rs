//! Rigid moving-least-squares point deformation.
//!
//! For a point `v` and handles `p_i -> q_i` the deformed position is
//!
//! ```text
//! f(v)  = |v - p*| · f̄(v) / |f̄(v)| + q*
//! f̄(v) = Σ q̂_i A_i
//! A_i   = w_i [p̂_i; -p̂_i⊥] [v - p*; -(v - p*)⊥]ᵀ
//! w_i   = 1 / |p_i - v|^(2α)
//! ```
//!
//! with `p*`, `q*` the weighted centroids and `p̂_i = p_i - p*`, `q̂_i = q_i - q*`.
//! Nothing in `w_i`, `p*` or `A_i` depends on the targets, so [`PrecomputedBasis`]
//! evaluates them once per lattice vertex and every target set afterwards only
//! pays for the weighted sum over `q̂_i A_i`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Mat2, Point2};

/// Distance under which `v` is considered to coincide with a source handle.
pub const SINGULAR_DISTANCE: f64 = 1e-6;

/// Minimum separation between two source handles.
pub const MIN_HANDLE_SEPARATION: f64 = 1e-6;

/// When `|f̄(v)|` falls below this fraction of its bound `sqrt(Σ|q̂_i|² · Σ|A_i|²)`
/// the rotation is undefined and the transform falls back to pure translation.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Default weighting exponent.
pub const DEFAULT_ALPHA: f64 = 2.0;

/// Per-handle weights at one point, or the index of the handle it coincides with.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Regular(Vec<f64>),
    Singular(usize),
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 1.0) {
        return invalid(format!("alpha must be finite and > 1, got {alpha}"));
    }
    Ok(())
}

/// Inverse-distance weights `1 / |p_i - v|^(2α)`.
pub fn compute_weights(sources: &[Point2], v: Point2, alpha: f64) -> Result<Weights> {
    if sources.is_empty() {
        return invalid("no source handles");
    }
    check_alpha(alpha)?;
    let mut weights = Vec::with_capacity(sources.len());
    for (i, p) in sources.iter().enumerate() {
        let d2 = (*p - v).norm_sq();
        if d2.sqrt() < SINGULAR_DISTANCE {
            return Ok(Weights::Singular(i));
        }
        weights.push(1.0 / d2.powf(alpha));
    }
    if !weights.iter().all(|w| w.is_finite()) {
        return invalid(format!("weights overflow at {v:?} with alpha {alpha}"));
    }
    Ok(Weights::Regular(weights))
}

/// Paired control points and the weighting exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandleSet {
    sources: Vec<Point2>,
    targets: Vec<Point2>,
    alpha: f64,
}

impl HandleSet {
    pub fn new(sources: Vec<Point2>, targets: Vec<Point2>, alpha: f64) -> Result<Self> {
        if sources.is_empty() {
            return invalid("handle set is empty");
        }
        if sources.len() != targets.len() {
            return invalid(format!(
                "{} sources but {} targets",
                sources.len(),
                targets.len()
            ));
        }
        check_alpha(alpha)?;
        if !sources.iter().chain(&targets).all(|p| p.is_finite()) {
            return invalid("handle coordinates must be finite");
        }
        check_distinct(&sources)?;
        Ok(HandleSet {
            sources,
            targets,
            alpha,
        })
    }

    /// Handles with `q = p`.
    pub fn identity(sources: Vec<Point2>, alpha: f64) -> Result<Self> {
        let targets = sources.clone();
        HandleSet::new(sources, targets, alpha)
    }

    pub fn sources(&self) -> &[Point2] {
        &self.sources
    }

    pub fn targets(&self) -> &[Point2] {
        &self.targets
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Sources and targets exchanged. Fails if the targets contain duplicates.
    pub fn swapped(&self) -> Result<HandleSet> {
        HandleSet::new(self.targets.clone(), self.sources.clone(), self.alpha)
    }
}

fn check_distinct(points: &[Point2]) -> Result<()> {
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if a.dist(*b) < MIN_HANDLE_SEPARATION {
                return invalid(format!("duplicate source handles at {a:?} and {b:?}"));
            }
        }
    }
    Ok(())
}

/// Weighted centroids `(p*, q*)`.
pub fn weighted_centroids(handles: &HandleSet, weights: &[f64]) -> Result<(Point2, Point2)> {
    if weights.len() != handles.len() {
        return invalid(format!(
            "{} weights for {} handles",
            weights.len(),
            handles.len()
        ));
    }
    if !weights.iter().all(|w| *w > 0.0 && w.is_finite()) {
        return invalid("weights must be positive and finite");
    }
    Ok((
        centroid(handles.sources(), weights),
        centroid(handles.targets(), weights),
    ))
}

fn centroid(points: &[Point2], weights: &[f64]) -> Point2 {
    let mut acc = Point2::ORIGIN;
    let mut total = 0.0;
    for (p, w) in points.iter().zip(weights) {
        acc = acc + *w * *p;
        total += w;
    }
    (1.0 / total) * acc
}

/// Target-independent part of the transform at one point.
#[derive(Debug, Clone, PartialEq)]
enum VertexRecord {
    Singular(usize),
    Regular {
        weights: Vec<f64>,
        p_star: Point2,
        mats: Vec<Mat2>,
        spread: f64,
    },
}

fn vertex_record(sources: &[Point2], alpha: f64, v: Point2) -> Result<VertexRecord> {
    let weights = match compute_weights(sources, v, alpha)? {
        Weights::Singular(i) => return Ok(VertexRecord::Singular(i)),
        Weights::Regular(w) => w,
    };
    let p_star = centroid(sources, &weights);
    let d = v - p_star;
    let right = Mat2::from_rows(d, -d.perp()).transpose();
    let mats = sources
        .iter()
        .zip(&weights)
        .map(|(p, w)| {
            let p_hat = *p - p_star;
            Mat2::from_rows(p_hat, -p_hat.perp())
                .matmul(&right)
                .scale(*w)
        })
        .collect::<Vec<Mat2>>();
    let spread = mats.iter().map(|a| a.m11 * a.m11 + a.m12 * a.m12).sum();
    Ok(VertexRecord::Regular {
        weights,
        p_star,
        mats,
        spread,
    })
}

/// Uncached evaluation of the rigid transform at an arbitrary point.
pub fn transform_direct(handles: &HandleSet, v: Point2) -> Result<Point2> {
    match vertex_record(handles.sources(), handles.alpha(), v)? {
        VertexRecord::Singular(i) => Ok(handles.targets()[i]),
        VertexRecord::Regular {
            weights,
            p_star,
            mats,
            spread,
        } => Ok(apply_cached(
            v,
            &weights,
            p_star,
            (v - p_star).norm(),
            spread,
            &mats,
            handles.targets(),
        )),
    }
}

const NOT_SINGULAR: u32 = u32::MAX;

/// Sums over all handles at one vertex for the undeformed targets `q = p`.
///
/// With `q_i = p_i + δ_i` the transform only needs these plus terms for the
/// handles whose `δ_i` is nonzero.
#[derive(Debug, Clone, Copy, Default)]
struct RestState {
    wsum: f64,
    /// `Σ p̂_i A_i`
    f_bar: Point2,
    /// `Σ A_i`
    mat_sum: Mat2,
    /// `Σ p̂_i`
    hat_sum: Point2,
    /// `Σ |p̂_i|²`
    hat_sq: f64,
}

impl RestState {
    fn new(sources: &[Point2], weights: &[f64], p_star: Point2, mats: &[Mat2]) -> Self {
        let mut r = RestState::default();
        for ((p, w), a) in sources.iter().zip(weights).zip(mats) {
            let p_hat = *p - p_star;
            r.wsum += w;
            r.f_bar = r.f_bar + p_hat.mul_mat(a);
            r.mat_sum = Mat2 {
                m11: r.mat_sum.m11 + a.m11,
                m12: r.mat_sum.m12 + a.m12,
                m21: r.mat_sum.m21 + a.m21,
                m22: r.mat_sum.m22 + a.m22,
            };
            r.hat_sum = r.hat_sum + p_hat;
            r.hat_sq += p_hat.norm_sq();
        }
        r
    }
}

/// Target-independent transform data on a regular lattice covering an image.
///
/// Vertex `(i, j)` sits at `(i·g, j·g)`; the lattice has `ceil(w/g) + 1`
/// columns and `ceil(h/g) + 1` rows so it always covers `[0, w] × [0, h]`.
#[derive(Debug, Clone)]
pub struct PrecomputedBasis {
    sources: Vec<Point2>,
    alpha: f64,
    width: u32,
    height: u32,
    lattice_spacing: u32,
    cols: usize,
    rows: usize,
    // Flat per-vertex storage; per-handle arrays are strided by `sources.len()`.
    weights: Vec<f64>,
    p_star: Vec<Point2>,
    dist: Vec<f64>,
    spread: Vec<f64>,
    rest: Vec<RestState>,
    mats: Vec<Mat2>,
    singular: Vec<u32>,
}

/// Number of lattice vertices along an axis of `extent` pixels.
pub fn lattice_len(extent: u32, g: u32) -> usize {
    extent.div_ceil(g) as usize + 1
}

/// Builds the basis for `sources` over a `width × height` image at spacing `g`.
pub fn precompute_basis(
    sources: &[Point2],
    alpha: f64,
    width: u32,
    height: u32,
    g: u32,
) -> Result<PrecomputedBasis> {
    if sources.is_empty() {
        return invalid("no source handles");
    }
    if g == 0 {
        return invalid("lattice spacing must be >= 1");
    }
    if width == 0 || height == 0 {
        return invalid(format!("image dims must be positive, got {width}x{height}"));
    }
    check_alpha(alpha)?;
    if !sources.iter().all(|p| p.is_finite()) {
        return invalid("handle coordinates must be finite");
    }
    check_distinct(sources)?;

    let n = sources.len();
    let cols = lattice_len(width, g);
    let rows = lattice_len(height, g);
    let count = cols * rows;
    let mut basis = PrecomputedBasis {
        sources: sources.to_vec(),
        alpha,
        width,
        height,
        lattice_spacing: g,
        cols,
        rows,
        weights: vec![0.0; count * n],
        p_star: vec![Point2::ORIGIN; count],
        dist: vec![0.0; count],
        spread: vec![0.0; count],
        rest: vec![RestState::default(); count],
        mats: vec![Mat2::default(); count * n],
        singular: vec![NOT_SINGULAR; count],
    };
    for j in 0..rows {
        for i in 0..cols {
            let k = j * cols + i;
            let v = basis.vertex(i, j);
            match vertex_record(sources, alpha, v)? {
                VertexRecord::Singular(h) => {
                    basis.singular[k] = h as u32;
                    basis.p_star[k] = sources[h];
                }
                VertexRecord::Regular {
                    weights,
                    p_star,
                    mats,
                    spread,
                } => {
                    basis.weights[k * n..(k + 1) * n].copy_from_slice(&weights);
                    basis.mats[k * n..(k + 1) * n].copy_from_slice(&mats);
                    basis.p_star[k] = p_star;
                    basis.dist[k] = (v - p_star).norm();
                    basis.spread[k] = spread;
                    basis.rest[k] = RestState::new(sources, &weights, p_star, &mats);
                }
            }
        }
    }
    Ok(basis)
}

impl PrecomputedBasis {
    pub fn sources(&self) -> &[Point2] {
        &self.sources
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn handle_count(&self) -> usize {
        self.sources.len()
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn lattice_spacing(&self) -> u32 {
        self.lattice_spacing
    }

    /// `(columns, rows)` of lattice vertices.
    pub fn lattice_dims(&self) -> (usize, usize) {
        (self.cols, self.rows)
    }

    /// Position of vertex `(i, j)`.
    #[inline]
    pub fn vertex(&self, i: usize, j: usize) -> Point2 {
        let g = self.lattice_spacing as f64;
        Point2::new(i as f64 * g, j as f64 * g)
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        j * self.cols + i
    }

    /// Source handle coinciding with vertex `(i, j)`, if any.
    pub fn singular_handle(&self, i: usize, j: usize) -> Option<usize> {
        match self.singular[self.index(i, j)] {
            NOT_SINGULAR => None,
            h => Some(h as usize),
        }
    }

    /// Per-handle weights at vertex `(i, j)`; all zero at singular vertices.
    pub fn weights_at(&self, i: usize, j: usize) -> &[f64] {
        let n = self.handle_count();
        let k = self.index(i, j);
        &self.weights[k * n..(k + 1) * n]
    }

    /// Per-handle `A_i` matrices at vertex `(i, j)`.
    pub fn matrices_at(&self, i: usize, j: usize) -> &[Mat2] {
        let n = self.handle_count();
        let k = self.index(i, j);
        &self.mats[k * n..(k + 1) * n]
    }

    pub fn p_star_at(&self, i: usize, j: usize) -> Point2 {
        self.p_star[self.index(i, j)]
    }

    /// `|v - p*|` at vertex `(i, j)`.
    pub fn dist_at(&self, i: usize, j: usize) -> f64 {
        self.dist[self.index(i, j)]
    }

    fn check_targets(&self, targets: &[Point2]) -> Result<()> {
        if targets.len() != self.handle_count() {
            return invalid(format!(
                "{} targets for a basis with {} handles",
                targets.len(),
                self.handle_count()
            ));
        }
        Ok(())
    }

    /// Deformed position of vertex `(i, j)`. `targets.len()` must equal the handle count.
    #[inline]
    pub fn transform_vertex(&self, i: usize, j: usize, targets: &[Point2]) -> Point2 {
        let k = self.index(i, j);
        if self.singular[k] != NOT_SINGULAR {
            return targets[self.singular[k] as usize];
        }
        let n = self.handle_count();
        let v = self.vertex(i, j);
        let weights = &self.weights[k * n..(k + 1) * n];
        let mats = &self.mats[k * n..(k + 1) * n];
        let p_star = self.p_star[k];
        apply_cached(
            v,
            weights,
            p_star,
            self.dist[k],
            self.spread[k],
            mats,
            targets,
        )
    }

    /// Deformed positions of every vertex, row-major.
    ///
    /// When at most half of the handles move, only the moved ones are visited
    /// per vertex; the rest is read from the cached undeformed sums.
    pub fn transform_lattice(&self, targets: &[Point2]) -> Result<Vec<Point2>> {
        self.check_targets(targets)?;
        let n = self.handle_count();
        let moved: Vec<(usize, Point2)> = self
            .sources
            .iter()
            .zip(targets)
            .enumerate()
            .filter(|(_, (p, q))| p != q)
            .map(|(i, (p, q))| (i, *q - *p))
            .collect();
        let sparse = 2 * moved.len() <= n;
        let mut out = Vec::with_capacity(self.cols * self.rows);
        for j in 0..self.rows {
            for i in 0..self.cols {
                out.push(if sparse {
                    self.transform_vertex_sparse(i, j, &moved, targets)
                } else {
                    self.transform_vertex(i, j, targets)
                });
            }
        }
        Ok(out)
    }

    /// Like [`Self::transform_vertex`] for targets given as offsets
    /// `(handle, q - p)` of the moved handles.
    fn transform_vertex_sparse(
        &self,
        i: usize,
        j: usize,
        moved: &[(usize, Point2)],
        targets: &[Point2],
    ) -> Point2 {
        let k = self.index(i, j);
        if self.singular[k] != NOT_SINGULAR {
            return targets[self.singular[k] as usize];
        }
        let n = self.handle_count();
        let weights = &self.weights[k * n..(k + 1) * n];
        let mats = &self.mats[k * n..(k + 1) * n];
        let p_star = self.p_star[k];
        let rest = &self.rest[k];
        let mut acc = Point2::ORIGIN;
        for &(h, d) in moved {
            acc = acc + weights[h] * d;
        }
        let shift = (1.0 / rest.wsum) * acc;
        let mut f_bar = rest.f_bar - shift.mul_mat(&rest.mat_sum);
        let mut q_spread = rest.hat_sq - 2.0 * shift.dot(rest.hat_sum) + n as f64 * shift.norm_sq();
        for &(h, d) in moved {
            f_bar = f_bar + d.mul_mat(&mats[h]);
            q_spread += 2.0 * (self.sources[h] - p_star - shift).dot(d) + d.norm_sq();
        }
        finish(
            self.vertex(i, j),
            p_star,
            p_star + shift,
            self.dist[k],
            self.spread[k],
            f_bar,
            q_spread,
        )
    }

    /// Lattice vertex exactly at `v`, if there is one.
    fn vertex_of(&self, v: Point2) -> Option<(usize, usize)> {
        let g = self.lattice_spacing as f64;
        let (fx, fy) = (v.x / g, v.y / g);
        let (rx, ry) = (fx.round(), fy.round());
        if (fx - rx).abs() > 1e-9 || (fy - ry).abs() > 1e-9 || rx < 0.0 || ry < 0.0 {
            return None;
        }
        let (i, j) = (rx as usize, ry as usize);
        (i < self.cols && j < self.rows).then_some((i, j))
    }
}

#[inline]
fn apply_cached(
    v: Point2,
    weights: &[f64],
    p_star: Point2,
    dist: f64,
    spread: f64,
    mats: &[Mat2],
    targets: &[Point2],
) -> Point2 {
    let mut wsum = 0.0;
    let mut acc = Point2::ORIGIN;
    for (q, w) in targets.iter().zip(weights) {
        acc = acc + *w * *q;
        wsum += w;
    }
    let q_star = (1.0 / wsum) * acc;
    let mut f_bar = Point2::ORIGIN;
    let mut q_spread = 0.0;
    for (q, a) in targets.iter().zip(mats) {
        let q_hat = *q - q_star;
        f_bar = f_bar + q_hat.mul_mat(a);
        q_spread += q_hat.norm_sq();
    }
    finish(v, p_star, q_star, dist, spread, f_bar, q_spread)
}

/// `q_spread = Σ |q̂_i|²`, `spread = Σ |A_i|²`.
#[inline]
fn finish(
    v: Point2,
    p_star: Point2,
    q_star: Point2,
    dist: f64,
    spread: f64,
    f_bar: Point2,
    q_spread: f64,
) -> Point2 {
    // Cancellation test: |f̄| against its Cauchy-Schwarz bound.
    let norm_sq = f_bar.norm_sq();
    if norm_sq <= DEGENERATE_NORM * DEGENERATE_NORM * q_spread * spread || !norm_sq.is_finite() {
        return v + (q_star - p_star);
    }
    dist * ((1.0 / norm_sq.sqrt()) * f_bar) + q_star
}

/// Evaluates the transform for `targets` at `v` using the cached basis.
///
/// Lattice vertices use the cached records; other points inside the lattice
/// extent are evaluated directly from the basis' sources.
pub fn transform_point(basis: &PrecomputedBasis, targets: &[Point2], v: Point2) -> Result<Point2> {
    basis.check_targets(targets)?;
    if !v.is_finite() {
        return invalid("point must be finite");
    }
    if let Some((i, j)) = basis.vertex_of(v) {
        return Ok(basis.transform_vertex(i, j, targets));
    }
    let g = basis.lattice_spacing as f64;
    let (xmax, ymax) = ((basis.cols - 1) as f64 * g, (basis.rows - 1) as f64 * g);
    if v.x < 0.0 || v.y < 0.0 || v.x > xmax || v.y > ymax {
        return Err(Error::InvalidInput(format!(
            "{v:?} outside basis grid [0,{xmax}]x[0,{ymax}]"
        )));
    }
    match vertex_record(&basis.sources, basis.alpha, v)? {
        VertexRecord::Singular(h) => Ok(targets[h]),
        VertexRecord::Regular {
            weights,
            p_star,
            mats,
            spread,
        } => Ok(apply_cached(
            v,
            &weights,
            p_star,
            (v - p_star).norm(),
            spread,
            &mats,
            targets,
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().map(|&p| p.into()).collect()
    }

    #[test]
    fn unit_distance_weight_is_one() {
        let w = compute_weights(&pts(&[(0.0, 0.0)]), Point2::new(1.0, 0.0), 2.0).unwrap();
        assert_eq!(w, Weights::Regular(vec![1.0]));
    }

    #[test]
    fn weight_at_distance_two() {
        // alpha = 1 is outside the admissible range; the value 1/2^2 is checked with
        // alpha slightly above 1 and with the formula at alpha = 1 by hand.
        let w = compute_weights(&pts(&[(0.0, 0.0)]), Point2::new(2.0, 0.0), 1.0 + 1e-15).unwrap();
        match w {
            Weights::Regular(w) => assert!((w[0] - 0.25).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(compute_weights(&pts(&[(0.0, 0.0)]), Point2::new(2.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn coincident_handle_is_singular() {
        let w = compute_weights(&pts(&[(3.0, 3.0)]), Point2::new(3.0, 3.0), 2.0).unwrap();
        assert_eq!(w, Weights::Singular(0));
        assert!(compute_weights(&[], Point2::ORIGIN, 2.0).is_err());
    }

    #[test]
    fn single_handle_centroid() {
        let h = HandleSet::identity(pts(&[(4.0, 5.0)]), 2.0).unwrap();
        let (p, q) = weighted_centroids(&h, &[0.3]).unwrap();
        assert_eq!(p, Point2::new(4.0, 5.0));
        assert_eq!(q, Point2::new(4.0, 5.0));
    }

    #[test]
    fn equidistant_handles_centroid_is_midpoint() {
        let h = HandleSet::identity(pts(&[(0.0, 0.0), (4.0, 2.0)]), 2.0).unwrap();
        let v = Point2::new(2.0, 1.0);
        let Weights::Regular(w) = compute_weights(h.sources(), v, 2.0).unwrap() else {
            panic!()
        };
        let (p, _) = weighted_centroids(&h, &w).unwrap();
        assert!(p.dist(Point2::new(2.0, 1.0)) < 1e-12);
    }

    #[test]
    fn centroid_two_handles_hand_value() {
        // w = [1/0.5^2, 1/1.5^2] = [4, 0.4444..] under the alpha = 1 formula.
        let h = HandleSet::identity(pts(&[(0.0, 0.0), (2.0, 0.0)]), 2.0).unwrap();
        let w = [4.0, 1.0 / 2.25];
        let (p, _) = weighted_centroids(&h, &w).unwrap();
        assert!((p.x - 0.2).abs() < 1e-12 && p.y == 0.0);
        assert!(weighted_centroids(&h, &[1.0]).is_err());
    }

    #[test]
    fn handle_set_validation() {
        assert!(HandleSet::new(vec![], vec![], 2.0).is_err());
        assert!(HandleSet::new(pts(&[(0.0, 0.0)]), vec![], 2.0).is_err());
        assert!(HandleSet::identity(pts(&[(0.0, 0.0)]), 1.0).is_err());
        assert!(HandleSet::identity(pts(&[(1.0, 1.0), (1.0, 1.0 + 1e-9)]), 2.0).is_err());
        assert!(HandleSet::identity(pts(&[(f64::NAN, 1.0)]), 2.0).is_err());
    }

    #[test]
    fn basis_shape_contract() {
        let src = pts(&[
            (6.0, 6.0),
            (14.0, 6.0),
            (22.0, 6.0),
            (6.0, 14.0),
            (14.0, 14.0),
            (22.0, 14.0),
            (6.0, 22.0),
            (14.0, 22.0),
            (22.0, 22.5),
        ]);
        let b = precompute_basis(&src, 2.0, 28, 28, 1).unwrap();
        assert_eq!(b.lattice_dims(), (29, 29));
        assert_eq!(b.handle_count(), 9);
        assert_eq!(b.matrices_at(28, 28).len(), 9);
        assert_eq!(b.singular_handle(6, 6), Some(0));
        assert_eq!(b.singular_handle(0, 0), None);
        assert!(b.weights_at(0, 0).iter().all(|w| *w > 0.0));

        let b4 = precompute_basis(&src, 2.0, 30, 28, 4).unwrap();
        assert_eq!(b4.lattice_dims(), (9, 8));
    }

    #[test]
    fn basis_rejects_duplicates_and_bad_spacing() {
        let dup = pts(&[(1.0, 1.0), (1.0, 1.0)]);
        assert!(precompute_basis(&dup, 2.0, 10, 10, 1).is_err());
        assert!(precompute_basis(&pts(&[(1.0, 1.0)]), 2.0, 10, 10, 0).is_err());
        assert!(precompute_basis(&pts(&[(1.0, 1.0)]), 2.0, 0, 10, 1).is_err());
    }

    #[test]
    fn identity_targets_fix_every_vertex() {
        let src = pts(&[(2.0, 3.0), (8.5, 1.0), (5.0, 9.0)]);
        let b = precompute_basis(&src, 2.0, 10, 10, 1).unwrap();
        for j in 0..11 {
            for i in 0..11 {
                let v = b.vertex(i, j);
                assert!(b.transform_vertex(i, j, &src).dist(v) < 1e-9);
            }
        }
    }

    #[test]
    fn single_handle_translates() {
        let src = pts(&[(3.0, 3.0)]);
        let dst = pts(&[(4.0, 1.0)]);
        let b = precompute_basis(&src, 2.0, 6, 6, 1).unwrap();
        let out = transform_point(&b, &dst, Point2::new(0.0, 5.0)).unwrap();
        assert!(out.dist(Point2::new(1.0, 3.0)) < 1e-12);
        assert_eq!(
            transform_point(&b, &dst, Point2::new(3.0, 3.0)).unwrap(),
            dst[0]
        );
    }

    #[test]
    fn transform_point_errors() {
        let src = pts(&[(3.0, 3.0), (1.0, 1.0)]);
        let b = precompute_basis(&src, 2.0, 6, 6, 1).unwrap();
        assert!(transform_point(&b, &src[..1], Point2::ORIGIN).is_err());
        assert!(transform_point(&b, &src, Point2::new(7.0, 0.0)).is_err());
        // off-lattice points inside the grid are evaluated directly
        let h = HandleSet::new(src.clone(), pts(&[(3.5, 3.0), (1.0, 1.5)]), 2.0).unwrap();
        let v = Point2::new(2.25, 4.5);
        assert_eq!(
            transform_point(&b, h.targets(), v).unwrap(),
            transform_direct(&h, v).unwrap()
        );
    }
}
