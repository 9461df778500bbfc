//! Nine-dot handle placement and deterministic enumeration of move patterns.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Point2;

/// Parameters of the nine-dot scheme. Angles are in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NineDotConfig {
    /// Placement coefficient: the outer rows/columns sit at `k_p` and `1 - k_p` of each side.
    pub k_p: f64,
    /// Displacement magnitude as a fraction of the admissible range.
    pub k_l: f64,
    /// Angular step as a fraction of a full turn.
    pub k_s: f64,
    /// Angle of the first displacement direction.
    pub phi0: f64,
}

impl Default for NineDotConfig {
    fn default() -> Self {
        NineDotConfig {
            k_p: 0.23,
            k_l: 0.14,
            k_s: 0.25,
            phi0: 45.0,
        }
    }
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return invalid(format!("{name} must lie in (0, 1), got {v}"));
    }
    Ok(())
}

impl NineDotConfig {
    pub fn validate(&self) -> Result<()> {
        open_unit("k_p", self.k_p)?;
        open_unit("k_l", self.k_l)?;
        open_unit("k_s", self.k_s)?;
        if !self.phi0.is_finite() {
            return invalid("phi0 must be finite");
        }
        if self.k_p == 0.5 {
            return Err(Error::DegenerateGrid(self.k_p));
        }
        Ok(())
    }

    pub fn direction_count(&self) -> usize {
        direction_count(self.k_s)
    }

    /// Angle of direction `j`, in degrees.
    pub fn angle(&self, j: usize) -> f64 {
        self.phi0 + 360.0 * j as f64 * self.k_s
    }
}

/// Image width and height in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDims {
    pub w: u32,
    pub h: u32,
}

impl ImageDims {
    pub fn new(w: u32, h: u32) -> Self {
        ImageDims { w, h }
    }
}

/// The nine handles in row-major order:
/// `x ∈ {k_p·w, w/2, (1-k_p)·w} × y ∈ {k_p·h, h/2, (1-k_p)·h}`.
pub fn nine_dot_points(dims: ImageDims, k_p: f64) -> Result<Vec<Point2>> {
    open_unit("k_p", k_p)?;
    if dims.w == 0 || dims.h == 0 {
        return invalid("image dims must be positive");
    }
    let (w, h) = (dims.w as f64, dims.h as f64);
    // Points closer than the handle separation floor collapse onto the center lines.
    if (k_p - 0.5).abs() * w.min(h) < crate::mls::MIN_HANDLE_SEPARATION {
        return Err(Error::DegenerateGrid(k_p));
    }
    let xs = [k_p * w, w / 2.0, (1.0 - k_p) * w];
    let ys = [k_p * h, h / 2.0, (1.0 - k_p) * h];
    Ok(ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| Point2::new(x, y)))
        .collect())
}

/// Number of distinct displacement directions, `floor(1 / k_s)`.
pub fn direction_count(k_s: f64) -> usize {
    // the epsilon keeps exact reciprocals such as 1/3 from flooring one short
    (1.0 / k_s + 1e-9).floor().max(1.0) as usize
}

/// Displacement length `k_l · min(k_p·(w - 0.5), k_p·(h - 0.5))`.
pub fn displacement_length(dims: ImageDims, k_p: f64, k_l: f64) -> f64 {
    let (w, h) = (dims.w as f64, dims.h as f64);
    k_l * (k_p * (w - 0.5)).min(k_p * (h - 0.5))
}

/// `p + L·(cos φ, sin φ)` for an angle in degrees.
#[inline]
pub fn offset_point(p: Point2, length: f64, degrees: f64) -> Point2 {
    p + length * Point2::from_angle_deg(degrees)
}

/// Target of a nine-dot handle moved in direction `j`: `φ_j = φ_0 + 360·j·k_s`.
pub fn displaced_target(p: Point2, length: f64, phi0: f64, k_s: f64, j: usize) -> Point2 {
    offset_point(p, length, phi0 + 360.0 * j as f64 * k_s)
}

/// Which handles move, and in which direction each one moves.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MovePattern {
    pub moved: Vec<usize>,
    pub directions: Vec<usize>,
}

impl MovePattern {
    /// Targets for `sources` where moved handles are displaced by `displace(p, direction)`.
    pub fn apply(
        &self,
        sources: &[Point2],
        mut displace: impl FnMut(Point2, usize) -> Point2,
    ) -> Vec<Point2> {
        let mut targets = sources.to_vec();
        for (&h, &dir) in self.moved.iter().zip(&self.directions) {
            targets[h] = displace(sources[h], dir);
        }
        targets
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of patterns that move exactly `level` of `handles` handles.
pub fn level_size(handles: usize, directions: usize, level: usize) -> u128 {
    binomial(handles as u64, level as u64)
        .saturating_mul((directions as u128).saturating_pow(level as u32))
}

/// Total number of non-empty move patterns, `(1 + D)^n - 1`.
pub fn pattern_space(handles: usize, directions: usize) -> u128 {
    (1..=handles)
        .map(|m| level_size(handles, directions, m))
        .fold(0u128, |a, b| a.saturating_add(b))
}

/// The `index`-th pattern of the level-ordered enumeration.
///
/// Level `m` (patterns moving `m` handles) precedes level `m + 1`. Inside a
/// level, handle subsets are in lexicographic order and, for each subset, the
/// direction tuples count up with the first moved handle most significant.
pub fn pattern_at(handles: usize, directions: usize, index: u64) -> Result<MovePattern> {
    if handles == 0 || directions == 0 {
        return invalid("pattern enumeration needs at least one handle and one direction");
    }
    let mut rest = index as u128;
    for level in 1..=handles {
        let size = level_size(handles, directions, level);
        if rest < size {
            let per_subset = (directions as u128).pow(level as u32);
            let moved = unrank_combination(handles, level, rest / per_subset);
            let mut code = rest % per_subset;
            let mut dirs = vec![0usize; level];
            for slot in dirs.iter_mut().rev() {
                *slot = (code % directions as u128) as usize;
                code /= directions as u128;
            }
            return Ok(MovePattern {
                moved,
                directions: dirs,
            });
        }
        rest -= size;
    }
    Err(Error::Exhausted {
        requested: index.saturating_add(1),
        available: pattern_space(handles, directions).min(u64::MAX as u128) as u64,
    })
}

/// `rank`-th `k`-subset of `0..n` in lexicographic order.
fn unrank_combination(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for remaining in (1..=k).rev() {
        loop {
            let with_next = binomial((n - next - 1) as u64, (remaining - 1) as u64);
            if rank < with_next {
                out.push(next);
                next += 1;
                break;
            }
            rank -= with_next;
            next += 1;
        }
    }
    out
}

/// The first `count` nine-dot patterns for `cfg`.
pub fn enumerate_variants(
    cfg: &NineDotConfig,
    dims: ImageDims,
    count: u64,
) -> Result<Vec<MovePattern>> {
    cfg.validate()?;
    nine_dot_points(dims, cfg.k_p)?;
    enumerate_patterns(9, cfg.direction_count(), count)
}

/// The first `count` patterns over `handles` movable handles and `directions` directions.
pub fn enumerate_patterns(
    handles: usize,
    directions: usize,
    count: u64,
) -> Result<Vec<MovePattern>> {
    let available = pattern_space(handles, directions);
    if count as u128 > available {
        return Err(Error::Exhausted {
            requested: count,
            available: available.min(u64::MAX as u128) as u64,
        });
    }
    (0..count)
        .map(|i| pattern_at(handles, directions, i))
        .collect()
}
