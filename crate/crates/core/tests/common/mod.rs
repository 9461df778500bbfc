//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use ndmls::{Point2, Raster};
use num_complex::Complex64;
use rand::prelude::*;

pub const SINGULAR: f64 = 1e-6;

/// Uncached rigid MLS written out with explicit 2×2 matrices.
pub fn rigid_mls(p: &[Point2], q: &[Point2], alpha: f64, v: Point2) -> Point2 {
    for (pi, qi) in p.iter().zip(q) {
        if ((pi.x - v.x).powi(2) + (pi.y - v.y).powi(2)).sqrt() < SINGULAR {
            return *qi;
        }
    }
    let w: Vec<f64> = p
        .iter()
        .map(|pi| 1.0 / ((pi.x - v.x).powi(2) + (pi.y - v.y).powi(2)).powf(alpha))
        .collect();
    let sw: f64 = w.iter().sum();
    let mut ps = [0.0, 0.0];
    let mut qs = [0.0, 0.0];
    for i in 0..p.len() {
        ps[0] += w[i] * p[i].x / sw;
        ps[1] += w[i] * p[i].y / sw;
        qs[0] += w[i] * q[i].x / sw;
        qs[1] += w[i] * q[i].y / sw;
    }
    let d = [v.x - ps[0], v.y - ps[1]];
    // perp(x, y) = (-y, x); rows of the right factor are d and -perp(d).
    let right = [[d[0], d[1]], [d[1], -d[0]]];
    let mut f = [0.0, 0.0];
    let (mut q_spread, mut a_spread) = (0.0, 0.0);
    for i in 0..p.len() {
        let ph = [p[i].x - ps[0], p[i].y - ps[1]];
        let qh = [q[i].x - qs[0], q[i].y - qs[1]];
        let left = [[ph[0], ph[1]], [ph[1], -ph[0]]];
        // A = w · left · rightᵀ
        let mut a = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                a[r][c] = w[i] * (left[r][0] * right[c][0] + left[r][1] * right[c][1]);
            }
        }
        q_spread += qh[0] * qh[0] + qh[1] * qh[1];
        a_spread += a[0][0] * a[0][0] + a[0][1] * a[0][1];
        f[0] += qh[0] * a[0][0] + qh[1] * a[1][0];
        f[1] += qh[0] * a[0][1] + qh[1] * a[1][1];
    }
    let fn_ = (f[0] * f[0] + f[1] * f[1]).sqrt();
    if fn_ <= 1e-12 * (q_spread * a_spread).sqrt() {
        return Point2::new(v.x - ps[0] + qs[0], v.y - ps[1] + qs[1]);
    }
    let dn = (d[0] * d[0] + d[1] * d[1]).sqrt();
    Point2::new(dn * f[0] / fn_ + qs[0], dn * f[1] / fn_ + qs[1])
}

/// Rigid MLS in complex form: the rotation is the phase of Σ wᵢ·conj(p̂ᵢ)·q̂ᵢ.
pub fn rigid_mls_complex(p: &[Point2], q: &[Point2], alpha: f64, v: Point2) -> Complex64 {
    let c = |a: Point2| Complex64::new(a.x, a.y);
    let vc = c(v);
    let w: Vec<f64> = p
        .iter()
        .map(|pi| 1.0 / (c(*pi) - vc).norm_sqr().powf(alpha))
        .collect();
    let sw: f64 = w.iter().sum();
    let ps: Complex64 = p
        .iter()
        .zip(&w)
        .map(|(pi, wi)| c(*pi) * *wi)
        .sum::<Complex64>()
        / sw;
    let qs: Complex64 = q
        .iter()
        .zip(&w)
        .map(|(qi, wi)| c(*qi) * *wi)
        .sum::<Complex64>()
        / sw;
    let rot: Complex64 = p
        .iter()
        .zip(q)
        .zip(&w)
        .map(|((pi, qi), wi)| (c(*pi) - ps).conj() * (c(*qi) - qs) * *wi)
        .sum();
    (vc - ps) * (rot / rot.norm()) + qs
}

pub fn rotate(p: Point2, degrees: f64, t: Point2) -> Point2 {
    let (s, c) = degrees.to_radians().sin_cos();
    Point2::new(c * p.x - s * p.y + t.x, s * p.x + c * p.y + t.y)
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// `n` points in `[margin, w-margin] × [margin, h-margin]`, pairwise at least `sep` apart.
pub fn random_handles(
    rng: &mut StdRng,
    n: usize,
    w: f64,
    h: f64,
    margin: f64,
    sep: f64,
) -> Vec<Point2> {
    let mut pts: Vec<Point2> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = Point2::new(
            rng.random_range(margin..w - margin),
            rng.random_range(margin..h - margin),
        );
        if pts.iter().all(|o| o.dist(p) >= sep) {
            pts.push(p);
        }
    }
    pts
}

pub fn noise_image(rng: &mut StdRng, w: u32, h: u32, channels: u8) -> Raster {
    let len = (w * h * channels as u32) as usize;
    Raster::new(w, h, channels, (0..len).map(|_| rng.random()).collect()).unwrap()
}

/// Smooth RGB test image built from low-frequency gradients and sinusoids.
pub fn smooth_image(rng: &mut StdRng, w: u32, h: u32) -> Raster {
    let params: Vec<[f64; 4]> = (0..3)
        .map(|_| {
            [
                rng.random_range(0.02..0.08),
                rng.random_range(0.02..0.08),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.3..1.2),
            ]
        })
        .collect();
    Raster::from_fn(w, h, 3, |x, y| {
        let mut px = [0u8; 3];
        for (c, [fx, fy, ph, g]) in params.iter().enumerate() {
            let s = (fx * x as f64 + fy * y as f64 + ph).sin() * 0.35
                + (fy * x as f64 - fx * y as f64).cos() * 0.25
                + g * (x + y) as f64 / (w + h) as f64 * 0.3;
            px[c] = (127.5 + 127.5 * s.clamp(-1.0, 1.0)) as u8;
        }
        px
    })
    .unwrap()
}

/// Filled ellipse mask (255 inside).
pub fn ellipse_mask(w: u32, h: u32, cx: f64, cy: f64, rx: f64, ry: f64) -> Raster {
    Raster::from_fn(w, h, 1, |x, y| {
        let dx = (x as f64 - cx) / rx;
        let dy = (y as f64 - cy) / ry;
        [if dx * dx + dy * dy <= 1.0 { 255 } else { 0 }, 0, 0]
    })
    .unwrap()
}

/// Min/max corners of all nonzero pixels, by brute force.
pub fn foreground_extent(mask: &Raster) -> Option<(u32, u32, u32, u32)> {
    let mut ext: Option<(u32, u32, u32, u32)> = None;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.value(x, y) != 0 {
                ext = Some(match ext {
                    None => (x, y, x, y),
                    Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
                });
            }
        }
    }
    ext
}
