use std::path::Path;

use crate::error::Result;
use crate::geometry::Point2;
use crate::mls::HandleSet;
use crate::pipeline::config::WarpRoute;
use crate::pipeline::run::variant_field;
use crate::raster::Raster;
use crate::sample::LabeledSample;
use crate::warp::{warp_image, Fill, Sampling};

const MARKER: [u8; 3] = [255, 32, 32];
const ARROW: [u8; 3] = [32, 220, 32];
// Small inputs are upscaled until the longer side reaches this many pixels.
const MIN_PREVIEW_SIDE: u32 = 256;

/// Where the overlay was drawn, in preview-image pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct PreviewLayout {
    /// Integer upscaling applied to both panes.
    pub scale: u32,
    /// Handle markers on the left pane.
    pub markers: Vec<Point2>,
    /// `(p, q)` arrow endpoints on the left pane.
    pub arrows: Vec<(Point2, Point2)>,
    /// Horizontal offset of the right (warped) pane.
    pub right_offset: u32,
}

/// Renders the side-by-side preview in memory: the source with handle markers
/// and `p -> q` arrows on the left, the warped result on the right.
pub fn render_preview(
    sample: &LabeledSample,
    handles: &HandleSet,
    lattice_spacing: u32,
    route: WarpRoute,
) -> Result<(Raster, PreviewLayout)> {
    let src = sample.image.to_rgb();
    let (w, h) = src.dims();
    let field = variant_field(
        route,
        None,
        handles.sources(),
        handles.targets(),
        handles.alpha(),
        (w, h),
        lattice_spacing,
    )?;
    let warped = warp_image(&src, &field, Sampling::Bilinear, Fill::ReplicateEdge)?;

    let scale = MIN_PREVIEW_SIDE.div_ceil(w.max(h));
    let (pw, ph) = (w * scale, h * scale);
    let mut canvas = Raster::filled(2 * pw, ph, 3, 0)?;
    for y in 0..ph {
        for x in 0..pw {
            let s = src.pixel(x / scale, y / scale).to_vec();
            canvas.pixel_mut(x, y).copy_from_slice(&s);
            let t = warped.pixel(x / scale, y / scale).to_vec();
            canvas.pixel_mut(x + pw, y).copy_from_slice(&t);
        }
    }

    let to_canvas = |p: Point2| {
        let half = (scale as f64 - 1.0) / 2.0;
        Point2::new(p.x * scale as f64 + half, p.y * scale as f64 + half)
    };
    let mut layout = PreviewLayout {
        scale,
        markers: Vec::with_capacity(handles.len()),
        arrows: Vec::with_capacity(handles.len()),
        right_offset: pw,
    };
    for (p, q) in handles.sources().iter().zip(handles.targets()) {
        let (a, b) = (to_canvas(*p), to_canvas(*q));
        draw_line(&mut canvas, a, b, pw, ARROW);
        layout.arrows.push((a, b));
    }
    let radius = (scale as i64 / 2).max(1);
    for p in handles.sources() {
        let c = to_canvas(*p);
        draw_square(&mut canvas, c, radius, pw, MARKER);
        layout.markers.push(c);
    }
    Ok((canvas, layout))
}

/// Writes the preview PNG to `out_path`.
pub fn preview_render(
    sample: &LabeledSample,
    handles: &HandleSet,
    lattice_spacing: u32,
    route: WarpRoute,
    out_path: impl AsRef<Path>,
) -> Result<PreviewLayout> {
    let (canvas, layout) = render_preview(sample, handles, lattice_spacing, route)?;
    canvas.save_png(out_path)?;
    Ok(layout)
}

fn put(canvas: &mut Raster, x: i64, y: i64, max_x: u32, color: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < max_x && (y as u32) < canvas.height() {
        canvas.pixel_mut(x as u32, y as u32).copy_from_slice(&color);
    }
}

fn draw_square(canvas: &mut Raster, c: Point2, radius: i64, max_x: u32, color: [u8; 3]) {
    let (cx, cy) = (c.x.round() as i64, c.y.round() as i64);
    for y in cy - radius..=cy + radius {
        for x in cx - radius..=cx + radius {
            put(canvas, x, y, max_x, color);
        }
    }
}

// Bresenham between the rounded endpoints, clipped to the left pane.
fn draw_line(canvas: &mut Raster, a: Point2, b: Point2, max_x: u32, color: [u8; 3]) {
    let (mut x0, mut y0) = (a.x.round() as i64, a.y.round() as i64);
    let (x1, y1) = (b.x.round() as i64, b.y.round() as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        put(canvas, x0, y0, max_x, color);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}
