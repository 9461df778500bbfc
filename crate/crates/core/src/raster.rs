//! 8-bit rasters and their PNG encoding.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, RgbImage};

use crate::error::{invalid, Error, Result};

/// Row-major 8-bit raster with 1 (mask/grayscale) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    channels: u8,
    pixels: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, channels: u8, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return invalid(format!(
                "raster dims must be positive, got {width}x{height}"
            ));
        }
        if channels != 1 && channels != 3 {
            return invalid(format!("raster must have 1 or 3 channels, got {channels}"));
        }
        let expected = width as usize * height as usize * channels as usize;
        if pixels.len() != expected {
            return invalid(format!(
                "pixel buffer has {} bytes, expected {expected}",
                pixels.len()
            ));
        }
        Ok(Raster {
            width,
            height,
            channels,
            pixels,
        })
    }

    /// A raster with every channel of every pixel set to `value`.
    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self> {
        let len = width as usize * height as usize * channels as usize;
        Raster::new(width, height, channels, vec![value; len])
    }

    /// Builds a raster by evaluating `f(x, y)` for each pixel.
    pub fn from_fn(
        width: u32,
        height: u32,
        channels: u8,
        mut f: impl FnMut(u32, u32) -> [u8; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize * channels as usize);
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                pixels.extend_from_slice(&px[..channels as usize]);
            }
        }
        Raster::new(width, height, channels, pixels)
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> u8 {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    /// Channel values of pixel `(x, y)`.
    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let o = self.offset(x, y);
        &self.pixels[o..o + self.channels as usize]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [u8] {
        let o = self.offset(x, y);
        let c = self.channels as usize;
        &mut self.pixels[o..o + c]
    }

    /// First channel of pixel `(x, y)`; the label value for masks.
    #[inline]
    pub fn value(&self, x: u32, y: u32) -> u8 {
        self.pixels[self.offset(x, y)]
    }

    /// Number of pixels whose first channel is nonzero.
    pub fn count_nonzero(&self) -> usize {
        self.pixels
            .chunks_exact(self.channels as usize)
            .filter(|px| px[0] != 0)
            .count()
    }

    pub fn from_dynamic(img: DynamicImage) -> Self {
        let (width, height) = (img.width(), img.height());
        let (channels, pixels) = match img {
            DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
            DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_) => (1, img.to_luma8().into_raw()),
            other => (3, other.to_rgb8().into_raw()),
        };
        Raster {
            width,
            height,
            channels,
            pixels,
        }
    }

    /// Reads a PNG (or any format the codec recognizes) from disk.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let raster = Raster::from_dynamic(img);
        if raster.width == 0 || raster.height == 0 {
            return invalid(format!("{} has zero size", path.display()));
        }
        Ok(raster)
    }

    /// Reads a label mask; multi-channel files are reduced to their first channel.
    pub fn load_mask(path: impl AsRef<Path>) -> Result<Self> {
        let raster = Raster::load(path)?;
        Ok(raster.first_channel())
    }

    /// Keeps only channel 0.
    pub fn first_channel(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let pixels = self
            .pixels
            .chunks_exact(self.channels as usize)
            .map(|px| px[0])
            .collect();
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            pixels,
        }
    }

    /// Expands a 1-channel raster to RGB; RGB rasters are cloned.
    pub fn to_rgb(&self) -> Raster {
        if self.channels == 3 {
            return self.clone();
        }
        let pixels = self.pixels.iter().flat_map(|&v| [v, v, v]).collect();
        Raster {
            width: self.width,
            height: self.height,
            channels: 3,
            pixels,
        }
    }

    pub fn to_dynamic(&self) -> DynamicImage {
        match self.channels {
            1 => {
                let buf: GrayImage =
                    ImageBuffer::from_raw(self.width, self.height, self.pixels.clone())
                        .expect("buffer length checked at construction");
                DynamicImage::ImageLuma8(buf)
            }
            _ => {
                let buf: RgbImage =
                    ImageBuffer::from_raw(self.width, self.height, self.pixels.clone())
                        .expect("buffer length checked at construction");
                DynamicImage::ImageRgb8(buf)
            }
        }
    }

    /// Writes the raster as an 8-bit PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_dynamic()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }
}
