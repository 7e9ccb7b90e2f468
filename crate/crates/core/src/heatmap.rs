//! Heatmap raster: loading, normalization, and overlay rendering.
//!
//! A [`Heatmap`] is a dense row-major RGB raster with unit-interval
//! channels. Decoding maps 8-bit samples through `v / 255`; grayscale
//! images replicate luma into all three channels and any alpha channel is
//! dropped. Re-encoding rounds back to 8 bits, so a load → save → load
//! round trip moves each channel by at most half a quantisation step.

use std::path::Path;

use image::{DynamicImage, ImageReader, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Dense RGB raster with channels in `[0, 1]`, row-major from the top-left.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: u32,
    height: u32,
    pixels: Vec<[f64; 3]>,
}

impl Heatmap {
    /// Builds a heatmap from row-major pixels, validating dimensions and
    /// channel ranges.
    pub fn new(width: u32, height: u32, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation(format!(
                "heatmap dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::validation(format!(
                "pixel buffer holds {} entries, expected {expected}",
                pixels.len()
            )));
        }
        for (i, px) in pixels.iter().enumerate() {
            if px.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::validation(format!(
                    "channel out of [0,1] at pixel index {i}: {px:?}"
                )));
            }
        }
        Ok(Heatmap {
            width,
            height,
            pixels,
        })
    }

    /// Builds a heatmap by evaluating `f(x, y)` for every pixel. The
    /// closure must return channels in `[0, 1]`.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [f64; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Heatmap::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }

    /// Channel triple at `(x, y)`; panics when out of bounds, like slice
    /// indexing.
    pub fn get(&self, x: u32, y: u32) -> [f64; 3] {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    /// Row-major pixel slice, `y * width + x` indexing.
    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    /// Quantises back to an 8-bit RGB image (round-to-nearest).
    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| {
            let px = self.get(x, y);
            Rgb(px.map(|c| (c * 255.0).round() as u8))
        })
    }

    /// Encodes as PNG at `path`.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb_image().save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Decodes a PNG (8-bit RGB, RGBA, or grayscale) into a [`Heatmap`].
///
/// Each 8-bit sample maps to `v / 255`; e.g. `(128, 64, 255)` becomes
/// approximately `(0.502, 0.251, 1.0)`. Grayscale luma is replicated into
/// all three channels and alpha is stripped.
pub fn load_heatmap(path: &Path) -> Result<Heatmap> {
    let reader = ImageReader::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let decoded: DynamicImage = reader.decode().map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    if decoded.width() == 0 || decoded.height() == 0 {
        return Err(Error::validation(format!(
            "zero-dimension image: {}",
            path.display()
        )));
    }
    let rgb = decoded.to_rgb8();
    let pixels = rgb
        .pixels()
        .map(|p| p.0.map(|c| f64::from(c) / 255.0))
        .collect();
    Heatmap::new(rgb.width(), rgb.height(), pixels)
}

// ── Overlay rendering ───────────────────────────────────────────────────

/// Outline colour for a candidate at `rank` (1-based): bright green for
/// the top candidate, darker green for later ranks.
fn candidate_colour(rank: usize) -> Rgb<u8> {
    match rank {
        1 => Rgb([0, 255, 0]),
        2 => Rgb([0, 200, 0]),
        3 => Rgb([0, 160, 0]),
        _ => Rgb([0, 120, 0]),
    }
}

const TARGET_COLOUR: Rgb<u8> = Rgb([255, 0, 0]);

/// 3x5 digit glyphs, one row per byte, low three bits used.
const DIGIT_GLYPHS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111], // 0
    [0b010, 0b110, 0b010, 0b010, 0b111], // 1
    [0b111, 0b001, 0b111, 0b100, 0b111], // 2
    [0b111, 0b001, 0b111, 0b001, 0b111], // 3
    [0b101, 0b101, 0b111, 0b001, 0b001], // 4
    [0b111, 0b100, 0b111, 0b001, 0b111], // 5
    [0b111, 0b100, 0b111, 0b101, 0b111], // 6
    [0b111, 0b001, 0b001, 0b001, 0b001], // 7
    [0b111, 0b101, 0b111, 0b101, 0b111], // 8
    [0b111, 0b101, 0b111, 0b001, 0b111], // 9
];

fn draw_rect_outline(img: &mut RgbImage, b: &BoundingBox, colour: Rgb<u8>) {
    for x in b.x0()..=b.x1() {
        img.put_pixel(x, b.y0(), colour);
        img.put_pixel(x, b.y1(), colour);
    }
    for y in b.y0()..=b.y1() {
        img.put_pixel(b.x0(), y, colour);
        img.put_pixel(b.x1(), y, colour);
    }
}

/// Draws `text` digits at `(x, y)` top-left, clipping at image bounds.
fn draw_digits(img: &mut RgbImage, x: u32, y: u32, text: &str, colour: Rgb<u8>) {
    let mut cursor = x;
    for ch in text.chars() {
        let Some(d) = ch.to_digit(10) else { continue };
        let glyph = DIGIT_GLYPHS[d as usize];
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..3u32 {
                if bits & (0b100 >> col) != 0 {
                    let (px, py) = (cursor + col, y + row as u32);
                    if px < img.width() && py < img.height() {
                        img.put_pixel(px, py, colour);
                    }
                }
            }
        }
        cursor += 4; // 3-wide glyph plus 1 column of spacing
    }
}

/// Renders `h` with candidate boxes outlined and rank-labelled (in list
/// order, rank 1 first) and the optional target box in a distinct colour.
///
/// With no candidates and no target the output is exactly the 8-bit
/// encoding of the input. Any box extending outside the image is rejected.
pub fn render_overlay(
    h: &Heatmap,
    candidates: &[BoundingBox],
    target: Option<&BoundingBox>,
) -> Result<RgbImage> {
    for b in candidates.iter().chain(target) {
        if !b.within(h.width(), h.height()) {
            return Err(Error::validation(format!(
                "overlay box {:?} exceeds {}x{} image",
                b.corners(),
                h.width(),
                h.height()
            )));
        }
    }
    let mut img = h.to_rgb_image();
    // Draw low ranks last so the top candidate stays visible where boxes
    // overlap; the target is drawn on top of everything.
    for (idx, b) in candidates.iter().enumerate().rev() {
        let colour = candidate_colour(idx + 1);
        draw_rect_outline(&mut img, b, colour);
        let label = (idx + 1).to_string();
        draw_digits(&mut img, b.x0() + 2, b.y0() + 2, &label, colour);
    }
    if let Some(t) = target {
        draw_rect_outline(&mut img, t, TARGET_COLOUR);
    }
    Ok(img)
}
