//! Parametric test scenes: blobs with known ground truth.
//!
//! A scene renders a set of elliptical blobs (flat plateaus or Gaussian
//! bumps) onto a black canvas, combines them with a per-pixel,
//! per-channel maximum, and optionally corrupts the red channel with
//! seeded uniform noise. For every blob the generator also returns the
//! tight box of pixels whose **noiseless** contribution exceeds the
//! pipeline's default high threshold — the region the proposal stage is
//! expected to recover.
//!
//! Flat plateaus fill the **open** ellipse: pixels on the boundary curve
//! itself stay empty. The closed ellipse would end in one-pixel tips at
//! the four axis extremes, and an isolated protruding pixel cannot keep
//! a smoothed value above the feature threshold, so only the open
//! support makes the planted box recoverable rather than one pixel
//! larger than any candidate can be.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, PixelCoord};
use crate::heatmap::Heatmap;

/// Threshold defining ground-truth support; matches the pipeline's
/// default high threshold.
pub const GROUND_TRUTH_THRESHOLD: f64 = 0.9;

/// Radial intensity profile of a blob.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Falloff {
    /// `peak * exp(-rho^2 / 2)` with the radii acting as per-axis sigmas.
    Gaussian,
    /// Full peak strictly inside the ellipse, zero on and outside the
    /// boundary curve.
    Flat,
}

impl std::str::FromStr for Falloff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Falloff::Gaussian),
            "flat" => Ok(Falloff::Flat),
            other => Err(Error::validation(format!(
                "unknown falloff {other:?}; expected flat or gaussian"
            ))),
        }
    }
}

/// One planted blob.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub center: PixelCoord,
    pub radius_x: u32,
    pub radius_y: u32,
    /// Red peak intensity in `[0, 1]`.
    pub peak_r: f64,
    /// Green peak intensity in `[0, 1]`.
    pub peak_g: f64,
    pub falloff: Falloff,
}

impl BlobSpec {
    /// Normalised squared radius of `(x, y)` relative to the blob:
    /// 1.0 on the ellipse boundary.
    fn rho2(&self, x: u32, y: u32) -> f64 {
        let dx = (f64::from(x) - f64::from(self.center.x)) / f64::from(self.radius_x);
        let dy = (f64::from(y) - f64::from(self.center.y)) / f64::from(self.radius_y);
        dx * dx + dy * dy
    }

    /// Noiseless `(r, g)` contribution of this blob at `(x, y)`.
    fn contribution(&self, x: u32, y: u32) -> (f64, f64) {
        let rho2 = self.rho2(x, y);
        match self.falloff {
            Falloff::Flat => {
                if rho2 < 1.0 {
                    (self.peak_r, self.peak_g)
                } else {
                    (0.0, 0.0)
                }
            }
            Falloff::Gaussian => {
                let scale = (-rho2 / 2.0).exp();
                (self.peak_r * scale, self.peak_g * scale)
            }
        }
    }

    /// The strongest channel this blob can produce.
    fn peak(&self) -> f64 {
        self.peak_r.max(self.peak_g)
    }
}

/// A full scene description. Generation is deterministic in all fields.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub width: u32,
    pub height: u32,
    pub blobs: Vec<BlobSpec>,
    /// Uniform noise bound for the red channel; 0 disables noise.
    pub noise_amplitude: f64,
    /// Seed for the noise stream.
    pub seed: u64,
}

fn validate(scene: &SynthScene) -> Result<()> {
    if scene.width == 0 || scene.height == 0 {
        return Err(Error::validation(format!(
            "scene dimensions must be positive, got {}x{}",
            scene.width, scene.height
        )));
    }
    if !(0.0..1.0).contains(&scene.noise_amplitude) {
        return Err(Error::validation(format!(
            "noise amplitude must lie in [0, 1), got {}",
            scene.noise_amplitude
        )));
    }
    for (i, blob) in scene.blobs.iter().enumerate() {
        if blob.radius_x == 0 || blob.radius_y == 0 {
            return Err(Error::validation(format!("blob {i} has a zero radius")));
        }
        for (name, peak) in [("peak_r", blob.peak_r), ("peak_g", blob.peak_g)] {
            if !(0.0..=1.0).contains(&peak) {
                return Err(Error::validation(format!(
                    "blob {i} {name} must lie in [0, 1], got {peak}"
                )));
            }
        }
        let fits = blob.center.x >= blob.radius_x
            && blob.center.y >= blob.radius_y
            && blob.center.x + blob.radius_x < scene.width
            && blob.center.y + blob.radius_y < scene.height;
        if !fits {
            return Err(Error::validation(format!(
                "blob {i} at ({}, {}) with radii ({}, {}) exceeds the {}x{} scene",
                blob.center.x,
                blob.center.y,
                blob.radius_x,
                blob.radius_y,
                scene.width,
                scene.height
            )));
        }
        if scene.noise_amplitude >= blob.peak() {
            return Err(Error::validation(format!(
                "noise amplitude {} must stay below blob {i}'s peak {}",
                scene.noise_amplitude,
                blob.peak()
            )));
        }
    }
    Ok(())
}

/// Renders the scene and returns the heatmap plus per-blob ground-truth
/// boxes.
///
/// Blobs combine by per-pixel, per-channel maximum; the blue channel is
/// always zero. Noise is drawn per pixel in raster order from a stream
/// seeded by `scene.seed`, added to red only, and clipped at 1. Ground
/// truth is computed from each blob's own noiseless contribution; blobs
/// whose peak never exceeds [`GROUND_TRUTH_THRESHOLD`] contribute no box.
pub fn generate(scene: &SynthScene) -> Result<(Heatmap, Vec<BoundingBox>)> {
    validate(scene)?;

    let mut pixels = vec![[0.0f64; 3]; scene.width as usize * scene.height as usize];
    for blob in &scene.blobs {
        // The support of both falloffs that can exceed the ground-truth
        // threshold lies within the radius box, but the Gaussian tail is
        // everywhere, so rendering covers the full canvas.
        for y in 0..scene.height {
            for x in 0..scene.width {
                let (r, g) = blob.contribution(x, y);
                let px = &mut pixels[y as usize * scene.width as usize + x as usize];
                px[0] = px[0].max(r);
                px[1] = px[1].max(g);
            }
        }
    }

    if scene.noise_amplitude > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
        for px in &mut pixels {
            let u: f64 = rng.random_range(0.0..=scene.noise_amplitude);
            px[0] = (px[0] + u).min(1.0);
        }
    }

    let mut truth = Vec::new();
    for blob in &scene.blobs {
        let mut members = Vec::new();
        let (cx, cy) = (blob.center.x, blob.center.y);
        for y in (cy - blob.radius_y)..=(cy + blob.radius_y) {
            for x in (cx - blob.radius_x)..=(cx + blob.radius_x) {
                let (r, g) = blob.contribution(x, y);
                if r > GROUND_TRUTH_THRESHOLD || g > GROUND_TRUTH_THRESHOLD {
                    members.push(PixelCoord::new(x, y));
                }
            }
        }
        if !members.is_empty() {
            truth.push(BoundingBox::around(members.iter())?);
        }
    }

    let heatmap = Heatmap::new(scene.width, scene.height, pixels)?;
    Ok((heatmap, truth))
}
