//! Activation masking and connected-component analysis.
//!
//! The heatmap encodes evidence in its red and green channels. A pixel is
//! *active* when either channel strictly exceeds the high threshold; the
//! number of sufficiently large 8-connected active components (plus one
//! for the background) later becomes the k-means cluster budget.

use std::collections::BTreeMap;

use crate::heatmap::Heatmap;

/// Boolean raster marking pixels whose red or green channel exceeds a
/// threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl ActiveMask {
    /// Builds a mask directly from row-major bits; mainly useful in tests.
    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width as usize * height as usize);
        ActiveMask {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn active_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Row-major bit slice.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Marks pixels whose red **or** green channel strictly exceeds `t_h`.
/// The comparison is strict: a channel exactly at the threshold does not
/// activate the pixel.
pub fn active_mask(h: &Heatmap, t_h: f64) -> ActiveMask {
    let bits = h.pixels().iter().map(|[r, g, _]| *r > t_h || *g > t_h).collect();
    ActiveMask {
        width: h.width(),
        height: h.height(),
        bits,
    }
}

/// Result of 8-connected component labelling: a label raster (0 =
/// inactive) and per-label pixel counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    width: u32,
    height: u32,
    labels: Vec<u32>,
    sizes: BTreeMap<u32, usize>,
}

impl ComponentLabeling {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Label at `(x, y)`; 0 means inactive.
    pub fn label(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Pixel count per component label (labels start at 1).
    pub fn sizes(&self) -> &BTreeMap<u32, usize> {
        &self.sizes
    }

    /// Number of components of any size.
    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }
}

/// Offsets of the 8-neighbourhood (horizontal, vertical, and diagonal).
const NEIGHBOURS_8: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Labels 8-connected components of active pixels. Labels are assigned in
/// raster-scan discovery order starting at 1, so the component whose
/// topmost-leftmost pixel comes first receives label 1.
pub fn label_components(mask: &ActiveMask) -> ComponentLabeling {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut labels = vec![0u32; w * h];
    let mut sizes = BTreeMap::new();
    let mut next = 1u32;
    let mut stack = Vec::new();

    for start in 0..labels.len() {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        // New component: flood fill with an explicit stack to stay safe on
        // blob-sized components.
        let label = next;
        next += 1;
        let mut count = 0usize;
        labels[start] = label;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            count += 1;
            let (x, y) = ((idx % w) as i64, (idx / w) as i64);
            for (dx, dy) in NEIGHBOURS_8 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                if mask.bits()[nidx] && labels[nidx] == 0 {
                    labels[nidx] = label;
                    stack.push(nidx);
                }
            }
        }
        sizes.insert(label, count);
    }

    ComponentLabeling {
        width: mask.width(),
        height: mask.height(),
        labels,
        sizes,
    }
}

/// Cluster budget derived from component analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionCount {
    /// Components with at least `min_area` pixels.
    pub active_components: usize,
    /// k-means budget: surviving components plus one background cluster.
    /// Always at least 1.
    pub k: usize,
}

/// Counts components meeting the area floor (`size >= min_area` survives;
/// anything smaller is discarded) and adds one cluster for the background.
pub fn count_regions(labeling: &ComponentLabeling, min_area: usize) -> RegionCount {
    let active_components = labeling
        .sizes()
        .values()
        .filter(|size| **size >= min_area)
        .count();
    RegionCount {
        active_components,
        k: active_components + 1,
    }
}
