use std::collections::VecDeque;

use log::warn;

use crate::error::{Error, Result, SegmentationStage};
use crate::segmentation::image::{BinaryMask, DepthMap};

/// Pixel adjacency used when growing regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(0, -1), (-1, 0), (1, 0), (0, 1)],
            Connectivity::Eight => &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)],
        }
    }
}

/// Result of the depth threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thresholded {
    pub mask: BinaryMask,
    /// Smallest non-zero depth.
    pub min_depth: u16,
    /// First pixel (row-major) attaining `min_depth`, as `(x, y)`.
    pub seed: (usize, usize),
}

/// Marks pixels with `0 < depth <= m + depth_alpha`, where `m` is the
/// smallest non-zero depth. Zero (occluded) pixels are never marked.
pub fn threshold_depth(depth: &DepthMap, depth_alpha: u16) -> Result<Thresholded> {
    let (seed_idx, min_depth) = depth
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0)
        .min_by_key(|(i, &v)| (v, *i))
        .map(|(i, &v)| (i, v))
        .ok_or_else(|| Error::segmentation(SegmentationStage::Threshold, "depth map has no non-zero pixels"))?;
    let limit = min_depth as u32 + depth_alpha as u32;
    let values = depth
        .values()
        .iter()
        .map(|&v| (v > 0 && v as u32 <= limit) as u8)
        .collect();
    Ok(Thresholded {
        mask: BinaryMask::new(depth.width(), depth.height(), values)?,
        min_depth,
        seed: (seed_idx % depth.width(), seed_idx / depth.width()),
    })
}

/// Dilation by a 3x3 square.
pub fn dilate(mask: &BinaryMask) -> BinaryMask {
    dilate_square(mask, 3)
}

/// Dilation by a `side x side` square centred on each pixel (`side` odd).
/// Neighbours outside the image count as background.
pub fn dilate_square(mask: &BinaryMask, side: usize) -> BinaryMask {
    let r = side / 2;
    let (w, h) = (mask.width(), mask.height());
    // Separable: horizontal pass then vertical pass.
    let mut horizontal = vec![0u8; w * h];
    for y in 0..h {
        let row = &mask.values()[y * w..(y + 1) * w];
        for x in 0..w {
            let (lo, hi) = (x.saturating_sub(r), (x + r).min(w - 1));
            horizontal[y * w + x] = row[lo..=hi].iter().any(|&v| v != 0) as u8;
        }
    }
    BinaryMask::from_fn(w, h, |x, y| {
        let (lo, hi) = (y.saturating_sub(r), (y + r).min(h - 1));
        (lo..=hi).any(|yy| horizontal[yy * w + x] != 0)
    })
}

fn flood(
    mask: &BinaryMask,
    seeds: impl IntoIterator<Item = (usize, usize)>,
    value: bool,
    conn: Connectivity,
) -> Vec<bool> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    for (x, y) in seeds {
        if mask.get(x, y) == value && !seen[y * w + x] {
            seen[y * w + x] = true;
            queue.push_back((x, y));
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        for &(dx, dy) in conn.offsets() {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if !seen[ny * w + nx] && mask.get(nx, ny) == value {
                seen[ny * w + nx] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    seen
}

/// Sets to foreground every background pixel not 4-connected to the image
/// border through background.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let border = (0..w)
        .flat_map(|x| [(x, 0), (x, h - 1)])
        .chain((0..h).flat_map(|y| [(0, y), (w - 1, y)]));
    let outside = flood(mask, border, false, Connectivity::Four);
    BinaryMask::from_fn(w, h, |x, y| mask.get(x, y) || !outside[y * w + x])
}

/// Labels foreground components (1-based, in order of first pixel in a
/// row-major scan); background is 0. Returns the labels and the count.
pub fn label_components(mask: &BinaryMask, conn: Connectivity) -> (Vec<u32>, u32) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut next = 0;
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) && labels[y * w + x] == 0 {
                next += 1;
                for (i, &inside) in flood(mask, [(x, y)], true, conn).iter().enumerate() {
                    if inside {
                        labels[i] = next;
                    }
                }
            }
        }
    }
    (labels, next)
}

/// Number of 8-connected foreground components.
pub fn component_count(mask: &BinaryMask) -> usize {
    label_components(mask, Connectivity::Eight).1 as usize
}

/// Keeps only the 8-connected foreground component containing `seed`.
///
/// If the seed pixel is background the largest component is kept instead
/// (earliest in scan order on ties) and a warning is logged. An empty mask
/// is an error.
pub fn largest_component_containing(mask: &BinaryMask, seed: (usize, usize)) -> Result<BinaryMask> {
    let (w, h) = (mask.width(), mask.height());
    if seed.0 >= w || seed.1 >= h {
        return Err(Error::segmentation(
            SegmentationStage::Component,
            format!("seed {seed:?} outside the {w}x{h} mask"),
        ));
    }
    if mask.get(seed.0, seed.1) {
        let keep = flood(mask, [seed], true, Connectivity::Eight);
        return Ok(BinaryMask::from_fn(w, h, |x, y| keep[y * w + x]));
    }
    let (labels, count) = label_components(mask, Connectivity::Eight);
    if count == 0 {
        return Err(Error::segmentation(SegmentationStage::Component, "mask has no foreground"));
    }
    let mut sizes = vec![0usize; count as usize + 1];
    for &l in &labels {
        sizes[l as usize] += 1;
    }
    let best = (1..=count as usize)
        .max_by_key(|&l| (sizes[l], std::cmp::Reverse(l)))
        .expect("at least one component") as u32;
    warn!("seed {seed:?} is background; keeping the largest component ({} px)", sizes[best as usize]);
    Ok(BinaryMask::from_fn(w, h, |x, y| labels[y * w + x] == best))
}
