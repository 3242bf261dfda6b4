use crate::dataset::manifest::Sample;
use crate::segmentation::BinaryMask;

/// Rotation angles in degrees; index 4 is the unrotated original.
pub const ROTATION_ANGLES: [i32; 9] = [-20, -15, -10, -5, 0, 5, 10, 15, 20];

/// Rotates about the image centre with nearest-neighbour sampling. Positive
/// angles turn the content counter-clockwise as displayed (y down). Pixels
/// mapped from outside the frame are background.
pub fn rotate_mask(mask: &BinaryMask, degrees: f64) -> BinaryMask {
    if degrees == 0.0 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (sin, cos) = degrees.to_radians().sin_cos();
    BinaryMask::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        // inverse mapping: output pixel -> source pixel
        let sx = (cx + dx * cos - dy * sin).round();
        let sy = (cy + dx * sin + dy * cos).round();
        sx >= 0.0 && sy >= 0.0 && sx < w as f64 && sy < h as f64 && mask.get(sx as usize, sy as usize)
    })
}

/// The nine rotated views in `ROTATION_ANGLES` order.
pub fn augment_rotations(mask: &BinaryMask) -> Vec<BinaryMask> {
    ROTATION_ANGLES.iter().map(|&a| rotate_mask(mask, a as f64)).collect()
}

/// Expands every original sample into its nine rotation entries.
pub fn augment_samples(originals: &[Sample]) -> Vec<Sample> {
    originals
        .iter()
        .flat_map(|s| {
            ROTATION_ANGLES.iter().map(move |&rotation_deg| Sample {
                rotation_deg,
                ..s.clone()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_identity_and_at_centre() {
        let m = BinaryMask::from_fn(9, 7, |x, y| (x + 2 * y) % 3 == 0);
        let views = augment_rotations(&m);
        assert_eq!(views.len(), 9);
        assert_eq!(views[4], m);
        assert_eq!(ROTATION_ANGLES[4], 0);
    }

    #[test]
    fn quarter_turn_is_exact() {
        // A bar to the right of centre moves above centre.
        let m = BinaryMask::from_fn(5, 5, |x, y| y == 2 && x >= 3);
        let turned = rotate_mask(&m, 90.0);
        assert_eq!(turned, BinaryMask::from_fn(5, 5, |x, y| x == 2 && y <= 1));
        assert_eq!(rotate_mask(&turned, -90.0), m);
    }

    #[test]
    fn content_leaving_the_frame_is_dropped() {
        let corner = BinaryMask::from_fn(10, 10, |x, y| x == 0 && y == 0);
        assert_eq!(rotate_mask(&corner, 20.0).count(), 0);
    }

    #[test]
    fn sample_expansion() {
        let s = Sample {
            person: 1,
            gesture: 2,
            repetition: 3,
            depth_path: "a.pgm".into(),
            rotation_deg: 0,
        };
        let all = augment_samples(&[s.clone(), s]);
        assert_eq!(all.len(), 18);
        let angles: Vec<i32> = all[..9].iter().map(|s| s.rotation_deg).collect();
        assert_eq!(angles, ROTATION_ANGLES);
    }
}
