use crate::segmentation::image::BinaryMask;

/// Side length of the network input.
pub const MASK_SIZE: usize = 50;

/// Sparse `(source index, weight)` taps for each output index along one axis.
/// Shrinking uses box (area) weights; enlarging uses centre-aligned linear
/// interpolation.
fn axis_taps(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    if src == dst {
        return (0..dst).map(|i| vec![(i, 1.0)]).collect();
    }
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            if src > dst {
                let (lo, hi) = (i as f64 * scale, (i + 1) as f64 * scale);
                let first = lo.floor() as usize;
                let last = (hi.ceil() as usize).min(src);
                (first..last)
                    .filter_map(|j| {
                        let overlap = hi.min(j as f64 + 1.0) - lo.max(j as f64);
                        (overlap > 0.0).then_some((j, overlap / scale))
                    })
                    .collect()
            } else {
                let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let j = pos.floor() as usize;
                let frac = pos - j as f64;
                if frac == 0.0 || j + 1 >= src {
                    vec![(j, 1.0)]
                } else {
                    vec![(j, 1.0 - frac), (j + 1, frac)]
                }
            }
        })
        .collect()
}

/// Resamples a mask to `width x height`, marking outputs whose averaged
/// coverage is at least one half.
pub fn resize_mask_to(mask: &BinaryMask, width: usize, height: usize) -> BinaryMask {
    let (sw, sh) = (mask.width(), mask.height());
    let xs = axis_taps(sw, width);
    let ys = axis_taps(sh, height);
    let mut rows = vec![0.0f64; width * sh];
    for y in 0..sh {
        let src = &mask.values()[y * sw..(y + 1) * sw];
        for (x, taps) in xs.iter().enumerate() {
            rows[y * width + x] = taps.iter().map(|&(j, w)| w * src[j] as f64).sum();
        }
    }
    // Tolerance absorbs rounding in non-integer box weights.
    BinaryMask::from_fn(width, height, |x, y| {
        let v: f64 = ys[y].iter().map(|&(j, w)| w * rows[j * width + x]).sum();
        v >= 0.5 - 1e-9
    })
}

/// Resamples to the 50x50 network input size.
pub fn resize_mask(mask: &BinaryMask) -> BinaryMask {
    resize_mask_to(mask, MASK_SIZE, MASK_SIZE)
}
