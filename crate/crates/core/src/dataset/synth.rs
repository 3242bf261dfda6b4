//! Synthetic depth frames of a parametric hand in front of a body plane.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::manifest::{write_manifest, Sample};
use crate::error::{Error, Result};
use crate::segmentation::pnm::encode_depth;
use crate::segmentation::DepthMap;

pub const HAND_DEPTH: u16 = 40;
pub const BODY_DEPTH: u16 = 80;
/// Angle between neighbouring fingers, degrees.
pub const FINGER_SPACING_DEG: f64 = 20.0;
/// Hand-local geometry at scale 1, in pixels of a 100-pixel frame.
pub const PALM_RADII: (f64, f64) = (12.0, 11.0);
pub const FINGER_START: f64 = 8.0;
pub const FINGER_END: f64 = 40.0;
pub const FINGER_HALF_WIDTH: f64 = 2.0;
pub const FOREARM_HALF_WIDTH: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub classes: usize,
    pub persons: u32,
    pub repetitions: u32,
    pub width: usize,
    pub height: usize,
    /// Fraction of pixels randomly set to 0 (occluded).
    pub dropout: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            classes: 10,
            persons: 14,
            repetitions: 10,
            width: 100,
            height: 100,
            dropout: 0.01,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.classes > crate::nn::layer::NUM_CLASSES {
            return Err(Error::invalid(format!("class count {} outside 1..=10", self.classes)));
        }
        if self.persons == 0 || self.repetitions == 0 || self.repetitions > 99 || self.persons > 99 {
            return Err(Error::invalid("persons and repetitions must be in 1..=99"));
        }
        if self.width < 40 || self.height < 40 {
            return Err(Error::invalid("frames must be at least 40x40"));
        }
        if !(0.0..0.2).contains(&self.dropout) {
            return Err(Error::invalid("dropout must be in [0, 0.2)"));
        }
        Ok(())
    }
}

/// Placement of the hand in one frame. `fingers` equals the class index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandPose {
    pub fingers: usize,
    pub center: (f64, f64),
    pub scale: f64,
    /// Counter-clockwise as displayed.
    pub rotation_deg: f64,
}

impl HandPose {
    /// Direction of finger `i`, degrees counter-clockwise from straight up
    /// in hand-local coordinates.
    pub fn finger_angle(&self, i: usize) -> f64 {
        (i as f64 - (self.fingers as f64 - 1.0) / 2.0) * FINGER_SPACING_DEG
    }

    /// Frame pixel to hand-local coordinates (x right, y up, unit scale).
    pub fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = ((x - self.center.0) / self.scale, (self.center.1 - y) / self.scale);
        let (sin, cos) = self.rotation_deg.to_radians().sin_cos();
        (dx * cos + dy * sin, -dx * sin + dy * cos)
    }

    /// Hand-local coordinates to frame pixel.
    pub fn to_frame(&self, lx: f64, ly: f64) -> (f64, f64) {
        let (sin, cos) = self.rotation_deg.to_radians().sin_cos();
        let (dx, dy) = (lx * cos - ly * sin, lx * sin + ly * cos);
        (self.center.0 + dx * self.scale, self.center.1 - dy * self.scale)
    }

    pub fn covers(&self, x: f64, y: f64) -> bool {
        let (lx, ly) = self.to_local(x, y);
        let (a, b) = PALM_RADII;
        if (lx / a).powi(2) + (ly / b).powi(2) <= 1.0 {
            return true;
        }
        if ly <= 0.0 && lx.abs() <= FOREARM_HALF_WIDTH {
            return true;
        }
        (0..self.fingers).any(|i| {
            let (sin, cos) = self.finger_angle(i).to_radians().sin_cos();
            // finger axis points at (-sin, cos)
            let along = -lx * sin + ly * cos;
            let across = lx * cos + ly * sin;
            (FINGER_START..=FINGER_END).contains(&along) && across.abs() <= FINGER_HALF_WIDTH
        })
    }
}

fn frame_seed(seed: u64, person: u32, gesture: usize, repetition: u32) -> u64 {
    seed ^ ((person as u64) << 40 | (gesture as u64) << 20 | repetition as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Pose of a frame: per-person jitter (scale +-10%, rotation +-10 degrees,
/// shift) plus a smaller per-repetition jitter.
pub fn pose_for(config: &SynthConfig, seed: u64, person: u32, gesture: usize, repetition: u32) -> HandPose {
    let mut person_rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, person, 0x3ff, 0));
    let person_scale = person_rng.gen_range(0.9..=1.1);
    let person_rot = person_rng.gen_range(-10.0..=10.0);
    let person_shift = (person_rng.gen_range(-4.0..=4.0), person_rng.gen_range(-4.0..=4.0));
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, person, gesture, repetition) ^ 0x5eed);
    let unit = config.width.min(config.height) as f64 / 100.0;
    HandPose {
        fingers: gesture,
        center: (
            config.width as f64 / 2.0 + (person_shift.0 + rng.gen_range(-2.0..=2.0)) * unit,
            config.height as f64 * 0.56 + (person_shift.1 + rng.gen_range(-2.0..=2.0)) * unit,
        ),
        scale: person_scale * rng.gen_range(0.97..=1.03) * unit,
        rotation_deg: person_rot + rng.gen_range(-3.0..=3.0),
    }
}

/// Renders one frame. Hand pixels lie within `[base, base + 2]` for a
/// per-frame base of `HAND_DEPTH +- 2`; everything else is the body plane
/// with a little noise. A `dropout` fraction of pixels reads 0.
pub fn render(config: &SynthConfig, seed: u64, person: u32, gesture: usize, repetition: u32) -> (DepthMap, HandPose) {
    let pose = pose_for(config, seed, person, gesture, repetition);
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, person, gesture, repetition) ^ 0xdeb7);
    let base = HAND_DEPTH - 2 + rng.gen_range(0..=4);
    let (w, h) = (config.width, config.height);
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let depth = if pose.covers(x as f64, y as f64) {
                base + rng.gen_range(0..=2)
            } else {
                BODY_DEPTH - 3 + rng.gen_range(0..=6)
            };
            values.push(if rng.gen_bool(config.dropout) { 0 } else { depth });
        }
    }
    (DepthMap::new(w, h, values).expect("positive frame size"), pose)
}

/// Writes `dataset.csv` and `depth/pNN_gKK_rMM.pgm` under `out_dir` and
/// returns the samples in manifest order (person, gesture, repetition).
pub fn synth_generate(out_dir: impl AsRef<Path>, config: &SynthConfig, seed: u64) -> Result<Vec<Sample>> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir.join("depth"))?;
    let mut samples = Vec::new();
    for person in 1..=config.persons {
        for gesture in 0..config.classes {
            for repetition in 1..=config.repetitions {
                samples.push(Sample {
                    person,
                    gesture,
                    repetition,
                    depth_path: out_dir
                        .join("depth")
                        .join(format!("p{person:02}_g{gesture:02}_r{repetition:02}.pgm")),
                    rotation_deg: 0,
                });
            }
        }
    }
    samples.par_iter().try_for_each(|s| -> Result<()> {
        let (depth, _) = render(config, seed, s.person, s.gesture, s.repetition);
        std::fs::write(&s.depth_path, encode_depth(&depth))?;
        Ok(())
    })?;
    write_manifest(out_dir.join("dataset.csv"), &samples)?;
    Ok(samples)
}

/// Path of the manifest written by [`synth_generate`].
pub fn manifest_path(out_dir: impl AsRef<Path>) -> PathBuf {
    out_dir.as_ref().join("dataset.csv")
}
