//! Synthetic test scene: piecewise-constant spatial blocks, each with its
//! own linear spectral ramp.

use crate::cube::HsiCube;
use crate::error::Result;

/// Default demo size.
pub const DEMO_DIMS: (usize, usize, usize) = (64, 64, 4);

const BLOCKS: usize = 4;

/// `(base, slope)` per material; ramps stay inside `[0.1, 0.9]`.
const MATERIALS: [(f64, f64); 6] = [
    (0.20, 0.15),
    (0.75, -0.25),
    (0.45, 0.30),
    (0.60, 0.10),
    (0.30, -0.20),
    (0.85, -0.05),
];

/// A `BLOCKS x BLOCKS` mosaic of materials over `height x width`.
pub fn block_phantom(height: usize, width: usize, bands: usize) -> Result<HsiCube> {
    HsiCube::from_fn(height, width, bands, |r, c, b| {
        let br = r * BLOCKS / height;
        let bc = c * BLOCKS / width;
        let (base, slope) = MATERIALS[(br * 5 + bc * 3 + br * bc) % MATERIALS.len()];
        let t = if bands > 1 {
            b as f64 / (bands - 1) as f64 - 0.5
        } else {
            0.0
        };
        (base + slope * t) as f32
    })
}

pub fn demo_phantom() -> Result<HsiCube> {
    let (h, w, p) = DEMO_DIMS;
    block_phantom(h, w, p)
}
