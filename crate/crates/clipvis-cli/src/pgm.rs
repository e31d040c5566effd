//! Portable-graymap rendering of video instances. Each frame becomes one
//! image: background pixels are black and every instance id maps to a fixed
//! gray level from [`PALETTE`] (`PALETTE[(id - 1) % len]`), so renders are
//! deterministic and ids keep their level across frames and runs. Instances
//! are drawn in ascending id order; where masks overlap, the higher id wins.

use clipvis_core::{VideoInstance, VideoSpec};

/// Gray levels assigned to instance ids 1, 2, 3, ... Chosen pairwise
/// distinct and spread across the 8-bit range so adjacent ids contrast.
pub const PALETTE: [u8; 8] = [255, 96, 176, 64, 224, 128, 208, 48];

/// Gray level for an instance id (ids are 1-based; levels repeat past the
/// palette).
pub fn level_for_id(id: usize) -> u8 {
    PALETTE[(id - 1) % PALETTE.len()]
}

/// Rasterizes one frame of a video's instances into row-major gray levels.
pub fn compose_frame(spec: &VideoSpec, instances: &[VideoInstance], frame: usize) -> Vec<u8> {
    let mut pixels = vec![0u8; spec.width * spec.height];
    let mut ordered: Vec<&VideoInstance> = instances.iter().collect();
    ordered.sort_by_key(|i| i.id);
    for instance in ordered {
        let level = level_for_id(instance.id);
        let mask = instance.masks.frame(frame - 1);
        for y in 0..spec.height {
            for x in 0..spec.width {
                if mask.is_foreground(x, y) {
                    pixels[y * spec.width + x] = level;
                }
            }
        }
    }
    pixels
}

/// Encodes pixels as a binary `P5` graymap.
pub fn encode_p5(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Encodes pixels as an ASCII `P2` graymap, one image row per text line.
pub fn encode_p2(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height);
    let mut out = format!("P2\n{width} {height}\n255\n");
    for row in pixels.chunks(width) {
        let mut first = true;
        for &p in row {
            if !first {
                out.push(' ');
            }
            out.push_str(&p.to_string());
            first = false;
        }
        out.push('\n');
    }
    out.into_bytes()
}
