//! Run-length codec for binary masks. A mask is stored as run lengths over
//! its row-major pixel order; runs alternate between 0-pixels and 1-pixels
//! and the first run counts leading zeros (possibly zero of them). The run
//! lengths of a valid encoding sum to exactly `width * height`.

use clipvis_core::MaskGrid;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RleError {
    #[error("no runs")]
    Empty,
    #[error("run {index} is zero; only the leading run may be empty")]
    ZeroRun { index: usize },
    #[error("run lengths sum to {got}, expected {expected}")]
    ChecksumMismatch { got: u64, expected: u64 },
}

/// Encodes a mask (binarized at 0.5) into canonical run lengths: the first
/// run counts leading zeros, every later run is nonzero.
pub fn encode(mask: &MaskGrid) -> Vec<u64> {
    let mut runs = vec![0u64];
    let mut current = false; // runs[0] counts zeros
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let bit = mask.is_foreground(x, y);
            if bit == current {
                *runs.last_mut().expect("runs is never empty") += 1;
            } else {
                runs.push(1);
                current = bit;
            }
        }
    }
    runs
}

/// Decodes run lengths into a `width x height` binary mask, enforcing the
/// canonical-form and pixel-count invariants.
pub fn decode(width: usize, height: usize, runs: &[u64]) -> Result<MaskGrid, RleError> {
    if runs.is_empty() {
        return Err(RleError::Empty);
    }
    if let Some(index) = runs.iter().skip(1).position(|&r| r == 0) {
        return Err(RleError::ZeroRun { index: index + 1 });
    }
    let expected = (width * height) as u64;
    let got = runs.iter().sum::<u64>();
    if got != expected {
        return Err(RleError::ChecksumMismatch { got, expected });
    }
    let mut values = Vec::with_capacity(width * height);
    for (index, &run) in runs.iter().enumerate() {
        let bit = if index.is_multiple_of(2) { 0.0 } else { 1.0 };
        values.extend(std::iter::repeat_n(bit, run as usize));
    }
    Ok(MaskGrid::new(width, height, values).expect("run sum matches the pixel count"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(width: usize, height: usize, values: &[f64]) -> MaskGrid {
        MaskGrid::new(width, height, values.to_vec()).unwrap()
    }

    #[test]
    fn encodes_leading_zero_count_first() {
        // Row-major 3x2: 0 1 1 / 1 0 0 -> runs 1,3,2.
        let mask = grid(3, 2, &[0.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(encode(&mask), vec![1, 3, 2]);
    }

    #[test]
    fn all_ones_starts_with_an_empty_zero_run() {
        let mask = grid(2, 2, &[1.0; 4]);
        assert_eq!(encode(&mask), vec![0, 4]);
    }

    #[test]
    fn all_zeros_is_a_single_run() {
        let mask = grid(4, 1, &[0.0; 4]);
        assert_eq!(encode(&mask), vec![4]);
    }

    #[test]
    fn encode_binarizes_soft_values() {
        let mask = grid(2, 1, &[0.49, 0.5]);
        assert_eq!(encode(&mask), vec![1, 1]);
    }

    #[test]
    fn decode_inverts_encode() {
        let mask = grid(3, 3, &[0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        let decoded = decode(3, 3, &encode(&mask)).unwrap();
        assert_eq!(decoded.values(), mask.values());
    }

    #[test]
    fn checksum_mismatch_is_rejected() {
        assert_eq!(
            decode(3, 2, &[1, 3]),
            Err(RleError::ChecksumMismatch {
                got: 4,
                expected: 6
            })
        );
    }

    #[test]
    fn interior_zero_runs_are_rejected() {
        assert_eq!(
            decode(2, 2, &[1, 0, 3]),
            Err(RleError::ZeroRun { index: 1 })
        );
        // A leading zero run is the canonical way to start with ones.
        assert!(decode(2, 2, &[0, 4]).is_ok());
    }

    #[test]
    fn empty_run_list_is_rejected() {
        assert_eq!(decode(1, 1, &[]), Err(RleError::Empty));
    }
}
