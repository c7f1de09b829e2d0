use crate::field::{Field2, Mask};

/// Coastal band: cells within Chebyshev distance `k` of any set cell.
///
/// The square structuring element is separable, so this runs as a row pass
/// followed by a column pass with running counts.
pub fn dilate_mask(mask: &Mask, k: usize) -> Mask {
    if k == 0 {
        return mask.clone();
    }
    let (h, w) = (mask.height, mask.width);
    let rows = sliding_any(&mask.data, h, w, k, true);
    let data = sliding_any(&rows, h, w, k, false);
    Field2::from_vec(h, w, data)
}

fn sliding_any(src: &[bool], h: usize, w: usize, k: usize, along_rows: bool) -> Vec<bool> {
    let (lines, len) = if along_rows { (h, w) } else { (w, h) };
    let at = |line: usize, i: usize| if along_rows { line * w + i } else { i * w + line };
    let mut out = vec![false; src.len()];
    for line in 0..lines {
        // Count of set cells in [i - k, i + k].
        let mut count = 0usize;
        for i in 0..k.min(len) {
            count += src[at(line, i)] as usize;
        }
        for i in 0..len {
            if i + k < len {
                count += src[at(line, i + k)] as usize;
            }
            if i > k {
                count -= src[at(line, i - k - 1)] as usize;
            }
            out[at(line, i)] = count > 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_at_zero() {
        let mut m = Field2::filled(5, 5, false);
        m.set(2, 3, true);
        assert_eq!(dilate_mask(&m, 0), m);
    }

    #[test]
    fn single_pixel_block() {
        let mut m = Field2::filled(12, 12, false);
        m.set(5, 5, true);
        let d = dilate_mask(&m, 3);
        for r in 0..12 {
            for c in 0..12 {
                let inside = (2..=8).contains(&r) && (2..=8).contains(&c);
                assert_eq!(*d.get(r, c), inside, "({r}, {c})");
            }
        }
        let mut corner = Field2::filled(12, 12, false);
        corner.set(0, 11, true);
        assert_eq!(dilate_mask(&corner, 3).count(), 16);
    }

    #[test]
    fn all_land_stays_all_land() {
        let m = Field2::filled(7, 9, true);
        for k in 0..5 {
            assert_eq!(dilate_mask(&m, k).count(), 63);
        }
    }

    #[test]
    fn large_k_covers_everything() {
        let mut m = Field2::filled(4, 6, false);
        m.set(3, 0, true);
        assert_eq!(dilate_mask(&m, 10).count(), 24);
    }
}
