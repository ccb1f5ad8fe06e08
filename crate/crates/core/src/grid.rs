//! Row-major multi-index helpers. Axis 0 is the most significant.

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

pub(crate) fn flat_index(strides: &[usize], index: &[usize]) -> usize {
    strides.iter().zip(index).map(|(s, i)| s * i).sum()
}

pub(crate) fn unravel(shape: &[usize], mut flat: usize, out: &mut [usize]) {
    for i in (0..shape.len()).rev() {
        out[i] = flat % shape[i];
        flat /= shape[i];
    }
}

/// Advances `index` to the next multi-index in row-major order.
/// Returns `false` once the iteration wraps around.
pub(crate) fn advance(shape: &[usize], index: &mut [usize]) -> bool {
    for i in (0..shape.len()).rev() {
        index[i] += 1;
        if index[i] < shape[i] {
            return true;
        }
        index[i] = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_round_trip() {
        let shape = [2, 3, 4];
        let st = strides(&shape);
        assert_eq!(st, vec![12, 4, 1]);
        let mut idx = vec![0; 3];
        let mut out = vec![0; 3];
        let mut flat = 0;
        loop {
            assert_eq!(flat_index(&st, &idx), flat);
            unravel(&shape, flat, &mut out);
            assert_eq!(out, idx);
            flat += 1;
            if !advance(&shape, &mut idx) {
                break;
            }
        }
        assert_eq!(flat, 24);
    }
}
