//! Brute-force reference convolution.

use crate::error::{Error, Result};
use crate::tensor::{FilterBank, Image, OutputMap};

/// Checks that `image` and `filters` can be convolved and returns the
/// output height and width.
pub fn output_dims(image: &Image, filters: &FilterBank) -> Result<(usize, usize)> {
    if image.channels() != filters.channels() {
        return Err(Error::Config(format!(
            "image has {} channels but filters have {}",
            image.channels(),
            filters.channels()
        )));
    }
    let k = filters.size();
    if image.height() < k || image.width() < k {
        return Err(Error::Config(format!(
            "image {}x{} is smaller than the {k}x{k} filter",
            image.height(),
            image.width()
        )));
    }
    Ok((image.height() - k + 1, image.width() - k + 1))
}

/// Valid-mode cross-correlation, stride 1.
///
/// `out[f][y][x] = sum_c sum_ky sum_kx image[c][y+ky][x+kx] * filters[f][c][ky][kx]`,
/// accumulated with `c` outermost and `kx` innermost. The kernel emulations
/// use the same order, so they agree with this function bit for bit.
pub fn naive_convolve(image: &Image, filters: &FilterBank) -> Result<OutputMap> {
    let (oy, ox) = output_dims(image, filters)?;
    let k = filters.size();
    let mut out = OutputMap::zeros(filters.count(), oy, ox)?;
    for f in 0..filters.count() {
        for y in 0..oy {
            for x in 0..ox {
                let mut acc = 0.0f32;
                for c in 0..image.channels() {
                    for ky in 0..k {
                        for kx in 0..k {
                            acc += image.get(c, y + ky, x + kx) * filters.get(f, c, ky, kx);
                        }
                    }
                }
                out.set(f, y, x, acc);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_scales() {
        let img = Image::filled(1, 4, 4, 3.0).unwrap();
        let flt = FilterBank::filled(1, 1, 1, 2.0).unwrap();
        let out = naive_convolve(&img, &flt).unwrap();
        assert_eq!((out.height(), out.width()), (4, 4));
        assert!(out.data().iter().all(|&v| v == 6.0));
    }

    #[test]
    fn box_sum() {
        let img = Image::filled(1, 5, 5, 1.0).unwrap();
        let flt = FilterBank::filled(1, 1, 3, 1.0).unwrap();
        let out = naive_convolve(&img, &flt).unwrap();
        assert_eq!((out.height(), out.width()), (3, 3));
        assert!(out.data().iter().all(|&v| v == 9.0));
    }

    #[test]
    fn cross_correlation_not_flipped() {
        // only the top-left filter tap is non-zero, so out[y][x] == image[y][x]
        let img = Image::new(1, 3, 3, (0..9).map(|v| v as f32).collect()).unwrap();
        let mut data = vec![0.0; 4];
        data[0] = 1.0;
        let flt = FilterBank::new(1, 1, 2, data).unwrap();
        let out = naive_convolve(&img, &flt).unwrap();
        assert_eq!(out.data(), &[0.0, 1.0, 3.0, 4.0]);
    }

    #[test]
    fn channel_mismatch() {
        let img = Image::filled(2, 5, 5, 1.0).unwrap();
        let flt = FilterBank::filled(1, 1, 3, 1.0).unwrap();
        assert!(matches!(naive_convolve(&img, &flt), Err(Error::Config(_))));
    }

    #[test]
    fn image_smaller_than_filter() {
        let img = Image::filled(1, 2, 2, 1.0).unwrap();
        let flt = FilterBank::filled(1, 1, 3, 1.0).unwrap();
        assert!(matches!(naive_convolve(&img, &flt), Err(Error::Config(_))));
    }
}
