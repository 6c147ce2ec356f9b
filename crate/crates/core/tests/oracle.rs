use conv_memsim::oracle::naive_convolve;
use conv_memsim::{FilterBank, Image, OutputMap};
use proptest::prelude::*;

/// Lowers the image to columns and multiplies by the flattened filters.
fn im2col_convolve(image: &Image, filters: &FilterBank) -> Vec<f64> {
    let (c, n, k, f) = (image.channels(), image.height(), filters.size(), filters.count());
    let o = n - k + 1;
    let rows = c * k * k;
    let mut cols = vec![0f64; rows * o * o];
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let r = (ci * k + ky) * k + kx;
                for y in 0..o {
                    for x in 0..o {
                        cols[r * o * o + y * o + x] = image.get(ci, y + ky, x + kx) as f64;
                    }
                }
            }
        }
    }
    let mut out = vec![0f64; f * o * o];
    for fi in 0..f {
        for r in 0..rows {
            let w = filters.data()[fi * rows + r] as f64;
            for p in 0..o * o {
                out[fi * o * o + p] += w * cols[r * o * o + p];
            }
        }
    }
    out
}

fn close(a: &OutputMap, b: &[f64]) -> bool {
    a.data()
        .iter()
        .zip(b)
        .all(|(&x, &y)| (x as f64 - y).abs() <= 1e-5 * (x.abs() as f64).max(y.abs()).max(1.0))
}

#[test]
fn box_sum_5x5() {
    let img = Image::filled(1, 5, 5, 1.0).unwrap();
    let flt = FilterBank::filled(1, 1, 3, 1.0).unwrap();
    let out = naive_convolve(&img, &flt).unwrap();
    assert_eq!((out.height(), out.width()), (3, 3));
    assert!(out.data().iter().all(|&v| v == 9.0));
}

#[test]
fn channel_mismatch() {
    let img = Image::generate(2, 8, 1).unwrap();
    let flt = FilterBank::generate(1, 3, 3, 2).unwrap();
    assert!(naive_convolve(&img, &flt).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn agrees_with_im2col(c in 1usize..4, k in prop::sample::select(vec![1usize, 3, 5]), extra in 0usize..8, f in 1usize..4, seed in 0u64..1000) {
        let img = Image::generate(c, k + extra, seed).unwrap();
        let flt = FilterBank::generate(f, c, k, seed + 1).unwrap();
        let out = naive_convolve(&img, &flt).unwrap();
        prop_assert!(close(&out, &im2col_convolve(&img, &flt)));
    }

    #[test]
    fn linear_in_image(c in 1usize..3, extra in 0usize..6, a in -4.0f32..4.0, seed in 0u64..1000) {
        let img = Image::generate(c, 3 + extra, seed).unwrap();
        let flt = FilterBank::generate(2, c, 3, seed + 7).unwrap();
        let lhs = naive_convolve(&img.scaled(a), &flt).unwrap();
        let rhs = naive_convolve(&img, &flt).unwrap();
        let expect: Vec<f64> = rhs.data().iter().map(|&v| a as f64 * v as f64).collect();
        prop_assert!(close(&lhs, &expect));
    }

    #[test]
    fn filters_independent(c in 1usize..3, f in 2usize..5, seed in 0u64..1000) {
        let img = Image::generate(c, 9, seed).unwrap();
        let all = FilterBank::generate(f, c, 3, seed + 3).unwrap();
        let out = naive_convolve(&img, &all).unwrap();
        let per = c * 9;
        for fi in 0..f {
            let one = FilterBank::new(1, c, 3, all.data()[fi * per..(fi + 1) * per].to_vec()).unwrap();
            let single = naive_convolve(&img, &one).unwrap();
            let plane = out.height() * out.width();
            prop_assert_eq!(single.data(), &out.data()[fi * plane..(fi + 1) * plane]);
        }
    }
}

#[test]
fn interior_pixel_reuse_is_kkf() {
    for (k, f) in [(3usize, 2usize), (5, 4), (1, 3)] {
        let n = 3 * k + 2;
        let o = n - k + 1;
        let mut uses = vec![0u64; n * n];
        for _ in 0..f {
            for y in 0..o {
                for x in 0..o {
                    for ky in 0..k {
                        for kx in 0..k {
                            uses[(y + ky) * n + x + kx] += 1;
                        }
                    }
                }
            }
        }
        let mid = n / 2;
        assert_eq!(uses[mid * n + mid], (k * k * f) as u64);
        assert_eq!(*uses.iter().max().unwrap(), (k * k * f) as u64);
    }
}
