use dwmgipt_core::{prime_factorize, Image, PatchModel, Tensor};
use proptest::prelude::*;

fn shape_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=5, 2..=8)
}

fn tensor_strategy() -> impl Strategy<Value = Tensor> {
    shape_strategy().prop_flat_map(|shape| {
        let len = shape.iter().product::<usize>();
        prop::collection::vec(-1e6f64..1e6, len)
            .prop_map(move |data| Tensor::new(shape.clone(), data).unwrap())
    })
}

/// Colexicographic multi-index of a linear offset.
fn multi_index(mut offset: usize, shape: &[usize]) -> Vec<usize> {
    shape
        .iter()
        .map(|&n| {
            let i = offset % n;
            offset /= n;
            i
        })
        .collect()
}

fn colex(index: &[usize], shape: &[usize]) -> usize {
    index
        .iter()
        .zip(shape)
        .rev()
        .fold(0, |acc, (&i, &n)| acc * n + i)
}

proptest! {
    #[test]
    fn fold_inverts_unfold(t in tensor_strategy()) {
        for mode in 1..t.order() {
            let m = t.unfold(mode).unwrap();
            let back = Tensor::fold(m, t.shape(), mode).unwrap();
            prop_assert_eq!(&back, &t);
        }
    }

    #[test]
    fn unfolding_places_entries_by_split_index(t in tensor_strategy()) {
        let shape = t.shape().to_vec();
        for mode in 1..t.order() {
            let m = t.unfold(mode).unwrap();
            for offset in 0..t.len() {
                let idx = multi_index(offset, &shape);
                let row = colex(&idx[..mode], &shape[..mode]);
                let col = colex(&idx[mode..], &shape[mode..]);
                prop_assert_eq!(m.get(row, col), t.get(&idx));
            }
            prop_assert!((m.frobenius_norm() - t.frobenius_norm()).abs() <= 1e-9 * t.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn prime_factors_multiply_back(k in 2usize..2_000_000) {
        let f = prime_factorize(k).unwrap();
        prop_assert_eq!(f.iter().product::<usize>(), k);
        prop_assert!(f.windows(2).all(|w| w[0] <= w[1]));
        for &p in &f {
            prop_assert!(p >= 2 && (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0));
        }
    }

    #[test]
    fn patch_tensor_entries_and_roundtrip(
        h in 4usize..40,
        w in 4usize..40,
        ph in 1usize..12,
        pw in 1usize..12,
        step in 1usize..15,
        seed in 0u64..1000,
    ) {
        prop_assume!(ph <= h && pw <= w);
        let img = Image::from_fn(h, w, |y, x| ((y * 131 + x * 71 + seed as usize) % 97) as f64).unwrap();
        let pm = match PatchModel::plan(h, w, ph, pw, step) {
            Ok(pm) => pm,
            Err(_) => {
                // Only strides that would skip pixels are refused.
                prop_assert!(step > ph || step > pw);
                return Ok(());
            }
        };
        let t = pm.image_to_tensor(&img).unwrap();
        let shape = pm.tensor_shape().to_vec();
        prop_assert_eq!(shape.iter().product::<usize>(), ph * pw * pm.patch_count());
        let (mf, nf) = (pm.m_factors().len(), pm.n_factors().len());
        for (b, &y0) in pm.row_positions().iter().enumerate() {
            for (a, &x0) in pm.col_positions().iter().enumerate() {
                for v in 0..pw {
                    for u in 0..ph {
                        let mut idx = multi_index(u, &shape[..mf]);
                        idx.extend(multi_index(v, &shape[mf..mf + nf]));
                        idx.push(a);
                        idx.push(b);
                        prop_assert_eq!(t.get(&idx), img.get(y0 + u, x0 + v));
                    }
                }
            }
        }
        // Every pixel is covered, so identical overlaps reconstruct exactly.
        prop_assert_eq!(pm.tensor_to_image(&t).unwrap(), img);
        prop_assert_eq!(*pm.row_positions().last().unwrap(), h - ph);
        prop_assert_eq!(*pm.col_positions().last().unwrap(), w - pw);
    }
}

#[test]
fn fold_rejects_wrong_dimensions() {
    let t = Tensor::zeros(&[2, 3, 4]).unwrap();
    let m = t.unfold(1).unwrap();
    assert!(Tensor::fold(m.clone(), &[2, 3, 4], 2).is_err());
    assert!(Tensor::fold(m, &[3, 2, 4], 1).is_err());
    assert!(t.unfold(0).is_err());
    assert!(t.unfold(3).is_err());
}

#[test]
fn reconstruction_takes_median_over_windows() {
    // Three windows cover the middle column of a 1×5 image; give each window
    // a different constant and check the per-pixel median.
    let pm = PatchModel::plan(1, 5, 1, 3, 1).unwrap();
    assert_eq!(pm.col_positions(), &[0, 1, 2]);
    let shape = pm.tensor_shape().to_vec();
    let t = Tensor::from_fn(&shape, |i| [10.0, 20.0, 90.0][i / 3]).unwrap();
    let img = pm.tensor_to_image(&t).unwrap();
    assert_eq!(img.pixels(), &[10.0, 15.0, 20.0, 55.0, 90.0]);
}
