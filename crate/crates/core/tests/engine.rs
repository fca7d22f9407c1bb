use era_core::tensor::{Graph, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod ops;

use ops::{op_errors, random, weights, TOL};

#[test]
fn every_op_passes_gradcheck_at_100_points() {
    let mut worst: Vec<(&str, f64)> = Vec::new();
    for seed in 0..100 {
        for (i, (name, err)) in op_errors(seed).into_iter().enumerate() {
            if worst.len() <= i {
                worst.push((name, 0.0));
            }
            worst[i].1 = worst[i].1.max(err);
        }
    }
    for (name, err) in &worst {
        assert!(*err < TOL, "{name}: {err:e}");
    }
    assert_eq!(worst.len(), 15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conv_output_shape_follows_valid_arithmetic(
        n in 1usize..3, c in 1usize..4, h in 1usize..6, w in 1usize..12,
        f in 1usize..4, kh in 1usize..6, kw in 1usize..12,
    ) {
        prop_assume!(kh <= h && kw <= w);
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::zeros(&[n, c, h, w]));
        let k = g.input(Tensor::zeros(&[f, c, kh, kw]));
        let b = g.input(Tensor::zeros(&[f]));
        let y = g.conv2d(x, k, b).unwrap();
        prop_assert_eq!(g.value(y).shape(), &[n, f, h - kh + 1, w - kw + 1][..]);
    }

    #[test]
    fn oversized_kernel_is_a_shape_error(w in 1usize..8, extra in 1usize..4) {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::zeros(&[1, 1, 1, w]));
        let k = g.input(Tensor::zeros(&[1, 1, 1, w + extra]));
        let b = g.input(Tensor::zeros(&[1]));
        prop_assert!(g.conv2d(x, k, b).is_err());
    }

    #[test]
    fn pool_output_width_is_floor(w in 1usize..40, p in 1usize..5, s in 1usize..5) {
        prop_assume!(p <= w);
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::zeros(&[1, 2, 1, w]));
        let y = g.avg_pool2d(x, (1, p), (1, s)).unwrap();
        prop_assert_eq!(g.value(y).shape(), &[1, 2, 1, (w - p) / s + 1][..]);
    }

    #[test]
    fn softmax_rows_are_distributions(
        rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 4), 1..6)
    ) {
        let n = rows.len();
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::new(&[n, 4], rows.concat()).unwrap());
        let p = g.softmax(x).unwrap();
        for row in g.value(p).data().chunks(4) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn backward_is_linear_in_the_loss(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&[2, 1, 2, 5], &mut rng, -1.0, 1.0);
        let k = random(&[2, 1, 2, 2], &mut rng, -1.0, 1.0);
        let bias = random(&[2], &mut rng, -1.0, 1.0);
        let w1 = weights(16, &mut rng);
        let w2 = weights(16, &mut rng);
        let grad = |ca: f64, cb: f64| {
            let mut g = Graph::<f64>::new();
            let xv = g.input(x.clone());
            let kv = g.param(k.clone());
            let bv = g.param(bias.clone());
            let y = g.conv2d(xv, kv, bv).unwrap();
            let y = g.elu(y, 1.0).unwrap();
            let y = g.reshape(y, &[16]).unwrap();
            let l1 = g.weighted_sum(y, &w1).unwrap();
            let l2 = g.weighted_sum(y, &w2).unwrap();
            let l1 = g.scale(l1, ca).unwrap();
            let l2 = g.scale(l2, cb).unwrap();
            let l = g.add(l1, l2).unwrap();
            g.backward(l).unwrap().wrt(kv).into_data()
        };
        let (g1, g2, gab) = (grad(1.0, 0.0), grad(0.0, 1.0), grad(a, b));
        for i in 0..gab.len() {
            prop_assert!((gab[i] - (a * g1[i] + b * g2[i])).abs() < 1e-12);
        }
    }
}
