use era_core::tensor::{finite_diff_gradcheck, Graph, Tensor, Var};
use era_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random(shape: &[usize], rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
}

pub fn weights(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Projects any tensor to a scalar with fixed random weights so every
/// output coordinate contributes a distinct gradient.
pub fn project(g: &mut Graph<f64>, v: Var, w: &[f64]) -> Result<Var> {
    let n = g.value(v).len();
    let flat = g.reshape(v, &[n])?;
    g.weighted_sum(flat, w)
}

fn onehot(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let mut t = Tensor::zeros(&[n, k]);
    for r in 0..n {
        let c = rng.gen_range(0..k);
        t.data_mut()[r * k + c] = 1.0;
    }
    t
}

fn distributions(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let mut t = random(&[n, k], rng, 0.05, 1.0);
    for row in t.data_mut().chunks_mut(k) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    t
}

pub const EPS: f64 = 1e-4;
pub const TOL: f64 = 1e-6;

/// Worst relative error of every differentiable op at one random point.
pub fn op_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let x = random(&[2, 2, 4, 6], &mut rng, -1.0, 1.0);
    let k = random(&[3, 2, 2, 3], &mut rng, -1.0, 1.0);
    let b = random(&[3], &mut rng, -1.0, 1.0);
    let w = weights(2 * 3 * 3 * 4, &mut rng);
    let conv = |g: &mut Graph<f64>, x: Var, k: Var, b: Var| -> Result<Var> {
        let y = g.conv2d(x, k, b)?;
        project(g, y, &w)
    };
    let e_in = finite_diff_gradcheck(
        |g, v| {
            let (k, b) = (g.input(k.clone()), g.input(b.clone()));
            conv(g, v, k, b)
        },
        &x,
        EPS,
    )
    .unwrap();
    let e_k = finite_diff_gradcheck(
        |g, v| {
            let (x, b) = (g.input(x.clone()), g.input(b.clone()));
            conv(g, x, v, b)
        },
        &k,
        EPS,
    )
    .unwrap();
    let e_b = finite_diff_gradcheck(
        |g, v| {
            let (x, k) = (g.input(x.clone()), g.input(k.clone()));
            conv(g, x, k, v)
        },
        &b,
        EPS,
    )
    .unwrap();
    out.push(("conv2d", e_in.max(e_k).max(e_b)));

    let x = random(&[2, 3, 2, 10], &mut rng, -1.0, 1.0);
    let w = weights(2 * 3 * 2 * 3, &mut rng);
    out.push((
        "avg_pool2d",
        finite_diff_gradcheck(
            |g, v| {
                let y = g.avg_pool2d(v, (1, 3), (1, 3))?;
                project(g, y, &w)
            },
            &x,
            EPS,
        )
        .unwrap(),
    ));

    // Keep points away from the kink at zero.
    let x = Tensor::from_fn(&[12], |_| {
        let v: f64 = rng.gen_range(0.05..1.5);
        if rng.gen::<bool>() {
            v
        } else {
            -v
        }
    });
    let w = weights(12, &mut rng);
    out.push((
        "elu",
        finite_diff_gradcheck(
            |g, v| {
                let y = g.elu(v, 1.0)?;
                g.weighted_sum(y, &w)
            },
            &x,
            EPS,
        )
        .unwrap(),
    ));

    let x = random(&[3, 4], &mut rng, -2.0, 2.0);
    let w = weights(12, &mut rng);
    out.push((
        "softmax",
        finite_diff_gradcheck(
            |g, v| {
                let y = g.softmax(v)?;
                project(g, y, &w)
            },
            &x,
            EPS,
        )
        .unwrap(),
    ));

    let logits = random(&[4, 3], &mut rng, -2.0, 2.0);
    let y = onehot(4, 3, &mut rng);
    let w = weights(4, &mut rng);
    out.push((
        "cross_entropy",
        finite_diff_gradcheck(
            |g, v| {
                let p = g.softmax(v)?;
                let l = g.cross_entropy(p, &y)?;
                g.weighted_sum(l, &w)
            },
            &logits,
            EPS,
        )
        .unwrap(),
    ));

    let y = distributions(4, 3, &mut rng);
    out.push((
        "soft_cross_entropy",
        finite_diff_gradcheck(
            |g, v| {
                let p = g.softmax(v)?;
                let l = g.soft_cross_entropy(p, &y)?;
                g.weighted_sum(l, &w)
            },
            &logits,
            EPS,
        )
        .unwrap(),
    ));

    let x = random(&[2, 3, 4], &mut rng, -1.0, 1.0);
    let w = weights(24, &mut rng);
    out.push((
        "reshape",
        finite_diff_gradcheck(
            |g, v| {
                let y = g.reshape(v, &[4, 6])?;
                let y = g.mul(y, y)?;
                project(g, y, &w)
            },
            &x,
            EPS,
        )
        .unwrap(),
    ));

    let x = random(&[5, 3], &mut rng, -1.0, 1.0);
    let w = weights(4 * 3, &mut rng);
    out.push((
        "gather_rows",
        finite_diff_gradcheck(
            |g, v| {
                let y = g.gather_rows(v, &[3, 0, 3, 1])?;
                let y = g.mul(y, y)?;
                project(g, y, &w)
            },
            &x,
            EPS,
        )
        .unwrap(),
    ));

    let w = weights(5, &mut rng);
    out.push((
        "column",
        finite_diff_gradcheck(
            |g, v| {
                let y = g.column(v, 2)?;
                let y = g.mul(y, y)?;
                g.weighted_sum(y, &w)
            },
            &x,
            EPS,
        )
        .unwrap(),
    ));

    let a = random(&[6], &mut rng, -1.0, 1.0);
    let c = random(&[6], &mut rng, -1.0, 1.0);
    let w = weights(6, &mut rng);
    out.push((
        "add",
        finite_diff_gradcheck(
            |g, v| {
                let c = g.input(c.clone());
                let y = g.add(v, c)?;
                let y = g.mul(y, y)?;
                g.weighted_sum(y, &w)
            },
            &a,
            EPS,
        )
        .unwrap(),
    ));
    out.push((
        "mul",
        finite_diff_gradcheck(
            |g, v| {
                let c = g.input(c.clone());
                let y = g.mul(v, c)?;
                let y = g.mul(y, v)?;
                g.weighted_sum(y, &w)
            },
            &a,
            EPS,
        )
        .unwrap(),
    ));
    out.push((
        "scale",
        finite_diff_gradcheck(
            |g, v| {
                let y = g.scale(v, -1.7)?;
                let y = g.mul(y, v)?;
                g.weighted_sum(y, &w)
            },
            &a,
            EPS,
        )
        .unwrap(),
    ));
    out.push((
        "sum",
        finite_diff_gradcheck(
            |g, v| {
                let y = g.mul(v, v)?;
                g.sum(y)
            },
            &a,
            EPS,
        )
        .unwrap(),
    ));
    out.push((
        "mean",
        finite_diff_gradcheck(
            |g, v| {
                let y = g.mul(v, v)?;
                g.mean(y)
            },
            &a,
            EPS,
        )
        .unwrap(),
    ));
    out.push((
        "weighted_sum",
        finite_diff_gradcheck(
            |g, v| {
                let y = g.mul(v, v)?;
                g.weighted_sum(y, &w)
            },
            &a,
            EPS,
        )
        .unwrap(),
    ));
    out
}
