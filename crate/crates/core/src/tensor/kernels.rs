//! Raw slice kernels behind the graph operations. Shapes are validated by
//! the callers in `graph.rs`; everything here assumes consistent extents.

use super::Real;

#[inline]
pub(crate) fn axpy<T: Real>(alpha: T, src: &[T], dst: &mut [T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

/// Dot product with eight fixed accumulator lanes; the summation order does
/// not depend on how the compiler vectorizes the loop.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (&x, &y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvDims {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub f: usize,
    pub kh: usize,
    pub kw: usize,
}

impl ConvDims {
    pub fn ho(&self) -> usize {
        self.h - self.kh + 1
    }
    pub fn wo(&self) -> usize {
        self.w - self.kw + 1
    }
}

pub(crate) fn conv2d_forward<T: Real>(x: &[T], k: &[T], bias: &[T], d: ConvDims) -> Vec<T> {
    let (ho, wo) = (d.ho(), d.wo());
    let plane_len = ho * wo;
    let mut out = vec![T::zero(); d.n * d.f * plane_len];
    for ni in 0..d.n {
        for fi in 0..d.f {
            let plane = &mut out[(ni * d.f + fi) * plane_len..][..plane_len];
            plane.fill(bias[fi]);
            for c in 0..d.cin {
                let xin = &x[(ni * d.cin + c) * d.h * d.w..][..d.h * d.w];
                let kern = &k[(fi * d.cin + c) * d.kh * d.kw..][..d.kh * d.kw];
                for a in 0..d.kh {
                    for b in 0..d.kw {
                        let wv = kern[a * d.kw + b];
                        for i in 0..ho {
                            let src = &xin[(i + a) * d.w + b..][..wo];
                            axpy(wv, src, &mut plane[i * wo..][..wo]);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradient of the convolution input.
pub(crate) fn conv2d_backward_input<T: Real>(g: &[T], k: &[T], d: ConvDims) -> Vec<T> {
    let (ho, wo) = (d.ho(), d.wo());
    let plane_len = ho * wo;
    let mut dx = vec![T::zero(); d.n * d.cin * d.h * d.w];
    for ni in 0..d.n {
        for c in 0..d.cin {
            let dxin = &mut dx[(ni * d.cin + c) * d.h * d.w..][..d.h * d.w];
            for fi in 0..d.f {
                let plane = &g[(ni * d.f + fi) * plane_len..][..plane_len];
                let kern = &k[(fi * d.cin + c) * d.kh * d.kw..][..d.kh * d.kw];
                for a in 0..d.kh {
                    for b in 0..d.kw {
                        let wv = kern[a * d.kw + b];
                        for i in 0..ho {
                            axpy(
                                wv,
                                &plane[i * wo..][..wo],
                                &mut dxin[(i + a) * d.w + b..][..wo],
                            );
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Gradients of the kernel and the bias.
pub(crate) fn conv2d_backward_params<T: Real>(g: &[T], x: &[T], d: ConvDims) -> (Vec<T>, Vec<T>) {
    let (ho, wo) = (d.ho(), d.wo());
    let plane_len = ho * wo;
    let mut dk = vec![T::zero(); d.f * d.cin * d.kh * d.kw];
    let mut db = vec![T::zero(); d.f];
    for ni in 0..d.n {
        for fi in 0..d.f {
            let plane = &g[(ni * d.f + fi) * plane_len..][..plane_len];
            db[fi] += plane.iter().copied().sum::<T>();
            for c in 0..d.cin {
                let xin = &x[(ni * d.cin + c) * d.h * d.w..][..d.h * d.w];
                let kern = &mut dk[(fi * d.cin + c) * d.kh * d.kw..][..d.kh * d.kw];
                for a in 0..d.kh {
                    for b in 0..d.kw {
                        let mut s = T::zero();
                        for i in 0..ho {
                            s += dot(&plane[i * wo..][..wo], &xin[(i + a) * d.w + b..][..wo]);
                        }
                        kern[a * d.kw + b] += s;
                    }
                }
            }
        }
    }
    (dk, db)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct PoolDims {
    pub planes: usize,
    pub h: usize,
    pub w: usize,
    pub ph: usize,
    pub pw: usize,
    pub sh: usize,
    pub sw: usize,
}

impl PoolDims {
    pub fn ho(&self) -> usize {
        (self.h - self.ph) / self.sh + 1
    }
    pub fn wo(&self) -> usize {
        (self.w - self.pw) / self.sw + 1
    }
}

pub(crate) fn avg_pool_forward<T: Real>(x: &[T], d: PoolDims) -> Vec<T> {
    let (ho, wo) = (d.ho(), d.wo());
    let scale = T::lit(1.0 / (d.ph * d.pw) as f64);
    let mut out = Vec::with_capacity(d.planes * ho * wo);
    for p in 0..d.planes {
        let plane = &x[p * d.h * d.w..][..d.h * d.w];
        for i in 0..ho {
            for j in 0..wo {
                let mut s = T::zero();
                for a in 0..d.ph {
                    let row = &plane[(i * d.sh + a) * d.w + j * d.sw..][..d.pw];
                    for &v in row {
                        s += v;
                    }
                }
                out.push(s * scale);
            }
        }
    }
    out
}

pub(crate) fn avg_pool_backward<T: Real>(g: &[T], d: PoolDims) -> Vec<T> {
    let (ho, wo) = (d.ho(), d.wo());
    let scale = T::lit(1.0 / (d.ph * d.pw) as f64);
    let mut dx = vec![T::zero(); d.planes * d.h * d.w];
    for p in 0..d.planes {
        let plane = &mut dx[p * d.h * d.w..][..d.h * d.w];
        let gp = &g[p * ho * wo..][..ho * wo];
        for i in 0..ho {
            for j in 0..wo {
                let share = gp[i * wo + j] * scale;
                for a in 0..d.ph {
                    for v in &mut plane[(i * d.sh + a) * d.w + j * d.sw..][..d.pw] {
                        *v += share;
                    }
                }
            }
        }
    }
    dx
}

#[inline]
pub(crate) fn elu<T: Real>(x: T, alpha: T) -> T {
    if x > T::zero() {
        x
    } else {
        alpha * (x.exp() - T::one())
    }
}

#[inline]
pub(crate) fn elu_grad<T: Real>(x: T, alpha: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        alpha * x.exp()
    }
}

/// Row softmax over a `[rows, k]` matrix with max subtraction.
pub(crate) fn softmax_rows<T: Real>(x: &[T], k: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks_exact(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let start = out.len();
        let mut sum = T::zero();
        for &v in row {
            let e = (v - max).exp();
            sum += e;
            out.push(e);
        }
        for v in &mut out[start..] {
            *v /= sum;
        }
    }
    out
}

pub(crate) fn softmax_rows_backward<T: Real>(p: &[T], g: &[T], k: usize) -> Vec<T> {
    let mut dx = Vec::with_capacity(p.len());
    for (pr, gr) in p.chunks_exact(k).zip(g.chunks_exact(k)) {
        let inner: T = pr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
        dx.extend(pr.iter().zip(gr).map(|(&a, &b)| a * (b - inner)));
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..37).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..37).map(|i| 1.0 - i as f64 * 0.25).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-9);
    }

    #[test]
    fn pool_output_width() {
        let d = PoolDims {
            planes: 1,
            h: 1,
            w: 689,
            ph: 1,
            pw: 3,
            sh: 1,
            sw: 3,
        };
        assert_eq!(d.wo(), 229);
    }
}
