//! Batched layer kernels. Activations are `[batch][channel][row][col]`.

use rand::Rng;

use super::tensor::{rm, tr, Scalar};

/// 3×3 convolution, stride 1, zero "same" padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv<T> {
    pub cin: usize,
    pub cout: usize,
    pub h: usize,
    pub w: usize,
    /// `[cout][cin][3][3]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv<T> {
    pub fn zeros(cin: usize, cout: usize, h: usize, w: usize) -> Self {
        Self {
            cin,
            cout,
            h,
            w,
            weight: vec![T::zero(); cout * cin * 9],
            bias: vec![T::zero(); cout],
        }
    }

    fn kdim(&self) -> usize {
        self.cin * 9
    }

    fn hw(&self) -> usize {
        self.h * self.w
    }

    pub fn in_len(&self) -> usize {
        self.cin * self.hw()
    }

    pub fn out_len(&self) -> usize {
        self.cout * self.hw()
    }

    fn im2col(&self, x: &[T], cols: &mut [T]) {
        let (h, w) = (self.h as isize, self.w as isize);
        let hw = self.hw();
        for ci in 0..self.cin {
            let plane = &x[ci * hw..(ci + 1) * hw];
            for ky in 0..3isize {
                for kx in 0..3isize {
                    let row = (ci * 9 + (ky * 3 + kx) as usize) * hw;
                    let out = &mut cols[row..row + hw];
                    for y in 0..h {
                        let sy = y + ky - 1;
                        let dst = &mut out[(y * w) as usize..((y + 1) * w) as usize];
                        if sy < 0 || sy >= h {
                            dst.fill(T::zero());
                            continue;
                        }
                        let src = &plane[(sy * w) as usize..((sy + 1) * w) as usize];
                        for (xo, d) in dst.iter_mut().enumerate() {
                            let sx = xo as isize + kx - 1;
                            *d = if sx < 0 || sx >= w { T::zero() } else { src[sx as usize] };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[T], dx: &mut [T]) {
        let (h, w) = (self.h as isize, self.w as isize);
        let hw = self.hw();
        for ci in 0..self.cin {
            let plane = &mut dx[ci * hw..(ci + 1) * hw];
            for ky in 0..3isize {
                for kx in 0..3isize {
                    let row = (ci * 9 + (ky * 3 + kx) as usize) * hw;
                    let src = &cols[row..row + hw];
                    for y in 0..h {
                        let sy = y + ky - 1;
                        if sy < 0 || sy >= h {
                            continue;
                        }
                        for xo in 0..w {
                            let sx = xo + kx - 1;
                            if sx >= 0 && sx < w {
                                plane[(sy * w + sx) as usize] += src[(y * w + xo) as usize];
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, x: &[T], batch: usize) -> Vec<T> {
        let (kd, hw) = (self.kdim(), self.hw());
        let mut cols = vec![T::zero(); kd * hw];
        let mut y = vec![T::zero(); batch * self.out_len()];
        for n in 0..batch {
            self.im2col(&x[n * self.in_len()..(n + 1) * self.in_len()], &mut cols);
            let out = &mut y[n * self.out_len()..(n + 1) * self.out_len()];
            for (co, plane) in out.chunks_mut(hw).enumerate() {
                plane.fill(self.bias[co]);
            }
            T::gemm(self.cout, kd, hw, T::one(), &self.weight, rm(kd), &cols, rm(hw), T::one(), out, rm(hw));
        }
        y
    }

    /// Accumulates parameter gradients and returns the input gradient when
    /// `want_dx` is set.
    pub fn backward(
        &self,
        x: &[T],
        dy: &[T],
        batch: usize,
        dw: &mut [T],
        db: &mut [T],
        want_dx: bool,
    ) -> Option<Vec<T>> {
        let (kd, hw) = (self.kdim(), self.hw());
        let mut cols = vec![T::zero(); kd * hw];
        let mut dcols = vec![T::zero(); kd * hw];
        let mut dx = want_dx.then(|| vec![T::zero(); batch * self.in_len()]);
        for n in 0..batch {
            self.im2col(&x[n * self.in_len()..(n + 1) * self.in_len()], &mut cols);
            let g = &dy[n * self.out_len()..(n + 1) * self.out_len()];
            for (co, plane) in g.chunks(hw).enumerate() {
                let mut s = T::zero();
                for &v in plane {
                    s += v;
                }
                db[co] += s;
            }
            T::gemm(self.cout, hw, kd, T::one(), g, rm(hw), &cols, tr(hw), T::one(), dw, rm(kd));
            if let Some(dx) = dx.as_mut() {
                T::gemm(kd, self.cout, hw, T::one(), &self.weight, tr(kd), g, rm(hw), T::zero(), &mut dcols, rm(hw));
                self.col2im(&dcols, &mut dx[n * self.in_len()..(n + 1) * self.in_len()]);
            }
        }
        dx
    }
}

/// 2×2 max pooling, stride 2, partial windows kept at odd edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl MaxPool {
    pub fn out_hw(&self) -> (usize, usize) {
        (self.h.div_ceil(2), self.w.div_ceil(2))
    }

    pub fn out_len(&self) -> usize {
        let (oh, ow) = self.out_hw();
        self.c * oh * ow
    }

    /// Output and, per output element, the flat index of the winning input.
    pub fn forward<T: Scalar>(&self, x: &[T], batch: usize) -> (Vec<T>, Vec<usize>) {
        let (oh, ow) = self.out_hw();
        let in_len = self.c * self.h * self.w;
        let mut y = Vec::with_capacity(batch * self.out_len());
        let mut arg = Vec::with_capacity(batch * self.out_len());
        for n in 0..batch {
            for c in 0..self.c {
                let base = n * in_len + c * self.h * self.w;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = base + 2 * oy * self.w + 2 * ox;
                        for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                            let (iy, ix) = (2 * oy + dy, 2 * ox + dx);
                            if iy < self.h && ix < self.w {
                                let i = base + iy * self.w + ix;
                                if x[i] > x[best] {
                                    best = i;
                                }
                            }
                        }
                        y.push(x[best]);
                        arg.push(best);
                    }
                }
            }
        }
        (y, arg)
    }

    pub fn backward<T: Scalar>(&self, dy: &[T], arg: &[usize], batch: usize) -> Vec<T> {
        let mut dx = vec![T::zero(); batch * self.c * self.h * self.w];
        for (&g, &i) in dy.iter().zip(arg) {
            dx[i] += g;
        }
        dx
    }
}

/// Fully connected layer, `y = W·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub nin: usize,
    pub nout: usize,
    /// `[nout][nin]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(nin: usize, nout: usize) -> Self {
        Self {
            nin,
            nout,
            weight: vec![T::zero(); nin * nout],
            bias: vec![T::zero(); nout],
        }
    }

    pub fn forward(&self, x: &[T], batch: usize) -> Vec<T> {
        let mut y = Vec::with_capacity(batch * self.nout);
        for _ in 0..batch {
            y.extend_from_slice(&self.bias);
        }
        T::gemm(batch, self.nin, self.nout, T::one(), x, rm(self.nin), &self.weight, tr(self.nin), T::one(), &mut y, rm(self.nout));
        y
    }

    pub fn backward(&self, x: &[T], dy: &[T], batch: usize, dw: &mut [T], db: &mut [T]) -> Vec<T> {
        for row in dy.chunks(self.nout) {
            for (b, &g) in db.iter_mut().zip(row) {
                *b += g;
            }
        }
        T::gemm(self.nout, batch, self.nin, T::one(), dy, tr(self.nout), x, rm(self.nin), T::one(), dw, rm(self.nin));
        let mut dx = vec![T::zero(); batch * self.nin];
        T::gemm(batch, self.nout, self.nin, T::one(), dy, rm(self.nout), &self.weight, rm(self.nin), T::zero(), &mut dx, rm(self.nin));
        dx
    }
}

pub fn relu_inplace<T: Scalar>(x: &mut [T]) {
    for v in x.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Gradient through a ReLU given its output.
pub fn relu_backward<T: Scalar>(out: &[T], dy: &mut [T]) {
    for (g, &o) in dy.iter_mut().zip(out) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Inverted-dropout mask: `1/keep` with probability `keep`, else 0.
pub fn dropout_mask<T: Scalar, R: Rng>(len: usize, keep: f64, rng: &mut R) -> Vec<T> {
    let scale = T::of(1.0 / keep);
    (0..len)
        .map(|_| if rng.gen::<f64>() < keep { scale } else { T::zero() })
        .collect()
}

/// Row-wise softmax in place.
pub fn softmax_rows<T: Scalar>(x: &mut [T], width: usize) {
    for row in x.chunks_mut(width) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_matches_direct_sum() {
        let mut conv = Conv::<f64>::zeros(2, 3, 4, 5);
        for (i, w) in conv.weight.iter_mut().enumerate() {
            *w = ((i * 7) % 11) as f64 * 0.1 - 0.5;
        }
        conv.bias = vec![0.1, -0.2, 0.3];
        let x: Vec<f64> = (0..2 * 20).map(|i| (i as f64 * 0.37).cos()).collect();
        let y = conv.forward(&x, 1);
        for co in 0..3 {
            for r in 0..4isize {
                for c in 0..5isize {
                    let mut s = conv.bias[co];
                    for ci in 0..2 {
                        for ky in 0..3isize {
                            for kx in 0..3isize {
                                let (yy, xx) = (r + ky - 1, c + kx - 1);
                                if (0..4).contains(&yy) && (0..5).contains(&xx) {
                                    s += conv.weight[((co * 2 + ci) * 3 + ky as usize) * 3 + kx as usize]
                                        * x[ci * 20 + (yy * 5 + xx) as usize];
                                }
                            }
                        }
                    }
                    assert!((y[co * 20 + (r * 5 + c) as usize] - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pool_ceil_mode() {
        let p = MaxPool { c: 1, h: 3, w: 5 };
        assert_eq!(p.out_hw(), (2, 3));
        let x: Vec<f64> = (0..15).map(|i| i as f64).collect();
        let (y, arg) = p.forward(&x, 1);
        assert_eq!(y, vec![6.0, 8.0, 9.0, 11.0, 13.0, 14.0]);
        let dx = p.backward(&[1.0; 6], &arg, 1);
        assert_eq!(dx.iter().sum::<f64>(), 6.0);
        assert_eq!(dx[14], 1.0);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let mut a = vec![0.3, -1.2, 4.0, 2.2];
        let mut b: Vec<f64> = a.iter().map(|v| v + 123.456).collect();
        softmax_rows(&mut a, 4);
        softmax_rows(&mut b, 4);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
