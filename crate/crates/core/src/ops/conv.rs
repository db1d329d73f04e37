//! Valid (unpadded), stride-1 convolution via im2col + GEMM.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub maps_in: usize,
    pub h: usize,
    pub w: usize,
    pub maps_out: usize,
    pub side: usize,
}

impl ConvGeometry {
    pub fn out_h(&self) -> usize {
        self.h - self.side + 1
    }

    pub fn out_w(&self) -> usize {
        self.w - self.side + 1
    }

    /// Rows of the column matrix (one per filter tap).
    pub fn patch(&self) -> usize {
        self.maps_in * self.side * self.side
    }

    /// Columns of the column matrix (one per output position).
    pub fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }

    pub fn check<T: Scalar>(input: &Tensor<T>, filters: &Tensor<T>, biases: &Tensor<T>) -> Result<Self> {
        input.expect_rank("conv2d", 3)?;
        filters.expect_rank("conv2d filters", 4)?;
        let (maps_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let fs = filters.shape();
        if fs[1] != maps_in || fs[2] != fs[3] {
            return Err(Error::shape(
                "conv2d filters",
                format!("[_, {maps_in}, t, t]"),
                fs,
            ));
        }
        if fs[2] > h || fs[2] > w {
            return Err(Error::invalid(format!(
                "conv2d: filter side {} exceeds input {}x{}",
                fs[2], h, w
            )));
        }
        if biases.shape() != [fs[0]] {
            return Err(Error::shape("conv2d biases", [fs[0]], biases.shape()));
        }
        Ok(Self {
            maps_in,
            h,
            w,
            maps_out: fs[0],
            side: fs[2],
        })
    }
}

/// Unroll input windows into a `[patch, positions]` matrix.
pub(crate) fn im2col<T: Scalar>(input: &[T], g: &ConvGeometry) -> Vec<T> {
    let (oh, ow, k) = (g.out_h(), g.out_w(), g.side);
    let positions = oh * ow;
    let mut cols = vec![T::zero(); g.patch() * positions];
    for c in 0..g.maps_in {
        let plane = &input[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * positions..(row + 1) * positions];
                for oy in 0..oh {
                    let src = &plane[(oy + ky) * g.w + kx..(oy + ky) * g.w + kx + ow];
                    dst[oy * ow..(oy + 1) * ow].copy_from_slice(src);
                }
            }
        }
    }
    cols
}

/// Scatter-add a `[patch, positions]` matrix back into image layout.
pub(crate) fn col2im<T: Scalar>(cols: &[T], g: &ConvGeometry) -> Vec<T> {
    let (oh, ow, k) = (g.out_h(), g.out_w(), g.side);
    let positions = oh * ow;
    let mut out = vec![T::zero(); g.maps_in * g.h * g.w];
    for c in 0..g.maps_in {
        let plane = &mut out[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * positions..(row + 1) * positions];
                for oy in 0..oh {
                    let dst = &mut plane[(oy + ky) * g.w + kx..(oy + ky) * g.w + kx + ow];
                    for (d, &s) in dst.iter_mut().zip(&src[oy * ow..(oy + 1) * ow]) {
                        *d = *d + s;
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn forward_cols<T: Scalar>(cols: &[T], filters: &[T], biases: &[T], g: &ConvGeometry) -> Vec<T> {
    let (p, k) = (g.positions(), g.patch());
    let mut out = Vec::with_capacity(g.maps_out * p);
    for &b in biases {
        out.extend(std::iter::repeat_n(b, p));
    }
    T::gemm(
        g.maps_out,
        k,
        p,
        T::one(),
        filters,
        k as isize,
        1,
        cols,
        p as isize,
        1,
        T::one(),
        &mut out,
        p as isize,
        1,
    );
    out
}

/// Accumulates filter and bias gradients into `grad_filters`/`grad_biases`
/// and returns the input gradient when requested.
pub(crate) fn backward_cols<T: Scalar>(
    grad_out: &[T],
    cols: &[T],
    filters: &[T],
    g: &ConvGeometry,
    grad_filters: &mut [T],
    grad_biases: &mut [T],
    need_input_grad: bool,
) -> Option<Vec<T>> {
    let (p, k) = (g.positions(), g.patch());
    // dW += dY (maps_out x p) * cols^T (p x k)
    T::gemm(
        g.maps_out,
        p,
        k,
        T::one(),
        grad_out,
        p as isize,
        1,
        cols,
        1,
        p as isize,
        T::one(),
        grad_filters,
        k as isize,
        1,
    );
    for (gb, row) in grad_biases.iter_mut().zip(grad_out.chunks_exact(p)) {
        *gb = *gb + row.iter().copied().sum::<T>();
    }
    if !need_input_grad {
        return None;
    }
    // dcols = W^T (k x maps_out) * dY (maps_out x p)
    let mut grad_cols = vec![T::zero(); k * p];
    T::gemm(
        k,
        g.maps_out,
        p,
        T::one(),
        filters,
        1,
        k as isize,
        grad_out,
        p as isize,
        1,
        T::zero(),
        &mut grad_cols,
        p as isize,
        1,
    );
    Some(col2im(&grad_cols, g))
}

/// `[maps_in, h, w] * [maps_out, maps_in, t, t] + [maps_out] -> [maps_out, h-t+1, w-t+1]`
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, filters: &Tensor<T>, biases: &Tensor<T>) -> Result<Tensor<T>> {
    let g = ConvGeometry::check(input, filters, biases)?;
    let cols = im2col(input.data(), &g);
    let out = forward_cols(&cols, filters.data(), biases.data(), &g);
    Tensor::new(&[g.maps_out, g.out_h(), g.out_w()], out)
}

#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub filters: Tensor<T>,
    pub biases: Tensor<T>,
}

pub fn conv2d_backward<T: Scalar>(grad_out: &Tensor<T>, input: &Tensor<T>, filters: &Tensor<T>) -> Result<ConvGrads<T>> {
    if filters.rank() != 4 {
        return Err(Error::shape("conv2d_backward filters", "rank 4", filters.shape()));
    }
    let biases = Tensor::zeros(&[filters.shape()[0]]);
    let g = ConvGeometry::check(input, filters, &biases)?;
    let expected = [g.maps_out, g.out_h(), g.out_w()];
    if grad_out.shape() != expected {
        return Err(Error::shape("conv2d_backward grad_out", expected, grad_out.shape()));
    }
    let cols = im2col(input.data(), &g);
    let mut gf = vec![T::zero(); filters.len()];
    let mut gb = vec![T::zero(); g.maps_out];
    let gi = backward_cols(grad_out.data(), &cols, filters.data(), &g, &mut gf, &mut gb, true)
        .expect("input gradient requested");
    Ok(ConvGrads {
        input: Tensor::new(input.shape(), gi)?,
        filters: Tensor::new(filters.shape(), gf)?,
        biases: Tensor::new(&[g.maps_out], gb)?,
    })
}
