//! im2col + GEMM convolution kernels registered as differentiable tensor ops.
//!
//! A transposed convolution is the adjoint of a convolution, so three kernels
//! (forward, input gradient, weight gradient) cover both layer types and
//! their backward passes.

use candle_core::{CpuStorage, CustomOp2, Layout, Shape, Tensor, WithDType};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Geometry {
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    k: usize,
    stride: usize,
    padding: usize,
}

impl Geometry {
    fn out_h(&self) -> usize {
        (self.h + 2 * self.padding - self.k) / self.stride + 1
    }

    fn out_w(&self) -> usize {
        (self.w + 2 * self.padding - self.k) / self.stride + 1
    }

    fn cols_rows(&self) -> usize {
        self.c_in * self.k * self.k
    }

    fn cols_len(&self) -> usize {
        self.cols_rows() * self.out_h() * self.out_w()
    }
}

trait Scalar: WithDType + Copy + Default + std::ops::AddAssign {
    /// `c = alpha * a(m x k) * b(k x n) + beta * c`, strides given as (row, col).
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

fn im2col<T: Scalar>(x: &[T], g: &Geometry, cols: &mut [T]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let p = oh * ow;
    for ci in 0..g.c_in {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    let drow = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= g.h as isize {
                        drow.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, d) in drow.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        *d = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im_add<T: Scalar>(cols: &[T], g: &Geometry, dx: &mut [T]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let p = oh * ow;
    for ci in 0..g.c_in {
        let plane = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let drow = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        if ix >= 0 && ix < g.w as isize {
                            drow[ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// `y[n] = W (c_out x K) * im2col(x[n])`.
fn conv_forward<T: Scalar>(x: &[T], w: &[T], batch: usize, g: &Geometry) -> Vec<T> {
    let p = g.out_h() * g.out_w();
    let kk = g.cols_rows();
    let mut cols = vec![T::zero(); g.cols_len()];
    let mut y = vec![T::zero(); batch * g.c_out * p];
    for n in 0..batch {
        im2col(&x[n * g.c_in * g.h * g.w..], g, &mut cols);
        let out = &mut y[n * g.c_out * p..(n + 1) * g.c_out * p];
        unsafe {
            T::gemm(
                g.c_out,
                kk,
                p,
                w.as_ptr(),
                kk as isize,
                1,
                cols.as_ptr(),
                p as isize,
                1,
                T::zero(),
                out.as_mut_ptr(),
                p as isize,
                1,
            );
        }
    }
    y
}

/// `dx[n] = col2im(W^T * dy[n])`.
fn conv_input_grad<T: Scalar>(dy: &[T], w: &[T], batch: usize, g: &Geometry) -> Vec<T> {
    let p = g.out_h() * g.out_w();
    let kk = g.cols_rows();
    let mut cols = vec![T::zero(); g.cols_len()];
    let mut dx = vec![T::zero(); batch * g.c_in * g.h * g.w];
    for n in 0..batch {
        let grad = &dy[n * g.c_out * p..(n + 1) * g.c_out * p];
        unsafe {
            T::gemm(
                kk,
                g.c_out,
                p,
                w.as_ptr(),
                1,
                kk as isize,
                grad.as_ptr(),
                p as isize,
                1,
                T::zero(),
                cols.as_mut_ptr(),
                p as isize,
                1,
            );
        }
        col2im_add(&cols, g, &mut dx[n * g.c_in * g.h * g.w..(n + 1) * g.c_in * g.h * g.w]);
    }
    dx
}

/// `dW = sum_n dy[n] * im2col(x[n])^T`.
fn conv_weight_grad<T: Scalar>(x: &[T], dy: &[T], batch: usize, g: &Geometry) -> Vec<T> {
    let p = g.out_h() * g.out_w();
    let kk = g.cols_rows();
    let mut cols = vec![T::zero(); g.cols_len()];
    let mut dw = vec![T::zero(); g.c_out * kk];
    for n in 0..batch {
        im2col(&x[n * g.c_in * g.h * g.w..], g, &mut cols);
        let grad = &dy[n * g.c_out * p..(n + 1) * g.c_out * p];
        let beta = if n == 0 { T::zero() } else { T::one() };
        unsafe {
            T::gemm(
                g.c_out,
                p,
                kk,
                grad.as_ptr(),
                p as isize,
                1,
                cols.as_ptr(),
                1,
                p as isize,
                beta,
                dw.as_mut_ptr(),
                kk as isize,
                1,
            );
        }
    }
    dw
}

fn contiguous<'a, T: WithDType>(s: &'a CpuStorage, l: &Layout) -> candle_core::Result<&'a [T]> {
    let data = s.as_slice::<T>()?;
    match l.contiguous_offsets() {
        Some((start, end)) => Ok(&data[start..end]),
        None => candle_core::bail!("convolution kernels require contiguous tensors"),
    }
}

/// Dispatches a kernel over f32/f64 storages.
macro_rules! dispatch {
    ($s1:expr, $l1:expr, $s2:expr, $l2:expr, $f:ident, $($arg:expr),*) => {
        match ($s1, $s2) {
            (CpuStorage::F32(_), CpuStorage::F32(_)) => {
                let a = contiguous::<f32>($s1, $l1)?;
                let b = contiguous::<f32>($s2, $l2)?;
                CpuStorage::F32($f(a, b, $($arg),*))
            }
            (CpuStorage::F64(_), CpuStorage::F64(_)) => {
                let a = contiguous::<f64>($s1, $l1)?;
                let b = contiguous::<f64>($s2, $l2)?;
                CpuStorage::F64($f(a, b, $($arg),*))
            }
            _ => candle_core::bail!("convolution kernels support matching f32 or f64 operands only"),
        }
    };
}

/// Forward convolution; operands `(x, weight)` with weight `(c_out, c_in, k, k)`.
struct ConvOp {
    stride: usize,
    padding: usize,
}

/// Transposed convolution; operands `(x, weight)` with weight `(c_in, c_out, k, k)`.
struct ConvTransposeOp {
    stride: usize,
    padding: usize,
}

/// Input gradient of a convolution; operands `(dy, weight)`.
struct InputGradOp {
    g: Geometry,
}

/// Weight gradient of a convolution; operands `(x, dy)`.
struct WeightGradOp {
    g: Geometry,
}

fn dims4(l: &Layout) -> candle_core::Result<(usize, usize, usize, usize)> {
    l.shape().dims4()
}

impl CustomOp2 for ConvOp {
    fn name(&self) -> &'static str {
        "im2col-conv2d"
    }

    fn cpu_fwd(&self, s1: &CpuStorage, l1: &Layout, s2: &CpuStorage, l2: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let (n, c_in, h, w) = dims4(l1)?;
        let (c_out, wc_in, k, _) = dims4(l2)?;
        if wc_in != c_in {
            candle_core::bail!("conv2d: input has {c_in} channels, weight expects {wc_in}");
        }
        let g = Geometry { c_in, h, w, c_out, k, stride: self.stride, padding: self.padding };
        let out = dispatch!(s1, l1, s2, l2, conv_forward, n, &g);
        Ok((out, Shape::from((n, c_out, g.out_h(), g.out_w()))))
    }

    fn bwd(&self, x: &Tensor, w: &Tensor, _res: &Tensor, grad: &Tensor) -> candle_core::Result<(Option<Tensor>, Option<Tensor>)> {
        let (_, c_in, h, wd) = x.dims4()?;
        let (c_out, _, k, _) = w.dims4()?;
        let g = Geometry { c_in, h, w: wd, c_out, k, stride: self.stride, padding: self.padding };
        let grad = grad.contiguous()?;
        let dx = grad.apply_op2_no_bwd(w, &InputGradOp { g })?;
        let dw = x.apply_op2_no_bwd(&grad, &WeightGradOp { g })?;
        Ok((Some(dx), Some(dw)))
    }
}

impl CustomOp2 for ConvTransposeOp {
    fn name(&self) -> &'static str {
        "im2col-conv-transpose2d"
    }

    fn cpu_fwd(&self, s1: &CpuStorage, l1: &Layout, s2: &CpuStorage, l2: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let (n, c_in, h, w) = dims4(l1)?;
        let (wc_in, c_out, k, _) = dims4(l2)?;
        if wc_in != c_in {
            candle_core::bail!("conv_transpose2d: input has {c_in} channels, weight expects {wc_in}");
        }
        let oh = (h - 1) * self.stride + k - 2 * self.padding;
        let ow = (w - 1) * self.stride + k - 2 * self.padding;
        // The adjoint convolution maps (c_out, oh, ow) -> (c_in, h, w).
        let g = Geometry { c_in: c_out, h: oh, w: ow, c_out: c_in, k, stride: self.stride, padding: self.padding };
        let out = dispatch!(s1, l1, s2, l2, conv_input_grad, n, &g);
        Ok((out, Shape::from((n, c_out, oh, ow))))
    }

    fn bwd(&self, x: &Tensor, w: &Tensor, res: &Tensor, grad: &Tensor) -> candle_core::Result<(Option<Tensor>, Option<Tensor>)> {
        let (_, c_in, _, _) = x.dims4()?;
        let (_, c_out, oh, ow) = res.dims4()?;
        let k = w.dim(2)?;
        let g = Geometry { c_in: c_out, h: oh, w: ow, c_out: c_in, k, stride: self.stride, padding: self.padding };
        let grad = grad.contiguous()?;
        let dx = grad.apply_op2_no_bwd(w, &ConvOp { stride: self.stride, padding: self.padding })?;
        let dw = grad.apply_op2_no_bwd(x, &WeightGradOp { g })?;
        Ok((Some(dx), Some(dw)))
    }
}

impl CustomOp2 for InputGradOp {
    fn name(&self) -> &'static str {
        "im2col-conv2d-input-grad"
    }

    fn cpu_fwd(&self, s1: &CpuStorage, l1: &Layout, s2: &CpuStorage, l2: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let (n, _, _, _) = dims4(l1)?;
        let g = self.g;
        let out = dispatch!(s1, l1, s2, l2, conv_input_grad, n, &g);
        Ok((out, Shape::from((n, g.c_in, g.h, g.w))))
    }
}

impl CustomOp2 for WeightGradOp {
    fn name(&self) -> &'static str {
        "im2col-conv2d-weight-grad"
    }

    fn cpu_fwd(&self, s1: &CpuStorage, l1: &Layout, s2: &CpuStorage, l2: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let (n, _, _, _) = dims4(l1)?;
        let g = self.g;
        let out = dispatch!(s1, l1, s2, l2, conv_weight_grad, n, &g);
        Ok((out, Shape::from((g.c_out, g.c_in, g.k, g.k))))
    }
}

/// Differentiable 2-D convolution (square kernel, no dilation or groups).
pub fn conv2d(x: &Tensor, weight: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    Ok(x.contiguous()?.apply_op2(&weight.contiguous()?, ConvOp { stride, padding })?)
}

/// Differentiable transposed 2-D convolution with weight `(c_in, c_out, k, k)`.
pub fn conv_transpose2d(x: &Tensor, weight: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    Ok(x.contiguous()?.apply_op2(&weight.contiguous()?, ConvTransposeOp { stride, padding })?)
}
