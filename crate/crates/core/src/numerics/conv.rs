//! Causal depthwise convolution, `z[i, j] = sum_m w[m, j] * x[i - m, j]`,
//! with negative indices reading as zero.
//!
//! Two forward paths share one contract: a direct double loop for short
//! kernels and an FFT path for kernels spanning the whole sequence. The FFT
//! length is the next power of two `>= 2L`, so circular wrap-around never
//! reaches the first `L` outputs.

use num_complex::Complex64;

use super::fft::{next_pow2, FftPlan};
use super::tensor::Tensor2;
use crate::error::{invalid_arg, Result};

fn check_shapes(x: &Tensor2, w: &Tensor2) -> Result<()> {
    if w.cols() != x.cols() {
        return Err(invalid_arg(format!(
            "kernel has {} channels but input has {}",
            w.cols(),
            x.cols()
        )));
    }
    if w.rows() > x.rows() {
        return Err(invalid_arg(format!(
            "kernel length {} exceeds sequence length {}",
            w.rows(),
            x.rows()
        )));
    }
    Ok(())
}

pub fn causal_conv_direct(x: &Tensor2, w: &Tensor2) -> Result<Tensor2> {
    check_shapes(x, w)?;
    let (l, d) = x.shape();
    let k = w.rows();
    let mut z = Tensor2::zeros(l, d);
    for i in 0..l {
        let zi = z.row_mut(i);
        for m in 0..k.min(i + 1) {
            let xr = x.row(i - m);
            let wr = w.row(m);
            for j in 0..d {
                zi[j] += wr[j] * xr[j];
            }
        }
    }
    Ok(z)
}

/// Gradients of the direct convolution: `(dx, dw)`.
pub fn causal_conv_direct_backward(x: &Tensor2, w: &Tensor2, dz: &Tensor2) -> (Tensor2, Tensor2) {
    let (l, d) = x.shape();
    let k = w.rows();
    let mut dx = Tensor2::zeros(l, d);
    let mut dw = Tensor2::zeros(k, d);
    for i in 0..l {
        let g = dz.row(i);
        for m in 0..k.min(i + 1) {
            let xr = x.row(i - m);
            let wr = w.row(m);
            {
                let dxr = dx.row_mut(i - m);
                for j in 0..d {
                    dxr[j] += wr[j] * g[j];
                }
            }
            let dwr = dw.row_mut(m);
            for j in 0..d {
                dwr[j] += xr[j] * g[j];
            }
        }
    }
    (dx, dw)
}

/// Full-length spectra of every column of `t`, zero-padded to `plan.len()`.
/// Columns are transformed two at a time by packing them into the real and
/// imaginary parts of one complex signal.
fn column_spectra(t: &Tensor2, plan: &FftPlan) -> Vec<Vec<Complex64>> {
    let n = plan.len();
    let (rows, d) = t.shape();
    let zero = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(d);
    let mut buf = vec![zero; n];
    for c in (0..d).step_by(2) {
        let paired = c + 1 < d;
        buf.iter_mut().for_each(|z| *z = zero);
        for i in 0..rows {
            let r = t.row(i);
            buf[i] = Complex64::new(r[c], if paired { r[c + 1] } else { 0.0 });
        }
        plan.forward(&mut buf);
        let mut a = vec![zero; n];
        let mut b = if paired { vec![zero; n] } else { Vec::new() };
        for k in 0..n {
            let zk = buf[k];
            let zc = buf[(n - k) % n].conj();
            a[k] = (zk + zc) * 0.5;
            if paired {
                // (zk - zc) / 2i
                let diff = zk - zc;
                b[k] = Complex64::new(diff.im * 0.5, -diff.re * 0.5);
            }
        }
        out.push(a);
        if paired {
            out.push(b);
        }
    }
    out
}

/// Inverse transform of real-signal spectra (one per column), keeping the
/// first `rows` samples.
fn columns_from_spectra(spectra: &[Vec<Complex64>], plan: &FftPlan, rows: usize) -> Tensor2 {
    let n = plan.len();
    let d = spectra.len();
    let mut out = Tensor2::zeros(rows, d);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for c in (0..d).step_by(2) {
        let paired = c + 1 < d;
        for k in 0..n {
            let a = spectra[c][k];
            buf[k] = if paired {
                let b = spectra[c + 1][k];
                // a + i b
                Complex64::new(a.re - b.im, a.im + b.re)
            } else {
                a
            };
        }
        plan.inverse(&mut buf);
        for i in 0..rows {
            out.set(i, c, buf[i].re);
            if paired {
                out.set(i, c + 1, buf[i].im);
            }
        }
    }
    out
}

fn product_spectra(
    a: &[Vec<Complex64>],
    b: &[Vec<Complex64>],
    conj_a: bool,
) -> Vec<Vec<Complex64>> {
    a.iter()
        .zip(b)
        .map(|(sa, sb)| {
            sa.iter()
                .zip(sb)
                .map(|(&x, &y)| if conj_a { x.conj() * y } else { x * y })
                .collect()
        })
        .collect()
}

pub fn causal_conv_fft(x: &Tensor2, w: &Tensor2) -> Result<Tensor2> {
    check_shapes(x, w)?;
    if w.rows() != x.rows() {
        return Err(invalid_arg(format!(
            "long kernel length {} must equal sequence length {}",
            w.rows(),
            x.rows()
        )));
    }
    let l = x.rows();
    let plan = FftPlan::new(next_pow2(2 * l))?;
    let xs = column_spectra(x, &plan);
    let ws = column_spectra(w, &plan);
    Ok(columns_from_spectra(&product_spectra(&xs, &ws, false), &plan, l))
}

/// Gradients of the FFT convolution: `(dx, dw)`.
///
/// Both are cross-correlations with the upstream gradient, evaluated as
/// `conj(A) * G` products in the frequency domain.
pub fn causal_conv_fft_backward(x: &Tensor2, w: &Tensor2, dz: &Tensor2) -> (Tensor2, Tensor2) {
    let l = x.rows();
    let plan = FftPlan::new(next_pow2(2 * l)).expect("power of two");
    let xs = column_spectra(x, &plan);
    let ws = column_spectra(w, &plan);
    let gs = column_spectra(dz, &plan);
    let dx = columns_from_spectra(&product_spectra(&ws, &gs, true), &plan, l);
    let dw = columns_from_spectra(&product_spectra(&xs, &gs, true), &plan, l);
    (dx, dw)
}
