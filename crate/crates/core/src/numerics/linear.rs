//! Dense matrix products and the affine map `y = x W + b`.

use super::tensor::Tensor2;
use crate::error::{invalid_arg, Result};

/// `a (m x k) * b (k x n)`.
pub fn matmul(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    if a.cols() != b.rows() {
        return Err(invalid_arg(format!(
            "inner dimensions differ: {}x{} * {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let (m, n) = (a.rows(), b.cols());
    let mut out = Tensor2::zeros(m, n);
    for i in 0..m {
        let ar = a.row(i);
        let or = out.row_mut(i);
        for (p, &av) in ar.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in or.iter_mut().zip(b.row(p)) {
                *o += av * bv;
            }
        }
    }
    Ok(out)
}

/// `aᵀ (k x m)ᵀ * b (k x n)` without materializing the transpose.
pub fn matmul_tn(a: &Tensor2, b: &Tensor2) -> Tensor2 {
    assert_eq!(a.rows(), b.rows(), "row counts must agree");
    let mut out = Tensor2::zeros(a.cols(), b.cols());
    for p in 0..a.rows() {
        let br = b.row(p);
        for (i, &av) in a.row(p).iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in out.row_mut(i).iter_mut().zip(br) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a (m x k) * bᵀ` where `b` is `n x k`.
pub fn matmul_nt(a: &Tensor2, b: &Tensor2) -> Tensor2 {
    assert_eq!(a.cols(), b.cols(), "column counts must agree");
    matmul(a, &b.transpose()).expect("shapes checked")
}

/// Affine map `x W + b`. `b`, when present, has one entry per output column.
pub fn linear(x: &Tensor2, w: &Tensor2, b: Option<&[f64]>) -> Result<Tensor2> {
    let mut y = matmul(x, w)?;
    if let Some(b) = b {
        if b.len() != w.cols() {
            return Err(invalid_arg(format!("bias length {} != {}", b.len(), w.cols())));
        }
        for r in 0..y.rows() {
            for (v, bb) in y.row_mut(r).iter_mut().zip(b) {
                *v += bb;
            }
        }
    }
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub dx: Tensor2,
    pub dw: Tensor2,
    pub db: Vec<f64>,
}

pub fn linear_backward(x: &Tensor2, w: &Tensor2, dy: &Tensor2) -> LinearGrads {
    LinearGrads { dx: matmul_nt(dy, w), dw: matmul_tn(x, dy), db: dy.column_sums() }
}
