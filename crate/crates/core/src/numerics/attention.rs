//! Single-head unmasked softmax attention, `softmax(q kᵀ / sqrt(d)) v`.

use super::linear::{matmul, matmul_nt, matmul_tn};
use super::tensor::Tensor2;
use crate::error::{invalid_arg, Result};

#[derive(Debug, Clone)]
pub struct AttentionCache {
    /// Attention weights, one row per query.
    pub weights: Tensor2,
}

pub fn softmax_rows(scores: &mut Tensor2) {
    for r in 0..scores.rows() {
        let row = scores.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

pub fn softmax_attention(q: &Tensor2, k: &Tensor2, v: &Tensor2) -> Result<(Tensor2, AttentionCache)> {
    if q.cols() != k.cols() || k.rows() != v.rows() {
        return Err(invalid_arg(format!(
            "attention shapes q {:?}, k {:?}, v {:?}",
            q.shape(),
            k.shape(),
            v.shape()
        )));
    }
    let scale = 1.0 / (q.cols() as f64).sqrt();
    let mut scores = matmul_nt(q, k);
    scores.scale(scale);
    softmax_rows(&mut scores);
    let out = matmul(&scores, v)?;
    Ok((out, AttentionCache { weights: scores }))
}

#[derive(Debug, Clone)]
pub struct AttentionGrads {
    pub dq: Tensor2,
    pub dk: Tensor2,
    pub dv: Tensor2,
}

pub fn softmax_attention_backward(
    q: &Tensor2,
    k: &Tensor2,
    v: &Tensor2,
    cache: &AttentionCache,
    dout: &Tensor2,
) -> AttentionGrads {
    let a = &cache.weights;
    let scale = 1.0 / (q.cols() as f64).sqrt();
    let dv = matmul_tn(a, dout);
    let da = matmul_nt(dout, v);
    let mut ds = Tensor2::zeros(a.rows(), a.cols());
    for r in 0..a.rows() {
        let ar = a.row(r);
        let dar = da.row(r);
        let dot: f64 = ar.iter().zip(dar).map(|(x, y)| x * y).sum();
        for (j, o) in ds.row_mut(r).iter_mut().enumerate() {
            *o = ar[j] * (dar[j] - dot) * scale;
        }
    }
    let dq = matmul(&ds, k).expect("shapes checked in forward");
    let dk = matmul_tn(&ds, q);
    AttentionGrads { dq, dk, dv }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::grad_check;
    use crate::rng::RngStream;
    use rand::Rng;

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor2 {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor2::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn single_key_returns_value() {
        let q = Tensor2::from_rows(&[vec![3.0, -1.0], vec![0.2, 0.1]]).unwrap();
        let k = Tensor2::row_vector(&[0.5, 0.5]);
        let v = Tensor2::row_vector(&[7.0, -2.0]);
        let (o, _) = softmax_attention(&q, &k, &v).unwrap();
        for r in 0..2 {
            assert!((o.get(r, 0) - 7.0).abs() < 1e-12);
            assert!((o.get(r, 1) + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_keys_average_values() {
        let q = Tensor2::row_vector(&[1.0, 2.0]);
        let k = Tensor2::filled(3, 2, 0.3);
        let v = Tensor2::from_rows(&[vec![1.0, 0.0], vec![2.0, 3.0], vec![3.0, 6.0]]).unwrap();
        let (o, _) = softmax_attention(&q, &k, &v).unwrap();
        assert!((o.get(0, 0) - 2.0).abs() < 1e-12);
        assert!((o.get(0, 1) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_against_direct_formula() {
        let q = Tensor2::from_rows(&[vec![1.0, 0.0], vec![0.5, -1.0]]).unwrap();
        let k = Tensor2::from_rows(&[vec![0.2, 0.4], vec![-1.0, 0.3]]).unwrap();
        let v = Tensor2::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0]]).unwrap();
        let (o, cache) = softmax_attention(&q, &k, &v).unwrap();
        let s = 2f64.sqrt();
        for i in 0..2 {
            let e: Vec<f64> = (0..2)
                .map(|j| ((q.get(i, 0) * k.get(j, 0) + q.get(i, 1) * k.get(j, 1)) / s).exp())
                .collect();
            let z = e[0] + e[1];
            for c in 0..2 {
                let want = (e[0] * v.get(0, c) + e[1] * v.get(1, c)) / z;
                assert!((o.get(i, c) - want).abs() < 1e-12);
            }
            let row_sum: f64 = cache.weights.row(i).iter().sum();
            assert!((row_sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_fd() {
        let mut rng = RngStream::new(9).rng();
        let (p, l, d) = (3, 5, 4);
        let q = random(p, d, &mut rng);
        let k = random(l, d, &mut rng);
        let v = random(l, d, &mut rng);
        let proj = random(p, d, &mut rng);
        let (_, cache) = softmax_attention(&q, &k, &v).unwrap();
        let g = softmax_attention_backward(&q, &k, &v, &cache, &proj);
        let loss = |qq: &Tensor2, kk: &Tensor2, vv: &Tensor2| {
            let (o, _) = softmax_attention(qq, kk, vv).unwrap();
            o.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let fq = |t: &[f64]| loss(&Tensor2::from_vec(p, d, t.to_vec()).unwrap(), &k, &v);
        let fk = |t: &[f64]| loss(&q, &Tensor2::from_vec(l, d, t.to_vec()).unwrap(), &v);
        let fv = |t: &[f64]| loss(&q, &k, &Tensor2::from_vec(l, d, t.to_vec()).unwrap());
        assert!(grad_check(fq, q.data(), g.dq.data()) < 1e-6);
        assert!(grad_check(fk, k.data(), g.dk.data()) < 1e-6);
        assert!(grad_check(fv, v.data(), g.dv.data()) < 1e-6);
    }
}
