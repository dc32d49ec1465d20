//! Kernel bank and random kernel composition.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Base periods (in samples); divided by the series length before use.
pub const PERIODS: [f64; 19] = [
    24.0, 48.0, 96.0, 168.0, 336.0, 672.0, 7.0, 14.0, 30.0, 60.0, 365.0, 730.0, 4.0, 26.0, 52.0, 6.0, 12.0, 40.0, 10.0,
];

pub const LINEAR_SIGMAS: [f64; 3] = [0.0, 1.0, 10.0];
pub const LENGTH_SCALES: [f64; 3] = [0.1, 1.0, 10.0];
pub const RQ_ALPHAS: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaternNu {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl MaternNu {
    pub fn value(self) -> f64 {
        match self {
            MaternNu::Half => 0.5,
            MaternNu::ThreeHalves => 1.5,
            MaternNu::FiveHalves => 2.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Constant { c: f64 },
    Linear { sigma: f64 },
    Rbf { l: f64 },
    RationalQuadratic { alpha: f64 },
    Matern { nu: MaternNu, l: f64 },
    /// `period` is already normalized to the unit input interval.
    Periodic { period: f64 },
}

impl KernelSpec {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let r = (x - y).abs();
        match *self {
            KernelSpec::Constant { c } => c,
            KernelSpec::Linear { sigma } => sigma * sigma + x * y,
            KernelSpec::Rbf { l } => (-r * r / (2.0 * l * l)).exp(),
            KernelSpec::RationalQuadratic { alpha } => (1.0 + r * r / (2.0 * alpha)).powf(-alpha),
            KernelSpec::Matern { nu, l } => {
                let s = r / l;
                match nu {
                    MaternNu::Half => (-s).exp(),
                    MaternNu::ThreeHalves => {
                        let a = 3f64.sqrt() * s;
                        (1.0 + a) * (-a).exp()
                    }
                    MaternNu::FiveHalves => {
                        let a = 5f64.sqrt() * s;
                        (1.0 + a + 5.0 * s * s / 3.0) * (-a).exp()
                    }
                }
            }
            KernelSpec::Periodic { period } => {
                let s = (std::f64::consts::PI * r / period).sin();
                (-2.0 * s * s).exp()
            }
        }
    }

    /// Uniform kernel family, then uniform hyperparameters from the bank.
    pub fn sample(rng: &mut impl Rng, series_len: usize) -> Self {
        let pick = |rng: &mut dyn rand::RngCore, xs: &[f64]| *xs.choose(rng).expect("non-empty");
        match rng.random_range(0..6) {
            0 => KernelSpec::Constant { c: 1.0 },
            1 => KernelSpec::Linear { sigma: pick(rng, &LINEAR_SIGMAS) },
            2 => KernelSpec::Rbf { l: pick(rng, &LENGTH_SCALES) },
            3 => KernelSpec::RationalQuadratic { alpha: pick(rng, &RQ_ALPHAS) },
            4 => {
                let nu = *[MaternNu::Half, MaternNu::ThreeHalves, MaternNu::FiveHalves].choose(rng).expect("nu");
                KernelSpec::Matern { nu, l: pick(rng, &LENGTH_SCALES) }
            }
            _ => KernelSpec::Periodic { period: pick(rng, &PERIODS) / series_len.max(1) as f64 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelOp {
    Add,
    Multiply,
}

/// `((k_0 op_0 k_1) op_1 k_2) ...`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComposedKernel {
    pub leaves: Vec<KernelSpec>,
    pub ops: Vec<KernelOp>,
}

impl ComposedKernel {
    pub fn single(k: KernelSpec) -> Self {
        Self { leaves: vec![k], ops: Vec::new() }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut acc = self.leaves[0].eval(x, y);
        for (op, leaf) in self.ops.iter().zip(&self.leaves[1..]) {
            let v = leaf.eval(x, y);
            match op {
                KernelOp::Add => acc += v,
                KernelOp::Multiply => acc *= v,
            }
        }
        acc
    }

    /// `N ~ U{1, max_leaves}` leaves with uniform add/multiply joins.
    pub fn sample(rng: &mut impl Rng, series_len: usize, max_leaves: usize) -> Self {
        let n = rng.random_range(1..=max_leaves.max(1));
        let mut leaves = Vec::with_capacity(n);
        let mut ops = Vec::with_capacity(n - 1);
        leaves.push(KernelSpec::sample(rng, series_len));
        for _ in 1..n {
            leaves.push(KernelSpec::sample(rng, series_len));
            ops.push(if rng.random_bool(0.5) { KernelOp::Add } else { KernelOp::Multiply });
        }
        Self { leaves, ops }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn closed_forms() {
        assert_eq!(KernelSpec::Rbf { l: 1.0 }.eval(0.3, 0.3), 1.0);
        let m = KernelSpec::Matern { nu: MaternNu::Half, l: 1.0 }.eval(0.0, 1.0);
        assert!((m - 0.36787944117144233).abs() < 1e-15);
        let p = KernelSpec::Periodic { period: 0.25 }.eval(0.1, 0.35);
        assert!((p - 1.0).abs() < 1e-15);
        assert_eq!(KernelSpec::Linear { sigma: 10.0 }.eval(0.5, 0.5), 100.25);
        let rq = KernelSpec::RationalQuadratic { alpha: 1.0 }.eval(0.0, 1.0);
        assert!((rq - 2.0 / 3.0).abs() < 1e-15);
        // nu = 3/2 and 5/2 at zero distance
        for nu in [MaternNu::ThreeHalves, MaternNu::FiveHalves] {
            assert_eq!(KernelSpec::Matern { nu, l: 0.1 }.eval(0.2, 0.2), 1.0);
        }
    }

    #[test]
    fn composition_is_left_to_right() {
        let k = ComposedKernel {
            leaves: vec![KernelSpec::Constant { c: 1.0 }, KernelSpec::Constant { c: 1.0 }, KernelSpec::Linear { sigma: 0.0 }],
            ops: vec![KernelOp::Add, KernelOp::Multiply],
        };
        // (1 + 1) * (x y)
        assert_eq!(k.eval(0.5, 0.5), 0.5);
    }

    #[test]
    fn sampled_hyperparameters_come_from_the_bank() {
        let mut rng = RngStream::new(1).rng();
        let len = 512;
        for _ in 0..500 {
            let k = ComposedKernel::sample(&mut rng, len, 5);
            assert!((1..=5).contains(&k.leaves.len()));
            assert_eq!(k.ops.len(), k.leaves.len() - 1);
            for leaf in &k.leaves {
                match *leaf {
                    KernelSpec::Constant { c } => assert_eq!(c, 1.0),
                    KernelSpec::Linear { sigma } => assert!(LINEAR_SIGMAS.contains(&sigma)),
                    KernelSpec::Rbf { l } | KernelSpec::Matern { l, .. } => assert!(LENGTH_SCALES.contains(&l)),
                    KernelSpec::RationalQuadratic { alpha } => assert!(RQ_ALPHAS.contains(&alpha)),
                    KernelSpec::Periodic { period } => assert!(PERIODS.contains(&(period * len as f64))),
                }
            }
        }
    }
}
