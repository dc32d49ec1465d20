use rand::Rng;

use super::params::{ParamKind, Parameters};
use crate::numerics::Tensor2;

pub fn random_tensor(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor2 {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor2::from_vec(rows, cols, data).unwrap()
}

/// Fills every parameter with moderate random values; norm gains stay
/// near one so LayerNorm does not collapse.
pub fn randomize<P: Parameters>(p: &mut P, rng: &mut impl Rng) {
    p.visit_mut("", &mut |name, kind, t| {
        for v in t.data_mut() {
            *v = match kind {
                ParamKind::Norm if name.ends_with("gain") => rng.random_range(0.7..1.3),
                _ => rng.random_range(-0.5..0.5),
            };
        }
    });
}
