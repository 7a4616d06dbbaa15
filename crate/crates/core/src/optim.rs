//! Adam with bias-corrected moment estimates.
//!
//! Update per coordinate, with `k` the step count after incrementing:
//!
//! ```text
//! m ← β1·m + (1-β1)·g
//! v ← β2·v + (1-β2)·g²
//! θ ← θ - α · (m / (1-β1^k)) / (sqrt(v / (1-β2^k)) + ε)
//! ```
//!
//! `ε` is added outside the square root.

use crate::error::{Error, Result};
use crate::model::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha.is_finite()
            && self.alpha >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<P> {
    pub config: AdamConfig,
    pub m: P,
    pub v: P,
    pub step_count: u64,
}

impl<P: ParamSet> AdamState<P> {
    pub fn new(params: &P, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            step_count: 0,
        })
    }
}

pub fn adam_step<P: ParamSet>(params: &mut P, grads: &P, state: &mut AdamState<P>) -> Result<()> {
    if !params.same_shapes(grads) || !params.same_shapes(&state.m) || !params.same_shapes(&state.v)
    {
        return Err(Error::Contract(
            "Adam state, gradients and parameters have different shapes".into(),
        ));
    }
    let AdamConfig {
        alpha,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step_count += 1;
    let k = state.step_count as i32;
    let bias1 = 1.0 - beta1.powi(k);
    let bias2 = 1.0 - beta2.powi(k);
    let grads = grads.tensors();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads).zip(ms).zip(vs) {
        let it = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut());
        for (((theta, &g), m), v) in it {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *theta -= alpha * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Affine;
    use proptest::prelude::*;

    fn scalar(x: f64) -> Affine {
        let mut a = Affine::zeros(1, 1);
        a.weight.data_mut()[0] = x;
        a
    }

    /// Plain scalar Adam written out independently.
    fn scalar_adam(x0: f64, grad: impl Fn(f64) -> f64, alpha: f64, steps: usize) -> Vec<f64> {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut x, mut m, mut v) = (x0, 0.0, 0.0);
        let mut out = Vec::new();
        for t in 1..=steps {
            let g = grad(x);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            x -= alpha * mh / (vh.sqrt() + eps);
            out.push(x);
        }
        out
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = scalar(1.5);
        let mut s = AdamState::new(&p, AdamConfig::default()).unwrap();
        adam_step(&mut p, &scalar(0.0), &mut s).unwrap();
        assert_eq!(p.weight.data()[0], 1.5);
        assert_eq!(s.v.weight.data()[0], 0.0);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_alpha() {
        for g in [-3.0, 0.01, 250.0] {
            let mut p = scalar(0.0);
            let mut s = AdamState::new(&p, AdamConfig::with_alpha(0.05)).unwrap();
            adam_step(&mut p, &scalar(g), &mut s).unwrap();
            let step = p.weight.data()[0];
            assert!((step + 0.05 * f64::signum(g)).abs() <= 0.05 * 1e-8 / g.abs() + 1e-15);
        }
    }

    #[test]
    fn matches_scalar_oracle_on_quadratic() {
        let mut p = scalar(1.0);
        let mut s = AdamState::new(&p, AdamConfig::with_alpha(0.1)).unwrap();
        let expected = scalar_adam(1.0, |x| 2.0 * x, 0.1, 3);
        for want in expected {
            let x = p.weight.data()[0];
            adam_step(&mut p, &scalar(2.0 * x), &mut s).unwrap();
            assert!((p.weight.data()[0] - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = scalar(1.0);
        let mut s = AdamState::new(&p, AdamConfig::default()).unwrap();
        assert!(matches!(
            adam_step(&mut p, &Affine::zeros(2, 1), &mut s),
            Err(Error::Contract(_))
        ));
    }

    proptest! {
        #[test]
        fn update_is_bounded(grads in prop::collection::vec(-1e3f64..1e3, 1..40), alpha in 1e-4f64..1.0) {
            let mut p = scalar(0.0);
            let mut s = AdamState::new(&p, AdamConfig::with_alpha(alpha)).unwrap();
            let bound = alpha / (1.0 - s.config.beta1) + 1e-12;
            for g in grads {
                let before = p.weight.data()[0];
                adam_step(&mut p, &scalar(g), &mut s).unwrap();
                prop_assert!((p.weight.data()[0] - before).abs() <= bound);
                prop_assert!(s.v.weight.data()[0] >= 0.0);
            }
        }

        #[test]
        fn first_step_direction_is_scale_free(
            g in prop::collection::vec(-10.0f64..10.0, 4),
            scale in 1e-3f64..1e3,
        ) {
            let mut a = Affine::zeros(4, 1);
            let mut ga = Affine::zeros(4, 1);
            ga.weight.data_mut().copy_from_slice(&g);
            let mut gb = ga.clone();
            gb.weight.data_mut().iter_mut().for_each(|v| *v *= scale);
            let mut b = a.clone();
            let mut sa = AdamState::new(&a, AdamConfig::default()).unwrap();
            let mut sb = AdamState::new(&b, AdamConfig::default()).unwrap();
            adam_step(&mut a, &ga, &mut sa).unwrap();
            adam_step(&mut b, &gb, &mut sb).unwrap();
            for (x, y) in a.weight.data().iter().zip(b.weight.data()) {
                prop_assert_eq!(x.signum(), y.signum());
            }
        }
    }
}
