use crate::error::{Error, Result};

use super::scalar::Scalar;
use super::tensor::Tensor;

pub const DEFAULT_LR: f64 = 4e-4;

/// Adam moments and step counter for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Tensor<F>>,
    v: Vec<Tensor<F>>,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(params: &[Tensor<F>], lr: f64) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn first_moments(&self) -> &[Tensor<F>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor<F>] {
        &self.v
    }

    /// One bias-corrected Adam update:
    /// `p -= lr / (1 - b1^t) * m / (sqrt(v) / sqrt(1 - b2^t) + eps)`.
    pub fn step(&mut self, params: &mut [Tensor<F>], grads: &[Tensor<F>]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::Shape {
                context: "adam parameter list",
                expected: vec![self.m.len()],
                got: vec![params.len(), grads.len()],
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Shape {
                    context: "adam tensor",
                    expected: p.shape().to_vec(),
                    got: g.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let step_size = F::lit(self.lr / (1.0 - self.beta1.powi(t)));
        let bc2_sqrt = F::lit((1.0 - self.beta2.powi(t)).sqrt());
        let (b1, b2, eps) = (F::lit(self.beta1), F::lit(self.beta2), F::lit(self.eps));
        let (one_b1, one_b2) = (F::one() - b1, F::one() - b2);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = b1 * *mv + one_b1 * gv;
                *vv = b2 * *vv + one_b2 * gv * gv;
                *pv -= step_size * *mv / (vv.sqrt() / bc2_sqrt + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        for g in [1e-3, 0.5, -2.0, 37.0] {
            let mut p = vec![Tensor::from_vec(&[2], vec![1.0f64, -1.0]).unwrap()];
            let grads = vec![Tensor::from_vec(&[2], vec![g, g]).unwrap()];
            let mut st = AdamState::new(&p, DEFAULT_LR);
            st.step(&mut p, &grads).unwrap();
            assert_eq!(st.step, 1);
            let upd = p[0].data()[0] - 1.0;
            let lr = DEFAULT_LR;
            let lo = 0.999 * lr * g.abs() / (g.abs() + 1e-8);
            assert!(upd.signum() == -g.signum());
            assert!(upd.abs() >= lo && upd.abs() <= lr + 1e-18, "g={g} upd={upd}");
        }
    }

    #[test]
    fn zero_gradient_is_a_noop() {
        let mut p = vec![Tensor::from_vec(&[3], vec![0.3f64, -0.1, 2.0]).unwrap()];
        let before = p.clone();
        let mut st = AdamState::new(&p, DEFAULT_LR);
        st.step(&mut p, &[Tensor::zeros(&[3])]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = vec![Tensor::<f32>::zeros(&[3])];
        let mut st = AdamState::new(&p, DEFAULT_LR);
        assert!(st.step(&mut p, &[Tensor::zeros(&[4])]).is_err());
        assert_eq!(st.step, 0);
    }

    /// Scalar re-derivation of the update rule used as the oracle.
    fn simulate_quadratic(steps: usize, lr: f64) -> Vec<f64> {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let mut w = [1.0f64, 1.0];
        let (mut m, mut v) = ([0.0f64; 2], [0.0f64; 2]);
        let mut norms = Vec::new();
        for t in 1..=steps {
            for i in 0..2 {
                let g = 2.0 * w[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let mh = m[i] / (1.0 - b1.powi(t as i32));
                let vh = v[i] / (1.0 - b2.powi(t as i32));
                w[i] -= lr * mh / (vh.sqrt() + eps);
            }
            norms.push((w[0] * w[0] + w[1] * w[1]).sqrt());
        }
        norms
    }

    #[test]
    fn quadratic_descent_matches_scalar_simulation() {
        // The declared lr of 4e-4 cannot shrink |w| from sqrt(2) below 0.5 in 200
        // steps (each step moves at most lr per coordinate), so the descent
        // property is exercised at lr = 1e-2 and the update rule itself is checked
        // against the scalar oracle at both rates.
        for lr in [DEFAULT_LR, 1e-2] {
            let oracle = simulate_quadratic(200, lr);
            let mut p = vec![Tensor::from_vec(&[2], vec![1.0f64, 1.0]).unwrap()];
            let mut st = AdamState::new(&p, lr);
            for (i, want) in oracle.iter().enumerate() {
                let g = Tensor::from_vec(&[2], p[0].data().iter().map(|w| 2.0 * w).collect()).unwrap();
                st.step(&mut p, &[g]).unwrap();
                let norm = p[0].data().iter().map(|w| w * w).sum::<f64>().sqrt();
                assert!((norm - want).abs() < 1e-12, "lr={lr} step {i}");
            }
        }
        let norms = simulate_quadratic(200, 1e-2);
        assert!(norms.windows(2).skip(5).all(|w| w[1] < w[0]));
        assert!(*norms.last().unwrap() < 0.5);
    }
}
