use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tensor::Tensor;

use super::schedule::OptimizerConfig;

/// First and second moment estimates, one buffer per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub names: Vec<String>,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Completed steps.
    pub t: u64,
}

impl AdamState {
    pub fn new<I, S>(params: I) -> Self
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut s = Self {
            names: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        };
        for (name, n) in params {
            s.names.push(name.into());
            s.m.push(vec![0.0; n]);
            s.v.push(vec![0.0; n]);
        }
        s
    }

    pub fn for_params(params: &ModelParams) -> Self {
        Self::new(
            params
                .names()
                .iter()
                .zip(params.tensors())
                .map(|(n, t)| (n.clone(), t.numel())),
        )
    }
}

/// One bias-corrected Adam update:
/// `m <- b1 m + (1 - b1) g`, `v <- b2 v + (1 - b2) g^2`,
/// `p <- p - lr (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)`.
/// Weight decay, when set, first shrinks `p` by `lr * weight_decay * p`.
/// Nothing is modified if any gradient is non-finite.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Vec<f64>],
    state: &mut AdamState,
    lr: f64,
    cfg: &OptimizerConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid(format!(
            "{} parameters, {} gradients, {} optimizer slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.numel() != g.len() || state.m[i].len() != g.len() {
            return Err(Error::Shape {
                op: "adam_step",
                lhs: vec![p.numel()],
                rhs: vec![g.len()],
            });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient(state.names[i].clone()));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        for (j, x) in p.data_mut().iter_mut().enumerate() {
            let gj = g[j];
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            if cfg.weight_decay != 0.0 {
                *x -= lr * cfg.weight_decay * *x;
            }
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *x -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

/// Rescales all gradients together so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping. Non-finite norms are left
/// alone for [`adam_step`] to report.
pub fn clip_grad_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm.is_finite() && norm > max_norm {
        let scale = max_norm / norm;
        for x in grads.iter_mut().flat_map(|g| g.iter_mut()) {
            *x *= scale;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_state() -> AdamState {
        AdamState::new([("p", 1)])
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![Tensor::new([3], vec![1.0, -2.0, 0.5]).unwrap()];
        let before = p.clone();
        let mut st = AdamState::new([("w", 3)]);
        adam_step(&mut p, &[vec![0.0; 3]], &mut st, 1e-3, &OptimizerConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_by_hand() {
        let cfg = OptimizerConfig::default();
        for (p0, g, lr) in [(0.3, 0.5, 1e-3), (-1.0, -2e-3, 5e-4), (2.0, 7.0, 0.1)] {
            let mut p = vec![Tensor::new([1], vec![p0]).unwrap()];
            let mut st = scalar_state();
            adam_step(&mut p, &[vec![g]], &mut st, lr, &cfg).unwrap();
            // At t = 1 the bias corrections undo the (1 - beta) factors.
            let m_hat = (1.0 - 0.9) * g / (1.0 - 0.9);
            let v_hat = (1.0 - 0.98) * g * g / (1.0 - 0.98);
            let expected = p0 - lr * m_hat / (v_hat.sqrt() + 1e-6);
            assert!((p[0].data()[0] - expected).abs() < 1e-12);
            let approx = p0 - lr * g.signum();
            assert!((p[0].data()[0] - approx).abs() < lr * 1e-3);
        }
    }

    #[test]
    fn second_step_by_hand() {
        let cfg = OptimizerConfig::default();
        let mut p = vec![Tensor::new([1], vec![1.0]).unwrap()];
        let mut st = scalar_state();
        let (g1, g2, lr) = (0.2, -0.4, 0.01);
        adam_step(&mut p, &[vec![g1]], &mut st, lr, &cfg).unwrap();
        let after1 = p[0].data()[0];
        adam_step(&mut p, &[vec![g2]], &mut st, lr, &cfg).unwrap();
        let m = 0.9 * (0.1 * g1) + 0.1 * g2;
        let v = 0.98 * (0.02 * g1 * g1) + 0.02 * g2 * g2;
        let m_hat = m / (1.0 - 0.81);
        let v_hat = v / (1.0 - 0.98 * 0.98);
        let expected = after1 - lr * m_hat / (v_hat.sqrt() + 1e-6);
        assert!((p[0].data()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn identical_histories_identical_updates() {
        let mut p = vec![
            Tensor::new([2], vec![0.5, 0.5]).unwrap(),
            Tensor::new([1], vec![0.5]).unwrap(),
        ];
        let mut st = AdamState::new([("a", 2), ("b", 1)]);
        for g in [0.3, -0.1, 2.0] {
            adam_step(&mut p, &[vec![g, g], vec![g]], &mut st, 1e-2, &OptimizerConfig::default()).unwrap();
        }
        assert_eq!(p[0].data()[0], p[0].data()[1]);
        assert_eq!(p[0].data()[0], p[1].data()[0]);
    }

    #[test]
    fn update_is_bounded_by_lr() {
        let cfg = OptimizerConfig::default();
        for scale in [1e-8, 1.0, 1e8] {
            let mut p = vec![Tensor::new([1], vec![0.0]).unwrap()];
            let mut st = scalar_state();
            let mut prev = 0.0;
            for _ in 0..50 {
                adam_step(&mut p, &[vec![scale]], &mut st, 1e-3, &cfg).unwrap();
                let now = p[0].data()[0];
                assert!((prev - now) <= 1e-3 * (1.0 + 1e-9));
                prev = now;
            }
        }
    }

    #[test]
    fn non_finite_gradient_is_named() {
        let mut p = vec![Tensor::new([2], vec![1.0, 2.0]).unwrap()];
        let before = p.clone();
        let mut st = AdamState::new([("decoder.ffn", 2)]);
        match adam_step(&mut p, &[vec![0.1, f64::NAN]], &mut st, 1e-3, &OptimizerConfig::default()) {
            Err(Error::NonFiniteGradient(name)) => assert_eq!(name, "decoder.ffn"),
            other => panic!("{other:?}"),
        }
        assert_eq!(p, before);
        assert_eq!(st.t, 0);
    }

    #[test]
    fn clipping() {
        let mut g = vec![vec![3.0], vec![4.0]];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g[0][0] - 0.6).abs() < 1e-15 && (g[1][0] - 0.8).abs() < 1e-15);
        let mut small = vec![vec![0.1]];
        clip_grad_norm(&mut small, 1.0);
        assert_eq!(small[0][0], 0.1);
    }
}
