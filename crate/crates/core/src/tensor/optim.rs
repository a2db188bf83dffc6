use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        AdamState {
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape {
            op: "adam_step",
            detail: format!("{} params, {} grads, {} state slots", params.len(), grads.len(), state.m.len()),
        });
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.m[i].len() != p.len() {
            return Err(Error::Shape {
                op: "adam_step",
                detail: format!("parameter {i}: {:?} vs gradient {:?}", p.shape(), g.shape()),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            let mhat = m[j] / c1;
            let vhat = v[j] / c2;
            *w -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut params = vec![Tensor::new(&[2], vec![1.0, -3.0]).unwrap()];
        let mut state = AdamState::new(&params);
        state.m[0] = vec![0.5, -0.5];
        state.v[0] = vec![0.25, 0.25];
        let cfg = AdamConfig::default();
        let frozen = AdamConfig { lr: 0.0, ..cfg };
        adam_step(&mut params, &[Tensor::zeros(&[2])], &mut state, &frozen).unwrap();
        assert_eq!(params[0].data(), &[1.0, -3.0]);
        assert_eq!(state.m[0], vec![0.45, -0.45]);
        assert!((state.v[0][0] - 0.25 * 0.999).abs() < 1e-15);

        let mut fresh = vec![Tensor::new(&[2], vec![1.0, -3.0]).unwrap()];
        let mut s = AdamState::new(&fresh);
        adam_step(&mut fresh, &[Tensor::zeros(&[2])], &mut s, &cfg).unwrap();
        assert_eq!(fresh[0].data(), &[1.0, -3.0]);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let cfg = AdamConfig::default();
        let g = [0.7, -2.0, 1e-3];
        let mut params = vec![Tensor::zeros(&[3])];
        let mut state = AdamState::new(&params);
        adam_step(&mut params, &[Tensor::new(&[3], g.to_vec()).unwrap()], &mut state, &cfg).unwrap();
        for (p, gi) in params[0].data().iter().zip(g) {
            let want = -cfg.lr * gi / (gi.abs() + cfg.eps);
            assert!((p - want).abs() < 1e-15, "{p} vs {want}");
        }
    }

    #[test]
    fn quadratic_bowl_descends() {
        let cfg = AdamConfig { lr: 0.01, ..AdamConfig::default() };
        let mut params = vec![Tensor::new(&[2], vec![3.0, -2.0]).unwrap()];
        let mut state = AdamState::new(&params);
        let loss = |p: &Tensor| p.data().iter().map(|x| x * x).sum::<f64>();
        let mut history = Vec::new();
        for _ in 0..100 {
            history.push(loss(&params[0]));
            let grad = Tensor::new(&[2], params[0].data().iter().map(|x| 2.0 * x).collect()).unwrap();
            adam_step(&mut params, &[grad], &mut state, &cfg).unwrap();
        }
        for w in history[5..].windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut params = vec![Tensor::zeros(&[2])];
        let mut state = AdamState::new(&params);
        assert!(adam_step(&mut params, &[Tensor::zeros(&[3])], &mut state, &AdamConfig::default()).is_err());
    }
}
