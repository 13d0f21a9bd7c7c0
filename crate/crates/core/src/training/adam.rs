use crate::error::{Error, Result};
use crate::vbll::VBLinearLayer;

use super::LayerGradients;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamMoments {
    pub fn zeros(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One bias-corrected Adam update; `step` counts from 1.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamMoments,
    step: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len()
    {
        return Err(Error::Dimension(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if step == 0 {
        return Err(Error::invalid("adam", "step index starts at 1"));
    }
    let t = i32::try_from(step).unwrap_or(i32::MAX);
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// Adam over the four parameter blocks of a layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    cfg: AdamConfig,
    moments: [AdamMoments; 4],
    step: u64,
}

impl Adam {
    pub fn new(layer: &VBLinearLayer, cfg: AdamConfig) -> Self {
        let w = layer.weight_mu.len();
        let b = layer.bias_mu.len();
        Self {
            cfg,
            moments: [
                AdamMoments::zeros(w),
                AdamMoments::zeros(w),
                AdamMoments::zeros(b),
                AdamMoments::zeros(b),
            ],
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, layer: &mut VBLinearLayer, grads: &LayerGradients) -> Result<()> {
        self.step += 1;
        for ((params, g), state) in layer
            .param_slices_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(self.moments.iter_mut())
        {
            adam_step(params, g, state, self.step, &self.cfg)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0, 3.5];
        let orig = p.clone();
        let mut st = AdamMoments::zeros(3);
        for t in 1..=10 {
            adam_step(&mut p, &[0.0; 3], &mut st, t, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p, orig);
    }

    #[test]
    fn constant_gradient_step_approaches_lr() {
        let cfg = AdamConfig::default();
        let mut p = vec![0.0, 0.0];
        let g = [0.37, -4.2];
        let mut st = AdamMoments::zeros(2);
        let mut prev = p.clone();
        for t in 1..=10_000 {
            prev.copy_from_slice(&p);
            adam_step(&mut p, &g, &mut st, t, &cfg).unwrap();
        }
        for i in 0..2 {
            let step = p[i] - prev[i];
            let expect = -cfg.learning_rate * g[i].signum();
            assert!(
                ((step - expect) / expect).abs() < 0.01,
                "{step} vs {expect}"
            );
        }
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let run = || {
            let mut p = vec![0.5; 4];
            let mut st = AdamMoments::zeros(4);
            for t in 1..=50 {
                let g: Vec<f64> = p.iter().map(|x| 2.0 * x - 0.1 * t as f64).collect();
                adam_step(&mut p, &g, &mut st, t, &AdamConfig::default()).unwrap();
            }
            (p, st)
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(sa, sb);
        let mut st = AdamMoments::zeros(2);
        assert!(adam_step(&mut [0.0; 3], &[0.0; 3], &mut st, 1, &AdamConfig::default()).is_err());
    }
}
