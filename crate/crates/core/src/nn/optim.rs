//! AdamW with decoupled weight decay, plus the f32-grid quantization shared
//! by initializers and state updates.

use std::collections::BTreeMap;

/// Rounds a value to the nearest f32. Parameters live on the f32 grid so
/// float32 checkpoints round-trip exactly.
#[inline]
pub fn quantize_f32(x: f64) -> f64 {
    x as f32 as f64
}

pub fn quantize_slice(values: &mut [f64]) {
    for v in values {
        *v = quantize_f32(*v);
    }
}

/// A named view over one parameter tensor and its gradient buffer.
pub struct ParamMut<'a> {
    pub name: &'a str,
    pub value: &'a mut [f64],
    pub grad: &'a mut [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 2e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// AdamW: bias-corrected moments, weight decay applied directly to the
/// weights rather than through the gradients.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamWConfig,
    step: u64,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl AdamW {
    pub fn new(config: AdamWConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update to every parameter and leaves the gradients
    /// untouched (callers zero them per batch).
    pub fn step(&mut self, params: &mut [ParamMut<'_>]) {
        self.step += 1;
        let t = self.step as i32;
        let c = self.config;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        for p in params {
            let (m, v) = self
                .moments
                .entry(p.name.to_string())
                .or_insert_with(|| (vec![0.0; p.value.len()], vec![0.0; p.value.len()]));
            assert_eq!(m.len(), p.value.len(), "parameter {} changed size", p.name);
            for i in 0..p.value.len() {
                let g = p.grad[i];
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                let mut w = p.value[i] * (1.0 - c.lr * c.weight_decay);
                w -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
                p.value[i] = quantize_f32(w);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_step(value: &mut [f64], grad: &mut [f64], opt: &mut AdamW) {
        let mut params = [ParamMut { name: "w", value, grad }];
        opt.step(&mut params);
    }

    #[test]
    fn zero_gradient_applies_pure_decay() {
        let cfg = AdamWConfig::default();
        let mut opt = AdamW::new(cfg);
        let mut w = [0.5f64, -0.25];
        let mut g = [0.0f64, 0.0];
        run_step(&mut w, &mut g, &mut opt);
        assert_eq!(w[0], quantize_f32(0.5 * (1.0 - cfg.lr * cfg.weight_decay)));
        assert_eq!(w[1], quantize_f32(-0.25 * (1.0 - cfg.lr * cfg.weight_decay)));
    }

    #[test]
    fn first_step_magnitude_is_about_lr() {
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..AdamWConfig::default()
        };
        let mut opt = AdamW::new(cfg);
        let mut w = [0.0f64];
        let mut g = [3.7f64];
        run_step(&mut w, &mut g, &mut opt);
        // bias-corrected first step: m_hat = g, v_hat = g^2
        assert!((w[0].abs() - cfg.lr).abs() < 1e-8, "step {}", w[0]);
        assert!(w[0] < 0.0);
    }

    #[test]
    fn same_inputs_give_bit_identical_trajectories() {
        let cfg = AdamWConfig::default();
        let grads = [0.3f64, -1.2, 0.05, 0.0, 2.4];
        let mut run = || {
            let mut opt = AdamW::new(cfg);
            let mut w = [0.1f64];
            for g in grads {
                let mut gbuf = [g];
                run_step(&mut w, &mut gbuf, &mut opt);
            }
            w[0]
        };
        let a = run();
        let b = run();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn parameters_stay_on_f32_grid() {
        let mut opt = AdamW::new(AdamWConfig::default());
        let mut w = [0.1f64, 0.7];
        let mut g = [0.01f64, -0.4];
        for _ in 0..10 {
            run_step(&mut w, &mut g, &mut opt);
        }
        for v in w {
            assert_eq!(v, quantize_f32(v));
        }
    }
}
