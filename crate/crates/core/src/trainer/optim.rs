use super::config::AdamConfig;

/// Linear warmup to the peak rate, then linear decay to zero at
/// `total_steps`. `step` counts completed updates.
pub fn linear_schedule(peak: f64, step: usize, warmup: usize, total_steps: usize) -> f64 {
    if step < warmup {
        return peak * step as f64 / warmup as f64;
    }
    if total_steps <= warmup {
        return peak;
    }
    peak * ((total_steps - step.min(total_steps)) as f64 / (total_steps - warmup) as f64).max(0.0)
}

/// AdamW with decoupled weight decay over one flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamW {
    cfg: AdamConfig,
    weight_decay: f64,
    decay_mask: Vec<bool>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    /// `bias_mask[i]` exempts parameter `i` from weight decay.
    pub fn new(cfg: AdamConfig, weight_decay: f64, bias_mask: Vec<bool>) -> Self {
        let n = bias_mask.len();
        Self {
            cfg,
            weight_decay,
            decay_mask: bias_mask.into_iter().map(|b| !b).collect(),
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f32], grads: &[f32], lr: f64) {
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i] as f64;
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            let mut p = params[i] as f64;
            if self.decay_mask[i] {
                p -= lr * self.weight_decay * p;
            }
            p -= lr * mhat / (vhat.sqrt() + eps);
            params[i] = p as f32;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shape() {
        assert_eq!(linear_schedule(1.0, 0, 0, 10), 1.0);
        assert_eq!(linear_schedule(1.0, 5, 0, 10), 0.5);
        assert_eq!(linear_schedule(1.0, 0, 4, 12), 0.0);
        assert_eq!(linear_schedule(1.0, 2, 4, 12), 0.5);
        assert_eq!(linear_schedule(1.0, 4, 4, 12), 1.0);
        assert_eq!(linear_schedule(1.0, 8, 4, 12), 0.5);
        assert_eq!(linear_schedule(1.0, 20, 4, 12), 0.0);
        // warmup longer than the run: still warming at the end
        assert!((linear_schedule(1.0, 10, 500, 20) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn adamw_minimizes_quadratic_and_skips_bias_decay() {
        let mut p = vec![3.0f32, -2.0];
        let mut opt = AdamW::new(AdamConfig::default(), 0.0, vec![false, true]);
        for _ in 0..2000 {
            let g: Vec<f32> = p.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut p, &g, 0.05);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-2), "{p:?}");

        let mut q = vec![1.0f32, 1.0];
        let mut decay = AdamW::new(AdamConfig::default(), 0.5, vec![false, true]);
        decay.step(&mut q, &[0.0, 0.0], 0.1);
        assert!((q[0] - 0.95).abs() < 1e-6);
        assert_eq!(q[1], 1.0);
    }
}
