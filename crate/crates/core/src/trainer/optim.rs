//! AdamW with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::head::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamW {
    pub fn new(params: &ModelParams<f64>) -> Self {
        let n = params.num_parameters();
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        }
    }

    /// One update. Weight decay is applied to every tensor except the log
    /// noise variance.
    pub fn update(&mut self, params: &mut ModelParams<f64>, grad: &ModelParams<f64>, lr: f64, weight_decay: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powf(self.step as f64);
        let bc2 = 1.0 - self.beta2.powf(self.step as f64);
        let names = params.names();
        let mut offset = 0;
        for ((p, g), name) in params.slices_mut().into_iter().zip(grad.slices()).zip(names) {
            let decay = if name == "log_noise_var" { 0.0 } else { weight_decay };
            for (k, (x, &dx)) in p.iter_mut().zip(g).enumerate() {
                let m = &mut self.first_moment[offset + k];
                let v = &mut self.second_moment[offset + k];
                *m = self.beta1 * *m + (1.0 - self.beta1) * dx;
                *v = self.beta2 * *v + (1.0 - self.beta2) * dx * dx;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *x -= lr * decay * *x;
                *x -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            offset += p.len();
        }
    }
}
