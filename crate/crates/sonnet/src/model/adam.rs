//! Optimizers that drive any [`BiteModel`] through its parameter visitor.

use super::BiteModel;

/// Adam with bias correction. Moment buffers are allocated lazily on the
/// first step, keyed by visitation order, so the model's parameter layout
/// must stay fixed for the optimizer's lifetime.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn step(&mut self, model: &mut dyn BiteModel) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (lr, b1, b2, eps) = (self.lr, self.beta1, self.beta2, self.eps);
        let (m_all, v_all) = (&mut self.m, &mut self.v);
        let mut slot = 0usize;
        model.visit_params(&mut |p, g| {
            if slot == m_all.len() {
                m_all.push(vec![0.0; p.len()]);
                v_all.push(vec![0.0; p.len()]);
            }
            let (m, v) = (&mut m_all[slot], &mut v_all[slot]);
            assert_eq!(m.len(), p.len(), "parameter layout changed under the optimizer");
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
            }
            slot += 1;
        });
    }
}

/// Plain gradient descent.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
}

impl Sgd {
    pub fn new(lr: f64) -> Self {
        Sgd { lr }
    }

    pub fn step(&mut self, model: &mut dyn BiteModel) {
        let lr = self.lr;
        model.visit_params(&mut |p, g| {
            for i in 0..p.len() {
                p[i] -= lr * g[i];
            }
        });
    }
}

/// The optimizer choices the trainer knows how to drive.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam(Adam),
    Sgd(Sgd),
}

impl Optimizer {
    pub fn step(&mut self, model: &mut dyn BiteModel) {
        match self {
            Optimizer::Adam(o) => o.step(model),
            Optimizer::Sgd(o) => o.step(model),
        }
    }
}
