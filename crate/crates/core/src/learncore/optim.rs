use super::mlp::{Grads, Mlp};
use crate::error::{Error, Result};

/// Rescales `grads` in place so that its global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut Grads, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Adam optimiser state for one network.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: Option<f64>,
    m: Grads,
    v: Grads,
    t: u32,
}

impl Adam {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: None,
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
            t: 0,
        }
    }

    pub fn with_clip(mut self, clip_norm: Option<f64>) -> Self {
        self.clip_norm = clip_norm;
        self
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Grads) -> Result<()> {
        if grads.layers.len() != net.layers().len()
            || grads.layers.iter().zip(net.layers()).any(|(g, l)| g.weights.len() != l.weights.len() || g.biases.len() != l.biases.len())
        {
            return Err(Error::Shape("gradient layout differs from network".into()));
        }
        let mut g = grads.clone();
        if let Some(c) = self.clip_norm {
            clip_grad_norm(&mut g, c);
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let lr = self.learning_rate;
        let eps = self.eps;
        for (((p, g), m), v) in net.params_mut().zip(g.values()).zip(self.m.values_mut()).zip(self.v.values_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
        if !net.is_finite() {
            return Err(Error::Numeric("parameters became non-finite".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learncore::{loss_and_grad, Objective};
    use crate::rng::stream;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut net = Mlp::new(&[3, 4, 2], 1.0, &mut stream(2, &[])).unwrap();
        let before = net.clone();
        let mut opt = Adam::new(&net, 0.01);
        opt.step(&mut net, &Grads::zeros_like(&before)).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn clipping_scales_to_max_norm() {
        let net = Mlp::zeros(&[1, 2]).unwrap();
        let mut g = Grads::zeros_like(&net);
        // weights (6, 8) give norm 10
        g.layers[0].weights = vec![6.0, 8.0];
        let before = clip_grad_norm(&mut g, 1.0);
        assert!((before - 10.0).abs() < 1e-12);
        assert!((g.norm() - 1.0).abs() < 1e-12);
        assert!((g.layers[0].weights[0] - 0.6).abs() < 1e-12);

        let mut small = Grads::zeros_like(&net);
        small.layers[0].weights = vec![0.3, 0.4];
        clip_grad_norm(&mut small, 1.0);
        assert_eq!(small.layers[0].weights, vec![0.3, 0.4]);
    }

    #[test]
    fn first_step_moves_each_parameter_by_learning_rate() {
        let mut net = Mlp::zeros(&[1, 1]).unwrap();
        let mut g = Grads::zeros_like(&net);
        g.layers[0].weights[0] = 3.0;
        g.layers[0].biases[0] = -0.5;
        let mut opt = Adam::new(&net, 0.1);
        opt.step(&mut net, &g).unwrap();
        assert!((net.layers()[0].weights[0] + 0.1).abs() < 1e-6);
        assert!((net.layers()[0].biases[0] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn adam_fits_a_line() {
        let mut net = Mlp::zeros(&[1, 1]).unwrap();
        let inputs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| vec![2.0 * x[0] - 0.5]).collect();
        let mut opt = Adam::new(&net, 0.05);
        for _ in 0..2000 {
            let (_, g) = loss_and_grad(&net, &Objective::Mse { inputs: &inputs, targets: &targets }).unwrap();
            opt.step(&mut net, &g).unwrap();
        }
        assert!((net.layers()[0].weights[0] - 2.0).abs() < 1e-2);
        assert!((net.layers()[0].biases[0] + 0.5).abs() < 1e-2);
    }
}
