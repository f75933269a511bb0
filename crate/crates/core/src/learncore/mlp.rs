use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Fully connected layer; `weights` is `outputs × inputs`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer { inputs, outputs, weights: vec![0.0; inputs * outputs], biases: vec![0.0; outputs] }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.biases.iter().enumerate().map(|(o, &b)| {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
}

/// Activations recorded by a forward pass; `acts[0]` is the input and
/// `acts[l]` the output of layer `l - 1` (after `tanh` for hidden layers).
#[derive(Clone, Debug)]
pub struct Trace {
    pub acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has an input")
    }
}

/// Gradients with the same layout as the network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub layers: Vec<Layer>,
}

impl Grads {
    pub fn zeros_like(m: &Mlp) -> Self {
        Grads { layers: m.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect() }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn norm(&self) -> f64 {
        self.values().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.values_mut().for_each(|g| *g *= s);
    }
}

impl Mlp {
    fn check_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(())
    }

    /// All-zero network.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::check_sizes(sizes)?;
        Ok(Mlp { sizes: sizes.to_vec(), layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect() })
    }

    /// Gaussian weights with standard deviation `scale · sqrt(2 / fan_in)`,
    /// zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], scale: f64, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(sizes)?;
        for l in &mut m.layers {
            let std = scale * (2.0 / l.inputs as f64).sqrt();
            for w in &mut l.weights {
                let z: f64 = StandardNormal.sample(rng);
                *w = std * z;
            }
        }
        Ok(m)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        let mut sizes = vec![layers[0].inputs];
        for (i, l) in layers.iter().enumerate() {
            if l.inputs != *sizes.last().unwrap() {
                return Err(Error::Shape(format!("layer {i} expects {} inputs, previous layer gives {}", l.inputs, sizes.last().unwrap())));
            }
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(Error::Shape(format!("layer {i} parameter count does not match {}x{}", l.outputs, l.inputs)));
            }
            sizes.push(l.outputs);
        }
        Self::check_sizes(&sizes)?;
        Ok(Mlp { sizes, layers })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_size() {
            return Err(Error::Shape(format!("network expects {} inputs, got {}", self.input_size(), x.len())));
        }
        Ok(())
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(l.outputs);
            l.affine(acts.last().unwrap(), &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        Ok(Trace { acts })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.acts.pop().unwrap())
    }

    /// Accumulates into `grads` the parameter gradients for the upstream
    /// gradient `d_out` of the network output.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grads: &mut Grads) {
        let mut delta = d_out.to_vec();
        for li in (0..self.layers.len()).rev() {
            let l = &self.layers[li];
            let input = &trace.acts[li];
            let g = &mut grads.layers[li];
            for o in 0..l.outputs {
                let d = delta[o];
                g.biases[o] += d;
                if d != 0.0 {
                    let row = &mut g.weights[o * l.inputs..(o + 1) * l.inputs];
                    for (w, x) in row.iter_mut().zip(input) {
                        *w += d * x;
                    }
                }
            }
            if li == 0 {
                break;
            }
            // back through this layer's weights and the previous tanh
            let mut prev = vec![0.0; l.inputs];
            for o in 0..l.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn zero_network_outputs_zero() {
        let m = Mlp::zeros(&[3, 4, 2]).unwrap();
        assert_eq!(m.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut m = Mlp::zeros(&[3, 3]).unwrap();
        for i in 0..3 {
            m.layers_mut()[0].weights[i * 3 + i] = 1.0;
        }
        assert_eq!(m.forward(&[0.25, -1.5, 3.0]).unwrap(), vec![0.25, -1.5, 3.0]);
    }

    #[test]
    fn forward_is_pure() {
        let m = Mlp::new(&[4, 8, 3], 1.0, &mut stream(1, &[])).unwrap();
        let x = [0.1, 0.2, -0.3, 0.9];
        assert_eq!(m.forward(&x).unwrap(), m.forward(&x).unwrap());
    }

    #[test]
    fn size_mismatch() {
        let m = Mlp::zeros(&[3, 2]).unwrap();
        assert!(matches!(m.forward(&[1.0]), Err(Error::Shape(_))));
        assert!(Mlp::zeros(&[3]).is_err());
        assert!(Mlp::zeros(&[3, 0, 2]).is_err());
    }
}
