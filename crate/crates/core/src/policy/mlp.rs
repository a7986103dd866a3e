//! Fully-connected tanh network with a linear output layer and hand-written
//! reverse-mode gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform weights with standard deviation `gain / sqrt(inputs)`, zero bias.
    pub fn random<R: Rng + ?Sized>(inputs: usize, outputs: usize, gain: f64, rng: &mut R) -> Self {
        let half_width = gain * (3.0 / inputs as f64).sqrt();
        let weight = (0..inputs * outputs)
            .map(|_| half_width * (2.0 * rng.gen::<f64>() - 1.0))
            .collect();
        Dense { inputs, outputs, weight, bias: vec![0.0; outputs] }
    }

    fn row(&self, o: usize) -> &[f64] {
        &self.weight[o * self.inputs..(o + 1) * self.inputs]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Layer activations of a batched forward pass; `activations[0]` is the
/// input and the last entry is the linear output.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub batch: usize,
    pub activations: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache holds the input")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four partial sums let the compiler vectorize; the order is fixed
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl Mlp {
    /// `sizes = [in, h1, ..., out]`; hidden layers get gain 1, the output
    /// layer gets `output_gain`.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Self {
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| Dense::random(w[0], w[1], if l == last { output_gain } else { 1.0 }, rng))
            .collect();
        Mlp { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn forward(&self, input: &[f64], batch: usize) -> MlpCache {
        debug_assert_eq!(input.len(), batch * self.input_dim());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let prev = &activations[l];
            let mut out = Vec::with_capacity(batch * layer.outputs);
            for b in 0..batch {
                let x = &prev[b * layer.inputs..(b + 1) * layer.inputs];
                for o in 0..layer.outputs {
                    let z = dot(layer.row(o), x) + layer.bias[o];
                    out.push(if l == last { z } else { z.tanh() });
                }
            }
            activations.push(out);
        }
        MlpCache { batch, activations }
    }

    /// Gradients of a scalar loss with respect to every weight and bias, given
    /// `d_output = dL/d(output)` for the batch in `cache`.
    pub fn backward(&self, cache: &MlpCache, d_output: &[f64]) -> Mlp {
        let batch = cache.batch;
        let mut grads = self.zeros_like();
        let mut delta = d_output.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.activations[l];
            let g = &mut grads.layers[l];
            let mut d_input = vec![0.0; batch * layer.inputs];
            for b in 0..batch {
                let x = &input[b * layer.inputs..(b + 1) * layer.inputs];
                let dx = &mut d_input[b * layer.inputs..(b + 1) * layer.inputs];
                for o in 0..layer.outputs {
                    let d = delta[b * layer.outputs + o];
                    if d == 0.0 {
                        continue;
                    }
                    g.bias[o] += d;
                    axpy(d, x, &mut g.weight[o * layer.inputs..(o + 1) * layer.inputs]);
                    axpy(d, layer.row(o), dx);
                }
            }
            if l > 0 {
                // input of layer l is tanh output of layer l-1
                for (dx, a) in d_input.iter_mut().zip(input) {
                    *dx *= 1.0 - a * a;
                }
            }
            delta = d_input;
        }
        grads
    }
}
