use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights and biases of a fully-connected network.
///
/// Hidden layers use tanh, the output layer is linear. Weight matrices are
/// stored row-major as `(dims[k+1] x dims[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Per-parameter gradients, same shapes as [`MlpParams`].
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, c: f64) {
        for w in &mut self.weights {
            for x in w {
                *x *= c;
            }
        }
        for b in &mut self.biases {
            for x in b {
                *x *= c;
            }
        }
    }

    pub fn add(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

impl MlpParams {
    /// All-zero network with the given layer dimensions.
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::Shape(format!("bad layer dims {layer_dims:?}")));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for k in 0..layer_dims.len() - 1 {
            weights.push(vec![0.0; layer_dims[k + 1] * layer_dims[k]]);
            biases.push(vec![0.0; layer_dims[k + 1]]);
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
        })
    }

    /// Glorot-uniform initialized network, biases zero.
    pub fn glorot<R: Rng>(layer_dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(layer_dims)?;
        for k in 0..layer_dims.len() - 1 {
            let bound = (6.0 / (layer_dims[k] + layer_dims[k + 1]) as f64).sqrt();
            for w in &mut p.weights[k] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(p)
    }

    /// Default actor/critic topology: two hidden layers, the first fixed
    /// at 32 units.
    pub fn default_policy_dims(input: usize, output: usize) -> Vec<usize> {
        vec![input, 32, 32, output]
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input length {} != {}",
                input.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Forward pass: tanh hidden activations, linear output layer.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut a = input.to_vec();
        let n_layers = self.weights.len();
        for k in 0..n_layers {
            let mut z = self.affine(k, &a);
            if k + 1 < n_layers {
                for x in &mut z {
                    *x = x.tanh();
                }
            }
            a = z;
        }
        Ok(a)
    }

    /// Forward pass keeping every post-activation; needed by [`Self::backward`].
    fn forward_cached(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(input)?;
        let n_layers = self.weights.len();
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(input.to_vec());
        for k in 0..n_layers {
            let mut z = self.affine(k, acts.last().unwrap());
            if k + 1 < n_layers {
                for x in &mut z {
                    *x = x.tanh();
                }
            }
            acts.push(z);
        }
        Ok(acts)
    }

    fn affine(&self, layer: usize, a: &[f64]) -> Vec<f64> {
        let n_in = self.layer_dims[layer];
        let n_out = self.layer_dims[layer + 1];
        let w = &self.weights[layer];
        let b = &self.biases[layer];
        let mut z = vec![0.0; n_out];
        for i in 0..n_out {
            let row = &w[i * n_in..(i + 1) * n_in];
            let mut acc = b[i];
            for (wv, av) in row.iter().zip(a) {
                acc += wv * av;
            }
            z[i] = acc;
        }
        z
    }

    /// Gradients of `upstream . forward(input)` with respect to every
    /// weight and bias.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<MlpGrads> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Shape(format!(
                "upstream length {} != {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let acts = self.forward_cached(input)?;
        let mut grads = MlpGrads::zeros_like(self);
        let n_layers = self.weights.len();
        // delta starts at the linear output layer and walks backwards.
        let mut delta = upstream.to_vec();
        for k in (0..n_layers).rev() {
            let n_in = self.layer_dims[k];
            let n_out = self.layer_dims[k + 1];
            let a_in = &acts[k];
            for i in 0..n_out {
                let gw = &mut grads.weights[k][i * n_in..(i + 1) * n_in];
                for (g, av) in gw.iter_mut().zip(a_in) {
                    *g += delta[i] * av;
                }
                grads.biases[k][i] += delta[i];
            }
            if k > 0 {
                let w = &self.weights[k];
                let mut prev = vec![0.0; n_in];
                for i in 0..n_out {
                    let row = &w[i * n_in..(i + 1) * n_in];
                    for (p, wv) in prev.iter_mut().zip(row) {
                        *p += delta[i] * wv;
                    }
                }
                // tanh' = 1 - a^2 on the post-activation of layer k-1's output.
                for (p, av) in prev.iter_mut().zip(a_in) {
                    *p *= 1.0 - av * av;
                }
                delta = prev;
            }
        }
        Ok(grads)
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Shape(format!(
                "flat length {} != {}",
                flat.len(),
                self.n_params()
            )));
        }
        let mut idx = 0;
        for k in 0..self.weights.len() {
            let wl = self.weights[k].len();
            self.weights[k].copy_from_slice(&flat[idx..idx + wl]);
            idx += wl;
            let bl = self.biases[k].len();
            self.biases[k].copy_from_slice(&flat[idx..idx + bl]);
            idx += bl;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ones_1111() -> MlpParams {
        let mut p = MlpParams::zeros(&[1, 1, 1, 1]).unwrap();
        for w in &mut p.weights {
            w[0] = 1.0;
        }
        p
    }

    #[test]
    fn zero_network_maps_to_zero() {
        let p = MlpParams::zeros(&[3, 32, 32, 2]).unwrap();
        let out = p.forward(&[0.3, -0.7, 1.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn odd_function_fixed_point() {
        let p = ones_1111();
        let out = p.forward(&[0.0]).unwrap();
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn hand_evaluated_forward() {
        let p = ones_1111();
        let out = p.forward(&[1.0]).unwrap();
        let expected = 1.0f64.tanh().tanh();
        assert!((out[0] - expected).abs() < 1e-12);
        assert!((out[0] - 0.64201).abs() < 1e-4);
    }

    #[test]
    fn input_shape_error() {
        let p = MlpParams::zeros(&[2, 4, 4, 1]).unwrap();
        assert!(p.forward(&[1.0]).is_err());
        assert!(p.backward(&[1.0, 2.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = MlpParams::glorot(&[3, 4, 4, 2], &mut rng).unwrap();
        let g = p.backward(&[0.1, 0.2, 0.3], &[0.0, 0.0]).unwrap();
        assert!(g.flatten().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_linear_neuron_gradient_is_input() {
        // One affine layer, no tanh: d(out)/dw = x.
        let p = MlpParams::zeros(&[1, 1]).unwrap();
        let g = p.backward(&[2.5], &[1.0]).unwrap();
        assert_eq!(g.weights[0][0], 2.5);
        assert_eq!(g.biases[0][0], 1.0);
    }

    /// Central finite differences of `upstream . forward` per parameter.
    pub(crate) fn fd_grads(p: &MlpParams, input: &[f64], upstream: &[f64], h: f64) -> Vec<f64> {
        let flat = p.flatten();
        let mut out = Vec::with_capacity(flat.len());
        let mut work = p.clone();
        for i in 0..flat.len() {
            let mut plus = flat.clone();
            plus[i] += h;
            work.assign_flat(&plus).unwrap();
            let fp: f64 = work
                .forward(input)
                .unwrap()
                .iter()
                .zip(upstream)
                .map(|(o, u)| o * u)
                .sum();
            let mut minus = flat.clone();
            minus[i] -= h;
            work.assign_flat(&minus).unwrap();
            let fm: f64 = work
                .forward(input)
                .unwrap()
                .iter()
                .zip(upstream)
                .map(|(o, u)| o * u)
                .sum();
            out.push((fp - fm) / (2.0 * h));
        }
        out
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = MlpParams::glorot(&[3, 5, 4, 2], &mut rng).unwrap();
            let input: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let upstream: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let analytic = p.backward(&input, &upstream).unwrap().flatten();
            let numeric = fd_grads(&p, &input, &upstream, 1e-5);
            for (a, n) in analytic.iter().zip(&numeric) {
                let denom = a.abs().max(n.abs()).max(1e-8);
                assert!(
                    ((a - n).abs() / denom) < 1e-4,
                    "analytic {a} vs numeric {n}"
                );
            }
        }
    }

    #[test]
    fn flatten_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = MlpParams::glorot(&[2, 32, 32, 2], &mut rng).unwrap();
        let mut q = MlpParams::zeros(&[2, 32, 32, 2]).unwrap();
        q.assign_flat(&p.flatten()).unwrap();
        assert_eq!(p, q);
    }
}
