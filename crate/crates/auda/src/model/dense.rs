//! Dense layers and the two-layer final branch that maps an LSTM state or a
//! phase-wise feature vector to an embedding.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major out_dim x in_dim.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let lim = (6.0 / (in_dim + out_dim) as f64).sqrt();
        DenseLayer {
            in_dim,
            out_dim,
            weights: (0..out_dim * in_dim)
                .map(|_| rng.gen_range(-lim..=lim))
                .collect(),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut out = self.bias.clone();
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            for (w, xi) in row.iter().zip(x) {
                *o += w * xi;
            }
        }
        out
    }

    /// out = W^T dy, the gradient flowing back to this layer's input.
    pub(crate) fn backward_input(&self, dy: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.in_dim];
        for (r, d) in dy.iter().enumerate() {
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            for (k, w) in row.iter().enumerate() {
                dx[k] += w * d;
            }
        }
        dx
    }
}

/// Two tanh dense layers producing the embedding fed to a decision head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalBranch {
    pub fc1: DenseLayer,
    pub fc2: DenseLayer,
}

impl FinalBranch {
    pub fn init(in_dim: usize, hidden: usize, embedding: usize, rng: &mut ChaCha8Rng) -> Self {
        FinalBranch {
            fc1: DenseLayer::init(in_dim, hidden, rng),
            fc2: DenseLayer::init(hidden, embedding, rng),
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.fc2.out_dim
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).1
    }

    /// Returns (z1, embedding), both post-activation.
    pub(crate) fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut z1 = self.fc1.forward(x);
        for v in z1.iter_mut() {
            *v = v.tanh();
        }
        let mut e = self.fc2.forward(&z1);
        for v in e.iter_mut() {
            *v = v.tanh();
        }
        (z1, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_layer_outputs_bias() {
        let mut layer = DenseLayer::zeros(3, 2);
        layer.bias = vec![0.5, -1.0];
        assert_eq!(layer.forward(&[1.0, 2.0, 3.0]), vec![0.5, -1.0]);
    }

    #[test]
    fn forward_is_matrix_vector_product() {
        let layer = DenseLayer {
            in_dim: 2,
            out_dim: 2,
            weights: vec![1.0, 2.0, 3.0, 4.0],
            bias: vec![0.0, 1.0],
        };
        assert_eq!(layer.forward(&[1.0, 1.0]), vec![3.0, 8.0]);
    }

    #[test]
    fn branch_embedding_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let branch = FinalBranch::init(10, 8, 4, &mut rng);
        let x: Vec<f64> = (0..10).map(|i| (i as f64 - 5.0) * 100.0).collect();
        let e = branch.forward(&x);
        assert_eq!(e.len(), 4);
        assert!(e.iter().all(|v| v.abs() <= 1.0));
    }
}
