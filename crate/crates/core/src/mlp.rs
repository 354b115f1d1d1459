//! Feed-forward tanh networks over flat parameter vectors.
//!
//! Parameters live in a single flat buffer with a layout manifest, which is
//! the common currency of the optimizers, the perturbation machinery and the
//! snapshot files. Weights are stored `[fan_out, fan_in]` so each row is one
//! output neuron's incoming filter.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{DiffGraph, NodeId};
use crate::error::CoreError;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        hidden_layers: usize,
        hidden_width: usize,
        seed: u64,
    ) -> Result<Self, CoreError> {
        if input_dim < 1 || output_dim < 1 || hidden_layers < 1 || hidden_width < 1 {
            return Err(CoreError::invalid("all network dimensions must be >= 1"));
        }
        Ok(Self { input_dim, output_dim, hidden_layers, hidden_width, seed })
    }

    /// (fan_in, fan_out) per layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = self.input_dim;
        for _ in 0..self.hidden_layers {
            dims.push((fan_in, self.hidden_width));
            fan_in = self.hidden_width;
        }
        dims.push((fan_in, self.output_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Weight,
    Bias,
}

/// One entry of the layout manifest: where a weight matrix or bias vector
/// sits inside the flat buffer.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LayoutEntry {
    pub layer: usize,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl LayoutEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Flat view of all network weights and biases plus the layout manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    layout: Vec<LayoutEntry>,
}

pub fn layout_for(config: &MlpConfig) -> Vec<LayoutEntry> {
    let mut layout = Vec::new();
    let mut offset = 0;
    for (layer, (fan_in, fan_out)) in config.layer_dims().into_iter().enumerate() {
        layout.push(LayoutEntry {
            layer,
            kind: ParamKind::Weight,
            shape: vec![fan_out, fan_in],
            offset,
        });
        offset += fan_out * fan_in;
        layout.push(LayoutEntry { layer, kind: ParamKind::Bias, shape: vec![fan_out], offset });
        offset += fan_out;
    }
    layout
}

impl ParameterVector {
    pub fn from_flat(values: Vec<f64>, layout: Vec<LayoutEntry>) -> Result<Self, CoreError> {
        let expected: usize = layout.iter().map(|e| e.len()).sum();
        if expected != values.len() {
            return Err(CoreError::invalid(format!(
                "layout covers {expected} values but buffer holds {}",
                values.len()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn zeros(config: &MlpConfig) -> Self {
        let layout = layout_for(config);
        let n = layout.iter().map(|e| e.len()).sum();
        Self { values: vec![0.0; n], layout }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layout(&self) -> &[LayoutEntry] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, entry: &LayoutEntry) -> &[f64] {
        &self.values[entry.range()]
    }

    /// Replace the flat buffer, keeping the layout.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, CoreError> {
        Self::from_flat(values, self.layout.clone())
    }

    pub fn matches_config(&self, config: &MlpConfig) -> bool {
        self.layout == layout_for(config)
    }

    /// theta + eps1 * zeta + eps2 * gamma, leaving self untouched.
    pub fn perturbed(&self, dirs: &DirectionPair, eps1: f64, eps2: f64) -> Self {
        let values = self
            .values
            .iter()
            .zip(dirs.zeta.values.iter().zip(dirs.gamma.values.iter()))
            .map(|(t, (z, g))| t + eps1 * z + eps2 * g)
            .collect();
        Self { values, layout: self.layout.clone() }
    }
}

/// Two filter-normalized random directions in parameter space.
#[derive(Debug, Clone)]
pub struct DirectionPair {
    pub zeta: ParameterVector,
    pub gamma: ParameterVector,
}

/// Xavier-uniform initialization: weights uniform in
/// +-sqrt(6 / (fan_in + fan_out)), biases zero, reproducible from the seed.
pub fn init_xavier(config: &MlpConfig) -> ParameterVector {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ParameterVector::zeros(config);
    let layout = params.layout.clone();
    for entry in &layout {
        if entry.kind != ParamKind::Weight {
            continue;
        }
        let (fan_out, fan_in) = (entry.shape[0], entry.shape[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in &mut params.values[entry.range()] {
            *v = rng.random_range(-bound..bound);
        }
    }
    params
}

/// Gaussian directions rescaled sub-block-wise: every weight row and every
/// bias vector of the direction is scaled to the Euclidean norm of the
/// matching block of `theta_star`. Zero-norm reference blocks map to zero.
pub fn make_filter_normalized_directions(theta_star: &ParameterVector, seed: u64) -> DirectionPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = || {
        let mut d = theta_star.clone();
        for v in &mut d.values {
            *v = StandardNormal.sample(&mut rng);
        }
        normalize_like(&mut d, theta_star);
        d
    };
    let zeta = sample();
    let gamma = sample();
    DirectionPair { zeta, gamma }
}

fn normalize_like(direction: &mut ParameterVector, reference: &ParameterVector) {
    let layout = direction.layout.clone();
    for entry in &layout {
        match entry.kind {
            ParamKind::Weight => {
                let fan_in = entry.shape[1];
                for row in 0..entry.shape[0] {
                    let start = entry.offset + row * fan_in;
                    normalize_block(
                        &mut direction.values[start..start + fan_in],
                        &reference.values[start..start + fan_in],
                    );
                }
            }
            ParamKind::Bias => {
                let r = entry.range();
                normalize_block(&mut direction.values[r.clone()], &reference.values[r]);
            }
        }
    }
}

fn normalize_block(dir: &mut [f64], reference: &[f64]) {
    let ref_norm = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ref_norm == 0.0 {
        dir.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let dir_norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if dir_norm == 0.0 {
        return;
    }
    let s = ref_norm / dir_norm;
    dir.iter_mut().for_each(|v| *v *= s);
}

/// A network instantiated on a graph: parameter leaves plus the builder for
/// forward passes at arbitrary point batches.
pub struct GraphModel<'g> {
    graph: &'g DiffGraph,
    config: MlpConfig,
    /// Leaf nodes in layout order (weight, bias per layer).
    pub leaves: Vec<NodeId>,
}

impl<'g> GraphModel<'g> {
    /// Instantiate parameter leaves for `params` on `graph`.
    pub fn new(
        graph: &'g DiffGraph,
        config: &MlpConfig,
        params: &ParameterVector,
    ) -> Result<Self, CoreError> {
        if !params.matches_config(config) {
            return Err(CoreError::invalid(
                "parameter vector layout does not match network configuration",
            ));
        }
        let mut leaves = Vec::with_capacity(params.layout().len());
        for entry in params.layout() {
            // Bias blocks are laid out as [w] but live on the graph as [1, w]
            // rows; the flat data is identical either way.
            let shape = match entry.kind {
                ParamKind::Weight => entry.shape.clone(),
                ParamKind::Bias => vec![1, entry.shape[0]],
            };
            let t = Tensor::new(shape, params.block(entry).to_vec())?;
            leaves.push(graph.leaf(t));
        }
        Ok(Self { graph, config: config.clone(), leaves })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    /// Forward pass for a batch `[n, input_dim]` already on the graph.
    /// tanh on hidden layers, linear output layer.
    pub fn forward(&self, x: NodeId) -> Result<NodeId, CoreError> {
        let g = self.graph;
        let shape = g.shape(x);
        if shape.len() != 2 || shape[1] != self.config.input_dim {
            return Err(CoreError::ShapeMismatch {
                op: "forward",
                lhs: shape,
                rhs: vec![0, self.config.input_dim],
            });
        }
        let n_layers = self.config.hidden_layers + 1;
        let mut h = x;
        for layer in 0..n_layers {
            let w = self.leaves[2 * layer];
            let b = self.leaves[2 * layer + 1];
            let wt = g.transpose(w)?;
            let z = g.matmul(h, wt)?;
            let z = g.add_row(z, b)?;
            h = if layer + 1 < n_layers { g.tanh(z) } else { z };
        }
        Ok(h)
    }

    /// Batch forward returning per-field column nodes `[n, 1]`.
    pub fn fields(&self, x: NodeId) -> Result<Vec<NodeId>, CoreError> {
        let out = self.forward(x)?;
        (0..self.config.output_dim).map(|j| self.graph.col(out, j)).collect()
    }

    /// Flat gradient of a scalar loss with respect to the parameter leaves,
    /// assembled in layout order.
    pub fn parameter_gradient(
        &self,
        loss: NodeId,
        params: &ParameterVector,
    ) -> Result<Vec<f64>, CoreError> {
        if params.layout().len() != self.leaves.len() {
            return Err(CoreError::LeafMismatch {
                expected: self.leaves.len(),
                got: params.layout().len(),
            });
        }
        let grads = self.graph.backward(loss, &self.leaves)?;
        let mut flat = Vec::with_capacity(params.len());
        for g in grads {
            self.graph.with_value(g, |t| flat.extend_from_slice(t.data()));
        }
        Ok(flat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64) -> MlpConfig {
        MlpConfig::new(1, 2, 4, 20, seed).unwrap()
    }

    #[test]
    fn xavier_respects_layer_bounds() {
        let config = cfg(0);
        let p = init_xavier(&config);
        for entry in p.layout() {
            match entry.kind {
                ParamKind::Weight => {
                    let bound = (6.0 / (entry.shape[0] + entry.shape[1]) as f64).sqrt();
                    assert!(p.block(entry).iter().all(|w| w.abs() <= bound));
                }
                ParamKind::Bias => assert!(p.block(entry).iter().all(|b| *b == 0.0)),
            }
        }
        // first layer 1 -> 20: bound = sqrt(6/21)
        let bound = (6.0f64 / 21.0).sqrt();
        assert!((bound - 0.5345).abs() < 1e-4);
        assert!(p.block(&p.layout()[0]).iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn xavier_is_deterministic() {
        assert_eq!(init_xavier(&cfg(7)).values(), init_xavier(&cfg(7)).values());
        assert_ne!(init_xavier(&cfg(7)).values(), init_xavier(&cfg(8)).values());
    }

    #[test]
    fn flatten_round_trip_is_identity() {
        let p = init_xavier(&cfg(3));
        let q = ParameterVector::from_flat(p.values().to_vec(), p.layout().to_vec()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let config = cfg(0);
        let p = ParameterVector::zeros(&config);
        let g = DiffGraph::new();
        let model = GraphModel::new(&g, &config, &p).unwrap();
        let x = g.constant(Tensor::column(&[0.3, -0.5, 0.9]));
        let out = model.forward(x).unwrap();
        assert_eq!(g.shape(out), vec![3, 2]);
        assert!(g.with_value(out, |t| t.data().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn tiny_weights_act_linearly() {
        // With |theta| <= 1e-4 the tanh network is its linear part to 1e-6.
        let config = MlpConfig::new(1, 1, 1, 4, 0).unwrap();
        let mut p = init_xavier(&config);
        for v in p.values_mut() {
            *v *= 1e-4;
        }
        let g = DiffGraph::new();
        let model = GraphModel::new(&g, &config, &p).unwrap();
        let xv = 0.7;
        let x = g.constant(Tensor::column(&[xv]));
        let out = model.forward(x).unwrap();
        let got = g.with_value(out, |t| t.data()[0]);

        let layout = p.layout();
        let w_in = p.block(&layout[0]).to_vec(); // [4,1]
        let w_out = p.block(&layout[2]).to_vec(); // [1,4]
        let linear: f64 = w_out.iter().zip(&w_in).map(|(a, b)| a * b * xv).sum();
        assert!((got - linear).abs() < 1e-6);
    }

    #[test]
    fn directions_match_reference_norms() {
        let p = init_xavier(&cfg(1));
        let dirs = make_filter_normalized_directions(&p, 42);
        for d in [&dirs.zeta, &dirs.gamma] {
            for entry in p.layout() {
                match entry.kind {
                    ParamKind::Weight => {
                        let fan_in = entry.shape[1];
                        for row in 0..entry.shape[0] {
                            let r = entry.offset + row * fan_in..entry.offset + (row + 1) * fan_in;
                            let rn: f64 =
                                p.values()[r.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
                            let dn: f64 =
                                d.values()[r.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
                            assert!((rn - dn).abs() <= 1e-12 * rn.max(1.0));
                        }
                    }
                    ParamKind::Bias => {
                        // zero-norm reference block -> zero direction block
                        assert!(d.block(entry).iter().all(|v| *v == 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn directions_zero_for_zero_reference() {
        let p = ParameterVector::zeros(&cfg(0));
        let dirs = make_filter_normalized_directions(&p, 5);
        assert!(dirs.zeta.values().iter().all(|v| *v == 0.0));
        assert!(dirs.gamma.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn directions_deterministic_per_seed() {
        let p = init_xavier(&cfg(2));
        let a = make_filter_normalized_directions(&p, 9);
        let b = make_filter_normalized_directions(&p, 9);
        assert_eq!(a.zeta.values(), b.zeta.values());
        assert_eq!(a.gamma.values(), b.gamma.values());
    }

    #[test]
    fn perturb_identity_linearity_additivity() {
        let p = init_xavier(&cfg(4));
        let dirs = make_filter_normalized_directions(&p, 11);
        assert_eq!(p.perturbed(&dirs, 0.0, 0.0), p);

        let self_dirs = DirectionPair { zeta: p.clone(), gamma: ParameterVector::zeros(&cfg(4)) };
        let doubled = p.perturbed(&self_dirs, 1.0, 0.0);
        for (a, b) in doubled.values().iter().zip(p.values()) {
            assert_eq!(*a, 2.0 * b);
        }

        let two_step = p.perturbed(&dirs, 0.3, 0.0).perturbed(&dirs, 0.2, 0.0);
        let one_step = p.perturbed(&dirs, 0.5, 0.0);
        for (a, b) in two_step.values().iter().zip(one_step.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
