//! Reverse-mode automatic differentiation on an eager tensor tape.
//!
//! Every operation appends a node to a [`DiffGraph`] and computes its value
//! immediately. Differentiation (both the reverse pass and the forward-mode
//! tangent pass) emits ordinary nodes onto the same tape, so derivative
//! results can themselves be differentiated. This nesting is what lets a loss
//! containing input-derivatives of a network stay differentiable with respect
//! to the network parameters.

use std::cell::RefCell;

use rayon::prelude::*;

use crate::error::CoreError;
use crate::tensor::Tensor;

/// Minimum element count before elementwise ops split across threads.
/// Work is chunked at fixed boundaries, so results are bitwise identical to
/// the sequential path.
const PAR_MIN_ELEMS: usize = 16 * 1024;
const PAR_CHUNK: usize = 8 * 1024;
/// Minimum m*k*n before a matmul splits its output rows across threads.
const PAR_MIN_FLOPS: usize = 250_000;

fn map_unary(data: &[f64], f: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    if data.len() < PAR_MIN_ELEMS {
        return data.iter().map(|x| f(*x)).collect();
    }
    let mut out = vec![0.0; data.len()];
    out.par_chunks_mut(PAR_CHUNK)
        .zip(data.par_chunks(PAR_CHUNK))
        .for_each(|(o, i)| {
            for (o, i) in o.iter_mut().zip(i) {
                *o = f(*i);
            }
        });
    out
}

fn map_binary(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
    if a.len() < PAR_MIN_ELEMS {
        return a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect();
    }
    let mut out = vec![0.0; a.len()];
    out.par_chunks_mut(PAR_CHUNK)
        .zip(a.par_chunks(PAR_CHUNK).zip(b.par_chunks(PAR_CHUNK)))
        .for_each(|(o, (x, y))| {
            for ((o, x), y) in o.iter_mut().zip(x).zip(y) {
                *o = f(*x, *y);
            }
        });
    out
}

/// Index of a node on a [`DiffGraph`] tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation kinds recorded on the tape.
///
/// The first group is the public arithmetic surface; the second group is
/// shape plumbing emitted by the network builder and the differentiation
/// rules themselves.
#[derive(Debug, Clone)]
pub enum Op {
    /// Differentiable leaf variable.
    Leaf,
    /// Non-differentiable data (point coordinates, targets, multipliers).
    Constant,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Tanh(NodeId),
    Sin(NodeId),
    Cos(NodeId),
    Exp(NodeId),
    /// Integer power, elementwise.
    PowI(NodeId, i32),
    /// Sum of all elements, producing a scalar.
    Sum(NodeId),
    /// Mean of all elements, producing a scalar.
    Mean(NodeId),
    /// `a * x + b`, elementwise with constant coefficients.
    Affine(NodeId, f64, f64),
    /// Broadcast-add a row vector [1, w] over the rows of [m, w].
    AddRow(NodeId, NodeId),
    Transpose(NodeId),
    /// Extract column j of [m, w] as [m, 1].
    Col(NodeId, usize),
    /// Place [m, 1] into column j of an [m, w] zero tensor.
    PadCol(NodeId, usize, usize),
    /// Sum over rows: [m, w] -> [1, w].
    RowSum(NodeId),
    /// Repeat a [1, w] row m times -> [m, w].
    BroadcastRow(NodeId, usize),
    /// Broadcast a scalar to a full shape.
    BroadcastScalar(NodeId, Vec<usize>),
}

impl Op {
    fn inputs(&self) -> (Option<NodeId>, Option<NodeId>) {
        use Op::*;
        match *self {
            Leaf | Constant => (None, None),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | MatMul(a, b) | AddRow(a, b) => {
                (Some(a), Some(b))
            }
            Tanh(a) | Sin(a) | Cos(a) | Exp(a) | PowI(a, _) | Sum(a) | Mean(a)
            | Affine(a, _, _) | Transpose(a) | Col(a, _) | PadCol(a, _, _) | RowSum(a)
            | BroadcastRow(a, _) => (Some(a), None),
            BroadcastScalar(a, _) => (Some(a), None),
        }
    }
}

struct Node {
    op: Op,
    value: Tensor,
}

/// An append-only tape of operations with eagerly computed values.
///
/// Node ids are already in topological order because the tape is append-only,
/// so both differentiation passes are single sweeps. A graph is single-owner:
/// construction and evaluation are not synchronized across threads.
pub struct DiffGraph {
    nodes: RefCell<Vec<Node>>,
}

impl Default for DiffGraph {
    fn default() -> Self {
        Self::new()
    }
}

/// The elementwise/linear-algebra operations exposed for generic dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Div,
    MatMul,
    Tanh,
    Sin,
    Cos,
    Exp,
    Pow,
    Sum,
    Mean,
}

impl DiffGraph {
    pub fn new() -> Self {
        Self { nodes: RefCell::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value of a node (clones the tensor).
    pub fn value(&self, id: NodeId) -> Tensor {
        self.nodes.borrow()[id.0].value.clone()
    }

    /// Scalar value of a node.
    pub fn item(&self, id: NodeId) -> f64 {
        self.nodes.borrow()[id.0].value.item()
    }

    pub fn shape(&self, id: NodeId) -> Vec<usize> {
        self.nodes.borrow()[id.0].value.shape().to_vec()
    }

    /// Apply `f` to the node's value without cloning.
    pub fn with_value<R>(&self, id: NodeId, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.nodes.borrow()[id.0].value)
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        matches!(self.nodes.borrow()[id.0].op, Op::Leaf)
    }

    fn push(&self, op: Op, value: Tensor) -> NodeId {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { op, value });
        NodeId(nodes.len() - 1)
    }

    /// Register a differentiable leaf.
    pub fn leaf(&self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Register non-differentiable data.
    pub fn constant(&self, value: Tensor) -> NodeId {
        self.push(Op::Constant, value)
    }

    pub fn scalar(&self, v: f64) -> NodeId {
        self.constant(Tensor::scalar(v))
    }

    // ---- arithmetic ----

    fn zip_same_shape(
        &self,
        op: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64 + Sync,
    ) -> Result<Tensor, CoreError> {
        let nodes = self.nodes.borrow();
        let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
        if ta.shape() != tb.shape() {
            return Err(CoreError::ShapeMismatch {
                op,
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let data = map_binary(ta.data(), tb.data(), f);
        Ok(Tensor::new(ta.shape().to_vec(), data).expect("same shape"))
    }

    pub fn add(&self, a: NodeId, b: NodeId) -> Result<NodeId, CoreError> {
        let v = self.zip_same_shape("add", a, b, |x, y| x + y)?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&self, a: NodeId, b: NodeId) -> Result<NodeId, CoreError> {
        let v = self.zip_same_shape("sub", a, b, |x, y| x - y)?;
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn mul(&self, a: NodeId, b: NodeId) -> Result<NodeId, CoreError> {
        let v = self.zip_same_shape("mul", a, b, |x, y| x * y)?;
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn div(&self, a: NodeId, b: NodeId) -> Result<NodeId, CoreError> {
        let v = self.zip_same_shape("div", a, b, |x, y| x / y)?;
        Ok(self.push(Op::Div(a, b), v))
    }

    pub fn matmul(&self, a: NodeId, b: NodeId) -> Result<NodeId, CoreError> {
        let v = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[1] != tb.shape()[0] {
                return Err(CoreError::ShapeMismatch {
                    op: "matmul",
                    lhs: ta.shape().to_vec(),
                    rhs: tb.shape().to_vec(),
                });
            }
            matmul_rowmajor(ta, tb)
        };
        Ok(self.push(Op::MatMul(a, b), v))
    }

    fn unary(&self, a: NodeId, f: impl Fn(f64) -> f64 + Sync) -> Tensor {
        let nodes = self.nodes.borrow();
        let ta = &nodes[a.0].value;
        let data = map_unary(ta.data(), f);
        Tensor::new(ta.shape().to_vec(), data).expect("same shape")
    }

    pub fn tanh(&self, a: NodeId) -> NodeId {
        let v = self.unary(a, f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn sin(&self, a: NodeId) -> NodeId {
        let v = self.unary(a, f64::sin);
        self.push(Op::Sin(a), v)
    }

    pub fn cos(&self, a: NodeId) -> NodeId {
        let v = self.unary(a, f64::cos);
        self.push(Op::Cos(a), v)
    }

    pub fn exp(&self, a: NodeId) -> NodeId {
        let v = self.unary(a, f64::exp);
        self.push(Op::Exp(a), v)
    }

    pub fn powi(&self, a: NodeId, p: i32) -> NodeId {
        let v = self.unary(a, |x| x.powi(p));
        self.push(Op::PowI(a, p), v)
    }

    pub fn square(&self, a: NodeId) -> NodeId {
        self.powi(a, 2)
    }

    pub fn sum(&self, a: NodeId) -> NodeId {
        let v = {
            let nodes = self.nodes.borrow();
            Tensor::scalar(nodes[a.0].value.data().iter().sum())
        };
        self.push(Op::Sum(a), v)
    }

    pub fn mean(&self, a: NodeId) -> NodeId {
        let v = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            Tensor::scalar(t.data().iter().sum::<f64>() / t.numel() as f64)
        };
        self.push(Op::Mean(a), v)
    }

    /// `a * x + b` elementwise with scalar constants.
    pub fn affine(&self, x: NodeId, a: f64, b: f64) -> NodeId {
        let v = self.unary(x, |t| a * t + b);
        self.push(Op::Affine(x, a, b), v)
    }

    pub fn neg(&self, a: NodeId) -> NodeId {
        self.affine(a, -1.0, 0.0)
    }

    pub fn scale(&self, a: NodeId, c: f64) -> NodeId {
        self.affine(a, c, 0.0)
    }

    /// Broadcast-add a `[1, w]` row vector over the rows of an `[m, w]` tensor.
    pub fn add_row(&self, a: NodeId, row: NodeId) -> Result<NodeId, CoreError> {
        let v = {
            let nodes = self.nodes.borrow();
            let (ta, tr) = (&nodes[a.0].value, &nodes[row.0].value);
            let ok = ta.shape().len() == 2
                && tr.shape().len() == 2
                && tr.shape()[0] == 1
                && tr.shape()[1] == ta.shape()[1];
            if !ok {
                return Err(CoreError::ShapeMismatch {
                    op: "add_row",
                    lhs: ta.shape().to_vec(),
                    rhs: tr.shape().to_vec(),
                });
            }
            let w = ta.shape()[1];
            let mut data = ta.data().to_vec();
            for (i, x) in data.iter_mut().enumerate() {
                *x += tr.data()[i % w];
            }
            Tensor::new(ta.shape().to_vec(), data).expect("same shape")
        };
        Ok(self.push(Op::AddRow(a, row), v))
    }

    pub fn transpose(&self, a: NodeId) -> Result<NodeId, CoreError> {
        let v = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            if ta.shape().len() != 2 {
                return Err(CoreError::ShapeMismatch {
                    op: "transpose",
                    lhs: ta.shape().to_vec(),
                    rhs: vec![],
                });
            }
            let (m, n) = (ta.shape()[0], ta.shape()[1]);
            let mut data = vec![0.0; m * n];
            for i in 0..m {
                for j in 0..n {
                    data[j * m + i] = ta.data()[i * n + j];
                }
            }
            Tensor::new(vec![n, m], data).expect("sized")
        };
        Ok(self.push(Op::Transpose(a), v))
    }

    /// Extract column `j` of an `[m, w]` tensor as `[m, 1]`.
    pub fn col(&self, a: NodeId, j: usize) -> Result<NodeId, CoreError> {
        let v = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            if ta.shape().len() != 2 || j >= ta.shape()[1] {
                return Err(CoreError::ShapeMismatch {
                    op: "col",
                    lhs: ta.shape().to_vec(),
                    rhs: vec![j],
                });
            }
            let (m, w) = (ta.shape()[0], ta.shape()[1]);
            let data = (0..m).map(|i| ta.data()[i * w + j]).collect();
            Tensor::new(vec![m, 1], data).expect("sized")
        };
        Ok(self.push(Op::Col(a, j), v))
    }

    fn pad_col(&self, a: NodeId, j: usize, w: usize) -> NodeId {
        let v = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            let m = ta.shape()[0];
            let mut data = vec![0.0; m * w];
            for i in 0..m {
                data[i * w + j] = ta.data()[i];
            }
            Tensor::new(vec![m, w], data).expect("sized")
        };
        self.push(Op::PadCol(a, j, w), v)
    }

    fn row_sum(&self, a: NodeId) -> NodeId {
        let v = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            let (m, w) = (ta.shape()[0], ta.shape()[1]);
            let mut data = vec![0.0; w];
            for i in 0..m {
                for j in 0..w {
                    data[j] += ta.data()[i * w + j];
                }
            }
            Tensor::new(vec![1, w], data).expect("sized")
        };
        self.push(Op::RowSum(a), v)
    }

    fn broadcast_row(&self, a: NodeId, m: usize) -> NodeId {
        let v = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            let w = ta.shape()[1];
            let mut data = Vec::with_capacity(m * w);
            for _ in 0..m {
                data.extend_from_slice(ta.data());
            }
            Tensor::new(vec![m, w], data).expect("sized")
        };
        self.push(Op::BroadcastRow(a, m), v)
    }

    fn broadcast_scalar(&self, a: NodeId, shape: Vec<usize>) -> NodeId {
        let v = {
            let nodes = self.nodes.borrow();
            Tensor::fill(shape.clone(), nodes[a.0].value.item())
        };
        self.push(Op::BroadcastScalar(a, shape), v)
    }

    /// Generic dispatch over the public operation set. Unary kinds ignore `b`.
    pub fn apply(&self, kind: OpKind, a: NodeId, b: Option<NodeId>) -> Result<NodeId, CoreError> {
        let need_b = || b.ok_or_else(|| CoreError::invalid("binary op needs two operands"));
        match kind {
            OpKind::Add => self.add(a, need_b()?),
            OpKind::Sub => self.sub(a, need_b()?),
            OpKind::Mul => self.mul(a, need_b()?),
            OpKind::Div => self.div(a, need_b()?),
            OpKind::MatMul => self.matmul(a, need_b()?),
            OpKind::Tanh => Ok(self.tanh(a)),
            OpKind::Sin => Ok(self.sin(a)),
            OpKind::Cos => Ok(self.cos(a)),
            OpKind::Exp => Ok(self.exp(a)),
            OpKind::Pow => Ok(self.powi(a, 2)),
            OpKind::Sum => Ok(self.sum(a)),
            OpKind::Mean => Ok(self.mean(a)),
        }
    }

    // ---- reverse pass ----

    /// Reverse-mode gradients of a scalar `output` with respect to `wrt` nodes.
    ///
    /// The returned gradients are nodes on this graph, so they can feed
    /// further computation and be differentiated again. Nodes unreachable
    /// from `output` get zero gradients of the right shape.
    pub fn backward(&self, output: NodeId, wrt: &[NodeId]) -> Result<Vec<NodeId>, CoreError> {
        {
            let nodes = self.nodes.borrow();
            let shape = nodes[output.0].value.shape();
            if !shape.is_empty() {
                return Err(CoreError::NotScalar { op: "backward", shape: shape.to_vec() });
            }
        }
        let upto = output.0 + 1;
        // Mark ancestors of the output so the sweep touches only its cone.
        let mut needed = vec![false; upto];
        needed[output.0] = true;
        for i in (0..upto).rev() {
            if !needed[i] {
                continue;
            }
            let (a, b) = self.nodes.borrow()[i].op.inputs();
            if let Some(a) = a {
                needed[a.0] = true;
            }
            if let Some(b) = b {
                needed[b.0] = true;
            }
        }

        let mut adjoint: Vec<Option<NodeId>> = vec![None; upto];
        adjoint[output.0] = Some(self.constant(Tensor::scalar(1.0)));

        for i in (0..upto).rev() {
            if !needed[i] {
                continue;
            }
            let Some(adj) = adjoint[i] else { continue };
            let op = self.nodes.borrow()[i].op.clone();
            self.propagate(NodeId(i), &op, adj, &mut adjoint)?;
        }

        let mut grads = Vec::with_capacity(wrt.len());
        for id in wrt {
            let g = match adjoint.get(id.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let shape = self.shape(*id);
                    self.constant(Tensor::zeros(shape))
                }
            };
            grads.push(g);
        }
        Ok(grads)
    }

    fn accumulate(
        &self,
        slot: &mut Option<NodeId>,
        contribution: NodeId,
    ) -> Result<(), CoreError> {
        *slot = Some(match slot.take() {
            None => contribution,
            Some(prev) => self.add(prev, contribution)?,
        });
        Ok(())
    }

    fn propagate(
        &self,
        node: NodeId,
        op: &Op,
        adj: NodeId,
        adjoint: &mut [Option<NodeId>],
    ) -> Result<(), CoreError> {
        use Op::*;
        match *op {
            Leaf | Constant => {}
            Add(a, b) => {
                self.accumulate(&mut adjoint[a.0], adj)?;
                self.accumulate(&mut adjoint[b.0], adj)?;
            }
            Sub(a, b) => {
                self.accumulate(&mut adjoint[a.0], adj)?;
                let n = self.neg(adj);
                self.accumulate(&mut adjoint[b.0], n)?;
            }
            Mul(a, b) => {
                let ga = self.mul(adj, b)?;
                self.accumulate(&mut adjoint[a.0], ga)?;
                let gb = self.mul(adj, a)?;
                self.accumulate(&mut adjoint[b.0], gb)?;
            }
            Div(a, b) => {
                let ga = self.div(adj, b)?;
                self.accumulate(&mut adjoint[a.0], ga)?;
                // d/db (a/b) = -a / b^2
                let bb = self.mul(b, b)?;
                let gb = self.neg(self.div(self.mul(adj, a)?, bb)?);
                self.accumulate(&mut adjoint[b.0], gb)?;
            }
            MatMul(a, b) => {
                let bt = self.transpose(b)?;
                let ga = self.matmul(adj, bt)?;
                self.accumulate(&mut adjoint[a.0], ga)?;
                let at = self.transpose(a)?;
                let gb = self.matmul(at, adj)?;
                self.accumulate(&mut adjoint[b.0], gb)?;
            }
            Tanh(a) => {
                // 1 - tanh(x)^2, reusing the stored forward value
                let y2 = self.mul(node, node)?;
                let d = self.affine(y2, -1.0, 1.0);
                let g = self.mul(adj, d)?;
                self.accumulate(&mut adjoint[a.0], g)?;
            }
            Sin(a) => {
                let g = self.mul(adj, self.cos(a))?;
                self.accumulate(&mut adjoint[a.0], g)?;
            }
            Cos(a) => {
                let g = self.neg(self.mul(adj, self.sin(a))?);
                self.accumulate(&mut adjoint[a.0], g)?;
            }
            Exp(a) => {
                let g = self.mul(adj, node)?;
                self.accumulate(&mut adjoint[a.0], g)?;
            }
            PowI(a, p) => {
                if p != 0 {
                    let d = self.scale(self.powi(a, p - 1), p as f64);
                    let g = self.mul(adj, d)?;
                    self.accumulate(&mut adjoint[a.0], g)?;
                }
            }
            Sum(a) => {
                let shape = self.shape(a);
                let g = self.broadcast_scalar(adj, shape);
                self.accumulate(&mut adjoint[a.0], g)?;
            }
            Mean(a) => {
                let shape = self.shape(a);
                let n: usize = shape.iter().product();
                let s = self.scale(adj, 1.0 / n as f64);
                let g = self.broadcast_scalar(s, shape);
                self.accumulate(&mut adjoint[a.0], g)?;
            }
            Affine(a, c, _) => {
                let g = self.scale(adj, c);
                self.accumulate(&mut adjoint[a.0], g)?;
            }
            AddRow(a, row) => {
                self.accumulate(&mut adjoint[a.0], adj)?;
                let g = self.row_sum(adj);
                self.accumulate(&mut adjoint[row.0], g)?;
            }
            Transpose(a) => {
                let g = self.transpose(adj)?;
                self.accumulate(&mut adjoint[a.0], g)?;
            }
            Col(a, j) => {
                let w = self.shape(a)[1];
                let g = self.pad_col(adj, j, w);
                self.accumulate(&mut adjoint[a.0], g)?;
            }
            PadCol(a, j, _) => {
                let g = self.col(adj, j)?;
                self.accumulate(&mut adjoint[a.0], g)?;
            }
            RowSum(a) => {
                let m = self.shape(a)[0];
                let g = self.broadcast_row(adj, m);
                self.accumulate(&mut adjoint[a.0], g)?;
            }
            BroadcastRow(a, _) => {
                let g = self.row_sum(adj);
                self.accumulate(&mut adjoint[a.0], g)?;
            }
            BroadcastScalar(a, _) => {
                let g = self.sum(adj);
                self.accumulate(&mut adjoint[a.0], g)?;
            }
        }
        Ok(())
    }

    // ---- forward-mode pass ----

    /// Forward-mode tangents: given `(leaf, tangent)` seeds, emits the
    /// directional derivative of every node on the path and returns the
    /// tangent nodes of `targets`. Unseeded leaves and constants carry zero
    /// tangent; targets with no dependence get explicit zero nodes.
    pub fn jvp(
        &self,
        seeds: &[(NodeId, NodeId)],
        targets: &[NodeId],
    ) -> Result<Vec<NodeId>, CoreError> {
        let upto = match targets.iter().map(|t| t.0).max() {
            Some(m) => m + 1,
            None => return Ok(Vec::new()),
        };
        let mut tangent: Vec<Option<NodeId>> = vec![None; upto];
        for (leaf, tan) in seeds {
            if !self.is_leaf(*leaf) {
                return Err(CoreError::NotALeaf { node: leaf.0 });
            }
            let (ls, ts) = (self.shape(*leaf), self.shape(*tan));
            if ls != ts {
                return Err(CoreError::ShapeMismatch { op: "jvp", lhs: ls, rhs: ts });
            }
            if leaf.0 < upto {
                tangent[leaf.0] = Some(*tan);
            }
        }

        for i in 0..upto {
            let op = self.nodes.borrow()[i].op.clone();
            let t = self.tangent_of(NodeId(i), &op, &tangent)?;
            if let Some(t) = t {
                tangent[i] = Some(t);
            }
        }

        let mut out = Vec::with_capacity(targets.len());
        for t in targets {
            let node = match tangent[t.0] {
                Some(n) => n,
                None => self.constant(Tensor::zeros(self.shape(*t))),
            };
            out.push(node);
        }
        Ok(out)
    }

    fn tangent_of(
        &self,
        node: NodeId,
        op: &Op,
        tangent: &[Option<NodeId>],
    ) -> Result<Option<NodeId>, CoreError> {
        use Op::*;
        let t = |id: NodeId| tangent.get(id.0).copied().flatten();
        let out = match *op {
            Leaf | Constant => None,
            Add(a, b) => match (t(a), t(b)) {
                (Some(ta), Some(tb)) => Some(self.add(ta, tb)?),
                (Some(ta), None) => Some(ta),
                (None, Some(tb)) => Some(tb),
                (None, None) => None,
            },
            Sub(a, b) => match (t(a), t(b)) {
                (Some(ta), Some(tb)) => Some(self.sub(ta, tb)?),
                (Some(ta), None) => Some(ta),
                (None, Some(tb)) => Some(self.neg(tb)),
                (None, None) => None,
            },
            Mul(a, b) => match (t(a), t(b)) {
                (Some(ta), Some(tb)) => {
                    Some(self.add(self.mul(ta, b)?, self.mul(a, tb)?)?)
                }
                (Some(ta), None) => Some(self.mul(ta, b)?),
                (None, Some(tb)) => Some(self.mul(a, tb)?),
                (None, None) => None,
            },
            Div(a, b) => match (t(a), t(b)) {
                (None, None) => None,
                (ta, tb) => {
                    // (ta*b - a*tb) / b^2
                    let num = match (ta, tb) {
                        (Some(ta), Some(tb)) => {
                            self.sub(self.mul(ta, b)?, self.mul(a, tb)?)?
                        }
                        (Some(ta), None) => self.mul(ta, b)?,
                        (None, Some(tb)) => self.neg(self.mul(a, tb)?),
                        (None, None) => unreachable!(),
                    };
                    Some(self.div(num, self.mul(b, b)?)?)
                }
            },
            MatMul(a, b) => match (t(a), t(b)) {
                (Some(ta), Some(tb)) => {
                    Some(self.add(self.matmul(ta, b)?, self.matmul(a, tb)?)?)
                }
                (Some(ta), None) => Some(self.matmul(ta, b)?),
                (None, Some(tb)) => Some(self.matmul(a, tb)?),
                (None, None) => None,
            },
            Tanh(a) => t(a)
                .map(|ta| {
                    let y2 = self.mul(node, node)?;
                    let d = self.affine(y2, -1.0, 1.0);
                    self.mul(ta, d)
                })
                .transpose()?,
            Sin(a) => t(a).map(|ta| self.mul(ta, self.cos(a))).transpose()?,
            Cos(a) => t(a)
                .map(|ta| Ok::<_, CoreError>(self.neg(self.mul(ta, self.sin(a))?)))
                .transpose()?,
            Exp(a) => t(a).map(|ta| self.mul(ta, node)).transpose()?,
            PowI(a, p) => match t(a) {
                Some(ta) if p != 0 => {
                    let d = self.scale(self.powi(a, p - 1), p as f64);
                    Some(self.mul(ta, d)?)
                }
                _ => None,
            },
            Sum(a) => t(a).map(|ta| self.sum(ta)),
            Mean(a) => t(a).map(|ta| self.mean(ta)),
            Affine(a, c, _) => t(a).map(|ta| self.scale(ta, c)),
            AddRow(a, row) => match (t(a), t(row)) {
                (Some(ta), Some(tr)) => Some(self.add_row(ta, tr)?),
                (Some(ta), None) => Some(ta),
                (None, Some(tr)) => {
                    let m = self.shape(node)[0];
                    Some(self.broadcast_row(tr, m))
                }
                (None, None) => None,
            },
            Transpose(a) => t(a).map(|ta| self.transpose(ta)).transpose()?,
            Col(a, j) => t(a).map(|ta| self.col(ta, j)).transpose()?,
            PadCol(a, j, w) => t(a).map(|ta| self.pad_col(ta, j, w)),
            RowSum(a) => t(a).map(|ta| self.row_sum(ta)),
            BroadcastRow(a, m) => t(a).map(|ta| self.broadcast_row(ta, m)),
            BroadcastScalar(a, ref shape) => {
                t(a).map(|ta| self.broadcast_scalar(ta, shape.clone()))
            }
        };
        Ok(out)
    }

    /// Gradient of a scalar `output` with respect to input leaves, returned
    /// as nodes so later passes can differentiate through them.
    pub fn input_gradient(
        &self,
        output: NodeId,
        inputs: &[NodeId],
    ) -> Result<Vec<NodeId>, CoreError> {
        for id in inputs {
            if !self.is_leaf(*id) {
                return Err(CoreError::NotALeaf { node: id.0 });
            }
        }
        let shape = self.shape(output);
        if !shape.is_empty() {
            return Err(CoreError::NotScalar { op: "input_gradient", shape });
        }
        self.backward(output, inputs)
    }
}

fn dgemm_rows(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn matmul_rowmajor(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    let mut c = vec![0.0; m * n];
    // Each output row is produced by exactly one thread, so the row split is
    // bitwise identical to the sequential product.
    if m * k * n >= PAR_MIN_FLOPS && m >= 2 {
        let split = m / 2;
        let (top, bottom) = c.split_at_mut(split * n);
        let (a_top, a_bottom) = a.data().split_at(split * k);
        rayon::join(
            || dgemm_rows(a_top, b.data(), top, split, k, n),
            || dgemm_rows(a_bottom, b.data(), bottom, m - split, k, n),
        );
    } else {
        dgemm_rows(a.data(), b.data(), &mut c, m, k, n);
    }
    Tensor::new(vec![m, n], c).expect("sized")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn add_componentwise() {
        let g = DiffGraph::new();
        let a = g.constant(t(&[2], &[1.0, 2.0]));
        let b = g.constant(t(&[2], &[3.0, 4.0]));
        let c = g.add(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[4.0, 6.0]);
    }

    #[test]
    fn tanh_at_zero() {
        let g = DiffGraph::new();
        let a = g.constant(t(&[1], &[0.0]));
        let y = g.tanh(a);
        assert_eq!(g.value(y).data(), &[0.0]);
    }

    #[test]
    fn matmul_identity() {
        let g = DiffGraph::new();
        let i2 = g.constant(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let m = g.constant(t(&[2, 2], &[5.0, 6.0, 7.0, 8.0]));
        let p = g.matmul(i2, m).unwrap();
        assert_eq!(g.value(p).data(), &[5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let g = DiffGraph::new();
        let a = g.constant(t(&[2], &[1.0, 2.0]));
        let b = g.constant(t(&[3], &[1.0, 2.0, 3.0]));
        let err = g.add(a, b).unwrap_err().to_string();
        assert!(err.contains("[2]") && err.contains("[3]"), "{err}");
    }

    #[test]
    fn square_gradient() {
        // y = x^2 at x = 3 -> dy/dx = 6
        let g = DiffGraph::new();
        let x = g.leaf(t(&[1], &[3.0]));
        let y = g.sum(g.mul(x, x).unwrap());
        let grad = g.input_gradient(y, &[x]).unwrap();
        assert_eq!(g.value(grad[0]).data(), &[6.0]);
    }

    #[test]
    fn sin_gradient_at_zero() {
        let g = DiffGraph::new();
        let x = g.leaf(t(&[1], &[0.0]));
        let y = g.sum(g.sin(x));
        let grad = g.input_gradient(y, &[x]).unwrap();
        assert_eq!(g.value(grad[0]).data(), &[1.0]);
    }

    #[test]
    fn quadratic_parameter_gradient() {
        // loss = sum(theta_i^2), theta = [1, -2] -> grad [2, -4]
        let g = DiffGraph::new();
        let theta = g.leaf(t(&[2], &[1.0, -2.0]));
        let loss = g.sum(g.mul(theta, theta).unwrap());
        let grad = g.backward(loss, &[theta]).unwrap();
        assert_eq!(g.value(grad[0]).data(), &[2.0, -4.0]);
    }

    #[test]
    fn constant_loss_gives_zero_gradient() {
        let g = DiffGraph::new();
        let theta = g.leaf(t(&[3], &[1.0, 2.0, 3.0]));
        let c = g.constant(t(&[2], &[5.0, 7.0]));
        let loss = g.sum(c);
        let grad = g.backward(loss, &[theta]).unwrap();
        assert_eq!(g.value(grad[0]).data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn non_scalar_output_rejected() {
        let g = DiffGraph::new();
        let x = g.leaf(t(&[2], &[1.0, 2.0]));
        assert!(g.backward(x, &[x]).is_err());
        assert!(g.input_gradient(x, &[x]).is_err());
    }

    #[test]
    fn nested_gradient_of_gradient() {
        // y = x^3: dy/dx = 3x^2, d(dy/dx)/dx = 6x.
        let g = DiffGraph::new();
        let x = g.leaf(t(&[1], &[2.0]));
        let y = g.sum(g.powi(x, 3));
        let dy = g.input_gradient(y, &[x]).unwrap()[0];
        assert!((g.value(dy).data()[0] - 12.0).abs() < 1e-12);
        let s = g.sum(dy);
        let d2y = g.input_gradient(s, &[x]).unwrap()[0];
        assert!((g.value(d2y).data()[0] - 12.0).abs() < 1e-12);
    }

    #[test]
    fn jvp_matches_backward_on_tanh_chain() {
        let g = DiffGraph::new();
        let x = g.leaf(t(&[1], &[0.2]));
        let w = g.constant(t(&[1], &[0.5]));
        let y = g.sum(g.tanh(g.mul(w, x).unwrap()));
        let grad = g.input_gradient(y, &[x]).unwrap()[0];

        let seed = g.constant(t(&[1], &[1.0]));
        let tan = g.jvp(&[(x, seed)], &[y]).unwrap()[0];
        let a = g.value(grad).data()[0];
        let b = g.value(tan).data()[0];
        assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        // central finite difference, h = 1e-6, relative 1e-7
        let f = |x0: f64| (0.5 * x0).tanh();
        let h = 1e-6;
        let fd = (f(0.2 + h) - f(0.2 - h)) / (2.0 * h);
        assert!((a - fd).abs() / fd.abs() < 1e-7);
    }

    #[test]
    fn backward_linearity() {
        // grad(a*L1 + b*L2) == a*grad(L1) + b*grad(L2) to machine precision
        let g = DiffGraph::new();
        let x = g.leaf(t(&[2], &[0.3, -0.7]));
        let l1 = g.sum(g.mul(x, x).unwrap());
        let l2 = g.sum(g.sin(x));
        let combo = g.add(g.scale(l1, 2.5), g.scale(l2, -1.5)).unwrap();
        let gc = g.backward(combo, &[x]).unwrap()[0];
        let g1 = g.backward(l1, &[x]).unwrap()[0];
        let g2 = g.backward(l2, &[x]).unwrap()[0];
        let combo_v = g.value(gc);
        let (v1, v2) = (g.value(g1), g.value(g2));
        for i in 0..2 {
            let manual = 2.5 * v1.data()[i] - 1.5 * v2.data()[i];
            assert_eq!(combo_v.data()[i], manual);
        }
    }

    #[test]
    fn repeated_backward_is_bitwise_identical() {
        let g1 = DiffGraph::new();
        let g2 = DiffGraph::new();
        let mut out = Vec::new();
        for g in [&g1, &g2] {
            let x = g.leaf(t(&[2, 2], &[0.1, -0.2, 0.3, 0.4]));
            let w = g.leaf(t(&[2, 2], &[0.5, 0.6, -0.7, 0.8]));
            let y = g.sum(g.tanh(g.matmul(x, w).unwrap()));
            let grads = g.backward(y, &[x, w]).unwrap();
            out.push((g.value(grads[0]), g.value(grads[1])));
        }
        assert_eq!(out[0], out[1]);
    }
}
