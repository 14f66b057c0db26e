//! Recording tape for reverse-mode differentiation.
//!
//! A [`Graph`] owns every value computed in one forward pass. Operations on
//! a [`Var`] evaluate eagerly and append a node that remembers its inputs and
//! whatever forward results its backward rule needs. [`Graph::backward`]
//! then walks the nodes in reverse insertion order, which is a topological
//! order because a node can only reference nodes recorded before it.

use std::cell::{Ref, RefCell};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numcore::ops::{self, Activation, ConvGeom, PoolKind};
use crate::numcore::{Array, Real};

pub(crate) struct Node<F> {
    pub(crate) value: Array<F>,
    pub(crate) op: Op<F>,
    pub(crate) requires_grad: bool,
    param: Option<String>,
}

/// Operation that produced a node, with the forward values its backward
/// rule needs.
pub(crate) enum Op<F> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Affine {
        x: usize,
        scale: F,
    },
    Sum(usize),
    Mean(usize),
    Reshape(usize),
    Concat {
        inputs: Vec<usize>,
        axis: usize,
    },
    Slice {
        x: usize,
        axis: usize,
        start: usize,
    },
    Upsample {
        x: usize,
        factor: usize,
    },
    MatMul(usize, usize),
    BatchMatMul(usize, usize),
    Transpose(usize),
    RowBias {
        x: usize,
        bias: usize,
    },
    ChannelBias {
        x: usize,
        bias: usize,
    },
    MaskReplace {
        x: usize,
        keep: Vec<bool>,
    },
    Conv1d {
        x: usize,
        w: usize,
        b: Option<usize>,
        geom: ConvGeom,
    },
    GroupNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        groups: usize,
        stats: Vec<(F, F)>,
    },
    Activation {
        x: usize,
        kind: Activation,
    },
    Pool {
        x: usize,
        kind: PoolKind,
        kernel: usize,
        stride: usize,
        argmax: Vec<usize>,
    },
    Softmax {
        x: usize,
        axis: usize,
    },
    Mmd {
        x: usize,
        y: usize,
        bandwidths: Vec<F>,
    },
}

/// Owner of one recorded computation.
pub struct Graph<F: Real> {
    nodes: RefCell<Vec<Node<F>>>,
}

/// Handle to a value recorded on a [`Graph`].
pub struct Var<'g, F: Real> {
    graph: &'g Graph<F>,
    id: usize,
}

impl<F: Real> Clone for Var<'_, F> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<F: Real> Copy for Var<'_, F> {}

impl<F: Real> std::fmt::Debug for Var<'_, F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var(#{} {:?})", self.id, self.shape())
    }
}

/// Gradients of a scalar loss with respect to named parameters.
#[derive(Clone, Debug, Default)]
pub struct Gradients<F> {
    map: BTreeMap<String, Array<F>>,
}

impl<F: Real> Gradients<F> {
    pub fn get(&self, name: &str) -> Option<&Array<F>> {
        self.map.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Array<F>)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn remove(&mut self, name: &str) -> Option<Array<F>> {
        self.map.remove(name)
    }

    pub fn global_norm(&self) -> F {
        self.map.values().map(|g| g.sq_norm()).sum::<F>().sqrt()
    }

    /// Rescales all gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: F) -> F {
        let norm = self.global_norm();
        if norm > max_norm && norm.is_finite() {
            let s = max_norm / norm;
            for g in self.map.values_mut() {
                for v in g.data_mut() {
                    *v *= s;
                }
            }
        }
        norm
    }
}

impl<F: Real> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Graph<F> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a value that is not differentiated.
    pub fn constant(&self, value: Array<F>) -> Var<'_, F> {
        self.push_node(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
            param: None,
        })
    }

    /// Records a trainable leaf whose gradient is reported under `name`.
    pub fn param(&self, name: impl Into<String>, value: Array<F>) -> Var<'_, F> {
        self.push_node(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
            param: Some(name.into()),
        })
    }

    fn push_node(&self, node: Node<F>) -> Var<'_, F> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    fn push(&self, value: Array<F>, op: Op<F>, inputs: &[usize]) -> Var<'_, F> {
        let requires_grad = {
            let nodes = self.nodes.borrow();
            inputs.iter().any(|&i| nodes[i].requires_grad)
        };
        self.push_node(Node {
            value,
            op,
            requires_grad,
            param: None,
        })
    }

    fn check_owner(&self, v: Var<'_, F>) -> Result<()> {
        if std::ptr::eq(v.graph, self) && v.id < self.len() {
            Ok(())
        } else {
            Err(Error::Graph(format!(
                "value #{} was not recorded on this graph",
                v.id
            )))
        }
    }

    /// Back-propagates from a scalar `loss`, returning the gradient of every
    /// parameter recorded on this graph. Parameters the loss does not depend
    /// on get a zero gradient.
    pub fn backward(&self, loss: Var<'_, F>) -> Result<Gradients<F>> {
        self.check_owner(loss)?;
        let nodes = self.nodes.borrow();
        if nodes[loss.id].value.len() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                nodes[loss.id].value.shape()
            )));
        }

        let mut grads: Vec<Option<Array<F>>> = (0..=loss.id).map(|_| None).collect();
        grads[loss.id] = Some(Array::full(nodes[loss.id].value.shape().to_vec(), F::one()));

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            if let Op::Leaf = node.op {
                grads[id] = Some(g);
                continue;
            }
            backprop_node(&nodes, id, &g, &mut grads);
        }

        let mut map = BTreeMap::new();
        for (id, node) in nodes.iter().enumerate() {
            if let Some(name) = &node.param {
                let g = grads
                    .get_mut(id)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Array::zeros(node.value.shape().to_vec()));
                map.insert(name.clone(), g);
            }
        }
        Ok(Gradients { map })
    }
}

fn accumulate<F: Real>(nodes: &[Node<F>], grads: &mut [Option<Array<F>>], id: usize, g: Array<F>) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn backprop_node<F: Real>(
    nodes: &[Node<F>],
    id: usize,
    g: &Array<F>,
    grads: &mut [Option<Array<F>>],
) {
    let out = &nodes[id].value;
    let val = |i: usize| &nodes[i].value;
    let needs = |i: usize| nodes[i].requires_grad;
    match &nodes[id].op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            accumulate(nodes, grads, *a, g.clone());
            accumulate(nodes, grads, *b, g.clone());
        }
        Op::Sub(a, b) => {
            accumulate(nodes, grads, *a, g.clone());
            accumulate(nodes, grads, *b, g.map(|v| -v));
        }
        Op::Mul(a, b) => {
            if needs(*a) {
                accumulate(nodes, grads, *a, ops::zip_map(g, val(*b), |g, y| g * y));
            }
            if needs(*b) {
                accumulate(nodes, grads, *b, ops::zip_map(g, val(*a), |g, x| g * x));
            }
        }
        Op::Affine { x, scale } => {
            let s = *scale;
            accumulate(nodes, grads, *x, g.map(|v| v * s));
        }
        Op::Sum(x) => {
            let gv = g.item();
            accumulate(nodes, grads, *x, Array::full(val(*x).shape().to_vec(), gv));
        }
        Op::Mean(x) => {
            let n = F::lit(val(*x).len() as f64);
            accumulate(
                nodes,
                grads,
                *x,
                Array::full(val(*x).shape().to_vec(), g.item() / n),
            );
        }
        Op::Reshape(x) => {
            let r = g
                .clone()
                .reshape(val(*x).shape().to_vec())
                .expect("reshape");
            accumulate(nodes, grads, *x, r);
        }
        Op::Concat { inputs, axis } => {
            let mut start = 0;
            for &i in inputs {
                let len = val(i).shape()[*axis];
                if needs(i) {
                    accumulate(nodes, grads, i, ops::slice_axis(g, *axis, start, len));
                }
                start += len;
            }
        }
        Op::Slice { x, axis, start } => {
            let r = ops::slice_backward(g, val(*x).shape(), *axis, *start);
            accumulate(nodes, grads, *x, r);
        }
        Op::Upsample { x, factor } => {
            accumulate(nodes, grads, *x, ops::upsample_backward(g, *factor));
        }
        Op::MatMul(a, b) => {
            if needs(*a) {
                accumulate(nodes, grads, *a, ops::matmul_nt(g, val(*b)));
            }
            if needs(*b) {
                accumulate(nodes, grads, *b, ops::matmul_tn(val(*a), g));
            }
        }
        Op::BatchMatMul(a, b) => {
            if needs(*a) {
                let bt = ops::transpose_last(val(*b));
                accumulate(nodes, grads, *a, ops::bmm(g, &bt));
            }
            if needs(*b) {
                let at = ops::transpose_last(val(*a));
                accumulate(nodes, grads, *b, ops::bmm(&at, g));
            }
        }
        Op::Transpose(x) => {
            accumulate(nodes, grads, *x, ops::transpose_last(g));
        }
        Op::RowBias { x, bias } => {
            accumulate(nodes, grads, *x, g.clone());
            if needs(*bias) {
                accumulate(nodes, grads, *bias, ops::row_bias_backward(g, val(*bias)));
            }
        }
        Op::ChannelBias { x, bias } => {
            accumulate(nodes, grads, *x, g.clone());
            if needs(*bias) {
                accumulate(
                    nodes,
                    grads,
                    *bias,
                    ops::channel_bias_backward(g, val(*bias)),
                );
            }
        }
        Op::MaskReplace { x, keep } => {
            let mut r = g.clone();
            for (v, &k) in r.data_mut().iter_mut().zip(keep) {
                if !k {
                    *v = F::zero();
                }
            }
            accumulate(nodes, grads, *x, r);
        }
        Op::Conv1d { x, w, b, geom } => {
            let (gx, gw, gb) = ops::conv1d_backward(
                val(*x),
                val(*w),
                g,
                *geom,
                needs(*x),
                needs(*w),
                b.is_some_and(&needs),
            );
            if let Some(gx) = gx {
                accumulate(nodes, grads, *x, gx);
            }
            if let Some(gw) = gw {
                accumulate(nodes, grads, *w, gw);
            }
            if let (Some(b), Some(gb)) = (b, gb) {
                accumulate(nodes, grads, *b, gb);
            }
        }
        Op::GroupNorm {
            x,
            gamma,
            beta,
            groups,
            stats,
        } => {
            let (gx, ggamma, gbeta) =
                ops::group_norm_backward(val(*x), val(*gamma), g, *groups, stats);
            accumulate(nodes, grads, *x, gx);
            accumulate(nodes, grads, *gamma, ggamma);
            accumulate(nodes, grads, *beta, gbeta);
        }
        Op::Activation { x, kind } => {
            accumulate(
                nodes,
                grads,
                *x,
                ops::activation_backward(*kind, val(*x), out, g),
            );
        }
        Op::Pool {
            x,
            kind,
            kernel,
            stride,
            argmax,
        } => {
            let r = ops::pool1d_backward(val(*x).shape(), *kind, *kernel, *stride, argmax, g);
            accumulate(nodes, grads, *x, r);
        }
        Op::Softmax { x, axis } => {
            accumulate(nodes, grads, *x, ops::softmax_backward(out, g, *axis));
        }
        Op::Mmd { x, y, bandwidths } => {
            let (gx, gy) = ops::mmd_backward(val(*x), val(*y), bandwidths, g.item());
            if needs(*x) {
                accumulate(nodes, grads, *x, gx);
            }
            if needs(*y) {
                accumulate(nodes, grads, *y, gy);
            }
        }
    }
}

impl<'g, F: Real> Var<'g, F> {
    pub fn graph(&self) -> &'g Graph<F> {
        self.graph
    }

    /// Borrow of the forward value. Drop it before recording further
    /// operations on the same graph.
    pub fn value(&self) -> Ref<'g, Array<F>> {
        Ref::map(self.graph.nodes.borrow(), |n| &n[self.id].value)
    }

    pub fn to_array(&self) -> Array<F> {
        self.value().clone()
    }

    pub fn item(&self) -> F {
        self.value().item()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    fn same_graph(&self, other: Var<'g, F>) -> Result<()> {
        if std::ptr::eq(self.graph, other.graph) {
            Ok(())
        } else {
            Err(Error::Graph("operands live on different graphs".into()))
        }
    }

    fn elementwise(
        self,
        other: Var<'g, F>,
        f: impl Fn(F, F) -> F,
        op: fn(usize, usize) -> Op<F>,
        name: &str,
    ) -> Result<Var<'g, F>> {
        self.same_graph(other)?;
        let value = {
            let a = self.value();
            let b = other.value();
            if a.shape() != b.shape() {
                return Err(Error::shape(format!(
                    "{name}: shapes {:?} and {:?} differ",
                    a.shape(),
                    b.shape()
                )));
            }
            ops::zip_map(&a, &b, f)
        };
        Ok(self
            .graph
            .push(value, op(self.id, other.id), &[self.id, other.id]))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Var<'g, F>) -> Result<Var<'g, F>> {
        self.elementwise(other, |a, b| a + b, Op::Add, "add")
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: Var<'g, F>) -> Result<Var<'g, F>> {
        self.elementwise(other, |a, b| a - b, Op::Sub, "sub")
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, other: Var<'g, F>) -> Result<Var<'g, F>> {
        self.elementwise(other, |a, b| a * b, Op::Mul, "mul")
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(self, scale: F, shift: F) -> Var<'g, F> {
        let value = self.value().map(|v| scale * v + shift);
        self.graph
            .push(value, Op::Affine { x: self.id, scale }, &[self.id])
    }

    pub fn scale(self, s: F) -> Var<'g, F> {
        self.affine(s, F::zero())
    }

    pub fn sum(self) -> Var<'g, F> {
        let value = Array::scalar(self.value().sum());
        self.graph.push(value, Op::Sum(self.id), &[self.id])
    }

    pub fn mean(self) -> Var<'g, F> {
        let value = {
            let v = self.value();
            Array::scalar(v.sum() / F::lit(v.len() as f64))
        };
        self.graph.push(value, Op::Mean(self.id), &[self.id])
    }

    pub fn reshape(self, shape: impl Into<Vec<usize>>) -> Result<Var<'g, F>> {
        let value = self.to_array().reshape(shape)?;
        Ok(self.graph.push(value, Op::Reshape(self.id), &[self.id]))
    }

    /// Concatenates `parts` along `axis`; all other extents must agree.
    pub fn concat(parts: &[Var<'g, F>], axis: usize) -> Result<Var<'g, F>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat of zero arrays"))?;
        for p in parts {
            first.same_graph(*p)?;
        }
        let value = {
            let vals: Vec<_> = parts.iter().map(|p| p.value()).collect();
            let refs: Vec<&Array<F>> = vals.iter().map(|v| &**v).collect();
            ops::concat(&refs, axis)?
        };
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        Ok(first.graph.push(
            value,
            Op::Concat {
                inputs: ids.clone(),
                axis,
            },
            &ids,
        ))
    }

    /// Takes `len` entries starting at `start` along `axis`.
    pub fn slice(self, axis: usize, start: usize, len: usize) -> Result<Var<'g, F>> {
        let value = {
            let v = self.value();
            if axis >= v.ndim() || start + len > v.shape()[axis] {
                return Err(Error::shape(format!(
                    "slice [{start}, {}) out of bounds for axis {axis} of {:?}",
                    start + len,
                    v.shape()
                )));
            }
            ops::slice_axis(&v, axis, start, len)
        };
        Ok(self.graph.push(
            value,
            Op::Slice {
                x: self.id,
                axis,
                start,
            },
            &[self.id],
        ))
    }

    /// Nearest-neighbour upsampling of the last axis by `factor`.
    pub fn upsample_nearest(self, factor: usize) -> Result<Var<'g, F>> {
        if factor == 0 {
            return Err(Error::config("upsample factor must be >= 1"));
        }
        let value = ops::upsample(&self.value(), factor);
        Ok(self
            .graph
            .push(value, Op::Upsample { x: self.id, factor }, &[self.id]))
    }

    /// Plain 2-D matrix product.
    pub fn matmul(self, other: Var<'g, F>) -> Result<Var<'g, F>> {
        self.same_graph(other)?;
        let value = ops::matmul(&self.value(), &other.value())?;
        Ok(self
            .graph
            .push(value, Op::MatMul(self.id, other.id), &[self.id, other.id]))
    }

    /// Batched product of `[B, M, K]` and `[B, K, N]`.
    pub fn bmm(self, other: Var<'g, F>) -> Result<Var<'g, F>> {
        self.same_graph(other)?;
        let value = {
            let (a, b) = (self.value(), other.value());
            ops::check_bmm(&a, &b)?;
            ops::bmm(&a, &b)
        };
        Ok(self.graph.push(
            value,
            Op::BatchMatMul(self.id, other.id),
            &[self.id, other.id],
        ))
    }

    /// Swaps the last two axes.
    pub fn transpose(self) -> Result<Var<'g, F>> {
        let value = {
            let v = self.value();
            if v.ndim() < 2 {
                return Err(Error::shape("transpose needs at least 2 axes"));
            }
            ops::transpose_last(&v)
        };
        Ok(self.graph.push(value, Op::Transpose(self.id), &[self.id]))
    }

    /// Adds `bias` (shape `[N]`) to every row of a `[..., N]` array.
    pub fn add_row_bias(self, bias: Var<'g, F>) -> Result<Var<'g, F>> {
        self.same_graph(bias)?;
        let value = ops::add_row_bias(&self.value(), &bias.value())?;
        Ok(self.graph.push(
            value,
            Op::RowBias {
                x: self.id,
                bias: bias.id,
            },
            &[self.id, bias.id],
        ))
    }

    /// Adds a per-channel bias to `[B, C, L]` (bias `[C]` or `[B, C]`) or
    /// `[C, L]` (bias `[C]`).
    pub fn add_channel_bias(self, bias: Var<'g, F>) -> Result<Var<'g, F>> {
        self.same_graph(bias)?;
        let value = ops::add_channel_bias(&self.value(), &bias.value())?;
        Ok(self.graph.push(
            value,
            Op::ChannelBias {
                x: self.id,
                bias: bias.id,
            },
            &[self.id, bias.id],
        ))
    }

    /// Replaces entries where `keep` is false with the matching entry of
    /// `replacement`. Replaced entries carry no gradient.
    pub fn mask_replace(self, keep: Vec<bool>, replacement: &Array<F>) -> Result<Var<'g, F>> {
        let value = {
            let v = self.value();
            if keep.len() != v.len() || replacement.shape() != v.shape() {
                return Err(Error::shape(
                    "mask/replacement do not match the input shape",
                ));
            }
            let data = v
                .data()
                .iter()
                .zip(&keep)
                .zip(replacement.data())
                .map(|((&x, &k), &r)| if k { x } else { r })
                .collect();
            Array::new(v.shape().to_vec(), data)?
        };
        Ok(self
            .graph
            .push(value, Op::MaskReplace { x: self.id, keep }, &[self.id]))
    }

    /// 1-D cross-correlation over `[C_in, L]` or `[B, C_in, L]` with weight
    /// `[C_out, C_in, k]` and optional bias `[C_out]`.
    pub fn conv1d(
        self,
        weight: Var<'g, F>,
        bias: Option<Var<'g, F>>,
        stride: usize,
        padding: ops::Padding,
    ) -> Result<Var<'g, F>> {
        self.same_graph(weight)?;
        if let Some(b) = bias {
            self.same_graph(b)?;
        }
        let (value, geom) = {
            let x = self.value();
            let w = weight.value();
            let b = bias.map(|b| b.value());
            ops::conv1d(&x, &w, b.as_deref(), stride, padding)?
        };
        let mut inputs = vec![self.id, weight.id];
        if let Some(b) = bias {
            inputs.push(b.id);
        }
        Ok(self.graph.push(
            value,
            Op::Conv1d {
                x: self.id,
                w: weight.id,
                b: bias.map(|b| b.id),
                geom,
            },
            &inputs,
        ))
    }

    pub fn group_norm(
        self,
        groups: usize,
        gamma: Var<'g, F>,
        beta: Var<'g, F>,
        eps: F,
    ) -> Result<Var<'g, F>> {
        self.same_graph(gamma)?;
        self.same_graph(beta)?;
        let (value, stats) =
            ops::group_norm(&self.value(), groups, &gamma.value(), &beta.value(), eps)?;
        Ok(self.graph.push(
            value,
            Op::GroupNorm {
                x: self.id,
                gamma: gamma.id,
                beta: beta.id,
                groups,
                stats,
            },
            &[self.id, gamma.id, beta.id],
        ))
    }

    pub fn activation(self, kind: Activation) -> Var<'g, F> {
        let value = ops::activation(&self.value(), kind);
        self.graph
            .push(value, Op::Activation { x: self.id, kind }, &[self.id])
    }

    pub fn silu(self) -> Var<'g, F> {
        self.activation(Activation::Silu)
    }

    pub fn gelu(self) -> Var<'g, F> {
        self.activation(Activation::Gelu)
    }

    pub fn sigmoid(self) -> Var<'g, F> {
        self.activation(Activation::Sigmoid)
    }

    pub fn tanh(self) -> Var<'g, F> {
        self.activation(Activation::Tanh)
    }

    /// Pooling over the last axis with replicate padding.
    pub fn pool1d(self, kind: PoolKind, kernel: usize, stride: usize) -> Result<Var<'g, F>> {
        let (value, argmax) = ops::pool1d(&self.value(), kind, kernel, stride)?;
        Ok(self.graph.push(
            value,
            Op::Pool {
                x: self.id,
                kind,
                kernel,
                stride,
                argmax,
            },
            &[self.id],
        ))
    }

    pub fn softmax(self, axis: usize) -> Result<Var<'g, F>> {
        let value = ops::softmax(&self.value(), axis)?;
        Ok(self
            .graph
            .push(value, Op::Softmax { x: self.id, axis }, &[self.id]))
    }

    /// Biased squared-MMD estimate between the rows of `self` (`[N, D]`) and
    /// the rows of `other` (`[M, D]`) under an equal-weight mixture of RBF
    /// kernels with the given bandwidths.
    pub fn mmd(self, other: Var<'g, F>, bandwidths: &[F]) -> Result<Var<'g, F>> {
        self.same_graph(other)?;
        let value = {
            let (x, y) = (self.value(), other.value());
            ops::check_mmd(&x, &y, bandwidths)?;
            Array::scalar(ops::mmd_value(&x, &y, bandwidths))
        };
        Ok(self.graph.push(
            value,
            Op::Mmd {
                x: self.id,
                y: other.id,
                bandwidths: bandwidths.to_vec(),
            },
            &[self.id, other.id],
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient() {
        let g = Graph::<f64>::new();
        let x = g.param("x", Array::from_f64(vec![2], &[1.0, 2.0]).unwrap());
        let loss = x.mul(x).unwrap().sum();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get("x").unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn unused_parameter_gets_zero_gradient() {
        let g = Graph::<f64>::new();
        let x = g.param("x", Array::from_f64(vec![2], &[1.0, 2.0]).unwrap());
        let _p = g.param("p", Array::from_f64(vec![3], &[5.0, 6.0, 7.0]).unwrap());
        let loss = x.sum();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get("p").unwrap().data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn foreign_value_is_a_graph_error() {
        let g1 = Graph::<f64>::new();
        let g2 = Graph::<f64>::new();
        let x = g1.param("x", Array::scalar(1.0));
        let loss = x.mul(x).unwrap();
        assert!(matches!(g2.backward(loss), Err(Error::Graph(_))));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let g = Graph::<f64>::new();
        let x = g.param("x", Array::zeros(vec![3]));
        assert!(matches!(g.backward(x), Err(Error::Shape(_))));
    }

    #[test]
    fn shared_input_accumulates() {
        // d/dx (x*x + 3x) = 2x + 3
        let g = Graph::<f64>::new();
        let x = g.param("x", Array::scalar(2.0));
        let y = x.mul(x).unwrap().add(x.scale(3.0)).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get("x").unwrap().item(), 7.0);
    }

    #[test]
    fn clip_scales_to_max_norm() {
        let g = Graph::<f64>::new();
        let x = g.param("x", Array::from_f64(vec![2], &[3.0, 4.0]).unwrap());
        let loss = x.mul(x).unwrap().sum().scale(0.5);
        let mut grads = g.backward(loss).unwrap();
        let before = grads.clip_global_norm(1.0);
        assert!((before - 5.0).abs() < 1e-12);
        assert!((grads.global_norm() - 1.0).abs() < 1e-12);
    }
}
