use std::collections::BTreeMap;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`]. Only valid for the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

/// Fill value for masked attention/copy scores. Finite so gradients stay
/// finite, yet small enough that exp underflows to exactly 0 after the
/// softmax max-subtraction.
pub const MASK_FILL: f64 = -1e30;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Concat { parts: Vec<NodeId> },
    StackRows { rows: Vec<NodeId> },
    RowLookup { table: NodeId, index: usize },
    GatherRows { src: NodeId, indices: Vec<usize> },
    Gather { src: NodeId, indices: Vec<usize> },
    GroupSum { src: NodeId, groups: Vec<Vec<usize>> },
    Slice { src: NodeId, start: usize },
    PadRows { src: NodeId },
    Sigmoid { x: NodeId },
    Tanh { x: NodeId },
    SoftmaxLastDim { x: NodeId },
    Log { x: NodeId },
    ClampMin { x: NodeId, floor: f64 },
    MaskedFill { x: NodeId, mask: NodeId },
    Sum { x: NodeId },
    Scale { x: NodeId, factor: f64 },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Gradients keyed by parameter name. Shapes mirror the parameters.
#[derive(Debug, Clone, Default)]
pub struct GradientMap(BTreeMap<String, Tensor>);

impl GradientMap {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.0.get(name)
    }

    pub fn insert(&mut self, name: String, grad: Tensor) {
        self.0.insert(name, grad);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.0.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.0.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Elementwise accumulation; entries missing on one side are adopted.
    pub fn accumulate(&mut self, other: &GradientMap) {
        for (name, grad) in other.iter() {
            match self.0.get_mut(name) {
                Some(existing) => existing.add_assign(grad),
                None => {
                    self.0.insert(name.clone(), grad.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.0.values_mut() {
            g.scale_assign(factor);
        }
    }

    /// L2 norm over the concatenation of every gradient tensor.
    pub fn global_norm(&self) -> f64 {
        self.0.values().map(Tensor::sq_norm).sum::<f64>().sqrt()
    }
}

/// Append-only record of forward operations. Node ids are topologically
/// ordered by construction: every input id precedes its consumer.
///
/// A tape and its tensors are a single-threaded unit of work; independent
/// tapes may run on different threads.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(String, NodeId)>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        debug_assert!(
            value.all_finite(),
            "non-finite forward value from {:?}",
            op
        );
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant input; receives no gradient entry.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Named trainable leaf; `backward` reports its gradient under `name`.
    pub fn param(&mut self, name: impl Into<String>, value: Tensor) -> NodeId {
        let id = self.push(Op::Leaf, value);
        self.params.push((name.into(), id));
        id
    }

    /// `[m,k]·[k,n] -> [m,n]`; 1-D operands act as a row (left) or column
    /// (right) vector and the unit dimension is squeezed from the result.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k_left) = (ta.rows(), ta.cols());
        let (k_right, n) = if tb.rank() == 1 {
            (tb.len(), 1)
        } else {
            (tb.shape()[0], tb.shape()[1])
        };
        if k_left != k_right {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let k = k_left;
        let mut out = vec![0.0; m * n];
        let (da, db) = (ta.data(), tb.data());
        for i in 0..m {
            for p in 0..k {
                let aip = da[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += aip * db[p * n + j];
                }
            }
        }
        let a_vec = ta.rank() == 1;
        let b_vec = tb.rank() == 1;
        let shape = match (a_vec, b_vec) {
            (true, true) => vec![1],
            (true, false) => vec![n],
            (false, true) => vec![m],
            (false, false) => vec![m, n],
        };
        let value = Tensor::new(shape, out)?;
        Ok(self.push(Op::MatMul { a, b }, value))
    }

    /// Elementwise addition; also accepts `[m,n] + [n]` row-wise bias.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        let value = if ta.shape() == tb.shape() {
            let data = ta
                .data()
                .iter()
                .zip(tb.data())
                .map(|(x, y)| x + y)
                .collect();
            Tensor::new(ta.shape().to_vec(), data)?
        } else if ta.rank() == 2 && tb.rank() == 1 && ta.cols() == tb.len() {
            let n = ta.cols();
            let data = ta
                .data()
                .iter()
                .enumerate()
                .map(|(i, x)| x + tb.data()[i % n])
                .collect();
            Tensor::new(ta.shape().to_vec(), data)?
        } else {
            return Err(Error::ShapeMismatch {
                op: "add",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        };
        Ok(self.push(Op::Add { a, b }, value))
    }

    /// Elementwise product; shapes must match exactly.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::ShapeMismatch {
                op: "elementwise_mul",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(Op::Mul { a, b }, value))
    }

    /// Concatenates 1-D tensors.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.rank() != 1 {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    left: t.shape().to_vec(),
                    right: vec![],
                });
            }
            data.extend_from_slice(t.data());
        }
        let value = Tensor::vector(data);
        Ok(self.push(
            Op::Concat {
                parts: parts.to_vec(),
            },
            value,
        ))
    }

    /// Stacks equal-length 1-D tensors into a `[T,d]` matrix.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        assert!(!rows.is_empty(), "stack_rows of nothing");
        let d = self.value(rows[0]).len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            let t = self.value(r);
            if t.rank() != 1 || t.len() != d {
                return Err(Error::ShapeMismatch {
                    op: "stack_rows",
                    left: vec![d],
                    right: t.shape().to_vec(),
                });
            }
            data.extend_from_slice(t.data());
        }
        let value = Tensor::new(vec![rows.len(), d], data)?;
        Ok(self.push(
            Op::StackRows {
                rows: rows.to_vec(),
            },
            value,
        ))
    }

    /// Row `index` of a `[V,d]` table — the embedding lookup.
    pub fn row_lookup(&mut self, table: NodeId, index: usize) -> Result<NodeId> {
        let t = self.value(table);
        let rows = t.rows();
        if t.rank() != 2 || index >= rows {
            return Err(Error::IndexOutOfRange {
                index,
                extent: rows,
            });
        }
        let d = t.cols();
        let value = Tensor::vector(t.data()[index * d..(index + 1) * d].to_vec());
        Ok(self.push(Op::RowLookup { table, index }, value))
    }

    /// Selected rows of a matrix, in the given order.
    pub fn gather_rows(&mut self, src: NodeId, indices: &[usize]) -> Result<NodeId> {
        let t = self.value(src);
        let rows = t.rows();
        let d = t.cols();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= rows {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    extent: rows,
                });
            }
            data.extend_from_slice(&t.data()[i * d..(i + 1) * d]);
        }
        let value = Tensor::new(vec![indices.len(), d], data)?;
        Ok(self.push(
            Op::GatherRows {
                src,
                indices: indices.to_vec(),
            },
            value,
        ))
    }

    /// Selected elements of a 1-D tensor, in the given order.
    pub fn gather(&mut self, src: NodeId, indices: &[usize]) -> Result<NodeId> {
        let t = self.value(src);
        let n = t.len();
        let mut data = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= n {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    extent: n,
                });
            }
            data.push(t.data()[i]);
        }
        let value = Tensor::vector(data);
        Ok(self.push(
            Op::Gather {
                src,
                indices: indices.to_vec(),
            },
            value,
        ))
    }

    /// `out[g] = Σ src[i] for i in groups[g]`. An empty group yields exactly
    /// 0.0. Pools per-position copy probabilities onto shared outcomes.
    pub fn group_sum(&mut self, src: NodeId, groups: Vec<Vec<usize>>) -> Result<NodeId> {
        let t = self.value(src);
        let n = t.len();
        let mut data = Vec::with_capacity(groups.len());
        for group in &groups {
            let mut acc = 0.0;
            for &i in group {
                if i >= n {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        extent: n,
                    });
                }
                acc += t.data()[i];
            }
            data.push(acc);
        }
        let value = Tensor::vector(data);
        Ok(self.push(Op::GroupSum { src, groups }, value))
    }

    /// Contiguous slice of a 1-D tensor.
    pub fn slice(&mut self, src: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let t = self.value(src);
        if t.rank() != 1 || start + len > t.len() {
            return Err(Error::IndexOutOfRange {
                index: start + len,
                extent: t.len(),
            });
        }
        let value = Tensor::vector(t.data()[start..start + len].to_vec());
        Ok(self.push(Op::Slice { src, start }, value))
    }

    /// Extends a `[k,d]` matrix to `[total_rows,d]` with zero rows.
    pub fn pad_rows(&mut self, src: NodeId, total_rows: usize) -> Result<NodeId> {
        let t = self.value(src);
        let (k, d) = (t.rows(), t.cols());
        if t.rank() != 2 || total_rows < k {
            return Err(Error::ShapeMismatch {
                op: "pad_rows",
                left: t.shape().to_vec(),
                right: vec![total_rows, d],
            });
        }
        let mut data = t.data().to_vec();
        data.resize(total_rows * d, 0.0);
        let value = Tensor::new(vec![total_rows, d], data)?;
        Ok(self.push(Op::PadRows { src }, value))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let data = self
            .value(x)
            .data()
            .iter()
            .map(|&v| 1.0 / (1.0 + (-v).exp()))
            .collect();
        let value = Tensor::new(self.value(x).shape().to_vec(), data).unwrap();
        self.push(Op::Sigmoid { x }, value)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let data = self.value(x).data().iter().map(|v| v.tanh()).collect();
        let value = Tensor::new(self.value(x).shape().to_vec(), data).unwrap();
        self.push(Op::Tanh { x }, value)
    }

    /// Softmax along the last dimension (per row for matrices), computed with
    /// max-subtraction.
    pub fn softmax_lastdim(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let cols = t.cols();
        let mut data = t.data().to_vec();
        for row in data.chunks_mut(cols) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                z += *v;
            }
            for v in row.iter_mut() {
                *v /= z;
            }
        }
        let value = Tensor::new(t.shape().to_vec(), data).unwrap();
        self.push(Op::SoftmaxLastDim { x }, value)
    }

    /// Natural log; inputs must be positive — clamp first when they may not be.
    pub fn log(&mut self, x: NodeId) -> NodeId {
        let data = self.value(x).data().iter().map(|v| v.ln()).collect();
        let value = Tensor::new(self.value(x).shape().to_vec(), data).unwrap();
        self.push(Op::Log { x }, value)
    }

    /// `max(x, floor)` elementwise; gradient is zero where the floor binds.
    pub fn clamp_min(&mut self, x: NodeId, floor: f64) -> NodeId {
        let data = self.value(x).data().iter().map(|v| v.max(floor)).collect();
        let value = Tensor::new(self.value(x).shape().to_vec(), data).unwrap();
        self.push(Op::ClampMin { x, floor }, value)
    }

    /// Where `mask` is 0 the output is [`MASK_FILL`]; elsewhere it is `x`.
    pub fn masked_fill(&mut self, x: NodeId, mask: NodeId) -> Result<NodeId> {
        let (tx, tm) = (self.value(x), self.value(mask));
        if tx.shape() != tm.shape() {
            return Err(Error::ShapeMismatch {
                op: "masked_fill",
                left: tx.shape().to_vec(),
                right: tm.shape().to_vec(),
            });
        }
        let data = tx
            .data()
            .iter()
            .zip(tm.data())
            .map(|(&v, &m)| if m != 0.0 { v } else { MASK_FILL })
            .collect();
        let value = Tensor::new(tx.shape().to_vec(), data)?;
        Ok(self.push(Op::MaskedFill { x, mask }, value))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let value = Tensor::scalar(self.value(x).data().iter().sum());
        self.push(Op::Sum { x }, value)
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let data = self.value(x).data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(self.value(x).shape().to_vec(), data).unwrap();
        self.push(Op::Scale { x, factor }, value)
    }

    /// Reverse-mode gradient of a scalar `loss` with respect to every named
    /// parameter. Parameters the loss never touches get all-zero gradients.
    pub fn backward(&self, loss: NodeId) -> Result<GradientMap> {
        if !self.value(loss).is_scalar() {
            return Err(Error::NonScalarLoss {
                shape: self.value(loss).shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            // Leaves keep their gradients for the final map; interior
            // gradients are consumed here and freed.
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.push_back(i, &g, &mut grads);
        }

        let mut map = GradientMap::default();
        for (name, id) in &self.params {
            let grad = grads[id.0]
                .take()
                .unwrap_or_else(|| Tensor::zeros(self.value(*id).shape()));
            map.insert(name.clone(), grad);
        }
        Ok(map)
    }

    fn push_back(&self, i: usize, g: &Tensor, grads: &mut Vec<Option<Tensor>>) {
        let acc = |grads: &mut Vec<Option<Tensor>>, id: NodeId, delta: Tensor| {
            match &mut grads[id.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let m = ta.rows();
                let k = ta.cols();
                let n = if tb.rank() == 1 { 1 } else { tb.shape()[1] };
                let (da, db, dg) = (ta.data(), tb.data(), g.data());
                let mut ga = vec![0.0; m * k];
                let mut gb = vec![0.0; k * n];
                for i in 0..m {
                    for j in 0..n {
                        let gij = dg[i * n + j];
                        if gij == 0.0 {
                            continue;
                        }
                        for p in 0..k {
                            ga[i * k + p] += gij * db[p * n + j];
                            gb[p * n + j] += da[i * k + p] * gij;
                        }
                    }
                }
                acc(grads, *a, Tensor::new(ta.shape().to_vec(), ga).unwrap());
                acc(grads, *b, Tensor::new(tb.shape().to_vec(), gb).unwrap());
            }
            Op::Add { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if ta.shape() == tb.shape() {
                    acc(grads, *a, g.clone());
                    acc(grads, *b, g.clone());
                } else {
                    // Row-broadcast bias: gradient of the bias is the column sum.
                    let n = tb.len();
                    let mut gb = vec![0.0; n];
                    for (idx, gv) in g.data().iter().enumerate() {
                        gb[idx % n] += gv;
                    }
                    acc(grads, *a, g.clone());
                    acc(grads, *b, Tensor::vector(gb));
                }
            }
            Op::Mul { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let ga = g
                    .data()
                    .iter()
                    .zip(tb.data())
                    .map(|(gv, bv)| gv * bv)
                    .collect();
                let gb = g
                    .data()
                    .iter()
                    .zip(ta.data())
                    .map(|(gv, av)| gv * av)
                    .collect();
                acc(grads, *a, Tensor::new(ta.shape().to_vec(), ga).unwrap());
                acc(grads, *b, Tensor::new(tb.shape().to_vec(), gb).unwrap());
            }
            Op::Concat { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    let slice = Tensor::vector(g.data()[offset..offset + len].to_vec());
                    acc(grads, p, slice);
                    offset += len;
                }
            }
            Op::StackRows { rows } => {
                let d = self.value(rows[0]).len();
                for (r, &row) in rows.iter().enumerate() {
                    let slice = Tensor::vector(g.data()[r * d..(r + 1) * d].to_vec());
                    acc(grads, row, slice);
                }
            }
            Op::RowLookup { table, index } => {
                let t = self.value(*table);
                let d = t.cols();
                let mut gt = Tensor::zeros(t.shape());
                gt.data_mut()[index * d..(index + 1) * d].copy_from_slice(g.data());
                acc(grads, *table, gt);
            }
            Op::GatherRows { src, indices } => {
                let t = self.value(*src);
                let d = t.cols();
                let mut gt = Tensor::zeros(t.shape());
                for (r, &i) in indices.iter().enumerate() {
                    for c in 0..d {
                        gt.data_mut()[i * d + c] += g.data()[r * d + c];
                    }
                }
                acc(grads, *src, gt);
            }
            Op::Gather { src, indices } => {
                let mut gt = Tensor::zeros(self.value(*src).shape());
                for (out_i, &i) in indices.iter().enumerate() {
                    gt.data_mut()[i] += g.data()[out_i];
                }
                acc(grads, *src, gt);
            }
            Op::GroupSum { src, groups } => {
                let mut gt = Tensor::zeros(self.value(*src).shape());
                for (out_i, group) in groups.iter().enumerate() {
                    for &i in group {
                        gt.data_mut()[i] += g.data()[out_i];
                    }
                }
                acc(grads, *src, gt);
            }
            Op::Slice { src, start } => {
                let mut gt = Tensor::zeros(self.value(*src).shape());
                gt.data_mut()[*start..start + g.len()].copy_from_slice(g.data());
                acc(grads, *src, gt);
            }
            Op::PadRows { src } => {
                let t = self.value(*src);
                let kept = Tensor::new(t.shape().to_vec(), g.data()[..t.len()].to_vec()).unwrap();
                acc(grads, *src, kept);
            }
            Op::Sigmoid { x } => {
                let y = &self.nodes[i].value;
                let gx = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(gv, yv)| gv * yv * (1.0 - yv))
                    .collect();
                acc(grads, *x, Tensor::new(y.shape().to_vec(), gx).unwrap());
            }
            Op::Tanh { x } => {
                let y = &self.nodes[i].value;
                let gx = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(gv, yv)| gv * (1.0 - yv * yv))
                    .collect();
                acc(grads, *x, Tensor::new(y.shape().to_vec(), gx).unwrap());
            }
            Op::SoftmaxLastDim { x } => {
                let y = &self.nodes[i].value;
                let cols = y.cols();
                let mut gx = vec![0.0; y.len()];
                for r in 0..y.len() / cols {
                    let ys = &y.data()[r * cols..(r + 1) * cols];
                    let gs = &g.data()[r * cols..(r + 1) * cols];
                    let dot: f64 = ys.iter().zip(gs).map(|(yv, gv)| yv * gv).sum();
                    for c in 0..cols {
                        gx[r * cols + c] = ys[c] * (gs[c] - dot);
                    }
                }
                acc(grads, *x, Tensor::new(y.shape().to_vec(), gx).unwrap());
            }
            Op::Log { x } => {
                let t = self.value(*x);
                let gx = g
                    .data()
                    .iter()
                    .zip(t.data())
                    .map(|(gv, xv)| gv / xv)
                    .collect();
                acc(grads, *x, Tensor::new(t.shape().to_vec(), gx).unwrap());
            }
            Op::ClampMin { x, floor } => {
                let t = self.value(*x);
                let gx = g
                    .data()
                    .iter()
                    .zip(t.data())
                    .map(|(gv, xv)| if *xv > *floor { *gv } else { 0.0 })
                    .collect();
                acc(grads, *x, Tensor::new(t.shape().to_vec(), gx).unwrap());
            }
            Op::MaskedFill { x, mask } => {
                let tm = self.value(*mask);
                let gx = g
                    .data()
                    .iter()
                    .zip(tm.data())
                    .map(|(gv, mv)| if *mv != 0.0 { *gv } else { 0.0 })
                    .collect();
                acc(
                    grads,
                    *x,
                    Tensor::new(self.value(*x).shape().to_vec(), gx).unwrap(),
                );
            }
            Op::Sum { x } => {
                let t = self.value(*x);
                let gx = vec![g.data()[0]; t.len()];
                acc(grads, *x, Tensor::new(t.shape().to_vec(), gx).unwrap());
            }
            Op::Scale { x, factor } => {
                let gx = g.data().iter().map(|gv| gv * factor).collect();
                acc(
                    grads,
                    *x,
                    Tensor::new(self.value(*x).shape().to_vec(), gx).unwrap(),
                );
            }
        }
    }
}
