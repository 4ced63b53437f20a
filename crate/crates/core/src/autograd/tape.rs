use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::kernels;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Softmax {
        x: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Gelu(Var),
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        ignore_id: usize,
        probs: Vec<f64>,
        count: usize,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
}

#[derive(Debug)]
pub(crate) struct Node {
    pub(crate) value: Tensor,
    pub(crate) op: Op,
}

/// Record of executed operations, replayed in reverse by [`Tape::backward`].
///
/// Nodes are appended in execution order, so index order is a topological
/// order of the graph.
#[derive(Debug, Default)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
    no_grad: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape on which nothing requires gradients; used for inference.
    pub fn no_grad() -> Self {
        Self {
            nodes: Vec::new(),
            no_grad: true,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every recorded node.
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    /// Drops nodes recorded after the first `len`.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
    }

    /// Records a leaf. It participates in differentiation iff the tensor's
    /// `requires_grad` flag is set and the tape is not in no-grad mode.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        let requires = tensor.requires_grad() && !self.no_grad;
        self.push(tensor.with_requires_grad(requires), Op::Leaf)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, tensor: Tensor) -> Var {
        self.push(tensor.with_requires_grad(false), Op::Leaf)
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, tensor: Tensor) -> Var {
        self.leaf(tensor.with_requires_grad(true))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    /// Clears accumulated gradients on every node.
    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            node.value.zero_grad();
        }
    }

    pub(crate) fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].value.requires_grad()
    }

    pub(crate) fn push_op(&mut self, data: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires = !self.no_grad && inputs.iter().any(|&v| self.requires(v));
        self.push(data.with_requires_grad(requires), op)
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Propagates d(loss)/d(node) to every node that requires a gradient,
    /// adding into each node's accumulator.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Shape {
                op: "backward (loss must be scalar)",
                lhs: self.shape(loss).to_vec(),
                rhs: vec![],
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !self.nodes[idx].value.requires_grad() {
                continue;
            }
            self.propagate(idx, &g, &mut grads);
            self.nodes[idx].value.accumulate_grad(&g);
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let out = &node.value;
        let mut send = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.requires(v) {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.numel()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let n = self.dims(*b).1;
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                send(*a, &mut |da| kernels::acc_a_bt(da, g, bv, m, n, k));
                send(*b, &mut |db| kernels::acc_at_b(db, av, g, m, k, n));
            }
            Op::Transpose(a) => {
                let (r, c) = self.dims(*a);
                send(*a, &mut |da| {
                    for i in 0..r {
                        for j in 0..c {
                            da[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                send(*a, &mut |da| add_into(da, g));
                send(*b, &mut |db| add_into(db, g));
            }
            Op::AddRow(a, bias) => {
                let n = self.value(*bias).numel();
                send(*a, &mut |da| add_into(da, g));
                send(*bias, &mut |db| {
                    for row in g.chunks(n) {
                        add_into(db, row);
                    }
                });
            }
            Op::Mul(a, b) => {
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                send(*a, &mut |da| {
                    for ((d, gi), bi) in da.iter_mut().zip(g).zip(bv) {
                        *d += gi * bi;
                    }
                });
                send(*b, &mut |db| {
                    for ((d, gi), ai) in db.iter_mut().zip(g).zip(av) {
                        *d += gi * ai;
                    }
                });
            }
            Op::Scale(a, c) => send(*a, &mut |da| {
                for (d, gi) in da.iter_mut().zip(g) {
                    *d += c * gi;
                }
            }),
            Op::Sum(a) => send(*a, &mut |da| da.iter_mut().for_each(|d| *d += g[0])),
            Op::Softmax {
                x,
                outer,
                len,
                inner,
            } => {
                let y = out.data();
                send(*x, &mut |dx| {
                    for o in 0..*outer {
                        for i in 0..*inner {
                            let at = |a: usize| (o * len + a) * inner + i;
                            let dot: f64 = (0..*len).map(|a| g[at(a)] * y[at(a)]).sum();
                            for a in 0..*len {
                                dx[at(a)] += y[at(a)] * (g[at(a)] - dot);
                            }
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            } => {
                let n = self.value(*gain).numel();
                let gv = self.value(*gain).data();
                send(*x, &mut |dx| {
                    for (row, ((gr, xh), r)) in g
                        .chunks(n)
                        .zip(normalized.chunks(n))
                        .zip(inv_std)
                        .enumerate()
                    {
                        let dxhat: Vec<f64> = gr.iter().zip(gv).map(|(a, b)| a * b).collect();
                        let mean_d = dxhat.iter().sum::<f64>() / n as f64;
                        let mean_dx =
                            dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                        let dst = &mut dx[row * n..(row + 1) * n];
                        for j in 0..n {
                            dst[j] += r * (dxhat[j] - mean_d - xh[j] * mean_dx);
                        }
                    }
                });
                send(*gain, &mut |dg| {
                    for (gr, xh) in g.chunks(n).zip(normalized.chunks(n)) {
                        for j in 0..n {
                            dg[j] += gr[j] * xh[j];
                        }
                    }
                });
                send(*bias, &mut |db| {
                    for gr in g.chunks(n) {
                        add_into(db, gr);
                    }
                });
            }
            Op::Gelu(x) => {
                let xv = self.value(*x).data();
                send(*x, &mut |dx| {
                    for ((d, gi), &xi) in dx.iter_mut().zip(g).zip(xv) {
                        *d += gi * kernels::gelu_grad(xi);
                    }
                });
            }
            Op::Embedding { table, ids } => {
                let d = self.value(*table).shape()[1];
                send(*table, &mut |dt| {
                    for (pos, &id) in ids.iter().enumerate() {
                        add_into(&mut dt[id * d..(id + 1) * d], &g[pos * d..(pos + 1) * d]);
                    }
                });
            }
            Op::CrossEntropy {
                logits,
                targets,
                ignore_id,
                probs,
                count,
            } => {
                let v = self.value(*logits).shape()[1];
                let scale = g[0] / *count as f64;
                send(*logits, &mut |dl| {
                    for (i, &t) in targets.iter().enumerate() {
                        if t == *ignore_id {
                            continue;
                        }
                        let row = &mut dl[i * v..(i + 1) * v];
                        for (j, d) in row.iter_mut().enumerate() {
                            let onehot = if j == t { 1.0 } else { 0.0 };
                            *d += scale * (probs[i * v + j] - onehot);
                        }
                    }
                });
            }
            Op::SliceCols { x, start } => {
                let (rows, cols) = self.dims(*x);
                let width = out.shape()[1];
                send(*x, &mut |dx| {
                    for r in 0..rows {
                        add_into(
                            &mut dx[r * cols + start..r * cols + start + width],
                            &g[r * width..(r + 1) * width],
                        );
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let total = out.shape()[1];
                let mut offset = 0;
                for &p in parts {
                    let (rows, width) = self.dims(p);
                    send(p, &mut |dp| {
                        for r in 0..rows {
                            add_into(
                                &mut dp[r * width..(r + 1) * width],
                                &g[r * total + offset..r * total + offset + width],
                            );
                        }
                    });
                    offset += width;
                }
            }
        }
    }

    pub(crate) fn dims(&self, v: Var) -> (usize, usize) {
        let s = self.shape(v);
        (s[0], s[1])
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
