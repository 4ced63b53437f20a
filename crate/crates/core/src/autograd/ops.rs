//! Differentiable primitives. Each records one node on the tape.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::kernels;
use super::tape::{Op, Tape, Var};

impl Tape {
    fn shape_err(&self, op: &'static str, a: Var, b: Var) -> Error {
        Error::Shape {
            op,
            lhs: self.shape(a).to_vec(),
            rhs: self.shape(b).to_vec(),
        }
    }

    fn matrix(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        self.value(v).dims2(op)
    }

    /// Matrix product of `[m x k]` and `[k x n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix("matmul", a)?;
        let (k2, n) = self.matrix("matmul", b)?;
        if k != k2 {
            return Err(self.shape_err("matmul", a, b));
        }
        let data = kernels::matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        let t = Tensor::new([m, n], data)?;
        Ok(self.push_op(t, Op::MatMul(a, b), &[a, b]))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.matrix("transpose", a)?;
        let src = self.value(a).data();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = src[i * c + j];
            }
        }
        let t = Tensor::new([c, r], data)?;
        Ok(self.push_op(t, Op::Transpose(a), &[a]))
    }

    /// Elementwise sum of two same-shaped tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(self.shape_err("add", a, b));
        }
        let data = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x + y);
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push_op(t, Op::Add(a, b), &[a, b]))
    }

    /// Adds a length-`n` vector to every row of an `[m x n]` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (_, n) = self.matrix("add_row", a)?;
        if self.shape(bias) != [n] {
            return Err(self.shape_err("add_row", a, bias));
        }
        let b = self.value(bias).data();
        let data: Vec<f64> = self
            .value(a)
            .data()
            .chunks(n.max(1))
            .flat_map(|row| row.iter().zip(b).map(|(x, y)| x + y))
            .collect();
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push_op(t, Op::AddRow(a, bias), &[a, bias]))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(self.shape_err("mul", a, b));
        }
        let data = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x * y);
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push_op(t, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let data = self.value(a).data().iter().map(|x| x * c).collect();
        let t = Tensor::new(self.shape(a).to_vec(), data).expect("same shape");
        self.push_op(t, Op::Scale(a, c), &[a])
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().sum();
        self.push_op(Tensor::scalar(total), Op::Sum(a), &[a])
    }

    /// Softmax along `axis`, stabilised by max subtraction. Lanes that are
    /// entirely `-inf` (fully masked) produce zeros.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::Index {
                what: "softmax axis",
                index: axis,
                size: shape.len(),
            });
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let mut data = self.value(x).data().to_vec();
        for o in 0..outer {
            for i in 0..inner {
                kernels::softmax_lane(&mut data, |a| (o * len + a) * inner + i, len);
            }
        }
        let t = Tensor::new(shape, data)?;
        Ok(self.push_op(
            t,
            Op::Softmax {
                x,
                outer,
                len,
                inner,
            },
            &[x],
        ))
    }

    /// Normalises each row over the last dimension, then applies
    /// `gain * x_hat + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let n = *shape.last().unwrap_or(&0);
        if self.shape(gain) != [n] {
            return Err(self.shape_err("layer_norm gain", x, gain));
        }
        if self.shape(bias) != [n] {
            return Err(self.shape_err("layer_norm bias", x, bias));
        }
        let xv = self.value(x).data();
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let mut normalized = Vec::with_capacity(xv.len());
        let mut inv_std = Vec::new();
        let mut out = Vec::with_capacity(xv.len());
        for row in xv.chunks(n.max(1)) {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let r = 1.0 / (var + eps).sqrt();
            inv_std.push(r);
            for j in 0..n {
                let xh = (row[j] - mean) * r;
                normalized.push(xh);
                out.push(xh * g[j] + b[j]);
            }
        }
        let t = Tensor::new(shape, out)?;
        Ok(self.push_op(
            t,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            },
            &[x, gain, bias],
        ))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let data = self.value(x).data().iter().map(|&v| kernels::gelu(v)).collect();
        let t = Tensor::new(self.shape(x).to_vec(), data).expect("same shape");
        self.push_op(t, Op::Gelu(x), &[x])
    }

    /// Gathers rows of a `[V x d]` table.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, d) = self.matrix("embedding", table)?;
        if let Some(&bad) = ids.iter().find(|&&id| id >= v) {
            return Err(Error::Index {
                what: "embedding table",
                index: bad,
                size: v,
            });
        }
        let src = self.value(table).data();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            data.extend_from_slice(&src[id * d..(id + 1) * d]);
        }
        let t = Tensor::new([ids.len(), d], data)?;
        Ok(self.push_op(
            t,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            &[table],
        ))
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`, skipping positions equal to `ignore_id`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], ignore_id: usize) -> Result<Var> {
        let (l, v) = self.matrix("cross_entropy", logits)?;
        if targets.len() != l {
            return Err(Error::Shape {
                op: "cross_entropy targets",
                lhs: vec![l, v],
                rhs: vec![targets.len()],
            });
        }
        let mut probs = self.value(logits).data().to_vec();
        let mut total = 0.0;
        let mut count = 0;
        for (i, &t) in targets.iter().enumerate() {
            let row = &mut probs[i * v..(i + 1) * v];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            if t != ignore_id {
                if t >= v {
                    return Err(Error::Index {
                        what: "cross_entropy target",
                        index: t,
                        size: v,
                    });
                }
                total += lse - row[t];
                count += 1;
            }
            row.iter_mut().for_each(|x| *x = (*x - lse).exp());
        }
        if count == 0 {
            return Err(Error::invalid("cross_entropy: every position is ignored"));
        }
        let t = Tensor::scalar(total / count as f64);
        Ok(self.push_op(
            t,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                ignore_id,
                probs,
                count,
            },
            &[logits],
        ))
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (rows, cols) = self.matrix("slice_cols", x)?;
        if start > end || end > cols {
            return Err(Error::Index {
                what: "slice_cols",
                index: end,
                size: cols,
            });
        }
        let width = end - start;
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            data.extend_from_slice(&src[r * cols + start..r * cols + end]);
        }
        let t = Tensor::new([rows, width], data)?;
        Ok(self.push_op(t, Op::SliceCols { x, start }, &[x]))
    }

    /// Concatenates matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::invalid("concat_cols of nothing"));
        };
        let rows = self.matrix("concat_cols", first)?.0;
        let mut total = 0;
        for &p in parts {
            let (r, c) = self.matrix("concat_cols", p)?;
            if r != rows {
                return Err(self.shape_err("concat_cols", first, p));
            }
            total += c;
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                let c = self.shape(p)[1];
                data.extend_from_slice(&self.value(p).data()[r * c..(r + 1) * c]);
            }
        }
        let t = Tensor::new([rows, total], data)?;
        Ok(self.push_op(t, Op::ConcatCols(parts.to_vec()), parts))
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}
