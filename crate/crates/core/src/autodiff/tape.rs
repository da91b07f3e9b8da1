use super::kernels;
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    ConcatRows(Var, Var),
    SliceCols {
        input: Var,
        start: usize,
    },
    Reshape(Var),
    Conv2d {
        input: Var,
        kernels: Var,
        geom: kernels::ConvGeometry,
    },
    AddChannelBias {
        input: Var,
        bias: Var,
    },
    MaxPool2d {
        input: Var,
        argmax: Vec<usize>,
    },
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    WhereRows {
        mask: Vec<bool>,
        on_true: Var,
        on_false: Var,
    },
    Sum(Var),
    Softmax(Var),
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Leaf => vec![],
            MatMul(a, b) | Add(a, b) | AddBias(a, b) | Mul(a, b) | ConcatRows(a, b) => vec![*a, *b],
            Relu(a) | Sigmoid(a) | Tanh(a) | Reshape(a) | Sum(a) | Softmax(a) => vec![*a],
            SliceCols { input, .. } | MaxPool2d { input, .. } => vec![*input],
            Conv2d { input, kernels, .. } => vec![*input, *kernels],
            AddChannelBias { input, bias } => vec![*input, *bias],
            Embedding { table, .. } => vec![*table],
            WhereRows {
                on_true, on_false, ..
            } => vec![*on_true, *on_false],
            CrossEntropy { logits, .. } => vec![*logits],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run record of a forward computation.
///
/// Nodes are appended in evaluation order, so the node list is always
/// topologically sorted and a backward pass is a single reverse sweep.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`, or `None` when `var`
    /// does not require a gradient or does not reach the loss.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Adds the gradient of `var` into `target.grad`. No-op when `var`
    /// received no gradient.
    pub fn accumulate_into(&self, var: Var, target: &mut Tensor) -> Result<()> {
        match self.get(var) {
            Some(g) => target.accumulate_grad(g),
            None => Ok(()),
        }
    }
}

fn check_finite(op: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
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

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = match op {
            Op::Leaf => value.requires_grad(),
            _ => op.inputs().iter().any(|v| self.nodes[v.0].requires_grad),
        };
        let value = Tensor::from_parts(value.shape().to_vec(), value.into_values());
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_checked(&mut self, name: &'static str, value: Tensor, op: Op) -> Result<Var> {
        check_finite(name, value.values())?;
        Ok(self.push(value, op))
    }

    /// Records a copy of `tensor`; it receives a gradient iff
    /// `tensor.requires_grad()`.
    pub fn leaf(&mut self, tensor: &Tensor) -> Var {
        let value = Tensor::from_parts(tensor.shape().to_vec(), tensor.values().to_vec())
            .with_requires_grad(tensor.requires_grad());
        self.push(value, Op::Leaf)
    }

    /// Records a value that never receives a gradient.
    pub fn constant(&mut self, tensor: Tensor) -> Var {
        self.push(tensor.with_requires_grad(false), Op::Leaf)
    }

    fn dims2(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        let shape = self.shape(v);
        match shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::Shape {
                op,
                shape: shape.to_vec(),
                reason: "expected a matrix".into(),
            }),
        }
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) == self.shape(b) {
            Ok(())
        } else {
            Err(Error::dim(op, self.shape(a), self.shape(b)))
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2("matmul", a)?;
        let (k2, n) = self.dims2("matmul", b)?;
        if k != k2 {
            return Err(Error::dim("matmul", self.shape(a), self.shape(b)));
        }
        let out = kernels::matmul(self.value(a).values(), self.value(b).values(), m, k, n);
        self.push_checked(
            "matmul",
            Tensor::from_parts(vec![m, n], out),
            Op::MatMul(a, b),
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self
            .value(a)
            .values()
            .iter()
            .zip(self.value(b).values())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        self.push_checked("add", Tensor::from_parts(shape, out), Op::Add(a, b))
    }

    /// `x [B×n] + bias [1×n]`, the single broadcasting form supported.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (_, n) = self.dims2("add_bias", x)?;
        if self.shape(bias) != [1, n] {
            return Err(Error::dim("add_bias", self.shape(x), self.shape(bias)));
        }
        let b = self.value(bias).values();
        let out = self
            .value(x)
            .values()
            .chunks(n)
            .flat_map(|row| row.iter().zip(b).map(|(x, b)| x + b))
            .collect();
        let shape = self.shape(x).to_vec();
        self.push_checked(
            "add_bias",
            Tensor::from_parts(shape, out),
            Op::AddBias(x, bias),
        )
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self
            .value(a)
            .values()
            .iter()
            .zip(self.value(b).values())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        self.push_checked("mul", Tensor::from_parts(shape, out), Op::Mul(a, b))
    }

    fn map(&mut self, name: &'static str, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let value = self.value(x);
        let out = value.values().iter().map(|&v| f(v)).collect();
        let t = Tensor::from_parts(value.shape().to_vec(), out);
        self.push_checked(name, t, op)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.map("relu", x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.map("sigmoid", x, kernels::sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.map("tanh", x, f64::tanh, Op::Tanh(x))
    }

    /// Joins `a [B×p]` and `b [B×q]` row by row into `[B×(p+q)]`, with the
    /// columns of `a` first.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ra, p) = self.dims2("concat_rows", a)?;
        let (rb, q) = self.dims2("concat_rows", b)?;
        if ra != rb {
            return Err(Error::dim("concat_rows", self.shape(a), self.shape(b)));
        }
        let (va, vb) = (self.value(a).values(), self.value(b).values());
        let mut out = Vec::with_capacity(ra * (p + q));
        for r in 0..ra {
            out.extend_from_slice(&va[r * p..(r + 1) * p]);
            out.extend_from_slice(&vb[r * q..(r + 1) * q]);
        }
        let t = Tensor::from_parts(vec![ra, p + q], out);
        self.push_checked("concat_rows", t, Op::ConcatRows(a, b))
    }

    /// Columns `start..start + len` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.dims2("slice_cols", x)?;
        if len == 0 || start + len > cols {
            return Err(Error::Shape {
                op: "slice_cols",
                shape: self.shape(x).to_vec(),
                reason: format!("columns {start}..{} out of range", start + len),
            });
        }
        let v = self.value(x).values();
        let out = (0..rows)
            .flat_map(|r| v[r * cols + start..r * cols + start + len].iter().copied())
            .collect();
        let t = Tensor::from_parts(vec![rows, len], out);
        self.push_checked("slice_cols", t, Op::SliceCols { input: x, start })
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let n: usize = shape.iter().product();
        if n != self.value(x).len() || shape.contains(&0) {
            return Err(Error::dim("reshape", self.shape(x), shape));
        }
        let t = Tensor::from_parts(shape.to_vec(), self.value(x).values().to_vec());
        Ok(self.push(t, Op::Reshape(x)))
    }

    /// Cross-correlation of `input` (`[C_in×H×W]` or batched
    /// `[B×C_in×H×W]`) with `kernels [C_out×C_in×kH×kW]` over a
    /// zero-padded input.
    pub fn conv2d(
        &mut self,
        input: Var,
        kernels: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let geom =
            kernels::ConvGeometry::new(self.shape(input), self.shape(kernels), stride, padding)?;
        let out = kernels::conv2d_forward(
            &geom,
            self.value(input).values(),
            self.value(kernels).values(),
        );
        let shape = geom.output_shape(self.value(input).rank() == 4);
        let t = Tensor::from_parts(shape, out);
        self.push_checked(
            "conv2d",
            t,
            Op::Conv2d {
                input,
                kernels,
                geom,
            },
        )
    }

    /// Adds `bias[c]` to every element of channel `c`.
    pub fn add_channel_bias(&mut self, input: Var, bias: Var) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let channels = match shape.len() {
            3 => shape[0],
            4 => shape[1],
            _ => return Err(Error::dim("add_channel_bias", &shape, self.shape(bias))),
        };
        if self.value(bias).len() != channels {
            return Err(Error::dim("add_channel_bias", &shape, self.shape(bias)));
        }
        let plane = shape[shape.len() - 2] * shape[shape.len() - 1];
        let b = self.value(bias).values();
        let out = self
            .value(input)
            .values()
            .chunks(plane)
            .enumerate()
            .flat_map(|(i, chunk)| {
                let bc = b[i % channels];
                chunk.iter().map(move |v| v + bc)
            })
            .collect();
        let t = Tensor::from_parts(shape, out);
        self.push_checked("add_channel_bias", t, Op::AddChannelBias { input, bias })
    }

    /// Non-overlapping `size×size` max pooling; trailing rows/columns that
    /// do not fill a window are dropped.
    pub fn max_pool2d(&mut self, input: Var, size: usize) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        if !(3..=4).contains(&shape.len()) || size == 0 {
            return Err(Error::Shape {
                op: "max_pool2d",
                shape,
                reason: "expected [C×H×W] or [B×C×H×W] input and a positive window".into(),
            });
        }
        let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
        if h < size || w < size {
            return Err(Error::Shape {
                op: "max_pool2d",
                shape,
                reason: format!("window {size} larger than input"),
            });
        }
        let planes: usize = shape[..shape.len() - 2].iter().product();
        let (out, argmax) = kernels::max_pool2d(self.value(input).values(), planes, h, w, size);
        let mut out_shape = shape.clone();
        let n = out_shape.len();
        out_shape[n - 2] = h / size;
        out_shape[n - 1] = w / size;
        let t = Tensor::from_parts(out_shape, out);
        self.push_checked("max_pool2d", t, Op::MaxPool2d { input, argmax })
    }

    /// Gathers rows of `table [V×E]` for each id, giving `[ids.len()×E]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (vocab, dim) = self.dims2("embedding", table)?;
        if ids.is_empty() {
            return Err(Error::Contract("embedding lookup with no ids".into()));
        }
        if let Some((position, &index)) = ids.iter().enumerate().find(|(_, &id)| id >= vocab) {
            return Err(Error::Label {
                index,
                position,
                bound: vocab,
            });
        }
        let v = self.value(table).values();
        let out = ids
            .iter()
            .flat_map(|&id| v[id * dim..(id + 1) * dim].iter().copied())
            .collect();
        let t = Tensor::from_parts(vec![ids.len(), dim], out);
        Ok(self.push(
            t,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Row-wise select: row `r` comes from `on_true` when `mask[r]`,
    /// otherwise from `on_false`. Values are copied, not blended.
    pub fn where_rows(&mut self, mask: &[bool], on_true: Var, on_false: Var) -> Result<Var> {
        self.same_shape("where_rows", on_true, on_false)?;
        let (rows, cols) = self.dims2("where_rows", on_true)?;
        if mask.len() != rows {
            return Err(Error::dim("where_rows", self.shape(on_true), &[mask.len()]));
        }
        let (a, b) = (self.value(on_true).values(), self.value(on_false).values());
        let mut out = Vec::with_capacity(rows * cols);
        for (r, &m) in mask.iter().enumerate() {
            let src = if m { a } else { b };
            out.extend_from_slice(&src[r * cols..(r + 1) * cols]);
        }
        let t = Tensor::from_parts(vec![rows, cols], out);
        Ok(self.push(
            t,
            Op::WhereRows {
                mask: mask.to_vec(),
                on_true,
                on_false,
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).values().iter().sum();
        self.push_checked("sum", Tensor::scalar(s), Op::Sum(x))
    }

    /// Row-wise softmax of `[B×K]` logits, always max-subtracted.
    pub fn softmax(&mut self, logits: Var) -> Result<Var> {
        let (rows, k) = self.dims2("softmax", logits)?;
        let v = self.value(logits).values();
        check_finite("softmax", v)?;
        let out = kernels::softmax_rows(v, rows, k);
        let t = Tensor::from_parts(vec![rows, k], out);
        self.push_checked("softmax", t, Op::Softmax(logits))
    }

    /// Mean over the batch of `-ln softmax(logits)[label]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (rows, k) = self.dims2("cross_entropy", logits)?;
        if labels.len() != rows {
            return Err(Error::dim(
                "cross_entropy",
                self.shape(logits),
                &[labels.len()],
            ));
        }
        if let Some((position, &index)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::Label {
                index,
                position,
                bound: k,
            });
        }
        let v = self.value(logits).values();
        check_finite("cross_entropy", v)?;
        let probs = kernels::softmax_rows(v, rows, k);
        let total: f64 = labels
            .iter()
            .enumerate()
            .map(|(r, &l)| {
                let row = &v[r * k..(r + 1) * k];
                kernels::negative_log_softmax(row, l)
            })
            .sum();
        let loss = Tensor::scalar(total / rows as f64);
        self.push_checked(
            "cross_entropy",
            loss,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        )
    }

    /// Reverse sweep from a scalar `loss`. Gradients of leaves that require
    /// them are returned; shared subexpressions receive summed gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::Contract("loss is not on this tape".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if !self.nodes[loss.0].requires_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) || !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Pushes the output gradient `g` of `node` into its inputs.
    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let n = self.nodes[v.0].value.len();
            f(grads[v.0].get_or_insert_with(|| vec![0.0; n]));
        };
        let val = |v: Var| self.nodes[v.0].value.values();
        let out = node.value.values();

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.nodes[a.0].value.dims2().unwrap();
                let n = self.nodes[b.0].value.shape()[1];
                acc(*a, &mut |ga| {
                    kernels::matmul_nt_acc(g, val(*b), m, n, k, ga)
                });
                acc(*b, &mut |gb| {
                    kernels::matmul_tn_acc(val(*a), g, m, k, n, gb)
                });
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| add_into(ga, g));
                acc(*b, &mut |gb| add_into(gb, g));
            }
            Op::AddBias(x, bias) => {
                acc(*x, &mut |gx| add_into(gx, g));
                acc(*bias, &mut |gb| {
                    for row in g.chunks(gb.len()) {
                        add_into(gb, row);
                    }
                });
            }
            Op::Mul(a, b) => {
                acc(*a, &mut |ga| {
                    for ((d, gi), y) in ga.iter_mut().zip(g).zip(val(*b)) {
                        *d += gi * y;
                    }
                });
                acc(*b, &mut |gb| {
                    for ((d, gi), x) in gb.iter_mut().zip(g).zip(val(*a)) {
                        *d += gi * x;
                    }
                });
            }
            Op::Relu(x) => acc(*x, &mut |gx| {
                for ((d, gi), xi) in gx.iter_mut().zip(g).zip(val(*x)) {
                    if *xi > 0.0 {
                        *d += gi;
                    }
                }
            }),
            Op::Sigmoid(x) => acc(*x, &mut |gx| {
                for ((d, gi), y) in gx.iter_mut().zip(g).zip(out) {
                    *d += gi * y * (1.0 - y);
                }
            }),
            Op::Tanh(x) => acc(*x, &mut |gx| {
                for ((d, gi), y) in gx.iter_mut().zip(g).zip(out) {
                    *d += gi * (1.0 - y * y);
                }
            }),
            Op::ConcatRows(a, b) => {
                let p = self.nodes[a.0].value.shape()[1];
                let q = self.nodes[b.0].value.shape()[1];
                acc(*a, &mut |ga| {
                    for (dst, src) in ga.chunks_mut(p).zip(g.chunks(p + q)) {
                        add_into(dst, &src[..p]);
                    }
                });
                acc(*b, &mut |gb| {
                    for (dst, src) in gb.chunks_mut(q).zip(g.chunks(p + q)) {
                        add_into(dst, &src[p..]);
                    }
                });
            }
            Op::SliceCols { input, start } => {
                let cols = self.nodes[input.0].value.shape()[1];
                let len = node.value.shape()[1];
                acc(*input, &mut |gi| {
                    for (dst, src) in gi.chunks_mut(cols).zip(g.chunks(len)) {
                        add_into(&mut dst[*start..start + len], src);
                    }
                });
            }
            Op::Reshape(x) => acc(*x, &mut |gx| add_into(gx, g)),
            Op::Conv2d {
                input,
                kernels: k,
                geom,
            } => {
                acc(*input, &mut |gi| {
                    kernels::conv2d_backward_input(geom, g, val(*k), gi)
                });
                acc(*k, &mut |gk| {
                    kernels::conv2d_backward_kernels(geom, g, val(*input), gk)
                });
            }
            Op::AddChannelBias { input, bias } => {
                let shape = node.value.shape();
                let plane = shape[shape.len() - 2] * shape[shape.len() - 1];
                acc(*input, &mut |gi| add_into(gi, g));
                acc(*bias, &mut |gb| {
                    let channels = gb.len();
                    for (i, chunk) in g.chunks(plane).enumerate() {
                        gb[i % channels] += chunk.iter().sum::<f64>();
                    }
                });
            }
            Op::MaxPool2d { input, argmax } => acc(*input, &mut |gi| {
                for (&src, gv) in argmax.iter().zip(g) {
                    gi[src] += gv;
                }
            }),
            Op::Embedding { table, ids } => {
                let dim = node.value.shape()[1];
                acc(*table, &mut |gt| {
                    for (&id, row) in ids.iter().zip(g.chunks(dim)) {
                        add_into(&mut gt[id * dim..(id + 1) * dim], row);
                    }
                });
            }
            Op::WhereRows {
                mask,
                on_true,
                on_false,
            } => {
                let cols = node.value.shape()[1];
                for (var, want) in [(*on_true, true), (*on_false, false)] {
                    acc(var, &mut |gv| {
                        for ((dst, src), &m) in gv.chunks_mut(cols).zip(g.chunks(cols)).zip(mask) {
                            if m == want {
                                add_into(dst, src);
                            }
                        }
                    });
                }
            }
            Op::Sum(x) => acc(*x, &mut |gx| gx.iter_mut().for_each(|d| *d += g[0])),
            Op::Softmax(x) => {
                let k = node.value.shape()[1];
                acc(*x, &mut |gx| {
                    for ((dst, gy), y) in gx.chunks_mut(k).zip(g.chunks(k)).zip(out.chunks(k)) {
                        let dot: f64 = gy.iter().zip(y).map(|(a, b)| a * b).sum();
                        for ((d, gi), yi) in dst.iter_mut().zip(gy).zip(y) {
                            *d += yi * (gi - dot);
                        }
                    }
                });
            }
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let k = probs.len() / labels.len();
                let scale = g[0] / labels.len() as f64;
                acc(*logits, &mut |gl| {
                    for (r, &label) in labels.iter().enumerate() {
                        let row = &probs[r * k..(r + 1) * k];
                        let dst = &mut gl[r * k..(r + 1) * k];
                        for (j, (d, p)) in dst.iter_mut().zip(row).enumerate() {
                            let target = if j == label { 1.0 } else { 0.0 };
                            *d += scale * (p - target);
                        }
                    }
                });
            }
        }
    }
}
