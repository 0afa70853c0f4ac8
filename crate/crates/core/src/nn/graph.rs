//! Define-by-run reverse-mode automatic differentiation.
//!
//! A [`Graph`] is an append-only arena: every operation pushes a node whose
//! inputs are strictly earlier nodes, so arena order is a topological order
//! and the backward sweep is a single reverse pass. Adjoints live only for
//! the duration of [`Graph::backward`], which makes repeated calls
//! idempotent.

use std::collections::HashMap;

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::stats::{normal_log_sf, normal_log_sf_grad};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(u32, ParamId),
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    SubRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Exp(Var),
    Ln(Var),
    Abs(Var),
    Square(Var),
    Powf(Var, f64),
    Sigmoid(Var),
    LogSigmoid(Var),
    NormalLogSf(Var),
    ClampMin(Var, f64),
    ColMean(Var),
    Sum(Var),
    Mean(Var),
    ConcatCols(Var, Var),
    ConcatRows(Var, Var),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<(u32, ParamId), Var>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    // -softplus(-x)
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// A constant leaf (data, noise, masks). Receives no gradient.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Op::Input, t)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: f64) -> Var {
        self.input(Tensor::filled(rows, cols, value))
    }

    /// Leaf bound to a stored parameter; repeated requests share one node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let key = (store.tag(), id);
        if let Some(&v) = self.params.get(&key) {
            return v;
        }
        let v = self.push(Op::Param(key.0, id), store.value(id).clone());
        self.params.insert(key, v);
        v
    }

    pub fn check_finite(&self, v: Var, what: &str) -> Result<()> {
        if self.value(v).is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    /// `x · wᵀ`, the affine map convention for `w: out × in`.
    pub fn matmul_t(&mut self, x: Var, w: Var) -> Var {
        let t = self.value(x).matmul_t(self.value(w));
        self.push(Op::MatMulT(x, w), t)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let t = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(Op::Add(a, b), t)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let t = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(Op::Sub(a, b), t)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let t = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(Op::Mul(a, b), t)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let t = self.value(a).zip_map(self.value(b), |x, y| x / y);
        self.push(Op::Div(a, b), t)
    }

    /// `x + row` with `row: 1 × cols` broadcast over rows.
    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let t = self.value(x).broadcast_row(self.value(row), |a, b| a + b);
        self.push(Op::AddRow(x, row), t)
    }

    pub fn sub_row(&mut self, x: Var, row: Var) -> Var {
        let t = self.value(x).broadcast_row(self.value(row), |a, b| a - b);
        self.push(Op::SubRow(x, row), t)
    }

    pub fn mul_row(&mut self, x: Var, row: Var) -> Var {
        let t = self.value(x).broadcast_row(self.value(row), |a, b| a * b);
        self.push(Op::MulRow(x, row), t)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let t = self.value(x).map(|v| v * c);
        self.push(Op::Scale(x, c), t)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.scale(x, -1.0)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let t = self.value(x).map(|v| v + c);
        self.push(Op::AddScalar(x), t)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x).map(|v| v.max(0.0));
        self.push(Op::Relu(x), t)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let t = self.value(x).map(f64::exp);
        self.push(Op::Exp(x), t)
    }

    pub fn ln(&mut self, x: Var) -> Var {
        let t = self.value(x).map(f64::ln);
        self.push(Op::Ln(x), t)
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let t = self.value(x).map(f64::abs);
        self.push(Op::Abs(x), t)
    }

    pub fn square(&mut self, x: Var) -> Var {
        let t = self.value(x).map(|v| v * v);
        self.push(Op::Square(x), t)
    }

    pub fn powf(&mut self, x: Var, p: f64) -> Var {
        let t = self.value(x).map(|v| v.powf(p));
        self.push(Op::Powf(x, p), t)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let t = self.value(x).map(sigmoid);
        self.push(Op::Sigmoid(x), t)
    }

    /// `ln σ(x)`, stable for large `|x|`.
    pub fn log_sigmoid(&mut self, x: Var) -> Var {
        let t = self.value(x).map(log_sigmoid);
        self.push(Op::LogSigmoid(x), t)
    }

    /// `ln(1 - Φ(x))` of the standard normal.
    pub fn normal_log_sf(&mut self, x: Var) -> Var {
        let t = self.value(x).map(normal_log_sf);
        self.push(Op::NormalLogSf(x), t)
    }

    /// `max(x, floor)`; zero gradient where the floor is active.
    pub fn clamp_min(&mut self, x: Var, floor: f64) -> Var {
        let t = self.value(x).map(|v| v.max(floor));
        self.push(Op::ClampMin(x, floor), t)
    }

    /// Per-column mean as a `1 × cols` row.
    pub fn col_mean(&mut self, x: Var) -> Var {
        let n = self.value(x).rows() as f64;
        let t = self.value(x).col_sum().map(|v| v / n);
        self.push(Op::ColMean(x), t)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let t = Tensor::scalar(self.value(x).sum());
        self.push(Op::Sum(x), t)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let t = Tensor::scalar(v.sum() / v.len() as f64);
        self.push(Op::Mean(x), t)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let t = self.value(a).concat_cols(self.value(b));
        self.push(Op::ConcatCols(a, b), t)
    }

    /// Stack `a` on top of `b`.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let t = self.value(a).concat_rows(self.value(b));
        self.push(Op::ConcatRows(a, b), t)
    }

    /// Single column `c` as `rows × 1`.
    pub fn column(&mut self, x: Var, c: usize) -> Var {
        let v = self.value(x);
        let t = Tensor::column((0..v.rows()).map(|r| v.get(r, c)).collect());
        self.push(Op::SliceCols(x, c), t)
    }

    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Var {
        let t = self.value(x).select_rows(idx);
        self.push(Op::GatherRows(x, idx.to_vec()), t)
    }

    /// Gradients of the scalar `loss` with respect to every parameter leaf.
    /// The graph must draw on a single store; see [`Graph::backward_for`].
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let mut tags: Vec<u32> = self.params.keys().map(|k| k.0).collect();
        tags.sort_unstable();
        tags.dedup();
        if tags.len() > 1 {
            return Err(Error::Shape("graph spans several parameter stores".into()));
        }
        self.backward_tag(loss, tags.first().copied())
    }

    /// Gradients with respect to the parameters of `store` only.
    pub fn backward_for(&self, loss: Var, store: &ParamStore) -> Result<Gradients> {
        self.backward_tag(loss, Some(store.tag()))
    }

    fn backward_tag(&self, loss: Var, tag: Option<u32>) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != [1, 1] {
            return Err(Error::Shape(format!(
                "loss must be 1x1, got {:?}",
                lv.shape()
            )));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Tensor::scalar(1.0));

        fn acc(adj: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut adj[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        let mut grads = Gradients::default();
        for i in (0..=loss.0).rev() {
            let Some(d) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            let out = &node.value;
            match &node.op {
                Op::Input => {}
                Op::Param(t, id) => {
                    if Some(*t) == tag {
                        grads.grads.insert(*id, d);
                    }
                }
                Op::MatMulT(x, w) => {
                    let xv = self.value(*x);
                    let wv = self.value(*w);
                    acc(&mut adj, *x, d.matmul(wv));
                    acc(&mut adj, *w, d.t_matmul(xv));
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *a, d.clone());
                    acc(&mut adj, *b, d);
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, *b, d.map(|v| -v));
                    acc(&mut adj, *a, d);
                }
                Op::Mul(a, b) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    acc(&mut adj, *a, d.zip_map(bv, |g, y| g * y));
                    acc(&mut adj, *b, d.zip_map(av, |g, x| g * x));
                }
                Op::Div(a, b) => {
                    let bv = self.value(*b);
                    let da = d.zip_map(bv, |g, y| g / y);
                    let db = da.zip_map(out, |ga, q| -ga * q);
                    acc(&mut adj, *a, da);
                    acc(&mut adj, *b, db);
                }
                Op::AddRow(x, r) => {
                    acc(&mut adj, *r, d.col_sum());
                    acc(&mut adj, *x, d);
                }
                Op::SubRow(x, r) => {
                    acc(&mut adj, *r, d.col_sum().map(|v| -v));
                    acc(&mut adj, *x, d);
                }
                Op::MulRow(x, r) => {
                    let xv = self.value(*x);
                    let rv = self.value(*r);
                    acc(&mut adj, *r, d.zip_map(xv, |g, a| g * a).col_sum());
                    acc(&mut adj, *x, d.broadcast_row(rv, |g, b| g * b));
                }
                Op::Scale(x, c) => acc(&mut adj, *x, d.map(|g| g * c)),
                Op::AddScalar(x) => acc(&mut adj, *x, d),
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    acc(
                        &mut adj,
                        *x,
                        d.zip_map(xv, |g, a| if a > 0.0 { g } else { 0.0 }),
                    );
                }
                Op::Exp(x) => acc(&mut adj, *x, d.zip_map(out, |g, e| g * e)),
                Op::Ln(x) => {
                    let xv = self.value(*x);
                    acc(&mut adj, *x, d.zip_map(xv, |g, a| g / a));
                }
                Op::Abs(x) => {
                    let xv = self.value(*x);
                    acc(&mut adj, *x, d.zip_map(xv, |g, a| g * sign(a)));
                }
                Op::Square(x) => {
                    let xv = self.value(*x);
                    acc(&mut adj, *x, d.zip_map(xv, |g, a| 2.0 * g * a));
                }
                Op::Powf(x, p) => {
                    let xv = self.value(*x);
                    acc(&mut adj, *x, d.zip_map(xv, |g, a| g * p * a.powf(p - 1.0)));
                }
                Op::Sigmoid(x) => acc(&mut adj, *x, d.zip_map(out, |g, s| g * s * (1.0 - s))),
                Op::LogSigmoid(x) => {
                    let xv = self.value(*x);
                    acc(&mut adj, *x, d.zip_map(xv, |g, a| g * sigmoid(-a)));
                }
                Op::NormalLogSf(x) => {
                    let xv = self.value(*x);
                    acc(
                        &mut adj,
                        *x,
                        d.zip_map(xv, |g, a| g * normal_log_sf_grad(a)),
                    );
                }
                Op::ClampMin(x, floor) => {
                    let xv = self.value(*x);
                    acc(
                        &mut adj,
                        *x,
                        d.zip_map(xv, |g, a| if a > *floor { g } else { 0.0 }),
                    );
                }
                Op::ColMean(x) => {
                    let [n, _] = self.value(*x).shape();
                    let row = d.map(|g| g / n as f64);
                    acc(&mut adj, *x, row.repeat_row(0, n));
                }
                Op::Sum(x) => {
                    let [r, c] = self.value(*x).shape();
                    acc(&mut adj, *x, Tensor::filled(r, c, d.item()));
                }
                Op::Mean(x) => {
                    let [r, c] = self.value(*x).shape();
                    acc(
                        &mut adj,
                        *x,
                        Tensor::filled(r, c, d.item() / (r * c) as f64),
                    );
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.value(*a).cols();
                    let (rows, cols) = (d.rows(), d.cols());
                    let mut da = Vec::with_capacity(rows * ca);
                    let mut db = Vec::with_capacity(rows * (cols - ca));
                    for r in 0..rows {
                        let row = d.row(r);
                        da.extend_from_slice(&row[..ca]);
                        db.extend_from_slice(&row[ca..]);
                    }
                    acc(&mut adj, *a, Tensor::from_vec(rows, ca, da)?);
                    acc(&mut adj, *b, Tensor::from_vec(rows, cols - ca, db)?);
                }
                Op::ConcatRows(a, b) => {
                    let ra = self.value(*a).rows();
                    let top: Vec<usize> = (0..ra).collect();
                    let bottom: Vec<usize> = (ra..d.rows()).collect();
                    acc(&mut adj, *a, d.select_rows(&top));
                    acc(&mut adj, *b, d.select_rows(&bottom));
                }
                Op::SliceCols(x, c) => {
                    let [r, cols] = self.value(*x).shape();
                    let mut g = Tensor::zeros(r, cols);
                    for i in 0..r {
                        g.set(i, *c, d.get(i, 0));
                    }
                    acc(&mut adj, *x, g);
                }
                Op::GatherRows(x, idx) => {
                    let [r, cols] = self.value(*x).shape();
                    let mut g = Tensor::zeros(r, cols);
                    for (k, &i) in idx.iter().enumerate() {
                        let src = d.row(k);
                        for (c, v) in src.iter().enumerate() {
                            let cur = g.get(i, c);
                            g.set(i, c, cur + v);
                        }
                    }
                    acc(&mut adj, *x, g);
                }
            }
        }
        Ok(grads)
    }
}

fn sign(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else if a < 0.0 {
        -1.0
    } else {
        0.0
    }
}
