//! Minimal reverse-mode differentiation over 2-D `f64` matrices.
//!
//! Parameters are referenced by [`ParamId`] and read from the borrowed
//! [`ParamStore`]; every other node owns its value. Nodes are appended in
//! evaluation order, so the backward pass is a single reverse sweep.

use ndarray::{s, Array2, ArrayView2, Axis};

use super::params::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Param(ParamId),
    Const,
    MatMul(usize, usize),
    /// `a · bᵀ`
    MatMulT(usize, usize),
    Add(usize, usize),
    /// `a + 1·b` with `b` a single row
    AddRow(usize, usize),
    Scale(usize, f64),
    Gelu(usize),
    LayerNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        xhat: Array2<f64>,
        inv_std: Vec<f64>,
    },
    /// Row-wise softmax. Masked (causal) entries have probability 0, so
    /// the backward rule needs no mask.
    Softmax(usize),
    Gather {
        table: usize,
        rows: Vec<usize>,
    },
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    SliceCols {
        x: usize,
        start: usize,
    },
    SliceRows {
        x: usize,
        start: usize,
    },
    /// `-Σ_i log softmax(x_i)[t_i]`
    CrossEntropy {
        x: usize,
        targets: Vec<usize>,
        probs: Array2<f64>,
    },
    /// `Σ_i KL(softmax(x_i) ‖ r_i)`
    Kl {
        x: usize,
        log_ratio: Array2<f64>,
        probs: Array2<f64>,
        per_row: Vec<f64>,
    },
    /// Weighted sum of 1×1 scalars.
    Combine(Vec<(usize, f64)>),
}

struct Node {
    value: Option<Array2<f64>>,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

const LN_EPS: f64 = 1e-5;

/// Row-wise numerically stable softmax.
pub fn softmax_rows(x: ArrayView2<f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

fn log_softmax_row(row: ndarray::ArrayView1<f64>) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value: Some(value), op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(value), _) => value,
            (None, Op::Param(id)) => self.params.get(*id),
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Const)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a.0, b.0))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b).t());
        self.push(v, Op::MatMulT(a.0, b.0))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a.0, b.0))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a.0, row.0))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a.0, c))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(gelu);
        self.push(v, Op::Gelu(a.0))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let cols = xv.ncols() as f64;
        let mut xhat = xv.to_owned();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / cols;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / cols;
            let is = 1.0 / (var + LN_EPS).sqrt();
            row.mapv_inplace(|v| v * is);
            inv_std.push(is);
        }
        let out = &xhat * self.value(gamma) + self.value(beta);
        self.push(
            out,
            Op::LayerNorm {
                x: x.0,
                gamma: gamma.0,
                beta: beta.0,
                xhat,
                inv_std,
            },
        )
    }

    pub fn softmax(&mut self, x: Var, causal: bool) -> Var {
        let mut input = self.value(x).to_owned();
        if causal {
            for (i, mut row) in input.rows_mut().into_iter().enumerate() {
                row.slice_mut(s![i + 1..]).fill(f64::NEG_INFINITY);
            }
        }
        let v = softmax_rows(input.view());
        self.push(v, Op::Softmax(x.0))
    }

    pub fn gather(&mut self, table: Var, rows: &[usize]) -> Var {
        let v = self.value(table).select(Axis(0), rows);
        self.push(
            v,
            Op::Gather {
                table: table.0,
                rows: rows.to_vec(),
            },
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("row counts agree");
        self.push(v, Op::ConcatCols(parts.iter().map(|p| p.0).collect()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("column counts agree");
        self.push(v, Op::ConcatRows(parts.iter().map(|p| p.0).collect()))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let v = self.value(x).slice(s![.., start..start + len]).to_owned();
        self.push(v, Op::SliceCols { x: x.0, start })
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Var {
        let v = self.value(x).slice(s![start..start + len, ..]).to_owned();
        self.push(v, Op::SliceRows { x: x.0, start })
    }

    /// Summed negative log-likelihood of `targets` under row-wise softmax.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.nrows(), targets.len());
        let probs = softmax_rows(lv.view());
        let mut loss = 0.0;
        for (row, &t) in lv.rows().into_iter().zip(targets) {
            loss -= log_softmax_row(row)[t];
        }
        self.push(
            Array2::from_elem((1, 1), loss),
            Op::CrossEntropy {
                x: logits.0,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    /// Summed `KL(softmax(x_i) ‖ r_i)` where `r_i` is given as `log r_i`.
    pub fn kl_to(&mut self, logits: Var, log_r: &Array2<f64>) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.dim(), log_r.dim());
        let mut probs = Array2::zeros(lv.dim());
        let mut log_ratio = Array2::zeros(lv.dim());
        let mut per_row = Vec::with_capacity(lv.nrows());
        for (i, row) in lv.rows().into_iter().enumerate() {
            let logp = log_softmax_row(row);
            let mut kl = 0.0;
            for (j, lp) in logp.into_iter().enumerate() {
                let p = lp.exp();
                let lr = lp - log_r[[i, j]];
                probs[[i, j]] = p;
                log_ratio[[i, j]] = lr;
                kl += p * lr;
            }
            per_row.push(kl);
        }
        let total = per_row.iter().sum();
        self.push(
            Array2::from_elem((1, 1), total),
            Op::Kl {
                x: logits.0,
                log_ratio,
                probs,
                per_row,
            },
        )
    }

    pub fn combine(&mut self, terms: &[(Var, f64)]) -> Var {
        let total = terms.iter().map(|&(v, w)| w * self.scalar(v)).sum();
        self.push(
            Array2::from_elem((1, 1), total),
            Op::Combine(terms.iter().map(|&(v, w)| (v.0, w)).collect()),
        )
    }

    /// Back-propagates from the scalar `root`, adding parameter gradients
    /// into `grads`.
    pub fn backward(&self, root: Var, grads: &mut ParamStore) {
        let n = self.nodes.len();
        let mut adj: Vec<Option<Array2<f64>>> = (0..n).map(|_| None).collect();
        adj[root.0] = Some(Array2::ones((1, 1)));

        fn acc(adj: &mut [Option<Array2<f64>>], i: usize, g: Array2<f64>) {
            match &mut adj[i] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Param(id) => *grads.get_mut(*id) += &g,
                Op::Const => {}
                Op::MatMul(a, b) => {
                    let av = self.value(Var(*a));
                    let bv = self.value(Var(*b));
                    let ga = g.dot(&bv.t());
                    let gb = av.t().dot(&g);
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let av = self.value(Var(*a));
                    let bv = self.value(Var(*b));
                    let ga = g.dot(bv);
                    let gb = g.t().dot(av);
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *b, g.clone());
                    acc(&mut adj, *a, g);
                }
                Op::AddRow(a, r) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut adj, *r, gr);
                    acc(&mut adj, *a, g);
                }
                Op::Scale(a, c) => acc(&mut adj, *a, g * *c),
                Op::Gelu(a) => {
                    let x = self.value(Var(*a));
                    let ga = &g * &x.mapv(gelu_grad);
                    acc(&mut adj, *a, ga);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let gv = self.value(Var(*gamma));
                    acc(&mut adj, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut adj, *gamma, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dxhat = &g * gv;
                    let cols = dxhat.ncols() as f64;
                    let mut dx = Array2::zeros(dxhat.dim());
                    for r in 0..dxhat.nrows() {
                        let dh = dxhat.row(r);
                        let xh = xhat.row(r);
                        let mean_dh = dh.sum() / cols;
                        let mean_dh_xh = dh.dot(&xh) / cols;
                        for c in 0..dxhat.ncols() {
                            dx[[r, c]] = inv_std[r] * (dh[c] - mean_dh - xh[c] * mean_dh_xh);
                        }
                    }
                    acc(&mut adj, *x, dx);
                }
                Op::Softmax(x) => {
                    let y = self.nodes[i].value.as_ref().expect("softmax value");
                    let mut dx = &g * y;
                    for (mut row, yr) in dx.rows_mut().into_iter().zip(y.rows()) {
                        let dot = row.sum();
                        row.zip_mut_with(&yr, |d, &yv| *d -= yv * dot);
                    }
                    acc(&mut adj, *x, dx);
                }
                Op::Gather { table, rows } => {
                    let tv = self.value(Var(*table));
                    let mut gt = Array2::zeros(tv.dim());
                    for (src, &r) in rows.iter().enumerate() {
                        let mut dst = gt.row_mut(r);
                        dst += &g.row(src);
                    }
                    acc(&mut adj, *table, gt);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.value(Var(p)).ncols();
                        acc(&mut adj, p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let h = self.value(Var(p)).nrows();
                        acc(&mut adj, p, g.slice(s![start..start + h, ..]).to_owned());
                        start += h;
                    }
                }
                Op::SliceCols { x, start } => {
                    let mut gx = Array2::zeros(self.value(Var(*x)).dim());
                    gx.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    acc(&mut adj, *x, gx);
                }
                Op::SliceRows { x, start } => {
                    let mut gx = Array2::zeros(self.value(Var(*x)).dim());
                    gx.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    acc(&mut adj, *x, gx);
                }
                Op::CrossEntropy { x, targets, probs } => {
                    let scale = g[[0, 0]];
                    let mut dx = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        dx[[r, t]] -= 1.0;
                    }
                    acc(&mut adj, *x, dx * scale);
                }
                Op::Kl {
                    x,
                    log_ratio,
                    probs,
                    per_row,
                } => {
                    // d/dx_j Σ p log(p/r) = p_j (log(p_j/r_j) - KL)
                    let scale = g[[0, 0]];
                    let mut dx = Array2::zeros(probs.dim());
                    for r in 0..probs.nrows() {
                        for c in 0..probs.ncols() {
                            dx[[r, c]] = scale * probs[[r, c]] * (log_ratio[[r, c]] - per_row[r]);
                        }
                    }
                    acc(&mut adj, *x, dx);
                }
                Op::Combine(terms) => {
                    for &(t, w) in terms {
                        acc(&mut adj, t, &g * w);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_is_normalized_and_stable() {
        let x = ndarray::array![[1000.0, 1000.0], [-5.0, 5.0]];
        let p = softmax_rows(x.view());
        assert_eq!(p[[0, 0]], 0.5);
        assert!((p.row(1).sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gelu_derivative_matches_differences() {
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8, "{x}");
        }
    }
}
