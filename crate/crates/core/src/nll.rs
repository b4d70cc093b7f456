//! Nonlinear level-set learning with an additive coupling network.
//!
//! The network `g: R^d → R^d` is a stack of coupling blocks. Each block reads
//! one half of the coordinates (`v`) and shifts the other half (`u`):
//!
//! ```text
//! u ← u + step · K1 · tanh(K2 · v + bias)
//! ```
//!
//! Every block has a unit-triangular Jacobian, so `g` is volume preserving
//! and inverts exactly by subtracting the same shifts in reverse order.
//! Training pushes the transported gradients `∇f · J_g⁻¹` onto the first `k`
//! output coordinates.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::domain::{GradientSet, SampleSet};
use crate::error::{Error, Result};
use crate::rng::{standard_normal, RngStream};
use crate::surface::Reducer;

pub const DEFAULT_STEP: f64 = 0.25;
pub const INIT_STD: f64 = 0.01;
pub const FORMAT_VERSION: u32 = 1;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    UpdatesFirstHalf,
    UpdatesSecondHalf,
}

impl Side {
    fn other(self) -> Self {
        match self {
            Side::UpdatesFirstHalf => Side::UpdatesSecondHalf,
            Side::UpdatesSecondHalf => Side::UpdatesFirstHalf,
        }
    }
}

/// Index ranges `(written, read)` for a block on dimension `d`. The first
/// half has `⌈d/2⌉` coordinates.
fn halves(side: Side, d: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let split = d.div_ceil(2);
    match side {
        Side::UpdatesFirstHalf => (0..split, split..d),
        Side::UpdatesSecondHalf => (split..d, 0..split),
    }
}

/// One additive coupling block. `k1` is `h × w`, `k2` is `w × p` and `bias`
/// has length `w`, where `h` and `p` are the sizes of the written and read
/// halves and `w` is the hidden width.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingBlock {
    pub side: Side,
    pub k1: DMatrix<f64>,
    pub k2: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl CouplingBlock {
    pub fn hidden(&self) -> usize {
        self.bias.len()
    }

    fn n_params(&self) -> usize {
        self.k1.len() + self.k2.len() + self.bias.len()
    }

    /// `t = tanh(K2 v + bias)` for the read half `v`.
    fn activations(&self, v: &[f64]) -> Vec<f64> {
        (0..self.hidden())
            .map(|j| {
                let a: f64 = v.iter().enumerate().map(|(c, vc)| self.k2[(j, c)] * vc).sum();
                (a + self.bias[j]).tanh()
            })
            .collect()
    }

    /// Shift `step · K1 t` added to the written half.
    fn shift(&self, t: &[f64], step: f64) -> Vec<f64> {
        (0..self.k1.nrows())
            .map(|r| step * t.iter().enumerate().map(|(j, tj)| self.k1[(r, j)] * tj).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevNet {
    d: usize,
    step: f64,
    blocks: Vec<CouplingBlock>,
}

impl RevNet {
    /// Validate and assemble a network from explicit blocks.
    pub fn new(d: usize, step: f64, blocks: Vec<CouplingBlock>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidArgument(format!(
                "network dimension must be >= 2, got {d}"
            )));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
        }
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one block".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            if i > 0 && b.side == blocks[i - 1].side {
                return Err(Error::InvalidArgument(format!(
                    "block {i} updates the same half as block {}",
                    i - 1
                )));
            }
            let (u, v) = halves(b.side, d);
            let w = b.hidden();
            if w == 0 || b.k1.shape() != (u.len(), w) || b.k2.shape() != (w, v.len()) {
                return Err(Error::ShapeMismatch(format!(
                    "block {i}: K1 {}x{}, K2 {}x{}, bias {w}; expected K1 {}xw, K2 wx{}, w >= 1",
                    b.k1.nrows(),
                    b.k1.ncols(),
                    b.k2.nrows(),
                    b.k2.ncols(),
                    u.len(),
                    v.len()
                )));
            }
            if b.k1
                .iter()
                .chain(b.k2.iter())
                .chain(b.bias.iter())
                .any(|x| !x.is_finite())
            {
                return Err(Error::InvalidArgument(format!("block {i} has non-finite weights")));
            }
        }
        Ok(Self { d, step, blocks })
    }

    /// Seeded initialization with hidden width equal to the read-half size.
    pub fn init(d: usize, n_blocks: usize, step: f64, seed: u64) -> Result<Self> {
        Self::init_with_width(d, n_blocks, step, 1, seed)
    }

    /// Seeded initialization with hidden width `width_multiplier × p`.
    /// Weights are i.i.d. `N(0, 0.01²)` drawn block by block (K1 then K2,
    /// row-major); biases start at zero.
    pub fn init_with_width(d: usize, n_blocks: usize, step: f64, width_multiplier: usize, seed: u64) -> Result<Self> {
        if n_blocks < 2 || !n_blocks.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "number of blocks must be even and >= 2, got {n_blocks}"
            )));
        }
        if width_multiplier == 0 {
            return Err(Error::InvalidArgument("width multiplier must be >= 1".into()));
        }
        if d < 2 {
            return Err(Error::InvalidArgument(format!(
                "network dimension must be >= 2, got {d}"
            )));
        }
        let mut gen = RngStream::new(seed, 0).generator();
        let mut side = Side::UpdatesFirstHalf;
        let mut blocks = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            let (u, v) = halves(side, d);
            let w = width_multiplier * v.len();
            let k1 = DMatrix::from_row_iterator(
                u.len(),
                w,
                (0..u.len() * w).map(|_| INIT_STD * standard_normal(&mut gen)),
            );
            let k2 = DMatrix::from_row_iterator(
                w,
                v.len(),
                (0..w * v.len()).map(|_| INIT_STD * standard_normal(&mut gen)),
            );
            blocks.push(CouplingBlock {
                side,
                k1,
                k2,
                bias: DVector::zeros(w),
            });
            side = side.other();
        }
        Self::new(d, step, blocks)
    }

    /// All-zero weights: the identity map.
    pub fn identity(d: usize, n_blocks: usize, step: f64) -> Result<Self> {
        let mut net = Self::init(d, n_blocks, step, 0)?;
        net.set_params(&vec![0.0; net.n_params()])?;
        Ok(net)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn blocks(&self) -> &[CouplingBlock] {
        &self.blocks
    }

    pub fn n_params(&self) -> usize {
        self.blocks.iter().map(CouplingBlock::n_params).sum()
    }

    /// Flattened parameters: per block, K1 then K2 (row-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for b in &self.blocks {
            out.extend(b.k1.transpose().iter());
            out.extend(b.k2.transpose().iter());
            out.extend(b.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters supplied, network has {}",
                p.len(),
                self.n_params()
            )));
        }
        let mut it = p.iter().copied();
        for b in &mut self.blocks {
            let (h, w, pr) = (b.k1.nrows(), b.hidden(), b.k2.ncols());
            b.k1 = DMatrix::from_row_iterator(h, w, it.by_ref().take(h * w));
            b.k2 = DMatrix::from_row_iterator(w, pr, it.by_ref().take(w * pr));
            b.bias = DVector::from_iterator(w, it.by_ref().take(w));
        }
        Ok(())
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.d {
            return Err(Error::ShapeMismatch(format!(
                "network dimension {}, input length {n}",
                self.d
            )));
        }
        Ok(())
    }

    fn apply_block(&self, b: &CouplingBlock, x: &mut [f64], sign: f64) {
        let (u, v) = halves(b.side, self.d);
        let t = b.activations(&x[v]);
        for (xi, s) in x[u].iter_mut().zip(b.shift(&t, self.step)) {
            *xi += sign * s;
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let mut z = x.to_vec();
        for b in &self.blocks {
            self.apply_block(b, &mut z, 1.0);
        }
        Ok(z)
    }

    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z.len())?;
        let mut x = z.to_vec();
        for b in self.blocks.iter().rev() {
            self.apply_block(b, &mut x, -1.0);
        }
        Ok(x)
    }

    /// `∂u'/∂v = step · K1 · diag(1 − t²) · K2` for a block at state `x`.
    fn coupling_derivative(&self, b: &CouplingBlock, x: &[f64]) -> DMatrix<f64> {
        let (_, v) = halves(b.side, self.d);
        let t = b.activations(&x[v]);
        let mut scaled = b.k2.clone();
        for (j, tj) in t.iter().enumerate() {
            scaled.row_mut(j).scale_mut(self.step * (1.0 - tj * tj));
        }
        &b.k1 * scaled
    }

    /// Jacobian of `forward` at `x`, accumulated block by block.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_len(x.len())?;
        let mut z = x.to_vec();
        let mut jac = DMatrix::identity(self.d, self.d);
        for b in &self.blocks {
            let (u, v) = halves(b.side, self.d);
            let bmat = self.coupling_derivative(b, &z);
            // rows u of J ← rows u + B · rows v
            let update = &bmat * jac.rows(v.start, v.len());
            let mut rows_u = jac.rows_mut(u.start, u.len());
            rows_u += update;
            self.apply_block(b, &mut z, 1.0);
        }
        Ok(jac)
    }

    /// Transport a gradient row to output coordinates, `g · J_g(x)⁻¹`, by
    /// block-wise triangular solves.
    pub fn transport_gradient(&self, x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        self.check_len(g.len())?;
        let mut z = x.to_vec();
        let mut r = g.to_vec();
        for b in &self.blocks {
            let (u, v) = halves(b.side, self.d);
            let bmat = self.coupling_derivative(b, &z);
            for (c, vc) in v.clone().enumerate() {
                let corr: f64 = u.clone().enumerate().map(|(rr, ur)| r[ur] * bmat[(rr, c)]).sum();
                r[vc] -= corr;
            }
            self.apply_block(b, &mut z, 1.0);
        }
        Ok(r)
    }

    /// Loss contribution of one sample and, when `grad` is given, its
    /// parameter gradient added into `grad` (flattened layout).
    fn sample_loss(&self, x: &[f64], g: &[f64], k: usize, grad: Option<&mut [f64]>) -> f64 {
        let d = self.d;
        let step = self.step;
        let nb = self.blocks.len();
        let mut states = Vec::with_capacity(nb + 1);
        let mut rows = Vec::with_capacity(nb + 1);
        let mut z = x.to_vec();
        let mut r = g.to_vec();
        for b in &self.blocks {
            states.push(z.clone());
            rows.push(r.clone());
            let (u, v) = halves(b.side, d);
            let t = b.activations(&z[v.clone()]);
            let e = self.row_coupling(b, &r[u.clone()], &t);
            for (c, vc) in v.clone().enumerate() {
                let corr: f64 = (0..b.hidden()).map(|j| b.k2[(j, c)] * e[j]).sum();
                r[vc] -= corr;
            }
            for (ui, s) in u.clone().zip(b.shift(&t, step)) {
                z[ui] += s;
            }
        }
        let loss: f64 = r[k..].iter().map(|v| v * v).sum();
        let Some(grad) = grad else {
            return loss;
        };

        // reverse sweep: rho is the adjoint of the transported row, xi of the state
        let mut rho = vec![0.0; d];
        for i in k..d {
            rho[i] = 2.0 * r[i];
        }
        let mut xi = vec![0.0; d];
        let mut offsets = Vec::with_capacity(nb);
        let mut off = 0;
        for b in &self.blocks {
            offsets.push(off);
            off += b.n_params();
        }
        for (bi, b) in self.blocks.iter().enumerate().rev() {
            let (u, v) = halves(b.side, d);
            let (h, w, p) = (b.k1.nrows(), b.hidden(), b.k2.ncols());
            let x_in = &states[bi];
            let r_in = &rows[bi];
            let r_u = &r_in[u.clone()];
            let v_in = &x_in[v.clone()];
            let t = b.activations(v_in);
            let s: Vec<f64> = t.iter().map(|tj| 1.0 - tj * tj).collect();
            let q: Vec<f64> = (0..w)
                .map(|j| step * (0..h).map(|rr| b.k1[(rr, j)] * r_u[rr]).sum::<f64>())
                .collect();
            let e: Vec<f64> = q.iter().zip(&s).map(|(a, b)| a * b).collect();
            let eta = &rho[v.clone()];
            let kappa: Vec<f64> = (0..w).map(|j| (0..p).map(|c| b.k2[(j, c)] * eta[c]).sum()).collect();
            let xi_u = &xi[u.clone()];
            let k1t_xi: Vec<f64> = (0..w)
                .map(|j| (0..h).map(|rr| b.k1[(rr, j)] * xi_u[rr]).sum())
                .collect();

            let base = offsets[bi];
            let (g_k1, rest) = grad[base..base + b.n_params()].split_at_mut(h * w);
            let (g_k2, g_bias) = rest.split_at_mut(w * p);

            // dK1 from the row path (q) and the state path (u += step K1 t)
            for rr in 0..h {
                for j in 0..w {
                    g_k1[rr * w + j] += step * (-r_u[rr] * kappa[j] * s[j] + xi_u[rr] * t[j]);
                }
            }
            // adjoint of the pre-activation a = K2 v + bias
            let alpha: Vec<f64> = (0..w)
                .map(|j| 2.0 * kappa[j] * q[j] * t[j] * s[j] + step * k1t_xi[j] * s[j])
                .collect();
            for j in 0..w {
                for c in 0..p {
                    g_k2[j * p + c] += -e[j] * eta[c] + alpha[j] * v_in[c];
                }
                g_bias[j] += alpha[j];
            }

            let mut new_rho_u = vec![0.0; h];
            for (rr, nr) in new_rho_u.iter_mut().enumerate() {
                let back: f64 = (0..w).map(|j| b.k1[(rr, j)] * kappa[j] * s[j]).sum();
                *nr = rho[u.start + rr] - step * back;
            }
            for (rr, nr) in new_rho_u.into_iter().enumerate() {
                rho[u.start + rr] = nr;
            }
            for c in 0..p {
                xi[v.start + c] += (0..w).map(|j| b.k2[(j, c)] * alpha[j]).sum::<f64>();
            }
        }
        loss
    }

    /// `e = (step · K1ᵀ r_u) ⊙ (1 − t²)`, so that `r_u B = eᵀ K2`.
    fn row_coupling(&self, b: &CouplingBlock, r_u: &[f64], t: &[f64]) -> Vec<f64> {
        (0..b.hidden())
            .map(|j| {
                let q: f64 = r_u.iter().enumerate().map(|(rr, ru)| b.k1[(rr, j)] * ru).sum();
                self.step * q * (1.0 - t[j] * t[j])
            })
            .collect()
    }

    /// First `k` output coordinates of every row of `x`.
    pub fn reduce(&self, x: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
        self.check_len(x.ncols())?;
        if k == 0 || k >= self.d {
            return Err(Error::InvalidArgument(format!(
                "k must be in [1, {}], got {k}",
                self.d - 1
            )));
        }
        let mut out = DMatrix::zeros(x.nrows(), k);
        let mut row = vec![0.0; self.d];
        for i in 0..x.nrows() {
            for (j, rj) in row.iter_mut().enumerate() {
                *rj = x[(i, j)];
            }
            let z = self.forward(&row)?;
            for j in 0..k {
                out[(i, j)] = z[j];
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&RevNetDoc::from(self)).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RevNetDoc = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        doc.into_net()
    }
}

fn check_pair(x: &DMatrix<f64>, g: &DMatrix<f64>, d: usize, k: usize) -> Result<()> {
    if x.shape() != g.shape() || x.ncols() != d {
        return Err(Error::ShapeMismatch(format!(
            "inputs {}x{}, gradients {}x{}, network dimension {d}",
            x.nrows(),
            x.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::InsufficientData { required: 1, got: 0 });
    }
    if k == 0 || k >= d {
        return Err(Error::InvalidArgument(format!("k must be in [1, {}], got {k}", d - 1)));
    }
    Ok(())
}

fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Mean over samples of `Σ_{i>k} ĝ_i²` with `ĝ = g · J_g(x)⁻¹`.
pub fn nll_loss(net: &RevNet, x: &DMatrix<f64>, g: &DMatrix<f64>, k: usize) -> Result<f64> {
    check_pair(x, g, net.d, k)?;
    let total: f64 = (0..x.nrows())
        .map(|i| net.sample_loss(&row(x, i), &row(g, i), k, None))
        .sum();
    Ok(total / x.nrows() as f64)
}

/// [`nll_loss`] and its gradient with respect to [`RevNet::params`].
pub fn nll_loss_grad(net: &RevNet, x: &DMatrix<f64>, g: &DMatrix<f64>, k: usize) -> Result<(f64, Vec<f64>)> {
    check_pair(x, g, net.d, k)?;
    let mut grad = vec![0.0; net.n_params()];
    let mut total = 0.0;
    for i in 0..x.nrows() {
        total += net.sample_loss(&row(x, i), &row(g, i), k, Some(&mut grad));
    }
    let m = x.nrows() as f64;
    grad.iter_mut().for_each(|v| *v /= m);
    Ok((total / m, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NllTrainConfig {
    pub k: usize,
    pub epochs: usize,
    /// `None` trains on the full set every step.
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
    pub seed: u64,
}

impl NllTrainConfig {
    pub fn new(k: usize, epochs: usize, seed: u64) -> Self {
        Self {
            k,
            epochs,
            batch_size: None,
            learning_rate: 1e-3,
            seed,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if self.k == 0 || self.k >= d {
            return Err(Error::InvalidArgument(format!(
                "k must be in [1, {}], got {}",
                d - 1,
                self.k
            )));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be a nonnegative number, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NllFit {
    pub net: RevNet,
    /// Full-data loss at the start of each epoch.
    pub history: Vec<f64>,
    /// Full-data loss after the last epoch.
    pub final_loss: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * grad[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Train `net` with Adam on the level-set alignment loss.
pub fn train_nll(net: RevNet, samples: &SampleSet, grads: &GradientSet, cfg: &NllTrainConfig) -> Result<NllFit> {
    samples.require_normalized()?;
    cfg.validate(net.d)?;
    if samples.dim() != net.d || grads.dim() != net.d {
        return Err(Error::ShapeMismatch(format!(
            "network dimension {}, samples {}, gradients {}",
            net.d,
            samples.dim(),
            grads.dim()
        )));
    }
    if grads.indices().iter().any(|&i| i >= samples.len()) {
        return Err(Error::ShapeMismatch("gradient rows refer to missing samples".into()));
    }
    let x = samples.points().select_rows(grads.indices());
    let g = grads.grads().clone();
    let m = x.nrows();
    let batch = cfg.batch_size.unwrap_or(m).min(m);

    let mut net = net;
    let mut params = net.params();
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let shuffle = RngStream::new(cfg.seed, 1);
    let mut order: Vec<usize> = (0..m).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let (loss, full_grad) = nll_loss_grad(&net, &x, &g, cfg.k)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.push(loss);
        if batch == m {
            adam.step(&mut params, &full_grad);
            net.set_params(&params)?;
        } else {
            order.shuffle(&mut shuffle.split(epoch as u64).generator());
            for chunk in order.chunks(batch) {
                let (_, bg) = nll_loss_grad(&net, &x.select_rows(chunk), &g.select_rows(chunk), cfg.k)?;
                adam.step(&mut params, &bg);
                net.set_params(&params)?;
            }
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
    }
    let final_loss = nll_loss(&net, &x, &g, cfg.k)?;
    if !final_loss.is_finite() {
        return Err(Error::Divergence { epoch: cfg.epochs });
    }
    Ok(NllFit {
        net,
        history,
        final_loss,
    })
}

/// A trained network together with its active dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct NllModel {
    pub net: RevNet,
    pub k: usize,
}

impl Reducer for NllModel {
    fn reduce(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.net.reduce(x, self.k)
    }
}

pub fn nll_forward(net: &RevNet, x: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    net.reduce(x, k)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockDoc {
    side: Side,
    #[serde(rename = "K1")]
    k1: Vec<Vec<f64>>,
    #[serde(rename = "K2")]
    k2: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RevNetDoc {
    version: u32,
    d: usize,
    step: f64,
    blocks: Vec<BlockDoc>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], name: &str, block: usize) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Schema(format!(
            "block {block}: {name} rows have unequal lengths"
        )));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

impl From<&RevNet> for RevNetDoc {
    fn from(net: &RevNet) -> Self {
        Self {
            version: FORMAT_VERSION,
            d: net.d,
            step: net.step,
            blocks: net
                .blocks
                .iter()
                .map(|b| BlockDoc {
                    side: b.side,
                    k1: rows_of(&b.k1),
                    k2: rows_of(&b.k2),
                    bias: b.bias.iter().copied().collect(),
                })
                .collect(),
        }
    }
}

impl RevNetDoc {
    fn into_net(self) -> Result<RevNet> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported network format version {} (expected {FORMAT_VERSION})",
                self.version
            )));
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.into_iter().enumerate() {
            blocks.push(CouplingBlock {
                side: b.side,
                k1: matrix_from_rows(&b.k1, "K1", i)?,
                k2: matrix_from_rows(&b.k2, "K2", i)?,
                bias: DVector::from_vec(b.bias),
            });
        }
        RevNet::new(self.d, self.step, blocks).map_err(|e| Error::Schema(e.to_string()))
    }
}
