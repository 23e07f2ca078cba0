//! C-SVC binary machines and one-vs-one multiclass voting.
//!
//! Both solvers work on the dual
//! `min ½αᵀQα − eᵀα  s.t.  0 ≤ α_i ≤ C,  yᵀα = 0`, `Q_ij = y_i y_j K(x_i, x_j)`,
//! updating two coordinates per step so the equality constraint is kept.
//! The linear solver keeps the primal weight vector and never forms kernel
//! columns; the kernel solver uses second-order working-set selection over
//! cached kernel rows. Shrinking is never used.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

const TAU: f64 = 1e-12;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    /// `(γ·xᵀz + coef0)^degree`
    Polynomial { gamma: f64, degree: u32, coef0: f64 },
    /// `exp(−γ‖x − z‖²)`
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Polynomial { gamma, degree, coef0 } => (gamma * dot(a, b) + coef0).powi(degree as i32),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    /// Ordering used for grid tie-breaks: linear < polynomial < rbf.
    pub fn rank(&self) -> u8 {
        match self {
            Kernel::Linear => 0,
            Kernel::Polynomial { .. } => 1,
            Kernel::Rbf { .. } => 2,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            Kernel::Linear => None,
            Kernel::Polynomial { gamma, .. } | Kernel::Rbf { gamma } => Some(gamma),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Polynomial { .. } => "polynomial",
            Kernel::Rbf { .. } => "rbf",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Linear => Ok(()),
            Kernel::Polynomial { gamma, degree, .. } => {
                if !(gamma > 0.0) || degree < 2 {
                    return Err(Error::InvalidInput(format!(
                        "polynomial kernel needs gamma > 0 and degree >= 2 (got {gamma}, {degree})"
                    )));
                }
                Ok(())
            }
            Kernel::Rbf { gamma } => {
                if !(gamma > 0.0) {
                    return Err(Error::InvalidInput(format!("rbf gamma must be > 0, got {gamma}")));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    /// Stop when the maximal KKT violation `m(α) − M(α)` drops below this.
    pub tolerance: f64,
    pub max_iter: Option<usize>,
}

impl SvmParams {
    pub fn new(kernel: Kernel, c: f64) -> Self {
        SvmParams {
            kernel,
            c,
            tolerance: DEFAULT_TOLERANCE,
            max_iter: None,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidInput(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput("tolerance must be > 0".into()));
        }
        self.kernel.validate()
    }
}

/// One trained two-class machine: `f(x) = Σ coef_i K(sv_i, x) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub kernel: Kernel,
    pub c: f64,
    pub support: Vec<Vec<f64>>,
    /// `α_i y_i` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    /// Primal weights, present for the linear kernel.
    pub weights: Option<Vec<f64>>,
    /// Full dual solution over the training rows (empty after deserialization).
    #[serde(skip)]
    pub alpha: Vec<f64>,
    #[serde(skip)]
    pub targets: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl BinaryMachine {
    pub fn dims(&self) -> usize {
        self.weights
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.support.first().map(Vec::len))
            .unwrap_or(0)
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        if let Some(w) = &self.weights {
            return dot(w, x) + self.bias;
        }
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.decision(x) > 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

struct DualState {
    alpha: Vec<f64>,
    grad: Vec<f64>,
    y: Vec<f64>,
    c: f64,
}

impl DualState {
    fn new(y: &[f64], c: f64) -> Self {
        DualState {
            alpha: vec![0.0; y.len()],
            grad: vec![-1.0; y.len()],
            y: y.to_vec(),
            c,
        }
    }

    fn upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.c
    }

    fn lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    fn in_up(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            !self.upper(t)
        } else {
            !self.lower(t)
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            !self.lower(t)
        } else {
            !self.upper(t)
        }
    }

    /// `(i, max_{I_up} −y G)`.
    fn max_up(&self) -> (Option<usize>, f64) {
        let mut best = (None, f64::NEG_INFINITY);
        for t in 0..self.y.len() {
            if self.in_up(t) {
                let v = -self.y[t] * self.grad[t];
                if v >= best.1 {
                    best = (Some(t), v);
                }
            }
        }
        best
    }

    /// Analytic two-variable step; returns `(Δα_i, Δα_j)`.
    fn step(&mut self, i: usize, j: usize, qii: f64, qjj: f64, qij: f64) -> (f64, f64) {
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        let (gi, gj) = (self.grad[i], self.grad[j]);
        if self.y[i] != self.y[j] {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-gi - gj) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (gi - gj) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        (ai - old_i, aj - old_j)
    }

    fn bias(&self) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0usize);
        for t in 0..self.y.len() {
            let yg = self.y[t] * self.grad[t];
            if self.upper(t) {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.lower(t) {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        let rho = if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        };
        -rho
    }

    fn objective(&self) -> f64 {
        0.5 * self.alpha.iter().zip(&self.grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
    }
}

fn check_inputs(x: &Matrix, y: &[f64]) -> Result<()> {
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidInput("binary targets must be +1 or -1".into()));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::InvalidInput("binary SVM needs both classes present".into()));
    }
    Ok(())
}

fn max_iter(params: &SvmParams, n: usize) -> usize {
    params.max_iter.unwrap_or_else(|| (100 * n).max(10_000_000))
}

/// Trains one binary machine on rows `x` with targets `y ∈ {−1, +1}`.
pub fn train_binary(x: &Matrix, y: &[f64], params: &SvmParams) -> Result<BinaryMachine> {
    params.validate()?;
    check_inputs(x, y)?;
    match params.kernel {
        Kernel::Linear => Ok(solve_linear(x, y, params)),
        _ => Ok(solve_kernel(x, y, params)),
    }
}

/// Pairwise dual coordinate descent for the linear kernel. The gradient is
/// refreshed from the primal weight change, `G_t += y_t x_tᵀΔw`.
fn solve_linear(x: &Matrix, y: &[f64], params: &SvmParams) -> BinaryMachine {
    let n = x.rows();
    let mut st = DualState::new(y, params.c);
    let sq: Vec<f64> = x.iter_rows().map(|r| dot(r, r)).collect();
    let mut w = vec![0.0; x.cols()];
    let mut dw = vec![0.0; x.cols()];
    let limit = max_iter(params, n);
    let mut iter = 0;
    while iter < limit {
        let (Some(i), gmax) = st.max_up() else { break };
        let mut j = None;
        let mut gmax2 = f64::NEG_INFINITY;
        for t in 0..n {
            if st.in_low(t) {
                let v = st.y[t] * st.grad[t];
                if v >= gmax2 {
                    gmax2 = v;
                    j = Some(t);
                }
            }
        }
        let Some(j) = j else { break };
        if gmax + gmax2 < params.tolerance {
            break;
        }
        iter += 1;
        let kij = dot(x.row(i), x.row(j));
        let qij = st.y[i] * st.y[j] * kij;
        let (di, dj) = st.step(i, j, sq[i], sq[j], qij);
        let (ci, cj) = (di * st.y[i], dj * st.y[j]);
        for ((d, a), b) in dw.iter_mut().zip(x.row(i)).zip(x.row(j)) {
            *d = ci * a + cj * b;
        }
        for (wk, d) in w.iter_mut().zip(&dw) {
            *wk += d;
        }
        for t in 0..n {
            st.grad[t] += st.y[t] * dot(x.row(t), &dw);
        }
    }
    finish(x, st, params, Some(w), iter)
}

struct KernelRows<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    kernel: Kernel,
    rows: Vec<Option<Vec<f64>>>,
}

impl<'a> KernelRows<'a> {
    /// Row `i` of Q.
    fn q_row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            let xi = self.x.row(i);
            let yi = self.y[i];
            let row = (0..self.x.rows())
                .map(|t| yi * self.y[t] * self.kernel.eval(xi, self.x.row(t)))
                .collect();
            self.rows[i] = Some(row);
        }
        self.rows[i].as_deref().expect("row cached")
    }
}

/// Working-set (SMO) solver with second-order pair selection.
fn solve_kernel(x: &Matrix, y: &[f64], params: &SvmParams) -> BinaryMachine {
    let n = x.rows();
    let mut st = DualState::new(y, params.c);
    let diag: Vec<f64> = x.iter_rows().map(|r| params.kernel.eval(r, r)).collect();
    let mut cache = KernelRows {
        x,
        y,
        kernel: params.kernel,
        rows: vec![None; n],
    };
    let limit = max_iter(params, n);
    let mut iter = 0;
    while iter < limit {
        let (Some(i), gmax) = st.max_up() else { break };
        let qi = cache.q_row(i).to_vec();
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !st.in_low(t) {
                continue;
            }
            let yg = st.y[t] * st.grad[t];
            if yg >= gmax2 {
                gmax2 = yg;
            }
            let grad_diff = gmax + yg;
            if grad_diff > 0.0 {
                let quad = diag[i] + diag[t] - 2.0 * st.y[i] * st.y[t] * qi[t];
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= best {
                    best = obj;
                    j = Some(t);
                }
            }
        }
        let Some(j) = j else { break };
        if gmax + gmax2 < params.tolerance {
            break;
        }
        iter += 1;
        let qj = cache.q_row(j).to_vec();
        let (di, dj) = st.step(i, j, diag[i], diag[j], qi[j]);
        for t in 0..n {
            st.grad[t] += qi[t] * di + qj[t] * dj;
        }
    }
    finish(x, st, params, None, iter)
}

fn finish(x: &Matrix, st: DualState, params: &SvmParams, weights: Option<Vec<f64>>, iterations: usize) -> BinaryMachine {
    let bias = st.bias();
    let objective = st.objective();
    let mut support = Vec::new();
    let mut coef = Vec::new();
    for (t, &a) in st.alpha.iter().enumerate() {
        if a > 0.0 {
            support.push(x.row(t).to_vec());
            coef.push(a * st.y[t]);
        }
    }
    BinaryMachine {
        kernel: params.kernel,
        c: params.c,
        support,
        coef,
        bias,
        weights,
        alpha: st.alpha,
        targets: st.y,
        objective,
        iterations,
    }
}

/// Dual objective `½αᵀQα − eᵀα` evaluated from scratch.
pub fn dual_objective(x: &Matrix, y: &[f64], alpha: &[f64], kernel: &Kernel) -> f64 {
    let n = x.rows();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if alpha[j] == 0.0 {
                continue;
            }
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel.eval(x.row(i), x.row(j));
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// One-vs-one multiclass SVM over class indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub params: SvmParams,
    /// Class indices present in training, ascending.
    pub classes: Vec<usize>,
    /// `(positive class, negative class, machine)` for each pair, in
    /// lexicographic pair order.
    pub machines: Vec<(usize, usize, BinaryMachine)>,
    pub dims: usize,
}

impl SvmModel {
    pub fn train(x: &Matrix, labels: &[usize], params: &SvmParams) -> Result<Self> {
        if labels.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                got: labels.len(),
            });
        }
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::InvalidInput("SVM training needs at least two classes".into()));
        }
        let mut machines = Vec::with_capacity(classes.len() * (classes.len() - 1) / 2);
        for (a_pos, &a) in classes.iter().enumerate() {
            for &b in &classes[a_pos + 1..] {
                let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == a || labels[i] == b).collect();
                let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == a { 1.0 } else { -1.0 }).collect();
                let m = train_binary(&x.select_rows(&idx), &y, params)?;
                machines.push((a, b, m));
            }
        }
        Ok(SvmModel {
            params: *params,
            classes,
            machines,
            dims: x.cols(),
        })
    }

    /// Votes and oriented decision-value sums per class, aligned with `classes`.
    pub fn votes(&self, x: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
        if x.len() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                got: x.len(),
            });
        }
        let pos = |c: usize| self.classes.iter().position(|&k| k == c).expect("known class");
        let mut votes = vec![0usize; self.classes.len()];
        let mut sums = vec![0.0; self.classes.len()];
        for (a, b, m) in &self.machines {
            let f = m.decision(x);
            let (ia, ib) = (pos(*a), pos(*b));
            if f > 0.0 {
                votes[ia] += 1;
            } else {
                votes[ib] += 1;
            }
            sums[ia] += f;
            sums[ib] -= f;
        }
        Ok((votes, sums))
    }

    /// Majority vote; ties go to the largest decision-value sum, then to the
    /// earliest class.
    pub fn predict_one(&self, x: &[f64]) -> Result<usize> {
        let (votes, sums) = self.votes(x)?;
        let mut best = 0;
        for k in 1..votes.len() {
            if votes[k] > votes[best] || (votes[k] == votes[best] && sums[k] > sums[best]) {
                best = k;
            }
        }
        Ok(self.classes[best])
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        x.iter_rows().map(|r| self.predict_one(r)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct MachineHeader {
    positive: usize,
    negative: usize,
    bias: f64,
    n_support: usize,
    linear: bool,
    objective: f64,
    iterations: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    params: SvmParams,
    classes: Vec<usize>,
    class_names: Vec<String>,
    dims: usize,
    vocabulary_hash: Option<String>,
    machines: Vec<MachineHeader>,
}

fn csv_err(ctx: &str) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::format(ctx, e)
}

fn write_rows(path: &Path, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(csv_err("model csv"))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err("model csv"))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err("model csv"))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err("model csv"))?;
        let row = rec
            .iter()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format("model csv", e))?;
        out.push(row);
    }
    Ok(out)
}

impl SvmModel {
    /// Writes `svm.json` plus `weights.csv` (linear machines: index, w...)
    /// and `support.csv` (kernel machines: index, coef, x...).
    pub fn save(&self, dir: &Path, class_names: &[String], vocabulary_hash: Option<&str>) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = ModelHeader {
            params: self.params,
            classes: self.classes.clone(),
            class_names: class_names.to_vec(),
            dims: self.dims,
            vocabulary_hash: vocabulary_hash.map(String::from),
            machines: self
                .machines
                .iter()
                .map(|(a, b, m)| MachineHeader {
                    positive: *a,
                    negative: *b,
                    bias: m.bias,
                    n_support: m.support.len(),
                    linear: m.weights.is_some(),
                    objective: m.objective,
                    iterations: m.iterations,
                })
                .collect(),
        };
        let path = dir.join("svm.json");
        std::fs::write(&path, serde_json::to_string_pretty(&header).expect("header serializes"))
            .map_err(|e| Error::io(&path, e))?;
        let weights = self.machines.iter().enumerate().filter_map(|(k, (_, _, m))| {
            m.weights.as_ref().map(|w| {
                std::iter::once(k.to_string()).chain(w.iter().map(f64::to_string)).collect()
            })
        });
        write_rows(&dir.join("weights.csv"), weights)?;
        let support = self.machines.iter().enumerate().flat_map(|(k, (_, _, m))| {
            let kernel_machine = m.weights.is_none();
            m.support
                .iter()
                .zip(&m.coef)
                .filter(move |_| kernel_machine)
                .map(move |(sv, c)| {
                    [k.to_string(), c.to_string()]
                        .into_iter()
                        .chain(sv.iter().map(f64::to_string))
                        .collect()
                })
        });
        write_rows(&dir.join("support.csv"), support)
    }

    /// Loads a model written by [`save`](Self::save); returns it with the
    /// stored class names and vocabulary hash.
    pub fn load(dir: &Path) -> Result<(Self, Vec<String>, Option<String>)> {
        let path = dir.join("svm.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let h: ModelHeader = serde_json::from_str(&text).map_err(|e| Error::format("svm.json", e))?;
        let weights = read_rows(&dir.join("weights.csv"))?;
        let support = read_rows(&dir.join("support.csv"))?;
        let mut machines = Vec::with_capacity(h.machines.len());
        for (k, mh) in h.machines.iter().enumerate() {
            let mut m = BinaryMachine {
                kernel: h.params.kernel,
                c: h.params.c,
                support: Vec::new(),
                coef: Vec::new(),
                bias: mh.bias,
                weights: None,
                alpha: Vec::new(),
                targets: Vec::new(),
                objective: mh.objective,
                iterations: mh.iterations,
            };
            if mh.linear {
                let row = weights
                    .iter()
                    .find(|r| r.first() == Some(&(k as f64)))
                    .ok_or_else(|| Error::format("weights.csv", format!("missing machine {k}")))?;
                m.weights = Some(row[1..].to_vec());
            } else {
                for r in support.iter().filter(|r| r.first() == Some(&(k as f64))) {
                    m.coef.push(r[1]);
                    m.support.push(r[2..].to_vec());
                }
                if m.support.len() != mh.n_support {
                    return Err(Error::format("support.csv", format!("machine {k} support count mismatch")));
                }
            }
            if m.dims() != h.dims && !(m.support.is_empty() && m.weights.is_none()) {
                return Err(Error::DimensionMismatch {
                    expected: h.dims,
                    got: m.dims(),
                });
            }
            machines.push((mh.positive, mh.negative, m));
        }
        let model = SvmModel {
            params: h.params,
            classes: h.classes,
            machines,
            dims: h.dims,
        };
        Ok((model, h.class_names, h.vocabulary_hash))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn two_points_split_at_half() {
        let x = m(&[&[0.0], &[1.0]]);
        let machine = train_binary(&x, &[-1.0, 1.0], &SvmParams::new(Kernel::Linear, 1e3)).unwrap();
        assert!(machine.decision(&[0.5]).abs() < 1e-9);
        assert_eq!(machine.predict(&[0.0]), -1.0);
        assert_eq!(machine.predict(&[1.0]), 1.0);
    }

    #[test]
    fn xor_needs_rbf() {
        let x = m(&[&[0.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]]);
        let y = [1.0, 1.0, -1.0, -1.0];
        let acc = |mc: &BinaryMachine| x.iter_rows().zip(&y).filter(|(r, t)| mc.predict(r) == **t).count();
        let lin = train_binary(&x, &y, &SvmParams::new(Kernel::Linear, 10.0)).unwrap();
        assert!(acc(&lin) <= 3);
        let rbf = train_binary(&x, &y, &SvmParams::new(Kernel::Rbf { gamma: 1.0 }, 10.0)).unwrap();
        assert_eq!(acc(&rbf), 4);
    }

    #[test]
    fn default_rbf_config_is_valid() {
        let x = m(&[&[0.0, 0.1], &[0.9, 1.0], &[0.2, 0.0], &[1.0, 0.8]]);
        let p = SvmParams::new(Kernel::Rbf { gamma: 0.5 }, 0.5);
        assert!(train_binary(&x, &[-1.0, 1.0, -1.0, 1.0], &p).is_ok());
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = m(&[&[0.0], &[1.0]]);
        assert!(train_binary(&x, &[1.0, 1.0], &SvmParams::new(Kernel::Linear, 1.0)).is_err());
        assert!(train_binary(&x, &[1.0, -1.0], &SvmParams::new(Kernel::Linear, 0.0)).is_err());
        assert!(train_binary(&x, &[1.0, -1.0], &SvmParams::new(Kernel::Rbf { gamma: 0.0 }, 1.0)).is_err());
        let poly = Kernel::Polynomial { gamma: 1.0, degree: 1, coef0: 1.0 };
        assert!(train_binary(&x, &[1.0, -1.0], &SvmParams::new(poly, 1.0)).is_err());
    }

    #[test]
    fn dual_feasibility() {
        let x = m(&[&[0.0, 0.3], &[0.4, 0.9], &[0.5, 0.1], &[0.9, 0.7], &[0.2, 0.6], &[0.7, 0.2]]);
        let y = [1.0, -1.0, 1.0, -1.0, -1.0, 1.0];
        for kernel in [Kernel::Linear, Kernel::Rbf { gamma: 2.0 }, Kernel::Polynomial { gamma: 1.0, degree: 3, coef0: 1.0 }] {
            let mc = train_binary(&x, &y, &SvmParams::new(kernel, 2.0)).unwrap();
            assert!(mc.alpha.iter().all(|&a| (0.0..=2.0).contains(&a)));
            let eq: f64 = mc.alpha.iter().zip(&y).map(|(a, t)| a * t).sum();
            assert!(eq.abs() < 1e-6);
            assert!((mc.objective - dual_objective(&x, &y, &mc.alpha, &kernel)).abs() < 1e-9);
            if kernel != Kernel::Linear {
                let model = SvmModel::train(&x, &y.map(|t| usize::from(t > 0.0)), &SvmParams::new(kernel, 2.0)).unwrap();
                let dir = tempfile::tempdir().unwrap();
                model.save(dir.path(), &["neg".into(), "pos".into()], None).unwrap();
                let (back, names, _) = SvmModel::load(dir.path()).unwrap();
                assert_eq!(names, ["neg", "pos"]);
                for r in x.iter_rows() {
                    assert_eq!(back.machines[0].2.decision(r), model.machines[0].2.decision(r));
                }
            }
        }
    }

    #[test]
    fn ovo_machine_count_and_binary_reduction() {
        let rows: Vec<Vec<f64>> = (0..25).map(|i| vec![(i / 5) as f64, ((i * 7) % 5) as f64 * 0.01]).collect();
        let labels: Vec<usize> = (0..25).map(|i| i / 5).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let model = SvmModel::train(&x, &labels, &SvmParams::new(Kernel::Linear, 10.0)).unwrap();
        assert_eq!(model.machines.len(), 10);
        assert_eq!(model.predict(&x).unwrap(), labels);
        assert!(model.predict_one(&[1.0]).is_err());
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path(), &[], Some("h")).unwrap();
        let (back, _, hash) = SvmModel::load(dir.path()).unwrap();
        assert_eq!(hash.as_deref(), Some("h"));
        assert_eq!(back.predict(&x).unwrap(), labels);

        let two = SvmModel::train(&x.select_rows(&(0..10).collect::<Vec<_>>()), &labels[..10], &SvmParams::new(Kernel::Linear, 10.0)).unwrap();
        let mc = &two.machines[0].2;
        for v in [-1.0, 0.2, 0.5, 0.9, 3.0] {
            let want = if mc.decision(&[v, 0.0]) > 0.0 { 0 } else { 1 };
            assert_eq!(two.predict_one(&[v, 0.0]).unwrap(), want);
        }
    }
}
