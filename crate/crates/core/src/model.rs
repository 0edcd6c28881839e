//! Ring of `N` identical nodes with `n`-dimensional state, coupled to the
//! neighbors `j-R ..= j+R`:
//!
//! ```text
//! dy_j/dt = sum_m (M_m(0) + p K_m) y_{j+m} + h(y_{j-R}, .., y_{j+R}; p)
//! ```
//!
//! Indices wrap modulo `N`. The nonlinearity `h` is a callback on the window
//! of `2R+1` node states and must vanish to second order at the origin.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step used when `K_m` is extracted from a user-supplied `M_m(p)`.
pub const PARAM_FD_STEP: f64 = 1e-6;
/// Relative step for finite-difference Jacobians of `h`.
pub const JACOBIAN_FD_STEP: f64 = 1e-6;

/// Nonlinear part of the node dynamics.
///
/// `window` holds the states `y_{j-R}, .., y_{j+R}` back to back, so it has
/// length `(2R+1) n`; `out` has length `n`.
pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn eval(&self, window: &[f64], p: f64, out: &mut [f64]);

    /// Writes `dh/dwindow` as a row-major `n x (2R+1)n` matrix into `out`.
    /// Returns `false` if no analytic derivative is available; callers then
    /// fall back to finite differences.
    fn jacobian(&self, _window: &[f64], _p: f64, _out: &mut [f64]) -> bool {
        false
    }

    /// Builtin parameters, for serialization.
    fn params(&self) -> serde_json::Value {
        serde_json::Value::Object(Default::default())
    }
}

/// `h = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoNonlinearity;

impl Nonlinearity for NoNonlinearity {
    fn name(&self) -> &str {
        "none"
    }

    fn eval(&self, _window: &[f64], _p: f64, out: &mut [f64]) {
        out.fill(0.0);
    }

    fn jacobian(&self, _window: &[f64], _p: f64, out: &mut [f64]) -> bool {
        out.fill(0.0);
        true
    }
}

/// Cubic restoring force of the Duffing oscillator: `h = (0, -s x_j^3)` where
/// `x_j` is the first component of the center node.
#[derive(Debug, Clone, Copy)]
pub struct DuffingCubic {
    dim: usize,
    range: usize,
    strength: f64,
}

impl DuffingCubic {
    pub fn new(dim: usize, range: usize, strength: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidModel(
                "duffing_cubic needs a node dimension of at least 2".into(),
            ));
        }
        Ok(Self {
            dim,
            range,
            strength,
        })
    }

    #[inline]
    fn center(&self) -> usize {
        self.range * self.dim
    }
}

impl Nonlinearity for DuffingCubic {
    fn name(&self) -> &str {
        "duffing_cubic"
    }

    #[inline]
    fn eval(&self, window: &[f64], _p: f64, out: &mut [f64]) {
        let x = window[self.center()];
        out.fill(0.0);
        out[1] = -self.strength * x * x * x;
    }

    fn jacobian(&self, window: &[f64], _p: f64, out: &mut [f64]) -> bool {
        let x = window[self.center()];
        let cols = (2 * self.range + 1) * self.dim;
        out.fill(0.0);
        out[cols + self.center()] = -3.0 * self.strength * x * x;
        true
    }

    fn params(&self) -> serde_json::Value {
        serde_json::json!({ "strength": self.strength })
    }
}

type EvalFn = dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync;

/// Nonlinearity backed by closures, for models that are not builtin.
pub struct FnNonlinearity {
    name: String,
    eval: Box<EvalFn>,
    jacobian: Option<Box<EvalFn>>,
}

impl FnNonlinearity {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            eval: Box::new(eval),
            jacobian: None,
        }
    }

    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Box::new(jacobian));
        self
    }
}

impl fmt::Debug for FnNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnNonlinearity")
            .field("name", &self.name)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl Nonlinearity for FnNonlinearity {
    fn name(&self) -> &str {
        &self.name
    }

    fn eval(&self, window: &[f64], p: f64, out: &mut [f64]) {
        (self.eval)(window, p, out)
    }

    fn jacobian(&self, window: &[f64], p: f64, out: &mut [f64]) -> bool {
        match &self.jacobian {
            Some(jac) => {
                jac(window, p, out);
                true
            }
            None => false,
        }
    }
}

/// Ring-coupled oscillator system.
///
/// The parameter `p` passed to the evaluation methods is measured from
/// [`RingModel::param_origin`]; the nonlinearity receives the absolute value.
#[derive(Debug, Clone)]
pub struct RingModel {
    dim: usize,
    nodes: usize,
    range: usize,
    base: Vec<DMatrix<f64>>,
    deriv: Vec<DMatrix<f64>>,
    nonlinearity: Arc<dyn Nonlinearity>,
    param_origin: f64,
    parameter_label: String,
}

impl RingModel {
    /// `base[m + R]` is `M_m(0)` and `deriv[m + R]` is `K_m`, for `m` in `-R..=R`.
    pub fn new(
        dim: usize,
        nodes: usize,
        range: usize,
        base: Vec<DMatrix<f64>>,
        deriv: Vec<DMatrix<f64>>,
        nonlinearity: Arc<dyn Nonlinearity>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("node dimension must be positive".into()));
        }
        if nodes == 0 {
            return Err(Error::InvalidModel("ring must have at least one node".into()));
        }
        let width = 2 * range + 1;
        for (what, mats) in [("M", &base), ("K", &deriv)] {
            if mats.len() != width {
                return Err(Error::InvalidModel(format!(
                    "expected {width} {what} matrices for coupling range {range}, got {}",
                    mats.len()
                )));
            }
            if let Some(bad) = mats.iter().find(|m| m.shape() != (dim, dim)) {
                return Err(Error::InvalidModel(format!(
                    "{what} matrix has shape {:?}, expected ({dim}, {dim})",
                    bad.shape()
                )));
            }
        }
        let model = Self {
            dim,
            nodes,
            range,
            base,
            deriv,
            nonlinearity,
            param_origin: 0.0,
            parameter_label: "p".into(),
        };
        model.check_nonlinearity()?;
        Ok(model)
    }

    /// Builds a model from `M_m(p)` given as a function of `(m, p)`; the
    /// derivatives `K_m` are extracted by central differences.
    pub fn from_matrix_fn(
        dim: usize,
        nodes: usize,
        range: usize,
        matrices: impl Fn(i64, f64) -> DMatrix<f64>,
        nonlinearity: Arc<dyn Nonlinearity>,
    ) -> Result<Self> {
        let r = range as i64;
        let base = (-r..=r).map(|m| matrices(m, 0.0)).collect();
        let deriv = (-r..=r)
            .map(|m| {
                (matrices(m, PARAM_FD_STEP) - matrices(m, -PARAM_FD_STEP)) / (2.0 * PARAM_FD_STEP)
            })
            .collect();
        Self::new(dim, nodes, range, base, deriv, nonlinearity)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.parameter_label = label.into();
        self
    }

    /// Same model with the base point moved to `p0`, so that `p = 0` of the
    /// returned model is `p = p0` of `self`.
    pub fn rebased(&self, p0: f64) -> Self {
        let mut out = self.clone();
        for (b, k) in out.base.iter_mut().zip(&self.deriv) {
            *b += k * p0;
        }
        out.param_origin += p0;
        out
    }

    /// Same coupling with a different number of nodes.
    pub fn with_nodes(&self, nodes: usize) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::InvalidModel("ring must have at least one node".into()));
        }
        let mut out = self.clone();
        out.nodes = nodes;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn state_len(&self) -> usize {
        self.dim * self.nodes
    }

    pub fn param_origin(&self) -> f64 {
        self.param_origin
    }

    pub fn parameter_label(&self) -> &str {
        &self.parameter_label
    }

    pub fn nonlinearity(&self) -> &Arc<dyn Nonlinearity> {
        &self.nonlinearity
    }

    /// Neighbor offsets `-R..=R`.
    pub fn offsets(&self) -> impl Iterator<Item = i64> + Clone {
        let r = self.range as i64;
        -r..=r
    }

    /// `M_m(0)`.
    pub fn base_matrix(&self, m: i64) -> &DMatrix<f64> {
        &self.base[self.slot(m)]
    }

    /// `K_m`.
    pub fn deriv_matrix(&self, m: i64) -> &DMatrix<f64> {
        &self.deriv[self.slot(m)]
    }

    /// `M_m(p) = M_m(0) + p K_m`.
    pub fn matrix_at(&self, m: i64, p: f64) -> DMatrix<f64> {
        let i = self.slot(m);
        &self.base[i] + &self.deriv[i] * p
    }

    fn slot(&self, m: i64) -> usize {
        assert!(m.unsigned_abs() as usize <= self.range, "offset {m} outside coupling range");
        (m + self.range as i64) as usize
    }

    /// Evaluates `h` with the parameter measured from the model's origin.
    pub fn eval_nonlinearity(&self, window: &[f64], p: f64, out: &mut [f64]) {
        self.nonlinearity.eval(window, self.param_origin + p, out)
    }

    fn window_len(&self) -> usize {
        (2 * self.range + 1) * self.dim
    }

    /// Zero at the origin and zero first derivative there.
    fn check_nonlinearity(&self) -> Result<()> {
        let len = self.window_len();
        let mut window = vec![0.0; len];
        let mut out = vec![0.0; self.dim];
        for p in [0.0, 1.0, -1.0] {
            self.nonlinearity.eval(&window, self.param_origin + p, &mut out);
            if out.iter().any(|v| *v != 0.0) {
                return Err(Error::InvalidModel(format!(
                    "nonlinearity '{}' does not vanish at the origin",
                    self.nonlinearity.name()
                )));
            }
        }
        let delta = 1e-4;
        for i in 0..len {
            window.fill(0.0);
            window[i] = delta;
            self.nonlinearity.eval(&window, self.param_origin, &mut out);
            let ratio = out.iter().map(|v| v * v).sum::<f64>().sqrt() / delta;
            if !(ratio < 1e-6) {
                return Err(Error::InvalidModel(format!(
                    "nonlinearity '{}' has a nonzero linear part at the origin (ratio {ratio:e})",
                    self.nonlinearity.name()
                )));
            }
        }
        Ok(())
    }

    fn check_state(&self, state: &[f64], context: &'static str) -> Result<()> {
        if state.len() != self.state_len() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.state_len(),
                got: state.len(),
            });
        }
        Ok(())
    }

    /// Evaluable right-hand side at a fixed parameter value.
    pub fn system(&self, p: f64) -> RingSystem<'_> {
        let cols = self.window_len();
        let mut rows = vec![0.0; self.dim * cols];
        for (slot, (b, k)) in self.base.iter().zip(&self.deriv).enumerate() {
            for r in 0..self.dim {
                for c in 0..self.dim {
                    rows[r * cols + slot * self.dim + c] = b[(r, c)] + p * k[(r, c)];
                }
            }
        }
        RingSystem {
            model: self,
            p,
            rows,
        }
    }

    /// Right-hand side of the ring equations.
    pub fn vector_field(&self, state: &[f64], p: f64) -> Result<Vec<f64>> {
        self.check_state(state, "ring_vector_field")?;
        let mut out = vec![0.0; state.len()];
        self.system(p).rhs(state, &mut out);
        Ok(out)
    }

    /// Jacobian of the right-hand side, stored block-banded.
    pub fn jacobian(&self, state: &[f64], p: f64) -> Result<BandedJacobian> {
        self.check_state(state, "ring_jacobian")?;
        let sys = self.system(p);
        let mut jac = BandedJacobian::zeros(self.dim, self.nodes, self.range);
        sys.jacobian_into(state, &mut jac);
        Ok(jac)
    }

    /// Jacobian with `h` differentiated by central differences even when an
    /// analytic derivative exists.
    pub fn jacobian_fd(&self, state: &[f64], p: f64) -> Result<BandedJacobian> {
        self.check_state(state, "ring_jacobian")?;
        let sys = self.system(p);
        let mut jac = BandedJacobian::zeros(self.dim, self.nodes, self.range);
        sys.fill_linear(&mut jac);
        sys.add_nonlinear_fd(state, &mut jac);
        Ok(jac)
    }
}

/// A [`RingModel`] frozen at one parameter value. The linear part is kept as
/// one `n x (2R+1)n` row-major matrix acting on a node's window.
#[derive(Debug, Clone)]
pub struct RingSystem<'a> {
    model: &'a RingModel,
    p: f64,
    rows: Vec<f64>,
}

impl<'a> RingSystem<'a> {
    pub fn model(&self) -> &'a RingModel {
        self.model
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn state_len(&self) -> usize {
        self.model.state_len()
    }

    /// Copies the window of node `j` into `buf`, or borrows it from `state`
    /// when it does not wrap around the ring.
    #[inline]
    fn window<'s>(&self, state: &'s [f64], j: usize, buf: &'s mut [f64]) -> &'s [f64] {
        let n = self.model.dim;
        let big_n = self.model.nodes;
        let r = self.model.range;
        if j >= r && j + r < big_n {
            &state[(j - r) * n..(j + r + 1) * n]
        } else {
            for (slot, m) in (-(r as i64)..=r as i64).enumerate() {
                let node = wrap(j as i64 + m, big_n);
                buf[slot * n..(slot + 1) * n].copy_from_slice(&state[node * n..(node + 1) * n]);
            }
            buf
        }
    }

    /// `out = f(state)`. Lengths are not checked.
    pub fn rhs(&self, state: &[f64], out: &mut [f64]) {
        let n = self.model.dim;
        let p_abs = self.model.param_origin + self.p;
        let cols = self.model.window_len();
        let h = &*self.model.nonlinearity;
        with_scratch(cols, |buf| {
            for (j, out_j) in out.chunks_exact_mut(n).enumerate() {
                let window = self.window(state, j, buf);
                h.eval(window, p_abs, out_j);
                for (o, row) in out_j.iter_mut().zip(self.rows.chunks_exact(cols)) {
                    *o += dot(row, window);
                }
            }
        })
    }

    fn fill_linear(&self, jac: &mut BandedJacobian) {
        for node_rows in jac.rows.chunks_exact_mut(self.rows.len()) {
            node_rows.copy_from_slice(&self.rows);
        }
    }

    /// Overwrites `jac` with the Jacobian at `state`.
    pub fn jacobian_into(&self, state: &[f64], jac: &mut BandedJacobian) {
        self.fill_linear(jac);
        let n = self.model.dim;
        let cols = jac.cols();
        let p_abs = self.model.param_origin + self.p;
        let h = &*self.model.nonlinearity;
        let analytic = with_scratch(cols, |buf| {
            with_scratch(n * cols, |dh| {
                for j in 0..self.model.nodes {
                    let window = self.window(state, j, buf);
                    dh.fill(0.0);
                    if !h.jacobian(window, p_abs, dh) {
                        return false;
                    }
                    jac.add_window_derivative(j, dh);
                }
                true
            })
        });
        if !analytic {
            self.fill_linear(jac);
            self.add_nonlinear_fd(state, jac);
        }
    }

    fn add_nonlinear_fd(&self, state: &[f64], jac: &mut BandedJacobian) {
        let n = self.model.dim;
        let cols = jac.cols();
        let p_abs = self.model.param_origin + self.p;
        let scale = state.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let step = JACOBIAN_FD_STEP * scale;
        let mut buf = vec![0.0; cols];
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        let mut dh = vec![0.0; n * cols];
        let h = &*self.model.nonlinearity;
        for j in 0..self.model.nodes {
            let mut window = self.window(state, j, &mut buf).to_vec();
            for c in 0..cols {
                let orig = window[c];
                window[c] = orig + step;
                h.eval(&window, p_abs, &mut plus);
                window[c] = orig - step;
                h.eval(&window, p_abs, &mut minus);
                window[c] = orig;
                for row in 0..n {
                    dh[row * cols + c] = (plus[row] - minus[row]) / (2.0 * step);
                }
            }
            jac.add_window_derivative(j, &dh);
        }
    }
}

/// Runs `f` on a zeroed buffer of length `len`, kept on the stack when small.
#[inline]
fn with_scratch<R>(len: usize, f: impl FnOnce(&mut [f64]) -> R) -> R {
    const STACK: usize = 128;
    if len <= STACK {
        let mut buf = [0.0; STACK];
        f(&mut buf[..len])
    } else {
        f(&mut vec![0.0; len])
    }
}

/// Mathematical (non-negative) remainder of a node index.
#[inline]
pub fn wrap(index: i64, nodes: usize) -> usize {
    index.rem_euclid(nodes as i64) as usize
}

/// Block-banded Jacobian of a ring: for every node `j` the `n x (2R+1)n`
/// matrix `d f_j / d(y_{j-R}, .., y_{j+R})`. Storage and mat-vec are
/// `O(N R n^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedJacobian {
    dim: usize,
    nodes: usize,
    range: usize,
    rows: Vec<f64>,
}

impl BandedJacobian {
    pub fn zeros(dim: usize, nodes: usize, range: usize) -> Self {
        Self {
            dim,
            nodes,
            range,
            rows: vec![0.0; nodes * (2 * range + 1) * dim * dim],
        }
    }

    #[inline]
    fn cols(&self) -> usize {
        (2 * self.range + 1) * self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Block `d f_j / d y_{j+m}`, row-major.
    pub fn block(&self, j: usize, m: i64) -> Vec<f64> {
        let n = self.dim;
        let cols = self.cols();
        let slot = (m + self.range as i64) as usize;
        let node_rows = &self.rows[j * n * cols..(j + 1) * n * cols];
        node_rows
            .chunks_exact(cols)
            .flat_map(|row| row[slot * n..(slot + 1) * n].iter().copied())
            .collect()
    }

    fn add_window_derivative(&mut self, j: usize, dh: &[f64]) {
        let len = self.dim * self.cols();
        for (a, b) in self.rows[j * len..(j + 1) * len].iter_mut().zip(dh) {
            *a += b;
        }
    }

    /// `out = J v`.
    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim;
        let cols = self.cols();
        let r = self.range;
        with_scratch(cols, |buf| {
            for (j, (out_j, node_rows)) in out
                .chunks_exact_mut(n)
                .zip(self.rows.chunks_exact(n * cols))
                .enumerate()
            {
                let window: &[f64] = if j >= r && j + r < self.nodes {
                    &v[(j - r) * n..(j + r + 1) * n]
                } else {
                    for (slot, chunk) in buf.chunks_exact_mut(n).enumerate() {
                        let node = wrap(j as i64 + slot as i64 - r as i64, self.nodes);
                        chunk.copy_from_slice(&v[node * n..(node + 1) * n]);
                    }
                    buf
                };
                for (o, row) in out_j.iter_mut().zip(node_rows.chunks_exact(cols)) {
                    *o = dot(row, window);
                }
            }
        })
    }

    /// Dense `Nn x Nn` copy. Blocks of offsets that alias (small rings) are summed.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim;
        let size = n * self.nodes;
        let mut dense = DMatrix::zeros(size, size);
        let r = self.range as i64;
        for j in 0..self.nodes {
            for m in -r..=r {
                let node = wrap(j as i64 + m, self.nodes);
                let block = self.block(j, m);
                for row in 0..n {
                    for c in 0..n {
                        dense[(j * n + row, node * n + c)] += block[row * n + c];
                    }
                }
            }
        }
        dense
    }

    /// Sum of the diagonal entries.
    pub fn trace(&self) -> f64 {
        let n = self.dim;
        let r = self.range as i64;
        let mut total = 0.0;
        for j in 0..self.nodes {
            // on rings shorter than the stencil, offsets other than 0 can land on j
            for m in (-r..=r).filter(|m| wrap(j as i64 + m, self.nodes) == j) {
                let b = self.block(j, m);
                total += (0..n).map(|i| b[i * n + i]).sum::<f64>();
            }
        }
        total
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // fixed lengths let the compiler unroll the common small windows
    match a.len() {
        3 => dot_fixed::<3>(a, b),
        4 => dot_fixed::<4>(a, b),
        6 => dot_fixed::<6>(a, b),
        9 => dot_fixed::<9>(a, b),
        10 => dot_fixed::<10>(a, b),
        _ => a.iter().zip(b).map(|(x, y)| x * y).sum(),
    }
}

#[inline(always)]
fn dot_fixed<const L: usize>(a: &[f64], b: &[f64]) -> f64 {
    let a: &[f64; L] = a.try_into().unwrap();
    let b: &[f64; L] = b[..L].try_into().unwrap();
    let mut acc = 0.0;
    for i in 0..L {
        acc += a[i] * b[i];
    }
    acc
}

/// Parameters of the unidirectionally coupled Duffing ring
/// `x' = z, z' = -d z - a x - x^3 + k (x_{j+1} - x_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DuffingRingParams {
    pub a: f64,
    pub d: f64,
    pub k: f64,
}

impl Default for DuffingRingParams {
    fn default() -> Self {
        Self {
            a: 0.1,
            d: 0.3,
            k: 0.0,
        }
    }
}

impl DuffingRingParams {
    pub fn with_k(self, k: f64) -> Self {
        Self { k, ..self }
    }
}

/// Duffing ring with the coupling `k` as parameter: `p` is the offset from
/// `params.k`, and `param_origin` is `params.k`, so a ring built with `k = 0`
/// takes the coupling directly as `p`.
pub fn make_duffing_ring(params: DuffingRingParams, nodes: usize) -> Result<RingModel> {
    if nodes < 2 {
        return Err(Error::InvalidModel(format!(
            "a Duffing ring needs at least 2 nodes, got {nodes}"
        )));
    }
    if !(params.a > 0.0 && params.d > 0.0) {
        return Err(Error::InvalidModel(format!(
            "Duffing stiffness and damping must be positive (a = {}, d = {})",
            params.a, params.d
        )));
    }
    if !(params.k >= 0.0) {
        return Err(Error::InvalidModel(format!(
            "coupling must be non-negative, got {}",
            params.k
        )));
    }
    let DuffingRingParams { a, d, k } = params;
    let base = vec![
        DMatrix::zeros(2, 2),
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -(a + k), -d]),
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, k, 0.0]),
    ];
    let deriv = vec![
        DMatrix::zeros(2, 2),
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, -1.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]),
    ];
    let h = Arc::new(DuffingCubic::new(2, 1, 1.0)?);
    let mut model = RingModel::new(2, nodes, 1, base, deriv, h)?.with_label("k");
    model.param_origin = k;
    Ok(model)
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    #[serde(rename = "N")]
    pub nodes: usize,
    #[serde(rename = "R")]
    pub range: usize,
    /// Offset (as a string key) to row-major `n x n` matrix `M_m(0)`.
    pub matrices: BTreeMap<String, Vec<f64>>,
    #[serde(rename = "K", default)]
    pub k: BTreeMap<String, Vec<f64>>,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub parameter_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn build(&self) -> Result<RingModel> {
        let n = self.n;
        let r = self.range as i64;
        let parse = |what: &str, map: &BTreeMap<String, Vec<f64>>| -> Result<Vec<DMatrix<f64>>> {
            let mut mats = vec![DMatrix::zeros(n, n); 2 * self.range + 1];
            for (key, values) in map {
                let m: i64 = key.trim().parse().map_err(|_| {
                    Error::InvalidModel(format!("{what} key '{key}' is not an integer offset"))
                })?;
                if m.abs() > r {
                    return Err(Error::InvalidModel(format!(
                        "{what} offset {m} outside coupling range {r}"
                    )));
                }
                if values.len() != n * n {
                    return Err(Error::InvalidModel(format!(
                        "{what}[{m}] has {} entries, expected {}",
                        values.len(),
                        n * n
                    )));
                }
                mats[(m + r) as usize] = DMatrix::from_row_slice(n, n, values);
            }
            Ok(mats)
        };
        let base = parse("matrices", &self.matrices)?;
        let deriv = parse("K", &self.k)?;
        let h = builtin_nonlinearity(&self.nonlinearity, n, self.range)?;
        let model = RingModel::new(n, self.nodes, self.range, base, deriv, h)?;
        Ok(match &self.parameter_label {
            Some(label) => model.with_label(label.clone()),
            None => model,
        })
    }

    /// Description of a model at its base point. Fails for closure-backed
    /// nonlinearities, which have no on-disk form.
    pub fn describe(model: &RingModel) -> Result<Self> {
        let name = model.nonlinearity().name().to_string();
        if name != "none" && name != "duffing_cubic" {
            return Err(Error::InvalidModel(format!(
                "nonlinearity '{name}' is not a builtin and cannot be serialized"
            )));
        }
        let flat = |m: &DMatrix<f64>| -> Vec<f64> {
            (0..m.nrows())
                .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
                .map(|(r, c)| m[(r, c)])
                .collect()
        };
        let params = match model.nonlinearity().params() {
            serde_json::Value::Object(map) => map,
            _ => Default::default(),
        };
        Ok(Self {
            n: model.dim(),
            nodes: model.nodes(),
            range: model.range(),
            matrices: model
                .offsets()
                .map(|m| (m.to_string(), flat(model.base_matrix(m))))
                .collect(),
            k: model
                .offsets()
                .map(|m| (m.to_string(), flat(model.deriv_matrix(m))))
                .collect(),
            nonlinearity: NonlinearitySpec { name, params },
            parameter_label: Some(model.parameter_label().to_string()),
        })
    }
}

fn builtin_nonlinearity(
    spec: &NonlinearitySpec,
    dim: usize,
    range: usize,
) -> Result<Arc<dyn Nonlinearity>> {
    let reject_params = |allowed: &[&str]| -> Result<()> {
        match spec.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::InvalidModel(format!(
                "unknown parameter '{k}' for nonlinearity '{}'",
                spec.name
            ))),
            None => Ok(()),
        }
    };
    match spec.name.as_str() {
        "none" => {
            reject_params(&[])?;
            Ok(Arc::new(NoNonlinearity))
        }
        "duffing_cubic" => {
            reject_params(&["strength"])?;
            let strength = match spec.params.get("strength") {
                None => 1.0,
                Some(v) => v.as_f64().ok_or_else(|| {
                    Error::InvalidModel("duffing_cubic strength must be a number".into())
                })?,
            };
            Ok(Arc::new(DuffingCubic::new(dim, range, strength)?))
        }
        other => Err(Error::InvalidModel(format!("unknown nonlinearity '{other}'"))),
    }
}
