//! Direct integration of the ring equations, Lyapunov spectra by the
//! Benettin/QR method, Poincare sections and attractor classification.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BandedJacobian, RingModel, RingSystem};

/// Default fixed step.
pub const DEFAULT_DT: f64 = 0.01;
/// Largest exponent above which an attractor is chaotic.
pub const CHAOS_THRESHOLD: f64 = 1e-3;
/// Below this the largest exponent counts as zero.
pub const NEUTRAL_THRESHOLD: f64 = 1e-4;
/// Final-state norm below which the attractor is the rest state.
pub const EQUILIBRIUM_TOL: f64 = 1e-6;
/// Distance within which section points belong to one cluster.
pub const CLUSTER_TOL: f64 = 1e-4;
/// Largest number of section clusters accepted as a periodic orbit.
pub const MAX_PERIOD: usize = 16;
/// Renormalization-interval halvings attempted on tangent collapse.
pub const MAX_COLLAPSE_RETRIES: usize = 4;

/// Time stepper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Classical fixed-step fourth-order Runge-Kutta.
    Rk4,
    /// Dormand-Prince 5(4) with step-size control; `dt` is the initial step.
    Dopri5,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub dt: f64,
    pub method: Method,
    /// Store every `stride`-th (accepted) step.
    pub stride: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            method: Method::Rk4,
            stride: 1,
            abs_tol: 1e-9,
            rel_tol: 1e-9,
        }
    }
}

/// Sampled solution. `states` holds one state of length `state_len` per time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub model: RingModel,
    pub p: f64,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub state_len: usize,
    pub dt: f64,
    pub method: Method,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.state_len..(i + 1) * self.state_len]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Writes a header `t,y0,y1,..` and one row per sample.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "t")?;
        for c in 0..self.state_len {
            write!(out, ",y{c}")?;
        }
        writeln!(out)?;
        for i in 0..self.len() {
            write!(out, "{}", self.times[i])?;
            for v in self.state(i) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Scratch space for repeated RK4 steps of one system.
struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; len]),
            tmp: vec![0.0; len],
        }
    }

    fn step(&mut self, sys: &RingSystem<'_>, y: &mut [f64], dt: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        sys.rhs(y, k1);
        axpy_into(&mut self.tmp, y, 0.5 * dt, k1);
        sys.rhs(&self.tmp, k2);
        axpy_into(&mut self.tmp, y, 0.5 * dt, k2);
        sys.rhs(&self.tmp, k3);
        axpy_into(&mut self.tmp, y, dt, k3);
        sys.rhs(&self.tmp, k4);
        let w = dt / 6.0;
        for i in 0..y.len() {
            y[i] += w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
    }
}

#[inline]
fn axpy_into(out: &mut [f64], y: &[f64], a: f64, x: &[f64]) {
    for ((o, yi), xi) in out.iter_mut().zip(y).zip(x) {
        *o = yi + a * xi;
    }
}

fn check_finite(y: &[f64], time: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { time })
    }
}

// Dormand-Prince 5(4) tableau (autonomous form, nodes not needed).
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates from `t = 0` to `t_end`, calling `observer(t, y)` on every
/// stored sample. Deterministic for a given input.
pub fn integrate_with(
    model: &RingModel,
    y0: &[f64],
    p: f64,
    t_end: f64,
    options: &IntegrateOptions,
    mut observer: impl FnMut(f64, &[f64]),
) -> Result<Trajectory> {
    if !(options.dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {}", options.dt)));
    }
    if y0.len() != model.state_len() {
        return Err(Error::DimensionMismatch {
            context: "integrate",
            expected: model.state_len(),
            got: y0.len(),
        });
    }
    let stride = options.stride.max(1);
    let sys = model.system(p);
    let len = y0.len();
    let mut traj = Trajectory {
        model: model.clone(),
        p,
        times: vec![0.0],
        states: y0.to_vec(),
        state_len: len,
        dt: options.dt,
        method: options.method,
        rejected_steps: 0,
    };
    observer(0.0, y0);
    let mut y = y0.to_vec();
    let mut store = |traj: &mut Trajectory, t: f64, y: &[f64]| {
        traj.times.push(t);
        traj.states.extend_from_slice(y);
        observer(t, y);
    };
    match options.method {
        Method::Rk4 => {
            let steps = (t_end / options.dt).round() as usize;
            let mut rk = Rk4::new(len);
            for s in 1..=steps {
                rk.step(&sys, &mut y, options.dt);
                let t = s as f64 * options.dt;
                check_finite(&y, t)?;
                if s % stride == 0 || s == steps {
                    store(&mut traj, t, &y);
                }
            }
        }
        Method::Dopri5 => {
            let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; len]);
            let mut tmp = vec![0.0; len];
            let mut y_new = vec![0.0; len];
            let (mut t, mut h) = (0.0, options.dt);
            let mut accepted = 0usize;
            sys.rhs(&y, &mut k[0]);
            while t < t_end {
                h = h.min(t_end - t);
                for s in 1..7 {
                    tmp.copy_from_slice(&y);
                    for (r, a) in DP_A[s].iter().enumerate().take(s) {
                        if *a != 0.0 {
                            for i in 0..len {
                                tmp[i] += h * a * k[r][i];
                            }
                        }
                    }
                    sys.rhs(&tmp, &mut k[s]);
                    if s == 6 {
                        y_new.copy_from_slice(&tmp);
                    }
                }
                let mut err = 0.0f64;
                for i in 0..len {
                    let e: f64 = h * (0..7).map(|s| DP_E[s] * k[s][i]).sum::<f64>();
                    let sc = options.abs_tol + options.rel_tol * y[i].abs().max(y_new[i].abs());
                    err += (e / sc).powi(2);
                }
                let err = (err / len as f64).sqrt();
                if !err.is_finite() {
                    return Err(Error::NonFinite { time: t });
                }
                if err <= 1.0 {
                    t += h;
                    y.copy_from_slice(&y_new);
                    // first-same-as-last
                    let last = k[6].clone();
                    k[0].copy_from_slice(&last);
                    accepted += 1;
                    if accepted % stride == 0 || t >= t_end {
                        store(&mut traj, t, &y);
                    }
                } else {
                    traj.rejected_steps += 1;
                }
                let factor = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
                h *= factor.clamp(0.2, 5.0);
                if h < 1e-14 * t_end.max(1.0) {
                    return Err(Error::NonFinite { time: t });
                }
            }
        }
    }
    Ok(traj)
}

/// [`integrate_with`] without an observer.
pub fn integrate(
    model: &RingModel,
    y0: &[f64],
    p: f64,
    t_end: f64,
    options: &IntegrateOptions,
) -> Result<Trajectory> {
    integrate_with(model, y0, p, t_end, options, |_, _| {})
}

/// Advances `y` by `t` with fixed-step RK4 without storing anything.
pub fn advance(model: &RingModel, y: &mut [f64], p: f64, t: f64, dt: f64) -> Result<()> {
    let sys = model.system(p);
    let mut rk = Rk4::new(y.len());
    let steps = (t / dt).round() as usize;
    for s in 1..=steps {
        rk.step(&sys, y, dt);
        if s % 1000 == 0 || s == steps {
            check_finite(y, s as f64 * dt)?;
        }
    }
    Ok(())
}

/// Gaussian state of standard deviation `amplitude`, seeded.
pub fn random_state(len: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            amplitude * z
        })
        .collect()
}

/// Run lengths for [`lyapunov_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovOptions {
    pub num_exponents: usize,
    pub t_transient: f64,
    /// End time of the run, transient included.
    pub t_total: f64,
    pub renorm_interval: f64,
    pub dt: f64,
    /// Seed of the random initial tangent frame.
    pub seed: u64,
}

impl LyapunovOptions {
    pub fn production(num_exponents: usize) -> Self {
        Self {
            num_exponents,
            t_transient: 5e3,
            t_total: 5e4,
            renorm_interval: 1.0,
            dt: DEFAULT_DT,
            seed: 0,
        }
    }

    /// Ten times shorter than [`LyapunovOptions::production`].
    pub fn ci(num_exponents: usize) -> Self {
        Self {
            t_transient: 5e2,
            t_total: 5e3,
            ..Self::production(num_exponents)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    /// Descending.
    pub exponents: Vec<f64>,
    pub num_exponents: usize,
    /// Running estimates after every renormalization past the transient.
    pub convergence_history: Vec<Vec<f64>>,
    /// Standard deviation of each running estimate over the last 20% of the history.
    pub standard_error: Vec<f64>,
    pub transient_time: f64,
    pub total_time: f64,
    pub renorm_interval: f64,
    pub final_state: Vec<f64>,
}

impl LyapunovResult {
    pub fn largest(&self) -> f64 {
        self.exponents[0]
    }

    pub fn count_above(&self, threshold: f64) -> usize {
        self.exponents.iter().filter(|l| **l > threshold).count()
    }
}

/// Orthonormalizes the columns stored contiguously in `vectors`
/// (`count` vectors of length `len`) by modified Gram-Schmidt and returns
/// the norms before normalization (the diagonal of R).
pub fn modified_gram_schmidt(vectors: &mut [f64], len: usize, count: usize) -> Vec<f64> {
    let mut diag = Vec::with_capacity(count);
    for i in 0..count {
        let (done, rest) = vectors.split_at_mut(i * len);
        let v = &mut rest[..len];
        for j in 0..i {
            let q = &done[j * len..(j + 1) * len];
            let proj: f64 = q.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(x, qj)| *x -= proj * qj);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        diag.push(norm);
        if norm > 0.0 && norm.is_finite() {
            v.iter_mut().for_each(|x| *x /= norm);
        }
    }
    diag
}

/// Smallest stretch factor accepted before declaring a tangent collapse.
const COLLAPSE_FLOOR: f64 = 1e-200;

/// Scratch for RK4 on the state plus tangent vectors.
struct TangentRk4 {
    len: usize,
    count: usize,
    jac: BandedJacobian,
    ky: [Vec<f64>; 4],
    kv: [Vec<f64>; 4],
    ytmp: Vec<f64>,
    vtmp: Vec<f64>,
}

impl TangentRk4 {
    fn new(model: &RingModel, count: usize) -> Self {
        let len = model.state_len();
        Self {
            len,
            count,
            jac: BandedJacobian::zeros(model.dim(), model.nodes(), model.range()),
            ky: std::array::from_fn(|_| vec![0.0; len]),
            kv: std::array::from_fn(|_| vec![0.0; len * count]),
            ytmp: vec![0.0; len],
            vtmp: vec![0.0; len * count],
        }
    }

    fn stage(&mut self, sys: &RingSystem<'_>, s: usize, from_tmp: bool, y: &[f64], v: &[f64]) {
        let (ys, vs) = if from_tmp { (&self.ytmp[..], &self.vtmp[..]) } else { (y, v) };
        sys.rhs(ys, &mut self.ky[s]);
        sys.jacobian_into(ys, &mut self.jac);
        for c in 0..self.count {
            let range = c * self.len..(c + 1) * self.len;
            self.jac.matvec(&vs[range.clone()], &mut self.kv[s][range]);
        }
    }

    fn prepare(&mut self, y: &[f64], v: &[f64], s: usize, a: f64) {
        axpy_into(&mut self.ytmp, y, a, &self.ky[s]);
        axpy_into(&mut self.vtmp, v, a, &self.kv[s]);
    }

    fn step(&mut self, sys: &RingSystem<'_>, y: &mut [f64], v: &mut [f64], dt: f64) {
        self.stage(sys, 0, false, y, v);
        self.prepare(y, v, 0, 0.5 * dt);
        self.stage(sys, 1, true, y, v);
        self.prepare(y, v, 1, 0.5 * dt);
        self.stage(sys, 2, true, y, v);
        self.prepare(y, v, 2, dt);
        self.stage(sys, 3, true, y, v);
        let w = dt / 6.0;
        let [a, b, c, d] = &self.ky;
        for i in 0..y.len() {
            y[i] += w * (a[i] + 2.0 * (b[i] + c[i]) + d[i]);
        }
        let [a, b, c, d] = &self.kv;
        for i in 0..v.len() {
            v[i] += w * (a[i] + 2.0 * (b[i] + c[i]) + d[i]);
        }
    }
}

/// Random orthonormal frame of `count` vectors, reproducible from `seed`.
fn initial_frame(len: usize, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..len * count).map(|_| StandardNormal.sample(&mut rng)).collect();
    modified_gram_schmidt(&mut v, len, count);
    v
}

/// Benettin method: the state and `num_exponents` tangent vectors are
/// advanced together with RK4 under the banded Jacobian and re-orthonormalized
/// every `renorm_interval`. Log stretch factors are accumulated after
/// `t_transient`. On tangent collapse the interval is halved and the run
/// restarted, at most [`MAX_COLLAPSE_RETRIES`] times.
pub fn lyapunov_spectrum(
    model: &RingModel,
    p: f64,
    y0: &[f64],
    options: &LyapunovOptions,
) -> Result<LyapunovResult> {
    let len = model.state_len();
    if y0.len() != len {
        return Err(Error::DimensionMismatch {
            context: "lyapunov_spectrum",
            expected: len,
            got: y0.len(),
        });
    }
    if options.num_exponents == 0 || options.num_exponents > len {
        return Err(Error::InvalidArgument(format!(
            "num_exponents must lie in 1..={len}, got {}",
            options.num_exponents
        )));
    }
    if !(options.t_total > options.t_transient && options.t_transient >= 0.0) {
        return Err(Error::InvalidArgument(
            "t_total must exceed t_transient >= 0".into(),
        ));
    }
    if !(options.dt > 0.0 && options.renorm_interval >= options.dt) {
        return Err(Error::InvalidArgument(
            "renorm_interval must be at least dt > 0".into(),
        ));
    }
    let mut interval = options.renorm_interval;
    for attempt in 0..=MAX_COLLAPSE_RETRIES {
        match benettin(model, p, y0, options, interval) {
            Err(Error::TangentCollapse { .. }) if attempt < MAX_COLLAPSE_RETRIES => {
                interval *= 0.5;
            }
            other => return other,
        }
    }
    unreachable!("the last attempt returns")
}

fn benettin(
    model: &RingModel,
    p: f64,
    y0: &[f64],
    options: &LyapunovOptions,
    interval: f64,
) -> Result<LyapunovResult> {
    let len = model.state_len();
    let count = options.num_exponents;
    let sys = model.system(p);
    let mut y = y0.to_vec();
    let mut v = initial_frame(len, count, options.seed);
    let mut rk = TangentRk4::new(model, count);

    let steps_per_renorm = ((interval / options.dt).round() as usize).max(1);
    let tau = steps_per_renorm as f64 * options.dt;
    let transient_renorms = (options.t_transient / tau).round() as usize;
    let total_renorms = (options.t_total / tau).round() as usize;

    let mut sums = vec![0.0; count];
    let mut history = Vec::with_capacity(total_renorms - transient_renorms);
    for r in 1..=total_renorms {
        for _ in 0..steps_per_renorm {
            rk.step(&sys, &mut y, &mut v, options.dt);
        }
        let time = r as f64 * tau;
        check_finite(&y, time)?;
        let diag = modified_gram_schmidt(&mut v, len, count);
        if diag.iter().any(|d| !(d.is_finite() && *d > COLLAPSE_FLOOR)) {
            return Err(Error::TangentCollapse {
                attempts: MAX_COLLAPSE_RETRIES,
                interval,
            });
        }
        if r > transient_renorms {
            let elapsed = (r - transient_renorms) as f64 * tau;
            for (s, d) in sums.iter_mut().zip(&diag) {
                *s += d.ln();
            }
            history.push(sums.iter().map(|s| s / elapsed).collect::<Vec<f64>>());
        }
    }
    let mut exponents = history.last().cloned().unwrap_or_else(|| vec![0.0; count]);
    exponents.sort_by(|a, b| b.total_cmp(a));
    let tail = &history[history.len() - history.len().div_ceil(5)..];
    let standard_error = (0..count)
        .map(|i| {
            let mean = tail.iter().map(|h| h[i]).sum::<f64>() / tail.len() as f64;
            let var = tail.iter().map(|h| (h[i] - mean).powi(2)).sum::<f64>() / tail.len() as f64;
            var.sqrt()
        })
        .collect();
    Ok(LyapunovResult {
        exponents,
        num_exponents: count,
        convergence_history: history,
        standard_error,
        transient_time: transient_renorms as f64 * tau,
        total_time: total_renorms as f64 * tau,
        renorm_interval: tau,
        final_state: y,
    })
}

/// Crossing direction of a section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Both,
}

/// The hyperplane `y[node, component] = level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub node: usize,
    pub component: usize,
    pub level: f64,
    pub direction: Direction,
}

impl SectionSpec {
    pub fn upward(node: usize, component: usize, level: f64) -> Self {
        Self {
            node,
            component,
            level,
            direction: Direction::Up,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionCrossing {
    pub time: f64,
    pub state: Vec<f64>,
}

/// Streaming section detector fed with consecutive samples and their
/// time derivatives.
#[derive(Debug, Clone)]
pub struct SectionDetector {
    spec: SectionSpec,
    index: usize,
    prev: Option<(f64, Vec<f64>, Vec<f64>)>,
}

impl SectionDetector {
    pub fn new(spec: SectionSpec, dim: usize) -> Self {
        Self {
            spec,
            index: spec.node * dim + spec.component,
            prev: None,
        }
    }

    /// Feeds the sample `(t, y, dy/dt)`; returns the crossing in the
    /// interval since the previous sample, if any.
    pub fn push(&mut self, t: f64, y: &[f64], dy: &[f64]) -> Option<SectionCrossing> {
        let mut crossing = None;
        if let Some((t0, y0, dy0)) = &self.prev {
            let g0 = y0[self.index] - self.spec.level;
            let g1 = y[self.index] - self.spec.level;
            let up = g0 < 0.0 && g1 >= 0.0;
            let down = g0 > 0.0 && g1 <= 0.0;
            let wanted = match self.spec.direction {
                Direction::Up => up,
                Direction::Down => down,
                Direction::Both => up || down,
            };
            if wanted {
                crossing = Some(hermite_crossing(
                    *t0, y0, dy0, t, y, dy, self.index, self.spec.level,
                ));
            }
        }
        match &mut self.prev {
            Some((pt, py, pdy)) => {
                *pt = t;
                py.copy_from_slice(y);
                pdy.copy_from_slice(dy);
            }
            None => self.prev = Some((t, y.to_vec(), dy.to_vec())),
        }
        crossing
    }
}

/// Cubic Hermite basis on `s in [0, 1]` for values and scaled derivatives.
#[inline]
fn hermite(s: f64) -> [f64; 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    [2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2]
}

#[allow(clippy::too_many_arguments)]
fn hermite_crossing(
    t0: f64,
    y0: &[f64],
    dy0: &[f64],
    t1: f64,
    y1: &[f64],
    dy1: &[f64],
    index: usize,
    level: f64,
) -> SectionCrossing {
    let h = t1 - t0;
    let g = |s: f64| {
        let b = hermite(s);
        b[0] * y0[index] + b[1] * h * dy0[index] + b[2] * y1[index] + b[3] * h * dy1[index] - level
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let g_lo = g(lo);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) < 0.0) == (g_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    let b = hermite(s);
    let state = (0..y0.len())
        .map(|i| b[0] * y0[i] + b[1] * h * dy0[i] + b[2] * y1[i] + b[3] * h * dy1[i])
        .collect();
    SectionCrossing {
        time: t0 + s * h,
        state,
    }
}

/// Section crossings of a stored trajectory, refined by cubic Hermite
/// interpolation with derivatives from the trajectory's model.
pub fn poincare_section(trajectory: &Trajectory, spec: &SectionSpec) -> Result<Vec<SectionCrossing>> {
    let model = &trajectory.model;
    if spec.node >= model.nodes() || spec.component >= model.dim() {
        return Err(Error::InvalidArgument(format!(
            "section ({}, {}) outside a ring of {} nodes of dimension {}",
            spec.node,
            spec.component,
            model.nodes(),
            model.dim()
        )));
    }
    let sys = model.system(trajectory.p);
    let mut detector = SectionDetector::new(*spec, model.dim());
    let mut dy = vec![0.0; trajectory.state_len];
    let mut out = Vec::new();
    for i in 0..trajectory.len() {
        let y = trajectory.state(i);
        sys.rhs(y, &mut dy);
        if let Some(c) = detector.push(trajectory.times[i], y, &dy) {
            out.push(c);
        }
    }
    Ok(out)
}

/// Greedy clustering: each point joins the first cluster whose seed lies
/// within `tol`. Returns the cluster seeds.
pub fn cluster_points(points: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut seeds: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !seeds.iter().any(|s| distance(s, p) < tol) {
            seeds.push(p.clone());
        }
    }
    seeds
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Exponent `D` in `mean nearest-neighbour distance ~ n^(-1/D)`, estimated
/// from the full point set and its first quarter. About 1 for points on a
/// closed curve.
pub fn nearest_neighbour_dimension(points: &[Vec<f64>]) -> Option<f64> {
    let n = points.len();
    if n < 32 {
        return None;
    }
    let mean_nn = |pts: &[Vec<f64>]| {
        let total: f64 = pts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                pts.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, q)| distance(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        total / pts.len() as f64
    };
    let full = mean_nn(points);
    let quarter = mean_nn(&points[..n / 4]);
    if !(full > 0.0 && quarter > 0.0) {
        return None;
    }
    let slope = (quarter / full).ln() / ((n as f64) / (n / 4) as f64).ln();
    Some(1.0 / slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttractorLabel {
    Equilibrium,
    Periodic,
    Torus,
    Chaotic,
    Undetermined,
}

/// Settings of [`classify_attractor`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyProtocol {
    pub t_transient: f64,
    /// Time over which section points are collected after the transient.
    pub t_sample: f64,
    pub max_crossings: usize,
    pub dt: f64,
    pub section: SectionSpec,
    pub cluster_tol: f64,
    pub max_period: usize,
    /// Accept a torus when `|D - 1|` is below this.
    pub torus_tol: f64,
    /// Use the section test before the exponent.
    pub section_prefilter: bool,
    pub lyapunov: LyapunovOptions,
}

impl ClassifyProtocol {
    pub fn production() -> Self {
        Self {
            t_transient: 5e3,
            t_sample: 2e3,
            max_crossings: 400,
            dt: DEFAULT_DT,
            section: SectionSpec::upward(0, 0, 0.0),
            cluster_tol: CLUSTER_TOL,
            max_period: MAX_PERIOD,
            torus_tol: 0.1,
            section_prefilter: true,
            lyapunov: LyapunovOptions::production(2),
        }
    }

    pub fn ci() -> Self {
        Self {
            t_transient: 5e2,
            t_sample: 5e2,
            lyapunov: LyapunovOptions::ci(2),
            ..Self::production()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: AttractorLabel,
    pub exponents: Option<Vec<f64>>,
    pub clusters: Option<usize>,
    pub crossings: usize,
    pub dimension: Option<f64>,
    pub final_state: Vec<f64>,
}

/// Label of the attractor reached from `y0`:
///
/// 1. final-state norm below [`EQUILIBRIUM_TOL`]: equilibrium;
/// 2. at most `max_period` section clusters: periodic;
/// 3. section points on a closed curve: torus;
/// 4. largest exponent above [`CHAOS_THRESHOLD`]: chaotic, below
///    [`NEUTRAL_THRESHOLD`]: torus, in between: undetermined.
///
/// Steps 2 and 3 run only with `section_prefilter`.
pub fn classify_attractor(
    model: &RingModel,
    p: f64,
    y0: &[f64],
    protocol: &ClassifyProtocol,
) -> Result<Classification> {
    let mut y = y0.to_vec();
    advance(model, &mut y, p, protocol.t_transient, protocol.dt)?;
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut result = Classification {
        label: AttractorLabel::Equilibrium,
        exponents: None,
        clusters: None,
        crossings: 0,
        dimension: None,
        final_state: y.clone(),
    };
    if norm < EQUILIBRIUM_TOL {
        return Ok(result);
    }
    if protocol.section_prefilter {
        let points = sample_section(model, p, &mut y, protocol)?;
        result.crossings = points.len();
        result.final_state = y.clone();
        if points.len() >= 2 {
            let clusters = cluster_points(&points, protocol.cluster_tol).len();
            result.clusters = Some(clusters);
            if clusters <= protocol.max_period && points.len() > 2 * clusters {
                result.label = AttractorLabel::Periodic;
                return Ok(result);
            }
            result.dimension = nearest_neighbour_dimension(&points);
            if let Some(dim) = result.dimension {
                if (dim - 1.0).abs() < protocol.torus_tol {
                    result.label = AttractorLabel::Torus;
                    return Ok(result);
                }
            }
        }
    }
    let lyap = LyapunovOptions {
        t_transient: 0.0f64.max(protocol.lyapunov.t_transient - protocol.t_transient),
        ..protocol.lyapunov
    };
    let lyap = if lyap.t_total <= lyap.t_transient {
        LyapunovOptions {
            t_total: lyap.t_transient + protocol.lyapunov.t_total - protocol.lyapunov.t_transient,
            ..lyap
        }
    } else {
        lyap
    };
    let spectrum = lyapunov_spectrum(model, p, &y, &lyap)?;
    let largest = spectrum.largest();
    result.label = if largest > CHAOS_THRESHOLD {
        AttractorLabel::Chaotic
    } else if largest < NEUTRAL_THRESHOLD {
        AttractorLabel::Torus
    } else {
        AttractorLabel::Undetermined
    };
    result.final_state = spectrum.final_state.clone();
    result.exponents = Some(spectrum.exponents);
    Ok(result)
}

fn sample_section(
    model: &RingModel,
    p: f64,
    y: &mut [f64],
    protocol: &ClassifyProtocol,
) -> Result<Vec<Vec<f64>>> {
    let spec = protocol.section;
    if spec.node >= model.nodes() || spec.component >= model.dim() {
        return Err(Error::InvalidArgument("section outside the ring".into()));
    }
    let sys = model.system(p);
    let mut rk = Rk4::new(y.len());
    let mut dy = vec![0.0; y.len()];
    let mut detector = SectionDetector::new(spec, model.dim());
    let steps = (protocol.t_sample / protocol.dt).round() as usize;
    let mut points = Vec::new();
    sys.rhs(y, &mut dy);
    detector.push(0.0, y, &dy);
    for s in 1..=steps {
        rk.step(&sys, y, protocol.dt);
        let t = s as f64 * protocol.dt;
        sys.rhs(y, &mut dy);
        if let Some(c) = detector.push(t, y, &dy) {
            points.push(c.state);
            if points.len() >= protocol.max_crossings {
                break;
            }
        }
    }
    check_finite(y, steps as f64 * protocol.dt)?;
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_duffing_ring, DuffingRingParams, NoNonlinearity};
    use nalgebra::DMatrix;
    use std::f64::consts::TAU;
    use std::sync::Arc;

    fn oscillator(omega: f64) -> RingModel {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -omega * omega, 0.0]);
        RingModel::new(2, 1, 0, vec![m], vec![DMatrix::zeros(2, 2)], Arc::new(NoNonlinearity))
            .unwrap()
    }

    fn duffing(nodes: usize, k: f64) -> RingModel {
        make_duffing_ring(DuffingRingParams::default().with_k(k), nodes).unwrap()
    }

    #[test]
    fn uncoupled_node_decays() {
        let model = duffing(2, 0.0);
        let y0 = vec![1e-3, 0.0, -2e-3, 1e-3];
        let traj = integrate(&model, &y0, 0.0, 100.0, &IntegrateOptions::default()).unwrap();
        let n0 = y0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let n1 = traj.last_state().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(n1 < 1e-6 * n0);
        assert!((traj.times.last().unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn zero_state_is_invariant() {
        let model = duffing(5, 0.3);
        let traj = integrate(&model, &[0.0; 10], 0.0, 10.0, &IntegrateOptions::default()).unwrap();
        assert!(traj.states.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let model = duffing(4, 0.4);
        let y0 = vec![0.5, 0.0, -0.3, 0.2, 0.1, -0.4, 0.0, 0.3];
        let end = |dt: f64| {
            let opts = IntegrateOptions { dt, ..Default::default() };
            integrate(&model, &y0, 0.0, 2.0, &opts).unwrap().last_state().to_vec()
        };
        let reference = end(1e-4);
        let err = |dt: f64| distance(&end(dt), &reference);
        let order = (err(0.04) / err(0.02)).log2();
        assert!(order >= 3.9, "order {order}");
    }

    #[test]
    fn adaptive_matches_fixed_step() {
        let model = duffing(3, 0.2);
        let y0 = vec![0.5, 0.0, -0.3, 0.2, 0.1, -0.4];
        let fine = integrate(&model, &y0, 0.0, 5.0, &IntegrateOptions { dt: 1e-3, ..Default::default() })
            .unwrap();
        let opts = IntegrateOptions {
            method: Method::Dopri5,
            dt: 0.1,
            ..Default::default()
        };
        let adaptive = integrate(&model, &y0, 0.0, 5.0, &opts).unwrap();
        assert!((adaptive.times.last().unwrap() - 5.0).abs() < 1e-12);
        assert!(distance(adaptive.last_state(), fine.last_state()) < 1e-8);
        assert!(adaptive.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn non_finite_state_aborts() {
        // x' = x^3 escapes in finite time
        let h = crate::model::FnNonlinearity::new("blowup", |w: &[f64], _p: f64, out: &mut [f64]| {
            out[0] = w[0].powi(3);
        });
        let model = RingModel::new(
            1,
            2,
            0,
            vec![DMatrix::zeros(1, 1)],
            vec![DMatrix::zeros(1, 1)],
            Arc::new(h),
        )
        .unwrap();
        let err = integrate(&model, &[1.0, 0.0], 0.0, 2.0, &IntegrateOptions::default()).unwrap_err();
        match err {
            Error::NonFinite { time } => assert!(time > 0.4 && time < 0.6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gram_schmidt_orthonormalizes() {
        let mut v = vec![1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 2.0];
        let diag = modified_gram_schmidt(&mut v, 3, 3);
        assert!((diag[0] - 2f64.sqrt()).abs() < 1e-14);
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|c| v[i * 3 + c] * v[j * 3 + c]).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn decoupled_exponents() {
        let model = duffing(2, 0.0);
        let opts = LyapunovOptions {
            t_transient: 10.0,
            t_total: 200.0,
            ..LyapunovOptions::ci(2)
        };
        let res = lyapunov_spectrum(&model, 0.0, &[0.1, 0.0, 0.0, 0.1], &opts).unwrap();
        for l in &res.exponents {
            assert!((l + 0.15).abs() < 0.005, "{l}");
        }
        assert!(res.exponents.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(res.convergence_history.len(), 190);
    }

    #[test]
    fn sum_rule_small_ring() {
        let model = duffing(3, 0.5);
        let opts = LyapunovOptions {
            t_transient: 50.0,
            t_total: 500.0,
            ..LyapunovOptions::ci(6)
        };
        let y0 = vec![0.3, 0.0, -0.2, 0.1, 0.0, 0.4];
        let res = lyapunov_spectrum(&model, 0.0, &y0, &opts).unwrap();
        let sum: f64 = res.exponents.iter().sum();
        assert!((sum + 3.0 * 0.3).abs() < 0.01 * 0.9, "sum {sum}");
    }

    #[test]
    fn harmonic_section_period() {
        let omega = 1.3;
        let model = oscillator(omega);
        let traj = integrate(&model, &[0.0, -1.0], 0.0, 60.0, &IntegrateOptions::default()).unwrap();
        let crossings = poincare_section(&traj, &SectionSpec::upward(0, 0, 0.0)).unwrap();
        assert!(crossings.len() >= 10);
        for w in crossings.windows(2) {
            assert!((w[1].time - w[0].time - TAU / omega).abs() < 1e-6);
        }
        for c in &crossings {
            assert!(c.state[0].abs() < 1e-9);
            assert!(c.state[1] > 0.0);
        }
    }

    #[test]
    fn constant_trajectory_has_no_crossings() {
        let model = duffing(3, 0.0);
        let traj = integrate(&model, &[0.0; 6], 0.0, 10.0, &IntegrateOptions::default()).unwrap();
        assert!(poincare_section(&traj, &SectionSpec::upward(1, 0, 0.0)).unwrap().is_empty());
    }

    #[test]
    fn rotated_initial_state_gives_rotated_trajectory() {
        let model = duffing(5, 0.6);
        let y0: Vec<f64> = (0..10).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.1).collect();
        let mut rotated = y0.clone();
        rotated.rotate_right(2);
        let a = integrate(&model, &y0, 0.0, 20.0, &IntegrateOptions::default()).unwrap();
        let b = integrate(&model, &rotated, 0.0, 20.0, &IntegrateOptions::default()).unwrap();
        let mut expect = a.last_state().to_vec();
        expect.rotate_right(2);
        assert_eq!(expect, b.last_state());
    }

    #[test]
    fn nearest_neighbour_dimension_of_circle() {
        let points: Vec<Vec<f64>> = (0..400)
            .map(|i| {
                let t = (i as f64 * 0.618_033_988_75 * TAU) % TAU;
                vec![t.cos(), t.sin(), 0.3]
            })
            .collect();
        let d = nearest_neighbour_dimension(&points).unwrap();
        assert!((d - 1.0).abs() < 0.1, "{d}");
    }
}
