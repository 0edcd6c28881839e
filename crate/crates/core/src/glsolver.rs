//! Fourier pseudo-spectral solver for the complex Ginzburg-Landau equation
//!
//! ```text
//! u_T = r kappa2 u + (kappa3/2) u_xixi + zeta |u|^2 u,   u(xi + 1) = u(xi)
//! ```
//!
//! The linear part is diagonal in Fourier space and integrated exactly;
//! the cubic term is evaluated on the grid with 2/3-rule dealiasing, and
//! the two are combined by fourth-order exponential time differencing
//! (Cox-Matthews ETDRK4, coefficients by contour integrals).
//!
//! A field may carry a twist `theta`: the stored values are the periodic
//! part `w` of `u(xi) = e^{2 pi i theta xi} w(xi)`, and mode `q` of `w`
//! has wavenumber `2 pi (q + theta)`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Default number of grid points.
pub const DEFAULT_GRID: usize = 256;
/// Default step in `T2` units.
pub const DEFAULT_DT: f64 = 1e-3;
/// `|u|` above which a run is declared blown up.
pub const BLOWUP_LIMIT: f64 = 1e6;
/// Fraction of the energy allowed in the top third of the modes.
pub const TAIL_ENERGY_LIMIT: f64 = 1e-6;

const CONTOUR_POINTS: usize = 64;

/// The three coefficients of the equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlParams {
    pub kappa2: C64,
    pub kappa3: C64,
    pub zeta: C64,
}

impl GlParams {
    pub fn real(kappa2: f64, kappa3: f64, zeta: f64) -> Self {
        Self {
            kappa2: C64::new(kappa2, 0.0),
            kappa3: C64::new(kappa3, 0.0),
            zeta: C64::new(zeta, 0.0),
        }
    }

    /// Linear rate at wavenumber `k`: `r kappa2 - (kappa3/2) k^2`.
    pub fn rate(&self, r: f64, k: f64) -> C64 {
        self.kappa2 * r - self.kappa3 * (0.5 * k * k)
    }
}

/// `(q, r kappa2 - (kappa3/2)(2 pi q)^2)` for `q` in `-q_max..=q_max`.
/// The homogeneous state is linearly stable iff every real part is negative.
pub fn gl_linear_growth_rates(r: f64, params: &GlParams, q_max: i64) -> Vec<(i64, C64)> {
    (-q_max..=q_max)
        .map(|q| (q, params.rate(r, TAU * q as f64)))
        .collect()
}

/// Smallest `r` at which some mode `q + theta` of the twisted problem has
/// non-negative growth, for real-positive `Re kappa2`.
pub fn gl_threshold(params: &GlParams, theta: f64, q_max: i64) -> f64 {
    (-q_max..=q_max)
        .map(|q| {
            let k = TAU * (q as f64 + theta);
            0.5 * params.kappa3.re * k * k / params.kappa2.re
        })
        .fold(f64::INFINITY, f64::min)
}

/// Amplitude field on `M` equally spaced points `xi_i = i/M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlField {
    pub values: Vec<C64>,
    pub time: f64,
    #[serde(default)]
    pub twist: f64,
}

impl GlField {
    pub fn new(values: Vec<C64>, time: f64) -> Result<Self> {
        let m = values.len();
        if m < 4 || !m.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "grid size must be a power of two >= 4, got {m}"
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("field contains non-finite values".into()));
        }
        Ok(Self {
            values,
            time,
            twist: 0.0,
        })
    }

    pub fn zeros(m: usize) -> Result<Self> {
        Self::new(vec![C64::new(0.0, 0.0); m], 0.0)
    }

    pub fn constant(m: usize, c: C64) -> Result<Self> {
        Self::new(vec![c; m], 0.0)
    }

    pub fn from_fn(m: usize, f: impl Fn(f64) -> C64) -> Result<Self> {
        Self::new((0..m).map(|i| f(i as f64 / m as f64)).collect(), 0.0)
    }

    /// Gaussian noise of the given amplitude, reproducible from `seed`.
    pub fn random(m: usize, amplitude: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = amplitude / 2f64.sqrt();
        Self::new(
            (0..m)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re, im) * scale
                })
                .collect(),
            0.0,
        )
    }

    pub fn with_twist(mut self, twist: f64) -> Self {
        self.twist = twist;
        self
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn xi(&self, i: usize) -> f64 {
        i as f64 / self.values.len() as f64
    }

    /// `int |u|^2 dxi`.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Normalized Fourier coefficients of the periodic part, in FFT order.
    pub fn spectrum(&self) -> Vec<C64> {
        let m = self.values.len();
        let mut buf = self.values.clone();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let scale = 1.0 / m as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
        buf
    }

    /// Trigonometric interpolant at an arbitrary `xi`, twist included.
    pub fn eval(&self, xi: f64) -> C64 {
        self.eval_with_spectrum(&self.spectrum(), xi)
    }

    /// Like [`GlField::eval`] with a precomputed [`GlField::spectrum`].
    pub fn eval_with_spectrum(&self, spectrum: &[C64], xi: f64) -> C64 {
        let m = spectrum.len();
        let x = xi.rem_euclid(1.0);
        let mut sum = C64::new(0.0, 0.0);
        for (i, c) in spectrum.iter().enumerate() {
            let q = mode_number(i, m) as f64;
            if i == m / 2 {
                // split the Nyquist mode symmetrically
                sum += c * (TAU * q * x).cos();
            } else {
                sum += c * C64::from_polar(1.0, TAU * q * x);
            }
        }
        sum * C64::from_polar(1.0, TAU * self.twist * xi)
    }

    /// Energy fraction in the top third of the modes.
    pub fn tail_fraction(&self) -> f64 {
        let spec = self.spectrum();
        let m = spec.len() as i64;
        let total: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let tail: f64 = spec
            .iter()
            .enumerate()
            .filter(|(i, _)| mode_number(*i, m as usize).abs() > m / 3)
            .map(|(_, z)| z.norm_sqr())
            .sum();
        tail / total
    }

    /// `true` while the tail energy stays below [`TAIL_ENERGY_LIMIT`].
    pub fn resolved(&self) -> bool {
        self.tail_fraction() < TAIL_ENERGY_LIMIT
    }

    /// The field rotated by `k` grid points: `values[i] -> values[i - k]`.
    pub fn shifted(&self, k: usize) -> Self {
        let m = self.values.len();
        let mut values = self.values.clone();
        values.rotate_right(k % m);
        Self {
            values,
            ..self.clone()
        }
    }

    /// Writes `T2,xi,re_u,im_u` rows (without header).
    pub fn write_csv_rows<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, z) in self.values.iter().enumerate() {
            writeln!(out, "{},{},{},{}", self.time, self.xi(i), z.re, z.im)?;
        }
        Ok(())
    }
}

#[inline]
fn mode_number(i: usize, m: usize) -> i64 {
    if i < m / 2 {
        i as i64
    } else {
        i as i64 - m as i64
    }
}

/// Solver switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlOptions {
    pub dealias: bool,
    /// Truncate to `|q| <= cutoff`; required when `Re kappa3 < 0`.
    pub spectral_cutoff: Option<usize>,
}

impl Default for GlOptions {
    fn default() -> Self {
        Self {
            dealias: true,
            spectral_cutoff: None,
        }
    }
}

/// ETDRK4 stepper with cached plans and coefficients for one `(M, r, dt)`.
pub struct GlStepper {
    m: usize,
    dt: f64,
    twist: f64,
    zeta: C64,
    e: Vec<C64>,
    e2: Vec<C64>,
    q: Vec<C64>,
    f1: Vec<C64>,
    f2: Vec<C64>,
    f3: Vec<C64>,
    dealias: Vec<f64>,
    keep: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
    work: [Vec<C64>; 8],
}

impl std::fmt::Debug for GlStepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GlStepper")
            .field("m", &self.m)
            .field("dt", &self.dt)
            .field("twist", &self.twist)
            .finish()
    }
}

impl GlStepper {
    pub fn new(
        m: usize,
        r: f64,
        params: &GlParams,
        dt: f64,
        twist: f64,
        options: GlOptions,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if m < 4 || !m.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "grid size must be a power of two >= 4, got {m}"
            )));
        }
        if params.kappa3.re < 0.0 && options.spectral_cutoff.is_none() {
            return Err(Error::IllPosed {
                re_kappa3: params.kappa3.re,
            });
        }
        let mut e = Vec::with_capacity(m);
        let mut e2 = Vec::with_capacity(m);
        let mut q = Vec::with_capacity(m);
        let mut f1 = Vec::with_capacity(m);
        let mut f2 = Vec::with_capacity(m);
        let mut f3 = Vec::with_capacity(m);
        let mut dealias = Vec::with_capacity(m);
        let mut keep = Vec::with_capacity(m);
        for i in 0..m {
            let mode = mode_number(i, m);
            let k = TAU * (mode as f64 + twist);
            let z = params.rate(r, k) * dt;
            e.push(z.exp());
            e2.push((z * 0.5).exp());
            let c = etd_coefficients(z);
            q.push(c[0] * dt);
            f1.push(c[1] * dt);
            f2.push(c[2] * dt);
            f3.push(c[3] * dt);
            let in_band = !options.dealias || 3 * mode.unsigned_abs() as usize <= m;
            dealias.push(if in_band { 1.0 } else { 0.0 });
            let kept = options
                .spectral_cutoff
                .map_or(true, |cut| mode.unsigned_abs() as usize <= cut);
            keep.push(if kept { 1.0 } else { 0.0 });
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let ifft = planner.plan_fft_inverse(m);
        let scratch_len = fft
            .get_inplace_scratch_len()
            .max(ifft.get_inplace_scratch_len());
        Ok(Self {
            m,
            dt,
            twist,
            zeta: params.zeta,
            e,
            e2,
            q,
            f1,
            f2,
            f3,
            dealias,
            keep,
            fft,
            ifft,
            scratch: vec![C64::new(0.0, 0.0); scratch_len],
            work: std::array::from_fn(|_| vec![C64::new(0.0, 0.0); m]),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Fourier transform of the dealiased `zeta |u|^2 u` for the spectral
    /// state `hat`, written to `out`.
    fn nonlinear(&mut self, hat_index: usize, out_index: usize) {
        let m = self.m;
        let inv = 1.0 / m as f64;
        let (hat, out) = pair_mut(&mut self.work, hat_index, out_index);
        out.copy_from_slice(hat);
        self.ifft.process_with_scratch(out, &mut self.scratch);
        for z in out.iter_mut() {
            let u = *z * inv;
            *z = self.zeta * u * u.norm_sqr();
        }
        self.fft.process_with_scratch(out, &mut self.scratch);
        for (z, mask) in out.iter_mut().zip(&self.dealias) {
            *z *= *mask;
        }
    }

    /// Advances `field` by one step.
    pub fn step(&mut self, field: &mut GlField) -> Result<()> {
        if field.values.len() != self.m {
            return Err(Error::DimensionMismatch {
                context: "gl_step",
                expected: self.m,
                got: field.values.len(),
            });
        }
        const V: usize = 0;
        const NV: usize = 1;
        const A: usize = 2;
        const NA: usize = 3;
        const B: usize = 4;
        const NB: usize = 5;
        const C: usize = 6;
        const NC: usize = 7;

        self.work[V].copy_from_slice(&field.values);
        self.fft.process_with_scratch(&mut self.work[V], &mut self.scratch);
        for (z, k) in self.work[V].iter_mut().zip(&self.keep) {
            *z *= *k;
        }

        self.nonlinear(V, NV);
        for i in 0..self.m {
            self.work[A][i] = self.e2[i] * self.work[V][i] + self.q[i] * self.work[NV][i];
        }
        self.nonlinear(A, NA);
        for i in 0..self.m {
            self.work[B][i] = self.e2[i] * self.work[V][i] + self.q[i] * self.work[NA][i];
        }
        self.nonlinear(B, NB);
        for i in 0..self.m {
            self.work[C][i] = self.e2[i] * self.work[A][i]
                + self.q[i] * (self.work[NB][i] * 2.0 - self.work[NV][i]);
        }
        self.nonlinear(C, NC);
        for i in 0..self.m {
            let w = &self.work;
            let next = self.e[i] * w[V][i]
                + self.f1[i] * w[NV][i]
                + self.f2[i] * (w[NA][i] + w[NB][i]) * 2.0
                + self.f3[i] * w[NC][i];
            self.work[V][i] = next * self.keep[i];
        }
        self.ifft.process_with_scratch(&mut self.work[V], &mut self.scratch);
        let inv = 1.0 / self.m as f64;
        let time = field.time + self.dt;
        for (dst, src) in field.values.iter_mut().zip(&self.work[V]) {
            *dst = src * inv;
        }
        field.time = time;
        if field
            .values
            .iter()
            .any(|z| !(z.norm() <= BLOWUP_LIMIT))
        {
            return Err(Error::BlowUp { time });
        }
        Ok(())
    }
}

fn pair_mut<T>(slots: &mut [T], a: usize, b: usize) -> (&T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = slots.split_at_mut(b);
        (&lo[a], &mut hi[0])
    } else {
        let (lo, hi) = slots.split_at_mut(a);
        (&hi[0], &mut lo[b])
    }
}

/// `[Q, f1, f2, f3] / dt` for `z = L dt`, averaged over a circle around `z`
/// to avoid cancellation for small `|z|`.
fn etd_coefficients(z: C64) -> [C64; 4] {
    let mut acc = [C64::new(0.0, 0.0); 4];
    for j in 0..CONTOUR_POINTS {
        let theta = PI * (j as f64 + 0.5) * 2.0 / CONTOUR_POINTS as f64;
        let w = z + C64::from_polar(1.0, theta);
        let ew = w.exp();
        let w2 = w * w;
        let w3 = w2 * w;
        acc[0] += ((w * 0.5).exp() - 1.0) / w;
        acc[1] += (-4.0 - w + ew * (4.0 - w * 3.0 + w2)) / w3;
        acc[2] += (2.0 + w + ew * (w - 2.0)) / w3;
        acc[3] += (-4.0 - w * 3.0 - w2 + ew * (4.0 - w)) / w3;
    }
    let n = CONTOUR_POINTS as f64;
    acc.map(|a| a / n)
}

/// One step of size `dt` (builds a fresh stepper; use [`GlStepper`] in loops).
pub fn gl_step(field: &GlField, r: f64, params: &GlParams, dt: f64) -> Result<GlField> {
    let mut stepper = GlStepper::new(
        field.grid_size(),
        r,
        params,
        dt,
        field.twist,
        GlOptions::default(),
    )?;
    let mut out = field.clone();
    stepper.step(&mut out)?;
    Ok(out)
}

/// Integrates to `T2 = field.time + t_end`, calling `observer` on the
/// initial field and after every `stride` steps. The number of observer
/// calls is `floor(steps / stride) + 1` with `steps = round(t_end / dt)`.
pub fn gl_integrate(
    field: &GlField,
    r: f64,
    params: &GlParams,
    t_end: f64,
    dt: f64,
    stride: usize,
    options: GlOptions,
    mut observer: impl FnMut(&GlField),
) -> Result<GlField> {
    let stride = stride.max(1);
    let steps = (t_end / dt).round() as usize;
    let mut stepper = GlStepper::new(field.grid_size(), r, params, dt, field.twist, options)?;
    let mut current = field.clone();
    observer(&current);
    for s in 1..=steps {
        stepper.step(&mut current)?;
        if s % stride == 0 {
            observer(&current);
        }
    }
    Ok(current)
}

/// One observer record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlSample {
    pub time: f64,
    pub norm_sq: f64,
    pub max_abs: f64,
    pub resolved: bool,
}

/// Observer that logs norms and, optionally, full snapshots.
#[derive(Debug, Default, Clone)]
pub struct GlRecorder {
    pub samples: Vec<GlSample>,
    pub snapshots: Vec<GlField>,
    pub keep_snapshots: bool,
}

impl GlRecorder {
    pub fn with_snapshots() -> Self {
        Self {
            keep_snapshots: true,
            ..Self::default()
        }
    }

    pub fn record(&mut self, field: &GlField) {
        self.samples.push(GlSample {
            time: field.time,
            norm_sq: field.norm_sq(),
            max_abs: field.max_abs(),
            resolved: field.resolved(),
        });
        if self.keep_snapshots {
            self.snapshots.push(field.clone());
        }
    }
}

/// Right-hand side on the grid, evaluated spectrally; used by diagnostics.
pub fn gl_rhs(field: &GlField, r: f64, params: &GlParams) -> Vec<C64> {
    let m = field.grid_size();
    let mut planner = FftPlanner::new();
    let mut hat = field.values.clone();
    planner.plan_fft_forward(m).process(&mut hat);
    for (i, z) in hat.iter_mut().enumerate() {
        let k = TAU * (mode_number(i, m) as f64 + field.twist);
        *z *= params.rate(r, k) / m as f64;
    }
    planner.plan_fft_inverse(m).process(&mut hat);
    hat.iter()
        .zip(&field.values)
        .map(|(lin, u)| lin + params.zeta * u * u.norm_sqr())
        .collect()
}
