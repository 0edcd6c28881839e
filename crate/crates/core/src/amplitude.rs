//! Ginzburg-Landau reduction near the tangency point.
//!
//! Close to criticality, with `eps = 1/N` and `p = eps^2 r`, ring solutions
//! are approximated by
//!
//! ```text
//! y_j(t) = eps e^{i(w0 t + phi0 j)} v0 A + eps^3 e^{3i(w0 t + phi0 j)} v2 A^3 + c.c.
//! ```
//!
//! where `A(T1, x1, T2) = u(kappa1 T1 + x1, T2)` and `u` solves
//! `u_T2 = r kappa2 u + (kappa3/2) u_xixi + zeta |u|^2 u` on the unit circle.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glsolver::{GlField, GlParams};
use crate::linalg::{self, inner, CVector, C64};
use crate::model::RingModel;
use crate::spectrum::{coupling_moments, symbol_matrix, CriticalData};

/// Probe radii; the second is twice the first.
pub const PROBE_RADII: [f64; 2] = [1e-2, 2e-2];
/// Number of equally spaced probe phases.
pub const PROBE_PHASES: usize = 8;
/// Largest allowed deviation from 1 of the two radii's cubic coefficients.
pub const CUBIC_CONSISTENCY_TOL: f64 = 1e-3;
/// Largest allowed even-harmonic content, relative to `rho^2`.
pub const QUADRATIC_TOL: f64 = 1e-8;
/// Smallest singular value of the third-harmonic matrix.
pub const NONRESONANCE_TOL: f64 = 1e-6;

/// Coefficients of the amplitude equation and the vectors of the ansatz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeCoefficients {
    pub p_c: f64,
    pub kappa1: f64,
    pub kappa2: C64,
    pub kappa3: C64,
    pub zeta: C64,
    pub omega0: f64,
    pub phi0: f64,
    #[serde(with = "crate::linalg::serde_cvec")]
    pub v0: CVector,
    #[serde(with = "crate::linalg::serde_cvec")]
    pub v1: CVector,
    #[serde(with = "crate::linalg::serde_cvec")]
    pub v2: CVector,
    #[serde(with = "crate::linalg::serde_cvec")]
    pub h1_v0: CVector,
    #[serde(with = "crate::linalg::serde_cvec")]
    pub h2_v0: CVector,
}

impl AmplitudeCoefficients {
    pub fn gl_params(&self) -> GlParams {
        GlParams {
            kappa2: self.kappa2,
            kappa3: self.kappa3,
            zeta: self.zeta,
        }
    }

    /// `r` corresponding to the absolute parameter value `p` on a ring of
    /// `nodes` oscillators.
    pub fn rescaled_parameter(&self, p: f64, nodes: usize) -> f64 {
        (p - self.p_c) * (nodes * nodes) as f64
    }
}

/// The homogeneous window `y_m = alpha e^{i m phi0} v0 + c.c.`.
fn probe_window(v0: &CVector, phi0: f64, alpha: C64, range: usize, out: &mut [f64]) {
    let n = v0.len();
    let r = range as i64;
    for (slot, m) in (-r..=r).enumerate() {
        let phase = alpha * C64::from_polar(1.0, m as f64 * phi0);
        for c in 0..n {
            out[slot * n + c] = 2.0 * (phase * v0[c]).re;
        }
    }
}

/// Fourier coefficients `c_q`, `q = 0..=3`, of `h` along the probe circle.
fn probe_harmonics(model: &RingModel, v0: &CVector, phi0: f64, rho: f64) -> [CVector; 4] {
    let n = model.dim();
    let mut window = vec![0.0; (2 * model.range() + 1) * n];
    let mut out = vec![0.0; n];
    let mut harmonics: [CVector; 4] = std::array::from_fn(|_| CVector::zeros(n));
    for k in 0..PROBE_PHASES {
        let psi = TAU * k as f64 / PROBE_PHASES as f64;
        probe_window(v0, phi0, C64::from_polar(rho, psi), model.range(), &mut window);
        model.eval_nonlinearity(&window, 0.0, &mut out);
        for (q, h) in harmonics.iter_mut().enumerate() {
            let w = C64::from_polar(1.0 / PROBE_PHASES as f64, -(q as f64) * psi);
            for c in 0..n {
                h[c] += w * out[c];
            }
        }
    }
    harmonics
}

/// Cubic coefficients `h1(v0)` and `h2(v0)` of the nonlinearity:
/// `h(alpha v + c.c.) = alpha |alpha|^2 h1 + alpha^3 h2 + c.c. + O(|alpha|^5)`,
/// extracted numerically from probes on the phased window and
/// Richardson-extrapolated across two radii.
pub fn probe_cubic(model: &RingModel, v0: &CVector, phi0: f64) -> Result<(CVector, CVector)> {
    let [r1, r2] = PROBE_RADII;
    let low = probe_harmonics(model, v0, phi0, r1);
    let high = probe_harmonics(model, v0, phi0, r2);

    for (set, rho) in [(&low, r1), (&high, r2)] {
        let even = set[0].norm().max(set[2].norm()) / (rho * rho);
        if even > QUADRATIC_TOL {
            return Err(Error::NotCubic(format!(
                "even harmonics of size {even:e} at radius {rho}"
            )));
        }
    }

    let scaled = |c: &CVector, rho: f64| c / C64::new(rho.powi(3), 0.0);
    let mut result = Vec::with_capacity(2);
    for q in [1, 3] {
        let a = scaled(&low[q], r1);
        let b = scaled(&high[q], r2);
        let (na, nb) = (a.norm(), b.norm());
        if na.max(nb) > 1e-12 && (nb / na - 1.0).abs() > CUBIC_CONSISTENCY_TOL {
            return Err(Error::NotCubic(format!(
                "harmonic {q} scales inconsistently between radii (ratio {})",
                nb / na
            )));
        }
        // r2 = 2 r1, so the rho^2 error term cancels in (4a - b)/3
        result.push((a * C64::new(4.0, 0.0) - b) / C64::new(3.0, 0.0));
    }
    let h2 = result.pop().expect("two harmonics");
    let h1 = result.pop().expect("two harmonics");
    Ok((h1, h2))
}

/// Assembles the amplitude-equation coefficients at a critical point.
pub fn gl_coefficients(model: &RingModel, critical: &CriticalData) -> Result<AmplitudeCoefficients> {
    let base = model.rebased(critical.p_c);
    let phi0 = critical.phi0;
    let moments = coupling_moments(&base, phi0);
    let v0 = &critical.v0;
    let v1 = &critical.v1;

    let kappa2 = inner(&(&moments.lk * v0), v1);
    let kappa3 = inner(&(&moments.l2 * v0), v1);
    let (h1, h2) = probe_cubic(&base, v0, phi0)?;
    let zeta = inner(&h1, v1);

    let resonance = third_harmonic_matrix(&base, critical.omega0, phi0);
    let sigma_min = linalg::smallest_singular_value(&resonance);
    if !(sigma_min > NONRESONANCE_TOL) {
        return Err(Error::NonresonanceViolated { sigma_min });
    }
    let v2 = linalg::solve(&resonance, &h2).ok_or(Error::NonresonanceViolated { sigma_min })?;

    Ok(AmplitudeCoefficients {
        p_c: critical.p_c,
        kappa1: critical.kappa1,
        kappa2,
        kappa3,
        zeta,
        omega0: critical.omega0,
        phi0,
        v0: v0.clone(),
        v1: v1.clone(),
        v2,
        h1_v0: h1,
        h2_v0: h2,
    })
}

/// `3 i w0 Id - sum_m M_m(0) e^{3 i m phi0}` for a model based at criticality.
pub fn third_harmonic_matrix(base: &RingModel, omega0: f64, phi0: f64) -> linalg::CMatrix {
    linalg::identity(base.dim()) * C64::new(0.0, 3.0 * omega0) - symbol_matrix(base, 0.0, 3.0 * phi0)
}

/// Wavenumber offset `theta` in `[-1/2, 1/2]` such that
/// `phi0 + 2 pi theta / N` is a ring mode `2 pi J / N`.
///
/// The ansatz factor `e^{i phi0 j}` is only `N`-periodic when `phi0 N` is a
/// multiple of `2 pi`; otherwise the amplitude carries the twist
/// `u(xi) = e^{2 pi i theta xi} w(xi)` with `w` periodic.
pub fn bloch_twist(phi0: f64, nodes: usize) -> f64 {
    let x = phi0 * nodes as f64 / TAU;
    x.round() - x
}

/// Oscillator state at time `t` reconstructed from an amplitude field,
/// for the ring with `N = round(1/epsilon)` nodes.
pub fn reconstruct(
    coeffs: &AmplitudeCoefficients,
    field: &GlField,
    epsilon: f64,
    t: f64,
) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    let nodes = (1.0 / epsilon).round() as usize;
    let n = coeffs.v0.len();
    let spectrum = field.spectrum();
    let mut state = vec![0.0; nodes * n];
    for j in 0..nodes {
        let xi = coeffs.kappa1 * epsilon * t + epsilon * j as f64;
        let amp = field.eval_with_spectrum(&spectrum, xi);
        let phase = C64::from_polar(1.0, coeffs.omega0 * t + coeffs.phi0 * j as f64);
        let first = phase * amp * epsilon;
        let third = phase.powi(3) * amp.powi(3) * epsilon.powi(3);
        for c in 0..n {
            state[j * n + c] = 2.0 * (first * coeffs.v0[c] + third * coeffs.v2[c]).re;
        }
    }
    Ok(state)
}
