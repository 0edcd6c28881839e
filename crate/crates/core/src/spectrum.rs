//! Linear stability of the ring's origin.
//!
//! The origin Jacobian is block circulant, so its spectrum splits into the
//! `n x n` symbol matrices `S(phi) = sum_m e^{i m phi} M_m(p)` at the
//! wavenumbers `phi_j = 2 pi j / N`. Letting `phi` range over the whole
//! circle gives the asymptotic continuous spectrum, whose tangency with the
//! imaginary axis marks the destabilization of large rings.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, inner, CMatrix, CVector, C64};
use crate::model::RingModel;

/// Coarse wavenumber grid used to bracket the maxima of `Re lambda(phi)`.
pub const CRITICAL_GRID: usize = 512;
/// Target for `|max Re lambda|` at the critical parameter.
pub const CRITICAL_VALUE_TOL: f64 = 1e-10;
/// Allowed `Re d lambda / d phi` at the tangency.
pub const TANGENCY_TOL: f64 = 1e-6;
/// Minimum separation of the critical eigenvalue from the rest.
pub const SIMPLE_EIGENVALUE_TOL: f64 = 1e-6;
/// Step of the central difference used by [`lemma1_check`].
pub const LEMMA1_FD_STEP: f64 = 1e-5;

const GOLDEN_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;

/// `S(phi) = sum_m e^{i m phi} M_m(p)`.
pub fn symbol_matrix(model: &RingModel, p: f64, phi: f64) -> CMatrix {
    let n = model.dim();
    let mut s = CMatrix::zeros(n, n);
    for m in model.offsets() {
        let w = C64::from_polar(1.0, m as f64 * phi);
        s += linalg::complexify(&model.matrix_at(m, p)) * w;
    }
    s
}

fn symbol_eigenvalues(model: &RingModel, p: f64, phi: f64) -> Result<Vec<C64>> {
    linalg::eigenvalues(&symbol_matrix(model, p, phi)).ok_or(Error::EigenFailure { phi })
}

/// Sampled asymptotic continuous spectrum at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCurve {
    pub phi_samples: Vec<f64>,
    /// `branches[i][b]` is branch `b` at `phi_samples[i]`.
    pub branches: Vec<Vec<C64>>,
    pub parameter_value: f64,
}

impl SpectrumCurve {
    pub fn num_branches(&self) -> usize {
        self.branches.first().map_or(0, Vec::len)
    }

    /// Values of one branch along the grid.
    pub fn branch(&self, b: usize) -> impl Iterator<Item = C64> + '_ {
        self.branches.iter().map(move |row| row[b])
    }

    /// Longest step between consecutive samples of any branch, wrapping
    /// around the circle.
    pub fn max_segment(&self) -> f64 {
        let len = self.branches.len();
        (0..len)
            .flat_map(|i| {
                let next = (i + 1) % len;
                (0..self.num_branches()).map(move |b| (i, next, b))
            })
            .map(|(i, next, b)| (self.branches[next][b] - self.branches[i][b]).norm())
            .fold(0.0, f64::max)
    }

    /// Distance from `z` to the closed polylines through the branch samples.
    pub fn distance_to(&self, z: C64) -> f64 {
        let len = self.branches.len();
        let mut best = f64::INFINITY;
        for b in 0..self.num_branches() {
            for i in 0..len {
                let a = self.branches[i][b];
                let c = self.branches[(i + 1) % len][b];
                best = best.min(segment_distance(z, a, c));
            }
        }
        best
    }

    /// Writes `phi,branch,re_lambda,im_lambda` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "phi,branch,re_lambda,im_lambda")?;
        for (phi, row) in self.phi_samples.iter().zip(&self.branches) {
            for (b, z) in row.iter().enumerate() {
                writeln!(out, "{phi},{b},{},{}", z.re, z.im)?;
            }
        }
        Ok(())
    }
}

fn segment_distance(z: C64, a: C64, c: C64) -> f64 {
    let d = c - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = ((z - a) * d.conj()).re / len2;
    (z - (a + d * t.clamp(0.0, 1.0))).norm()
}

/// Commits the globally closest (prediction, candidate) pairs first.
fn assign(predicted: &[C64], candidates: &[C64]) -> Vec<C64> {
    let mut pairs: Vec<(f64, usize, usize)> = predicted
        .iter()
        .enumerate()
        .flat_map(|(b, p)| {
            candidates
                .iter()
                .enumerate()
                .map(move |(c, z)| ((p - z).norm(), b, c))
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out = vec![C64::new(f64::NAN, f64::NAN); predicted.len()];
    let mut used = vec![false; candidates.len()];
    for (_, b, c) in pairs {
        if out[b].re.is_nan() && !used[c] {
            out[b] = candidates[c];
            used[c] = true;
        }
    }
    out
}

fn min_pair_gap(values: &[C64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    gap
}

/// Samples the continuous spectrum on a uniform grid of `num_phi` points
/// and threads the eigenvalues into continuous branches.
pub fn continuous_spectrum(model: &RingModel, p: f64, num_phi: usize) -> Result<SpectrumCurve> {
    if num_phi < 16 {
        return Err(Error::InvalidArgument(format!(
            "continuous spectrum needs at least 16 samples, got {num_phi}"
        )));
    }
    let phi_samples: Vec<f64> = (0..num_phi).map(|i| TAU * i as f64 / num_phi as f64).collect();
    let raw: Vec<Vec<C64>> = phi_samples
        .par_iter()
        .map(|&phi| symbol_eigenvalues(model, p, phi))
        .collect::<Result<_>>()?;

    let mut first = raw[0].clone();
    first.sort_by(|a, b| b.im.total_cmp(&a.im).then(b.re.total_cmp(&a.re)));
    let mut branches = vec![first];
    let dphi = TAU / num_phi as f64;
    for i in 1..num_phi {
        let prev = &branches[i - 1];
        let predicted: Vec<C64> = if i >= 2 {
            prev.iter()
                .zip(&branches[i - 2])
                .map(|(a, b)| a * 2.0 - b)
                .collect()
        } else {
            prev.clone()
        };
        let step = prev
            .iter()
            .zip(&predicted)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let next = if min_pair_gap(&raw[i]) < 4.0 * step.max(1e-12) {
            // near-degenerate: thread through a 4x finer grid
            let mut cur = prev.clone();
            let mut last = if i >= 2 { branches[i - 2].clone() } else { prev.clone() };
            for sub in 1..=4 {
                let phi = phi_samples[i - 1] + dphi * sub as f64 / 4.0;
                let vals = if sub == 4 {
                    raw[i].clone()
                } else {
                    symbol_eigenvalues(model, p, phi)?
                };
                let pred: Vec<C64> = cur
                    .iter()
                    .zip(&last)
                    .map(|(a, b)| a + (a - b) / if sub == 1 && i >= 2 { 4.0 } else { 1.0 })
                    .collect();
                let assigned = assign(&pred, &vals);
                last = std::mem::replace(&mut cur, assigned);
            }
            cur
        } else {
            assign(&predicted, &raw[i])
        };
        branches.push(next);
    }
    Ok(SpectrumCurve {
        phi_samples,
        branches,
        parameter_value: p,
    })
}

/// Eigenvalues of the finite ring's origin linearization, pooled over the
/// modes `phi_j = 2 pi j / N`, `j = 1..=N`.
pub fn discrete_spectrum(model: &RingModel, p: f64) -> Result<Vec<C64>> {
    let big_n = model.nodes();
    let per_mode: Vec<Vec<C64>> = (1..=big_n)
        .into_par_iter()
        .map(|j| symbol_eigenvalues(model, p, TAU * j as f64 / big_n as f64))
        .collect::<Result<_>>()?;
    Ok(per_mode.into_iter().flatten().collect())
}

/// Eigenvalues of the dense `Nn x Nn` origin Jacobian.
pub fn dense_origin_spectrum(model: &RingModel, p: f64) -> Result<Vec<C64>> {
    let jac = model.jacobian(&vec![0.0; model.state_len()], p)?;
    linalg::real_eigenvalues(&jac.to_dense()).ok_or(Error::EigenFailure { phi: f64::NAN })
}

/// Largest real part among the eigenvalues of `S(phi)`.
pub fn growth_rate(model: &RingModel, p: f64, phi: f64) -> Result<f64> {
    Ok(symbol_eigenvalues(model, p, phi)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

fn golden_max(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > GOLDEN_TOL {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok((x, f(x)?))
}

/// Refined local maxima `(phi, max Re lambda)` of the growth profile, with
/// `phi` reduced to `(-pi, pi]`.
fn profile_maxima(model: &RingModel, p: f64) -> Result<Vec<(f64, f64)>> {
    let grid = CRITICAL_GRID;
    let h = TAU / grid as f64;
    let values: Vec<f64> = (0..grid)
        .into_par_iter()
        .map(|i| growth_rate(model, p, i as f64 * h))
        .collect::<Result<_>>()?;
    let mut maxima = Vec::new();
    for i in 0..grid {
        let left = values[(i + grid - 1) % grid];
        let right = values[(i + 1) % grid];
        if values[i] >= left && values[i] > right {
            let center = i as f64 * h;
            let (phi, g) = golden_max(|x| growth_rate(model, p, x), center - h, center + h)?;
            maxima.push((reduce_angle(phi), g));
        }
    }
    if maxima.is_empty() {
        // flat profile (no phi dependence)
        maxima.push((0.0, values[0]));
    }
    Ok(maxima)
}

fn reduce_angle(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// `max_phi max Re lambda(phi)` and the maximizing wavenumber.
pub fn max_growth(model: &RingModel, p: f64) -> Result<(f64, f64)> {
    let maxima = profile_maxima(model, p)?;
    Ok(maxima
        .into_iter()
        .map(|(phi, g)| (g, phi))
        .fold((f64::NEG_INFINITY, 0.0), |best, cur| if cur.0 > best.0 { cur } else { best }))
}

/// Data of the critical eigenvalue at the tangency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalData {
    pub p_c: f64,
    pub phi0: f64,
    pub omega0: f64,
    pub kappa1: f64,
    #[serde(with = "crate::linalg::serde_cvec")]
    pub v0: CVector,
    #[serde(with = "crate::linalg::serde_cvec")]
    pub v1: CVector,
}

/// Coupling moments `L0, L1, L2` (weights `1, m, m^2`) and `LK`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMoments {
    pub l0: CMatrix,
    pub l1: CMatrix,
    pub l2: CMatrix,
    pub lk: CMatrix,
}

/// Moments at the model's base point `p = 0`.
pub fn coupling_moments(model: &RingModel, phi0: f64) -> CouplingMoments {
    let n = model.dim();
    let mut out = CouplingMoments {
        l0: CMatrix::zeros(n, n),
        l1: CMatrix::zeros(n, n),
        l2: CMatrix::zeros(n, n),
        lk: CMatrix::zeros(n, n),
    };
    for m in model.offsets() {
        let w = C64::from_polar(1.0, m as f64 * phi0);
        let base = linalg::complexify(model.base_matrix(m)) * w;
        let mf = m as f64;
        out.l1 += &base * C64::new(mf, 0.0);
        out.l2 += &base * C64::new(mf * mf, 0.0);
        out.l0 += base;
        out.lk += linalg::complexify(model.deriv_matrix(m)) * w;
    }
    out
}

fn bracket_critical(model: &RingModel, p_range: (f64, f64)) -> Result<f64> {
    let (mut lo, mut hi) = p_range;
    let g_lo = max_growth(model, lo)?.0;
    let g_hi = max_growth(model, hi)?.0;
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(Error::NoBracket { lo, hi, g_lo, g_hi });
    }
    let mut best = (f64::INFINITY, lo);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = max_growth(model, mid)?.0;
        if g.abs() < best.0 {
            best = (g.abs(), mid);
        }
        // keep going past the tolerance while the interval still resolves,
        // which tightens the eigenvector residuals downstream
        if g.abs() < 1e-3 * CRITICAL_VALUE_TOL {
            break;
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 >= CRITICAL_VALUE_TOL {
        return Err(Error::NoBracket {
            lo,
            hi,
            g_lo: best.0,
            g_hi: best.0,
        });
    }
    Ok(best.1)
}

/// All tangency points at the critical parameter, one per conjugate pair
/// (the representative with `phi0 >= 0`), sorted by `phi0`.
pub fn find_critical_points(model: &RingModel, p_range: (f64, f64)) -> Result<Vec<CriticalData>> {
    let p_c = bracket_critical(model, p_range)?;
    let maxima = profile_maxima(model, p_c)?;
    let mut phis: Vec<f64> = Vec::new();
    for (phi, g) in maxima {
        if g.abs() > 1e2 * CRITICAL_VALUE_TOL {
            continue;
        }
        let rep = phi.abs();
        if !phis.iter().any(|q| (q - rep).abs() < 1e-6) {
            phis.push(rep);
        }
    }
    phis.sort_by(f64::total_cmp);
    phis.into_iter().map(|phi0| critical_at(model, p_c, phi0)).collect()
}

/// The first tangency point of [`find_critical_points`].
pub fn find_critical(model: &RingModel, p_range: (f64, f64)) -> Result<CriticalData> {
    find_critical_points(model, p_range)?
        .into_iter()
        .next()
        .ok_or(Error::NoBracket {
            lo: p_range.0,
            hi: p_range.1,
            g_lo: f64::NAN,
            g_hi: f64::NAN,
        })
}

/// Eigen-data at a known critical point `(p_c, phi0)`.
pub fn critical_at(model: &RingModel, p_c: f64, phi0: f64) -> Result<CriticalData> {
    let base = model.rebased(p_c);
    let moments = coupling_moments(&base, phi0);
    let n = model.dim();
    let eigs = linalg::eigenvalues(&moments.l0).ok_or(Error::EigenFailure { phi: phi0 })?;
    let (idx, lambda) = eigs
        .iter()
        .copied()
        .enumerate()
        .fold((0, C64::new(f64::NEG_INFINITY, 0.0)), |best, (i, z)| {
            if z.re > best.1.re {
                (i, z)
            } else {
                best
            }
        });
    if eigs
        .iter()
        .enumerate()
        .any(|(i, z)| i != idx && (z - lambda).norm() < SIMPLE_EIGENVALUE_TOL)
    {
        return Err(Error::RegularPointViolated { phi0 });
    }
    let omega0 = lambda.im;
    let i_omega = C64::new(0.0, omega0);
    let id = linalg::identity(n);
    let (mut v0, _) = linalg::null_vector(&(&id * i_omega - &moments.l0));
    let (v1, _) = linalg::null_vector(&(&id * (-i_omega) - moments.l0.adjoint()));

    // fix the gauge: largest component of v0 real and positive
    let big = v0
        .iter()
        .copied()
        .fold(C64::new(0.0, 0.0), |best, z| if z.norm() > best.norm() { z } else { best });
    v0 *= big.conj() / big.norm();
    let overlap = inner(&v0, &v1);
    let v1 = v1 / overlap.conj();

    let kappa1 = inner(&(&moments.l1 * &v0), &v1);
    if kappa1.im.abs() > TANGENCY_TOL {
        return Err(Error::ComplexKappa1 { imag: kappa1.im });
    }
    Ok(CriticalData {
        p_c,
        phi0,
        omega0,
        kappa1: kappa1.re,
        v0,
        v1,
    })
}

/// `|<L1 v0, v1> - (1/i) d lambda/d phi (phi0)|` with the derivative taken by
/// central differences.
pub fn lemma1_check(model: &RingModel, critical: &CriticalData) -> Result<f64> {
    let base = model.rebased(critical.p_c);
    let moments = coupling_moments(&base, critical.phi0);
    let projected = inner(&(&moments.l1 * &critical.v0), &critical.v1);
    let target = C64::new(0.0, critical.omega0);
    let nearest = |phi: f64| -> Result<C64> {
        Ok(symbol_eigenvalues(&base, 0.0, phi)?
            .into_iter()
            .fold(C64::new(f64::INFINITY, 0.0), |best, z| {
                if (z - target).norm() < (best - target).norm() {
                    z
                } else {
                    best
                }
            }))
    };
    let h = LEMMA1_FD_STEP;
    let dlambda = (nearest(critical.phi0 + h)? - nearest(critical.phi0 - h)?) / (2.0 * h);
    Ok((projected - dlambda * C64::new(0.0, -1.0)).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_duffing_ring, DuffingRingParams, NoNonlinearity};
    use nalgebra::DMatrix;
    use std::sync::Arc;

    fn scalar_model(nodes: usize) -> RingModel {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        RingModel::new(
            1,
            nodes,
            1,
            vec![m(0.0), m(-1.0), m(1.0)],
            vec![m(0.0), m(1.0), m(0.0)],
            Arc::new(NoNonlinearity),
        )
        .unwrap()
    }

    fn duffing(nodes: usize) -> RingModel {
        make_duffing_ring(DuffingRingParams::default(), nodes).unwrap()
    }

    #[test]
    fn symbol_of_duffing_ring() {
        let model = duffing(6);
        let (a, d, k, phi) = (0.1, 0.3, 0.21, 0.7);
        let s = symbol_matrix(&model, k, phi);
        let expected = [
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(-a - k, 0.0) + C64::from_polar(k, phi),
            C64::new(-d, 0.0),
        ];
        for (got, want) in s.transpose().iter().zip(expected) {
            assert!((got - want).norm() < 1e-15);
        }
    }

    #[test]
    fn symbol_at_zero_is_plain_sum() {
        let model = duffing(6);
        let s = symbol_matrix(&model, 0.3, 0.0);
        let sum: DMatrix<f64> = model.offsets().map(|m| model.matrix_at(m, 0.3)).fold(
            DMatrix::zeros(2, 2),
            |acc, m| acc + m,
        );
        assert!((s - linalg::complexify(&sum)).norm() < 1e-15);
    }

    #[test]
    fn self_coupling_only_is_phi_independent() {
        let m0 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -0.5]);
        let z = DMatrix::zeros(2, 2);
        let model = RingModel::new(
            2,
            5,
            1,
            vec![z.clone(), m0, z.clone()],
            vec![z.clone(), z.clone(), z],
            Arc::new(NoNonlinearity),
        )
        .unwrap();
        assert_eq!(symbol_matrix(&model, 0.0, 0.3), symbol_matrix(&model, 0.0, 2.1));
        let moments = coupling_moments(&model, 1.1);
        assert_eq!(moments.l1.norm(), 0.0);
        assert_eq!(moments.l2.norm(), 0.0);
    }

    #[test]
    fn decoupled_duffing_curve_is_two_points() {
        let curve = continuous_spectrum(&duffing(4), 0.0, 64).unwrap();
        let root = C64::new(-0.15, (0.1f64 - 0.0225).sqrt());
        for row in &curve.branches {
            assert!((row[0] - root).norm() < 1e-12);
            assert!((row[1] - root.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_curve_is_unit_circle() {
        let curve = continuous_spectrum(&scalar_model(4), 0.0, 64).unwrap();
        for (phi, row) in curve.phi_samples.iter().zip(&curve.branches) {
            let expected = C64::new(-1.0, 0.0) + C64::from_polar(1.0, *phi);
            assert!((row[0] - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(continuous_spectrum(&duffing(4), 0.1, 8).is_err());
    }

    #[test]
    fn single_node_ring_is_sum_of_matrices() {
        let model = scalar_model(1);
        let eigs = discrete_spectrum(&model, 0.2).unwrap();
        assert_eq!(eigs.len(), 1);
        assert!((eigs[0] - C64::new(0.2, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn scalar_critical_point() {
        let crit = find_critical(&scalar_model(8), (-0.5, 0.4)).unwrap();
        assert!(crit.p_c.abs() < 1e-10);
        assert!(crit.phi0.abs() < 1e-6);
        assert!(crit.omega0.abs() < 1e-6);
        assert!((crit.kappa1 - 1.0).abs() < 1e-6);
        assert!(lemma1_check(&scalar_model(8), &crit).unwrap() < 1e-8);
    }

    #[test]
    fn missing_bracket_is_rejected() {
        let err = find_critical(&scalar_model(8), (0.1, 0.4)).unwrap_err();
        assert!(matches!(err, Error::NoBracket { .. }));
    }

    #[test]
    fn self_coupling_only_has_zero_lemma1_residual() {
        let z = DMatrix::zeros(2, 2);
        let m0 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let model = RingModel::new(
            2,
            5,
            1,
            vec![z.clone(), m0, z.clone()],
            vec![z.clone(), z.clone(), z],
            Arc::new(NoNonlinearity),
        )
        .unwrap();
        let crit = critical_at(&model, 0.0, 0.4).unwrap();
        assert_eq!(lemma1_check(&model, &crit).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_critical_eigenvalue_is_rejected() {
        // two identical decoupled scalar rings give a double eigenvalue
        let z = DMatrix::zeros(2, 2);
        let model = RingModel::new(
            2,
            6,
            1,
            vec![z.clone(), -DMatrix::identity(2, 2), DMatrix::identity(2, 2)],
            vec![z.clone(), DMatrix::identity(2, 2), z],
            Arc::new(NoNonlinearity),
        )
        .unwrap();
        let err = find_critical(&model, (-0.5, 0.4)).unwrap_err();
        assert!(matches!(err, Error::RegularPointViolated { .. }));
    }

    #[test]
    fn duffing_moments() {
        let model = duffing(10).rebased(0.14);
        let phi0 = 1.24;
        let moments = coupling_moments(&model, phi0);
        let w = C64::from_polar(0.14, phi0);
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(0.0, 0.0), w, C64::new(0.0, 0.0)],
        );
        assert!((moments.l1.clone() - &expected).norm() < 1e-15);
        assert!((moments.l2 - expected).norm() < 1e-15);
    }

    #[test]
    fn symmetric_coupling_moment_identity() {
        let s = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.4, -0.2]);
        let z = DMatrix::zeros(2, 2);
        let m0 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.3]);
        let model = RingModel::new(
            2,
            8,
            1,
            vec![s.clone(), m0, s.clone()],
            vec![z.clone(), z.clone(), z],
            Arc::new(NoNonlinearity),
        )
        .unwrap();
        let phi0 = 0.83;
        let l1 = coupling_moments(&model, phi0).l1;
        let expected = linalg::complexify(&s)
            * (C64::from_polar(1.0, phi0) - C64::from_polar(1.0, -phi0));
        assert!((l1 - expected).norm() < 1e-15);
    }
}
