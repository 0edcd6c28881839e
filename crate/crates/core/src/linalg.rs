//! Small dense complex linear algebra on top of nalgebra.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

const SCHUR_MAX_ITER: usize = 10_000;

/// `<u, w> = sum_i conj(w_i) u_i`: linear in the first slot.
pub fn inner(u: &CVector, w: &CVector) -> C64 {
    u.iter().zip(w.iter()).map(|(a, b)| b.conj() * a).sum()
}

/// Eigenvalues of a complex square matrix, `None` if the QR iteration stalls.
pub fn eigenvalues(m: &CMatrix) -> Option<Vec<C64>> {
    if m.nrows() == 1 {
        return Some(vec![m[(0, 0)]]);
    }
    if m.nrows() == 2 {
        let (a, b) = eigenvalues_2x2(m);
        return Some(vec![a, b]);
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)?;
    schur.eigenvalues().map(|v| v.iter().copied().collect())
}

/// Closed-form roots of `lambda^2 - tr lambda + det = 0`.
pub fn eigenvalues_2x2(m: &CMatrix) -> (C64, C64) {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (tr * tr - det * 4.0).sqrt();
    // avoid cancellation in the smaller root
    let q = if (tr.conj() * disc).re >= 0.0 {
        (tr + disc) * 0.5
    } else {
        (tr - disc) * 0.5
    };
    if q.norm() == 0.0 {
        return (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    }
    (q, det / q)
}

/// Eigenvalues of a real square matrix.
pub fn real_eigenvalues(m: &DMatrix<f64>) -> Option<Vec<C64>> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

/// Unit right singular vector for the smallest singular value, and that value.
pub fn null_vector(m: &CMatrix) -> (CVector, f64) {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let (idx, sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, s)| if *s < best.1 { (i, *s) } else { best });
    let v: CVector = v_t.row(idx).transpose().map(|z| z.conj());
    let norm = v.norm();
    (v / C64::new(norm, 0.0), sigma)
}

pub fn smallest_singular_value(m: &CMatrix) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Solves `m x = b` by LU with partial pivoting.
pub fn solve(m: &CMatrix, b: &CVector) -> Option<CVector> {
    m.clone().lu().solve(b)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Complex copy of a real matrix.
pub fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// Determinant via LU.
pub fn determinant(m: &CMatrix) -> C64 {
    m.clone().lu().determinant()
}

/// Largest distance in a pairing of two equally long eigenvalue lists,
/// built greedily by always committing the globally closest pair.
pub fn max_pairing_distance(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len(), "eigenvalue lists differ in length");
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    let mut matched = 0;
    for (d, i, j) in pairs {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        worst = worst.max(d);
        matched += 1;
        if matched == a.len() {
            break;
        }
    }
    worst
}

/// Serializes a complex vector as `[[re, im], ..]`.
pub mod serde_cvec {
    use super::{CVector, C64};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &CVector, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVector, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(CVector::from_iterator(
            pairs.len(),
            pairs.into_iter().map(|[re, im]| C64::new(re, im)),
        ))
    }
}
