//! Dense complex linear algebra on the fixed 4-level Hilbert space.
//!
//! Everything here reduces to Hermitian eigendecompositions. Unitary matrices
//! are diagonalized through a real linear combination of their commuting
//! Hermitian and anti-Hermitian parts, which avoids a general nonsymmetric
//! eigensolver while staying exact for normal matrices.

use nalgebra::{Matrix4, Vector4};
use thiserror::Error;

use super::C64;

pub type CMat4 = Matrix4<C64>;
pub type CVec4 = Vector4<C64>;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("input is not unitary: ||U'U - 1|| = {defect:.3e}")]
    NotUnitary { defect: f64 },
    #[error("could not split degenerate unitary spectrum (best residual {residual:.3e})")]
    DegenerateSpectrum { residual: f64 },
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns.
pub fn hermitian_eigen(m: &CMat4) -> ([f64; 4], CMat4) {
    let eig = m.symmetric_eigen();
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let mut vals = [0.0; 4];
    let mut vecs = CMat4::zeros();
    for (dst, &src) in order.iter().enumerate() {
        vals[dst] = eig.eigenvalues[src];
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Hermitian square root; small negative eigenvalues clamp to zero.
pub fn hermitian_sqrt(m: &CMat4) -> CMat4 {
    let (vals, vecs) = hermitian_eigen(m);
    let d = Matrix4::from_diagonal(&Vector4::from_iterator(
        vals.iter().map(|&v| c64(v.max(0.0).sqrt(), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

/// Unitary matrix exponential `exp(-i H t)` of a Hermitian generator.
pub fn expm_minus_i_hermitian(h: &CMat4, t: f64) -> CMat4 {
    let (vals, vecs) = hermitian_eigen(h);
    let d = Matrix4::from_diagonal(&Vector4::from_iterator(
        vals.iter().map(|&v| c64(0.0, -v * t).exp()),
    ));
    &vecs * d * vecs.adjoint()
}

/// Deviation from unitarity, `||U'U - 1||_F`.
pub fn unitarity_defect(u: &CMat4) -> f64 {
    (u.adjoint() * u - CMat4::identity()).norm()
}

/// Polar projection onto the unitary group: `U (U'U)^{-1/2}`.
pub fn unitarize(u: &CMat4) -> CMat4 {
    let gram = u.adjoint() * u;
    let (vals, vecs) = hermitian_eigen(&gram);
    let d = Matrix4::from_diagonal(&Vector4::from_iterator(
        vals.iter().map(|&v| c64(1.0 / v.max(1e-300).sqrt(), 0.0)),
    ));
    u * (&vecs * d * vecs.adjoint())
}

/// Eigendecomposition of a unitary matrix.
///
/// `U = A + iB` with `A = (U+U')/2`, `B = (U-U')/2i` Hermitian and commuting,
/// so a generic real combination `A + cB` shares eigenvectors with `U`. A few
/// mixing constants are tried until every Rayleigh residual is small; vectors
/// inside genuinely degenerate eigenspaces of `U` pass that check for any `c`.
pub fn unitary_eigen(u: &CMat4) -> Result<([C64; 4], CMat4), LinalgError> {
    let defect = unitarity_defect(u);
    if defect > 1e-6 {
        return Err(LinalgError::NotUnitary { defect });
    }
    let half = c64(0.5, 0.0);
    let a = (u + u.adjoint()) * half;
    let b = (u - u.adjoint()) * c64(0.0, -0.5);

    let mut best: Option<([C64; 4], CMat4, f64)> = None;
    for &c in &[0.618_033_988_749_894_9, 1.732_050_807_568_877, 0.318_309_886_183_790_7] {
        let k = &a + &b * c64(c, 0.0);
        let (_, vecs) = hermitian_eigen(&k);
        let mut vals = [c64(0.0, 0.0); 4];
        let mut max_res = 0.0_f64;
        for j in 0..4 {
            let v = vecs.column(j).into_owned();
            let w = u * &v;
            let eta = v.dotc(&w);
            let res = (&w - &v * eta).norm();
            vals[j] = eta;
            max_res = max_res.max(res);
        }
        if best.as_ref().map_or(true, |(_, _, r)| max_res < *r) {
            best = Some((vals, vecs, max_res));
        }
    }
    let (vals, vecs, residual) = best.unwrap();
    if residual < 1e-8_f64.max(20.0 * defect) {
        Ok((vals, vecs))
    } else {
        Err(LinalgError::DegenerateSpectrum { residual })
    }
}

/// Trace norm (sum of absolute eigenvalues) of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMat4) -> f64 {
    let (vals, _) = hermitian_eigen(m);
    vals.iter().map(|v| v.abs()).sum()
}

/// `(m + m')/2`, discarding anti-Hermitian numerical noise.
pub fn hermitize(m: &CMat4) -> CMat4 {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample_hermitian(seed: u64) -> CMat4 {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let m = CMat4::from_fn(|_, _| c64(next(), next()));
        hermitize(&m)
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        for seed in 1..6 {
            let h = sample_hermitian(seed);
            let (vals, vecs) = hermitian_eigen(&h);
            let d = Matrix4::from_diagonal(&Vector4::from_iterator(
                vals.iter().map(|&v| c64(v, 0.0)),
            ));
            assert!((&vecs * d * vecs.adjoint() - h).norm() < 1e-12);
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn unitary_eigen_recovers_phases() {
        for seed in 1..6 {
            let h = sample_hermitian(seed);
            let u = expm_minus_i_hermitian(&h, 1.3);
            let (vals, vecs) = unitary_eigen(&u).unwrap();
            for j in 0..4 {
                assert_abs_diff_eq!(vals[j].norm(), 1.0, epsilon = 1e-10);
                let v = vecs.column(j).into_owned();
                assert!((u * &v - &v * vals[j]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn unitary_eigen_handles_degeneracy() {
        // exp(-i diag(0.3, 0.3, -0.2, 0.9)) has a doubly degenerate phase.
        let h = Matrix4::from_diagonal(&Vector4::from_iterator(
            [0.3, 0.3, -0.2, 0.9].iter().map(|&v| c64(v, 0.0)),
        ));
        let u = expm_minus_i_hermitian(&h, 1.0);
        let (vals, _) = unitary_eigen(&u).unwrap();
        let mut phases: Vec<f64> = vals.iter().map(|v| -v.arg()).collect();
        phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(phases[0], -0.2, epsilon = 1e-10);
        assert_abs_diff_eq!(phases[1], 0.3, epsilon = 1e-10);
        assert_abs_diff_eq!(phases[2], 0.3, epsilon = 1e-10);
        assert_abs_diff_eq!(phases[3], 0.9, epsilon = 1e-10);
    }

    #[test]
    fn unitarize_is_projection() {
        let h = sample_hermitian(7);
        let u = expm_minus_i_hermitian(&h, 0.8);
        let perturbed = u + sample_hermitian(9) * c64(1e-6, 0.0);
        let fixed = unitarize(&perturbed);
        assert!(unitarity_defect(&fixed) < 1e-13);
        assert!((fixed - u).norm() < 1e-5);
    }
}
