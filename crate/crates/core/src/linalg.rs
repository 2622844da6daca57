//! Dense complex linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{PcrError, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ‖M − M†‖_F / ‖M‖_F (zero for the zero matrix).
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let norm = frobenius(m);
    if norm == 0.0 {
        return 0.0;
    }
    frobenius(&(m - m.adjoint())) / norm
}

pub fn ensure_hermitian(m: &CMat, rel_tol: f64, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(PcrError::numeric(format!("{what}: matrix is not square")));
    }
    let defect = hermiticity_defect(m);
    if defect > rel_tol {
        return Err(PcrError::numeric(format!(
            "{what}: not Hermitian (relative defect {defect:.3e})"
        )));
    }
    Ok(())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Hermitian eigendecomposition with eigenvalues in ascending order.
///
/// Matrices with an identically zero imaginary part take a real symmetric
/// path, which is several times faster and yields real eigenvectors.
pub fn eigh(m: &CMat) -> (DVector<f64>, CMat) {
    let n = m.nrows();
    let real = m.iter().all(|z| z.im == 0.0);
    let (values, vectors): (Vec<f64>, CMat) = if real {
        let re = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)].re + m[(j, i)].re));
        let eig = re.symmetric_eigen();
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(c),
        )
    } else {
        let herm = (m + m.adjoint()).scale(0.5);
        let eig = herm.symmetric_eigen();
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sorted_values = DVector::from_iterator(n, order.iter().map(|&k| values[k]));
    let sorted_vectors = CMat::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    (sorted_values, sorted_vectors)
}

/// V · diag(f(λ)) · V† for a Hermitian matrix.
pub fn hermitian_function(m: &CMat, f: impl Fn(f64) -> Complex64) -> CMat {
    let (values, vectors) = eigh(m);
    let n = m.nrows();
    let mut scaled = vectors.clone();
    for j in 0..n {
        let fj = f(values[j]);
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * vectors.adjoint()
}

/// (M)^{-1/2} for a Hermitian positive-definite matrix.
pub fn inverse_sqrt(m: &CMat) -> Result<CMat> {
    let (values, _) = eigh(m);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 1e-14 {
        return Err(PcrError::numeric(format!(
            "inverse square root of a singular overlap matrix (min eigenvalue {min:.3e})"
        )));
    }
    Ok(hermitian_function(m, |x| c(1.0 / x.sqrt())))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// max_{phase} alignment: returns min_φ ‖A − e^{iφ} B‖_F.
pub fn phase_aligned_distance(a: &CMat, b: &CMat) -> f64 {
    let overlap = (b.adjoint() * a).trace();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        c(1.0)
    };
    frobenius(&(a - b.map(|z| z * phase)))
}

/// Largest deviation of U†U from the identity (Frobenius).
pub fn unitarity_defect(u: &CMat) -> f64 {
    frobenius(&(u.adjoint() * u - identity(u.nrows())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMat::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        (&a + a.adjoint()).scale(0.5)
    }

    #[test]
    fn eigh_reconstructs_and_sorts() {
        let h = random_hermitian(9, 3);
        let (vals, vecs) = eigh(&h);
        for k in 1..vals.len() {
            assert!(vals[k] >= vals[k - 1]);
        }
        let d = CMat::from_diagonal(&vals.map(c));
        let back = &vecs * d * vecs.adjoint();
        assert!(frobenius(&(back - &h)) < 1e-12);
        assert!(unitarity_defect(&vecs) < 1e-12);
    }

    #[test]
    fn inverse_sqrt_squares_to_inverse() {
        let a = random_hermitian(5, 8);
        let pd = &a * a.adjoint() + identity(5);
        let s = inverse_sqrt(&pd).unwrap();
        let should_be_identity = &s * &pd * &s;
        assert!(frobenius(&(should_be_identity - identity(5))) < 1e-12);
    }

    #[test]
    fn phase_alignment_ignores_global_phase() {
        let a = random_hermitian(4, 1);
        let b = a.map(|z| z * Complex64::from_polar(1.0, 0.7));
        assert!(phase_aligned_distance(&a, &b) < 1e-12);
    }
}
