//! Dense complex operators and the VEC / OP / sharp superoperator calculus.
//!
//! Conventions, fixed once for the whole crate:
//! * `|Φ⟩ = d^{-1/2} Σ_i |i⟩|i⟩` with the reference system first.
//! * `vec_map(B) = (1⊗B)|Φ⟩`, so component `i·d + j` is `B_ji / √d`.
//! * the OP form of a map `E` is the normalized Choi matrix `(1⊗E)(|Φ⟩⟨Φ|)`, trace one
//!   for trace-preserving maps.
//! * `sharp(C^T⊗A) = d · OP(A⊙C)`, where `A⊙C` is the map `X ↦ A X C`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn dagger(a: &CMat) -> CMat {
    a.adjoint()
}

/// Entrywise complex conjugate.
pub fn conj(a: &CMat) -> CMat {
    a.map(|z| z.conj())
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().sum()
}

pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

pub fn is_unitary(u: &CMat, tol: f64) -> bool {
    u.is_square() && max_abs_diff(&(u.adjoint() * u), &CMat::identity(u.nrows(), u.nrows())) <= tol
}

fn dim_of_square(n: usize) -> Option<usize> {
    let d = (n as f64).sqrt().round() as usize;
    (d * d == n).then_some(d)
}

/// `(1⊗B)|Φ⟩`; component `i·d + j` equals `B_ji / √d`.
pub fn vec_map(b: &CMat) -> Result<CVec> {
    if !b.is_square() {
        return Err(Error::Dimension(format!("vec_map needs a square matrix, got {:?}", b.shape())));
    }
    let d = b.nrows();
    let s = 1.0 / (d as f64).sqrt();
    Ok(CVec::from_fn(d * d, |idx, _| b[(idx % d, idx / d)] * s))
}

/// Inverse of [`vec_map`].
pub fn unvec(v: &CVec) -> Result<CMat> {
    let d = dim_of_square(v.len())
        .ok_or_else(|| Error::Dimension(format!("vector length {} is not a square", v.len())))?;
    let s = (d as f64).sqrt();
    Ok(CMat::from_fn(d, d, |j, i| v[i * d + j] * s))
}

/// `C^T ⊗ A`, the matrix that sends `vec_map(B)` to `vec_map(A B C)`.
pub fn sandwich_rep(a: &CMat, c: &CMat) -> Result<CMat> {
    if !a.is_square() || !c.is_square() || a.nrows() != c.nrows() {
        return Err(Error::Dimension(format!("sandwich_rep: {:?} vs {:?}", a.shape(), c.shape())));
    }
    Ok(kron(&c.transpose(), a))
}

/// Exchange of the first and last index: `N_{ij;kl} = M_{lj;ki}`. An involution.
pub fn sharp(m: &CMat) -> Result<CMat> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("sharp needs a square matrix, got {:?}", m.shape())));
    }
    let d = dim_of_square(m.nrows())
        .ok_or_else(|| Error::Dimension(format!("sharp: size {} is not d²", m.nrows())))?;
    Ok(CMat::from_fn(d * d, d * d, |r, c| {
        let (i, j) = (r / d, r % d);
        let (k, l) = (c / d, c % d);
        m[(l * d + j, k * d + i)]
    }))
}

/// Hermitian eigendecomposition with eigenvalues ascending; columns of the returned
/// matrix are the matching eigenvectors.
pub fn herm_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(m.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    herm_eig(m).0[0]
}

/// Superoperator stored in OP form.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOp {
    pub op_form: CMat,
    pub dim: usize,
}

impl SuperOp {
    pub fn from_op_form(op_form: CMat) -> Result<Self> {
        let dim = dim_of_square(op_form.nrows())
            .filter(|_| op_form.is_square())
            .ok_or_else(|| Error::Dimension(format!("OP form must be d²×d², got {:?}", op_form.shape())))?;
        Ok(SuperOp { op_form, dim })
    }

    pub fn identity(d: usize) -> Self {
        Self::from_kraus(&[CMat::identity(d, d)]).expect("identity is square")
    }

    /// OP form of `X ↦ Σ_p E_p X E_p†`.
    pub fn from_kraus(kraus: &[CMat]) -> Result<Self> {
        let d = kraus
            .first()
            .ok_or_else(|| Error::Invalid("empty Kraus list".into()))?
            .nrows();
        let mut op = CMat::zeros(d * d, d * d);
        for k in kraus {
            if k.shape() != (d, d) {
                return Err(Error::Dimension(format!("Kraus operator {:?} in dimension {d}", k.shape())));
            }
            let v = vec_map(k)?;
            op += &v * v.adjoint();
        }
        Ok(SuperOp { op_form: op, dim: d })
    }

    /// OP form of an arbitrary linear map given as a closure.
    pub fn from_fn(d: usize, f: impl Fn(&CMat) -> CMat) -> Self {
        let mut op = CMat::zeros(d * d, d * d);
        let scale = C64::new(1.0 / d as f64, 0.0);
        for a in 0..d {
            for b in 0..d {
                let mut e = CMat::zeros(d, d);
                e[(a, b)] = ONE;
                let img = f(&e);
                for j in 0..d {
                    for l in 0..d {
                        op[(a * d + j, b * d + l)] += img[(j, l)] * scale;
                    }
                }
            }
        }
        SuperOp { op_form: op, dim: d }
    }

    /// The `sharp` image of `d·OP`, i.e. the matrix acting on `vec_map(ρ)`.
    pub fn sandwich_matrix(&self) -> CMat {
        sharp(&(&self.op_form * C64::new(self.dim as f64, 0.0))).expect("OP form is d²×d²")
    }

    /// Kraus operators from the eigendecomposition of the OP form. Fails when the OP form
    /// has an eigenvalue below `-tol` (not completely positive).
    pub fn to_kraus(&self, tol: f64) -> Result<Vec<CMat>> {
        let (vals, vecs) = herm_eig(&self.op_form);
        if vals[0] < -tol {
            return Err(Error::Numerical(format!("Choi matrix has eigenvalue {:.3e}", vals[0])));
        }
        let mut out = Vec::new();
        for (i, &lam) in vals.iter().enumerate() {
            if lam > tol {
                let v = vecs.column(i).into_owned() * C64::new(lam.sqrt(), 0.0);
                out.push(unvec(&v)?);
            }
        }
        Ok(out)
    }
}

/// `Σ_p E_p ρ E_p†` evaluated through the VEC calculus.
pub fn apply_superop(e: &SuperOp, rho: &CMat) -> Result<CMat> {
    if rho.shape() != (e.dim, e.dim) {
        return Err(Error::Dimension(format!("state {:?} for a channel on dimension {}", rho.shape(), e.dim)));
    }
    unvec(&(e.sandwich_matrix() * vec_map(rho)?))
}

/// Direct Kraus summation, used as an oracle for [`apply_superop`].
pub fn kraus_apply(kraus: &[CMat], rho: &CMat) -> CMat {
    kraus.iter().fold(CMat::zeros(rho.nrows(), rho.ncols()), |acc, k| acc + k * rho * k.adjoint())
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| C64::new(gauss(rng), gauss(rng)))
}

/// Haar-distributed unitary from a QR factorization with phase correction.
pub fn random_unitary<R: Rng>(rng: &mut R, d: usize) -> CMat {
    let qr = random_matrix(rng, d, d).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..d {
        let ph = r[(j, j)] / r[(j, j)].norm();
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// A random CPTP map with `n_kraus` operators, taken from blocks of a random isometry.
pub fn random_kraus<R: Rng>(rng: &mut R, d: usize, n_kraus: usize) -> Vec<CMat> {
    let u = random_unitary(rng, d * n_kraus);
    (0..n_kraus).map(|p| u.view((p * d, 0), (d, d)).into_owned()).collect()
}

/// Random density matrix of full rank.
pub fn random_state<R: Rng>(rng: &mut R, d: usize) -> CMat {
    let g = random_matrix(rng, d, d);
    let rho = &g * g.adjoint();
    let t = trace(&rho);
    rho / t
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pauli_x() -> CMat {
        CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    #[test]
    fn vec_of_identity_and_x() {
        let s = 1.0 / 2f64.sqrt();
        let v = vec_map(&CMat::identity(2, 2)).unwrap();
        let want = [s, 0.0, 0.0, s];
        for (z, w) in v.iter().zip(want) {
            assert!((z - C64::new(w, 0.0)).norm() < 1e-15);
        }
        let v = vec_map(&pauli_x()).unwrap();
        let want = [0.0, s, s, 0.0];
        for (z, w) in v.iter().zip(want) {
            assert!((z - C64::new(w, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn xzx_is_minus_z() {
        let x = pauli_x();
        let z = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
        let lhs = sandwich_rep(&x, &x).unwrap() * vec_map(&z).unwrap();
        let rhs = vec_map(&(-z)).unwrap();
        assert!((lhs - rhs).norm() < 1e-15);
    }

    #[test]
    fn sharp_of_identity_is_scaled_phi_projector() {
        let d = 3;
        let s = sharp(&CMat::identity(d * d, d * d)).unwrap();
        let phi = vec_map(&CMat::identity(d, d)).unwrap();
        let want = (&phi * phi.adjoint()) * C64::new(d as f64, 0.0);
        assert!(max_abs_diff(&s, &want) < 1e-14);
    }

    #[test]
    fn non_square_inputs_rejected() {
        assert!(vec_map(&CMat::zeros(2, 3)).is_err());
        assert!(sharp(&CMat::zeros(5, 5)).is_err());
        assert!(sandwich_rep(&CMat::zeros(2, 2), &CMat::zeros(3, 3)).is_err());
    }

    #[test]
    fn fully_depolarizing_qubit() {
        let h = 0.5;
        let k: Vec<CMat> = [
            CMat::identity(2, 2),
            pauli_x(),
            CMat::from_row_slice(2, 2, &[ZERO, -C64::i(), C64::i(), ZERO]),
            CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        ]
        .iter()
        .map(|m| m * C64::new(h, 0.0))
        .collect();
        let e = SuperOp::from_kraus(&k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_state(&mut rng, 2);
        let out = apply_superop(&e, &rho).unwrap();
        assert!(max_abs_diff(&out, &(CMat::identity(2, 2) * C64::new(0.5, 0.0))) < 1e-14);
    }

    #[test]
    fn kraus_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = random_kraus(&mut rng, 3, 4);
        let e = SuperOp::from_kraus(&k).unwrap();
        let e2 = SuperOp::from_kraus(&e.to_kraus(1e-12).unwrap()).unwrap();
        assert!(max_abs_diff(&e.op_form, &e2.op_form) < 1e-12);
    }
}
