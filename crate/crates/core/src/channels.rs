//! Channels, the symmetrizer R and the fixed-space channel family.
//!
//! R is stored as a real symmetric matrix on an orthonormal basis of Hermitian
//! `d²×d²` matrices, acting on OP forms. A pair `(g, h)` of Aut(T)* acts on an OP form
//! by `J ↦ c(K J K†)` with `K = A_g^T ⊗ A_h†`, where `c` is entrywise conjugation for
//! antiunitary pairs and the identity otherwise. This is the OP form of
//! `X ↦ h⁻¹·E(g·X)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linops::{self, CMat, C64, SuperOp};
use crate::symmetry::{AutTStructure, FiniteMatrixGroup, ProjectiveUnitary};

#[derive(Clone, Debug)]
pub struct Channel {
    pub kraus: Option<Vec<CMat>>,
    pub op: SuperOp,
}

impl Channel {
    pub fn from_kraus(kraus: Vec<CMat>) -> Result<Self> {
        let op = SuperOp::from_kraus(&kraus)?;
        Ok(Channel { kraus: Some(kraus), op })
    }

    pub fn from_op(op: SuperOp) -> Self {
        Channel { kraus: None, op }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_kraus(vec![CMat::identity(d, d)]).expect("identity")
    }

    pub fn dim(&self) -> usize {
        self.op.dim
    }

    /// Kraus operators, extracted from the OP form when not stored.
    pub fn kraus_ops(&self) -> Result<Vec<CMat>> {
        match &self.kraus {
            Some(k) => Ok(k.clone()),
            None => self.op.to_kraus(1e-13),
        }
    }
}

/// Largest admissible depolarizing parameter, where the channel becomes the
/// complement-of-identity Weyl mixture.
pub fn depolarizing_max(d: usize) -> f64 {
    let d2 = (d * d) as f64;
    d2 / (d2 - 1.0)
}

/// `ρ ↦ (1−p)ρ + p·1/d`, as Weyl–Heisenberg Kraus operators. The OP form is
/// `(1−p)|Φ⟩⟨Φ| + p·1/d²`, and the tetrahedron protocol then has `b₀₁ = p/(2+p)`.
pub fn depolarizing_channel(d: usize, p: f64) -> Result<Channel> {
    if !(0.0..=depolarizing_max(d) + 1e-12).contains(&p) {
        return Err(Error::Invalid(format!("depolarizing parameter {p} outside [0, {}]", depolarizing_max(d))));
    }
    Channel::from_kraus(weyl_kraus(d, p))
}

fn weyl_kraus(d: usize, p: f64) -> Vec<CMat> {
    let d2 = (d * d) as f64;
    let x = CMat::from_fn(d, d, |i, j| if i == (j + 1) % d { linops::ONE } else { linops::ZERO });
    let z = CMat::from_fn(d, d, |i, j| if i == j { linops::cis(2.0 * std::f64::consts::PI * i as f64 / d as f64) } else { linops::ZERO });
    let mut out = Vec::with_capacity(d * d);
    let mut xa = CMat::identity(d, d);
    for a in 0..d {
        let mut zb = CMat::identity(d, d);
        for b in 0..d {
            let w = if a == 0 && b == 0 { 1.0 - p + p / d2 } else { p / d2 };
            out.push((&xa * &zb) * C64::new(w.max(0.0).sqrt(), 0.0));
            zb = &zb * &z;
        }
        xa = &xa * &x;
    }
    out
}

/// OP form of the depolarizing channel without building Kraus operators.
pub fn depolarizing_op(d: usize, p: f64) -> CMat {
    let phi = phi_projector(d);
    phi * C64::new(1.0 - p, 0.0) + CMat::identity(d * d, d * d) * C64::new(p / (d * d) as f64, 0.0)
}

pub fn phi_projector(d: usize) -> CMat {
    let v = linops::vec_map(&CMat::identity(d, d)).expect("square");
    &v * v.adjoint()
}

/// OP form of `X ↦ h⁻¹·E(g·X)`.
pub fn pair_conjugate(op: &CMat, g: &ProjectiveUnitary, h: &ProjectiveUnitary) -> CMat {
    debug_assert_eq!(g.antiunitary, h.antiunitary);
    let k = linops::kron(&g.matrix.transpose(), &h.matrix.adjoint());
    let out = &k * op * k.adjoint();
    if g.antiunitary {
        linops::conj(&out)
    } else {
        out
    }
}

/// Orthonormal (Hilbert–Schmidt) basis of Hermitian `n×n` matrices: `E_ii`,
/// `(E_ij+E_ji)/√2` and `(−iE_ij+iE_ji)/√2` for `i<j`.
pub fn hermitian_basis(n: usize) -> Vec<CMat> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut m = CMat::zeros(n, n);
        m[(i, i)] = linops::ONE;
        out.push(m);
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut m = CMat::zeros(n, n);
            m[(i, j)] = C64::new(s, 0.0);
            m[(j, i)] = C64::new(s, 0.0);
            out.push(m);
            let mut m = CMat::zeros(n, n);
            m[(i, j)] = C64::new(0.0, -s);
            m[(j, i)] = C64::new(0.0, s);
            out.push(m);
        }
    }
    out
}

fn coords(basis: &[CMat], m: &CMat) -> Vec<f64> {
    basis.iter().map(|b| hs_inner(b, m)).collect()
}

fn hs_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn from_coords(basis: &[CMat], c: &[f64]) -> CMat {
    let n = basis[0].nrows();
    basis.iter().zip(c).fold(CMat::zeros(n, n), |acc, (b, &x)| acc + b * C64::new(x, 0.0))
}

#[derive(Clone, Debug)]
pub struct Symmetrizer {
    /// Real symmetric `d⁴×d⁴` matrix of `Σ_{(g,h)} J ↦ h⁻¹·J(g·)` on `basis`.
    pub matrix: DMatrix<f64>,
    pub basis: Vec<CMat>,
    pub group_size: usize,
    pub dim: usize,
    pairs: Vec<(ProjectiveUnitary, ProjectiveUnitary)>,
}

impl Symmetrizer {
    /// `Σ_{(g,h)}` applied to an OP form (not divided by N).
    pub fn apply_unnormalized(&self, op: &CMat) -> CMat {
        let n = op.nrows();
        self.pairs.iter().fold(CMat::zeros(n, n), |acc, (g, h)| acc + pair_conjugate(op, g, h))
    }

    pub fn symmetrize_op(&self, op: &CMat) -> CMat {
        self.apply_unnormalized(op) / C64::new(self.group_size as f64, 0.0)
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// `max |R² − N R|`, scaled by `1/N²`.
    pub fn idempotence_error(&self) -> f64 {
        let n = self.group_size as f64;
        (&self.matrix * &self.matrix - &self.matrix * n).amax() / (n * n)
    }
}

pub fn symmetrizer(aut: &AutTStructure, g_group: &FiniteMatrixGroup, h_group: &FiniteMatrixGroup) -> Result<Symmetrizer> {
    let d = g_group.dim();
    if h_group.dim() != d {
        return Err(Error::Dimension(format!("G acts in d = {d}, H in d = {}", h_group.dim())));
    }
    if aut.pairs.is_empty() {
        return Err(Error::Invalid("empty Aut(T)*".into()));
    }
    let pairs: Vec<_> =
        aut.pairs.iter().map(|&(g, h)| (g_group.elements[g].clone(), h_group.elements[h].clone())).collect();
    Ok(symmetrizer_from_pairs(pairs, d))
}

pub fn symmetrizer_from_pairs(pairs: Vec<(ProjectiveUnitary, ProjectiveUnitary)>, d: usize) -> Symmetrizer {
    let basis = hermitian_basis(d * d);
    let nb = basis.len();
    let mut s = Symmetrizer { matrix: DMatrix::zeros(nb, nb), basis, group_size: pairs.len(), dim: d, pairs };
    let mut matrix = DMatrix::zeros(nb, nb);
    for a in 0..nb {
        let img = s.apply_unnormalized(&s.basis[a]);
        for (b, x) in coords(&s.basis, &img).into_iter().enumerate() {
            matrix[(b, a)] = x;
        }
    }
    s.matrix = matrix;
    s
}

/// The trivial eigenspace of R and its CPTP part.
#[derive(Clone, Debug)]
pub struct ChannelFamily {
    /// Hilbert–Schmidt orthonormal Hermitian OP-form basis of the fixed space.
    pub basis: Vec<CMat>,
    /// The CPTP part, when the fixed space is a commutative algebra.
    pub simplex: Option<Simplex>,
}

/// CPTP channels of a commutative fixed space: convex hull of the normalized isotypic
/// projectors `P_i / rank P_i`.
#[derive(Clone, Debug)]
pub struct Simplex {
    pub vertices: Vec<CMat>,
    pub ranks: Vec<usize>,
    /// Index of the vertex `|Φ⟩⟨Φ|` (the identity channel), when it is one.
    pub identity_vertex: Option<usize>,
}

impl Simplex {
    /// Convex combination of the vertices.
    pub fn point(&self, weights: &[f64]) -> CMat {
        let n = self.vertices[0].nrows();
        self.vertices.iter().zip(weights).fold(CMat::zeros(n, n), |acc, (v, &w)| acc + v * C64::new(w, 0.0))
    }
}

impl ChannelFamily {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn simplex(&self) -> Result<&Simplex> {
        self.simplex.as_ref().ok_or_else(|| Error::Numerical("channel family is not a simplex".into()))
    }

    /// Whether an OP form lies in the span of the fixed space.
    pub fn contains(&self, op: &CMat, tol: f64) -> bool {
        let c = coords(&self.basis, op);
        linops::max_abs_diff(&from_coords(&self.basis, &c), op) <= tol
    }
}

pub fn fixed_space(r: &Symmetrizer) -> Result<ChannelFamily> {
    let n = r.group_size as f64;
    let scaled = r.matrix.map(|x| x / n);
    let sym = (&scaled + scaled.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut basis = Vec::new();
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        let gap = (lam - 1.0).abs();
        if gap < 1e-8 {
            let c: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            basis.push(from_coords(&r.basis, &c));
        } else if gap < 1e-6 {
            return Err(Error::Numerical(format!("ill-conditioned fixed space: eigenvalue {lam}")));
        }
    }
    if basis.is_empty() {
        return Err(Error::Numerical("symmetrizer has no fixed points".into()));
    }
    let simplex = simplex_vertices(&basis, r.dim).ok().map(|(vertices, ranks)| {
        let phi = phi_projector(r.dim);
        let identity_vertex = vertices.iter().position(|v| linops::max_abs_diff(v, &phi) < 1e-8);
        Simplex { vertices, ranks, identity_vertex }
    });
    Ok(ChannelFamily { basis, simplex })
}

/// Spectral projectors of a generic element of the fixed space. When the fixed space
/// is a commutative algebra they span it, and the density matrices inside it form the
/// simplex on `P_i / rank P_i`.
fn simplex_vertices(basis: &[CMat], d: usize) -> Result<(Vec<CMat>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let coeffs: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = from_coords(basis, &coeffs);
    let (vals, vecs) = linops::herm_eig(&x);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in vals.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (vals[g[0]] - v).abs() < 1e-7 => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    if groups.len() != basis.len() {
        return Err(Error::Numerical(format!(
            "fixed space of dimension {} is not spanned by {} spectral projectors",
            basis.len(),
            groups.len()
        )));
    }
    let n = x.nrows();
    let mut vertices = Vec::new();
    let mut ranks = Vec::new();
    for g in groups {
        let mut p = CMat::zeros(n, n);
        for &i in &g {
            let v = vecs.column(i).into_owned();
            p += &v * v.adjoint();
        }
        let c = coords(basis, &p);
        if linops::max_abs_diff(&from_coords(basis, &c), &p) > 1e-8 {
            return Err(Error::Numerical("spectral projector leaves the fixed space".into()));
        }
        let v = p / C64::new(g.len() as f64, 0.0);
        if tp_deviation(&v, d) > 1e-8 {
            return Err(Error::Numerical("family vertex is not trace preserving".into()));
        }
        vertices.push(v);
        ranks.push(g.len());
    }
    Ok((vertices, ranks))
}

pub fn symmetrize_channel(r: &Symmetrizer, e: &Channel) -> Result<Channel> {
    if e.dim() != r.dim {
        return Err(Error::Dimension(format!("channel on d = {}, symmetrizer on d = {}", e.dim(), r.dim)));
    }
    let rep = cptp_check(e);
    if !rep.is_cptp(1e-9) {
        return Err(Error::Invalid(format!("input is not CPTP: {rep:?}")));
    }
    Ok(Channel::from_op(SuperOp { op_form: r.symmetrize_op(&e.op.op_form), dim: r.dim }))
}

#[derive(Clone, Copy, Debug)]
pub struct CptpReport {
    pub choi_min_eigenvalue: f64,
    /// `‖Σ_p E_p†E_p − 1‖_max`.
    pub tp_deviation: f64,
}

impl CptpReport {
    pub fn is_cptp(&self, tol: f64) -> bool {
        self.choi_min_eigenvalue >= -tol && self.tp_deviation <= tol
    }
}

/// `Σ_p E_p†E_p = d·(Tr_out J)^T`; the deviation of that from the identity.
pub fn tp_deviation(op: &CMat, d: usize) -> f64 {
    let mut m = CMat::zeros(d, d);
    for i in 0..d {
        for k in 0..d {
            let s: C64 = (0..d).map(|j| op[(i * d + j, k * d + j)]).sum();
            m[(k, i)] = s * C64::new(d as f64, 0.0);
        }
    }
    linops::max_abs_diff(&m, &CMat::identity(d, d))
}

pub fn cptp_check(e: &Channel) -> CptpReport {
    CptpReport { choi_min_eigenvalue: linops::min_eigenvalue(&e.op.op_form), tp_deviation: tp_deviation(&e.op.op_form, e.dim()) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_cptp() {
        let r = cptp_check(&Channel::identity(3));
        assert!(r.is_cptp(1e-12));
        assert!(r.tp_deviation < 1e-14);
    }

    #[test]
    fn doubled_op_form_violates_tp_by_one() {
        let op = SuperOp { op_form: Channel::identity(2).op.op_form * C64::new(2.0, 0.0), dim: 2 };
        let r = cptp_check(&Channel::from_op(op));
        assert!((r.tp_deviation - 1.0).abs() < 1e-14);
    }

    #[test]
    fn depolarizing_op_matches_kraus() {
        for d in [2, 3] {
            let c = depolarizing_channel(d, 0.3).unwrap();
            assert!(linops::max_abs_diff(&c.op.op_form, &depolarizing_op(d, 0.3)) < 1e-14);
        }
        assert!(depolarizing_channel(2, 1.5).is_err());
    }

    #[test]
    fn trivial_group_fixes_everything() {
        let id = ProjectiveUnitary::identity(2);
        let r = symmetrizer_from_pairs(vec![(id.clone(), id)], 2);
        assert!((r.matrix.clone() - DMatrix::identity(16, 16)).amax() < 1e-14);
        let fam = fixed_space(&r).unwrap();
        assert_eq!(fam.dim(), 16);
        // the full space is not a commutative algebra, so no simplex exists
        assert!(fam.simplex.is_none());
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = hermitian_basis(4);
        for (i, x) in b.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((hs_inner(x, y) - want).abs() < 1e-15);
            }
        }
    }
}
