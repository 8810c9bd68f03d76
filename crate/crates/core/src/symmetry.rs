//! Finite groups of projective unitaries and antiunitaries, their actions on ensembles,
//! and the automorphism group of the decoding set T.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::decoding::DecodingScheme;
use crate::error::{Error, Result};
use crate::linops::{self, CMat, CVec, C64};

pub const DEFAULT_MAX_ORDER: usize = 10_000;
const CANON_PIVOT: f64 = 1e-6;
const EQ_TOL: f64 = 1e-8;

/// A unitary `U`, or the antiunitary `X ↦ U·conj(X)` when `antiunitary` is set.
/// Equality is modulo a global phase.
#[derive(Clone, Debug)]
pub struct ProjectiveUnitary {
    pub matrix: CMat,
    pub antiunitary: bool,
    canonical: CMat,
}

impl ProjectiveUnitary {
    pub fn new(matrix: CMat, antiunitary: bool) -> Result<Self> {
        if !linops::is_unitary(&matrix, 1e-10) {
            return Err(Error::Invalid("group generator is not unitary".into()));
        }
        Ok(Self::from_parts(matrix, antiunitary))
    }

    fn from_parts(matrix: CMat, antiunitary: bool) -> Self {
        let canonical = canonical_matrix(&matrix);
        ProjectiveUnitary { matrix: canonical.clone(), antiunitary, canonical }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_parts(CMat::identity(d, d), false)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `(A,a)·(B,b) = (A·conj^a(B), a⊕b)`.
    pub fn compose(&self, other: &Self) -> Self {
        let b = if self.antiunitary { linops::conj(&other.matrix) } else { other.matrix.clone() };
        Self::from_parts(&self.matrix * b, self.antiunitary ^ other.antiunitary)
    }

    pub fn inverse(&self) -> Self {
        let inv = self.matrix.adjoint();
        if self.antiunitary {
            Self::from_parts(linops::conj(&inv), true)
        } else {
            Self::from_parts(inv, false)
        }
    }

    pub fn apply_vec(&self, v: &CVec) -> CVec {
        if self.antiunitary {
            &self.matrix * v.map(|z| z.conj())
        } else {
            &self.matrix * v
        }
    }

    /// `A·X·A†`, with `X` conjugated first for antiunitaries.
    pub fn apply_op(&self, x: &CMat) -> CMat {
        let y = if self.antiunitary { linops::conj(x) } else { x.clone() };
        &self.matrix * y * self.matrix.adjoint()
    }

    pub fn canonical(&self) -> &CMat {
        &self.canonical
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.antiunitary == other.antiunitary && linops::max_abs_diff(&self.canonical, &other.canonical) < EQ_TOL
    }
}

/// Global phase fixed so that the first entry (row-major) above `1e-6` in modulus is
/// real positive.
pub fn canonical_matrix(m: &CMat) -> CMat {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            if z.norm() > CANON_PIVOT {
                return m * (z.conj() / z.norm());
            }
        }
    }
    m.clone()
}

#[derive(Clone, Debug)]
pub struct FiniteMatrixGroup {
    pub elements: Vec<ProjectiveUnitary>,
    /// Positions of the generators inside `elements`.
    pub generators: Vec<usize>,
}

impl FiniteMatrixGroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn index_of(&self, g: &ProjectiveUnitary) -> Option<usize> {
        self.elements.iter().position(|e| e.same_as(g))
    }

    pub fn trivial(d: usize) -> Self {
        FiniteMatrixGroup { elements: vec![ProjectiveUnitary::identity(d)], generators: vec![] }
    }
}

/// Breadth-first closure of the generators, deduplicated modulo global phase.
pub fn generate_group(generators: &[ProjectiveUnitary], max_order: usize) -> Result<FiniteMatrixGroup> {
    let d = generators.first().map(|g| g.dim()).ok_or_else(|| Error::Invalid("no generators".into()))?;
    if generators.iter().any(|g| g.dim() != d) {
        return Err(Error::Dimension("generators of different dimension".into()));
    }
    for g in generators {
        if !linops::is_unitary(&g.matrix, 1e-10) {
            return Err(Error::Invalid("group generator is not unitary".into()));
        }
    }
    let mut elements = vec![ProjectiveUnitary::identity(d)];
    let mut queue = VecDeque::from([0usize]);
    while let Some(x) = queue.pop_front() {
        for g in generators {
            let y = g.compose(&elements[x]);
            if !elements.iter().any(|e| e.same_as(&y)) {
                if elements.len() >= max_order {
                    return Err(Error::Numerical(format!("group order exceeds the bound {max_order}")));
                }
                elements.push(y);
                queue.push_back(elements.len() - 1);
            }
        }
    }
    let group = FiniteMatrixGroup { generators: vec![], elements };
    let generators = generators.iter().map(|g| group.index_of(g).expect("generator lies in its closure")).collect();
    Ok(FiniteMatrixGroup { generators, ..group })
}

/// Permutation and phase tables: `g·v_j = e^{iα(g,j)} v_{perm(g,j)}`.
#[derive(Clone, Debug)]
pub struct EnsembleAction {
    pub perm: Vec<Vec<usize>>,
    pub phase: Vec<Vec<f64>>,
}

/// Labels that disambiguate coincident vectors: element `k` carries label set
/// `labels[k]`, and a group element must send it to the element whose label is the
/// image of `labels[k]` under `signal_perm`.
pub struct TieBreak<'a> {
    pub labels: &'a [Vec<usize>],
    pub signal_action: &'a EnsembleAction,
}

pub fn ensemble_action(
    group: &FiniteMatrixGroup,
    states: &[CVec],
    tie_break: Option<&TieBreak<'_>>,
) -> Result<EnsembleAction> {
    let label_index: Option<HashMap<Vec<usize>, usize>> =
        tie_break.map(|tb| tb.labels.iter().enumerate().map(|(k, l)| (sorted(l.clone()), k)).collect());
    let mut perm = Vec::with_capacity(group.order());
    let mut phase = Vec::with_capacity(group.order());
    for (gi, g) in group.elements.iter().enumerate() {
        let mut p = Vec::with_capacity(states.len());
        let mut ph = Vec::with_capacity(states.len());
        for (j, v) in states.iter().enumerate() {
            let w = g.apply_vec(v);
            let candidates: Vec<usize> = states
                .iter()
                .enumerate()
                .filter(|(_, u)| {
                    let ov = u.dotc(&w).norm();
                    (ov - u.norm() * w.norm()).abs() < 1e-8 && (u.norm() - w.norm()).abs() < 1e-8
                })
                .map(|(k, _)| k)
                .collect();
            let k = match (candidates.len(), tie_break, &label_index) {
                (0, _, _) => {
                    return Err(Error::Numerical(format!("group element {gi} does not permute the ensemble (state {j})")))
                }
                (1, _, _) => candidates[0],
                (_, Some(tb), Some(index)) => {
                    let image = sorted(tb.labels[j].iter().map(|&a| tb.signal_action.perm[gi][a]).collect());
                    let k = *index
                        .get(&image)
                        .ok_or_else(|| Error::Numerical("label image missing from measurement".into()))?;
                    if !candidates.contains(&k) {
                        return Err(Error::Numerical("label tie-break disagrees with the vector action".into()));
                    }
                    k
                }
                _ => return Err(Error::Numerical(format!("ambiguous image of state {j} under element {gi}"))),
            };
            p.push(k);
            ph.push(states[k].dotc(&w).arg());
        }
        perm.push(p);
        phase.push(ph);
    }
    Ok(EnsembleAction { perm, phase })
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Aut(T)*: pairs `(g, h)` whose induced action maps T onto itself, and the orbits of T.
#[derive(Clone, Debug)]
pub struct AutTStructure {
    pub pairs: Vec<(usize, usize)>,
    /// Orbits as lists of indices into the scheme's allowed pairs; the first entry is
    /// the smallest index and serves as the orbit representative.
    pub orbits: Vec<Vec<usize>>,
    pub orbit_of: Vec<usize>,
    pub stabilizers: Vec<usize>,
    /// For every element of T, a position in `pairs` that carries its orbit
    /// representative onto it.
    pub transport: Vec<usize>,
}

impl AutTStructure {
    pub fn order(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_transitive(&self) -> bool {
        self.orbits.len() == 1
    }

    pub fn is_diagonal(&self) -> bool {
        self.pairs.iter().all(|(g, h)| g == h)
    }
}

fn image(
    scheme: &DecodingScheme,
    g_act: &EnsembleAction,
    h_act: &EnsembleAction,
    alice_index: &HashMap<Vec<usize>, usize>,
    bob_index: &HashMap<Vec<usize>, usize>,
    g: usize,
    h: usize,
    st: (usize, usize),
) -> Option<(usize, usize)> {
    let s: Vec<usize> = scheme.alice[st.0].iter().map(|&j| g_act.perm[g][j]).collect();
    let t: Vec<usize> = scheme.bob[st.1].iter().map(|&k| h_act.perm[h][k]).collect();
    Some((*alice_index.get(&s)?, *bob_index.get(&t)?))
}

/// Brute-force search over `G × H`. Unitary elements pair only with unitaries and
/// antiunitaries with antiunitaries; a mixed pair would act as a partial transpose.
pub fn aut_t(
    g_group: &FiniteMatrixGroup,
    g_act: &EnsembleAction,
    h_group: &FiniteMatrixGroup,
    h_act: &EnsembleAction,
    scheme: &DecodingScheme,
) -> AutTStructure {
    let alice_index: HashMap<Vec<usize>, usize> =
        scheme.alice.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
    let bob_index: HashMap<Vec<usize>, usize> = scheme.bob.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
    let t_index: HashMap<(usize, usize), usize> = scheme.allowed.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let allowed: HashSet<(usize, usize)> = scheme.allowed.iter().copied().collect();

    let mut pairs = Vec::new();
    for g in 0..g_group.order() {
        for h in 0..h_group.order() {
            if g_group.elements[g].antiunitary != h_group.elements[h].antiunitary {
                continue;
            }
            let ok = scheme.allowed.iter().all(|&st| {
                image(scheme, g_act, h_act, &alice_index, &bob_index, g, h, st).is_some_and(|x| allowed.contains(&x))
            });
            if ok {
                pairs.push((g, h));
            }
        }
    }

    let n = scheme.allowed.len();
    let mut orbit_of = vec![usize::MAX; n];
    let mut transport = vec![usize::MAX; n];
    let mut orbits = Vec::new();
    let mut stabilizers = Vec::new();
    for rep in 0..n {
        if orbit_of[rep] != usize::MAX {
            continue;
        }
        let id = orbits.len();
        let mut members = Vec::new();
        let mut stab = 0;
        for (pi, &(g, h)) in pairs.iter().enumerate() {
            let img = image(scheme, g_act, h_act, &alice_index, &bob_index, g, h, scheme.allowed[rep])
                .expect("pairs preserve T");
            let j = t_index[&img];
            if j == rep {
                stab += 1;
            }
            if orbit_of[j] == usize::MAX {
                orbit_of[j] = id;
                transport[j] = pi;
                members.push(j);
            }
        }
        members.sort_unstable();
        orbits.push(members);
        stabilizers.push(stab);
    }
    AutTStructure { pairs, orbits, orbit_of, stabilizers, transport }
}

/// Scalar phase `c` with `a = c·b`, if the two matrices agree up to phase.
pub fn relative_phase(a: &CMat, b: &CMat) -> Option<C64> {
    let (mut best, mut idx) = (0.0, (0, 0));
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            if b[(i, j)].norm() > best {
                best = b[(i, j)].norm();
                idx = (i, j);
            }
        }
    }
    if best == 0.0 {
        return None;
    }
    let c = a[idx] / b[idx];
    (linops::max_abs_diff(a, &(b * c)) < 1e-8).then_some(c)
}
