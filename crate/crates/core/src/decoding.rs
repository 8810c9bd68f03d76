//! Decoding functions (r-tuples), the allowed-pair set T and the fiducial decoders.

use std::collections::HashMap;

use crate::ensembles::{self, Measurement, ProtocolSpec, SignalEnsemble};
use crate::error::{Error, Result};
use crate::linops::{self, cis, CMat, C64};

const ZERO_PROB: f64 = 1e-12;

/// Alice's and Bob's r-tuples and the allowed pairs. Tuple entry `l` names the signal
/// (Alice) or measurement outcome (Bob) decoded as key letter `l`; anything absent is
/// discarded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodingScheme {
    pub alice: Vec<Vec<usize>>,
    pub bob: Vec<Vec<usize>>,
    pub allowed: Vec<(usize, usize)>,
    pub r: usize,
}

impl DecodingScheme {
    /// For each Alice function, the positions in `allowed` that use it.
    pub fn partners(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.alice.len()];
        for (i, &(s, _)) in self.allowed.iter().enumerate() {
            out[s].push(i);
        }
        out
    }
}

/// Builds T. Alice's functions are the registry's explicit tuples or all ordered
/// pairs. For Alice's `s`, Bob may decode outcome `k` as letter `l` when `k` is
/// possible for signal `s(l)` and impossible for every other signal in `s`; T pairs
/// `s` with every tuple of such outcomes.
pub fn build_scheme(spec: &ProtocolSpec) -> Result<DecodingScheme> {
    let n = spec.n;
    let alice: Vec<Vec<usize>> = match &spec.alice_functions {
        Some(v) => v.clone(),
        None => (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| vec![a, b])).collect(),
    };
    let r = spec.k;
    for f in &alice {
        if f.len() != r || f.iter().any(|&j| j >= n) || has_duplicates(f) {
            return Err(Error::Registry(format!("{}: invalid Alice tuple {f:?}", spec.name)));
        }
    }
    let p = ensembles::joint_probabilities(&spec.ensemble, &spec.measurement)?;
    let m = spec.measurement.len();
    let mut bob = Vec::new();
    let mut bob_index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut allowed = Vec::new();
    for (si, s) in alice.iter().enumerate() {
        let letters: Vec<Vec<usize>> = (0..r)
            .map(|l| {
                (0..m)
                    .filter(|&k| p[s[l]][k] > ZERO_PROB && (0..r).all(|o| o == l || p[s[o]][k] < ZERO_PROB))
                    .collect()
            })
            .collect();
        for t in cartesian(&letters) {
            let ti = *bob_index.entry(t.clone()).or_insert_with(|| {
                bob.push(t);
                bob.len() - 1
            });
            allowed.push((si, ti));
        }
    }
    if allowed.is_empty() {
        return Err(Error::Numerical(format!("{}: no decodable function pairs", spec.name)));
    }
    Ok(DecodingScheme { alice, bob, allowed, r })
}

fn has_duplicates(v: &[usize]) -> bool {
    v.iter().enumerate().any(|(i, x)| v[..i].contains(x))
}

fn cartesian(sets: &[Vec<usize>]) -> Vec<Vec<usize>> {
    sets.iter().fold(vec![Vec::new()], |acc, set| {
        acc.iter().flat_map(|prefix| set.iter().map(move |&x| [prefix.as_slice(), &[x]].concat())).collect()
    })
}

/// Occurrence count of each input in the multiset union of tuples.
pub fn coverage(functions: &[Vec<usize>], inputs: usize) -> Vec<usize> {
    let mut c = vec![0; inputs];
    for f in functions {
        for &x in f {
            if x < inputs {
                c[x] += 1;
            }
        }
    }
    c
}

#[derive(Clone, Debug)]
pub struct SchemeReport {
    pub alice_coverage: Vec<usize>,
    pub bob_coverage: Vec<usize>,
    /// `‖Σ_{s,l} |ξ_{σ_s(l)}⟩⟨ξ_{σ_s(l)}| − (n_a/d)·1‖_max` with `n_a` the common count.
    pub alice_sifting_deviation: f64,
    /// `‖Σ_{t,m} |η_{τ_t(m)}⟩⟨η_{τ_t(m)}| − n_b·1‖_max`.
    pub bob_sifting_deviation: f64,
}

impl SchemeReport {
    pub fn passes(&self, tol: f64) -> bool {
        uniform(&self.alice_coverage)
            && uniform(&self.bob_coverage)
            && self.alice_sifting_deviation <= tol
            && self.bob_sifting_deviation <= tol
    }
}

pub fn uniform(c: &[usize]) -> bool {
    !c.is_empty() && c.iter().all(|&x| x == c[0] && x > 0)
}

pub fn validate_scheme(scheme: &DecodingScheme, ens: &SignalEnsemble, meas: &Measurement) -> SchemeReport {
    let d = ens.dim;
    let alice_coverage = coverage(&scheme.alice, ens.len());
    let bob_coverage = coverage(&scheme.bob, meas.len());
    let sum = |funcs: &[Vec<usize>], vecs: &[linops::CVec]| {
        funcs.iter().flatten().fold(CMat::zeros(d, d), |acc, &i| acc + linops::outer(&vecs[i], &vecs[i]))
    };
    let n_a = alice_coverage.first().copied().unwrap_or(0) as f64;
    let n_b = bob_coverage.first().copied().unwrap_or(0) as f64;
    let id = CMat::identity(d, d);
    let alice_sifting_deviation =
        linops::max_abs_diff(&sum(&scheme.alice, &ens.states), &(&id * C64::new(n_a / d as f64, 0.0)));
    let bob_sifting_deviation = linops::max_abs_diff(&sum(&scheme.bob, &meas.elements), &(&id * C64::new(n_b, 0.0)));
    SchemeReport { alice_coverage, bob_coverage, alice_sifting_deviation, bob_sifting_deviation }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
}

/// `S_A^x = Σ_k e^{iθ_k}|k⟩⟨ξ*_{σ_x(k)}|` or `S_B^y = Σ_k e^{iφ_k}|k⟩⟨η_{τ_y(k)}|` as an
/// `r×d` matrix.
pub fn fiducial_decoder(
    scheme: &DecodingScheme,
    spec: &ProtocolSpec,
    party: Party,
    index: usize,
    phases: &[f64],
) -> Result<CMat> {
    let (tuple, vecs) = match party {
        Party::Alice => (scheme.alice.get(index), &spec.ensemble.states),
        Party::Bob => (scheme.bob.get(index), &spec.measurement.elements),
    };
    let tuple = tuple.ok_or_else(|| Error::Invalid(format!("no {party:?} function {index}")))?;
    if phases.len() != tuple.len() {
        return Err(Error::Invalid(format!("{} phases for an {}-tuple", phases.len(), tuple.len())));
    }
    let rows: Vec<linops::CVec> = tuple.iter().map(|&i| vecs[i].clone()).collect();
    Ok(decoder_from_rows(&rows, phases, party))
}

/// Decoder with the given vectors in place of the tuple's states.
pub fn decoder_from_rows(rows: &[linops::CVec], phases: &[f64], party: Party) -> CMat {
    let d = rows[0].len();
    CMat::from_fn(rows.len(), d, |k, i| {
        let v = rows[k][i];
        cis(phases[k]) * if party == Party::Alice { v } else { v.conj() }
    })
}

/// Probability that a round yields a key letter when Alice picks uniformly among her
/// functions containing the sent signal and Bob keeps the round whenever some partner
/// function contains his outcome.
pub fn success_probability(scheme: &DecodingScheme, spec: &ProtocolSpec) -> Result<f64> {
    let p = ensembles::joint_probabilities(&spec.ensemble, &spec.measurement)?;
    let partners = scheme.partners();
    let mut total = 0.0;
    for j in 0..spec.n {
        let funcs: Vec<usize> = (0..scheme.alice.len()).filter(|&s| scheme.alice[s].contains(&j)).collect();
        if funcs.is_empty() {
            continue;
        }
        for (k, pjk) in p[j].iter().enumerate() {
            let ok = funcs
                .iter()
                .filter(|&&s| partners[s].iter().any(|&i| scheme.bob[scheme.allowed[i].1].contains(&k)))
                .count();
            total += pjk * ok as f64 / funcs.len() as f64;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_block_tuples_cover_uniformly() {
        // blocks 00,01,10,11 encoded as 0..4; tuples (00,11) and (01,10)
        let c = coverage(&[vec![0, 3], vec![1, 2]], 4);
        assert!(uniform(&c));
    }

    #[test]
    fn missing_function_breaks_coverage() {
        let c = coverage(&[vec![0, 1], vec![1, 0], vec![2, 3]], 4);
        assert!(!uniform(&c));
    }

    #[test]
    fn cartesian_product() {
        let c = cartesian(&[vec![1, 2], vec![5]]);
        assert_eq!(c, vec![vec![1, 5], vec![2, 5]]);
    }
}
