//! Signal ensembles, measurements and their joint statistics.

use crate::error::{Error, Result};
use crate::linops::{self, CMat, CVec, C64};
use crate::registry::{self, AliceRule, Bound, MeasurementKind, ProtocolConfig, SignalRule};
use crate::symmetry::ProjectiveUnitary;

/// Subnormalized signal vectors; `π_j = ⟨ξ_j|ξ_j⟩`.
#[derive(Clone, Debug)]
pub struct SignalEnsemble {
    pub states: Vec<CVec>,
    pub dim: usize,
}

impl SignalEnsemble {
    pub fn priors(&self) -> Vec<f64> {
        self.states.iter().map(|v| v.norm_squared()).collect()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Rank-one POVM `{|η_k⟩⟨η_k|}`. For repudiating measurements `labels[k]` lists the
/// signals that outcome `k` rules out.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub elements: Vec<CVec>,
    pub labels: Option<Vec<Vec<usize>>>,
    pub dim: usize,
}

impl Measurement {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn completeness_deviation(&self) -> f64 {
        let s = self.elements.iter().fold(CMat::zeros(self.dim, self.dim), |acc, e| acc + linops::outer(e, e));
        linops::max_abs_diff(&s, &CMat::identity(self.dim, self.dim))
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolSpec {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub ensemble: SignalEnsemble,
    pub measurement: Measurement,
    pub generators: Vec<ProjectiveUnitary>,
    /// Explicit Alice tuples, or `None` for all ordered pairs.
    pub alice_functions: Option<Vec<Vec<usize>>>,
    pub default_bound: Bound,
    pub css_coefficient: Option<f64>,
}

/// Global phase fixed so the first component above `1e-9` in modulus is real positive.
pub fn canonicalize(v: &CVec) -> CVec {
    match v.iter().find(|z| z.norm() > 1e-9) {
        Some(z) => v * (z.conj() / z.norm()),
        None => v.clone(),
    }
}

fn same_ray(a: &CVec, b: &CVec) -> bool {
    (a.dotc(b).norm() - a.norm() * b.norm()).abs() < 1e-8
}

pub fn build_protocol(name: &str) -> Result<ProtocolSpec> {
    build_from_config(&registry::load(name)?)
}

pub fn build_from_config(cfg: &ProtocolConfig) -> Result<ProtocolSpec> {
    let generators: Vec<ProjectiveUnitary> = cfg
        .generators
        .iter()
        .map(|g| ProjectiveUnitary::new(registry::eval_matrix(g)?, g.antiunitary))
        .collect::<Result<_>>()?;
    if generators.iter().any(|g| g.dim() != cfg.d) {
        return Err(Error::Registry(format!("{}: generator dimension differs from d = {}", cfg.name, cfg.d)));
    }
    let unit_states: Vec<CVec> = match &cfg.signals {
        SignalRule::Listed { states } => {
            states.iter().map(|s| registry::eval_vector(s).map(|v| canonicalize(&v.normalize()))).collect::<Result<_>>()?
        }
        SignalRule::Images { fiducial } => {
            let f = registry::eval_vector(fiducial)?.normalize();
            std::iter::once(canonicalize(&f)).chain(generators.iter().map(|g| canonicalize(&g.apply_vec(&f)))).collect()
        }
        SignalRule::Orbit { fiducial, generators: count } => {
            let f = registry::eval_vector(fiducial)?.normalize();
            let gens = generators
                .get(..*count)
                .ok_or_else(|| Error::Registry(format!("{}: orbit uses {count} generators", cfg.name)))?;
            orbit(&f, gens)
        }
    };
    if unit_states.iter().any(|v| v.len() != cfg.d) {
        return Err(Error::Registry(format!("{}: state dimension differs from d = {}", cfg.name, cfg.d)));
    }
    let n = unit_states.len();
    if n != cfg.n {
        return Err(Error::Registry(format!("{}: construction gives {n} signals, expected {}", cfg.name, cfg.n)));
    }
    let w = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    let ensemble = SignalEnsemble { states: unit_states.iter().map(|v| v * w).collect(), dim: cfg.d };
    let measurement = match cfg.measurement {
        MeasurementKind::Bases => bases_measurement(&ensemble)?,
        MeasurementKind::Antipodal => antipodal_measurement(&ensemble)?,
        MeasurementKind::Repudiating => repudiating_measurement(&ensemble)?,
    };
    let alice_functions = match &cfg.alice_functions {
        AliceRule::Named(s) if s == "ordered_pairs" => None,
        AliceRule::Named(s) => return Err(Error::Registry(format!("unknown alice_functions rule `{s}`"))),
        AliceRule::Explicit(v) => Some(v.clone()),
    };
    let spec = ProtocolSpec {
        name: registry::normalize_name(&cfg.name),
        n,
        d: cfg.d,
        k: cfg.k,
        m: cfg.m,
        ensemble,
        measurement,
        generators,
        alice_functions,
        default_bound: cfg.default_bound,
        css_coefficient: registry::css_coefficient(cfg)?,
    };
    let ruled_out = ruled_out_count(&spec)?;
    // each outcome must rule out at least its m labelled signals; collinear triples (the
    // qutrit SIC) make some outcomes rule out more
    let labels_ok = spec.measurement.labels.as_ref().is_none_or(|ls| ls.iter().all(|l| l.len() == cfg.m));
    if ruled_out < cfg.m || !labels_ok {
        return Err(Error::Registry(format!("{}: outcomes rule out {ruled_out} signals, expected m = {}", cfg.name, cfg.m)));
    }
    Ok(spec)
}

/// Number of signals each outcome is orthogonal to; must be the same for all outcomes.
fn ruled_out_count(spec: &ProtocolSpec) -> Result<usize> {
    let p = joint_probabilities(&spec.ensemble, &spec.measurement)?;
    let counts: Vec<usize> = (0..spec.measurement.len()).map(|k| (0..spec.n).filter(|&j| p[j][k] < 1e-12).count()).collect();
    if counts.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Registry(format!("{}: outcomes rule out unequal numbers of signals", spec.name)));
    }
    Ok(counts[0])
}

fn orbit(fiducial: &CVec, gens: &[ProjectiveUnitary]) -> Vec<CVec> {
    let mut states = vec![canonicalize(fiducial)];
    let mut head = 0;
    while head < states.len() {
        let x = states[head].clone();
        head += 1;
        for g in gens {
            let y = canonicalize(&g.apply_vec(&x));
            if !states.iter().any(|s| same_ray(s, &y)) {
                states.push(y);
            }
        }
    }
    states
}

fn rescale_to_povm(vectors: Vec<CVec>, d: usize, labels: Option<Vec<Vec<usize>>>) -> Result<Measurement> {
    let total: f64 = vectors.iter().map(|v| v.norm_squared()).sum();
    let s = C64::new((d as f64 / total).sqrt(), 0.0);
    let m = Measurement { elements: vectors.into_iter().map(|v| v * s).collect(), labels, dim: d };
    if m.completeness_deviation() > 1e-10 {
        return Err(Error::Numerical(format!("measurement is not complete (deviation {:.2e})", m.completeness_deviation())));
    }
    Ok(m)
}

/// The signal directions themselves as a POVM; valid when the signals form complete
/// orthonormal bases.
pub fn bases_measurement(ens: &SignalEnsemble) -> Result<Measurement> {
    let v = ens.states.iter().map(|s| canonicalize(&s.normalize())).collect();
    rescale_to_povm(v, ens.dim, None)
}

/// For qubit signals, the state orthogonal to each signal (its Bloch antipode).
pub fn antipodal_measurement(ens: &SignalEnsemble) -> Result<Measurement> {
    if ens.dim != 2 {
        return Err(Error::Invalid("antipodal measurement needs qubit signals".into()));
    }
    let v = ens
        .states
        .iter()
        .map(|s| {
            let u = s.normalize();
            canonicalize(&CVec::from_vec(vec![-u[1].conj(), u[0].conj()]))
        })
        .collect();
    let labels = (0..ens.len()).map(|j| vec![j]).collect();
    rescale_to_povm(v, 2, Some(labels))
}

/// One element per unordered pair `{j,k}` (lexicographic), proportional to the top
/// eigenvector of `1 − (Π_j + Π_k − {Π_j, Π_k})/(1 − Tr Π_jΠ_k)`.
pub fn repudiating_measurement(ens: &SignalEnsemble) -> Result<Measurement> {
    let d = ens.dim;
    let proj: Vec<CMat> = ens.states.iter().map(|s| {
        let u = s.normalize();
        linops::outer(&u, &u)
    }).collect();
    let overlaps: Vec<f64> = pairs(ens.len()).map(|(j, k)| linops::trace(&(&proj[j] * &proj[k])).re).collect();
    let mean = overlaps.iter().sum::<f64>() / overlaps.len() as f64;
    if overlaps.iter().any(|c| (c - mean).abs() > 1e-10) {
        return Err(Error::Invalid("repudiating measurement needs an equiangular ensemble".into()));
    }
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for (j, k) in pairs(ens.len()) {
        let anti = &proj[j] * &proj[k] + &proj[k] * &proj[j];
        let q = CMat::identity(d, d) - (&proj[j] + &proj[k] - anti) / C64::new(1.0 - mean, 0.0);
        let (vals, vecs) = linops::herm_eig(&q);
        if vals[d - 1] < 1e-10 || (d >= 2 && vals[d - 2].abs() > 1e-8) {
            return Err(Error::Numerical(format!("element for pair ({j},{k}) is not rank one")));
        }
        let v = vecs.column(d - 1).into_owned() * C64::new(vals[d - 1].sqrt(), 0.0);
        vectors.push(canonicalize(&v));
        labels.push(vec![j, k]);
    }
    rescale_to_povm(vectors, d, Some(labels))
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |j| (j + 1..n).map(move |k| (j, k)))
}

/// `p_jk = |⟨η_k|ξ_j⟩|²`, rows indexed by signal.
pub fn joint_probabilities(ens: &SignalEnsemble, meas: &Measurement) -> Result<Vec<Vec<f64>>> {
    if ens.dim != meas.dim {
        return Err(Error::Dimension(format!("ensemble in d = {}, measurement in d = {}", ens.dim, meas.dim)));
    }
    Ok(ens.states.iter().map(|x| meas.elements.iter().map(|e| e.dotc(x).norm_sqr()).collect()).collect())
}

/// Whether `Σ_j |ξ_j⟩⟨ξ_j| = 1/d` within `tol`, together with the max-entry deviation.
pub fn check_oblivious(ens: &SignalEnsemble, tol: f64) -> (bool, f64) {
    let d = ens.dim;
    let s = ens.states.iter().fold(CMat::zeros(d, d), |acc, v| acc + linops::outer(v, v));
    let dev = linops::max_abs_diff(&s, &(CMat::identity(d, d) / C64::new(d as f64, 0.0)));
    (dev <= tol, dev)
}
