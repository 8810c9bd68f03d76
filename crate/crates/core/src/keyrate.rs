//! Key states, Bell spectra, rate bounds and threshold search.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::channels::{self, ChannelFamily, Simplex, Symmetrizer};
use crate::decoding::{self, DecodingScheme, Party};
use crate::ensembles::{self, ProtocolSpec};
use crate::error::{Error, Result};
use crate::linops::{self, cis, CMat, CVec, C64};
use crate::registry::Bound;
use crate::symmetry::{self, AutTStructure, EnsembleAction, FiniteMatrixGroup, TieBreak};

/// Normalized key state and the probability that produced it.
#[derive(Clone, Debug)]
pub struct KeyState {
    pub rho: CMat,
    pub success_probability: f64,
}

/// `b_jk = ⟨β̃_jk|ρ|β̃_jk⟩`; first index is the key-shift (X) power, second the Z power.
#[derive(Clone, Debug)]
pub struct BellSpectrum {
    pub b: DMatrix<f64>,
    pub psi: Vec<f64>,
}

impl BellSpectrum {
    pub fn r(&self) -> usize {
        self.b.nrows()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.b[(j, k)]
    }

    pub fn total(&self) -> f64 {
        self.b.sum()
    }
}

/// `ρ = S·J·S†`, with `S = S_A ⊗ S_B`; normalized by its trace.
pub fn key_state(op: &CMat, decoder: &CMat) -> Result<KeyState> {
    let raw = decoder * op * decoder.adjoint();
    let tr = linops::trace(&raw).re;
    if tr < 1e-12 {
        return Err(Error::Numerical(format!("key success probability {tr:.3e} is zero")));
    }
    Ok(KeyState { rho: raw / C64::new(tr, 0.0), success_probability: tr })
}

/// `β̃_jk = r^{-1/2} Σ_l ω^{lk} e^{iΣ_{m<j} ψ_{l+m}} |l⟩|l+j⟩`.
pub fn bell_vector(j: usize, k: usize, psi: &[f64], r: usize) -> CVec {
    let mut v = CVec::zeros(r * r);
    let s = 1.0 / (r as f64).sqrt();
    for l in 0..r {
        let tilt: f64 = (0..j).map(|m| psi[(l + m) % r]).sum();
        let w = 2.0 * PI * ((l * k) % r) as f64 / r as f64;
        v[l * r + (l + j) % r] = cis(w + tilt) * s;
    }
    v
}

pub fn bell_spectrum(rho: &CMat, psi: &[f64]) -> BellSpectrum {
    let r = (rho.nrows() as f64).sqrt().round() as usize;
    let psi: Vec<f64> = if psi.is_empty() { vec![0.0; r] } else { psi.to_vec() };
    let b = DMatrix::from_fn(r, r, |j, k| {
        let v = bell_vector(j, k, &psi, r);
        v.dotc(&(rho * &v)).re
    });
    BellSpectrum { b, psi }
}

/// ε: the weight on Bell components with nonzero key-shift power.
pub fn error_rate(s: &BellSpectrum) -> f64 {
    let r = s.r();
    (1..r).flat_map(|j| (0..r).map(move |k| (j, k))).map(|(j, k)| s.get(j, k)).sum()
}

/// Weight on components with nonzero phase power.
pub fn phase_error_rate(s: &BellSpectrum) -> f64 {
    let r = s.r();
    (0..r).flat_map(|j| (1..r).map(move |k| (j, k))).map(|(j, k)| s.get(j, k)).sum()
}

pub fn shannon_entropy(p: impl IntoIterator<Item = f64>) -> f64 {
    p.into_iter().filter(|&x| x > 0.0).map(|x| -x * x.log2()).sum()
}

pub fn h2(x: f64) -> f64 {
    shannon_entropy([x, 1.0 - x])
}

/// `1 − H({b_jk})` in bits.
pub fn hashing_rate(s: &BellSpectrum) -> f64 {
    1.0 - shannon_entropy(s.b.iter().copied())
}

pub fn css_rate(e_bit: f64, e_phase: f64) -> f64 {
    1.0 - h2(e_bit) - h2(e_phase)
}

/// Bisection for a sign change of `f` on `[lo, hi]`; stops once `|f| < tol` or the
/// bracket is below 1e-15.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo.abs() < tol {
        return Ok(lo);
    }
    if fhi.abs() < tol {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Numerical(format!("no sign change on [{lo}, {hi}] ({flo:.3e}, {fhi:.3e})")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() < tol || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Grid over multiples of π/12 per angle followed by coordinate descent with step
/// halving down to 1e-6 rad. Minimizes `f`; deterministic.
pub fn optimize_angles(n: usize, f: impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    if n == 0 {
        return (vec![], f(&[]));
    }
    assert!(n <= 4, "grid search supports at most four angles");
    let steps = 24usize;
    let mut best = (vec![0.0; n], f64::INFINITY);
    let total = steps.pow(n as u32);
    for idx in 0..total {
        let mut x = Vec::with_capacity(n);
        let mut rem = idx;
        for _ in 0..n {
            x.push((rem % steps) as f64 * PI / 12.0);
            rem /= steps;
        }
        let v = f(&x);
        if v < best.1 {
            best = (x, v);
        }
    }
    let (mut x, mut fx) = best;
    let mut step = PI / 24.0;
    while step > 1e-6 {
        let mut improved = false;
        for i in 0..n {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += dir * step;
                let fy = f(&y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    for a in &mut x {
        *a = a.rem_euclid(2.0 * PI);
    }
    (x, fx)
}

/// Per-orbit data: representative, decoder phases and the fiducial decoder.
#[derive(Clone, Debug)]
pub struct OrbitInfo {
    pub index: usize,
    /// Position of the representative in the scheme's allowed pairs.
    pub representative: usize,
    pub size: usize,
    pub stabilizer: usize,
    pub alice_phases: Vec<f64>,
    pub bob_phases: Vec<f64>,
    /// `S_A^x ⊗ S_B^y`, an `r²×d²` matrix.
    pub decoder: CMat,
    /// `b₀₀` of the noiseless key state; below one the orbit cannot produce key.
    pub noiseless_fidelity: f64,
    pub noiseless_success: f64,
}

impl OrbitInfo {
    pub fn key_generating(&self) -> bool {
        self.noiseless_fidelity >= 1.0 - 1e-9
    }
}

/// Everything derived from a registered protocol.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub spec: ProtocolSpec,
    pub scheme: DecodingScheme,
    pub group: FiniteMatrixGroup,
    pub signal_action: EnsembleAction,
    pub measurement_action: EnsembleAction,
    pub aut: AutTStructure,
    pub symmetrizer: Symmetrizer,
    pub family: ChannelFamily,
    pub orbits: Vec<OrbitInfo>,
}

impl Analysis {
    pub fn new(name: &str) -> Result<Self> {
        Self::from_spec(ensembles::build_protocol(name)?)
    }

    pub fn from_spec(spec: ProtocolSpec) -> Result<Self> {
        let scheme = decoding::build_scheme(&spec)?;
        let group = symmetry::generate_group(&spec.generators, symmetry::DEFAULT_MAX_ORDER)?;
        let signal_action = symmetry::ensemble_action(&group, &spec.ensemble.states, None)?;
        let measurement_action = match &spec.measurement.labels {
            Some(labels) => {
                let tb = TieBreak { labels, signal_action: &signal_action };
                symmetry::ensemble_action(&group, &spec.measurement.elements, Some(&tb))?
            }
            None => symmetry::ensemble_action(&group, &spec.measurement.elements, None)?,
        };
        let aut = symmetry::aut_t(&group, &signal_action, &group, &measurement_action, &scheme);
        let symmetrizer = channels::symmetrizer(&aut, &group, &group)?;
        let family = channels::fixed_space(&symmetrizer)?;
        let mut a = Analysis {
            spec,
            scheme,
            group,
            signal_action,
            measurement_action,
            aut,
            symmetrizer,
            family,
            orbits: vec![],
        };
        a.orbits = (0..a.aut.orbits.len()).map(|o| a.orbit_info(o)).collect::<Result<_>>()?;
        Ok(a)
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn r(&self) -> usize {
        self.scheme.r
    }

    /// Alice phases zero; Bob's phases chosen so the noiseless key state has real
    /// nonnegative coherences `⟨ll|ρ|00⟩`, which makes it `|Φ_r⟩` whenever the orbit
    /// produces key at all. Remaining freedom is carried by the Bell rephasing ψ.
    fn orbit_info(&self, o: usize) -> Result<OrbitInfo> {
        let r = self.r();
        let rep = self.aut.orbits[o][0];
        let zeros = vec![0.0; r];
        let raw = self.decoder_for(rep, &zeros, &zeros)?;
        let phi = channels::phi_projector(self.d());
        let rho0 = &raw * &phi * raw.adjoint();
        let bob_phases: Vec<f64> = (0..r).map(|l| -rho0[(l * r + l, 0)].arg()).map(|x| if l_is_zero(x) { 0.0 } else { x }).collect();
        let bob_phases: Vec<f64> = bob_phases.iter().map(|x| x - bob_phases[0]).collect();
        let decoder = self.decoder_for(rep, &zeros, &bob_phases)?;
        let ks = key_state(&phi, &decoder)?;
        let fid = bell_spectrum(&ks.rho, &zeros).get(0, 0);
        Ok(OrbitInfo {
            index: o,
            representative: rep,
            size: self.aut.orbits[o].len(),
            stabilizer: self.aut.stabilizers[o],
            alice_phases: zeros,
            bob_phases,
            decoder,
            noiseless_fidelity: fid,
            noiseless_success: ks.success_probability,
        })
    }

    /// `S_A ⊗ S_B` for an element of T with explicit phases.
    pub fn decoder_for(&self, t_index: usize, alice_phases: &[f64], bob_phases: &[f64]) -> Result<CMat> {
        let (s, t) = self.scheme.allowed[t_index];
        let sa = decoding::fiducial_decoder(&self.scheme, &self.spec, Party::Alice, s, alice_phases)?;
        let sb = decoding::fiducial_decoder(&self.scheme, &self.spec, Party::Bob, t, bob_phases)?;
        Ok(linops::kron(&sa, &sb))
    }

    pub fn key_orbits(&self) -> impl Iterator<Item = &OrbitInfo> {
        self.orbits.iter().filter(|o| o.key_generating())
    }

    /// Unnormalized key state of an orbit for a channel already in the fixed space.
    pub fn orbit_raw(&self, orbit: usize, op: &CMat) -> CMat {
        let s = &self.orbits[orbit].decoder;
        s * op * s.adjoint()
    }

    /// Fiducial-decoder key state for an arbitrary channel: the channel is symmetrized
    /// first.
    pub fn orbit_key_state(&self, orbit: usize, op: &CMat) -> Result<KeyState> {
        key_state(&self.symmetrizer.symmetrize_op(op), &self.orbits[orbit].decoder)
    }

    /// The same key state computed without the symmetrizer: every pair of Aut(T)* sends
    /// the representative to some member of the orbit and transports its decoders; the
    /// key states of those transported decoders under the raw channel are averaged.
    /// Pairs with antiunitary parts contribute the complex conjugate of their physical
    /// key state.
    pub fn orbit_key_state_direct(&self, orbit: usize, kraus: &[CMat]) -> Result<KeyState> {
        let info = &self.orbits[orbit];
        let rep = self.scheme.allowed[info.representative];
        let (x, y) = (&self.scheme.alice[rep.0], &self.scheme.bob[rep.1]);
        let r = self.r();
        let out = physical_output(kraus, self.d());
        let mut acc = CMat::zeros(r * r, r * r);
        let mut count = 0usize;
        for &(g, h) in &self.aut.pairs {
            let anti = self.group.elements[g].antiunitary;
            let s_img: Vec<usize> = x.iter().map(|&j| self.signal_action.perm[g][j]).collect();
            let t_img: Vec<usize> = y.iter().map(|&k| self.measurement_action.perm[h][k]).collect();
            let s = self.scheme.alice.iter().position(|a| *a == s_img);
            let t = self.scheme.bob.iter().position(|b| *b == t_img);
            let member = match (s, t) {
                (Some(s), Some(t)) => self.scheme.allowed.iter().position(|&p| p == (s, t)),
                _ => None,
            };
            let member = member.ok_or_else(|| Error::Numerical("pair image leaves T".into()))?;
            if self.aut.orbit_of[member] != orbit {
                return Err(Error::Numerical("pair image leaves the orbit".into()));
            }
            let sign = if anti { -1.0 } else { 1.0 };
            let sa_rows: Vec<CVec> = s_img.iter().map(|&i| self.spec.ensemble.states[i].clone()).collect();
            let th: Vec<f64> =
                x.iter().enumerate().map(|(l, &j)| self.signal_action.phase[g][j] + sign * info.alice_phases[l]).collect();
            let sb_rows: Vec<CVec> = t_img.iter().map(|&i| self.spec.measurement.elements[i].clone()).collect();
            // the Bob bra is conjugated, so its transport phase enters with a minus sign
            let ph: Vec<f64> =
                y.iter().enumerate().map(|(l, &k)| -self.measurement_action.phase[h][k] + sign * info.bob_phases[l]).collect();
            let sa = decoding::decoder_from_rows(&sa_rows, &th, Party::Alice);
            let sb = decoding::decoder_from_rows(&sb_rows, &ph, Party::Bob);
            let s_full = linops::kron(&sa, &sb);
            let term = &s_full * &out * s_full.adjoint();
            acc += if anti { linops::conj(&term) } else { term };
            count += 1;
        }
        let acc = acc / C64::new(count as f64, 0.0);
        let tr = linops::trace(&acc).re;
        Ok(KeyState { rho: acc / C64::new(tr, 0.0), success_probability: tr })
    }

    /// Orbit-size weighted average of the key-generating orbits' key states under the
    /// identity channel, with the physical success probability of the scheme.
    pub fn noiseless_key_state(&self) -> Result<KeyState> {
        let phi = channels::phi_projector(self.d());
        let r = self.r();
        let mut acc = CMat::zeros(r * r, r * r);
        let mut count = 0;
        for o in self.key_orbits() {
            acc += self.orbit_raw(o.index, &phi) * C64::new(o.size as f64, 0.0);
            count += 1;
        }
        if count == 0 {
            return Err(Error::Numerical("no orbit produces key".into()));
        }
        let tr = linops::trace(&acc).re;
        Ok(KeyState { rho: acc / C64::new(tr, 0.0), success_probability: decoding::success_probability(&self.scheme, &self.spec)? })
    }

    pub fn success_probability(&self) -> Result<f64> {
        decoding::success_probability(&self.scheme, &self.spec)
    }

    /// Error rate observed over the key-generating part of T, each decoding weighted by
    /// how often it yields a key letter.
    pub fn observed_error_rate(&self, op: &CMat) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for o in self.key_orbits() {
            let raw = self.orbit_raw(o.index, op);
            let tr = linops::trace(&raw).re;
            let e = error_rate(&bell_spectrum(&(raw / C64::new(tr, 0.0)), &[]));
            num += o.size as f64 * tr * e;
            den += o.size as f64 * tr;
        }
        num / den
    }

    /// Same, over all of T (what a simulation of the full protocol measures).
    pub fn observed_error_rate_all(&self, op: &CMat) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for o in &self.orbits {
            let raw = self.orbit_raw(o.index, op);
            let tr = linops::trace(&raw).re;
            let e = error_rate(&bell_spectrum(&(raw / C64::new(tr, 0.0)), &[]));
            num += o.size as f64 * tr * e;
            den += o.size as f64 * tr;
        }
        num / den
    }

    fn simplex(&self) -> Result<&Simplex> {
        self.family.simplex()
    }

    /// Spectra of every family vertex for one orbit, unnormalized (`b` times the trace).
    fn vertex_spectra(&self, orbit: usize, psi: &[f64]) -> Result<Vec<(DMatrix<f64>, f64)>> {
        Ok(self
            .simplex()?
            .vertices
            .iter()
            .map(|v| {
                let raw = self.orbit_raw(orbit, v);
                let tr = linops::trace(&raw).re;
                (bell_spectrum(&raw, psi).b, tr)
            })
            .collect())
    }

    /// `max e_phase / e_bit` over the physical family for one orbit at fixed ψ. The
    /// ratio is linear-fractional in the vertex weights, so the maximum sits at a vertex.
    pub fn orbit_phase_ratio(&self, orbit: usize, psi: &[f64]) -> Result<f64> {
        Ok(ratio_from_spectra(&self.vertex_spectra(orbit, psi)?))
    }

    /// As [`Self::orbit_phase_ratio`] but with an explicitly given decoder.
    pub fn phase_ratio_with_decoder(&self, decoder: &CMat, psi: &[f64]) -> Result<f64> {
        let sp: Vec<_> = self
            .simplex()?
            .vertices
            .iter()
            .map(|v| {
                let raw = decoder * v * decoder.adjoint();
                let tr = linops::trace(&raw).re;
                (bell_spectrum(&raw, psi).b, tr)
            })
            .collect();
        Ok(ratio_from_spectra(&sp))
    }

    /// Smallest worst-case ratio over ψ for one orbit.
    pub fn optimize_orbit_ratio(&self, orbit: usize) -> Result<(Vec<f64>, f64)> {
        self.simplex()?;
        let r = self.r();
        let (x, v) = optimize_angles(r - 1, |a| {
            let psi = psi_from(a);
            self.orbit_phase_ratio(orbit, &psi).unwrap_or(f64::INFINITY)
        });
        Ok((psi_from(&x), v))
    }

    /// Worst case over key-generating orbits of the optimized e_phase/e_bit ratio.
    pub fn phase_relation(&self) -> Result<PhaseRelation> {
        let mut per_orbit = Vec::new();
        for o in self.key_orbits() {
            let (psi, ratio) = self.optimize_orbit_ratio(o.index)?;
            per_orbit.push(OrbitRatio { orbit: o.index, ratio, psi });
        }
        let worst = per_orbit
            .iter()
            .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
            .ok_or_else(|| Error::Numerical("no orbit produces key".into()))?;
        Ok(PhaseRelation { coefficient: worst.ratio, worst_orbit: worst.orbit, per_orbit })
    }

    /// Hashing rate of one orbit at observed error rate ε: Bob's rephasing ψ is chosen
    /// first, then the worst channel of the family with that error rate.
    pub fn orbit_hashing_rate(&self, orbit: usize, eps: f64) -> Result<(f64, Vec<f64>)> {
        self.simplex()?;
        let r = self.r();
        let (x, v) = optimize_angles(r - 1, |a| {
            let psi = psi_from(a);
            match self.vertex_spectra(orbit, &psi) {
                Ok(sp) => -worst_hashing(&sp, eps, r),
                Err(_) => f64::INFINITY,
            }
        });
        Ok((-v, psi_from(&x)))
    }

    /// Error rate of one orbit for the depolarizing channel with parameter `p`.
    pub fn orbit_error_rate(&self, orbit: usize, op: &CMat) -> f64 {
        let raw = self.orbit_raw(orbit, op);
        let tr = linops::trace(&raw).re;
        error_rate(&bell_spectrum(&(raw / C64::new(tr, 0.0)), &[]))
    }

    /// Largest error rate the family can produce in an orbit.
    fn max_orbit_error(&self, orbit: usize) -> Result<f64> {
        let sp = self.vertex_spectra(orbit, &vec![0.0; self.r()])?;
        Ok(sp.iter().filter(|(_, t)| *t > 1e-12).map(|(b, t)| bit_part(b) / t).fold(0.0, f64::max))
    }

    pub fn threshold(&self, bound: Bound, coefficient: CoefficientSource) -> Result<ThresholdResult> {
        match bound {
            Bound::Hashing => self.hashing_threshold(),
            Bound::Css => self.css_threshold(coefficient),
        }
    }

    fn hashing_threshold(&self) -> Result<ThresholdResult> {
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for o in self.key_orbits() {
            let rate = |e: f64| self.orbit_hashing_rate(o.index, e).map(|x| x.0).unwrap_or(f64::NAN);
            // the rate need not be monotone near the family's extreme points, so bracket
            // the first crossing on a coarse scan
            let hi = self.max_orbit_error(o.index)?;
            let steps = 200;
            let upper = (1..=steps)
                .map(|i| hi * i as f64 / steps as f64)
                .find(|&e| rate(e) < 0.0)
                .ok_or_else(|| Error::Numerical(format!("hashing rate of orbit {} never turns negative", o.index)))?;
            let eps = bisect(rate, upper - hi / steps as f64, upper, 1e-9)?;
            let psi = self.orbit_hashing_rate(o.index, eps)?.1;
            if best.as_ref().is_none_or(|b| eps < b.0) {
                best = Some((eps, o.index, psi));
            }
        }
        let (eps, orbit, psi) = best.ok_or_else(|| Error::Numerical("no orbit produces key".into()))?;
        let d = self.d();
        let p = bisect(|p| self.orbit_error_rate(orbit, &channels::depolarizing_op(d, p)) - eps, 0.0, 1.0, 1e-12)?;
        Ok(self.result(Bound::Hashing, eps, p, orbit, psi, None))
    }

    fn css_threshold(&self, source: CoefficientSource) -> Result<ThresholdResult> {
        let (c, orbit, psi) = match source {
            CoefficientSource::Registered => {
                let c = self.spec.css_coefficient.ok_or_else(|| {
                    Error::Invalid(format!("{} has no registered e_phase/e_bit coefficient", self.spec.name))
                })?;
                (c, None, vec![0.0; self.r()])
            }
            CoefficientSource::Computed => {
                let rel = self.phase_relation()?;
                let psi = rel.per_orbit.iter().find(|x| x.orbit == rel.worst_orbit).map(|x| x.psi.clone()).unwrap_or_default();
                (rel.coefficient, Some(rel.worst_orbit), psi)
            }
        };
        let eps = css_threshold_for(c)?;
        let d = self.d();
        let p = bisect(|p| self.observed_error_rate(&channels::depolarizing_op(d, p)) - eps, 0.0, 1.0, 1e-12)?;
        let orbit = orbit.unwrap_or_else(|| self.key_orbits().next().map(|o| o.index).unwrap_or(0));
        Ok(self.result(Bound::Css, eps, p, orbit, psi, Some(c)))
    }

    fn result(&self, bound: Bound, eps: f64, p: f64, orbit: usize, psi: Vec<f64>, c: Option<f64>) -> ThresholdResult {
        ThresholdResult {
            protocol: self.spec.name.clone(),
            bound,
            epsilon_star: eps,
            p_star: p,
            fidelity_star: average_fidelity(self.d(), p),
            binding_orbit: orbit,
            psi,
            bob_phases: self.orbits[orbit].bob_phases.clone(),
            css_coefficient: c,
        }
    }

    pub fn summary(&self) -> Summary {
        Summary {
            protocol: self.spec.name.clone(),
            n: self.spec.n,
            d: self.spec.d,
            r: self.r(),
            group_order: self.group.order(),
            aut_order: self.aut.order(),
            t_size: self.scheme.allowed.len(),
            orbit_count: self.aut.orbits.len(),
            key_orbit_count: self.key_orbits().count(),
            fixed_space_dim: self.family.dim(),
            transitive: self.aut.is_transitive(),
        }
    }
}

fn l_is_zero(x: f64) -> bool {
    x.abs() < 1e-14
}

/// `ψ = (0, a₁, …)`; a common shift of all ψ only changes the Bell vectors' global phase.
fn psi_from(a: &[f64]) -> Vec<f64> {
    std::iter::once(0.0).chain(a.iter().copied()).collect()
}

fn bit_part(b: &DMatrix<f64>) -> f64 {
    let r = b.nrows();
    (1..r).flat_map(|j| (0..r).map(move |k| b[(j, k)])).sum()
}

fn phase_part(b: &DMatrix<f64>) -> f64 {
    let r = b.nrows();
    (0..r).flat_map(|j| (1..r).map(move |k| b[(j, k)])).sum()
}

fn ratio_from_spectra(sp: &[(DMatrix<f64>, f64)]) -> f64 {
    let mut worst: f64 = 0.0;
    for (b, _) in sp {
        let (e, f) = (bit_part(b), phase_part(b));
        if e > 1e-12 {
            worst = worst.max(f / e);
        } else if f > 1e-12 {
            return f64::INFINITY;
        }
    }
    worst
}

/// Minimum hashing rate over family members with error rate `eps`, given unnormalized
/// vertex spectra. Mixtures are taken in the normalized-spectrum picture, where the
/// error constraint is linear and the entropy concave.
fn worst_hashing(sp: &[(DMatrix<f64>, f64)], eps: f64, r: usize) -> f64 {
    let pts: Vec<(Vec<f64>, f64)> = sp
        .iter()
        .filter(|(_, t)| *t > 1e-12)
        .map(|(b, t)| {
            let v: Vec<f64> = b.iter().map(|x| x / t).collect();
            let e = bit_part(&DMatrix::from_column_slice(r, r, &v));
            (v, e)
        })
        .collect();
    let mut level = Vec::new();
    for i in 0..pts.len() {
        if (pts[i].1 - eps).abs() < 1e-14 {
            level.push(pts[i].0.clone());
        }
        for j in i + 1..pts.len() {
            let (ei, ej) = (pts[i].1, pts[j].1);
            if (ei - eps) * (ej - eps) < 0.0 {
                let t = (eps - ei) / (ej - ei);
                level.push(pts[i].0.iter().zip(&pts[j].0).map(|(a, b)| a + t * (b - a)).collect());
            }
        }
    }
    if level.is_empty() {
        return f64::NAN;
    }
    1.0 - max_entropy_hull(&level)
}

/// Frank–Wolfe maximization of the Shannon entropy over the convex hull of `pts`.
fn max_entropy_hull(pts: &[Vec<f64>]) -> f64 {
    let n = pts[0].len();
    let h = |x: &[f64]| shannon_entropy(x.iter().map(|v| v.max(0.0)));
    if pts.len() == 1 {
        return h(&pts[0]);
    }
    let mut x: Vec<f64> = (0..n).map(|i| pts.iter().map(|p| p[i]).sum::<f64>() / pts.len() as f64).collect();
    for _ in 0..300 {
        let grad: Vec<f64> = x.iter().map(|&v| -(v.max(1e-300).log2()) - 1.0 / std::f64::consts::LN_2).collect();
        let dot = |p: &[f64]| p.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>();
        let target = pts.iter().max_by(|a, b| dot(a).total_cmp(&dot(b))).unwrap();
        if dot(target) - dot(&x) < 1e-13 {
            break;
        }
        // golden-section line search on [0, 1]
        let line = |t: f64| h(&x.iter().zip(target).map(|(a, b)| a + t * (b - a)).collect::<Vec<_>>());
        let (mut a, mut b) = (0.0, 1.0);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if line(c) > line(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let t = 0.5 * (a + b);
        x = x.iter().zip(target).map(|(a, b)| a + t * (b - a)).collect();
    }
    h(&x)
}

/// Root of `1 − h₂(e) − h₂(c·e)` on `(0, 1/(2c))`.
pub fn css_threshold_for(c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Numerical(format!("e_phase/e_bit coefficient {c} admits no threshold")));
    }
    let hi = (0.5 / c).min(0.5);
    bisect(|e| css_rate(e, (c * e).min(0.5)), 0.0, hi, 1e-12)
}

/// `(d·F_e + 1)/(d + 1)` with `F_e = ⟨Φ|J|Φ⟩ = 1 − p + p/d²` for the depolarizing channel.
pub fn average_fidelity(d: usize, p: f64) -> f64 {
    let d = d as f64;
    let fe = 1.0 - p + p / (d * d);
    (d * fe + 1.0) / (d + 1.0)
}

pub fn entanglement_fidelity(d: usize, p: f64) -> f64 {
    let d = d as f64;
    1.0 - p + p / (d * d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientSource {
    /// The exact coefficient stored with the protocol.
    Registered,
    /// The optimized worst-case ratio over the channel family.
    Computed,
}

#[derive(Clone, Debug)]
pub struct OrbitRatio {
    pub orbit: usize,
    pub ratio: f64,
    pub psi: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PhaseRelation {
    pub coefficient: f64,
    pub worst_orbit: usize,
    pub per_orbit: Vec<OrbitRatio>,
}

#[derive(Clone, Debug)]
pub struct ThresholdResult {
    pub protocol: String,
    pub bound: Bound,
    pub epsilon_star: f64,
    pub p_star: f64,
    pub fidelity_star: f64,
    pub binding_orbit: usize,
    pub psi: Vec<f64>,
    pub bob_phases: Vec<f64>,
    pub css_coefficient: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Summary {
    pub protocol: String,
    pub n: usize,
    pub d: usize,
    pub r: usize,
    pub group_order: usize,
    pub aut_order: usize,
    pub t_size: usize,
    pub orbit_count: usize,
    pub key_orbit_count: usize,
    pub fixed_space_dim: usize,
    pub transitive: bool,
}

/// `(1⊗E)(|Φ⟩⟨Φ|)` for a Kraus list.
fn physical_output(kraus: &[CMat], d: usize) -> CMat {
    let phi = channels::phi_projector(d);
    let id = CMat::identity(d, d);
    kraus.iter().fold(CMat::zeros(d * d, d * d), |acc, k| {
        let kk = linops::kron(&id, k);
        acc + &kk * &phi * kk.adjoint()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_edges() {
        assert!((h2(0.5) - 1.0).abs() < 1e-15);
        assert_eq!(h2(0.0), 0.0);
        let uniform = BellSpectrum { b: DMatrix::from_element(2, 2, 0.25), psi: vec![0.0; 2] };
        assert!((hashing_rate(&uniform) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn bell_basis_is_orthonormal() {
        let psi = [0.3, 1.1, -0.4];
        let r = 3;
        for a in 0..r * r {
            for b in 0..r * r {
                let u = bell_vector(a / r, a % r, &psi, r);
                let v = bell_vector(b / r, b % r, &psi, r);
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((u.dotc(&v).norm() - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn phi_has_unit_b00() {
        let phi = channels::phi_projector(2);
        let s = bell_spectrum(&phi, &[0.0, 0.0]);
        assert!((s.get(0, 0) - 1.0).abs() < 1e-15);
        assert!(error_rate(&s).abs() < 1e-15);
    }

    #[test]
    fn css_symmetric_root() {
        let e = css_threshold_for(1.0).unwrap();
        assert!((e - 0.110028).abs() < 1e-5);
    }

    #[test]
    fn bisect_reports_missing_sign_change() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn grid_search_finds_minimum() {
        let (x, v) = optimize_angles(1, |a| (a[0] - 2.0).powi(2));
        assert!((x[0] - 2.0).abs() < 1e-5 && v < 1e-10);
    }

    #[test]
    fn entropy_hull_prefers_uniform_mixture() {
        let pts = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!((max_entropy_hull(&pts) - 1.0).abs() < 1e-9);
    }
}
