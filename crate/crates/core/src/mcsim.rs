//! Monte Carlo simulation of prepare, measure, announce and decode.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels;
use crate::decoding::{self, DecodingScheme};
use crate::ensembles::{self, ProtocolSpec};
use crate::error::{Error, Result};
use crate::keyrate::{self, BellSpectrum};
use crate::linops::CMat;

pub const RNG_NAME: &str = "ChaCha8 (rand_chacha 0.9), stream = chunk index";
const CHUNK: u64 = 1 << 16;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SimConfig {
    pub protocol: String,
    /// Depolarizing parameter.
    pub p: f64,
    pub rounds: u64,
    pub seed: u64,
    pub shuffle: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SimStats {
    pub rounds: u64,
    pub sift_successes: u64,
    pub key_length: u64,
    pub mismatches: u64,
    pub epsilon: f64,
    pub epsilon_stderr: f64,
    pub success_probability: f64,
    pub success_stderr: f64,
    /// Counts of (signal, outcome) over all rounds.
    pub joint_counts: Vec<Vec<u64>>,
    pub rng: String,
    #[serde(skip)]
    pub alice_key: Vec<u8>,
    #[serde(skip)]
    pub bob_key: Vec<u8>,
}

/// Everything a round needs, tabulated once: outcome distributions for each signal and
/// Kraus branch, and Bob's compatible partners per (Alice function, outcome).
struct Tables {
    n: usize,
    kraus_cdf: Vec<Vec<f64>>,
    outcome_cdf: Vec<Vec<Vec<f64>>>,
    functions_of: Vec<Vec<usize>>,
    partners: Vec<Vec<Vec<usize>>>,
    scheme: DecodingScheme,
}

fn cdf(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    w.iter()
        .map(|x| {
            acc += x / total;
            acc
        })
        .collect()
}

fn draw(rng: &mut ChaCha8Rng, cdf: &[f64]) -> usize {
    let u: f64 = rng.random();
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

fn tables(spec: &ProtocolSpec, kraus: &[CMat]) -> Result<Tables> {
    let scheme = decoding::build_scheme(spec)?;
    let n = spec.n;
    let m = spec.measurement.len();
    let mut kraus_cdf = Vec::with_capacity(n);
    let mut outcome_cdf = Vec::with_capacity(n);
    for xi in &spec.ensemble.states {
        let xi = xi.normalize();
        let outs: Vec<_> = kraus.iter().map(|k| k * &xi).collect();
        kraus_cdf.push(cdf(&outs.iter().map(|v| v.norm_squared()).collect::<Vec<_>>()));
        outcome_cdf.push(
            outs.iter()
                .map(|v| {
                    let w: Vec<f64> = spec.measurement.elements.iter().map(|e| e.dotc(v).norm_sqr()).collect();
                    if w.iter().sum::<f64>() > 0.0 {
                        cdf(&w)
                    } else {
                        vec![1.0; m]
                    }
                })
                .collect(),
        );
    }
    let functions_of = (0..n).map(|j| (0..scheme.alice.len()).filter(|&s| scheme.alice[s].contains(&j)).collect()).collect();
    let by_alice = scheme.partners();
    let partners = (0..scheme.alice.len())
        .map(|s| {
            (0..m)
                .map(|k| by_alice[s].iter().map(|&i| scheme.allowed[i].1).filter(|&t| scheme.bob[t].contains(&k)).collect())
                .collect()
        })
        .collect();
    Ok(Tables { n, kraus_cdf, outcome_cdf, functions_of, partners, scheme })
}

fn kraus_for(spec: &ProtocolSpec, p: f64) -> Result<Vec<CMat>> {
    channels::depolarizing_channel(spec.d, p)?.kraus_ops()
}

struct ChunkOut {
    joint: Vec<Vec<u64>>,
    letters: Vec<(u8, u8)>,
}

fn run_chunk(t: &Tables, m: usize, seed: u64, chunk: u64, rounds: u64) -> ChunkOut {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let mut joint = vec![vec![0u64; m]; t.n];
    let mut letters = Vec::new();
    for _ in 0..rounds {
        let j = rng.random_range(0..t.n);
        let q = draw(&mut rng, &t.kraus_cdf[j]);
        let k = draw(&mut rng, &t.outcome_cdf[j][q]);
        joint[j][k] += 1;
        let funcs = &t.functions_of[j];
        if funcs.is_empty() {
            continue;
        }
        let s = funcs[rng.random_range(0..funcs.len())];
        let ts = &t.partners[s][k];
        if ts.is_empty() {
            continue;
        }
        let bt = ts[rng.random_range(0..ts.len())];
        let a = t.scheme.alice[s].iter().position(|&x| x == j).unwrap() as u8;
        let b = t.scheme.bob[bt].iter().position(|&x| x == k).unwrap() as u8;
        letters.push((a, b));
    }
    ChunkOut { joint, letters }
}

/// Runs the protocol round by round. Rounds are split into fixed-size chunks, each with
/// its own ChaCha stream, so the result does not depend on how chunks are scheduled.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimStats> {
    if cfg.rounds == 0 {
        return Err(Error::Invalid("rounds must be at least 1".into()));
    }
    let spec = ensembles::build_protocol(&cfg.protocol)?;
    let kraus = kraus_for(&spec, cfg.p)?;
    let t = tables(&spec, &kraus)?;
    let m = spec.measurement.len();
    let chunks = cfg.rounds.div_ceil(CHUNK);
    let workers = std::thread::available_parallelism().map(|x| x.get()).unwrap_or(1).min(chunks as usize).max(1);
    let mut outs: Vec<Option<ChunkOut>> = (0..chunks).map(|_| None).collect();
    std::thread::scope(|sc| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let t = &t;
                sc.spawn(move || {
                    (w as u64..chunks)
                        .step_by(workers)
                        .map(|c| {
                            let len = CHUNK.min(cfg.rounds - c * CHUNK);
                            (c, run_chunk(t, m, cfg.seed, c, len))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (c, o) in h.join().expect("simulation worker panicked") {
                outs[c as usize] = Some(o);
            }
        }
    });
    let mut joint = vec![vec![0u64; m]; spec.n];
    let mut letters = Vec::new();
    for o in outs.into_iter().flatten() {
        for (row, add) in joint.iter_mut().zip(&o.joint) {
            for (x, y) in row.iter_mut().zip(add) {
                *x += y;
            }
        }
        letters.extend(o.letters);
    }
    if cfg.shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        letters.shuffle(&mut rng);
    }
    let key_length = letters.len() as u64;
    let mismatches = letters.iter().filter(|(a, b)| a != b).count() as u64;
    let eps = if key_length > 0 { mismatches as f64 / key_length as f64 } else { 0.0 };
    let succ = key_length as f64 / cfg.rounds as f64;
    Ok(SimStats {
        rounds: cfg.rounds,
        sift_successes: key_length,
        key_length,
        mismatches,
        epsilon: eps,
        epsilon_stderr: binomial_stderr(eps, key_length),
        success_probability: succ,
        success_stderr: binomial_stderr(succ, cfg.rounds),
        joint_counts: joint,
        rng: RNG_NAME.into(),
        alice_key: letters.iter().map(|x| x.0).collect(),
        bob_key: letters.iter().map(|x| x.1).collect(),
    })
}

pub fn binomial_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Exact expectation of the simulated quantities, summed over every branch of a round.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct AnalyticStats {
    pub epsilon: f64,
    pub success_probability: f64,
}

pub fn analytic_stats(protocol: &str, p: f64) -> Result<AnalyticStats> {
    let spec = ensembles::build_protocol(protocol)?;
    let kraus = kraus_for(&spec, p)?;
    let t = tables(&spec, &kraus)?;
    let m = spec.measurement.len();
    // P(k | j) through the channel
    let mut pk = vec![vec![0.0; m]; spec.n];
    for (j, xi) in spec.ensemble.states.iter().enumerate() {
        let xi = xi.normalize();
        for k in &kraus {
            let v = k * &xi;
            for (o, e) in spec.measurement.elements.iter().enumerate() {
                pk[j][o] += e.dotc(&v).norm_sqr();
            }
        }
    }
    // orthogonality holds only to rounding; exact zeros keep the noiseless error exact
    for row in &mut pk {
        for x in row.iter_mut().filter(|x| **x < 1e-14) {
            *x = 0.0;
        }
    }
    let (mut key, mut err) = (0.0, 0.0);
    for j in 0..spec.n {
        let funcs = &t.functions_of[j];
        for &s in funcs {
            for k in 0..m {
                let ts = &t.partners[s][k];
                if ts.is_empty() {
                    continue;
                }
                let w = pk[j][k] / (spec.n * funcs.len() * ts.len()) as f64;
                let a = t.scheme.alice[s].iter().position(|&x| x == j).unwrap();
                for &bt in ts {
                    key += w;
                    if t.scheme.bob[bt].iter().position(|&x| x == k).unwrap() != a {
                        err += w;
                    }
                }
            }
        }
    }
    Ok(AnalyticStats { epsilon: err / key, success_probability: key })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpectrumCheck {
    pub empirical: f64,
    pub analytic: f64,
    pub stderr: f64,
    pub z: f64,
}

impl SpectrumCheck {
    pub fn within(&self, sigmas: f64) -> bool {
        self.z.abs() <= sigmas
    }
}

/// Compares the simulated error rate with the one implied by an analytic spectrum. The
/// standard error uses the analytic value, so a noiseless spectrum demands zero errors.
pub fn empirical_spectrum_check(cfg: &SimConfig, analytic: &BellSpectrum) -> Result<SpectrumCheck> {
    let stats = run_simulation(cfg)?;
    Ok(compare(&stats, keyrate::error_rate(analytic)))
}

pub fn compare(stats: &SimStats, analytic_eps: f64) -> SpectrumCheck {
    // spectra carry rounding noise of this order
    let analytic_eps = if analytic_eps.abs() < 1e-12 { 0.0 } else { analytic_eps };
    let se = binomial_stderr(analytic_eps.clamp(0.0, 1.0), stats.key_length);
    let diff = stats.epsilon - analytic_eps;
    let z = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    SpectrumCheck { empirical: stats.epsilon, analytic: analytic_eps, stderr: se, z }
}
