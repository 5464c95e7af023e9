//! Simulated annealing over configuration space.
//!
//! The chain mixes global proposals (a fresh connector graph) with local
//! ones (a single site re-drawn) and accepts by the Metropolis rule under
//! geometric cooling. All randomness comes from [`ChaCha8Rng`] seeded with
//! `seed_from_u64`, so a run is reproducible bit for bit.

mod space;

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::concept::ConceptId;
use crate::error::{Error, Result};
use crate::pattern::{config_energy, AssertionStrength, Configuration};

pub use space::{Candidate, SearchSpace, State, GLOBAL_RETRIES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealSchedule {
    pub t_initial: f64,
    pub cooling: f64,
    pub steps_per_temp: usize,
    pub min_temp: f64,
    pub max_iters: usize,
    pub global_jump_prob: f64,
    /// Independent chains run one after another and merged by energy.
    pub restarts: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            t_initial: 2.0,
            cooling: 0.95,
            steps_per_temp: 50,
            min_temp: 0.01,
            max_iters: 20_000,
            global_jump_prob: 0.2,
            restarts: 4,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_temp > 0.0
            && self.t_initial.is_finite()
            && self.t_initial > self.min_temp
            && self.cooling > 0.0
            && self.cooling < 1.0
            && self.steps_per_temp > 0
            && self.restarts > 0
            && (0.0..=1.0).contains(&self.global_jump_prob);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid annealing schedule {self:?}")))
        }
    }
}

/// Metropolis acceptance. Downhill moves never touch the generator.
pub fn accept<R: Rng + ?Sized>(delta_e: f64, temperature: f64, rng: &mut R) -> bool {
    if delta_e.is_nan() {
        return false;
    }
    if delta_e <= 0.0 {
        return true;
    }
    if temperature.is_nan() || temperature <= 0.0 {
        return false;
    }
    rng.gen::<f64>() < (-delta_e / temperature).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpretation {
    pub configuration: Configuration,
    pub noun: ConceptId,
    pub verb: ConceptId,
    pub energy: f64,
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct AnnealOutcome {
    /// Distinct `(noun, verb)` interpretations, lowest energy first.
    pub interpretations: Vec<Interpretation>,
    /// Best energy seen after each iteration.
    pub best_trace: Vec<f64>,
    pub iterations: usize,
}

struct Visit {
    energy: f64,
    state: State,
}

/// Seed of restart `chain`; the first chain uses `seed` itself.
fn chain_seed(seed: u64, chain: usize) -> u64 {
    seed ^ (chain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs `schedule.restarts` annealing chains and returns every distinct
/// interpretation they evaluated, keeping the lowest-energy configuration
/// per `(noun, verb)`.
pub fn anneal<S: AssertionStrength + ?Sized>(
    space: &SearchSpace<'_, S>,
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<AnnealOutcome> {
    schedule.validate()?;
    let mut cache: HashMap<State, f64> = HashMap::new();
    let mut energy_of = |state: &State| -> Result<f64> {
        if let Some(&e) = cache.get(state) {
            return Ok(e);
        }
        let e = space.energy(state)?;
        cache.insert(state.clone(), e);
        Ok(e)
    };
    let mut visits: BTreeMap<(ConceptId, ConceptId), Visit> = BTreeMap::new();
    let mut record = |state: &State, energy: f64| {
        let key = space.labels(state);
        match visits.get(&key) {
            Some(v) if v.energy <= energy => {}
            _ => {
                visits.insert(
                    key,
                    Visit {
                        energy,
                        state: state.clone(),
                    },
                );
            }
        }
    };

    let mut best = f64::INFINITY;
    let mut best_trace = Vec::new();
    let mut iterations = 0;
    for chain in 0..schedule.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(chain_seed(seed, chain));
        let mut current = space
            .global_proposal(None, &mut rng)
            .ok_or_else(|| Error::Structure("no connection type yields a valid configuration".into()))?;
        let mut current_e = energy_of(&current)?;
        record(&current, current_e);
        best = best.min(current_e);

        let mut steps = 0;
        let mut temperature = schedule.t_initial;
        'cooling: while temperature >= schedule.min_temp {
            for _ in 0..schedule.steps_per_temp {
                if steps >= schedule.max_iters {
                    break 'cooling;
                }
                steps += 1;
                let proposal = if rng.gen::<f64>() < schedule.global_jump_prob {
                    space.global_proposal(Some(&current), &mut rng).unwrap_or_else(|| current.clone())
                } else {
                    space.local_proposal(&current, &mut rng)
                };
                match energy_of(&proposal) {
                    Ok(e) => {
                        record(&proposal, e);
                        if accept(e - current_e, temperature, &mut rng) {
                            current = proposal;
                            current_e = e;
                        }
                        best = best.min(e);
                    }
                    Err(err) => log::debug!("rejected proposal: {err}"),
                }
                best_trace.push(best);
            }
            temperature *= schedule.cooling;
        }
        iterations += steps;
    }

    let mut ranked: Vec<((ConceptId, ConceptId), Visit)> = visits.into_iter().collect();
    ranked.sort_by(|a, b| a.1.energy.total_cmp(&b.1.energy).then_with(|| a.0.cmp(&b.0)));
    let interpretations = ranked
        .into_iter()
        .enumerate()
        .map(|(rank, ((noun, verb), visit))| {
            let mut configuration = space.configuration(&visit.state)?;
            configuration.set_cached_energy(visit.energy);
            Ok(Interpretation {
                configuration,
                noun,
                verb,
                energy: visit.energy,
                rank,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AnnealOutcome {
        interpretations,
        best_trace,
        iterations,
    })
}

/// Empirical state frequencies of a fixed-temperature Metropolis chain
/// whose proposal picks one of the other states uniformly.
pub fn sample_boltzmann(energies: &[f64], n_samples: usize, temperature: f64, seed: u64) -> Vec<f64> {
    let n = energies.len();
    if n == 0 {
        return Vec::new();
    }
    let mut counts = vec![0usize; n];
    if n == 1 || n_samples == 0 {
        counts[0] = n_samples;
        return counts.iter().map(|&c| if n_samples == 0 { 0.0 } else { c as f64 / n_samples as f64 }).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = rng.gen_range(0..n);
    for _ in 0..n_samples {
        let mut next = rng.gen_range(0..n - 1);
        if next >= current {
            next += 1;
        }
        if accept(energies[next] - energies[current], temperature, &mut rng) {
            current = next;
        }
        counts[current] += 1;
    }
    counts.iter().map(|&c| c as f64 / n_samples as f64).collect()
}

/// [`sample_boltzmann`] over the energies of an enumerated ensemble.
pub fn sample_ensemble<S: AssertionStrength + ?Sized>(
    ensemble: &[Configuration],
    strength: &S,
    n_samples: usize,
    temperature: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let energies = ensemble
        .iter()
        .map(|c| config_energy(c, strength))
        .collect::<Result<Vec<_>>>()?;
    Ok(sample_boltzmann(&energies, n_samples, temperature, seed))
}
