//! Exact stochastic simulation of the infection-indexed process, and an
//! exhaustive-enumeration oracle for small populations.
//!
//! Each step draws the next infected individual among the susceptibles with
//! probability proportional to its susceptibility. Instead of sampling the
//! secondary infections it would cause, a trace records their conditional
//! expectation `I(v) * sum_{u still susceptible} S(u)`, which has the same mean.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile::SpreadingProfile;
use crate::sampler::SumTree;

/// Steps between full re-summations of the live susceptibility total.
pub const RESYNC_EVERY: u64 = 1 << 16;

/// Largest population the enumeration oracle accepts.
pub const MAX_ENUMERATION_NODES: usize = 9;

const POPULATION_STREAM: u64 = 0;
const SIMULATION_STREAM: u64 = 1;
const REPLICA_BATCH: usize = 32;

/// Deterministic generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Node {
    pub s: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    nodes: Vec<Node>,
}

impl Population {
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::invalid("nodes", "population must be non-empty"));
        }
        for node in &nodes {
            if !(0.0..=1.0).contains(&node.s) || !(0.0..=1.0).contains(&node.phi) {
                return Err(Error::invalid(
                    "nodes",
                    format!("s and phi must lie in [0, 1], got {node:?}"),
                ));
            }
        }
        Ok(Population { nodes })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Population::new(pairs.iter().map(|&(s, phi)| Node { s, phi }).collect())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sum of susceptibility over all nodes.
    pub fn total_susceptibility(&self) -> f64 {
        self.nodes.iter().map(|n| n.s).sum()
    }

    /// Equal-mass explicit profile over these nodes, for the density engine.
    pub fn to_profile(&self) -> Result<SpreadingProfile> {
        use crate::profile::{Coupling, SpreadingAtom};
        let w = 1.0 / self.nodes.len() as f64;
        let atoms = self.nodes.iter().map(|n| SpreadingAtom::new(n.s, n.phi, w)).collect();
        SpreadingProfile::new(atoms, self.nodes.len() as u64, Coupling::Fixed)
    }
}

/// Draws `profile.n0()` individuals i.i.d. from the atom distribution.
pub fn draw_population(profile: &SpreadingProfile, seed: u64) -> Result<Population> {
    let n0 = usize::try_from(profile.n0()).map_err(|_| Error::invalid("n0", "too large"))?;
    let atoms = profile.atoms();
    let nodes = if atoms.len() == 1 {
        vec![
            Node {
                s: atoms[0].s,
                phi: atoms[0].phi
            };
            n0
        ]
    } else {
        let index =
            WeightedIndex::new(atoms.iter().map(|a| a.w)).map_err(|e| Error::invalid("atoms", e.to_string()))?;
        let mut rng = stream_rng(seed, POPULATION_STREAM);
        (0..n0)
            .map(|_| {
                let a = atoms[index.sample(&mut rng)];
                Node { s: a.s, phi: a.phi }
            })
            .collect()
    };
    Population::new(nodes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub seed: u64,
    pub infection_order: Vec<usize>,
    pub r_hat: Vec<f64>,
}

/// Simulates up to `max_steps` infections. Stops early if every remaining
/// susceptible has zero susceptibility.
pub fn simulate(pop: &Population, max_steps: usize, seed: u64) -> Result<SimulationTrace> {
    if max_steps > pop.len() {
        return Err(Error::invalid(
            "max_steps",
            format!("{max_steps} exceeds the population size {}", pop.len()),
        ));
    }
    let weights: Vec<f64> = pop.nodes.iter().map(|n| n.s).collect();
    let mut tree = SumTree::new(&weights);
    let mut alive: f64 = weights.iter().sum();
    let mut live = weights.iter().filter(|&&w| w > 0.0).count();
    let mut rng = stream_rng(seed, SIMULATION_STREAM);
    let mut infection_order = Vec::with_capacity(max_steps);
    let mut r_hat = Vec::with_capacity(max_steps);

    for step in 0..max_steps as u64 {
        let total = tree.total();
        if !(total > 0.0) {
            break;
        }
        let v = tree.find(rng.random::<f64>() * total);
        let node = pop.nodes[v];
        tree.set(v, 0.0);
        alive -= node.s;
        live -= 1;
        if live == 0 {
            alive = 0.0;
        } else if (step + 1) % RESYNC_EVERY == 0 {
            alive = (0..pop.len()).map(|i| tree.weight(i)).sum();
        }
        alive = alive.max(0.0);
        infection_order.push(v);
        r_hat.push(node.phi * alive);
    }
    Ok(SimulationTrace {
        seed,
        infection_order,
        r_hat,
    })
}

/// Pointwise Monte-Carlo mean and standard error of `r_hat`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RCurveEstimate {
    pub replicas: usize,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Each replica `i` draws a fresh population from `profile` (resized to `n0`)
/// and simulates it, both seeded by `base_seed + i`.
pub fn estimate_r_curve(
    profile: &SpreadingProfile,
    n0: u64,
    steps: usize,
    replicas: usize,
    base_seed: u64,
) -> Result<RCurveEstimate> {
    let profile = profile.with_n0(n0)?;
    estimate_with(steps, replicas, base_seed, |seed| {
        let pop = draw_population(&profile, seed)?;
        simulate(&pop, steps, seed)
    })
}

/// Replicas of the same fixed population, seeded by `base_seed + i`.
pub fn estimate_r_curve_population(
    pop: &Population,
    steps: usize,
    replicas: usize,
    base_seed: u64,
) -> Result<RCurveEstimate> {
    estimate_with(steps, replicas, base_seed, |seed| simulate(pop, steps, seed))
}

fn estimate_with<F>(steps: usize, replicas: usize, base_seed: u64, run: F) -> Result<RCurveEstimate>
where
    F: Fn(u64) -> Result<SimulationTrace> + Sync,
{
    if replicas < 2 {
        return Err(Error::invalid("replicas", format!("need at least 2, got {replicas}")));
    }
    let mut count = 0.0;
    let mut mean = vec![0.0; steps];
    let mut m2 = vec![0.0; steps];

    // Batches run in parallel; folding happens in replica order.
    let mut start = 0;
    while start < replicas {
        let end = (start + REPLICA_BATCH * rayon::current_num_threads()).min(replicas);
        let traces: Vec<Result<Vec<f64>>> = (start..end)
            .into_par_iter()
            .map(|i| run(base_seed.wrapping_add(i as u64)).map(|t| t.r_hat))
            .collect();
        for trace in traces {
            let r_hat = trace?;
            count += 1.0;
            for n in 0..steps {
                let x = r_hat.get(n).copied().unwrap_or(0.0);
                let delta = x - mean[n];
                mean[n] += delta / count;
                m2[n] += delta * (x - mean[n]);
            }
        }
        start = end;
    }

    let stderr = m2.iter().map(|m| (m / (count - 1.0) / count).sqrt()).collect();
    Ok(RCurveEstimate { replicas, mean, stderr })
}

/// Exact `R(n)` of a small population by enumerating every infection order.
pub fn brute_force_r(nodes: &[(f64, f64)], n: usize) -> Result<f64> {
    let curve = brute_force_curve(nodes)?;
    curve
        .get(n)
        .copied()
        .ok_or_else(|| Error::OutOfRange(format!("step {n} for {} nodes", nodes.len())))
}

/// Exact `R(0), ..., R(N - 1)`: the expectation of
/// `I(v_n) * sum_{u susceptible after v_n} S(u)`, each ordered prefix weighted
/// by its sequential probability `prod S(v_k) / sum_{remaining} S`.
pub fn brute_force_curve(nodes: &[(f64, f64)]) -> Result<Vec<f64>> {
    if nodes.len() > MAX_ENUMERATION_NODES {
        return Err(Error::TooManyNodes {
            count: nodes.len(),
            max: MAX_ENUMERATION_NODES,
        });
    }
    Population::from_pairs(nodes)?;
    let mut curve = vec![0.0; nodes.len()];
    enumerate(nodes, 0, 1.0, 0, &mut curve);
    Ok(curve)
}

fn enumerate(nodes: &[(f64, f64)], used: u32, prob: f64, depth: usize, curve: &mut [f64]) {
    let live = |mask: u32| -> f64 {
        nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) == 0)
            .map(|(_, &(s, _))| s)
            .sum()
    };
    let total = live(used);
    if !(total > 0.0) {
        return;
    }
    for (v, &(s, phi)) in nodes.iter().enumerate() {
        if used & (1 << v) != 0 || s == 0.0 {
            continue;
        }
        let p = prob * s / total;
        let next = used | (1 << v);
        curve[depth] += p * phi * live(next);
        if depth + 1 < nodes.len() {
            enumerate(nodes, next, p, depth + 1, curve);
        }
    }
}
