//! Deterministic evolution of the susceptibility density of the susceptible pool.
//!
//! At step `n` the next infected individual is drawn proportionally to
//! susceptibility, so an atom survives the step with probability
//! `1 - s / T_n`, where `T_n = remaining * sum(w * s)` is the mean-field total
//! susceptibility of the pool. Reweighting by that survival probability and
//! renormalizing gives the density at step `n + 1`. The effective reproduction
//! number is `R(n) = remaining * sum(w * s * phi)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile::SpreadingProfile;

/// Weights below this fraction of the total are dropped to zero.
const UNDERFLOW_FLOOR: f64 = 1e-290;
const RENORMALIZE_EVERY: u64 = 256;

/// Susceptibility density of the susceptible pool at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    step: u64,
    weights: Vec<f64>,
    remaining: u64,
}

impl PopulationState {
    /// The fully susceptible population at step 0.
    pub fn initial(profile: &SpreadingProfile) -> Self {
        PopulationState {
            step: 0,
            weights: profile.atoms().iter().map(|a| a.w).collect(),
            remaining: profile.n0(),
        }
    }

    /// Builds a state from raw weights; they are normalized here.
    pub fn from_weights(step: u64, weights: Vec<f64>, remaining: u64) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("weights", "must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("weights", "must carry positive mass"));
        }
        Ok(PopulationState {
            step,
            weights: weights.into_iter().map(|w| w / total).collect(),
            remaining,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    pub(crate) fn with_remaining(&self, remaining: u64) -> Self {
        PopulationState {
            remaining,
            ..self.clone()
        }
    }

    pub fn mean_susceptibility(&self, profile: &SpreadingProfile) -> f64 {
        self.weights.iter().zip(profile.atoms()).map(|(w, a)| w * a.s).sum()
    }

    fn check_grid(&self, profile: &SpreadingProfile) -> Result<()> {
        if self.weights.len() != profile.len() {
            return Err(Error::GridMismatch {
                left: self.weights.len(),
                right: profile.len(),
            });
        }
        Ok(())
    }
}

/// Advances the density by one infection.
pub fn step_density(state: &PopulationState, profile: &SpreadingProfile) -> Result<PopulationState> {
    state.check_grid(profile)?;
    if state.remaining < 2 {
        return Err(Error::PoolExhausted {
            remaining: state.remaining,
        });
    }
    let total = state.remaining as f64 * state.mean_susceptibility(profile);
    let mut next = Vec::with_capacity(state.weights.len());
    for (w, atom) in state.weights.iter().zip(profile.atoms()) {
        let survive = 1.0 - atom.s / total;
        if *w > 0.0 && survive < 0.0 {
            return Err(Error::DominatingNode {
                step: state.step,
                s: atom.s,
                total,
            });
        }
        next.push(w * survive.max(0.0));
    }
    let norm: f64 = next.iter().sum();
    if !(norm > 0.0) {
        return Err(Error::PoolExhausted {
            remaining: state.remaining,
        });
    }
    for w in &mut next {
        *w /= norm;
    }
    Ok(PopulationState {
        step: state.step + 1,
        weights: next,
        remaining: state.remaining - 1,
    })
}

/// `R(n) = remaining * sum(w * s * phi)`.
pub fn reproduction_number(state: &PopulationState, profile: &SpreadingProfile) -> f64 {
    let moment: f64 = state
        .weights
        .iter()
        .zip(profile.atoms())
        .map(|(w, a)| w * a.s * a.phi)
        .sum();
    state.remaining as f64 * moment
}

/// In-place propagator used for long trajectories.
///
/// Weights are kept unnormalized together with their running moments, so one
/// step is a single fused pass over the atoms.
#[derive(Debug, Clone)]
pub struct DensityWalker<'a> {
    profile: &'a SpreadingProfile,
    s: Vec<f64>,
    sphi: Vec<f64>,
    weights: Vec<f64>,
    mass: f64,
    first: f64,
    second: f64,
    /// Index of the largest-`s` atom that still carries mass.
    top: usize,
    step: u64,
    remaining: u64,
}

impl<'a> DensityWalker<'a> {
    pub fn new(profile: &'a SpreadingProfile) -> Self {
        Self::from_state(profile, &PopulationState::initial(profile)).expect("initial state matches its profile")
    }

    pub fn from_state(profile: &'a SpreadingProfile, state: &PopulationState) -> Result<Self> {
        state.check_grid(profile)?;
        let s: Vec<f64> = profile.atoms().iter().map(|a| a.s).collect();
        let sphi = profile.atoms().iter().map(|a| a.s * a.phi).collect();
        let mut walker = DensityWalker {
            profile,
            s,
            sphi,
            weights: state.weights.clone(),
            mass: 0.0,
            first: 0.0,
            second: 0.0,
            top: 0,
            step: state.step,
            remaining: state.remaining,
        };
        walker.refresh();
        Ok(walker)
    }

    fn refresh(&mut self) {
        let (mass, first, second) = moments(&self.weights, &self.s, &self.sphi);
        self.mass = mass;
        self.first = first;
        self.second = second;
        self.top = self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    pub fn reproduction_number(&self) -> f64 {
        self.reproduction_number_with(self.remaining)
    }

    /// `R` this walker would report with `remaining` susceptibles left.
    pub(crate) fn reproduction_number_with(&self, remaining: u64) -> f64 {
        remaining as f64 * self.second / self.mass
    }

    /// Single-atom profile: the density never moves.
    pub(crate) fn is_point_mass(&self) -> bool {
        self.weights.len() == 1
    }

    pub fn mean_susceptibility(&self) -> f64 {
        self.first / self.mass
    }

    /// Normalized snapshot of the current density.
    pub fn state(&self) -> PopulationState {
        PopulationState {
            step: self.step,
            weights: self.weights.iter().map(|w| w / self.mass).collect(),
            remaining: self.remaining,
        }
    }

    /// Removes `count` susceptibles uniformly at random: density unchanged.
    pub fn remove_uniform(&mut self, count: u64) -> Result<()> {
        if count >= self.remaining {
            return Err(Error::TooManyVaccines {
                requested: count,
                available: self.remaining.saturating_sub(1),
            });
        }
        self.remaining -= count;
        Ok(())
    }

    pub fn advance(&mut self) -> Result<()> {
        if self.remaining < 2 {
            return Err(Error::PoolExhausted {
                remaining: self.remaining,
            });
        }
        let total = self.remaining as f64 * self.first / self.mass;
        if self.s[self.top] > total {
            return Err(Error::DominatingNode {
                step: self.step,
                s: self.s[self.top],
                total,
            });
        }
        if self.weights.len() == 1 {
            // A point mass stays put.
            self.step += 1;
            self.remaining -= 1;
            return Ok(());
        }
        let inv_total = self.mass / (self.remaining as f64 * self.first);
        let (mass, first, second) = reweigh(&mut self.weights, &self.s, &self.sphi, inv_total);
        self.mass = mass;
        self.first = first;
        self.second = second;
        self.step += 1;
        self.remaining -= 1;

        if self.step.is_multiple_of(RENORMALIZE_EVERY) {
            let floor = UNDERFLOW_FLOOR;
            let scale = 1.0 / self.mass;
            for w in &mut self.weights {
                *w *= scale;
                if *w < floor {
                    *w = 0.0;
                }
            }
            self.refresh();
        }
        if !(self.mass > 0.0 && self.first > 0.0) {
            return Err(Error::PoolExhausted {
                remaining: self.remaining,
            });
        }
        Ok(())
    }

    pub fn profile(&self) -> &SpreadingProfile {
        self.profile
    }
}

const LANES: usize = 16;

fn lane_sum(x: &[f64; LANES]) -> f64 {
    let mut v = *x;
    let mut width = LANES;
    while width > 1 {
        width /= 2;
        for l in 0..width {
            v[l] += v[l + width];
        }
    }
    v[0]
}

fn moments(weights: &[f64], s: &[f64], sphi: &[f64]) -> (f64, f64, f64) {
    let mut m = [0.0; LANES];
    let mut a = [0.0; LANES];
    let mut b = [0.0; LANES];
    let chunks = weights.len() / LANES * LANES;
    for ((w, s), p) in weights[..chunks]
        .chunks_exact(LANES)
        .zip(s[..chunks].chunks_exact(LANES))
        .zip(sphi[..chunks].chunks_exact(LANES))
    {
        for l in 0..LANES {
            m[l] += w[l];
            a[l] += w[l] * s[l];
            b[l] += w[l] * p[l];
        }
    }
    let mut mass = lane_sum(&m);
    let mut first = lane_sum(&a);
    let mut second = lane_sum(&b);
    for i in chunks..weights.len() {
        mass += weights[i];
        first += weights[i] * s[i];
        second += weights[i] * sphi[i];
    }
    (mass, first, second)
}

/// `w_i *= 1 - s_i * inv_total`, returning the new moments in the same pass.
///
/// The summation order is fixed by the lane layout, so the AVX2 build of the
/// same body returns bit-identical results.
fn reweigh(weights: &mut [f64], s: &[f64], sphi: &[f64], inv_total: f64) -> (f64, f64, f64) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2.
        return unsafe { reweigh_avx2(weights, s, sphi, inv_total) };
    }
    reweigh_scalar(weights, s, sphi, inv_total)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn reweigh_avx2(weights: &mut [f64], s: &[f64], sphi: &[f64], inv_total: f64) -> (f64, f64, f64) {
    reweigh_scalar(weights, s, sphi, inv_total)
}

#[inline(always)]
fn reweigh_scalar(weights: &mut [f64], s: &[f64], sphi: &[f64], inv_total: f64) -> (f64, f64, f64) {
    let mut m = [0.0; LANES];
    let mut a = [0.0; LANES];
    let mut b = [0.0; LANES];
    let chunks = weights.len() / LANES * LANES;
    for ((w, s), p) in weights[..chunks]
        .chunks_exact_mut(LANES)
        .zip(s[..chunks].chunks_exact(LANES))
        .zip(sphi[..chunks].chunks_exact(LANES))
    {
        for l in 0..LANES {
            w[l] *= 1.0 - s[l] * inv_total;
            m[l] += w[l];
            a[l] += w[l] * s[l];
            b[l] += w[l] * p[l];
        }
    }
    let mut mass = lane_sum(&m);
    let mut first = lane_sum(&a);
    let mut second = lane_sum(&b);
    for i in chunks..weights.len() {
        weights[i] *= 1.0 - s[i] * inv_total;
        mass += weights[i];
        first += weights[i] * s[i];
        second += weights[i] * sphi[i];
    }
    (mass, first, second)
}

/// The `R(n)` sequence of one run, with its herd-immunity crossing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RTrajectory {
    pub n0: u64,
    pub values: Vec<f64>,
    pub remaining: Vec<u64>,
    pub mean_s: Vec<f64>,
    /// First step with `R(n) < 1`.
    pub hit_step: Option<u64>,
    pub hit_fraction: Option<f64>,
    /// `R(n) - R(n + 1)`.
    pub first_differences: Vec<f64>,
}

impl RTrajectory {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectoryOptions {
    /// Extra steps computed past the herd-immunity crossing.
    pub overshoot: u64,
    /// Hard cap on the number of steps.
    pub max_steps: Option<u64>,
}

/// Runs the density recursion from step 0 until `R` drops below 1 (plus the
/// overshoot) or the pool is exhausted.
pub fn r_trajectory(profile: &SpreadingProfile) -> Result<RTrajectory> {
    r_trajectory_with(profile, TrajectoryOptions::default())
}

pub fn r_trajectory_with(profile: &SpreadingProfile, options: TrajectoryOptions) -> Result<RTrajectory> {
    let mut walker = DensityWalker::new(profile);
    let mut values = Vec::new();
    let mut remaining = Vec::new();
    let mut mean_s = Vec::new();
    let mut hit_step = None;

    loop {
        let r = walker.reproduction_number();
        values.push(r);
        remaining.push(walker.remaining());
        mean_s.push(walker.mean_susceptibility());
        let n = walker.step();
        if hit_step.is_none() && r < 1.0 {
            hit_step = Some(n);
        }
        if let Some(hit) = hit_step {
            if n >= hit + options.overshoot {
                break;
            }
        }
        if options.max_steps.is_some_and(|cap| n >= cap) || walker.remaining() < 2 {
            break;
        }
        match walker.advance() {
            Ok(()) => {}
            // Past the crossing a failing step only truncates the overshoot.
            Err(_) if hit_step.is_some() => break,
            Err(e) => return Err(e),
        }
    }

    let first_differences = values.windows(2).map(|w| w[0] - w[1]).collect();
    Ok(RTrajectory {
        n0: profile.n0(),
        hit_fraction: hit_step.map(|h| h as f64 / profile.n0() as f64),
        values,
        remaining,
        mean_s,
        hit_step,
        first_differences,
    })
}

/// Relative error scale of the mean-field approximation at `state`: the
/// largest susceptibility still present over the pool total
/// `remaining * sum(w * s)`.
pub fn mean_field_error_scale(state: &PopulationState, profile: &SpreadingProfile) -> f64 {
    let atoms = profile.atoms();
    let mass: f64 = state.weights.iter().sum();
    let first: f64 = state.weights.iter().zip(atoms).map(|(w, a)| w * a.s).sum();
    let top = state
        .weights
        .iter()
        .zip(atoms)
        .filter(|(w, _)| **w > 0.0)
        .map(|(_, a)| a.s)
        .fold(0.0, f64::max);
    top * mass / (state.remaining as f64 * first)
}

/// Density snapshots at the requested steps (sorted, deduplicated).
pub fn states_at(profile: &SpreadingProfile, steps: &[u64]) -> Result<Vec<PopulationState>> {
    let mut wanted: Vec<u64> = steps.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    let mut walker = DensityWalker::new(profile);
    let mut out = Vec::with_capacity(wanted.len());
    for target in wanted {
        while walker.step() < target {
            walker.advance()?;
        }
        out.push(walker.state());
    }
    Ok(out)
}
