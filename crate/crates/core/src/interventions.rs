//! Vaccination, multi-region vaccine allocation and vaccination timing.
//!
//! Vaccinees are removed uniformly at random from the susceptible pool, which
//! leaves the susceptibility density unchanged and only shrinks the pool. The
//! cost of a region is the number of infections before `R` first drops below 1.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::density::{DensityWalker, PopulationState};
use crate::error::{Error, Result};
use crate::profile::SpreadingProfile;

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub profile: SpreadingProfile,
    pub n0: u64,
    pub r0: f64,
}

impl Region {
    pub fn new(name: impl Into<String>, profile: SpreadingProfile) -> Self {
        Region {
            name: name.into(),
            n0: profile.n0(),
            r0: profile.r0(),
            profile,
        }
    }

    /// Same `n0` and `R0`, no heterogeneity.
    pub fn homogeneous_surrogate(&self) -> Result<Region> {
        Ok(Region::new(self.name.clone(), self.profile.homogeneous_surrogate()?))
    }
}

/// Removes `count` susceptibles uniformly at random.
pub fn vaccinate(state: &PopulationState, count: u64) -> Result<PopulationState> {
    if count >= state.remaining() {
        return Err(Error::TooManyVaccines {
            requested: count,
            available: state.remaining().saturating_sub(1),
        });
    }
    Ok(state.with_remaining(state.remaining() - count))
}

/// Infections before the herd-immunity crossing when `vaccines` doses are
/// given at step `timing`. Vaccinees are not counted as infected. If `R` never
/// drops below 1 the count of infections until exhaustion is returned.
pub fn cost_of_region(region: &Region, vaccines: u64, timing: u64) -> Result<u64> {
    if vaccines >= region.n0 {
        return Err(Error::TooManyVaccines {
            requested: vaccines,
            available: region.n0.saturating_sub(1),
        });
    }
    let mut walker = DensityWalker::new(&region.profile);
    if walker.is_point_mass() {
        return point_mass_cost(&walker, vaccines, timing);
    }
    loop {
        let n = walker.step();
        if n == timing && vaccines > 0 {
            walker.remove_uniform(vaccines)?;
        }
        if walker.reproduction_number() < 1.0 || walker.remaining() < 2 {
            return Ok(n);
        }
        walker.advance()?;
    }
}

/// Closed form of the stepping loop above when `R` depends on the pool size
/// only: the stopping rule is monotone in `n`, so bisect it.
fn point_mass_cost(walker: &DensityWalker<'_>, vaccines: u64, timing: u64) -> Result<u64> {
    let n0 = walker.remaining();
    let stops = |remaining: u64| remaining < 2 || walker.reproduction_number_with(remaining) < 1.0;
    // First n in [lo, hi) with stops(pool - n), if any.
    let first_stop = |pool: u64, lo: u64, hi: u64| -> Option<u64> {
        let (mut a, mut b) = (lo, hi);
        while a < b {
            let mid = a + (b - a) / 2;
            if stops(pool.saturating_sub(mid)) {
                b = mid;
            } else {
                a = mid + 1;
            }
        }
        (a < hi).then_some(a)
    };
    if vaccines == 0 || timing >= n0 {
        return Ok(first_stop(n0, 0, n0).expect("pool runs out"));
    }
    if let Some(n) = first_stop(n0, 0, timing) {
        return Ok(n);
    }
    let left = n0 - timing;
    if vaccines >= left {
        return Err(Error::TooManyVaccines {
            requested: vaccines,
            available: left.saturating_sub(1),
        });
    }
    Ok(first_stop(n0 - vaccines, timing, n0).expect("pool runs out"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationMethod {
    Greedy,
    /// Fallback when the cost curves failed the convexity check.
    GridSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationPlan {
    pub names: Vec<String>,
    pub vaccines: Vec<u64>,
    pub total_supply: u64,
    pub granularity: u64,
    /// Infections before the crossing under the true profiles.
    pub predicted_infections: Vec<u64>,
    pub total_infections: u64,
    pub method: AllocationMethod,
    /// Second-difference check on every cost value the optimizer evaluated.
    pub convexity_verified: bool,
}

impl AllocationPlan {
    pub fn allocated(&self) -> u64 {
        self.vaccines.iter().sum()
    }
}

/// Default lattice step: a thousandth of the supply.
pub fn default_granularity(total_supply: u64) -> u64 {
    (total_supply / 1000).max(1)
}

/// Greedy marginal allocation against the true heterogeneous profiles.
pub fn allocate_accounting(regions: &[Region], total_supply: u64, granularity: u64) -> Result<AllocationPlan> {
    let (vaccines, method, verified) = optimize(regions, total_supply, granularity, 0)?;
    finish(regions, vaccines, total_supply, granularity, method, verified, 0)
}

/// Greedy allocation against homogeneous surrogates (same `n0` and `R0`),
/// then evaluated against the true profiles.
pub fn allocate_oblivious(regions: &[Region], total_supply: u64, granularity: u64) -> Result<AllocationPlan> {
    let surrogates = regions
        .iter()
        .map(Region::homogeneous_surrogate)
        .collect::<Result<Vec<_>>>()?;
    let (vaccines, method, verified) = optimize(&surrogates, total_supply, granularity, 0)?;
    finish(regions, vaccines, total_supply, granularity, method, verified, 0)
}

/// Same as [`allocate_accounting`] with doses administered at step `timing`.
pub fn allocate_accounting_at(
    regions: &[Region],
    total_supply: u64,
    granularity: u64,
    timing: u64,
) -> Result<AllocationPlan> {
    let (vaccines, method, verified) = optimize(regions, total_supply, granularity, timing)?;
    finish(regions, vaccines, total_supply, granularity, method, verified, timing)
}

/// Same as [`allocate_oblivious`] with doses administered at step `timing`.
pub fn allocate_oblivious_at(
    regions: &[Region],
    total_supply: u64,
    granularity: u64,
    timing: u64,
) -> Result<AllocationPlan> {
    let surrogates = regions
        .iter()
        .map(Region::homogeneous_surrogate)
        .collect::<Result<Vec<_>>>()?;
    let (vaccines, method, verified) = optimize(&surrogates, total_supply, granularity, timing)?;
    finish(regions, vaccines, total_supply, granularity, method, verified, timing)
}

fn finish(
    regions: &[Region],
    vaccines: Vec<u64>,
    total_supply: u64,
    granularity: u64,
    method: AllocationMethod,
    convexity_verified: bool,
    timing: u64,
) -> Result<AllocationPlan> {
    let predicted_infections = regions
        .par_iter()
        .zip(vaccines.par_iter())
        .map(|(region, &v)| cost_of_region(region, v, timing))
        .collect::<Result<Vec<_>>>()?;
    Ok(AllocationPlan {
        names: regions.iter().map(|r| r.name.clone()).collect(),
        total_infections: predicted_infections.iter().sum(),
        vaccines,
        total_supply,
        granularity,
        predicted_infections,
        method,
        convexity_verified,
    })
}

/// Memoized cost curve of one region.
struct CostCache<'a> {
    region: &'a Region,
    timing: u64,
    values: BTreeMap<u64, u64>,
}

impl CostCache<'_> {
    fn get(&self, v: u64) -> u64 {
        self.values[&v]
    }

    fn max_doses(&self) -> u64 {
        self.region.n0 - 1
    }
}

fn fill(caches: &mut [CostCache<'_>], wanted: &[(usize, u64)]) -> Result<()> {
    let missing: Vec<(usize, u64)> = wanted
        .iter()
        .copied()
        .filter(|(r, v)| !caches[*r].values.contains_key(v))
        .collect();
    let computed = missing
        .par_iter()
        .map(|&(r, v)| cost_of_region(caches[r].region, v, caches[r].timing))
        .collect::<Result<Vec<_>>>()?;
    for ((r, v), cost) in missing.into_iter().zip(computed) {
        caches[r].values.insert(v, cost);
    }
    Ok(())
}

fn optimize(
    regions: &[Region],
    total_supply: u64,
    granularity: u64,
    timing: u64,
) -> Result<(Vec<u64>, AllocationMethod, bool)> {
    if granularity < 1 {
        return Err(Error::invalid("granularity", "must be at least 1"));
    }
    if regions.is_empty() {
        return Err(Error::invalid("regions", "need at least one region"));
    }
    let mut caches: Vec<CostCache<'_>> = regions
        .iter()
        .map(|region| CostCache {
            region,
            timing,
            values: BTreeMap::new(),
        })
        .collect();

    let vaccines = greedy(&mut caches, total_supply, granularity)?;
    if caches.iter().all(|c| convex_on_evaluated(&c.values)) {
        return Ok((vaccines, AllocationMethod::Greedy, true));
    }
    let vaccines = grid_search(&mut caches, total_supply, granularity)?;
    Ok((vaccines, AllocationMethod::GridSearch, false))
}

fn greedy(caches: &mut [CostCache<'_>], total_supply: u64, granularity: u64) -> Result<Vec<u64>> {
    let mut vaccines = vec![0u64; caches.len()];
    let mut left = total_supply;
    let zero: Vec<(usize, u64)> = (0..caches.len()).map(|r| (r, 0)).collect();
    fill(caches, &zero)?;

    while left > 0 {
        let chunks: Vec<u64> = caches
            .iter()
            .zip(&vaccines)
            .map(|(c, &v)| granularity.min(left).min(c.max_doses() - v))
            .collect();
        let wanted: Vec<(usize, u64)> = chunks
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(r, &c)| (r, vaccines[r] + c))
            .collect();
        fill(caches, &wanted)?;

        let mut best: Option<(usize, f64)> = None;
        for (r, &chunk) in chunks.iter().enumerate() {
            if chunk == 0 {
                continue;
            }
            let now = caches[r].get(vaccines[r]) as f64;
            let after = caches[r].get(vaccines[r] + chunk) as f64;
            let gain = (now - after) / chunk as f64;
            let better = match best {
                None => true,
                // Ties go to the region holding fewer doses, then the lower index.
                Some((b, g)) => gain > g || (gain == g && vaccines[r] < vaccines[b]),
            };
            if better {
                best = Some((r, gain));
            }
        }
        match best {
            Some((r, gain)) if gain > 0.0 => {
                vaccines[r] += chunks[r];
                left -= chunks[r];
            }
            _ => break,
        }
    }
    Ok(vaccines)
}

/// Savings per dose must not increase between consecutive evaluated points,
/// up to the rounding of the integer crossing step (below 1 per value).
fn convex_on_evaluated(values: &BTreeMap<u64, u64>) -> bool {
    let points: Vec<(u64, u64)> = values.iter().map(|(&v, &c)| (v, c)).collect();
    points.windows(3).all(|w| {
        let (v0, c0) = w[0];
        let (v1, c1) = w[1];
        let (v2, c2) = w[2];
        let d0 = (v1 - v0) as f64;
        let d1 = (v2 - v1) as f64;
        let save0 = (c0 as f64 - c1 as f64) / d0;
        let save1 = (c1 as f64 - c2 as f64) / d1;
        save1 - save0 <= 1.0 / d0 + 1.0 / d1 + 1e-12
    })
}

/// Exact minimization over the granularity lattice by dynamic programming.
fn grid_search(caches: &mut [CostCache<'_>], total_supply: u64, granularity: u64) -> Result<Vec<u64>> {
    let lattice = |cache: &CostCache<'_>| -> Vec<u64> {
        let cap = total_supply.min(cache.max_doses());
        let mut points: Vec<u64> = (0..=cap / granularity).map(|j| j * granularity).collect();
        if !cap.is_multiple_of(granularity) {
            points.push(cap);
        }
        points
    };
    let lattices: Vec<Vec<u64>> = caches.iter().map(lattice).collect();
    let wanted: Vec<(usize, u64)> = lattices
        .iter()
        .enumerate()
        .flat_map(|(r, pts)| pts.iter().map(move |&v| (r, v)))
        .collect();
    fill(caches, &wanted)?;

    // best[used] = (total cost, choices) over the regions processed so far.
    let mut best: BTreeMap<u64, (u64, Vec<u64>)> = BTreeMap::new();
    best.insert(0, (0, Vec::new()));
    for (r, pts) in lattices.iter().enumerate() {
        let mut next: BTreeMap<u64, (u64, Vec<u64>)> = BTreeMap::new();
        for (&used, (cost, choice)) in &best {
            for &v in pts {
                if used + v > total_supply {
                    break;
                }
                let total = cost + caches[r].get(v);
                let entry = next.entry(used + v);
                let candidate = {
                    let mut c = choice.clone();
                    c.push(v);
                    (total, c)
                };
                entry
                    .and_modify(|e| {
                        if total < e.0 {
                            *e = candidate.clone();
                        }
                    })
                    .or_insert(candidate);
            }
        }
        best = next;
    }
    let (_, (_, choice)) = best
        .into_iter()
        .min_by(|a, b| a.1 .0.cmp(&b.1 .0).then(a.0.cmp(&b.0)))
        .expect("lattice contains the empty allocation");
    Ok(choice)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingSweep {
    pub vaccines: u64,
    pub timings: Vec<u64>,
    pub costs: Vec<u64>,
    pub non_decreasing: bool,
    /// `max(cost) - min(cost)` across timings.
    pub spread: u64,
}

/// Cost of administering the same doses at each timing.
pub fn timing_sweep(region: &Region, vaccines: u64, timings: &[u64]) -> Result<TimingSweep> {
    if timings.is_empty() {
        return Err(Error::invalid("timings", "need at least one timing"));
    }
    let costs = timings
        .par_iter()
        .map(|&t| cost_of_region(region, vaccines, t))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..timings.len()).collect();
    order.sort_by_key(|&i| timings[i]);
    let non_decreasing = order.windows(2).all(|w| costs[w[0]] <= costs[w[1]]);
    let spread = costs.iter().max().unwrap() - costs.iter().min().unwrap();
    Ok(TimingSweep {
        vaccines,
        timings: timings.to_vec(),
        costs,
        non_decreasing,
        spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::reproduction_number;
    use crate::profile::{build_profile, calibrate_r0, Correlation, ProfileSpec};

    fn homogeneous(n0: u64, r0: f64) -> Region {
        let p = calibrate_r0(&SpreadingProfile::homogeneous(0.5, 0.5, n0).unwrap(), r0).unwrap();
        Region::new("homogeneous", p)
    }

    fn gamma(k: f64, n0: u64) -> Region {
        let spec = ProfileSpec::gamma(k, Correlation::Equal, n0, 3.0).with_atom_count(200);
        Region::new(format!("gamma-{k}"), build_profile(&spec).unwrap())
    }

    #[test]
    fn vaccinate_zero_is_identity() {
        let r = gamma(0.5, 10_000);
        let s = PopulationState::initial(&r.profile);
        assert_eq!(vaccinate(&s, 0).unwrap(), s);
        assert!(vaccinate(&s, 10_000).is_err());
    }

    #[test]
    fn vaccinating_half_halves_r() {
        let h = homogeneous(1000, 3.0);
        let s = vaccinate(&PopulationState::initial(&h.profile), 500).unwrap();
        assert!((reproduction_number(&s, &h.profile) - 1.5).abs() < 1e-12);

        let g = gamma(0.1, 100_000);
        let s0 = PopulationState::initial(&g.profile);
        let s1 = vaccinate(&s0, 50_000).unwrap();
        let r0 = reproduction_number(&s0, &g.profile);
        assert!((reproduction_number(&s1, &g.profile) - r0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_costs() {
        let h = homogeneous(3000, 3.0);
        let c = cost_of_region(&h, 0, 0).unwrap();
        assert!(c.abs_diff(2000) <= 1, "{c}");
        assert!(cost_of_region(&h, 2000, 0).unwrap() <= 1);
        assert!(cost_of_region(&h, 3000, 0).is_err());
    }

    fn stepped_cost(region: &Region, vaccines: u64, timing: u64) -> Result<u64> {
        let mut walker = DensityWalker::new(&region.profile);
        loop {
            let n = walker.step();
            if n == timing && vaccines > 0 {
                walker.remove_uniform(vaccines)?;
            }
            if walker.reproduction_number() < 1.0 || walker.remaining() < 2 {
                return Ok(n);
            }
            walker.advance()?;
        }
    }

    #[test]
    fn point_mass_shortcut_matches_stepping() {
        for (n0, r0) in [(3000, 3.0), (1000, 0.5), (10, 1.0), (999, 2.7), (3, 1.5)] {
            let h = homogeneous(n0, r0);
            for v in [0, 1, n0 / 3, n0 / 2, n0 - 1] {
                for t in [0, 1, n0 / 4, n0 / 2, n0, n0 + 5] {
                    let fast = cost_of_region(&h, v, t);
                    let slow = stepped_cost(&h, v, t);
                    assert_eq!(fast.is_ok(), slow.is_ok(), "n0={n0} v={v} t={t}");
                    if let (Ok(a), Ok(b)) = (fast, slow) {
                        assert_eq!(a, b, "n0={n0} r0={r0} v={v} t={t}");
                    }
                }
            }
        }
    }

    #[test]
    fn cost_never_increases_with_doses() {
        let g = gamma(0.3, 20_000);
        let costs: Vec<u64> = (0..10).map(|j| cost_of_region(&g, j * 1000, 0).unwrap()).collect();
        assert!(costs.windows(2).all(|w| w[1] <= w[0]), "{costs:?}");
    }

    #[test]
    fn doses_after_crossing_are_unused() {
        let g = gamma(0.1, 20_000);
        let natural = cost_of_region(&g, 0, 0).unwrap();
        assert_eq!(cost_of_region(&g, 500, natural + 10).unwrap(), natural);
    }

    #[test]
    fn identical_regions_split_evenly() {
        for regions in [
            vec![homogeneous(5000, 3.0), homogeneous(5000, 3.0)],
            vec![gamma(0.5, 5000), gamma(0.5, 5000)],
        ] {
            let plan = allocate_accounting(&regions, 2000, 100).unwrap();
            assert_eq!(plan.allocated(), 2000);
            assert!(
                plan.vaccines[0].abs_diff(plan.vaccines[1]) <= 100,
                "{:?}",
                plan.vaccines
            );
            let plan = allocate_oblivious(&regions, 2000, 100).unwrap();
            assert!(
                plan.vaccines[0].abs_diff(plan.vaccines[1]) <= 100,
                "{:?}",
                plan.vaccines
            );
        }
    }

    #[test]
    fn empty_supply() {
        let regions = vec![homogeneous(3000, 3.0), gamma(0.1, 3000)];
        let plan = allocate_accounting(&regions, 0, 1).unwrap();
        assert_eq!(plan.vaccines, vec![0, 0]);
        assert_eq!(plan.predicted_infections[0], cost_of_region(&regions[0], 0, 0).unwrap());
        assert_eq!(plan.predicted_infections[1], cost_of_region(&regions[1], 0, 0).unwrap());
    }

    #[test]
    fn single_region_takes_everything() {
        let regions = vec![gamma(0.2, 10_000)];
        let a = allocate_accounting(&regions, 1000, 100).unwrap();
        let o = allocate_oblivious(&regions, 1000, 100).unwrap();
        assert_eq!(a.vaccines, vec![1000]);
        assert_eq!(a, o);
    }

    #[test]
    fn accounting_beats_oblivious() {
        let regions = vec![homogeneous(20_000, 3.0), gamma(0.1, 20_000)];
        let a = allocate_accounting(&regions, 10_000, 100).unwrap();
        let o = allocate_oblivious(&regions, 10_000, 100).unwrap();
        assert!(a.total_infections <= o.total_infections);
        assert!(a.vaccines[0] > a.vaccines[1]);
        assert!(a.convexity_verified);
    }

    #[test]
    fn grid_search_agrees_with_greedy_on_convex_curves() {
        let regions = vec![homogeneous(4000, 3.0), gamma(0.2, 4000)];
        let mut caches: Vec<CostCache<'_>> = regions
            .iter()
            .map(|region| CostCache {
                region,
                timing: 0,
                values: BTreeMap::new(),
            })
            .collect();
        let grid = grid_search(&mut caches, 2000, 200).unwrap();
        let plan = allocate_accounting(&regions, 2000, 200).unwrap();
        let grid_cost: u64 = grid
            .iter()
            .zip(&regions)
            .map(|(&v, r)| cost_of_region(r, v, 0).unwrap())
            .sum();
        assert!(
            plan.total_infections <= grid_cost + 2,
            "{} vs {grid_cost}",
            plan.total_infections
        );
    }

    #[test]
    fn convexity_check_tolerates_rounding_only() {
        let convex: BTreeMap<u64, u64> = [(0, 100), (10, 80), (20, 61), (30, 43)].into_iter().collect();
        assert!(convex_on_evaluated(&convex));
        let noisy: BTreeMap<u64, u64> = [(0, 100), (10, 90), (20, 81), (30, 71)].into_iter().collect();
        assert!(convex_on_evaluated(&noisy));
        let concave: BTreeMap<u64, u64> = [(0, 100), (10, 95), (20, 80), (30, 50)].into_iter().collect();
        assert!(!convex_on_evaluated(&concave));
    }

    #[test]
    fn timing_sweeps() {
        let h = homogeneous(6000, 3.0);
        let sweep = timing_sweep(&h, 600, &[0, 300, 600]).unwrap();
        assert!(sweep.non_decreasing, "{:?}", sweep.costs);
        let single = timing_sweep(&h, 600, &[0]).unwrap();
        assert!(single.non_decreasing);
        assert_eq!(single.spread, 0);
        assert!(timing_sweep(&h, 600, &[]).is_err());
    }
}
