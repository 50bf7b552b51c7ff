use sirconvex::interventions::{
    allocate_accounting, allocate_oblivious, cost_of_region, default_granularity, timing_sweep, Region,
};
use sirconvex::profile::{build_profile, Correlation, ProfileSpec};

const N0: u64 = 20_000;

fn homogeneous() -> Region {
    Region::new(
        "homogeneous",
        build_profile(&ProfileSpec::homogeneous_calibrated(N0, 3.0)).unwrap(),
    )
}

fn gamma(k: f64) -> Region {
    let spec = ProfileSpec::gamma(k, Correlation::Equal, N0, 3.0).with_atom_count(200);
    Region::new(format!("gamma{k}"), build_profile(&spec).unwrap())
}

#[test]
fn plans_respect_supply_and_report_their_costs() {
    let regions = vec![homogeneous(), gamma(0.1)];
    let supply = 2000;
    let g = default_granularity(supply);
    for plan in [
        allocate_accounting(&regions, supply, g).unwrap(),
        allocate_oblivious(&regions, supply, g).unwrap(),
    ] {
        assert!(plan.allocated() <= supply);
        for (i, region) in regions.iter().enumerate() {
            assert_eq!(
                plan.predicted_infections[i],
                cost_of_region(region, plan.vaccines[i], 0).unwrap()
            );
        }
        assert_eq!(plan.total_infections, plan.predicted_infections.iter().sum::<u64>());
    }
}

#[test]
fn oblivious_splits_equal_regions_evenly_and_accounting_does_not() {
    let regions = vec![homogeneous(), gamma(0.1)];
    let (supply, g) = (2000, 20);
    let oblivious = allocate_oblivious(&regions, supply, g).unwrap();
    assert!(
        oblivious.vaccines[0].abs_diff(oblivious.vaccines[1]) <= g,
        "{:?}",
        oblivious.vaccines
    );
    let accounting = allocate_accounting(&regions, supply, g).unwrap();
    assert!(
        accounting.vaccines[0].abs_diff(accounting.vaccines[1]) > g,
        "{:?}",
        accounting.vaccines
    );
    assert!(accounting.total_infections <= oblivious.total_infections);
}

#[test]
fn accounting_never_loses_across_shapes() {
    for k in [0.1, 0.5, 2.0, 10.0] {
        let regions = vec![homogeneous(), gamma(k)];
        for supply in [500, 5000] {
            let g = default_granularity(supply);
            let a = allocate_accounting(&regions, supply, g).unwrap();
            let o = allocate_oblivious(&regions, supply, g).unwrap();
            assert!(a.total_infections <= o.total_infections, "k = {k}, supply = {supply}");
            assert!(a.convexity_verified, "k = {k}, supply = {supply}");
        }
    }
}

#[test]
fn heterogeneous_timing_is_more_sensitive() {
    let timings = [0, N0 / 20, N0 / 10, N0 / 5];
    let low = timing_sweep(&gamma(0.1), N0 / 10, &timings).unwrap();
    let high = timing_sweep(&gamma(10.0), N0 / 10, &timings).unwrap();
    assert!(low.non_decreasing && high.non_decreasing, "{low:?} {high:?}");
    assert!(low.spread > high.spread);
    let single = timing_sweep(&gamma(1.0), 100, &[0]).unwrap();
    assert!(single.non_decreasing && single.spread == 0);
}
