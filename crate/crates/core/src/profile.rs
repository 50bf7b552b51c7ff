//! Populations described as discrete distributions of spreading parameters.
//!
//! A [`SpreadingProfile`] is a list of atoms `(s, phi, w)`: susceptibility `s`,
//! expected infectiousness `phi` among individuals with that susceptibility, and
//! the probability mass `w` of that susceptibility in the population. Atoms are
//! kept sorted by `s` with `phi` non-decreasing along the list.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::midpoint_quantiles;

pub const DEFAULT_ATOM_COUNT: usize = 1000;

/// Largest fraction of mass allowed to be clamped onto `s = 1`.
pub const MAX_CLAMPED_MASS: f64 = 0.01;

const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadingAtom {
    pub s: f64,
    pub phi: f64,
    pub w: f64,
}

impl SpreadingAtom {
    pub fn new(s: f64, phi: f64, w: f64) -> Self {
        SpreadingAtom { s, phi, w }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.s) {
            return Err(Error::invalid("s", format!("must lie in [0, 1], got {}", self.s)));
        }
        if !(0.0..=1.0).contains(&self.phi) {
            return Err(Error::invalid("phi", format!("must lie in [0, 1], got {}", self.phi)));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::invalid("w", format!("must be positive, got {}", self.w)));
        }
        Ok(())
    }
}

/// How infectiousness follows susceptibility. Decides what calibration rescales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correlation {
    /// `I(a) = S(a)`, so `phi = s` and both scale together.
    Equal,
    /// Infectiousness independent of susceptibility; `phi` is one constant.
    Independent,
}

/// How calibration treats `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// `phi == s` on every atom; calibration scales both.
    Equal,
    /// `phi` is held fixed; calibration scales `s` only.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingProfile {
    atoms: Vec<SpreadingAtom>,
    n0: u64,
    coupling: Coupling,
}

impl SpreadingProfile {
    /// Builds a profile from arbitrary atoms: sorts by `s`, merges equal `s`
    /// (masses summed, `phi` mass-averaged) and normalizes masses.
    pub fn new(atoms: Vec<SpreadingAtom>, n0: u64, coupling: Coupling) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("atoms", "profile needs at least one atom"));
        }
        if n0 < 1 {
            return Err(Error::invalid("n0", "population must be non-empty"));
        }
        for atom in &atoms {
            atom.validate()?;
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.s.total_cmp(&b.s));

        let mut merged: Vec<SpreadingAtom> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            match merged.last_mut() {
                Some(last) if last.s == atom.s => {
                    let w = last.w + atom.w;
                    last.phi = (last.phi * last.w + atom.phi * atom.w) / w;
                    last.w = w;
                }
                _ => merged.push(atom),
            }
        }

        let total: f64 = merged.iter().map(|a| a.w).sum();
        for atom in &mut merged {
            atom.w /= total;
        }

        for pair in merged.windows(2) {
            if pair[1].phi < pair[0].phi {
                return Err(Error::NonMonotoneInfectiousness {
                    s_lo: pair[0].s,
                    s_hi: pair[1].s,
                });
            }
        }
        if coupling == Coupling::Equal && merged.iter().any(|a| a.phi != a.s) {
            return Err(Error::invalid("phi", "equal coupling requires phi == s on every atom"));
        }

        let profile = SpreadingProfile {
            atoms: merged,
            n0,
            coupling,
        };
        debug_assert!((profile.atoms.iter().map(|a| a.w).sum::<f64>() - 1.0).abs() <= MASS_TOLERANCE);
        Ok(profile)
    }

    /// Single-atom population where everyone has `(sigma, iota)`.
    pub fn homogeneous(sigma: f64, iota: f64, n0: u64) -> Result<Self> {
        SpreadingProfile::new(vec![SpreadingAtom::new(sigma, iota, 1.0)], n0, Coupling::Fixed)
    }

    pub fn atoms(&self) -> &[SpreadingAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn n0(&self) -> u64 {
        self.n0
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    pub fn is_homogeneous(&self) -> bool {
        self.atoms.len() == 1
    }

    /// Same atoms, different population size. Calibration is not preserved.
    pub fn with_n0(&self, n0: u64) -> Result<Self> {
        if n0 < 1 {
            return Err(Error::invalid("n0", "population must be non-empty"));
        }
        Ok(SpreadingProfile { n0, ..self.clone() })
    }

    /// Basic reproduction number `n0 * sum(w * s * phi)`.
    pub fn r0(&self) -> f64 {
        self.n0 as f64 * second_moment_sphi(self)
    }

    /// The heterogeneity-free profile with the same `n0` and `R0`.
    pub fn homogeneous_surrogate(&self) -> Result<Self> {
        let sigma = (self.r0() / self.n0 as f64).sqrt();
        SpreadingProfile::homogeneous(sigma, sigma, self.n0)
    }
}

/// `sum(w * s)`.
pub fn mean_susceptibility(profile: &SpreadingProfile) -> f64 {
    profile.atoms.iter().map(|a| a.w * a.s).sum()
}

/// `sum(w * s * phi)`.
pub fn second_moment_sphi(profile: &SpreadingProfile) -> f64 {
    profile.atoms.iter().map(|a| a.w * a.s * a.phi).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Homogeneous {
        sigma: f64,
        iota: f64,
    },
    Gamma {
        shape: f64,
        /// When absent, the unit-scale quantiles are normalized so the largest
        /// atom is 1; calibration then fixes the actual scale.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
        correlation: Correlation,
    },
    Explicit {
        /// `[s, phi, w]` triples.
        atoms: Vec<[f64; 3]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub family: Family,
    pub n0: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_r0: Option<f64>,
    #[serde(default = "default_atom_count")]
    pub atom_count: usize,
}

fn default_atom_count() -> usize {
    DEFAULT_ATOM_COUNT
}

impl ProfileSpec {
    pub fn homogeneous(sigma: f64, iota: f64, n0: u64) -> Self {
        ProfileSpec {
            family: Family::Homogeneous { sigma, iota },
            n0,
            target_r0: None,
            atom_count: DEFAULT_ATOM_COUNT,
        }
    }

    /// `sigma = iota = sqrt(r0 / n0)`, so that `R0 == r0` without calibration.
    pub fn homogeneous_calibrated(n0: u64, r0: f64) -> Self {
        let sigma = (r0 / n0 as f64).sqrt();
        ProfileSpec::homogeneous(sigma, sigma, n0)
    }

    pub fn gamma(shape: f64, correlation: Correlation, n0: u64, target_r0: f64) -> Self {
        ProfileSpec {
            family: Family::Gamma {
                shape,
                scale: None,
                correlation,
            },
            n0,
            target_r0: Some(target_r0),
            atom_count: DEFAULT_ATOM_COUNT,
        }
    }

    pub fn with_atom_count(mut self, atom_count: usize) -> Self {
        self.atom_count = atom_count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 < 1 {
            return Err(Error::invalid("n0", "population must be non-empty"));
        }
        if let Some(r) = self.target_r0 {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::invalid("target_r0", format!("must be positive, got {r}")));
            }
        }
        match &self.family {
            Family::Homogeneous { sigma, iota } => {
                if !(0.0..=1.0).contains(sigma) {
                    return Err(Error::invalid("sigma", format!("must lie in [0, 1], got {sigma}")));
                }
                if !(0.0..=1.0).contains(iota) {
                    return Err(Error::invalid("iota", format!("must lie in [0, 1], got {iota}")));
                }
            }
            Family::Gamma { shape, scale, .. } => {
                if !(*shape > 0.0 && shape.is_finite()) {
                    return Err(Error::invalid("shape", format!("must be positive, got {shape}")));
                }
                if let Some(theta) = scale {
                    if !(*theta > 0.0 && theta.is_finite()) {
                        return Err(Error::invalid("scale", format!("must be positive, got {theta}")));
                    }
                }
                if self.atom_count == 0 {
                    return Err(Error::invalid("atom_count", "must be at least 1"));
                }
            }
            Family::Explicit { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::invalid("atoms", "explicit family needs at least one atom"));
                }
            }
        }
        Ok(())
    }
}

/// Discretizes a family into a profile, then calibrates to `target_r0` if set.
pub fn build_profile(spec: &ProfileSpec) -> Result<SpreadingProfile> {
    spec.validate()?;
    let profile = match &spec.family {
        Family::Homogeneous { sigma, iota } => SpreadingProfile::homogeneous(*sigma, *iota, spec.n0)?,
        Family::Explicit { atoms } => {
            let atoms = atoms.iter().map(|&[s, phi, w]| SpreadingAtom::new(s, phi, w)).collect();
            SpreadingProfile::new(atoms, spec.n0, Coupling::Fixed)?
        }
        Family::Gamma {
            shape,
            scale,
            correlation,
        } => gamma_profile(*shape, *scale, *correlation, spec.atom_count, spec.n0)?,
    };
    match spec.target_r0 {
        Some(target) => calibrate_r0(&profile, target),
        None => Ok(profile),
    }
}

fn gamma_profile(
    shape: f64,
    scale: Option<f64>,
    correlation: Correlation,
    atom_count: usize,
    n0: u64,
) -> Result<SpreadingProfile> {
    let mut values = midpoint_quantiles(shape, 1.0, atom_count)?;
    let theta = match scale {
        Some(theta) => theta,
        None => 1.0 / values[values.len() - 1],
    };
    let mass = 1.0 / atom_count as f64;
    let mut clamped = 0.0;
    for v in &mut values {
        *v *= theta;
        if *v > 1.0 {
            *v = 1.0;
            clamped += mass;
        }
    }
    if clamped > MAX_CLAMPED_MASS {
        return Err(Error::ExcessClamping { mass: clamped });
    }

    let (atoms, coupling) = match correlation {
        Correlation::Equal => (
            values.iter().map(|&s| SpreadingAtom::new(s, s, mass)).collect(),
            Coupling::Equal,
        ),
        Correlation::Independent => {
            let mean = values.iter().sum::<f64>() * mass;
            (
                values.iter().map(|&s| SpreadingAtom::new(s, mean, mass)).collect(),
                Coupling::Fixed,
            )
        }
    };
    SpreadingProfile::new(atoms, n0, coupling)
}

/// Rescales susceptibility (and `phi` under equal coupling) by a common factor
/// so that `n0 * sum(w * s * phi) == target_r0`.
pub fn calibrate_r0(profile: &SpreadingProfile, target_r0: f64) -> Result<SpreadingProfile> {
    if !(target_r0 > 0.0 && target_r0.is_finite()) {
        return Err(Error::invalid(
            "target_r0",
            format!("must be positive, got {target_r0}"),
        ));
    }
    let current = profile.r0();
    if !(current > 0.0) {
        return Err(Error::NoTransmission);
    }
    let ratio = target_r0 / current;
    let s_max = profile.atoms[profile.atoms.len() - 1].s;

    let (factor, max_r0) = match profile.coupling {
        Coupling::Equal => (ratio.sqrt(), current / (s_max * s_max)),
        Coupling::Fixed => (ratio, current / s_max),
    };
    if s_max * factor > 1.0 {
        return Err(Error::CalibrationInfeasible {
            target: target_r0,
            max_r0,
        });
    }

    let atoms = profile
        .atoms
        .iter()
        .map(|a| {
            let s = a.s * factor;
            let phi = match profile.coupling {
                Coupling::Equal => s,
                Coupling::Fixed => a.phi,
            };
            SpreadingAtom::new(s, phi, a.w)
        })
        .collect();
    Ok(SpreadingProfile {
        atoms,
        n0: profile.n0,
        coupling: profile.coupling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma_spec(k: f64, n0: u64, r0: f64) -> ProfileSpec {
        ProfileSpec::gamma(k, Correlation::Equal, n0, r0)
    }

    #[test]
    fn homogeneous_is_single_atom() {
        let p = build_profile(&ProfileSpec::homogeneous(0.5, 0.5, 100)).unwrap();
        assert_eq!(p.atoms(), &[SpreadingAtom::new(0.5, 0.5, 1.0)]);
        assert_eq!(mean_susceptibility(&p), 0.5);
        assert_eq!(second_moment_sphi(&p), 0.25);
    }

    #[test]
    fn explicit_atoms_are_sorted_and_normalized() {
        let spec = ProfileSpec {
            family: Family::Explicit {
                atoms: vec![[0.4, 0.3, 1.0], [0.2, 0.1, 1.0]],
            },
            n0: 10,
            target_r0: None,
            atom_count: DEFAULT_ATOM_COUNT,
        };
        let p = build_profile(&spec).unwrap();
        assert_eq!(
            p.atoms(),
            &[SpreadingAtom::new(0.2, 0.1, 0.5), SpreadingAtom::new(0.4, 0.3, 0.5)]
        );
    }

    #[test]
    fn equal_s_atoms_merge() {
        let atoms = vec![
            SpreadingAtom::new(0.3, 0.2, 0.25),
            SpreadingAtom::new(0.1, 0.1, 0.5),
            SpreadingAtom::new(0.3, 0.4, 0.25),
        ];
        let p = SpreadingProfile::new(atoms, 4, Coupling::Fixed).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.atoms()[1].w, 0.5);
        assert!((p.atoms()[1].phi - 0.3).abs() < 1e-15);
    }

    #[test]
    fn decreasing_phi_is_rejected() {
        let atoms = vec![SpreadingAtom::new(0.1, 0.5, 0.5), SpreadingAtom::new(0.2, 0.4, 0.5)];
        assert!(matches!(
            SpreadingProfile::new(atoms, 2, Coupling::Fixed),
            Err(Error::NonMonotoneInfectiousness { .. })
        ));
    }

    #[test]
    fn atom_ranges_are_enforced() {
        assert!(SpreadingProfile::homogeneous(1.5, 0.1, 10).is_err());
        assert!(SpreadingProfile::new(vec![SpreadingAtom::new(0.1, 0.1, 0.0)], 1, Coupling::Fixed).is_err());
    }

    #[test]
    fn two_atom_mean() {
        let atoms = vec![SpreadingAtom::new(0.2, 0.2, 0.5), SpreadingAtom::new(0.4, 0.4, 0.5)];
        let p = SpreadingProfile::new(atoms, 2, Coupling::Equal).unwrap();
        assert!((mean_susceptibility(&p) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn gamma_profile_equal_mode() {
        let p = build_profile(&gamma_spec(0.1, 1_000_000, 3.0)).unwrap();
        assert_eq!(p.len(), 1000);
        for a in p.atoms() {
            assert_eq!(a.phi, a.s);
            assert!((a.w - 1e-3).abs() < 1e-15);
        }
        assert!((p.r0() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn gamma_moments_match_reversed_summation() {
        let p = build_profile(&gamma_spec(0.5, 100_000, 2.5)).unwrap();
        let rev_mean: f64 = p.atoms().iter().rev().map(|a| a.s * a.w).sum();
        let rev_second: f64 = p.atoms().iter().rev().map(|a| a.s * a.phi * a.w).sum();
        assert!((mean_susceptibility(&p) - rev_mean).abs() <= 1e-15 * rev_mean);
        assert!((second_moment_sphi(&p) - rev_second).abs() <= 1e-15 * rev_second);
    }

    #[test]
    fn independent_mode_has_constant_phi() {
        let spec = ProfileSpec::gamma(1.0, Correlation::Independent, 10_000, 2.0);
        let p = build_profile(&spec).unwrap();
        let phi = p.atoms()[0].phi;
        assert!(p.atoms().iter().all(|a| a.phi == phi));
        assert!((p.r0() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn heavy_clamping_is_an_error() {
        let spec = ProfileSpec {
            family: Family::Gamma {
                shape: 1.0,
                scale: Some(1.0),
                correlation: Correlation::Equal,
            },
            n0: 100,
            target_r0: None,
            atom_count: 100,
        };
        assert!(matches!(build_profile(&spec), Err(Error::ExcessClamping { .. })));
    }

    #[test]
    fn calibration_homogeneous() {
        let p = SpreadingProfile::homogeneous(0.5, 0.5, 1000).unwrap();
        let c = calibrate_r0(&p, 3.0).unwrap();
        let a = c.atoms()[0];
        assert!((a.s * a.phi - 0.003).abs() < 1e-15);
        assert!((c.r0() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn calibration_gamma_k1() {
        let p = build_profile(&gamma_spec(1.0, 1_000_000, 3.0)).unwrap();
        let second: f64 = p.atoms().iter().map(|a| a.w * a.s * a.s).sum();
        assert!((second - 3e-6).abs() < 1e-15);
    }

    #[test]
    fn calibration_errors() {
        let p = SpreadingProfile::homogeneous(0.5, 0.5, 10).unwrap();
        assert!(calibrate_r0(&p, 0.0).is_err());
        match calibrate_r0(&p, 100.0) {
            Err(Error::CalibrationInfeasible { max_r0, .. }) => assert!((max_r0 - 5.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let dead = SpreadingProfile::homogeneous(0.0, 0.5, 10).unwrap();
        assert_eq!(calibrate_r0(&dead, 1.0), Err(Error::NoTransmission));
    }

    #[test]
    fn calibration_is_idempotent() {
        for k in [0.1, 1.0, 10.0] {
            let p = build_profile(&gamma_spec(k, 1_000_000, 3.0)).unwrap();
            let again = calibrate_r0(&p, 3.0).unwrap();
            for (a, b) in p.atoms().iter().zip(again.atoms()) {
                assert!((a.s - b.s).abs() <= 1e-12 && (a.phi - b.phi).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn quantization_converges_when_doubling_atoms() {
        // Mean susceptibility 0.01 keeps every family clear of the clamp.
        for k in [0.1, 1.0, 10.0] {
            let sum = |m: usize| {
                let spec = ProfileSpec {
                    family: Family::Gamma {
                        shape: k,
                        scale: Some(0.01 / k),
                        correlation: Correlation::Equal,
                    },
                    n0: 1_000_000,
                    target_r0: None,
                    atom_count: m,
                };
                second_moment_sphi(&build_profile(&spec).unwrap())
            };
            let delta = (sum(2000) - sum(1000)).abs();
            assert!(delta < 1e-4, "k={k} delta={delta}");
        }
    }

    #[test]
    fn surrogate_keeps_r0() {
        let p = build_profile(&gamma_spec(0.1, 1_000_000, 3.0)).unwrap();
        let h = p.homogeneous_surrogate().unwrap();
        assert!(h.is_homogeneous());
        assert!((h.r0() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = gamma_spec(0.1, 1000, 3.0);
        let text = toml::to_string(&spec).unwrap();
        let back: ProfileSpec = toml::from_str(&text).unwrap();
        assert_eq!(spec, back);
        let bad = text.replace("shape", "shap");
        assert!(toml::from_str::<ProfileSpec>(&bad).is_err());
    }
}
