use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::{Frontend, Realization};
use crate::{Error, Result};

/// A class of component values that can be perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamClass {
    Alpha,
    Beta,
    OmegaN,
    KappaPhi,
    BarKappaPhi,
    TildeKappaPhi,
    BarTildeKappaPhi,
}

impl ParamClass {
    pub const ALL: [ParamClass; 7] = [
        ParamClass::Alpha,
        ParamClass::Beta,
        ParamClass::OmegaN,
        ParamClass::KappaPhi,
        ParamClass::BarKappaPhi,
        ParamClass::TildeKappaPhi,
        ParamClass::BarTildeKappaPhi,
    ];

    fn table(self, r: &mut Realization) -> &mut Vec<Vec<f64>> {
        match self {
            ParamClass::Alpha => &mut r.alpha,
            ParamClass::Beta => &mut r.beta,
            ParamClass::OmegaN => &mut r.omega_n,
            ParamClass::KappaPhi => &mut r.kappa_phi,
            ParamClass::BarKappaPhi => &mut r.bar_kappa_phi,
            ParamClass::TildeKappaPhi => &mut r.tilde_kappa_phi,
            ParamClass::BarTildeKappaPhi => &mut r.bar_tilde_kappa_phi,
        }
    }
}

/// Independent uniform relative mismatch on every targeted component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub relative_bound: f64,
    pub targets: BTreeSet<ParamClass>,
    pub seed: u64,
}

impl PerturbationSpec {
    /// Perturbs every parameter class.
    pub fn all(relative_bound: f64, seed: u64) -> Self {
        PerturbationSpec {
            relative_bound,
            targets: ParamClass::ALL.into_iter().collect(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.relative_bound) {
            return Err(Error::InvalidArgument(format!(
                "relative bound must be in [0, 0.5), got {}",
                self.relative_bound
            )));
        }
        Ok(())
    }
}

/// Multiplies each targeted occurrence by `1 + δ`, `δ ~ U(−r, r)`.
///
/// Draws are made for every slot in a fixed order whether or not it is
/// targeted, so a slot's draw depends only on the seed. Structural zeros stay
/// zero.
pub fn perturb_realization(r: &Realization, spec: &PerturbationSpec) -> Result<Realization> {
    spec.validate()?;
    let mut out = r.clone();
    if spec.relative_bound == 0.0 {
        return Ok(out);
    }
    let bound = spec.relative_bound;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for class in ParamClass::ALL {
        let hit = spec.targets.contains(&class);
        for branch in class.table(&mut out).iter_mut() {
            for v in branch.iter_mut() {
                let delta: f64 = rng.random_range(-bound..bound);
                if hit {
                    *v *= 1.0 + delta;
                }
            }
        }
    }
    Ok(out)
}

/// A frontend whose component values carry random mismatch; control law
/// and clock are unchanged.
pub fn perturb(frontend: &Frontend, spec: &PerturbationSpec) -> Result<Frontend> {
    frontend.with_realization(perturb_realization(frontend.realization(), spec)?)
}
