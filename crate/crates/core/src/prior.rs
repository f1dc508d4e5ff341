//! The bias distribution `G`.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Tolerance on the total mass of a discrete prior.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Prior on the per-task bias.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum Prior {
    Normal(NormalPrior),
    Discrete(DiscretePrior),
}

impl Prior {
    pub fn normal(mu: f64, a: f64) -> Result<Self> {
        NormalPrior::new(mu, a).map(Prior::Normal)
    }

    pub fn point_mass(at: f64) -> Result<Self> {
        DiscretePrior::point_mass(at).map(Prior::Discrete)
    }

    pub fn discrete(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        DiscretePrior::new(atoms, weights).map(Prior::Discrete)
    }

    /// Prior mean.
    pub fn mean(&self) -> f64 {
        match self {
            Prior::Normal(p) => p.mu,
            Prior::Discrete(p) => p.atoms.iter().zip(&p.weights).map(|(b, w)| b * w).sum(),
        }
    }
}

impl From<NormalPrior> for Prior {
    fn from(p: NormalPrior) -> Self {
        Prior::Normal(p)
    }
}

impl From<DiscretePrior> for Prior {
    fn from(p: DiscretePrior) -> Self {
        Prior::Discrete(p)
    }
}

/// `N(mu, a)`; `a = 0` is a point mass at `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawNormal"))]
pub struct NormalPrior {
    pub(crate) mu: f64,
    pub(crate) a: f64,
}

impl NormalPrior {
    pub fn new(mu: f64, a: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidPrior("normal prior mean must be finite"));
        }
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::InvalidPrior(
                "normal prior variance must be finite and nonnegative",
            ));
        }
        Ok(Self { mu, a })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Variance `A`.
    pub fn a(&self) -> f64 {
        self.a
    }
}

/// A finitely supported prior: strictly increasing atoms with positive
/// weights summing to one.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawDiscrete"))]
pub struct DiscretePrior {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscretePrior {
    /// Builds a prior whose weights already sum to one (within
    /// [`SIMPLEX_TOL`]). Atoms may be given in any order; repeated atoms are
    /// merged and zero-weight atoms dropped. Weights are kept as given so a
    /// serialized prior reads back bit for bit.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total = Self::check_raw(&atoms, &weights)?;
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidPrior("weights must sum to one"));
        }
        Ok(Self::canonicalize(atoms, weights, 1.0))
    }

    /// Like [`DiscretePrior::new`] but rescales the weights to sum to one.
    pub fn from_unnormalized(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total = Self::check_raw(&atoms, &weights)?;
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidPrior(
                "weights must have positive finite total",
            ));
        }
        Ok(Self::canonicalize(atoms, weights, total))
    }

    pub fn point_mass(at: f64) -> Result<Self> {
        Self::new(alloc::vec![at], alloc::vec![1.0])
    }

    fn check_raw(atoms: &[f64], weights: &[f64]) -> Result<f64> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidPrior("atoms and weights differ in length"));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidPrior(
                "discrete prior needs at least one atom",
            ));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidPrior("atoms must be finite"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidPrior(
                "weights must be finite and nonnegative",
            ));
        }
        Ok(weights.iter().sum())
    }

    fn canonicalize(atoms: Vec<f64>, weights: Vec<f64>, total: f64) -> Self {
        let mut pairs: Vec<(f64, f64)> = atoms
            .into_iter()
            .zip(weights)
            .filter(|&(_, w)| w > 0.0)
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (b, w) in pairs {
            match atoms.last() {
                Some(&last) if last == b => *weights.last_mut().unwrap() += w,
                _ => {
                    atoms.push(b);
                    weights.push(w);
                }
            }
        }
        if total != 1.0 {
            weights.iter_mut().for_each(|w| *w /= total);
        }
        Self { atoms, weights }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawNormal {
    mu: f64,
    a: f64,
}

#[cfg(feature = "serde")]
impl TryFrom<RawNormal> for NormalPrior {
    type Error = Error;

    fn try_from(raw: RawNormal) -> Result<Self> {
        NormalPrior::new(raw.mu, raw.a)
    }
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawDiscrete {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawDiscrete> for DiscretePrior {
    type Error = Error;

    fn try_from(raw: RawDiscrete) -> Result<Self> {
        DiscretePrior::new(raw.atoms, raw.weights)
    }
}
