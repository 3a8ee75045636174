use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::families::{Binomial, Exponential, Gaussian, Poisson};
use super::ExponentialFamily;
use crate::{Error, Result};

/// Family-specific parameters as they appear in config files.
///
/// Unused fields are ignored by families that do not need them; missing
/// fields fall back to `sigma = 1`, `trials = 1`, `gamma_lo = 0.1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_lo: Option<f64>,
}

pub type FamilyBuilder = fn(&FamilyParams) -> Result<Arc<dyn ExponentialFamily>>;

/// Name-keyed table of family constructors.
#[derive(Clone)]
pub struct ModelRegistry {
    builders: BTreeMap<String, FamilyBuilder>,
}

impl ModelRegistry {
    pub fn empty() -> Self {
        ModelRegistry {
            builders: BTreeMap::new(),
        }
    }

    /// Register (or replace) a family under `name`.
    pub fn register(&mut self, name: &str, builder: FamilyBuilder) -> &mut Self {
        self.builders.insert(name.to_ascii_lowercase(), builder);
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.builders.contains_key(&name.to_ascii_lowercase())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.builders.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: &FamilyParams) -> Result<Arc<dyn ExponentialFamily>> {
        let builder = self
            .builders
            .get(&name.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownFamily(name.to_string()))?;
        builder(params)
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut reg = ModelRegistry::empty();
        reg.register("gaussian", |p| {
            Ok(Arc::new(Gaussian::new(p.sigma.unwrap_or(1.0))?))
        })
        .register("binomial", |p| {
            Ok(Arc::new(Binomial::new(p.trials.unwrap_or(1))?))
        })
        .register("poisson", |_| Ok(Arc::new(Poisson)))
        .register("exponential", |p| {
            Ok(Arc::new(Exponential::new(p.gamma_lo.unwrap_or(0.1))?))
        });
        reg
    }
}

impl std::fmt::Debug for ModelRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.builders.keys()).finish()
    }
}
