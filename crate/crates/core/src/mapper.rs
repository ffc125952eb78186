//! Assignment of computational services and interactors to devices.
//!
//! Pinned names (those listed in a device's `resources`) stay where they are.
//! Everything else goes through a pluggable strategy; the built-in `random`
//! strategy draws devices uniformly with [`SplitMix64`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::validate::Project;

/// SplitMix64 (Steele, Lea and Flood). Each step adds the golden-ratio
/// increment to the state and scrambles it:
///
/// ```text
/// state += 0x9E3779B97F4A7C15
/// z = state
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB
/// return z ^ (z >> 31)
/// ```
///
/// An index below `n` is taken as the high 64 bits of `next * n`.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapperConfig {
    pub seed: u64,
    pub strategy: String,
}

impl Default for MapperConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            strategy: "random".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingPlan {
    /// Service or interactor name to device name.
    pub assignments: BTreeMap<String, String>,
    pub strategy: String,
    pub seed: u64,
}

impl MappingPlan {
    /// `{"assignments": {...}, "seed": N, "strategy": "..."}` with sorted keys.
    pub fn to_json(&self) -> String {
        crate::codegen::descriptor::canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn device_of(&self, name: &str) -> Option<&str> {
        self.assignments.get(name).map(String::as_str)
    }
}

/// `(unpinned names, eligible devices, seed) -> assignments`.
pub type StrategyFn = dyn Fn(&[String], &[String], u64) -> BTreeMap<String, String> + Send + Sync;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("no device with a platform can host `{0}`")]
    NoEligibleDevice(String),
    #[error("`{name}` is pinned to several devices: {}", devices.join(", "))]
    ConflictingPin { name: String, devices: Vec<String> },
    #[error("interactor `{0}` must be listed in some device's resources")]
    UnpinnedInteractor(String),
    #[error("unknown mapping strategy `{0}`")]
    UnknownStrategy(String),
    #[error("mapping strategy `{0}` is already registered")]
    DuplicateStrategy(String),
    #[error("strategy `{strategy}` left `{name}` unassigned or on an ineligible device")]
    StrategyFailed { strategy: String, name: String },
}

/// Registered mapping strategies, in registration order.
#[derive(Clone)]
pub struct Mapper {
    strategies: Vec<(String, Arc<StrategyFn>)>,
}

impl fmt::Debug for Mapper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.strategies.iter().map(|(id, _)| id)).finish()
    }
}

impl Default for Mapper {
    fn default() -> Self {
        Self {
            strategies: vec![("random".to_string(), Arc::new(random_strategy))],
        }
    }
}

/// Draws one device per name, in the order given.
pub fn random_strategy(names: &[String], devices: &[String], seed: u64) -> BTreeMap<String, String> {
    let mut rng = SplitMix64::new(seed);
    names
        .iter()
        .map(|n| (n.clone(), devices[rng.below(devices.len())].clone()))
        .collect()
}

impl Mapper {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn strategies(&self) -> Vec<&str> {
        self.strategies.iter().map(|(id, _)| id.as_str()).collect()
    }

    pub fn register_strategy<F>(&mut self, id: &str, f: F) -> Result<(), MapError>
    where
        F: Fn(&[String], &[String], u64) -> BTreeMap<String, String> + Send + Sync + 'static,
    {
        if self.strategies.iter().any(|(s, _)| s == id) {
            return Err(MapError::DuplicateStrategy(id.to_string()));
        }
        self.strategies.push((id.to_string(), Arc::new(f)));
        Ok(())
    }

    pub fn map_services(&self, p: &Project, cfg: &MapperConfig) -> Result<MappingPlan, MapError> {
        let strategy = self
            .strategies
            .iter()
            .find(|(id, _)| *id == cfg.strategy)
            .map(|(_, f)| f.clone())
            .ok_or_else(|| MapError::UnknownStrategy(cfg.strategy.clone()))?;

        let mut assignments = BTreeMap::new();
        let pin = |name: &str| -> Result<Option<String>, MapError> {
            let devices: Vec<String> = p.deploy.hosts_of(name).map(|d| d.name.clone()).collect();
            match devices.len() {
                0 => Ok(None),
                1 => Ok(devices.into_iter().next()),
                _ => Err(MapError::ConflictingPin {
                    name: name.to_string(),
                    devices,
                }),
            }
        };

        for i in p.interactors() {
            let device = pin(&i.name)?.ok_or_else(|| MapError::UnpinnedInteractor(i.name.clone()))?;
            assignments.insert(i.name.clone(), device);
        }
        let mut unpinned = Vec::new();
        for s in &p.arch.services {
            match pin(&s.name)? {
                Some(d) => {
                    assignments.insert(s.name.clone(), d);
                }
                None => unpinned.push(s.name.clone()),
            }
        }
        if !unpinned.is_empty() {
            let eligible: Vec<String> = p
                .deploy
                .devices
                .iter()
                .filter(|d| d.is_compute_eligible())
                .map(|d| d.name.clone())
                .collect();
            if eligible.is_empty() {
                return Err(MapError::NoEligibleDevice(unpinned[0].clone()));
            }
            let chosen = strategy(&unpinned, &eligible, cfg.seed);
            for name in unpinned {
                match chosen.get(&name) {
                    Some(d) if eligible.contains(d) => {
                        assignments.insert(name, d.clone());
                    }
                    _ => {
                        return Err(MapError::StrategyFailed {
                            strategy: cfg.strategy.clone(),
                            name,
                        })
                    }
                }
            }
        }
        Ok(MappingPlan {
            assignments,
            strategy: cfg.strategy.clone(),
            seed: cfg.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs for seed 0 of the reference implementation.
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(r.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn below_stays_in_range() {
        let mut r = SplitMix64::new(7);
        for n in 1..50 {
            assert!(r.below(n) < n);
        }
    }
}
