//! Adversarial initial configurations.
//!
//! Self-stabilization must hold from *every* configuration, so experiments
//! start from states an adversary chose: zeroed baselines, randomized
//! corruption with injected fake identifiers, or the everyone-shares-one-id
//! worst case of the naming analyses. Alongside the configuration the
//! adversary reports ℓ, the number of distinct fake identifiers placed,
//! which the convergence bounds depend on.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::bitstring::BitString;
use crate::digraph::Digraph;
use crate::runtime::{Configuration, Protocol};

#[derive(Clone, Debug, PartialEq)]
pub enum AdversaryMode {
    /// Empty tuple sets everywhere; ℓ = 0.
    Zeroed,
    /// Per-process corruption: with `corruption_probability`, a process gets
    /// random tuples drawn over live and fake identifiers, random distances
    /// up to 2n, and scrambled scalar fields. At most `fake_id_budget`
    /// distinct fake identifiers are used.
    RandomizedCorruption {
        fake_id_budget: usize,
        corruption_probability: f64,
    },
    /// Every process starts with one shared identifier (nonces drawn
    /// independently), optionally with fake tuples injected. Applies only to
    /// protocols whose identifiers are variables.
    AllSameIdentifier { fake_id_budget: usize },
}

impl AdversaryMode {
    pub fn fake_budget(&self) -> usize {
        match self {
            AdversaryMode::Zeroed => 0,
            AdversaryMode::RandomizedCorruption { fake_id_budget, .. } => *fake_id_budget,
            AdversaryMode::AllSameIdentifier { fake_id_budget } => *fake_id_budget,
        }
    }
}

impl fmt::Display for AdversaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryMode::Zeroed => write!(f, "zero"),
            AdversaryMode::RandomizedCorruption {
                fake_id_budget,
                corruption_probability,
            } => {
                write!(f, "corrupt:{fake_id_budget}:{corruption_probability}")
            }
            AdversaryMode::AllSameIdentifier { fake_id_budget } => {
                if *fake_id_budget == 0 {
                    write!(f, "same-id")
                } else {
                    write!(f, "same-id:{fake_id_budget}")
                }
            }
        }
    }
}

impl FromStr for AdversaryMode {
    type Err = AdversaryError;

    /// Accepts `zero`, `corrupt:BUDGET:PROB`, `same-id` and `same-id:BUDGET`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AdversaryError::Parse(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["zero"] => Ok(AdversaryMode::Zeroed),
            ["corrupt", budget, prob] => {
                let fake_id_budget = budget.parse().map_err(|_| bad())?;
                let corruption_probability: f64 = prob.parse().map_err(|_| bad())?;
                let mode = AdversaryMode::RandomizedCorruption {
                    fake_id_budget,
                    corruption_probability,
                };
                AdversarySpec::check_probability(corruption_probability)?;
                Ok(mode)
            }
            ["same-id"] => Ok(AdversaryMode::AllSameIdentifier { fake_id_budget: 0 }),
            ["same-id", budget] => Ok(AdversaryMode::AllSameIdentifier {
                fake_id_budget: budget.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

/// A mode plus the seed that makes the generated configuration replayable.
#[derive(Clone, Debug, PartialEq)]
pub struct AdversarySpec {
    pub mode: AdversaryMode,
    pub seed: u64,
}

impl AdversarySpec {
    pub fn zeroed() -> Self {
        AdversarySpec {
            mode: AdversaryMode::Zeroed,
            seed: 0,
        }
    }

    pub fn corruption(
        fake_id_budget: usize,
        corruption_probability: f64,
        seed: u64,
    ) -> Result<Self, AdversaryError> {
        Self::check_probability(corruption_probability)?;
        Ok(AdversarySpec {
            mode: AdversaryMode::RandomizedCorruption {
                fake_id_budget,
                corruption_probability,
            },
            seed,
        })
    }

    pub fn all_same(fake_id_budget: usize, seed: u64) -> Self {
        AdversarySpec {
            mode: AdversaryMode::AllSameIdentifier { fake_id_budget },
            seed,
        }
    }

    fn check_probability(p: f64) -> Result<(), AdversaryError> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            Err(AdversaryError::InvalidProbability(p))
        } else {
            Ok(())
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("adversary mode {mode} does not apply to protocol {protocol}")]
    IncompatibleMode {
        protocol: &'static str,
        mode: String,
    },
    #[error("corruption probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("bad adversary spec `{0}`")]
    Parse(String),
}

/// Protocols that can synthesize adversarial initial configurations.
///
/// `initial_configuration` returns the configuration together with ℓ, the
/// number of distinct identifiers placed anywhere in a tuple that match no
/// live process's current identifier (with prefix-equivalence for the
/// bit-string protocols). `count_fake_identifiers` recomputes ℓ by an
/// independent scan of a configuration, which tests compare against.
pub trait Adversary: Protocol {
    fn initial_configuration(
        &self,
        g: &Digraph,
        spec: &AdversarySpec,
    ) -> Result<(Configuration<Self::State>, usize), AdversaryError>;

    fn count_fake_identifiers(&self, g: &Digraph, c: &Configuration<Self::State>) -> usize;
}

/// A live (corrupted-but-real) identifier: leading 0 bit plus up to three
/// random bits. Fakes live in the leading-1 subtree, so the two families
/// are never prefix-related and ℓ accounting stays unambiguous.
pub(crate) fn corrupt_live_bitstring(rng: &mut dyn RngCore) -> BitString {
    let extra = rng.random_range(0..=3usize);
    BitString::from_bits(std::iter::once(false).chain((0..extra).map(|_| rng.random_bool(0.5))))
}

/// Draws `count` distinct fake bit strings: pairwise non-prefix-related,
/// all in the leading-1 subtree so they relate to no identifier in `avoid`.
pub(crate) fn fresh_bitstring_pool(
    rng: &mut dyn RngCore,
    count: usize,
    avoid: &[BitString],
) -> Vec<BitString> {
    let mut pool: Vec<BitString> = Vec::with_capacity(count);
    let mut len = 6;
    let mut failures = 0;
    while pool.len() < count {
        let candidate = BitString::from_bits(
            std::iter::once(true).chain((1..len).map(|_| rng.random_bool(0.5))),
        );
        let clashes = avoid
            .iter()
            .chain(pool.iter())
            .any(|x| x.prefix_related(&candidate));
        if clashes {
            failures += 1;
            if failures % 16 == 0 {
                len += 1;
            }
        } else {
            pool.push(candidate);
        }
    }
    pool
}

/// Distinct `u64` identifiers outside `avoid`.
pub(crate) fn fresh_u64_pool(rng: &mut dyn RngCore, count: usize, avoid: &[u64]) -> Vec<u64> {
    let mut pool: Vec<u64> = Vec::with_capacity(count);
    while pool.len() < count {
        let candidate = rng.random::<u64>();
        if !avoid.contains(&candidate) && !pool.contains(&candidate) {
            pool.push(candidate);
        }
    }
    pool
}
