//! Trace-driven runs against an adversary, checked by the oracle.

pub mod generate;
pub mod run;
pub mod strategies;
pub mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::faulty_ram::Adversary;
use crate::resilient_tree::Profile;

pub use generate::{generate, GenKind, GenParams};
pub use run::{run_trace, RunConfig, RunError, RunReport};
pub use trace::{parse, Directive, ParseError, Trace};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryKind {
    /// No corruption at all; CORRUPT directives are refused.
    #[default]
    None,
    /// Only the trace's CORRUPT directives.
    Scripted,
    Random,
    TargetedFlags,
    AdaptivePath,
}

impl AdversaryKind {
    pub const ALL: [AdversaryKind; 5] = [
        AdversaryKind::None,
        AdversaryKind::Scripted,
        AdversaryKind::Random,
        AdversaryKind::TargetedFlags,
        AdversaryKind::AdaptivePath,
    ];

    /// Builds the adversary. `delta` only shapes the targeted strategy.
    pub fn build(
        self,
        budget: usize,
        rate: f64,
        seed: u64,
        profile: Profile,
        delta: usize,
    ) -> Adversary {
        match self {
            AdversaryKind::None => Adversary::passive(0),
            AdversaryKind::Scripted => Adversary::passive(budget),
            AdversaryKind::Random => {
                Adversary::new(budget, strategies::RecordNoise::new(seed, rate, profile))
            }
            AdversaryKind::TargetedFlags => {
                Adversary::new(budget, strategies::TargetedFlags::new(seed, profile, delta))
            }
            AdversaryKind::AdaptivePath => {
                Adversary::new(budget, strategies::AdaptivePath::new(seed, rate, profile))
            }
        }
    }
}

impl FromStr for AdversaryKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.replace('_', "-").as_str() {
            "none" => AdversaryKind::None,
            "scripted" => AdversaryKind::Scripted,
            "random" => AdversaryKind::Random,
            "targeted-flags" => AdversaryKind::TargetedFlags,
            "adaptive-path" => AdversaryKind::AdaptivePath,
            _ => return Err(format!("unknown adversary `{s}`")),
        })
    }
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdversaryKind::None => "none",
            AdversaryKind::Scripted => "scripted",
            AdversaryKind::Random => "random",
            AdversaryKind::TargetedFlags => "targeted-flags",
            AdversaryKind::AdaptivePath => "adaptive-path",
        })
    }
}
