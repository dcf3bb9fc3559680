//! Intrinsic ground risk classes for UAVs up to 1 m characteristic dimension,
//! and the textual definition of each risk level.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::types::RiskLevel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Visibility {
    Vlos,
    Bvlos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Environment {
    ControlledGround,
    SparselyPopulated,
    Populated,
    GatheringOfPeople,
}

/// The seven rows of the intrinsic GRC table. Controlled ground areas are one
/// row regardless of visibility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OperationalScenario {
    ControlledGround,
    VlosSparselyPopulated,
    BvlosSparselyPopulated,
    VlosPopulated,
    BvlosPopulated,
    VlosGathering,
    BvlosGathering,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct GroundRiskClass(u8);

impl GroundRiskClass {
    pub fn get(self) -> u8 {
        self.0
    }
}

impl fmt::Display for GroundRiskClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl OperationalScenario {
    pub const ALL: [OperationalScenario; 7] = [
        OperationalScenario::ControlledGround,
        OperationalScenario::VlosSparselyPopulated,
        OperationalScenario::BvlosSparselyPopulated,
        OperationalScenario::VlosPopulated,
        OperationalScenario::BvlosPopulated,
        OperationalScenario::VlosGathering,
        OperationalScenario::BvlosGathering,
    ];

    pub fn new(visibility: Visibility, environment: Environment) -> Self {
        use Environment::*;
        use Visibility::*;
        match (visibility, environment) {
            (_, ControlledGround) => OperationalScenario::ControlledGround,
            (Vlos, SparselyPopulated) => OperationalScenario::VlosSparselyPopulated,
            (Bvlos, SparselyPopulated) => OperationalScenario::BvlosSparselyPopulated,
            (Vlos, Populated) => OperationalScenario::VlosPopulated,
            (Bvlos, Populated) => OperationalScenario::BvlosPopulated,
            (Vlos, GatheringOfPeople) => OperationalScenario::VlosGathering,
            (Bvlos, GatheringOfPeople) => OperationalScenario::BvlosGathering,
        }
    }

    /// `None` for controlled ground, where visibility does not matter.
    pub fn visibility(self) -> Option<Visibility> {
        use OperationalScenario::*;
        match self {
            ControlledGround => None,
            VlosSparselyPopulated | VlosPopulated | VlosGathering => Some(Visibility::Vlos),
            BvlosSparselyPopulated | BvlosPopulated | BvlosGathering => Some(Visibility::Bvlos),
        }
    }

    pub fn environment(self) -> Environment {
        use OperationalScenario::*;
        match self {
            ControlledGround => Environment::ControlledGround,
            VlosSparselyPopulated | BvlosSparselyPopulated => Environment::SparselyPopulated,
            VlosPopulated | BvlosPopulated => Environment::Populated,
            VlosGathering | BvlosGathering => Environment::GatheringOfPeople,
        }
    }

    pub fn grc(self) -> GroundRiskClass {
        grc_lookup(self)
    }

    pub fn description(self) -> &'static str {
        use OperationalScenario::*;
        match self {
            ControlledGround => "VLOS/BVLOS over controlled ground area",
            VlosSparselyPopulated => "VLOS in sparsely populated environment",
            BvlosSparselyPopulated => "BVLOS in sparsely populated environment",
            VlosPopulated => "VLOS in populated environment",
            BvlosPopulated => "BVLOS in populated environment",
            VlosGathering => "VLOS over gathering of people",
            BvlosGathering => "BVLOS over gathering of people",
        }
    }
}

pub fn grc_lookup(scenario: OperationalScenario) -> GroundRiskClass {
    use OperationalScenario::*;
    GroundRiskClass(match scenario {
        ControlledGround => 1,
        VlosSparselyPopulated => 2,
        BvlosSparselyPopulated => 3,
        VlosPopulated => 4,
        BvlosPopulated => 5,
        VlosGathering => 7,
        BvlosGathering => 8,
    })
}

const RISK_LEVEL_DEFINITIONS: [&str; RiskLevel::COUNT] = [
    "Ideal landing zones, including grass, dirt, gravel, and predefined markers.",
    "Low level of material damage or damage to the UAV itself.",
    "Moderate risk of loosing or damaging the UAV, along with low risk of material damage.",
    "This level includes important material damage, the imminent risk of losing or critically damaging the drone, and the moderate risk of indirectly hurting people. It includes the classes water, tree, window, wall, among others.",
    "This level comprises indirect risk of hurting people, direct risk of hurting fauna,  and conflicting regions where there is uncertainty about the presence of people in the area.",
    "This level represents the maximum risk and considers the direct risk of hurting people.",
];

/// Definition text of a risk level, original wording and spelling kept.
pub fn risk_level_description(level: RiskLevel) -> &'static str {
    RISK_LEVEL_DEFINITIONS[level.index()]
}

impl Visibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Visibility::Vlos => "VLOS",
            Visibility::Bvlos => "BVLOS",
        }
    }
}

impl Environment {
    pub fn as_str(self) -> &'static str {
        match self {
            Environment::ControlledGround => "controlled_ground",
            Environment::SparselyPopulated => "sparsely_populated",
            Environment::Populated => "populated",
            Environment::GatheringOfPeople => "gathering_of_people",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognized {kind} {value:?}")]
pub struct ParseScenarioError {
    kind: &'static str,
    value: String,
}

impl FromStr for Visibility {
    type Err = ParseScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vlos" => Ok(Visibility::Vlos),
            "bvlos" => Ok(Visibility::Bvlos),
            _ => Err(ParseScenarioError { kind: "visibility", value: s.into() }),
        }
    }
}

impl FromStr for Environment {
    type Err = ParseScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "controlled_ground" | "controlled" => Ok(Environment::ControlledGround),
            "sparsely_populated" | "sparse" => Ok(Environment::SparselyPopulated),
            "populated" => Ok(Environment::Populated),
            "gathering_of_people" | "gathering" => Ok(Environment::GatheringOfPeople),
            _ => Err(ParseScenarioError { kind: "environment", value: s.into() }),
        }
    }
}

impl Serialize for Visibility {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl Serialize for Environment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GrcReport {
    pub schema: u32,
    /// `"VLOS/BVLOS"` for controlled ground.
    pub visibility: String,
    pub environment: Environment,
    pub grc: GroundRiskClass,
    pub description: &'static str,
}

impl From<OperationalScenario> for GrcReport {
    fn from(s: OperationalScenario) -> Self {
        GrcReport {
            schema: crate::SCHEMA_VERSION,
            visibility: s.visibility().map_or("VLOS/BVLOS", Visibility::as_str).to_string(),
            environment: s.environment(),
            grc: s.grc(),
            description: s.description(),
        }
    }
}
