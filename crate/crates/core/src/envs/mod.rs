//! Concrete labeled CMDPs and their reward machines.

pub mod flag_corridor;
pub mod two_door;

use std::fmt;
use std::str::FromStr;

pub use flag_corridor::{flag_cell, FlagCorridorEnv};
pub use two_door::{door_column, TwoDoorEnv, TwoDoorLayout};

use crate::cmdp::LabeledCmdp;
use crate::mapping::{MappingError, RMContextMapping};
use crate::rm::{parse_rm, RewardMachine, RmError};
use crate::scalar::Real;

pub const TWO_DOOR_RM: &str = include_str!("../../rms/two_door.rm");
pub const FLAG_CORRIDOR_RM: &str = include_str!("../../rms/flag_corridor.rm");

/// Environments selectable by name from configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    TwoDoor40,
    TwoDoor8,
    FlagCorridor,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::TwoDoor40, EnvKind::TwoDoor8, EnvKind::FlagCorridor];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::TwoDoor40 => "two_door_40",
            EnvKind::TwoDoor8 => "two_door_8",
            EnvKind::FlagCorridor => "flag_corridor",
        }
    }

    pub fn build<T: Real>(self) -> Environment<T> {
        match self {
            EnvKind::TwoDoor40 => Environment::TwoDoor(TwoDoorEnv::new(TwoDoorLayout::full())),
            EnvKind::TwoDoor8 => Environment::TwoDoor(TwoDoorEnv::new(TwoDoorLayout::reduced())),
            EnvKind::FlagCorridor => Environment::FlagCorridor(FlagCorridorEnv::new()),
        }
    }

    pub fn default_rm_text(self) -> &'static str {
        match self {
            EnvKind::TwoDoor40 | EnvKind::TwoDoor8 => TWO_DOOR_RM,
            EnvKind::FlagCorridor => FLAG_CORRIDOR_RM,
        }
    }

    pub fn default_rm<T: Real>(self) -> Result<RewardMachine<T>, RmError> {
        parse_rm(self.default_rm_text())
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownEnv(pub String);

impl fmt::Display for UnknownEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown environment `{}` (expected two_door_40, two_door_8 or flag_corridor)",
            self.0
        )
    }
}

impl std::error::Error for UnknownEnv {}

impl FromStr for EnvKind {
    type Err = UnknownEnv;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownEnv(s.to_string()))
    }
}

/// Any shipped environment.
#[derive(Debug, Clone)]
pub enum Environment<T> {
    TwoDoor(TwoDoorEnv<T>),
    FlagCorridor(FlagCorridorEnv<T>),
}

impl<T: Real> Environment<T> {
    pub fn as_cmdp(&self) -> &dyn LabeledCmdp<T> {
        match self {
            Environment::TwoDoor(e) => e,
            Environment::FlagCorridor(e) => e,
        }
    }

    /// Expert-declared reward-machine-context mapping for this environment's machine.
    pub fn declared_mapping(&self, rm: &RewardMachine<T>) -> Result<RMContextMapping, MappingError> {
        match self {
            Environment::TwoDoor(_) => two_door::declared_mapping(rm),
            Environment::FlagCorridor(_) => flag_corridor::declared_mapping(rm),
        }
    }
}

/// Rounds half-way cases up, `floor(x + 0.5)`.
pub(crate) fn round_half_up<T: Real>(x: T) -> T {
    (x + T::lit(0.5)).floor()
}
