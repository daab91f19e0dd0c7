use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Surface type under the sensor. Integer codes 0..=3 are stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceLabel {
    Flat = 0,
    Curve = 1,
    Edge = 2,
    Corner = 3,
}

impl SurfaceLabel {
    pub const ALL: [SurfaceLabel; 4] = [Self::Flat, Self::Curve, Self::Edge, Self::Corner];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Flat => "flat",
            Self::Curve => "curve",
            Self::Edge => "edge",
            Self::Corner => "corner",
        }
    }

    /// Inspection colormap: flat gray, curve green, edge blue, corner red.
    pub fn color(self) -> [u8; 3] {
        match self {
            Self::Flat => [128, 128, 128],
            Self::Curve => [0, 200, 0],
            Self::Edge => [0, 0, 255],
            Self::Corner => [255, 0, 0],
        }
    }
}

impl fmt::Display for SurfaceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SurfaceLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .or_else(|| s.parse::<u8>().ok().and_then(Self::from_code))
            .ok_or_else(|| format!("unknown surface label `{s}`"))
    }
}
