//! Covariate enumerations shared by every stage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const MIN_AGE: u32 = 15;
pub const MAX_AGE: u32 = 120;

macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $token)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn token(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }

            /// Position of this member in [`Self::ALL`].
            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(i: usize) -> Option<Self> {
                Self::ALL.get(i).copied()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }

        impl FromStr for $name {
            type Err = UnknownToken;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($token => Ok($name::$variant),)+
                    _ => Err(UnknownToken {
                        kind: stringify!($name),
                        token: s.to_string(),
                    }),
                }
            }
        }
    };
}

token_enum!(
    Sex {
        Female => "female",
        Male => "male",
    }
);

token_enum!(
    DayOfWeek {
        Mon => "Mon",
        Tue => "Tue",
        Wed => "Wed",
        Thu => "Thu",
        Fri => "Fri",
        Sat => "Sat",
        Sun => "Sun",
    }
);

token_enum!(
    Month {
        Jan => "Jan",
        Feb => "Feb",
        Mar => "Mar",
        Apr => "Apr",
        May => "May",
        Jun => "Jun",
        Jul => "Jul",
        Aug => "Aug",
        Sep => "Sep",
        Oct => "Oct",
        Nov => "Nov",
        Dec => "Dec",
    }
);

impl DayOfWeek {
    /// Mon through Fri.
    pub fn is_weekday(self) -> bool {
        !matches!(self, DayOfWeek::Sat | DayOfWeek::Sun)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} token {token:?}")]
pub struct UnknownToken {
    pub kind: &'static str,
    pub token: String,
}

/// Per-person attributes carried alongside the temporal features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CovariateSet {
    pub age: u32,
    pub sex: Sex,
    pub day_of_week: DayOfWeek,
    pub month: Month,
}

impl CovariateSet {
    pub fn age_in_range(age: u32) -> bool {
        (MIN_AGE..=MAX_AGE).contains(&age)
    }
}
