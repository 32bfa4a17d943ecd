//! The six-valued qualitative interaction algebra.
//!
//! An interaction carries two components: whether the temporal order of its
//! endpoints is known, and the polarity of its qualitative probabilistic
//! influence. The six combinations are the interaction signs. Two binary
//! operators combine them: [`chain`] for interactions in series along a path
//! and [`parallel`] for alternative paths between the same endpoints. Both are
//! stored as explicit lookup tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// One of the six interaction types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    /// `a`: no known temporal order, unknown influence.
    Association,
    /// `p`: known temporal order, unknown influence.
    Precedence,
    /// `+`: unknown temporal order, positive influence.
    Positive,
    /// `-`: unknown temporal order, negative influence.
    Negative,
    /// `c`: known temporal order, positive influence.
    Cause,
    /// `i`: known temporal order, negative influence.
    Inhibition,
}

/// Whether the temporal precedence between the endpoints is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemporalPrecedence {
    Known,
    Unknown,
}

/// Polarity of a qualitative probabilistic influence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QualInfluence {
    Positive,
    Negative,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("no path: cannot fold an empty collection of interactions")]
    NoPath,
    #[error("invalid interaction sign {0:?}; expected one of a p + - c i")]
    InvalidSign(String),
}

impl Sign {
    pub const ALL: [Sign; 6] = [
        Sign::Association,
        Sign::Precedence,
        Sign::Positive,
        Sign::Negative,
        Sign::Cause,
        Sign::Inhibition,
    ];

    fn index(self) -> usize {
        match self {
            Sign::Association => 0,
            Sign::Precedence => 1,
            Sign::Positive => 2,
            Sign::Negative => 3,
            Sign::Cause => 4,
            Sign::Inhibition => 5,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Sign::Association => 'a',
            Sign::Precedence => 'p',
            Sign::Positive => '+',
            Sign::Negative => '-',
            Sign::Cause => 'c',
            Sign::Inhibition => 'i',
        }
    }

    pub fn from_char(ch: char) -> Option<Sign> {
        Some(match ch {
            'a' => Sign::Association,
            'p' => Sign::Precedence,
            '+' => Sign::Positive,
            '-' => Sign::Negative,
            'c' => Sign::Cause,
            'i' => Sign::Inhibition,
            _ => return None,
        })
    }

    /// True for `p`, `c` and `i`: the signs that fix a temporal order.
    pub fn is_temporal(self) -> bool {
        self.temporal() == TemporalPrecedence::Known
    }

    /// True for the signs that assert an influence with known polarity.
    pub fn is_influence(self) -> bool {
        self.influence() != QualInfluence::Unknown
    }

    pub fn temporal(self) -> TemporalPrecedence {
        decompose(self).0
    }

    pub fn influence(self) -> QualInfluence {
        decompose(self).1
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for Sign {
    type Err = AlgebraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(ch), None) => {
                Sign::from_char(ch).ok_or_else(|| AlgebraError::InvalidSign(s.to_string()))
            }
            _ => Err(AlgebraError::InvalidSign(s.to_string())),
        }
    }
}

impl Serialize for Sign {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Splits a sign into its temporal and influence components.
pub fn decompose(sign: Sign) -> (TemporalPrecedence, QualInfluence) {
    use QualInfluence as Q;
    use TemporalPrecedence as T;
    match sign {
        Sign::Association => (T::Unknown, Q::Unknown),
        Sign::Precedence => (T::Known, Q::Unknown),
        Sign::Positive => (T::Unknown, Q::Positive),
        Sign::Negative => (T::Unknown, Q::Negative),
        Sign::Cause => (T::Known, Q::Positive),
        Sign::Inhibition => (T::Known, Q::Negative),
    }
}

/// Inverse of [`decompose`].
pub fn compose(temporal: TemporalPrecedence, influence: QualInfluence) -> Sign {
    use QualInfluence as Q;
    use TemporalPrecedence as T;
    match (temporal, influence) {
        (T::Unknown, Q::Unknown) => Sign::Association,
        (T::Known, Q::Unknown) => Sign::Precedence,
        (T::Unknown, Q::Positive) => Sign::Positive,
        (T::Unknown, Q::Negative) => Sign::Negative,
        (T::Known, Q::Positive) => Sign::Cause,
        (T::Known, Q::Negative) => Sign::Inhibition,
    }
}

// Rows and columns are both ordered a, p, +, -, c, i.
const A: Sign = Sign::Association;
const P: Sign = Sign::Precedence;
const POS: Sign = Sign::Positive;
const NEG: Sign = Sign::Negative;
const C: Sign = Sign::Cause;
const I: Sign = Sign::Inhibition;

const CHAIN_TABLE: [[Sign; 6]; 6] = [
    [A, A, A, A, A, A],
    [A, P, A, A, P, P],
    [A, A, POS, NEG, POS, NEG],
    [A, A, NEG, POS, NEG, POS],
    [A, P, POS, NEG, C, I],
    [A, P, NEG, POS, I, C],
];

const PARALLEL_TABLE: [[Sign; 6]; 6] = [
    [A, P, A, A, P, P],
    [P, P, P, P, P, P],
    [A, P, POS, A, C, P],
    [A, P, A, NEG, P, I],
    [P, P, C, P, C, P],
    [P, P, P, I, P, I],
];

/// Combines two interactions in series (`x` then `y`).
pub fn chain(x: Sign, y: Sign) -> Sign {
    CHAIN_TABLE[x.index()][y.index()]
}

/// Combines two interactions acting in parallel between the same endpoints.
pub fn parallel(x: Sign, y: Sign) -> Sign {
    PARALLEL_TABLE[x.index()][y.index()]
}

/// Left fold of [`chain`] over the signs along a path.
pub fn chain_fold<I>(signs: I) -> Result<Sign, AlgebraError>
where
    I: IntoIterator<Item = Sign>,
{
    signs.into_iter().reduce(chain).ok_or(AlgebraError::NoPath)
}

/// Fold of [`parallel`] over the net signs of alternative paths.
pub fn parallel_fold<I>(signs: I) -> Result<Sign, AlgebraError>
where
    I: IntoIterator<Item = Sign>,
{
    signs
        .into_iter()
        .reduce(parallel)
        .ok_or(AlgebraError::NoPath)
}
