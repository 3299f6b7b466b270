use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Widest outcome register a [`Counts`] can key.
pub const MAX_COUNTS_WIDTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CountsError {
    #[error("counts width {0} exceeds {MAX_COUNTS_WIDTH}")]
    TooWide(usize),
    #[error("bitstring {key:?} is not {width} characters of 0/1")]
    BadKey { key: String, width: usize },
    #[error("outcome {outcome} does not fit in {width} bits")]
    OutOfRange { outcome: u64, width: usize },
    #[error("entry {0:?} has a zero count")]
    ZeroCount(String),
    #[error("counts sum to {sum} but shots is {shots}")]
    TotalMismatch { sum: u64, shots: u64 },
}

/// Measured outcome multiset. Outcomes are integers whose bit `c` is
/// classical bit `c`; the rendered bitstring puts bit 0 rightmost.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Counts {
    width: usize,
    shots: u64,
    entries: BTreeMap<u64, u64>,
}

impl Counts {
    pub fn new(width: usize) -> Result<Self, CountsError> {
        if width > MAX_COUNTS_WIDTH {
            return Err(CountsError::TooWide(width));
        }
        Ok(Counts {
            width,
            shots: 0,
            entries: BTreeMap::new(),
        })
    }

    pub fn from_entries(width: usize, entries: impl IntoIterator<Item = (u64, u64)>) -> Result<Self, CountsError> {
        let mut c = Counts::new(width)?;
        for (outcome, n) in entries {
            c.try_add(outcome, n)?;
        }
        Ok(c)
    }

    /// Convenience constructor from bitstring keys.
    pub fn from_bitstrings<'a>(entries: impl IntoIterator<Item = (&'a str, u64)>) -> Result<Self, CountsError> {
        let mut iter = entries.into_iter().peekable();
        let width = iter.peek().map_or(0, |(k, _)| k.len());
        let mut c = Counts::new(width)?;
        for (key, n) in iter {
            c.try_add(parse_bitstring(key, width)?, n)?;
        }
        Ok(c)
    }

    pub fn try_add(&mut self, outcome: u64, n: u64) -> Result<(), CountsError> {
        if self.width < 64 && outcome >> self.width != 0 {
            return Err(CountsError::OutOfRange {
                outcome,
                width: self.width,
            });
        }
        if n > 0 {
            *self.entries.entry(outcome).or_insert(0) += n;
            self.shots += n;
        }
        Ok(())
    }

    /// Adds `n` observations of `outcome`. Panics if the outcome is wider
    /// than the register.
    pub fn add(&mut self, outcome: u64, n: u64) {
        self.try_add(outcome, n).expect("outcome wider than counts register");
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    /// Number of distinct observed outcomes.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, outcome: u64) -> u64 {
        self.entries.get(&outcome).copied().unwrap_or(0)
    }

    pub fn get_bits(&self, bits: &str) -> u64 {
        parse_bitstring(bits, self.width).map_or(0, |o| self.get(o))
    }

    /// Entries in ascending outcome order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    pub fn bitstring(&self, outcome: u64) -> String {
        to_bitstring(outcome, self.width)
    }
}

pub fn to_bitstring(outcome: u64, width: usize) -> String {
    (0..width).rev().map(|b| if outcome >> b & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn parse_bitstring(key: &str, width: usize) -> Result<u64, CountsError> {
    let bad = || CountsError::BadKey {
        key: key.chars().take(80).collect(),
        width,
    };
    if key.len() != width || width > MAX_COUNTS_WIDTH {
        return Err(bad());
    }
    key.bytes().try_fold(0u64, |acc, b| match b {
        b'0' => Ok(acc << 1),
        b'1' => Ok(acc << 1 | 1),
        _ => Err(bad()),
    })
}

#[derive(Serialize, Deserialize)]
struct CountsRepr {
    width: usize,
    shots: u64,
    entries: BTreeMap<String, u64>,
}

impl Serialize for Counts {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CountsRepr {
            width: self.width,
            shots: self.shots,
            entries: self.iter().map(|(k, v)| (self.bitstring(k), v)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Counts {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = CountsRepr::deserialize(d)?;
        let counts = counts_from_repr(repr).map_err(serde::de::Error::custom)?;
        Ok(counts)
    }
}

fn counts_from_repr(repr: CountsRepr) -> Result<Counts, CountsError> {
    let mut c = Counts::new(repr.width)?;
    for (key, n) in &repr.entries {
        if *n == 0 {
            return Err(CountsError::ZeroCount(key.clone()));
        }
        c.try_add(parse_bitstring(key, repr.width)?, *n)?;
    }
    if c.shots != repr.shots {
        return Err(CountsError::TotalMismatch {
            sum: c.shots,
            shots: repr.shots,
        });
    }
    Ok(c)
}
