use std::fmt;
use std::str::FromStr;

use super::ModelError;

/// An assignment of ±1 to every spin, indexed by spin id.
///
/// Ordering is lexicographic by spin id with −1 < +1, which is the
/// tie-breaking order used wherever a single representative is chosen.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinState(Vec<i8>);

impl SpinState {
    pub fn new(values: Vec<i8>) -> Result<Self, ModelError> {
        if let Some(pos) = values.iter().position(|&v| v != 1 && v != -1) {
            return Err(ModelError::InvalidSpinValue {
                index: pos,
                value: values[pos],
            });
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize, value: i8) -> Self {
        assert!(value == 1 || value == -1, "spin value must be ±1");
        Self(vec![value; n])
    }

    /// Decodes the low `n` bits of `bits`; bit `i` set means spin `i` is +1.
    pub fn from_bits(bits: u64, n: usize) -> Self {
        debug_assert!(n <= 64);
        Self((0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect())
    }

    /// Inverse of [`SpinState::from_bits`]. Only valid for at most 64 spins.
    pub fn to_bits(&self) -> u64 {
        assert!(self.0.len() <= 64, "bit encoding holds at most 64 spins");
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .fold(0u64, |acc, (i, _)| acc | 1 << i)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = -self.0[i];
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.flip(i);
        s
    }

    pub fn global_flip(&self) -> Self {
        Self(self.0.iter().map(|v| -v).collect())
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }
}

impl fmt::Display for SpinState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &v in &self.0 {
            f.write_str(if v == 1 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for SpinState {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .chars()
            .enumerate()
            .map(|(i, c)| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(ModelError::InvalidStateChar { index: i, found: other }),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl serde::Serialize for SpinState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for SpinState {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_round_trip() {
        let s: SpinState = "+-+".parse().unwrap();
        assert_eq!(s.values(), &[1, -1, 1]);
        assert_eq!(s.to_string(), "+-+");
        assert!("+x".parse::<SpinState>().is_err());
    }

    #[test]
    fn bits_round_trip() {
        for bits in 0..32u64 {
            assert_eq!(SpinState::from_bits(bits, 5).to_bits(), bits);
        }
    }

    #[test]
    fn lexicographic_order_puts_minus_first() {
        let a: SpinState = "-+".parse().unwrap();
        let b: SpinState = "+-".parse().unwrap();
        assert!(a < b);
    }

    #[test]
    fn rejects_non_unit_values() {
        assert!(SpinState::new(vec![1, 0]).is_err());
    }
}
