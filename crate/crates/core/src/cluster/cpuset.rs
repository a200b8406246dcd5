use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A set of CPU core indices in kernel list syntax, e.g. `0-3,65-71`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoreSet(BTreeSet<u32>);

impl CoreSet {
    pub fn range(lo: u32, hi_inclusive: u32) -> Self {
        CoreSet((lo..=hi_inclusive).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, core: u32) -> bool {
        self.0.contains(&core)
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }

    pub fn is_disjoint(&self, other: &CoreSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn max(&self) -> Option<u32> {
        self.0.last().copied()
    }
}

impl FromIterator<u32> for CoreSet {
    fn from_iter<I: IntoIterator<Item = u32>>(iter: I) -> Self {
        CoreSet(iter.into_iter().collect())
    }
}

impl FromStr for CoreSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = BTreeSet::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (lo, hi) = match part.split_once('-') {
                Some((a, b)) => (a.trim(), b.trim()),
                None => (part, part),
            };
            let lo: u32 = lo.parse().map_err(|_| format!("bad core index in `{part}`"))?;
            let hi: u32 = hi.parse().map_err(|_| format!("bad core index in `{part}`"))?;
            if lo > hi {
                return Err(format!("descending range `{part}`"));
            }
            set.extend(lo..=hi);
        }
        Ok(CoreSet(set))
    }
}

impl fmt::Display for CoreSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut runs: Vec<(u32, u32)> = Vec::new();
        for c in &self.0 {
            match runs.last_mut() {
                Some((_, hi)) if *hi + 1 == *c => *hi = *c,
                _ => runs.push((*c, *c)),
            }
        }
        let parts: Vec<String> = runs
            .iter()
            .map(|(lo, hi)| if lo == hi { lo.to_string() } else { format!("{lo}-{hi}") })
            .collect();
        f.write_str(&parts.join(","))
    }
}

impl Serialize for CoreSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CoreSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_kernel_list_syntax() {
        let reserved: CoreSet = "0-3,65-71".parse().unwrap();
        assert_eq!(reserved.len(), 11);
        assert_eq!(reserved.to_string(), "0-3,65-71");
        let isolated: CoreSet = "4-64".parse().unwrap();
        assert_eq!(isolated.len(), 61);
        assert!(reserved.is_disjoint(&isolated));
        assert_eq!("5".parse::<CoreSet>().unwrap().to_string(), "5");
        assert!("3-1".parse::<CoreSet>().is_err());
        assert!("a-b".parse::<CoreSet>().is_err());
    }
}
