//! JSON persistence for computed distributions.
//!
//! One document per `(b, r, K)`:
//!
//! ```json
//! {"base": 2, "r": "1", "s_r": 1,
//!  "atoms": [{"k": 0, "mass": "1/2"}, {"k": 1, "mass": "1/4"}],
//!  "tail": "1/4"}
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::digits::Expansion;
use crate::error::{Error, Result};
use crate::exactdist::{distribution_of, format_rational, parse_rational, AtomicDistribution};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub k: usize,
    pub mass: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionRecord {
    pub base: u32,
    pub r: String,
    pub s_r: u64,
    pub atoms: Vec<AtomRecord>,
    pub tail: String,
}

impl From<&AtomicDistribution> for DistributionRecord {
    fn from(d: &AtomicDistribution) -> Self {
        Self {
            base: d.base,
            r: d.r.to_string(),
            s_r: d.s_r,
            atoms: d
                .atoms
                .iter()
                .enumerate()
                .map(|(k, m)| AtomRecord { k, mass: format_rational(m) })
                .collect(),
            tail: format_rational(&d.tail_mass),
        }
    }
}

impl DistributionRecord {
    pub fn to_distribution(&self) -> Result<AtomicDistribution> {
        let r: BigUint = self
            .r
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad r in cache record: {:?}", self.r)))?;
        let e = Expansion::new(&r, self.base)?;
        if e.digit_sum() != self.s_r {
            return Err(Error::InvalidArgument("cached s_r does not match r".into()));
        }
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (i, a) in self.atoms.iter().enumerate() {
            if a.k != i {
                return Err(Error::InvalidArgument(format!("atom {} out of order", a.k)));
            }
            atoms.push(parse_rational(&a.mass)?);
        }
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("cache record has no atoms".into()));
        }
        Ok(AtomicDistribution {
            base: self.base,
            r,
            s_r: self.s_r,
            digit_count: e.len(),
            atoms,
            tail_mass: parse_rational(&self.tail)?,
        })
    }
}

/// A directory of cached distributions, content-addressed by `(b, r, K)`.
#[derive(Clone, Debug)]
pub struct DistributionCache {
    dir: PathBuf,
}

impl DistributionCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, base: u32, r: &BigUint, cutoff: usize) -> PathBuf {
        self.dir.join(format!("b{base}-K{cutoff}-r{r}.json"))
    }

    pub fn load(&self, base: u32, r: &BigUint, cutoff: usize) -> Result<Option<AtomicDistribution>> {
        let path = self.path_for(base, r, cutoff);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let record: DistributionRecord = serde_json::from_str(&text)?;
        let dist = record.to_distribution()?;
        if dist.r != *r || dist.base != base || dist.cutoff() != cutoff {
            return Err(Error::InvalidArgument(format!("cache entry {} has a mismatched key", path.display())));
        }
        Ok(Some(dist))
    }

    /// Writes to a temporary file in the cache directory, then renames it
    /// into place.
    pub fn store(&self, dist: &AtomicDistribution) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(dist.base, &dist.r, dist.cutoff());
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        serde_json::to_writer(&mut tmp, &DistributionRecord::from(dist))?;
        tmp.write_all(b"\n")?;
        tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
        Ok(path)
    }

    /// Loads the distribution, computing and storing it on a miss.
    pub fn get_or_compute(&self, e: &Expansion, cutoff: usize) -> Result<AtomicDistribution> {
        let r = e.value();
        if let Some(d) = self.load(e.base(), &r, cutoff)? {
            return Ok(d);
        }
        let d = distribution_of(e, cutoff);
        self.store(&d)?;
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactdist::mu_distribution;

    #[test]
    fn record_layout() {
        let d = mu_distribution(&BigUint::from(1u32), 2, 1).unwrap();
        let json = serde_json::to_string(&DistributionRecord::from(&d)).unwrap();
        assert_eq!(
            json,
            r#"{"base":2,"r":"1","s_r":1,"atoms":[{"k":0,"mass":"1/2"},{"k":1,"mass":"1/4"}],"tail":"1/4"}"#
        );
    }

    #[test]
    fn store_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DistributionCache::new(dir.path());
        let e = Expansion::from_u64(5900991, 10).unwrap();
        assert!(cache.load(10, &e.value(), 12).unwrap().is_none());
        let computed = cache.get_or_compute(&e, 12).unwrap();
        let loaded = cache.load(10, &e.value(), 12).unwrap().unwrap();
        assert_eq!(computed, loaded);
        assert!(cache.path_for(10, &e.value(), 12).exists());
    }

    #[test]
    fn rejects_mismatched_digit_sum() {
        let mut rec = DistributionRecord::from(&mu_distribution(&BigUint::from(3u32), 2, 4).unwrap());
        rec.s_r = 7;
        assert!(rec.to_distribution().is_err());
    }
}
