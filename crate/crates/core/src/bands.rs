//! Detection band layouts.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `L` disjoint detection intervals `[lo, hi)` in nm, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutJson", into = "LayoutJson")]
pub struct BandLayout {
    bands: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutJson {
    bands: Vec<[f64; 2]>,
}

impl TryFrom<LayoutJson> for BandLayout {
    type Error = Error;
    fn try_from(value: LayoutJson) -> Result<Self> {
        Self::new(value.bands.into_iter().map(|[lo, hi]| (lo, hi)).collect())
    }
}

impl From<BandLayout> for LayoutJson {
    fn from(value: BandLayout) -> Self {
        LayoutJson { bands: value.bands.into_iter().map(|(lo, hi)| [lo, hi]).collect() }
    }
}

impl BandLayout {
    pub fn new(bands: Vec<(f64, f64)>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidLayout("at least one band is required".into()));
        }
        for (i, &(lo, hi)) in bands.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                return Err(Error::InvalidLayout(format!("band {i} [{lo}, {hi}) is empty or non-finite")));
            }
        }
        if let Some(i) = bands.windows(2).position(|w| w[1].0 < w[0].1) {
            return Err(Error::InvalidLayout(format!("bands {i} and {} overlap or are unsorted", i + 1)));
        }
        Ok(Self { bands })
    }

    /// `count` contiguous equal-width bands covering `[lo, hi)`.
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidLayout("band count must be positive".into()));
        }
        let edge = |i: usize| if i == count { hi } else { lo + (hi - lo) * i as f64 / count as f64 };
        Self::new((0..count).map(|i| (edge(i), edge(i + 1))).collect())
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn bands(&self) -> &[(f64, f64)] {
        &self.bands
    }

    /// Merges each contiguous group of bands into one interval.
    pub fn merged(&self, groups: &[Range<usize>]) -> Result<Self> {
        validate_partition(groups, self.len())?;
        Self::new(groups.iter().map(|g| (self.bands[g.start].0, self.bands[g.end - 1].1)).collect())
    }
}

/// Checks that `groups` are non-empty, contiguous and cover `0..len` exactly.
pub fn validate_partition(groups: &[Range<usize>], len: usize) -> Result<()> {
    if groups.is_empty() {
        return Err(Error::InvalidPartition("no groups".into()));
    }
    let mut next = 0;
    for g in groups {
        if g.start != next || g.end <= g.start {
            return Err(Error::InvalidPartition(format!(
                "group {}..{} does not continue at band {next}",
                g.start, g.end
            )));
        }
        next = g.end;
    }
    if next != len {
        return Err(Error::InvalidPartition(format!("groups cover {next} of {len} bands")));
    }
    Ok(())
}

/// Splits `0..len` into `parts` contiguous runs whose sizes differ by at most
/// one (larger runs first).
pub fn contiguous_groups(len: usize, parts: usize) -> Result<Vec<Range<usize>>> {
    if parts == 0 || parts > len {
        return Err(Error::InvalidPartition(format!("cannot split {len} bands into {parts} groups")));
    }
    let base = len / parts;
    let extra = len % parts;
    let mut start = 0;
    Ok((0..parts)
        .map(|i| {
            let size = base + usize::from(i < extra);
            let g = start..start + size;
            start += size;
            g
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let layout: BandLayout = serde_json::from_str(r#"{"bands": [[400, 450], [450, 500]]}"#).unwrap();
        assert_eq!(layout.len(), 2);
        assert_eq!(serde_json::to_string(&layout).unwrap(), r#"{"bands":[[400.0,450.0],[450.0,500.0]]}"#);
        assert!(serde_json::from_str::<BandLayout>(r#"{"bands": [[400, 460], [450, 500]]}"#).is_err());
        assert!(serde_json::from_str::<BandLayout>(r#"{"bands": [[400, 400]]}"#).is_err());
        assert!(serde_json::from_str::<BandLayout>(r#"{"bands": []}"#).is_err());
    }

    #[test]
    fn uniform_edges_are_shared() {
        let l = BandLayout::uniform(400.0, 700.0, 7).unwrap();
        assert_eq!(l.bands()[0].0, 400.0);
        assert_eq!(l.bands()[6].1, 700.0);
        for w in l.bands().windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
    }

    #[test]
    fn groups_and_merge() {
        let g = contiguous_groups(32, 3).unwrap();
        assert_eq!(g, vec![0..11, 11..22, 22..32]);
        let l = BandLayout::uniform(400.0, 720.0, 32).unwrap();
        let m = l.merged(&g).unwrap();
        assert_eq!(m.bands()[0], (400.0, 510.0));
        assert_eq!(m.bands()[2].1, 720.0);
        assert!(validate_partition(&[0..2, 3..4], 4).is_err());
        assert!(validate_partition(&[0..2, 2..3], 4).is_err());
        assert!(contiguous_groups(3, 4).is_err());
    }
}
