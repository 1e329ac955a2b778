use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::trig::{TrigPolynomial, TrigTerm};

use super::QuasimodeError;

/// Members must have unit norm to this accuracy.
pub const NORM_TOL: f64 = 1e-8;

/// An `h`-indexed family `u(.; h)` of unit-norm trigonometric polynomials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuasimodeFamily {
    dim: usize,
    h_ladder: Vec<f64>,
    members: Vec<TrigPolynomial>,
    /// Norms of the members before normalization.
    raw_norms: Vec<f64>,
}

impl QuasimodeFamily {
    /// Normalizes each member. The ladder must be strictly decreasing and
    /// positive, and no member may vanish.
    pub fn new(h_ladder: Vec<f64>, members: Vec<TrigPolynomial>) -> Result<Self, QuasimodeError> {
        if h_ladder.len() != members.len() || h_ladder.is_empty() {
            return Err(QuasimodeError::Dimension(format!(
                "{} ladder points but {} members",
                h_ladder.len(),
                members.len()
            )));
        }
        if h_ladder.iter().any(|h| !(*h > 0.0) || !h.is_finite())
            || h_ladder.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(QuasimodeError::Ladder(
                "h ladder must be positive and strictly decreasing".into(),
            ));
        }
        let dim = members[0].dim();
        if members.iter().any(|m| m.dim() != dim) {
            return Err(QuasimodeError::Dimension("members on different tori".into()));
        }
        let mut raw_norms = Vec::with_capacity(members.len());
        let mut normalized = Vec::with_capacity(members.len());
        for m in members {
            let n = m.l2_norm();
            let unit = m.normalized().ok_or(QuasimodeError::ZeroMember)?;
            raw_norms.push(n);
            normalized.push(unit);
        }
        Ok(Self {
            dim,
            h_ladder,
            members: normalized,
            raw_norms,
        })
    }

    /// Same profile at every ladder point.
    pub fn constant(h_ladder: Vec<f64>, u: TrigPolynomial) -> Result<Self, QuasimodeError> {
        let members = vec![u; h_ladder.len()];
        Self::new(h_ladder, members)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h_ladder(&self) -> &[f64] {
        &self.h_ladder
    }

    pub fn members(&self) -> &[TrigPolynomial] {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &TrigPolynomial)> {
        self.h_ladder.iter().copied().zip(&self.members)
    }

    pub fn raw_norms(&self) -> &[f64] {
        &self.raw_norms
    }

    pub fn norms(&self) -> Vec<f64> {
        self.members.iter().map(TrigPolynomial::l2_norm).collect()
    }

    pub fn is_normalized(&self) -> bool {
        self.norms().iter().all(|n| (n - 1.0).abs() <= NORM_TOL)
    }

    /// Writes `manifest.json` plus one `member_XX.json` coefficient file per
    /// ladder point into `dir`.
    pub fn write_dir(&self, dir: &Path, provenance: serde_json::Value) -> Result<(), QuasimodeError> {
        fs::create_dir_all(dir).map_err(|e| QuasimodeError::io(dir, e))?;
        let mut files = Vec::new();
        for (i, m) in self.members.iter().enumerate() {
            let name = format!("member_{i:02}.json");
            let path = dir.join(&name);
            let body = serde_json::to_string_pretty(&m.to_json_terms())?;
            fs::write(&path, body + "\n").map_err(|e| QuasimodeError::io(&path, e))?;
            files.push(name);
        }
        let manifest = FamilyManifest {
            dimension: self.dim,
            h_ladder: self.h_ladder.clone(),
            norms: self.norms(),
            raw_norms: self.raw_norms.clone(),
            files,
            provenance,
        };
        let path = dir.join("manifest.json");
        let body = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, body + "\n").map_err(|e| QuasimodeError::io(&path, e))
    }

    pub fn read_dir(dir: &Path) -> Result<Self, QuasimodeError> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| QuasimodeError::io(&path, e))?;
        let manifest: FamilyManifest = serde_json::from_str(&text)?;
        let mut members = Vec::new();
        for f in &manifest.files {
            let path = dir.join(f);
            let text = fs::read_to_string(&path).map_err(|e| QuasimodeError::io(&path, e))?;
            let terms: Vec<TrigTerm> = serde_json::from_str(&text)?;
            members.push(TrigPolynomial::try_from_json_terms(manifest.dimension, &terms)?);
        }
        // validate through the constructor, but keep the stored coefficients bit-exact
        let checked = Self::new(manifest.h_ladder, members.clone())?;
        let fam = Self {
            members,
            raw_norms: manifest.raw_norms,
            ..checked
        };
        if !fam.is_normalized() {
            return Err(QuasimodeError::Dimension(format!(
                "{} holds members that are not unit-normalized",
                dir.display()
            )));
        }
        Ok(fam)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyManifest {
    dimension: usize,
    h_ladder: Vec<f64>,
    norms: Vec<f64>,
    raw_norms: Vec<f64>,
    files: Vec<String>,
    provenance: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::complex::Complex64;

    #[test]
    fn normalizes_members() {
        let u = TrigPolynomial::from_terms(1, [(vec![0], Complex64::new(3.0, 4.0))]);
        let fam = QuasimodeFamily::constant(vec![0.5, 0.25, 0.125], u).unwrap();
        assert!(fam.is_normalized());
        assert_eq!(fam.raw_norms(), &[5.0, 5.0, 5.0]);
    }

    #[test]
    fn rejects_bad_ladders() {
        let u = TrigPolynomial::character(&[1]);
        assert!(QuasimodeFamily::constant(vec![0.25, 0.5], u.clone()).is_err());
        assert!(QuasimodeFamily::constant(vec![0.5, -0.25], u.clone()).is_err());
        assert!(QuasimodeFamily::constant(vec![0.5], TrigPolynomial::zero(1)).is_err());
    }

    #[test]
    fn directory_round_trip() {
        let dir = std::env::temp_dir().join(format!("qmlab-family-{}", std::process::id()));
        let u = &TrigPolynomial::cosine(&[1, 2]) + &TrigPolynomial::constant(2, Complex64::new(2.0, 0.0));
        let fam = QuasimodeFamily::constant(vec![0.5, 0.25, 0.125, 0.0625], u).unwrap();
        fam.write_dir(&dir, serde_json::json!({"source": "test"})).unwrap();
        let back = QuasimodeFamily::read_dir(&dir).unwrap();
        assert_eq!(back, fam);
        fs::remove_dir_all(&dir).ok();
    }
}
