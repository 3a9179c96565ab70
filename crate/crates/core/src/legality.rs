//! Lexicographic legality of schedules and tiling bands.
//!
//! A reordering transformation is legal iff every transformed dependence
//! distance vector stays lexicographically positive. Rectangular tiling of a
//! loop band is legal iff the band is fully permutable: every dependence has
//! a non-negative component in every band dimension. Skewing a dimension by
//! a multiple of the time distance makes negative components non-negative;
//! [`compute_skew_factors`] returns the minimal such factors.

use crate::error::{Error, Result};
use crate::polyhedron::ceild;
use crate::stencil::DependenceVector;
use crate::transform::Schedule;

/// First non-zero component positive; the all-zero vector is not positive.
pub fn is_lex_positive(d: &DependenceVector) -> bool {
    for &c in d.components() {
        if c != 0 {
            return c > 0;
        }
    }
    false
}

/// Outcome of a schedule legality check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LegalityVerdict {
    Legal,
    /// Each entry pairs the original dependence with its transformed image.
    Violations(Vec<(DependenceVector, DependenceVector)>),
}

impl LegalityVerdict {
    pub fn is_legal(&self) -> bool {
        matches!(self, LegalityVerdict::Legal)
    }
}

/// Apply the schedule's linear part to every dependence and test that each
/// image is lexicographically positive.
pub fn check_schedule_legality(
    deps: &[DependenceVector],
    schedule: &Schedule,
) -> Result<LegalityVerdict> {
    let mut violations = Vec::new();
    for d in deps {
        let image = DependenceVector(schedule.apply_linear(d.components())?);
        if !is_lex_positive(&image) {
            violations.push((d.clone(), image));
        }
    }
    if violations.is_empty() {
        Ok(LegalityVerdict::Legal)
    } else {
        Ok(LegalityVerdict::Violations(violations))
    }
}

/// Minimal non-negative factor per requested dimension such that
/// `d[k] + f[k] * d[time] >= 0` for every dependence.
///
/// The time dimension is component 0 and must be positive in every
/// dependence. The rule generalizes the usual "negate the most negative
/// distance" to time distances greater than one via a ceiling division.
pub fn compute_skew_factors(
    deps: &[DependenceVector],
    dims_to_skew: &[usize],
) -> Result<Vec<(usize, i64)>> {
    for d in deps {
        if d.components().is_empty() || d.components()[0] <= 0 {
            return Err(Error::InvalidConfig(format!(
                "dependence {d} has non-positive time component; \
                 skewing is defined only for time-carried dependences"
            )));
        }
    }
    let mut out = Vec::with_capacity(dims_to_skew.len());
    for &k in dims_to_skew {
        let mut f = 0i64;
        for d in deps {
            let dk = d.components()[k];
            let dt = d.components()[0];
            if dk < 0 {
                f = f.max(ceild(-dk, dt));
            }
        }
        out.push((k, f));
    }
    Ok(out)
}

/// Full-permutability check: every dependence has component >= 0 in every
/// band dimension, so a rectangular tiling of the band cannot make a tile
/// depend on a later tile.
pub fn check_tiling_band(deps: &[DependenceVector], band: &[usize]) -> bool {
    deps.iter()
        .all(|d| band.iter().all(|&k| d.components()[k] >= 0))
}

/// The dependence set after skewing each listed dimension by its factor
/// with respect to time (component 0).
pub fn skew_dependences(
    deps: &[DependenceVector],
    factors: &[(usize, i64)],
) -> Vec<DependenceVector> {
    deps.iter()
        .map(|d| {
            let mut c = d.components().to_vec();
            for &(k, f) in factors {
                c[k] += f * c[0];
            }
            DependenceVector(c)
        })
        .collect()
}
