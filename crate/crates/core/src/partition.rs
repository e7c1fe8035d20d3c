//! Group partitions of the weight index set and the group-sparsity operators
//! built on them: the l1,2 mixed norm, the log-sum group penalty, the
//! subgradient attractor `s` and the reweighting coefficients `beta`.
//!
//! Everything here is a pure function of its inputs.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Group norms strictly below this are treated as zero by the attractor.
pub const ZERO_GROUP_THRESHOLD: f64 = 1e-12;

/// A disjoint cover of `0..len` by non-empty groups.
///
/// Groups produced by [`GroupPartition::contiguous`] are consecutive index
/// ranges; [`GroupPartition::from_groups`] accepts arbitrary disjoint index
/// sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    len: usize,
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl GroupPartition {
    /// Consecutive groups of `group_size` entries; the last group is shorter
    /// when `len` is not a multiple of `group_size`.
    pub fn contiguous(len: usize, group_size: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Parameter("filter length must be at least 1".into()));
        }
        if group_size == 0 {
            return Err(Error::Parameter("group size must be at least 1".into()));
        }
        let groups = (0..len)
            .step_by(group_size)
            .map(|start| (start..(start + group_size).min(len)).collect())
            .collect();
        Self::from_groups(len, groups)
    }

    pub fn from_ranges(len: usize, ranges: &[Range<usize>]) -> Result<Self> {
        Self::from_groups(len, ranges.iter().map(|r| r.clone().collect()).collect())
    }

    pub fn singletons(len: usize) -> Result<Self> {
        Self::contiguous(len, 1)
    }

    pub fn from_groups(len: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        if len == 0 {
            return Err(Error::Parameter("filter length must be at least 1".into()));
        }
        if groups.is_empty() {
            return Err(Error::Parameter("partition needs at least one group".into()));
        }
        let mut group_of = vec![usize::MAX; len];
        for (j, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::Parameter(format!("group {j} is empty")));
            }
            for &i in group {
                if i >= len {
                    return Err(Error::Parameter(format!(
                        "group {j} holds index {i} outside 0..{len}"
                    )));
                }
                if group_of[i] != usize::MAX {
                    return Err(Error::Parameter(format!(
                        "index {i} appears in groups {} and {j}",
                        group_of[i]
                    )));
                }
                group_of[i] = j;
            }
        }
        if let Some(i) = group_of.iter().position(|&j| j == usize::MAX) {
            return Err(Error::Parameter(format!("index {i} is not covered")));
        }
        Ok(Self {
            len,
            groups,
            group_of,
        })
    }

    /// Filter length `L`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of groups `J`.
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> impl Iterator<Item = &[usize]> {
        self.groups.iter().map(Vec::as_slice)
    }

    pub fn group(&self, j: usize) -> &[usize] {
        &self.groups[j]
    }

    /// Group index owning weight index `i`.
    pub fn group_of(&self, i: usize) -> usize {
        self.group_of[i]
    }

    fn check(&self, w: &[f64]) -> Result<()> {
        check_len(self.len, w.len())
    }
}

/// How the attractor is weighted per group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttractorMode {
    /// Group zero-attractor: every group weighted by 1.
    Gza,
    /// Reweighted group zero-attractor: group `j` weighted by
    /// `1 / (||w_j|| + epsilon)`.
    Grza { epsilon: f64 },
}

impl AttractorMode {
    pub fn grza(epsilon: f64) -> Result<Self> {
        let mode = AttractorMode::Grza { epsilon };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AttractorMode::Gza => Ok(()),
            AttractorMode::Grza { epsilon } if epsilon > 0.0 && epsilon.is_finite() => Ok(()),
            AttractorMode::Grza { epsilon } => Err(Error::Parameter(format!(
                "reweighting epsilon must be positive, got {epsilon}"
            ))),
        }
    }

    /// Weight of a group with Euclidean norm `group_norm`.
    #[inline]
    pub fn beta(&self, group_norm: f64) -> f64 {
        match *self {
            AttractorMode::Gza => 1.0,
            AttractorMode::Grza { epsilon } => 1.0 / (group_norm + epsilon),
        }
    }
}

#[inline]
fn norm_of(w: &[f64], group: &[usize]) -> f64 {
    group.iter().map(|&i| w[i] * w[i]).sum::<f64>().sqrt()
}

/// Euclidean norm of every group of `w`.
pub fn group_norms(w: &[f64], p: &GroupPartition) -> Result<Vec<f64>> {
    p.check(w)?;
    Ok(p.groups().map(|g| norm_of(w, g)).collect())
}

/// Mixed l1,2 norm: the sum of group Euclidean norms.
pub fn l12_norm(w: &[f64], p: &GroupPartition) -> Result<f64> {
    Ok(group_norms(w, p)?.into_iter().sum())
}

/// `sum_j log(1 + ||w_j|| / epsilon)`.
pub fn log_sum_penalty(w: &[f64], p: &GroupPartition, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!(
            "log-sum epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(group_norms(w, p)?
        .into_iter()
        .map(|n| (n / epsilon).ln_1p())
        .sum())
}

/// Subgradient of the l1,2 norm: each group normalised to unit length, or
/// left at zero when its norm is below [`ZERO_GROUP_THRESHOLD`].
pub fn attractor_direction(w: &[f64], p: &GroupPartition) -> Result<Vec<f64>> {
    let mut s = vec![0.0; w.len()];
    weighted_attractor_with(w, p, |_, _| 1.0, &mut s)?;
    Ok(s)
}

/// Per-group weighting coefficients, length `J`.
pub fn beta_weights(w: &[f64], p: &GroupPartition, mode: AttractorMode) -> Result<Vec<f64>> {
    mode.validate()?;
    Ok(group_norms(w, p)?.into_iter().map(|n| mode.beta(n)).collect())
}

/// Replicates each per-group value across the indices of its group.
pub fn expand_group_vector(per_group: &[f64], p: &GroupPartition) -> Result<Vec<f64>> {
    check_len(p.num_groups(), per_group.len())?;
    Ok(p.group_of.iter().map(|&j| per_group[j]).collect())
}

/// Mean of each group's entries; the left inverse of [`expand_group_vector`].
pub fn group_means(v: &[f64], p: &GroupPartition) -> Result<Vec<f64>> {
    p.check(v)?;
    Ok(p
        .groups()
        .map(|g| g.iter().map(|&i| v[i]).sum::<f64>() / g.len() as f64)
        .collect())
}

/// The attractor term `beta ∘ s` of the update, length `L`.
pub fn weighted_attractor(w: &[f64], p: &GroupPartition, mode: AttractorMode) -> Result<Vec<f64>> {
    mode.validate()?;
    let mut out = vec![0.0; w.len()];
    weighted_attractor_with(w, p, |_, norm| mode.beta(norm), &mut out)?;
    Ok(out)
}

/// Writes `beta ∘ s` into `out`, where `beta(j, norm_j)` gives the weight of
/// group `j`. Zero groups contribute nothing regardless of their weight.
pub fn weighted_attractor_with<F>(
    w: &[f64],
    p: &GroupPartition,
    beta: F,
    out: &mut [f64],
) -> Result<()>
where
    F: Fn(usize, f64) -> f64,
{
    p.check(w)?;
    check_len(p.len, out.len())?;
    for (j, group) in p.groups().enumerate() {
        let norm = norm_of(w, group);
        if norm < ZERO_GROUP_THRESHOLD {
            for &i in group {
                out[i] = 0.0;
            }
        } else {
            let b = beta(j, norm);
            for &i in group {
                out[i] = b * (w[i] / norm);
            }
        }
    }
    Ok(())
}
