use std::collections::HashMap;
use std::ops::Add;
use std::sync::Arc;

use super::{Feature, FeatureError, FeatureKey};
use crate::scalar::{Scalar, Weight};

/// Entries of one side of a join that share a value array.
type KeyedWeights<'a, S> = Vec<(&'a Arc<FeatureKey>, &'a S)>;

/// A sparse feature vector: features sorted by serialized form, no zero
/// weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector<S> {
    entries: Vec<(Feature, S)>,
}

impl<S> Default for SparseVector<S> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
        }
    }
}

impl<S: Weight> SparseVector<S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Collects `(feature, weight)` pairs, summing duplicates and dropping
    /// entries whose total is zero.
    pub fn from_entries<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (Feature, S)>,
    {
        let mut raw: Vec<(Feature, S)> = entries.into_iter().collect();
        raw.sort_by(|a, b| a.0.cmp(&b.0));
        let mut entries: Vec<(Feature, S)> = Vec::with_capacity(raw.len());
        for (feature, weight) in raw {
            match entries.last_mut() {
                Some((last, acc)) if *last == feature => *acc += weight,
                _ => entries.push((feature, weight)),
            }
        }
        entries.retain(|(_, w)| !w.is_zero());
        Self { entries }
    }

    /// Every feature with weight one; duplicates collapse to a single entry.
    pub fn binary<I>(features: I) -> Self
    where
        I: IntoIterator<Item = Feature>,
    {
        let mut features: Vec<Feature> = features.into_iter().collect();
        features.sort();
        features.dedup();
        Self {
            entries: features.into_iter().map(|f| (f, S::one())).collect(),
        }
    }

    pub fn singleton(feature: Feature, weight: S) -> Self {
        Self::from_entries([(feature, weight)])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Feature, &S)> + '_ {
        self.entries.iter().map(|(f, w)| (f, w))
    }

    pub fn features(&self) -> impl Iterator<Item = &Feature> + '_ {
        self.entries.iter().map(|(f, _)| f)
    }

    pub fn get(&self, feature: &Feature) -> Option<&S> {
        self.entries
            .binary_search_by(|(f, _)| f.cmp(feature))
            .ok()
            .map(|i| &self.entries[i].1)
    }

    pub fn contains(&self, feature: &Feature) -> bool {
        self.get(feature).is_some()
    }

    /// True when every weight is exactly one.
    pub fn is_binary(&self) -> bool {
        self.entries.iter().all(|(_, w)| w.is_one())
    }

    pub fn into_entries(self) -> Vec<(Feature, S)> {
        self.entries
    }

    pub fn scale(&self, factor: S) -> Self {
        Self::from_entries(
            self.entries
                .iter()
                .map(|(f, w)| (f.clone(), w.clone() * factor.clone())),
        )
    }

    /// `f ⊗ g`: every pair of entries yields `((k_f,k_g)=(v_f,v_g), w_f·w_g)`.
    pub fn cartesian(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for (f, wf) in &self.entries {
            for (g, wg) in &other.entries {
                out.push((Feature::cartesian(f, g), wf.clone() * wg.clone()));
            }
        }
        Self::from_entries(out)
    }

    /// `f ⋈ g`: every pair of entries with equal values yields
    /// `((k_f=k_g)=1, w_f·w_g)`; pairs mapping to the same key pair accumulate.
    pub fn join(&self, other: &Self) -> Self {
        let mut by_value: HashMap<&[Arc<str>], KeyedWeights<'_, S>> = HashMap::new();
        for (g, wg) in &other.entries {
            by_value.entry(&g.value()[..]).or_default().push((g.key(), wg));
        }
        let mut out = Vec::new();
        for (f, wf) in &self.entries {
            if let Some(matches) = by_value.get(&f.value()[..]) {
                for (gkey, wg) in matches {
                    out.push((Feature::join_of(f.key(), gkey), wf.clone() * (*wg).clone()));
                }
            }
        }
        Self::from_entries(out)
    }

    /// Inner product over the shared support.
    pub fn dot(&self, other: &Self) -> S {
        let (mut i, mut j) = (0, 0);
        let mut acc = S::zero();
        while i < self.entries.len() && j < other.entries.len() {
            match self.entries[i].0.cmp(&other.entries[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.entries[i].1.clone() * other.entries[j].1.clone();
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Whether the two vectors share at least one feature.
    pub fn overlaps(&self, other: &Self) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            match self.entries[i].0.cmp(&other.entries[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }
}

impl<S: Scalar> SparseVector<S> {
    pub fn l2_norm(&self) -> S {
        self.entries.iter().map(|(_, w)| *w * *w).sum::<S>().sqrt()
    }

    /// Divides every weight by the Euclidean norm.
    pub fn l2_normalize(&self) -> Result<Self, FeatureError> {
        if self.is_empty() {
            return Err(FeatureError::EmptyNormalization);
        }
        let norm = self.l2_norm();
        Ok(Self::from_entries(
            self.entries.iter().map(|(f, w)| (f.clone(), *w / norm)),
        ))
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|(_, w)| w.is_finite())
    }
}

impl<S: Weight> Add for &SparseVector<S> {
    type Output = SparseVector<S>;

    fn add(self, rhs: Self) -> SparseVector<S> {
        SparseVector::from_entries(self.entries.iter().chain(rhs.entries.iter()).cloned())
    }
}

impl<S: Weight> Add for SparseVector<S> {
    type Output = SparseVector<S>;

    fn add(self, rhs: Self) -> SparseVector<S> {
        SparseVector::from_entries(self.entries.into_iter().chain(rhs.entries))
    }
}

impl<S: Weight> FromIterator<(Feature, S)> for SparseVector<S> {
    fn from_iter<I: IntoIterator<Item = (Feature, S)>>(iter: I) -> Self {
        Self::from_entries(iter)
    }
}
