//! Top-k retrieval by document-at-a-time postings merge.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{IndexError, InvertedIndex};
use crate::feature::SparseVector;
use crate::scalar::Weight;

#[derive(Debug, Clone, PartialEq)]
pub struct Hit<S> {
    pub doc_id: String,
    pub ordinal: u32,
    pub score: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchStats {
    /// Distinct documents reached through any query postings list.
    pub docs_scored: usize,
    pub postings_touched: usize,
}

/// Hits by descending score, ties by ascending ordinal.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult<S> {
    pub hits: Vec<Hit<S>>,
    pub stats: SearchStats,
}

/// Heap entry ordered so that "greater" means "ranks higher".
struct Ranked<S> {
    score: S,
    ordinal: u32,
}

impl<S: PartialOrd> Ord for Ranked<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .partial_cmp(&other.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.ordinal.cmp(&self.ordinal))
    }
}

impl<S: PartialOrd> PartialOrd for Ranked<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: PartialOrd> PartialEq for Ranked<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<S: PartialOrd> Eq for Ranked<S> {}

/// Keeps the k best entries seen so far.
struct TopK<S> {
    k: usize,
    heap: BinaryHeap<Reverse<Ranked<S>>>,
}

impl<S: PartialOrd> TopK<S> {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k.min(1 << 16) + 1),
        }
    }

    fn offer(&mut self, score: S, ordinal: u32) {
        let entry = Ranked { score, ordinal };
        if self.heap.len() < self.k {
            self.heap.push(Reverse(entry));
        } else if let Some(Reverse(worst)) = self.heap.peek() {
            if entry > *worst {
                self.heap.pop();
                self.heap.push(Reverse(entry));
            }
        }
    }

    fn into_sorted(self) -> Vec<Ranked<S>> {
        let mut out: Vec<Ranked<S>> = self.heap.into_iter().map(|Reverse(r)| r).collect();
        out.sort_by(|a, b| b.cmp(a));
        out
    }
}

impl InvertedIndex {
    /// Scores every document sharing at least one feature with `query` by
    /// the sum of the matched query weights and returns the best `k`.
    ///
    /// Postings cursors advance through a min-ordinal frontier, so each
    /// matching document is scored exactly once and unmatched documents are
    /// never visited.
    pub fn search<S: Weight>(&self, query: &SparseVector<S>, k: usize) -> Result<SearchResult<S>, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        let cursors: Vec<(&[u32], &S)> = query
            .iter()
            .map(|(f, w)| (self.postings(f), w))
            .filter(|(list, _)| !list.is_empty())
            .collect();
        // (ordinal, cursor index): equal ordinals pop in query-feature order,
        // which fixes the summation order.
        let mut frontier: BinaryHeap<Reverse<(u32, usize)>> = cursors
            .iter()
            .enumerate()
            .map(|(i, (list, _))| Reverse((list[0], i)))
            .collect();
        let mut offsets = vec![0usize; cursors.len()];
        let mut top = TopK::new(k);
        let mut stats = SearchStats::default();

        while let Some(&Reverse((doc, _))) = frontier.peek() {
            let mut score = S::zero();
            while let Some(&Reverse((d, i))) = frontier.peek() {
                if d != doc {
                    break;
                }
                frontier.pop();
                let (list, w) = cursors[i];
                score += w.clone();
                stats.postings_touched += 1;
                offsets[i] += 1;
                if let Some(&next) = list.get(offsets[i]) {
                    frontier.push(Reverse((next, i)));
                }
            }
            stats.docs_scored += 1;
            top.offer(score, doc);
        }
        Ok(self.finish(top, stats))
    }

    fn finish<S: Weight>(&self, top: TopK<S>, stats: SearchStats) -> SearchResult<S> {
        let hits = top
            .into_sorted()
            .into_iter()
            .map(|r| Hit {
                doc_id: self.doc_id(r.ordinal).to_string(),
                ordinal: r.ordinal,
                score: r.score,
            })
            .collect();
        SearchResult { hits, stats }
    }
}

/// Reference implementation: scores every candidate by a full dot product.
pub fn exhaustive_search<S, D>(
    candidates: &[(D, SparseVector<S>)],
    query: &SparseVector<S>,
    k: usize,
) -> Result<SearchResult<S>, IndexError>
where
    S: Weight,
    D: AsRef<str>,
{
    if k == 0 {
        return Err(IndexError::InvalidK);
    }
    let mut scored: Vec<Ranked<S>> = Vec::new();
    let mut stats = SearchStats::default();
    for (ordinal, (_, vector)) in candidates.iter().enumerate() {
        if vector.overlaps(query) {
            stats.docs_scored += 1;
            stats.postings_touched += vector.features().filter(|f| query.contains(f)).count();
            scored.push(Ranked {
                score: query.dot(vector),
                ordinal: ordinal as u32,
            });
        }
    }
    scored.sort_by(|a, b| b.cmp(a));
    scored.truncate(k);
    let hits = scored
        .into_iter()
        .map(|r| Hit {
            doc_id: candidates[r.ordinal as usize].0.as_ref().to_string(),
            ordinal: r.ordinal,
            score: r.score,
        })
        .collect();
    Ok(SearchResult { hits, stats })
}
