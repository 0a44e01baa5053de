use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::models::Classifier;
use crate::recourse::{check_negative, RecourseOutcome};
use crate::{Error, Result};

pub const FACE_K_METHOD: &str = "face-k";
pub const FACE_E_METHOD: &str = "face-e";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceVariant {
    /// Each point links to its `k` nearest neighbours (made symmetric).
    Knn(usize),
    /// Points within l1 distance `epsilon` are linked.
    Epsilon(f64),
}

impl FaceVariant {
    pub fn method(self) -> &'static str {
        match self {
            FaceVariant::Knn(_) => FACE_K_METHOD,
            FaceVariant::Epsilon(_) => FACE_E_METHOD,
        }
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum()
}

/// Neighbourhood graph over training points with l1 edge weights and the
/// classifier's decision at every node.
#[derive(Clone, Debug)]
pub struct FaceGraph {
    points: Tensor,
    positive: Vec<bool>,
    adjacency: Vec<Vec<(usize, f64)>>,
    variant: FaceVariant,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance, then index.
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FaceGraph {
    pub fn build(points: &Tensor, classifier: &dyn Classifier, variant: FaceVariant) -> Result<Self> {
        match variant {
            FaceVariant::Knn(0) => return Err(Error::Config("face k must be >= 1".into())),
            FaceVariant::Epsilon(e) if !(e > 0.0) => return Err(Error::Config("face epsilon must be > 0".into())),
            _ => {}
        }
        let target = classifier.target_score();
        let positive = classifier.scores(points)?.into_iter().map(|s| s >= target).collect();
        let n = points.rows();
        let directed: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = points.row(i);
                let candidates = (0..n).filter(|&j| j != i).map(|j| (j, l1(row, points.row(j))));
                Self::neighbours(candidates, variant)
            })
            .collect();
        let mut adjacency = directed.clone();
        for (i, edges) in directed.iter().enumerate() {
            for &(j, w) in edges {
                adjacency[j].push((i, w));
            }
        }
        for edges in &mut adjacency {
            edges.sort_by_key(|e| e.0);
            edges.dedup_by_key(|e| e.0);
        }
        Ok(FaceGraph {
            points: points.clone(),
            positive,
            adjacency,
            variant,
        })
    }

    fn neighbours(candidates: impl Iterator<Item = (usize, f64)>, variant: FaceVariant) -> Vec<(usize, f64)> {
        match variant {
            FaceVariant::Knn(k) => {
                let mut all: Vec<(usize, f64)> = candidates.collect();
                all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                all.truncate(k);
                all
            }
            FaceVariant::Epsilon(eps) => candidates.filter(|&(_, d)| d <= eps).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn variant(&self) -> FaceVariant {
        self.variant
    }

    pub fn edges(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    /// Shortest-path search from `x`, which is linked to its own neighbours;
    /// returns the first positively classified node reached.
    pub fn query(&self, x: &[f64], classifier: &dyn Classifier) -> Result<RecourseOutcome> {
        let method = self.variant.method();
        let target = classifier.target_score();
        let initial = classifier.score(x)?;
        check_negative(initial, target)?;
        let n = self.len();
        let sources = Self::neighbours((0..n).map(|j| (j, l1(x, self.points.row(j)))), self.variant);
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        for (j, d) in sources {
            if d < dist[j] {
                dist[j] = d;
                heap.push(Entry(d, j));
            }
        }
        let mut popped = 0;
        while let Some(Entry(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            popped += 1;
            if self.positive[u] {
                let cf = self.points.row(u).to_vec();
                let score = classifier.score(&cf)?;
                let mut out = RecourseOutcome::new(method, x, cf, score, target);
                out.iterations = popped;
                out.trace = vec![d];
                return Ok(out);
            }
            for &(v, w) in &self.adjacency[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry(nd, v));
                }
            }
        }
        let mut out = RecourseOutcome::failure(method, x, initial, target);
        out.iterations = popped;
        Ok(out)
    }
}
