//! Path diversity, per-area mastery, training curves and the initial-state
//! histogram.

use std::collections::HashMap;

use crate::agent::EpisodeRecord;
use crate::error::{Error, Result};
use crate::knowledge::{ExerciseCatalog, KnowledgeState};

pub const DEFAULT_CURVE_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearningPath(Vec<usize>);

impl LearningPath {
    pub fn new(exercises: Vec<usize>, exercise_count: usize) -> Result<Self> {
        if exercises.is_empty() {
            return Err(Error::Empty("learning path"));
        }
        if let Some(&bad) = exercises.iter().find(|&&e| e >= exercise_count) {
            return Err(Error::InvalidAction {
                action: bad,
                count: exercise_count,
            });
        }
        Ok(Self(exercises))
    }

    pub fn exercises(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn multiplicities(&self) -> HashMap<usize, usize> {
        let mut m = HashMap::new();
        for &e in &self.0 {
            *m.entry(e).or_insert(0) += 1;
        }
        m
    }
}

/// Multiset intersection size: `Σ_e min(count_a(e), count_b(e))`.
pub fn multiset_overlap(a: &LearningPath, b: &LearningPath) -> usize {
    overlap(&a.multiplicities(), &b.multiplicities())
}

fn overlap(a: &HashMap<usize, usize>, b: &HashMap<usize, usize>) -> usize {
    a.iter().map(|(e, &n)| n.min(b.get(e).copied().unwrap_or(0))).sum()
}

/// Mean over ordered pairs `i ≠ j` of `1 − |P_i ∩ P_j| / l_i`, each term
/// clamped to `[0, 1]`; 0 for identical cohorts, 1 for disjoint paths.
pub fn div(paths: &[LearningPath]) -> Result<f64> {
    let n = paths.len();
    if n < 2 {
        return Err(Error::Config(format!("diversity needs at least 2 paths, got {n}")));
    }
    let counts: Vec<_> = paths.iter().map(LearningPath::multiplicities).collect();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let term = 1.0 - overlap(&counts[i], &counts[j]) as f64 / paths[i].len() as f64;
                total += term.clamp(0.0, 1.0);
            }
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

/// `rows[a][t]` is the mean of `s_{j,t}` over the exercises in area `a`, or
/// `None` for an area without exercises.
pub fn area_mastery_matrix(states: &[KnowledgeState], catalog: &ExerciseCatalog) -> Result<Vec<Vec<Option<f64>>>> {
    let sizes = catalog.area_sizes();
    let mut rows = vec![Vec::with_capacity(states.len()); catalog.area_count()];
    for s in states {
        if s.len() != catalog.len() {
            return Err(Error::shape("area_mastery_matrix", catalog.len(), s.len()));
        }
        let mut sums = vec![0.0; catalog.area_count()];
        for (ex, p) in catalog.exercises().iter().zip(s.as_slice()) {
            sums[ex.area] += p;
        }
        for (a, row) in rows.iter_mut().enumerate() {
            row.push((sizes[a] > 0).then(|| sums[a] / sizes[a] as f64));
        }
    }
    Ok(rows)
}

/// Trailing mean over the last `window` values (fewer at the start).
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub values: Vec<f64>,
    pub smoothed: Vec<f64>,
}

impl Curve {
    fn new(values: Vec<f64>, window: usize) -> Self {
        let smoothed = moving_average(&values, window);
        Self { values, smoothed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingCurves {
    pub final_apr: Curve,
    pub path_length: Curve,
    pub cumulative_reward: Curve,
}

pub fn training_curves(history: &[EpisodeRecord], window: usize) -> TrainingCurves {
    let col = |f: fn(&EpisodeRecord) -> f64| Curve::new(history.iter().map(f).collect(), window);
    TrainingCurves {
        final_apr: col(|r| r.final_apr),
        path_length: col(|r| r.path_length as f64),
        cumulative_reward: col(|r| r.cumulative_reward),
    }
}

/// Counts per left-closed bin `[k·w, (k+1)·w)` covering `[0, 1)`; samples
/// outside the range are ignored.
pub fn initial_state_histogram(samples: &[f64], bin_width: f64) -> Result<Vec<usize>> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::Config(format!("bin width must be positive, got {bin_width}")));
    }
    let bins = (1.0 / bin_width).ceil() as usize;
    let mut counts = vec![0; bins];
    for &x in samples {
        if (0.0..1.0).contains(&x) {
            // values within rounding error of an edge belong to the bin it opens
            let q = x / bin_width;
            let k = if (q - q.round()).abs() < 1e-9 { q.round() } else { q.floor() };
            let k = (k as usize).min(bins - 1);
            counts[k] += 1;
        }
    }
    Ok(counts)
}
