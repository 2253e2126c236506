//! Knowledge-state representation and the scalar learning quantities derived
//! from it: average pass rate, learning gain, distance to goal and the goal
//! predicate.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};

/// Clamp margin applied to every knowledge-state element.
pub const STATE_EPS: f64 = 1e-6;

pub const CATALOG_HEADER: &str = "exercise_id,topic_id,area_id";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exercise {
    pub id: usize,
    pub topic: usize,
    pub area: usize,
}

/// The exercises available for recommendation, labelled by topic and area.
/// Exercise ids are exactly `0..len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExerciseCatalog {
    exercises: Vec<Exercise>,
    topic_count: usize,
    area_count: usize,
    topic_members: Vec<Vec<usize>>,
}

impl ExerciseCatalog {
    /// Builds a catalog from `(topic, area)` labels indexed by exercise id.
    pub fn new(labels: &[(usize, usize)], topic_count: usize, area_count: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Config("catalog must contain at least one exercise".into()));
        }
        let mut topic_area: Vec<Option<usize>> = vec![None; topic_count];
        let mut topic_members = vec![Vec::new(); topic_count];
        let mut exercises = Vec::with_capacity(labels.len());
        for (id, &(topic, area)) in labels.iter().enumerate() {
            if topic >= topic_count {
                return Err(Error::Config(format!(
                    "exercise {id}: topic_id {topic} out of range (topic_count {topic_count})"
                )));
            }
            if area >= area_count {
                return Err(Error::Config(format!(
                    "exercise {id}: area_id {area} out of range (area_count {area_count})"
                )));
            }
            match topic_area[topic] {
                Some(a) if a != area => {
                    return Err(Error::Config(format!(
                        "topic {topic} maps to both area {a} and area {area}"
                    )))
                }
                _ => topic_area[topic] = Some(area),
            }
            topic_members[topic].push(id);
            exercises.push(Exercise { id, topic, area });
        }
        Ok(Self {
            exercises,
            topic_count,
            area_count,
            topic_members,
        })
    }

    /// Round-robin synthetic catalog: exercise `j` belongs to topic
    /// `j % topic_count`, topic `t` belongs to area `t % area_count`.
    pub fn synthetic(exercise_count: usize, topic_count: usize, area_count: usize) -> Result<Self> {
        if topic_count == 0 || area_count == 0 {
            return Err(Error::Config("topic_count and area_count must be positive".into()));
        }
        if topic_count > exercise_count || area_count > topic_count {
            return Err(Error::Config(format!(
                "synthetic catalog needs exercises ({exercise_count}) >= topics ({topic_count}) >= areas ({area_count})"
            )));
        }
        let labels: Vec<_> = (0..exercise_count)
            .map(|j| {
                let topic = j % topic_count;
                (topic, topic % area_count)
            })
            .collect();
        Self::new(&labels, topic_count, area_count)
    }

    /// Parses the delimited catalog format: a `exercise_id,topic_id,area_id`
    /// header followed by one row per exercise. Rows may come in any order but
    /// ids must cover `0..J` exactly once. Topic and area counts are inferred
    /// as `max + 1`.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows = BTreeMap::new();
        let mut saw_header = false;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if !saw_header {
                if trimmed.replace(' ', "") != CATALOG_HEADER {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("expected header `{CATALOG_HEADER}`"),
                    });
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let parse = |s: &str, name: &str| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("{name} `{s}` is not a non-negative integer"),
                })
            };
            let id = parse(fields[0], "exercise_id")?;
            let topic = parse(fields[1], "topic_id")?;
            let area = parse(fields[2], "area_id")?;
            if rows.insert(id, (topic, area)).is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("duplicate exercise_id {id}"),
                });
            }
        }
        if !saw_header {
            return Err(Error::Parse {
                line: 1,
                msg: "missing header".into(),
            });
        }
        if let Some((pos, _)) = rows.keys().enumerate().find(|&(pos, &id)| pos != id) {
            return Err(Error::Config(format!("exercise ids are not contiguous: missing id {pos}")));
        }
        let labels: Vec<_> = rows.into_values().collect();
        let topic_count = labels.iter().map(|l| l.0).max().map_or(0, |m| m + 1);
        let area_count = labels.iter().map(|l| l.1).max().map_or(0, |m| m + 1);
        Self::new(&labels, topic_count, area_count)
    }

    pub fn to_delimited(&self) -> String {
        let mut out = String::from(CATALOG_HEADER);
        out.push('\n');
        for e in &self.exercises {
            let _ = writeln!(out, "{},{},{}", e.id, e.topic, e.area);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.exercises.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exercises.is_empty()
    }

    pub fn topic_count(&self) -> usize {
        self.topic_count
    }

    pub fn area_count(&self) -> usize {
        self.area_count
    }

    pub fn exercises(&self) -> &[Exercise] {
        &self.exercises
    }

    pub fn exercise(&self, id: usize) -> Option<&Exercise> {
        self.exercises.get(id)
    }

    /// Exercise ids sharing a topic, including `topic` itself.
    pub fn topic_members(&self, topic: usize) -> &[usize] {
        &self.topic_members[topic]
    }

    /// Number of exercises in each area.
    pub fn area_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.area_count];
        for e in &self.exercises {
            sizes[e.area] += 1;
        }
        sizes
    }

    pub fn check_action(&self, action: usize) -> Result<()> {
        if action < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidAction {
                action,
                count: self.len(),
            })
        }
    }
}

/// Per-exercise probabilities of a correct answer. Every element lies in
/// `[STATE_EPS, 1 - STATE_EPS]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeState(Vec<f64>);

impl KnowledgeState {
    /// Clamps raw probabilities into the open unit interval. Non-finite
    /// inputs are rejected.
    pub fn from_probs(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty("knowledge state"));
        }
        if let Some(bad) = raw.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("knowledge state element {bad}")));
        }
        Ok(Self(raw.into_iter().map(clamp_prob).collect()))
    }

    pub fn uniform(len: usize, p: f64) -> Result<Self> {
        Self::from_probs(vec![p; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> Option<f64> {
        self.0.get(j).copied()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(STATE_EPS, 1.0 - STATE_EPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub exercise: usize,
    pub correct: bool,
}

/// Time-ordered `(exercise, correctness)` history of one student.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InteractionLog {
    entries: Vec<Interaction>,
}

impl InteractionLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates every exercise id against `exercise_count`.
    pub fn from_entries(entries: Vec<Interaction>, exercise_count: usize) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|e| e.exercise >= exercise_count) {
            return Err(Error::InvalidAction {
                action: bad.exercise,
                count: exercise_count,
            });
        }
        Ok(Self { entries })
    }

    pub fn push(&mut self, exercise: usize, correct: bool) {
        self.entries.push(Interaction { exercise, correct });
    }

    pub fn entries(&self) -> &[Interaction] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The most recent `window` entries.
    pub fn tail(&self, window: usize) -> &[Interaction] {
        let start = self.entries.len().saturating_sub(window);
        &self.entries[start..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalConfig {
    pub beta: f64,
    pub t_max: usize,
}

impl GoalConfig {
    pub fn new(beta: f64, t_max: usize) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Config(format!("goal.beta must lie in (0,1), got {beta}")));
        }
        if t_max == 0 {
            return Err(Error::Config("goal.t_max must be at least 1".into()));
        }
        Ok(Self { beta, t_max })
    }
}

impl Default for GoalConfig {
    fn default() -> Self {
        Self {
            beta: 0.8,
            t_max: 100,
        }
    }
}

/// Average pass rate: the arithmetic mean of the knowledge state.
pub fn apr(state: &KnowledgeState) -> f64 {
    mean(state.as_slice())
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn learning_gain(apr_now: f64, apr_prev: f64) -> f64 {
    apr_now - apr_prev
}

pub fn distance_to_goal(beta: f64, apr_now: f64) -> f64 {
    beta - apr_now
}

/// Inclusive: the goal counts as reached when `apr_now == beta`.
pub fn goal_reached(apr_now: f64, beta: f64) -> bool {
    apr_now >= beta
}
