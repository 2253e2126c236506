//! Interaction logs: synthetic generation from analytic students and
//! validated ingestion of the delimited `student_id,step,exercise_id,correctness`
//! schema.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use learnpath_core::env::{AnalyticStudent, StudentDynamics, StudentProfile};
use learnpath_core::knowledge::{ExerciseCatalog, Interaction, InteractionLog};
use learnpath_core::nn::RngStream;

use crate::error::{CliError, CliResult};

pub const LOG_HEADER: [&str; 4] = ["student_id", "step", "exercise_id", "correctness"];

/// Stream offset for generated students, clear of training episode streams.
pub const LOG_STREAM_BASE: u64 = 3 << 60;

#[derive(Debug, Clone, PartialEq)]
pub struct StudentLog {
    pub student_id: String,
    pub log: InteractionLog,
}

/// Simulates `students` analytic students, each answering `steps` uniformly
/// chosen exercises. Student `i` draws from stream `LOG_STREAM_BASE + i`.
pub fn generate_logs(
    catalog: &ExerciseCatalog,
    profile: &StudentProfile,
    dynamics: StudentDynamics,
    students: usize,
    steps: usize,
    seed: u64,
) -> CliResult<Vec<StudentLog>> {
    (0..students)
        .map(|i| {
            let mut rng = RngStream::new(seed, LOG_STREAM_BASE + i as u64);
            let mut student = AnalyticStudent::sample(catalog.len(), profile, dynamics, &mut rng)?;
            let mut log = InteractionLog::new();
            for _ in 0..steps {
                let exercise = rng.below(catalog.len());
                let correct = rng.bernoulli(dynamics.observe(student.mastery()[exercise]));
                student.practice(catalog, exercise, correct);
                log.push(exercise, correct);
            }
            Ok(StudentLog {
                student_id: i.to_string(),
                log,
            })
        })
        .collect()
}

/// Steps are written 1-based.
pub fn write_logs<W: Write>(out: W, logs: &[StudentLog]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOG_HEADER)?;
    for s in logs {
        for (t, e) in s.log.entries().iter().enumerate() {
            w.write_record([s.student_id.as_str(), &(t + 1).to_string(), &e.exercise.to_string(), if e.correct { "1" } else { "0" }])?;
        }
    }
    w.flush().map_err(|e| CliError::new("io", e.to_string()))?;
    Ok(())
}

/// Parses a log file, grouping rows by student (in order of first
/// appearance) and ordering each student's rows by step.
pub fn read_logs<R: Read>(input: R, catalog: &ExerciseCatalog) -> CliResult<Vec<StudentLog>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(input);
    let mut records = reader.records();
    match records.next() {
        None => return Err(CliError::parse("line 1: missing header")),
        Some(header) => {
            let header = header?;
            if header.iter().ne(LOG_HEADER.iter().copied()) {
                return Err(CliError::parse(format!("line 1: expected header `{}`", LOG_HEADER.join(","))));
            }
        }
    }

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(u64, usize, Interaction)>> = HashMap::new();
    let mut unknown: BTreeSet<usize> = BTreeSet::new();
    let mut first_unknown_line = 0;
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != LOG_HEADER.len() {
            return Err(CliError::parse(format!("line {line}: expected 4 fields, found {}", record.len())));
        }
        let student = record[0].to_string();
        if student.is_empty() {
            return Err(CliError::parse(format!("line {line}: empty student_id")));
        }
        let step: u64 = record[1]
            .parse()
            .map_err(|_| CliError::parse(format!("line {line}: step `{}` is not a non-negative integer", &record[1])))?;
        let exercise: usize = record[2]
            .parse()
            .map_err(|_| CliError::parse(format!("line {line}: exercise_id `{}` is not a non-negative integer", &record[2])))?;
        let correct = match &record[3] {
            "0" => false,
            "1" => true,
            other => return Err(CliError::parse(format!("line {line}: correctness `{other}` must be 0 or 1"))),
        };
        if exercise >= catalog.len() {
            if unknown.is_empty() {
                first_unknown_line = line;
            }
            unknown.insert(exercise);
        }
        let entry = rows.entry(student.clone()).or_insert_with(|| {
            order.push(student);
            Vec::new()
        });
        entry.push((step, line as usize, Interaction { exercise, correct }));
    }
    if !unknown.is_empty() {
        let ids: Vec<String> = unknown.iter().map(usize::to_string).collect();
        return Err(CliError::new(
            "catalog",
            format!(
                "unknown exercise_id(s) {} (first at line {first_unknown_line}; catalog has {} exercises)",
                ids.join(", "),
                catalog.len()
            ),
        ));
    }

    order
        .into_iter()
        .map(|student_id| {
            let mut entries = rows.remove(&student_id).expect("grouped");
            entries.sort_by_key(|&(step, line, _)| (step, line));
            if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(CliError::parse(format!("line {}: student {student_id} repeats step {}", w[1].1, w[1].0)));
            }
            let log = InteractionLog::from_entries(entries.into_iter().map(|(_, _, e)| e).collect(), catalog.len())?;
            Ok(StudentLog { student_id, log })
        })
        .collect()
}
