//! Delimited run artifacts. Floats are written in shortest round-trip form,
//! so reading a history back reproduces the in-memory records exactly.

use std::fmt::Write as _;
use std::io::Read;

use learnpath_core::agent::{EpisodeRecord, UpdateRecord, Variant};
use learnpath_core::metrics::{initial_state_histogram, training_curves};

use crate::error::{CliError, CliResult};

pub const HISTORY_HEADER: &str = "episode,seed,variant,initial_apr,final_apr,path_length,cumulative_reward,reached_goal,path";
pub const UPDATES_HEADER: &str = "update,episodes,objective,surrogate,value_loss,entropy,live_entropy,clip_fraction,samples";
pub const CURVES_HEADER: &str =
    "episode,final_apr,final_apr_ma,path_length,path_length_ma,cumulative_reward,cumulative_reward_ma";
pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,count";
pub const HISTOGRAM_WIDTH: f64 = 0.1;

/// Exercise ids of a path, space separated.
pub fn format_path(path: &[usize]) -> String {
    path.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

pub fn history_row(r: &EpisodeRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        r.episode,
        r.seed,
        r.variant,
        r.initial_apr,
        r.final_apr,
        r.path_length,
        r.cumulative_reward,
        r.reached_goal as u8,
        format_path(&r.path)
    )
}

pub fn update_row(u: &UpdateRecord) -> String {
    let r = &u.report;
    format!(
        "{},{},{},{},{},{},{},{},{}",
        u.update, u.episodes, r.objective, r.surrogate, r.value_loss, r.entropy, r.live_entropy, r.clip_fraction, r.samples
    )
}

fn field<T: std::str::FromStr>(value: &str, name: &str, line: u64) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::parse(format!("line {line}: {name} `{value}` is malformed")))
}

pub fn read_history<R: Read>(input: R) -> CliResult<Vec<EpisodeRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = reader.records();
    match records.next() {
        Some(h) if h.as_ref().map(|h| h.iter().eq(HISTORY_HEADER.split(','))).unwrap_or(false) => {}
        _ => return Err(CliError::parse(format!("line 1: expected header `{HISTORY_HEADER}`"))),
    }
    let mut out = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 9 {
            return Err(CliError::parse(format!("line {line}: expected 9 fields, found {}", rec.len())));
        }
        let path = if rec[8].is_empty() {
            Vec::new()
        } else {
            rec[8].split(' ').map(|s| field(s, "path", line)).collect::<CliResult<_>>()?
        };
        out.push(EpisodeRecord {
            episode: field(&rec[0], "episode", line)?,
            seed: field(&rec[1], "seed", line)?,
            variant: field::<Variant>(&rec[2], "variant", line)?,
            initial_apr: field(&rec[3], "initial_apr", line)?,
            final_apr: field(&rec[4], "final_apr", line)?,
            path_length: field(&rec[5], "path_length", line)?,
            cumulative_reward: field(&rec[6], "cumulative_reward", line)?,
            reached_goal: field::<u8>(&rec[7], "reached_goal", line)? == 1,
            path,
        });
    }
    Ok(out)
}

pub fn render_curves(history: &[EpisodeRecord], window: usize) -> String {
    let mut out = format!("{CURVES_HEADER}\n");
    if history.is_empty() {
        return out;
    }
    let c = training_curves(history, window);
    for (i, r) in history.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.episode,
            c.final_apr.values[i],
            c.final_apr.smoothed[i],
            c.path_length.values[i],
            c.path_length.smoothed[i],
            c.cumulative_reward.values[i],
            c.cumulative_reward.smoothed[i]
        );
    }
    out
}

pub fn render_histogram(samples: &[f64]) -> CliResult<String> {
    let counts = initial_state_histogram(samples, HISTOGRAM_WIDTH)?;
    let mut out = format!("{HISTOGRAM_HEADER}\n");
    for (i, c) in counts.iter().enumerate() {
        let lo = i as f64 * HISTOGRAM_WIDTH;
        let hi = ((i + 1) as f64 * HISTOGRAM_WIDTH).min(1.0);
        let _ = writeln!(out, "{lo:.1},{hi:.1},{c}");
    }
    Ok(out)
}
