//! Text form of a run: the initial snapshot followed by one `m` line per
//! move.
//!
//! ```text
//! # hazyard v1
//! dims 10 10 4
//! pitch 4.5 6.5 2.6
//! c 0 T1 3 4 0
//! ...
//! # outcome safe 92 0 0
//! m 1 17 3 4 1 0 9 0 unbury
//! ```
//!
//! The `# outcome <status> <movements> <worst> <sum>` line is a comment to
//! snapshot readers and carries the run's claimed result for verification.

use thiserror::Error;

use crate::strategy::{MoveCause, MoveRecord, RunOutcome, RunStatus};
use crate::yard::{load_snapshot_lines, save_snapshot, ContainerId, Coordinate, SnapshotError, YardConfiguration};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// What a run reported about itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutcomeClaim {
    pub status: RunStatus,
    pub movements: usize,
    pub final_worst: u32,
    pub final_sum: u32,
}

impl From<&RunOutcome> for OutcomeClaim {
    fn from(o: &RunOutcome) -> Self {
        Self {
            status: o.status,
            movements: o.movements,
            final_worst: o.final_worst,
            final_sum: o.final_sum,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceDocument {
    pub initial: YardConfiguration,
    pub moves: Vec<MoveRecord>,
    pub claim: Option<OutcomeClaim>,
}

pub fn format_move(r: &MoveRecord) -> String {
    format!(
        "m {} {} {} {} {} {} {} {} {}",
        r.seq, r.id, r.from.x, r.from.y, r.from.z, r.to.x, r.to.y, r.to.z, r.cause
    )
}

pub fn export_trace(initial: &YardConfiguration, outcome: &RunOutcome) -> String {
    export_moves(initial, &outcome.trace, Some(OutcomeClaim::from(outcome)))
}

pub fn export_moves(initial: &YardConfiguration, moves: &[MoveRecord], claim: Option<OutcomeClaim>) -> String {
    let mut out = save_snapshot(initial);
    if let Some(c) = claim {
        out.push_str(&format!(
            "# outcome {} {} {} {}\n",
            c.status, c.movements, c.final_worst, c.final_sum
        ));
    }
    for r in moves {
        out.push_str(&format_move(r));
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Parse {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, TraceError> {
    s.parse().map_err(|_| parse_err(line, format!("cannot parse `{s}`")))
}

/// Parses a trace document. Only syntax is checked here; whether the moves
/// are legal is the verifier's business.
pub fn parse_trace(text: &str) -> Result<TraceDocument, TraceError> {
    let mut snapshot_lines = Vec::new();
    let mut moves = Vec::new();
    let mut claim = None;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["m", rest @ ..] => {
                let [seq, id, fx, fy, fz, tx, ty, tz, cause] = rest else {
                    return Err(parse_err(
                        n,
                        "expected `m <seq> <id> <fromX> <fromY> <fromZ> <toX> <toY> <toZ> <cause>`",
                    ));
                };
                moves.push(MoveRecord {
                    seq: num(n, seq)?,
                    id: ContainerId(num(n, id)?),
                    from: Coordinate::new(num(n, fx)?, num(n, fy)?, num(n, fz)?),
                    to: Coordinate::new(num(n, tx)?, num(n, ty)?, num(n, tz)?),
                    cause: cause.parse::<MoveCause>().map_err(|e| parse_err(n, e))?,
                });
            }
            ["#", "outcome", status, movements, worst, sum] => {
                claim = Some(OutcomeClaim {
                    status: status.parse().map_err(|e: String| parse_err(n, e))?,
                    movements: num(n, movements)?,
                    final_worst: num(n, worst)?,
                    final_sum: num(n, sum)?,
                });
            }
            _ => {
                if !moves.is_empty() && !line.is_empty() && !line.starts_with('#') {
                    return Err(parse_err(n, "snapshot record after the first move"));
                }
                snapshot_lines.push((n, raw));
            }
        }
    }
    let initial = load_snapshot_lines(&snapshot_lines)?;
    Ok(TraceDocument { initial, moves, claim })
}
