//! Per-round CSV traces and the replay verifier that re-derives every check
//! a trace can support without rerunning the game.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so a parsed
//! trace reproduces the run's doubles bit for bit and byte-identical traces
//! mean identical runs.

use crate::{Error, Result, CHECK_TOL};

pub const TRACE_HEADER: &str = "n,beta,own_loss,cum_own_loss,best_expert_loss,lemma9_lhs,lemma9_rhs,lemma5_excess_best,lemma5_bound_best,stage,restart";

/// One completed round as written to the trace.
///
/// `n` is the global round index. In removal modes the aggregator restarts on
/// stage changes, so `beta`, `lemma9_*` and the regret-bound columns refer to
/// the inner engine of the current stage; `cum_own_loss` stays global. A row
/// with `restart = 1` is the escaping round itself, with `stage` already
/// advanced for the next round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub beta: f64,
    pub own_loss: f64,
    pub cum_own_loss: f64,
    pub best_expert_loss: f64,
    pub lemma9_lhs: f64,
    pub lemma9_rhs: f64,
    pub lemma5_excess_best: f64,
    pub lemma5_bound_best: f64,
    pub stage: u32,
    pub restart: bool,
}

impl TraceRow {
    fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.beta,
            self.own_loss,
            self.cum_own_loss,
            self.best_expert_loss,
            self.lemma9_lhs,
            self.lemma9_rhs,
            self.lemma5_excess_best,
            self.lemma5_bound_best,
            self.stage,
            if self.restart { 1 } else { 0 },
        )
    }
}

/// Render a full trace document, header included.
pub fn render_trace(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

fn parse_f64(field: &str, what: &str, line: usize) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::Trace(format!("line {line}: bad {what} {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::Trace(format!(
            "line {line}: non-finite {what} {field:?}"
        )));
    }
    Ok(v)
}

/// Parse a trace document. Rejects anything that does not round-trip through
/// [`render_trace`]; never panics on malformed input.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRACE_HEADER => {}
        Some(h) => {
            return Err(Error::Trace(format!("unexpected header {h:?}")));
        }
        None => return Err(Error::Trace("empty trace".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::Trace(format!(
                "line {lineno}: expected 11 fields, got {}",
                fields.len()
            )));
        }
        let n: usize = fields[0]
            .parse()
            .map_err(|_| Error::Trace(format!("line {lineno}: bad round index")))?;
        let stage: u32 = fields[9]
            .parse()
            .map_err(|_| Error::Trace(format!("line {lineno}: bad stage")))?;
        let restart = match fields[10] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Trace(format!(
                    "line {lineno}: bad restart flag {other:?}"
                )))
            }
        };
        rows.push(TraceRow {
            n,
            beta: parse_f64(fields[1], "beta", lineno)?,
            own_loss: parse_f64(fields[2], "own_loss", lineno)?,
            cum_own_loss: parse_f64(fields[3], "cum_own_loss", lineno)?,
            best_expert_loss: parse_f64(fields[4], "best_expert_loss", lineno)?,
            lemma9_lhs: parse_f64(fields[5], "lemma9_lhs", lineno)?,
            lemma9_rhs: parse_f64(fields[6], "lemma9_rhs", lineno)?,
            lemma5_excess_best: parse_f64(fields[7], "lemma5_excess_best", lineno)?,
            lemma5_bound_best: parse_f64(fields[8], "lemma5_bound_best", lineno)?,
            stage,
            restart,
        });
    }
    Ok(rows)
}

/// Outcome of one replayed check.
#[derive(Debug, Clone)]
pub struct ReplayCheck {
    pub name: &'static str,
    pub pass: bool,
    /// Worst violation observed (positive means failed by that much).
    pub worst: f64,
    pub detail: Option<String>,
}

impl ReplayCheck {
    fn ok(name: &'static str, worst: f64) -> Self {
        ReplayCheck {
            name,
            pass: true,
            worst,
            detail: None,
        }
    }

    fn fail(name: &'static str, worst: f64, detail: String) -> Self {
        ReplayCheck {
            name,
            pass: false,
            worst,
            detail: Some(detail),
        }
    }
}

/// Recompute everything a trace lets us check:
/// consecutive rounds, the learning-rate schedule (per inner engine, i.e.
/// restarting after stage changes), exact cumulative-loss bookkeeping, the
/// per-round weight-update inequality, the regret bound, and stage monotony.
pub fn replay_checks(rows: &[TraceRow]) -> Vec<ReplayCheck> {
    let mut checks = Vec::new();

    // consecutive global rounds from 1
    let mut bad = None;
    for (i, r) in rows.iter().enumerate() {
        if r.n != i + 1 {
            bad = Some((i, r.n));
            break;
        }
    }
    checks.push(match bad {
        None => ReplayCheck::ok("round_numbering", 0.0),
        Some((i, n)) => ReplayCheck::fail(
            "round_numbering",
            1.0,
            format!("row {} has round {n}, expected {}", i + 1, i + 1),
        ),
    });

    // beta schedule and inner bookkeeping, segmented at restarts
    let mut beta_fail: Option<String> = None;
    let mut cum_fail: Option<String> = None;
    let mut inner_n = 0usize;
    let mut inner_sum = 0.0f64;
    let mut global_sum = 0.0f64;
    for (i, r) in rows.iter().enumerate() {
        inner_n += 1;
        let expected_beta = (-1.0 / (inner_n as f64).sqrt()).exp();
        if beta_fail.is_none() && r.beta != expected_beta {
            beta_fail = Some(format!(
                "row {}: beta {} but schedule says {expected_beta}",
                i + 1,
                r.beta
            ));
        }
        inner_sum += r.own_loss;
        global_sum += r.own_loss;
        if cum_fail.is_none() && r.cum_own_loss != global_sum {
            cum_fail = Some(format!(
                "row {}: cum_own_loss {} but running sum is {global_sum}",
                i + 1,
                r.cum_own_loss
            ));
        }
        if cum_fail.is_none() && r.lemma9_lhs != inner_sum {
            cum_fail = Some(format!(
                "row {}: lemma9_lhs {} but inner running sum is {inner_sum}",
                i + 1,
                r.lemma9_lhs
            ));
        }
        if r.restart {
            inner_n = 0;
            inner_sum = 0.0;
        }
    }
    checks.push(match beta_fail {
        None => ReplayCheck::ok("beta_schedule", 0.0),
        Some(d) => ReplayCheck::fail("beta_schedule", 1.0, d),
    });
    checks.push(match cum_fail {
        None => ReplayCheck::ok("cumulative_consistency", 0.0),
        Some(d) => ReplayCheck::fail("cumulative_consistency", 1.0, d),
    });

    // inequalities
    let mut worst9 = f64::NEG_INFINITY;
    let mut worst9_row = 0;
    let mut worst5 = f64::NEG_INFINITY;
    let mut worst5_row = 0;
    for r in rows {
        let v9 = r.lemma9_lhs - (r.lemma9_rhs + CHECK_TOL * r.lemma9_rhs.abs().max(1.0));
        if v9 > worst9 {
            worst9 = v9;
            worst9_row = r.n;
        }
        let v5 =
            r.lemma5_excess_best - (r.lemma5_bound_best + CHECK_TOL * r.lemma5_bound_best.max(1.0));
        if v5 > worst5 {
            worst5 = v5;
            worst5_row = r.n;
        }
    }
    if rows.is_empty() {
        checks.push(ReplayCheck::ok("lemma9", 0.0));
        checks.push(ReplayCheck::ok("lemma5", 0.0));
    } else {
        checks.push(if worst9 <= 0.0 {
            ReplayCheck::ok("lemma9", worst9)
        } else {
            ReplayCheck::fail("lemma9", worst9, format!("violated at round {worst9_row}"))
        });
        checks.push(if worst5 <= 0.0 {
            ReplayCheck::ok("lemma5", worst5)
        } else {
            ReplayCheck::fail("lemma5", worst5, format!("violated at round {worst5_row}"))
        });
    }

    // a restart row reports the freshly advanced stage; every other row
    // keeps its predecessor's stage
    let mut stage_fail = None;
    let mut prev_stage = None::<u32>;
    for (i, r) in rows.iter().enumerate() {
        if let Some(p) = prev_stage {
            let ok = if r.restart { r.stage > p } else { r.stage == p };
            if !ok && stage_fail.is_none() {
                stage_fail = Some(format!(
                    "row {}: stage {p} -> {} with restart={}",
                    i + 1,
                    r.stage,
                    u8::from(r.restart)
                ));
            }
        }
        prev_stage = Some(r.stage);
    }
    checks.push(match stage_fail {
        None => ReplayCheck::ok("stage_monotone", 0.0),
        Some(d) => ReplayCheck::fail("stage_monotone", 1.0, d),
    });

    checks
}
