//! `szego verify`: the named acceptance sweep with one line per member.

use std::path::Path;

use crate::experiments::{run_config, RunError, RunOptions};
use crate::output::Summary;
use crate::registry;

pub const ACCEPTANCE: &str = "acceptance";

/// Runs the acceptance sweep into `out`; returns the sweep summary.
pub fn verify(out: &Path, opts: RunOptions) -> Result<Summary, RunError> {
    let cfg = registry::resolve(ACCEPTANCE, Path::new("."))?;
    run_config(&cfg, out, opts)
}

/// `PASS name` / `FAIL name` per member, then the overall line.
pub fn report_lines(summary: &Summary) -> Vec<String> {
    let tag = |pass: bool| if pass { "PASS" } else { "FAIL" };
    let mut lines: Vec<String> = summary.members.iter().map(|m| format!("{} {}", tag(m.pass), m.name)).collect();
    if let Some(e) = &summary.error {
        lines.push(format!("ERROR {e}"));
    }
    let failed = summary.members.iter().filter(|m| !m.pass).count();
    lines.push(format!("{} {} ({} of {} members failed)", tag(summary.pass), summary.name, failed, summary.members.len()));
    lines
}
