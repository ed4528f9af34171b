use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{Method, TestConfig};
use crate::mc::McResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub n: usize,
    pub reps: usize,
    pub bootstrap_draws: usize,
    pub master_seed: u64,
    /// Test configuration shared by every replication (seed excluded).
    pub config: TestConfig,
    pub cells: Vec<McResult>,
}

impl Table {
    pub fn cell(&self, case: u8, noise: &str, method: Method) -> Option<&McResult> {
        self.cells.iter().find(|c| c.case == Some(case) && c.noise == noise && c.method == method)
    }
}

/// Plain-text layout: one row per (noise, case) with the plug-in and RMS
/// rejection rates side by side.
pub fn render_table(table: &Table) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Probability of rejecting the null hypothesis, n = {} ({} replications, B = {}, seed = {})",
        table.n, table.reps, table.bootstrap_draws, table.master_seed
    );
    let _ =
        writeln!(out, "{:<14}{:>6}{:>24}{:>22}", "Distribution", "Case", "Adaptive test, plugin", "Adaptive test, RMS");
    let mut rows: Vec<(&str, u8)> = Vec::new();
    for c in &table.cells {
        if let Some(case) = c.case {
            if !rows.contains(&(c.noise.as_str(), case)) {
                rows.push((c.noise.as_str(), case));
            }
        }
    }
    let mut last_noise = "";
    for (noise, case) in rows {
        let rate =
            |m| table.cell(case, noise, m).map_or_else(|| "-".to_string(), |c| format!("{:.3}", c.rejection_rate));
        let label = if noise == last_noise { "" } else { noise };
        last_noise = noise;
        let _ = writeln!(out, "{:<14}{:>6}{:>24}{:>22}", label, case, rate(Method::Pia), rate(Method::Rms));
    }
    out
}
