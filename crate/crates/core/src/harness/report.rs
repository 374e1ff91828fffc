use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::SkillLabel;
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::sim::ProgressTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Llm,
    Flow,
    Appearance,
    Combined,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Llm, Method::Flow, Method::Appearance, Method::Combined];

    pub fn name(self) -> &'static str {
        match self {
            Method::Llm => "llm",
            Method::Flow => "flow",
            Method::Appearance => "appearance",
            Method::Combined => "combined",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub skill: SkillLabel,
    pub variation: usize,
    pub selected_id: usize,
    /// 1-based rank of the selection in the oracle ranking.
    pub oracle_rank: usize,
    pub final_progress: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSection {
    pub method: Method,
    pub trials: Vec<TrialResult>,
    pub success_rate: f64,
}

impl MethodSection {
    pub fn new(method: Method, trials: Vec<TrialResult>) -> Self {
        let success_rate = if trials.is_empty() {
            0.0
        } else {
            trials.iter().filter(|t| t.success).count() as f64 / trials.len() as f64
        };
        Self {
            method,
            trials,
            success_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub success_threshold: f64,
    pub methods: Vec<MethodSection>,
}

impl MethodReport {
    pub fn section(&self, method: Method) -> Option<&MethodSection> {
        self.methods.iter().find(|s| s.method == method)
    }

    pub fn success_rate(&self, method: Method) -> Option<f64> {
        self.section(method).map(|s| s.success_rate)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `method,trials,successes,success_rate,mean_progress,mean_oracle_rank`
pub fn summary_csv(report: &MethodReport) -> String {
    let mut out = String::from("method,trials,successes,success_rate,mean_progress,mean_oracle_rank\n");
    for s in &report.methods {
        let n = s.trials.len().max(1) as f64;
        let successes = s.trials.iter().filter(|t| t.success).count();
        let progress = s.trials.iter().map(|t| t.final_progress).sum::<f64>() / n;
        let rank = s.trials.iter().map(|t| t.oracle_rank as f64).sum::<f64>() / n;
        let _ = writeln!(
            out,
            "{},{},{successes},{},{progress},{rank}",
            s.method.name(),
            s.trials.len(),
            s.success_rate
        );
    }
    out
}

/// Columns `normalized_time` then one per named trace; row `i` sits at `i / (len - 1)`.
pub fn progress_csv(traces: &[(String, &ProgressTrace)]) -> Result<String> {
    let mut out = String::from("normalized_time");
    for (name, _) in traces {
        if name.contains([',', '\n']) {
            return Err(Error::Format(format!("column name {name:?} needs quoting")));
        }
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let Some((_, first)) = traces.first() else {
        return Ok(out);
    };
    let len = first.len();
    if traces.iter().any(|(_, t)| t.len() != len) {
        return Err(Error::ShapeMismatch("progress traces differ in length".into()));
    }
    for i in 0..len {
        let t = if len > 1 { i as f64 / (len - 1) as f64 } else { 0.0 };
        out.push_str(&t.to_string());
        for (_, trace) in traces {
            out.push(',');
            out.push_str(&trace.values[i].to_string());
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn emit_progress_csv(traces: &[(String, &ProgressTrace)], path: &Path) -> Result<()> {
    write_atomic(path, progress_csv(traces)?.as_bytes())
}

/// Parses a progress CSV back into named columns (time first).
pub fn read_progress_csv(text: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("missing header".into()))?;
    let mut cols: Vec<(String, Vec<f64>)> = header.split(',').map(|h| (h.to_string(), Vec::new())).collect();
    for line in lines.filter(|l| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(Error::Format(format!(
                "row has {} cells, expected {}",
                cells.len(),
                cols.len()
            )));
        }
        for (col, cell) in cols.iter_mut().zip(cells) {
            col.1.push(
                cell.parse()
                    .map_err(|e: std::num::ParseFloatError| Error::Format(e.to_string()))?,
            );
        }
    }
    Ok(cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(n: usize, scale: f64) -> ProgressTrace {
        ProgressTrace {
            values: (0..n).map(|i| scale * i as f64 / (n - 1) as f64).collect(),
        }
    }

    #[test]
    fn empty_trace_set_is_header_only() {
        assert_eq!(progress_csv(&[]).unwrap(), "normalized_time\n");
    }

    #[test]
    fn progress_csv_reads_back() {
        let (a, b) = (trace(61, 0.8), trace(61, 0.3));
        let text = progress_csv(&[("flow".into(), &a), ("appearance".into(), &b)]).unwrap();
        assert_eq!(text.lines().count(), 62);
        let cols = read_progress_csv(&text).unwrap();
        assert_eq!(cols[0].1.first(), Some(&0.0));
        assert_eq!(cols[0].1.last(), Some(&1.0));
        assert_eq!(cols[1], ("flow".to_string(), a.values.clone()));
        assert_eq!(cols[2], ("appearance".to_string(), b.values.clone()));
        assert!(progress_csv(&[("x".into(), &a), ("y".into(), &trace(5, 1.0))]).is_err());
    }

    #[test]
    fn success_rate_is_the_mean_flag() {
        let skill = crate::sim::SkillKind::Wipe.label();
        let t = |success| TrialResult {
            skill: skill.clone(),
            variation: 0,
            selected_id: 3,
            oracle_rank: 1,
            final_progress: 0.5,
            success,
        };
        let s = MethodSection::new(Method::Flow, vec![t(true), t(false), t(true), t(true)]);
        assert_eq!(s.success_rate, 0.75);
        let report = MethodReport {
            success_threshold: 0.5,
            methods: vec![s],
        };
        assert_eq!(MethodReport::from_json(&report.to_json().unwrap()).unwrap(), report);
        assert!(summary_csv(&report)
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("flow,4,3,0.75,"));
    }
}
