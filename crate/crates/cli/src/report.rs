//! Check rows, run reports and their CSV serializations.

use std::fmt;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowVerdict {
    Pass,
    Fail,
    /// A convergence report rejected, so the check could not conclude.
    Inconclusive,
}

impl fmt::Display for RowVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowVerdict::Pass => write!(f, "pass"),
            RowVerdict::Fail => write!(f, "fail"),
            RowVerdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// One executed check.
#[derive(Debug, Clone)]
pub struct CheckRow {
    pub scenario: String,
    pub check_id: String,
    pub paper_anchor: String,
    pub level: u32,
    pub metric: String,
    pub value: f64,
    pub tolerance: f64,
    pub verdict: RowVerdict,
    pub runtime_ms: u128,
}

impl CheckRow {
    #[allow(clippy::too_many_arguments)]
    pub fn judged(
        scenario: &str,
        check_id: &str,
        anchor: &str,
        level: u32,
        metric: &str,
        value: f64,
        tolerance: f64,
        pass: bool,
    ) -> Self {
        Self {
            scenario: scenario.to_string(),
            check_id: check_id.to_string(),
            paper_anchor: anchor.to_string(),
            level,
            metric: metric.to_string(),
            value,
            tolerance,
            verdict: if pass {
                RowVerdict::Pass
            } else {
                RowVerdict::Fail
            },
            runtime_ms: 0,
        }
    }

    /// Pass when the metric value does not exceed the tolerance.
    pub fn bounded(
        scenario: &str,
        check_id: &str,
        anchor: &str,
        level: u32,
        metric: &str,
        value: f64,
        tolerance: f64,
    ) -> Self {
        Self::judged(
            scenario,
            check_id,
            anchor,
            level,
            metric,
            value,
            tolerance,
            value <= tolerance,
        )
    }
}

/// Aggregate outcome of a scenario run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overall {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub rows: Vec<CheckRow>,
}

impl RunReport {
    pub fn new(mut rows: Vec<CheckRow>) -> Self {
        // canonical order regardless of execution order
        rows.sort_by(|a, b| {
            a.check_id
                .cmp(&b.check_id)
                .then(a.level.cmp(&b.level))
                .then(a.metric.cmp(&b.metric))
        });
        Self { rows }
    }

    pub fn overall(&self) -> Overall {
        if self
            .rows
            .iter()
            .any(|r| r.verdict == RowVerdict::Inconclusive)
        {
            Overall::Inconclusive
        } else if self.rows.iter().any(|r| r.verdict == RowVerdict::Fail) {
            Overall::Fail
        } else {
            Overall::Pass
        }
    }

    pub fn write_report_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "scenario,check_id,paper_anchor,level,metric,value,tolerance,verdict,runtime_ms"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{:.12e},{:.12e},{},{}",
                r.scenario,
                r.check_id,
                r.paper_anchor,
                r.level,
                r.metric,
                r.value,
                r.tolerance,
                r.verdict,
                r.runtime_ms
            )?;
        }
        Ok(())
    }

    pub fn write_verdicts_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "scenario,check_id,verdict")?;
        for r in &self.rows {
            writeln!(out, "{},{},{}", r.scenario, r.check_id, r.verdict)?;
        }
        let overall = match self.overall() {
            Overall::Pass => "pass",
            Overall::Fail => "fail",
            Overall::Inconclusive => "inconclusive",
        };
        writeln!(out, "{},OVERALL,{}", self.rows.first().map(|r| r.scenario.as_str()).unwrap_or("-"), overall)?;
        Ok(())
    }
}
