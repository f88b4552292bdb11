use std::fmt::Write as _;
use std::io::{self, Write};

use serde::Serialize;

use crate::constants::{ConsistencyReport, ConstantsBundle};
use crate::operators::Floors;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    /// Failed, but documented as a known discrepancy.
    Warn,
    /// Reported for context; never gates the run.
    Info,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Warn => "WARN",
            Status::Info => "INFO",
        }
    }
}

/// Where the worst margin was attained.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl Witness {
    pub fn at(x: Option<Vec<f64>>, y: Option<Vec<f64>>, t: Option<f64>) -> Witness {
        Witness { x, y, t }
    }

    pub fn render(&self) -> String {
        let point = |v: &[f64]| v.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(" ");
        let mut parts = Vec::new();
        if let Some(x) = &self.x {
            parts.push(format!("x=({})", point(x)));
        }
        if let Some(y) = &self.y {
            parts.push(format!("y=({})", point(y)));
        }
        if let Some(t) = self.t {
            parts.push(format!("t={t}"));
        }
        parts.join(" ")
    }
}

/// One verified statement. `margin` is bound minus observed at the worst point.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub paper_tag: String,
    pub constant_name: Option<String>,
    pub constant: Option<f64>,
    pub observed: Option<f64>,
    pub bound: Option<f64>,
    pub margin: f64,
    pub tolerance: f64,
    pub witness: Witness,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRecord {
    /// Pass iff `margin >= -tolerance` (a NaN margin fails).
    pub fn gate(name: &str, paper_tag: &str, margin: f64, tolerance: f64) -> CheckRecord {
        let status = if margin >= -tolerance { Status::Pass } else { Status::Fail };
        CheckRecord {
            name: name.into(),
            paper_tag: paper_tag.into(),
            constant_name: None,
            constant: None,
            observed: None,
            bound: None,
            margin,
            tolerance,
            witness: Witness::default(),
            status,
            note: None,
        }
    }

    pub fn constant(mut self, name: &str, value: f64) -> CheckRecord {
        self.constant_name = Some(name.into());
        self.constant = Some(value);
        self
    }

    pub fn values(mut self, observed: f64, bound: f64) -> CheckRecord {
        self.observed = Some(observed);
        self.bound = Some(bound);
        self
    }

    pub fn witness(mut self, witness: Witness) -> CheckRecord {
        self.witness = witness;
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> CheckRecord {
        self.note = Some(note.into());
        self
    }

    /// Also requires `condition`; used when a check has a structural part.
    pub fn require(mut self, condition: bool, why: &str) -> CheckRecord {
        if !condition {
            self.status = Status::Fail;
            self.note = Some(match self.note.take() {
                Some(n) => format!("{n}; {why}"),
                None => why.into(),
            });
        }
        self
    }

    pub fn informational(mut self) -> CheckRecord {
        self.status = Status::Info;
        self
    }

    pub fn warn_on_fail(mut self) -> CheckRecord {
        if self.status == Status::Fail {
            self.status = Status::Warn;
        }
        self
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunInfo {
    pub label: String,
    pub scheme: &'static str,
    pub seed: u64,
    pub dim: usize,
    pub lambda: f64,
    pub h: f64,
    pub dt: f64,
    pub radii: Vec<f64>,
    pub times: Vec<f64>,
    pub sources: Vec<Vec<f64>>,
    pub nodes: usize,
    pub floors: Floors,
    pub floors_certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub run: RunInfo,
    pub constants: ConstantsBundle,
    pub consistency: ConsistencyReport,
    pub checks: Vec<CheckRecord>,
    pub passed: bool,
}

impl BoundReport {
    pub fn new(
        run: RunInfo,
        constants: ConstantsBundle,
        consistency: ConsistencyReport,
        checks: Vec<CheckRecord>,
    ) -> BoundReport {
        let passed = checks.iter().all(|c| !c.failed());
        BoundReport { run, constants, consistency, checks, passed }
    }

    pub fn find(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_records_csv(&self.checks, w)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn number(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

/// `name,paper_tag,constant,margin,witness,pass`, one row per check.
pub fn write_records_csv<W: Write>(records: &[CheckRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "name,paper_tag,constant,margin,witness,pass")?;
    for r in records {
        let mut line = String::new();
        let _ = write!(
            line,
            "{},{},{},{:e},{},{}",
            csv_field(&r.name),
            csv_field(&r.paper_tag),
            number(r.constant),
            r.margin,
            csv_field(&r.witness.render()),
            r.status.label()
        );
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_follows_margin_and_tolerance() {
        assert_eq!(CheckRecord::gate("a", "", -0.05, 0.1).status, Status::Pass);
        assert_eq!(CheckRecord::gate("a", "", -0.2, 0.1).status, Status::Fail);
        assert_eq!(CheckRecord::gate("a", "", f64::NAN, 0.1).status, Status::Fail);
        assert_eq!(CheckRecord::gate("a", "", -0.2, 0.1).warn_on_fail().status, Status::Warn);
        assert_eq!(CheckRecord::gate("a", "", 1.0, 0.0).require(false, "broken").status, Status::Fail);
    }

    #[test]
    fn csv_quotes_and_formats() {
        let r = CheckRecord::gate("mass", "a, b", 0.5, 0.0)
            .constant("C", 2.0)
            .witness(Witness::at(Some(vec![0.0, 1.0]), None, Some(0.5)));
        let mut out = Vec::new();
        write_records_csv(&[r], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "mass,\"a, b\",2e0,5e-1,x=(0 1) t=0.5,PASS");
    }
}
