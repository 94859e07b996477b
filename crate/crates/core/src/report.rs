//! Pass/fail records with measured slacks, shared by every verification
//! routine in the crate.

use serde::Serialize;

/// One checked inequality, normalized to the upper-bound form
/// `measured ≤ bound + tol`, so slack = bound - measured is ≥ -tol iff passed.
///
/// Lower-bound checks (achieved ≥ required) are stored in the same form by
/// putting the required constant in `measured` and the achieved value in
/// `bound`; the note spells out the direction so the text report stays
/// readable.
#[derive(Debug, Clone, Serialize)]
pub struct ReportEntry {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    pub slack: f64,
    pub tol: f64,
    pub location: Option<String>,
    pub note: String,
}

impl ReportEntry {
    /// Upper-bound check: passes iff measured ≤ bound + tol.
    pub fn le(name: impl Into<String>, measured: f64, bound: f64, tol: f64) -> ReportEntry {
        let slack = bound - measured;
        ReportEntry {
            name: name.into(),
            passed: slack >= -tol,
            measured,
            bound,
            slack,
            tol,
            location: None,
            note: String::new(),
        }
    }

    /// Lower-bound check: passes iff achieved ≥ required - tol. Stored in the
    /// normalized upper-bound form (measured = required, bound = achieved).
    pub fn ge(name: impl Into<String>, achieved: f64, required: f64, tol: f64) -> ReportEntry {
        let mut e = ReportEntry::le(name, required, achieved, tol);
        e.note = format!("lower-bound check: achieved {achieved:.6e} vs required {required:.6e}");
        e
    }

    pub fn with_location(mut self, location: impl Into<String>) -> ReportEntry {
        self.location = Some(location.into());
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> ReportEntry {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerificationReport {
    pub entries: Vec<ReportEntry>,
}

impl VerificationReport {
    pub fn new() -> VerificationReport {
        VerificationReport::default()
    }

    pub fn push(&mut self, entry: ReportEntry) {
        self.entries.push(entry);
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.entries.extend(other.entries);
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> Vec<&ReportEntry> {
        self.entries.iter().filter(|e| !e.passed).collect()
    }

    /// Entry with the smallest slack (the tightest check), if any.
    pub fn worst(&self) -> Option<&ReportEntry> {
        self.entries
            .iter()
            .min_by(|a, b| a.slack.partial_cmp(&b.slack).expect("finite slacks"))
    }
}
