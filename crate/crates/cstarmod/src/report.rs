//! Report assembly with two renderings: a human-readable listing and a
//! machine format with a documented line schema.
//!
//! The machine format is stable across runs: sections and facts appear in
//! insertion order, floats are rendered with a fixed `{:.12e}` precision, and
//! nothing time- or environment-dependent is written. Two runs of the same
//! deterministic computation therefore produce byte-identical output.
//!
//! Machine schema, one record per line:
//!
//! ```text
//! report-format 1
//! title <word>
//! section <word>
//! fact <key> = <value>
//! check <label> PASS
//! check <label> FAIL <detail>
//! end
//! summary checks <total> failures <count>
//! ```
//!
//! `title`, `section` headings, fact keys and check labels contain no spaces;
//! fact values and failure details may. A `section`/`end` pair brackets each
//! group of facts and checks.

use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct CheckRecord {
    pub label: String,
    pub passed: bool,
    /// Extra context shown when the check fails.
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct Section {
    pub heading: String,
    pub facts: Vec<(String, String)>,
    pub checks: Vec<CheckRecord>,
}

impl Section {
    pub fn new(heading: impl Into<String>) -> Self {
        let heading = heading.into();
        debug_assert!(!heading.contains(' '), "section headings are single words");
        Section { heading, facts: Vec::new(), checks: Vec::new() }
    }

    pub fn fact(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        debug_assert!(!key.contains(' '), "fact keys are single words");
        self.facts.push((key, value.into()));
    }

    pub fn fact_float(&mut self, key: impl Into<String>, value: f64) {
        self.fact(key, fmt_float(value));
    }

    pub fn check(&mut self, label: impl Into<String>, passed: bool, detail: impl Into<String>) {
        let label = label.into();
        debug_assert!(!label.contains(' '), "check labels are single words");
        self.checks.push(CheckRecord { label, passed, detail: detail.into() });
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub title: String,
    pub sections: Vec<Section>,
}

/// Canonical float rendering for reports; fixed width keeps output stable.
pub fn fmt_float(x: f64) -> String {
    format!("{:.12e}", x)
}

pub fn fmt_bool(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Human,
    Machine,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        let title = title.into();
        debug_assert!(!title.contains(' '), "report titles are single words");
        Report { title, sections: Vec::new() }
    }

    pub fn push(&mut self, section: Section) {
        self.sections.push(section);
    }

    pub fn total_checks(&self) -> usize {
        self.sections.iter().map(|s| s.checks.len()).sum()
    }

    pub fn failures(&self) -> usize {
        self.sections
            .iter()
            .flat_map(|s| &s.checks)
            .filter(|c| !c.passed)
            .count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Machine => self.render_machine(),
            Format::Human => self.render_human(),
        }
    }

    fn render_machine(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "report-format 1");
        let _ = writeln!(out, "title {}", self.title);
        for section in &self.sections {
            let _ = writeln!(out, "section {}", section.heading);
            for (key, value) in &section.facts {
                let _ = writeln!(out, "fact {} = {}", key, value);
            }
            for check in &section.checks {
                if check.passed {
                    let _ = writeln!(out, "check {} PASS", check.label);
                } else {
                    let _ = writeln!(out, "check {} FAIL {}", check.label, check.detail);
                }
            }
            let _ = writeln!(out, "end");
        }
        let _ = writeln!(
            out,
            "summary checks {} failures {}",
            self.total_checks(),
            self.failures()
        );
        out
    }

    fn render_human(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "== {} ==", self.title);
        for section in &self.sections {
            let _ = writeln!(out);
            let _ = writeln!(out, "[{}]", section.heading);
            for (key, value) in &section.facts {
                let _ = writeln!(out, "  {:<32} {}", key, value);
            }
            for check in &section.checks {
                if check.passed {
                    let _ = writeln!(out, "  PASS  {}", check.label);
                } else if check.detail.is_empty() {
                    let _ = writeln!(out, "  FAIL  {}", check.label);
                } else {
                    let _ = writeln!(out, "  FAIL  {}  ({})", check.label, check.detail);
                }
            }
        }
        let _ = writeln!(out);
        let failures = self.failures();
        if failures == 0 {
            let _ = writeln!(out, "all {} checks passed", self.total_checks());
        } else {
            let _ = writeln!(
                out,
                "{} of {} checks FAILED",
                failures,
                self.total_checks()
            );
        }
        out
    }
}
