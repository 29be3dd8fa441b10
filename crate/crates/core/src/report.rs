//! Report schema shared by the CLI and the verification suites: one line per
//! check with a stable tag, the measured residual or margin, and the pinned
//! tolerance.

use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct CheckLine {
    /// Stable identifier, e.g. `laplacian-decomposition`.
    pub tag: String,
    pub description: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    pub passed: bool,
}

impl CheckLine {
    /// A residual that must stay below a tolerance.
    pub fn residual(tag: &str, description: impl Into<String>, residual: f64, tol: f64) -> Self {
        CheckLine {
            tag: tag.into(),
            description: description.into(),
            residual: Some(residual),
            tolerance: Some(tol),
            margin: None,
            passed: residual.is_finite() && residual <= tol,
        }
    }

    /// A margin that must stay above a floor (usually a small negative
    /// rounding allowance).
    pub fn margin(tag: &str, description: impl Into<String>, margin: f64, floor: f64) -> Self {
        CheckLine {
            tag: tag.into(),
            description: description.into(),
            residual: None,
            tolerance: Some(floor),
            margin: Some(margin),
            passed: margin.is_finite() && margin >= floor,
        }
    }

    /// A plain boolean condition.
    pub fn flag(tag: &str, description: impl Into<String>, ok: bool) -> Self {
        CheckLine {
            tag: tag.into(),
            description: description.into(),
            residual: None,
            tolerance: None,
            margin: None,
            passed: ok,
        }
    }
}

/// Accumulator for check lines.
#[derive(Clone, Debug, Default, Serialize)]
pub struct CheckSet {
    pub checks: Vec<CheckLine>,
}

impl CheckSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, line: CheckLine) {
        self.checks.push(line);
    }

    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }

    pub fn failed(&self) -> usize {
        self.checks.len() - self.passed()
    }

    pub fn all_passed(&self) -> bool {
        self.failed() == 0
    }

    /// Folds a batch of residuals into a single worst-case line.
    pub fn push_worst_residual(
        &mut self,
        tag: &str,
        description: impl Into<String>,
        residuals: &[f64],
        tol: f64,
    ) {
        let worst = residuals.iter().cloned().fold(0.0f64, f64::max);
        self.push(CheckLine::residual(tag, description, worst, tol));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tag,description,residual,tolerance,margin,passed\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.tag,
                c.description.replace(',', ";"),
                c.residual.map(|v| format!("{v:e}")).unwrap_or_default(),
                c.tolerance.map(|v| format!("{v:e}")).unwrap_or_default(),
                c.margin.map(|v| format!("{v:e}")).unwrap_or_default(),
                c.passed
            ));
        }
        out
    }

    /// One human-readable line per check.
    pub fn render_lines(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed { "pass" } else { "FAIL" };
            let detail = match (c.residual, c.margin) {
                (Some(r), _) => format!(
                    "residual {:.3e} (tol {:.1e})",
                    r,
                    c.tolerance.unwrap_or(f64::NAN)
                ),
                (None, Some(m)) => format!("margin {m:.3e}"),
                _ => String::new(),
            };
            out.push_str(&format!("[{status}] {:<28} {} {detail}\n", c.tag, c.description));
        }
        out
    }
}
