//! Positioned diagnostics.

use std::fmt;

use serde::Serialize;

use crate::model::SourceSpan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    pub span: SourceSpan,
}

impl Diagnostic {
    pub fn error(code: &'static str, message: impl Into<String>, span: SourceSpan) -> Self {
        Self {
            severity: Severity::Error,
            code,
            message: message.into(),
            span,
        }
    }

    pub fn warning(code: &'static str, message: impl Into<String>, span: SourceSpan) -> Self {
        Self {
            severity: Severity::Warning,
            code,
            message: message.into(),
            span,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// `file:line:col: severity[code]: message`
impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}[{}]: {}",
            self.span.file, self.span.line, self.span.column, self.severity, self.code, self.message
        )
    }
}

#[derive(Serialize)]
struct DiagnosticJson<'a> {
    file: &'a str,
    line: u32,
    column: u32,
    length: u32,
    severity: Severity,
    code: &'a str,
    message: &'a str,
}

impl Diagnostic {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(DiagnosticJson {
            file: &self.span.file,
            line: self.span.line,
            column: self.span.column,
            length: self.span.length,
            severity: self.severity,
            code: self.code,
            message: &self.message,
        })
        .expect("diagnostic serializes")
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

/// Sorts by (file, line, column); ties keep their emission order.
pub fn sort(diags: &mut [Diagnostic]) {
    diags.sort_by(|a, b| {
        (&*a.span.file, a.span.line, a.span.column).cmp(&(&*b.span.file, b.span.line, b.span.column))
    });
}

/// Renders one diagnostic per line, sorted.
pub fn render(diags: &[Diagnostic]) -> String {
    let mut sorted = diags.to_vec();
    sort(&mut sorted);
    let mut out = String::new();
    for d in &sorted {
        out.push_str(&d.to_string());
        out.push('\n');
    }
    out
}
