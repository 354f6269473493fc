//! Structured command results and their text, LaTeX and JSON renderings.

use std::fmt::Write;

use serde_json::{json, Value};

use crate::expr::{Expr, Names, RenderStyle};

/// Version tag of the JSON report layout.
pub const SCHEMA: &str = "varseq-report/v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Latex,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "latex" => Ok(Format::Latex),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (expected text, latex or json)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Expr { label: String, expr: Expr },
    Check { label: String, passed: bool, detail: Option<String> },
    Number { label: String, value: f64 },
    Text { label: String, value: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportSection {
    pub title: String,
    pub items: Vec<Item>,
}

impl ReportSection {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), items: Vec::new() }
    }

    pub fn expr(&mut self, label: impl Into<String>, expr: Expr) {
        self.items.push(Item::Expr { label: label.into(), expr });
    }

    pub fn check(&mut self, label: impl Into<String>, passed: bool, detail: Option<String>) {
        self.items.push(Item::Check { label: label.into(), passed, detail });
    }

    pub fn number(&mut self, label: impl Into<String>, value: f64) {
        self.items.push(Item::Number { label: label.into(), value });
    }

    pub fn text(&mut self, label: impl Into<String>, value: impl Into<String>) {
        self.items.push(Item::Text { label: label.into(), value: value.into() });
    }
}

/// Result of one command on one problem file.
#[derive(Clone, Debug)]
pub struct ReportDocument {
    pub command: String,
    pub file: String,
    pub names: Names,
    pub sections: Vec<ReportSection>,
    /// Set when an identity fails or a verdict is negative for the command.
    pub failed: bool,
}

impl ReportDocument {
    pub fn new(command: &str, file: &str, names: Names) -> Self {
        Self { command: command.into(), file: file.into(), names, sections: Vec::new(), failed: false }
    }

    pub fn push(&mut self, section: ReportSection) {
        self.sections.push(section);
    }

    /// Every check item in the document.
    pub fn checks(&self) -> impl Iterator<Item = (&str, bool)> {
        self.sections.iter().flat_map(|s| &s.items).filter_map(|i| match i {
            Item::Check { label, passed, .. } => Some((label.as_str(), *passed)),
            _ => None,
        })
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.to_text(),
            Format::Latex => self.to_latex(),
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.to_json()).expect("serializable report");
                s.push('\n');
                s
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("varseq {} {}\n", self.command, self.file);
        for s in &self.sections {
            let _ = writeln!(out, "\n== {} ==", s.title);
            for item in &s.items {
                match item {
                    Item::Expr { label, expr } => {
                        let _ = writeln!(out, "{label} = {}", expr.render(&self.names, RenderStyle::Plain));
                    }
                    Item::Check { label, passed, detail } => {
                        let mark = if *passed { "PASS" } else { "FAIL" };
                        match detail {
                            Some(d) => {
                                let _ = writeln!(out, "[{mark}] {label}: {d}");
                            }
                            None => {
                                let _ = writeln!(out, "[{mark}] {label}");
                            }
                        }
                    }
                    Item::Number { label, value } => {
                        let _ = writeln!(out, "{label} = {}", fmt_number(*value));
                    }
                    Item::Text { label, value } => {
                        let _ = writeln!(out, "{label}: {value}");
                    }
                }
            }
        }
        let _ = writeln!(out, "\nstatus: {}", if self.failed { "failed" } else { "ok" });
        out
    }

    pub fn to_latex(&self) -> String {
        let mut out = format!("% varseq {} {}\n", self.command, latex_escape(&self.file));
        for s in &self.sections {
            let _ = writeln!(out, "\\subsection*{{{}}}", latex_escape(&s.title));
            out.push_str("\\begin{itemize}\n");
            for item in &s.items {
                match item {
                    Item::Expr { label, expr } => {
                        let _ = writeln!(
                            out,
                            "  \\item \\texttt{{{}}}: ${}$",
                            latex_escape(label),
                            expr.render(&self.names, RenderStyle::Latex)
                        );
                    }
                    Item::Check { label, passed, detail } => {
                        let mark = if *passed { "\\checkmark" } else { "$\\times$" };
                        let _ = write!(out, "  \\item {mark} {}", latex_escape(label));
                        if let Some(d) = detail {
                            let _ = write!(out, " ({})", latex_escape(d));
                        }
                        out.push('\n');
                    }
                    Item::Number { label, value } => {
                        let _ = writeln!(out, "  \\item \\texttt{{{}}}: ${}$", latex_escape(label), fmt_number(*value));
                    }
                    Item::Text { label, value } => {
                        let _ = writeln!(out, "  \\item \\texttt{{{}}}: {}", latex_escape(label), latex_escape(value));
                    }
                }
            }
            out.push_str("\\end{itemize}\n");
        }
        let _ = writeln!(out, "% status: {}", if self.failed { "failed" } else { "ok" });
        out
    }

    pub fn to_json(&self) -> Value {
        let sections: Vec<Value> = self
            .sections
            .iter()
            .map(|s| {
                let items: Vec<Value> = s
                    .items
                    .iter()
                    .map(|item| match item {
                        Item::Expr { label, expr } => json!({
                            "kind": "expr",
                            "label": label,
                            "text": expr.render(&self.names, RenderStyle::Plain),
                            "latex": expr.render(&self.names, RenderStyle::Latex),
                            "zero": expr.is_zero(),
                            "tree": expr.to_json(&self.names),
                        }),
                        Item::Check { label, passed, detail } => json!({
                            "kind": "check",
                            "label": label,
                            "passed": passed,
                            "detail": detail,
                        }),
                        Item::Number { label, value } => json!({
                            "kind": "number",
                            "label": label,
                            "value": fmt_number(*value),
                        }),
                        Item::Text { label, value } => json!({"kind": "text", "label": label, "value": value}),
                    })
                    .collect();
                json!({"title": s.title, "items": items})
            })
            .collect();
        json!({
            "schema": SCHEMA,
            "command": self.command,
            "file": self.file,
            "status": if self.failed { "failed" } else { "ok" },
            "sections": sections,
        })
    }
}

/// Fixed-precision scientific notation, identical across platforms.
pub fn fmt_number(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:.9e}")
    }
}

fn latex_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '_' | '{' | '}' | '#' | '%' | '&' | '$' => {
                out.push('\\');
                out.push(c);
            }
            '^' => out.push_str("\\^{}"),
            '\\' => out.push_str("\\textbackslash{}"),
            '~' => out.push_str("\\~{}"),
            _ => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_all_formats() {
        let names = Names { base: vec!["x".into()], fields: vec!["u".into()], ..Names::default() };
        let mut doc = ReportDocument::new("el", "a.vp", names);
        let mut s = ReportSection::new("Euler-Lagrange expressions");
        s.expr("E_u", -Expr::field(0, crate::MultiIndex::from_slice(&[2])));
        s.check("certificate", true, None);
        s.number("error", 1.5e-7);
        doc.push(s);
        let text = doc.render(Format::Text);
        assert!(
            text.contains("E_u = -u_{xx}") && text.contains("[PASS] certificate") && text.ends_with("status: ok\n")
        );
        let v = doc.to_json();
        assert_eq!(v["schema"], SCHEMA);
        assert_eq!(v["sections"][0]["items"][1]["passed"], true);
        assert!(doc.render(Format::Latex).contains("\\checkmark certificate"));
        assert_eq!("json".parse::<Format>(), Ok(Format::Json));
    }
}
