//! Text and line-delimited JSON reports.

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde_json::{json, Value};
use std::path::Path;
use vinegc::gctest::{GCTestResult, Variant};
use vinegc::linear::LinearGCResult;
use vinegc::tsprep::PPResult;

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    /// One JSON object per line.
    Machine,
}

pub struct TestCell {
    pub method: &'static str,
    pub p_value: f64,
    pub statistic: f64,
    pub detail: Value,
}

impl TestCell {
    pub fn vine(variant: Variant, r: &GCTestResult) -> Self {
        TestCell {
            method: match variant {
                Variant::FullSample => "mvine",
                Variant::SplitSample => "split",
            },
            p_value: r.p_value,
            statistic: r.statistic,
            detail: json!({
                "k": r.k_used,
                "B": r.b_requested,
                "B_effective": r.b_effective(),
                "N": r.config.n,
                "score_from": r.score_from,
                "aic_x": r.model_x.aic,
                "aic_xy": r.model_xy.aic,
            }),
        }
    }

    pub fn linear(r: &LinearGCResult) -> Self {
        TestCell {
            method: "linear",
            p_value: r.p_value,
            statistic: r.statistic,
            detail: json!({ "lag": r.lag, "rss0": r.rss0, "rss1": r.rss1 }),
        }
    }
}

/// Significance stars at 0.1 / 0.05 / 0.01.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

pub fn pp_p_text(p: f64) -> String {
    if p <= 0.01 {
        "<0.01".into()
    } else if p >= 0.99 {
        ">0.99".into()
    } else {
        format!("{p:.3}")
    }
}

pub struct Out {
    format: Format,
    command: &'static str,
    lines: Vec<String>,
    header_done: bool,
}

impl Out {
    pub fn new(format: Format, command: &'static str) -> Self {
        Out { format, command, lines: Vec::new(), header_done: false }
    }

    fn record(&mut self, kind: &str, mut v: Value) {
        let obj = v.as_object_mut().expect("record is an object");
        obj.insert("record".into(), json!(kind));
        let mut full = json!({ "format": "vinegc-report", "version": REPORT_VERSION, "command": self.command });
        full.as_object_mut().unwrap().extend(obj.clone());
        self.lines.push(full.to_string());
    }

    pub fn command(&mut self, cmd: &str) {
        match self.format {
            Format::Text => {
                self.lines.push(format!("# vinegc {} (report v{REPORT_VERSION})", self.command));
                self.lines.push(format!("# command: {cmd}"));
            }
            Format::Machine => self.record("run", json!({ "invocation": cmd })),
        }
    }

    pub fn setting(&mut self, key: &str, value: &str) {
        match self.format {
            Format::Text => self.lines.push(format!("# {key}: {value}")),
            Format::Machine => self.record("setting", json!({ "key": key, "value": value })),
        }
    }

    pub fn note(&mut self, text: &str) {
        match self.format {
            Format::Text => self.lines.push(format!("# note: {text}")),
            Format::Machine => self.record("note", json!({ "text": text })),
        }
    }

    pub fn pp(&mut self, name: &str, r: &PPResult) {
        match self.format {
            Format::Text => self.lines.push(format!(
                "# Phillips-Perron {name}: Z_tau = {:.4}, p = {}, bandwidth = {}",
                r.z_tau,
                pp_p_text(r.p_value),
                r.bandwidth
            )),
            Format::Machine => self.record(
                "pp",
                json!({ "series": name, "z_tau": r.z_tau, "p_value": r.p_value, "bandwidth": r.bandwidth }),
            ),
        }
    }

    pub fn test_row(&mut self, from: &str, to: &str, cells: &[TestCell]) {
        let direction = format!("{from} -> {to}");
        match self.format {
            Format::Text => {
                if !self.header_done {
                    let mut h = format!("{:<24}", "direction");
                    for c in cells {
                        h.push_str(&format!(" {:>12}", c.method));
                    }
                    self.lines.push(h);
                    self.header_done = true;
                }
                let mut row = format!("{direction:<24}");
                for c in cells {
                    row.push_str(&format!(" {:>12}", format!("{:.3}{:<3}", c.p_value, stars(c.p_value))));
                }
                self.lines.push(row);
                let stats: Vec<String> = cells.iter().map(|c| format!("{}={:.5}", c.method, c.statistic)).collect();
                self.lines.push(format!("#   statistics: {}", stats.join(", ")));
            }
            Format::Machine => {
                for c in cells {
                    self.record(
                        "test",
                        json!({
                            "cause": from,
                            "effect": to,
                            "method": c.method,
                            "p_value": c.p_value,
                            "statistic": c.statistic,
                            "detail": c.detail,
                        }),
                    );
                }
            }
        }
    }

    pub fn fit_row(&mut self, model: &str, order: usize, loglik: f64, n_params: usize, aic: f64) {
        match self.format {
            Format::Text => {
                if !self.header_done {
                    self.lines
                        .push(format!("{:<8} {:>5} {:>12} {:>8} {:>12}", "model", "order", "loglik", "params", "AIC"));
                    self.header_done = true;
                }
                let ll = if loglik.is_nan() { "-".to_string() } else { format!("{loglik:.4}") };
                self.lines.push(format!("{model:<8} {order:>5} {ll:>12} {n_params:>8} {aic:>12.4}"));
            }
            Format::Machine => self.record(
                "fit",
                json!({
                    "model": model,
                    "order": order,
                    "loglik": if loglik.is_nan() { Value::Null } else { json!(loglik) },
                    "n_params": n_params,
                    "aic": aic,
                }),
            ),
        }
    }

    pub fn class_row(&mut self, class: &str, copula: &str) {
        match self.format {
            Format::Text => self.lines.push(format!("#   c[{class}] = {copula}")),
            Format::Machine => self.record("class", json!({ "class": class, "copula": copula })),
        }
    }

    pub fn finish(mut self, path: Option<&Path>) -> Result<()> {
        if self.format == Format::Text && self.command == "test" {
            self.lines.push("# significance: * p<0.1, ** p<0.05, *** p<0.01".into());
        }
        let mut text = self.lines.join("\n");
        text.push('\n');
        match path {
            Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}
