//! Deterministic TSV, JSON and aligned-text renderings of analysis results.

use std::fmt;
use std::str::FromStr;

use num_traits::ToPrimitive;
use serde_json::{json, Value};

use crate::lineage::DLineage;
use crate::metrics::{ContingencyResult, CorrelationResult, EffectResult};
use crate::rational::{significant, to_decimal, to_fraction, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Tsv,
    Json,
    Pretty,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tsv" => Ok(Format::Tsv),
            "json" => Ok(Format::Json),
            "pretty" => Ok(Format::Pretty),
            other => Err(format!(
                "unknown format `{other}` (expected tsv, json or pretty)"
            )),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Tsv => "tsv",
            Format::Json => "json",
            Format::Pretty => "pretty",
        })
    }
}

const DECIMAL_PLACES: usize = 6;
const R_DIGITS: usize = 7;

/// One tuple's line in a report. Columns that an analysis did not compute
/// render as `-`.
#[derive(Debug, Clone)]
pub struct Row {
    pub effect: EffectResult,
    pub cause: Option<ContingencyResult>,
    pub correlation: Option<CorrelationResult>,
}

impl Row {
    pub fn effect_only(effect: EffectResult) -> Self {
        Row {
            effect,
            cause: None,
            correlation: None,
        }
    }
}

/// Which optional column groups a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Effect,
    Causes,
    Correlate,
}

fn rational_json(r: &Rational) -> Value {
    match (r.numer().to_i64(), r.denom().to_i64()) {
        (Some(n), Some(d)) => json!({ "num": n, "den": d }),
        _ => json!({ "num": r.numer().to_string(), "den": r.denom().to_string() }),
    }
}

fn float(x: f64) -> String {
    significant(x, R_DIGITS)
}

fn fixed(x: f64) -> String {
    let s = format!("{x:.DECIMAL_PLACES$}");
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn header(kind: Kind) -> Vec<&'static str> {
    let mut h = vec![
        "tuple",
        "polarity",
        "v",
        "effect_fraction",
        "effect_decimal",
        "responsibility",
        "pearson_r",
    ];
    match kind {
        Kind::Effect => {}
        Kind::Causes => h.extend(["actual_cause", "contingency"]),
        Kind::Correlate => h.extend(["identity", "residual"]),
    }
    h
}

fn cells(row: &Row, kind: Kind) -> Vec<String> {
    let e = &row.effect;
    let mut c = vec![
        e.tuple.to_string(),
        e.polarity.symbol().to_string(),
        u8::from(e.v).to_string(),
        to_fraction(&e.effect),
        to_decimal(&e.effect, DECIMAL_PLACES),
        row.cause
            .as_ref()
            .map_or("-".into(), |c| to_fraction(&c.responsibility)),
        row.correlation.as_ref().map_or("-".into(), |c| float(c.r)),
    ];
    match kind {
        Kind::Effect => {}
        Kind::Causes => {
            let cause = row.cause.as_ref();
            c.push(cause.map_or("-".into(), |c| u8::from(c.is_actual_cause).to_string()));
            c.push(match cause.and_then(|c| c.minimal_contingency.as_ref()) {
                None => "-".into(),
                Some(g) => format!(
                    "{{{}}}",
                    g.iter()
                        .map(|t| t.to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            });
        }
        Kind::Correlate => {
            let corr = row.correlation.as_ref();
            c.push(corr.map_or("-".into(), |c| fixed(c.identity)));
            c.push(corr.map_or("-".into(), |c| fixed(c.residual())));
        }
    }
    c
}

fn row_json(row: &Row) -> Value {
    let e = &row.effect;
    let mut obj = json!({
        "tuple": e.tuple.to_string(),
        "polarity": e.polarity.symbol(),
        "v": u8::from(e.v),
        "effect": rational_json(&e.effect),
        "effect_fraction": to_fraction(&e.effect),
        "effect_decimal": to_decimal(&e.effect, DECIMAL_PLACES),
        "e_do_v": rational_json(&e.e_do_v),
        "e_do_not_v": rational_json(&e.e_do_not_v),
        "responsibility": Value::Null,
        "pearson_r": Value::Null,
    });
    let map = obj.as_object_mut().expect("object literal");
    if let Some(c) = &row.cause {
        map.insert("responsibility".into(), rational_json(&c.responsibility));
        map.insert("actual_cause".into(), json!(c.is_actual_cause));
        map.insert(
            "contingency".into(),
            match &c.minimal_contingency {
                Some(g) => json!(g.iter().map(|t| t.to_string()).collect::<Vec<_>>()),
                None => Value::Null,
            },
        );
    }
    if let Some(c) = &row.correlation {
        map.insert(
            "pearson_r".into(),
            json!(float(c.r).parse::<f64>().unwrap_or(c.r)),
        );
        map.insert("r_squared".into(), rational_json(&c.r_squared));
        map.insert("cov".into(), rational_json(&c.cov));
        map.insert("mu_q".into(), rational_json(&c.mu_q));
        map.insert("mu_x".into(), rational_json(&c.mu_x));
        map.insert("var_q".into(), rational_json(&c.var_q));
        map.insert("var_x".into(), rational_json(&c.var_x));
        map.insert("sigma_q".into(), json!(c.sigma_q));
        map.insert("sigma_x".into(), json!(c.sigma_x));
        map.insert("identity".into(), json!(c.identity));
        map.insert("residual".into(), json!(c.residual()));
        map.insert("identity_exact".into(), json!(c.identity_exact));
    }
    obj
}

fn tsv(rows: &[Vec<String>]) -> String {
    rows.iter().map(|r| r.join("\t") + "\n").collect()
}

fn pretty(rows: &[Vec<String>]) -> String {
    let cols = rows.first().map_or(0, Vec::len);
    let widths: Vec<usize> = (0..cols)
        .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (n, r) in rows.iter().enumerate() {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if n == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}

pub fn render_rows(rows: &[Row], kind: Kind, format: Format) -> String {
    match format {
        Format::Json => {
            let v: Vec<Value> = rows.iter().map(row_json).collect();
            serde_json::to_string_pretty(&v).expect("json values serialize") + "\n"
        }
        Format::Tsv | Format::Pretty => {
            let mut table = vec![header(kind).into_iter().map(String::from).collect()];
            table.extend(rows.iter().map(|r| cells(r, kind)));
            if format == Format::Tsv {
                tsv(&table)
            } else {
                pretty(&table)
            }
        }
    }
}

/// The formula on one line followed by its variable table.
pub fn render_lineage(dl: &DLineage, format: Format) -> String {
    let vars: Vec<Vec<String>> = dl
        .vars
        .iter()
        .map(|(t, i)| {
            vec![
                t.to_string(),
                i.polarity.symbol().to_string(),
                if i.endogenous {
                    "endogenous"
                } else {
                    "exogenous"
                }
                .to_string(),
                u8::from(i.in_instance).to_string(),
            ]
        })
        .collect();
    match format {
        Format::Json => {
            let v = json!({
                "formula": dl.to_text(),
                "variables": dl.vars.iter().map(|(t, i)| json!({
                    "tuple": t.to_string(),
                    "polarity": i.polarity.symbol(),
                    "endogenous": i.endogenous,
                    "in_instance": i.in_instance,
                })).collect::<Vec<_>>(),
            });
            serde_json::to_string_pretty(&v).expect("json values serialize") + "\n"
        }
        Format::Tsv | Format::Pretty => {
            let mut table = vec![["variable", "polarity", "kind", "in_instance"]
                .map(String::from)
                .to_vec()];
            table.extend(vars);
            let body = if format == Format::Tsv {
                tsv(&table)
            } else {
                pretty(&table)
            };
            format!("{}\n{}", dl.to_text(), body)
        }
    }
}
