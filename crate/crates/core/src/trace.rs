//! Tagged numeric series and their CSV form.
//!
//! Column names are `<name>_<unit>` (or just `<name>` for dimensionless
//! quantities) followed by an optional `sigma` column and the tag column,
//! e.g. `tau_ns,g2,port`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSeries {
    pub x_name: String,
    pub x_unit: String,
    pub y_name: String,
    pub y_unit: String,
    pub tag_key: String,
    pub tag: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
}

fn column(name: &str, unit: &str) -> String {
    if unit.is_empty() {
        name.to_string()
    } else {
        format!("{name}_{unit}")
    }
}

impl TraceSeries {
    pub fn new(
        x_name: &str,
        x_unit: &str,
        y_name: &str,
        y_unit: &str,
        tag_key: &str,
        tag: &str,
    ) -> Self {
        TraceSeries {
            x_name: x_name.into(),
            x_unit: x_unit.into(),
            y_name: y_name.into(),
            y_unit: y_unit.into(),
            tag_key: tag_key.into(),
            tag: tag.into(),
            x: Vec::new(),
            y: Vec::new(),
            sigma: None,
        }
    }

    pub fn with_data(mut self, x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len(), "x and y lengths differ");
        self.x = x;
        self.y = y;
        self
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Self {
        assert_eq!(sigma.len(), self.x.len(), "sigma length differs from x");
        self.sigma = Some(sigma);
        self
    }

    pub fn push(&mut self, x: f64, y: f64) {
        self.x.push(x);
        self.y.push(y);
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols = vec![
            column(&self.x_name, &self.x_unit),
            column(&self.y_name, &self.y_unit),
        ];
        if self.sigma.is_some() {
            cols.push("sigma".into());
        }
        cols.push(self.tag_key.clone());
        cols
    }

    /// Same column layout, so the two can share a CSV file.
    pub fn compatible(&self, other: &TraceSeries) -> bool {
        self.header() == other.header()
    }

    pub fn map_x(mut self, f: impl Fn(f64) -> f64) -> Self {
        self.x.iter_mut().for_each(|v| *v = f(*v));
        self
    }

    pub fn map_y(mut self, f: impl Fn(f64) -> f64) -> Self {
        self.y.iter_mut().for_each(|v| *v = f(*v));
        self
    }
}

/// Writes one or more traces with identical columns into a single CSV,
/// trace after trace, rows in stored order.
pub fn write_csv<W: Write>(traces: &[TraceSeries], mut out: W) -> Result<()> {
    let Some(first) = traces.first() else {
        return Ok(());
    };
    if let Some(bad) = traces.iter().find(|t| !first.compatible(t)) {
        return Err(Error::Data(format!(
            "trace `{}` has columns {:?}, expected {:?}",
            bad.tag,
            bad.header(),
            first.header()
        )));
    }
    writeln!(out, "{}", first.header().join(","))?;
    for t in traces {
        for i in 0..t.len() {
            match &t.sigma {
                Some(s) => writeln!(out, "{},{},{},{}", t.x[i], t.y[i], s[i], t.tag)?,
                None => writeln!(out, "{},{},{}", t.x[i], t.y[i], t.tag)?,
            }
        }
    }
    Ok(())
}

/// Reads a CSV written by [`write_csv`], splitting rows by tag in order of
/// first appearance. Column names are recovered from the header; units
/// cannot be split from names and are left empty.
pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<TraceSeries>> {
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Ok(Vec::new()),
    };
    let cols: Vec<&str> = header.trim().split(',').collect();
    let has_sigma = match cols.len() {
        3 => false,
        4 if cols[2] == "sigma" => true,
        _ => {
            return Err(Error::Data(format!(
                "unexpected trace header `{header}`"
            )))
        }
    };
    let tag_key = cols[cols.len() - 1];
    let mut traces: Vec<TraceSeries> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Data(format!(
                "line {}: expected {} fields, got {}",
                lineno + 2,
                cols.len(),
                fields.len()
            )));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Data(format!("line {}: `{s}`: {e}", lineno + 2)))
        };
        let x = num(fields[0])?;
        let y = num(fields[1])?;
        let tag = fields[fields.len() - 1];
        let idx = match traces.iter().position(|t| t.tag == tag) {
            Some(i) => i,
            None => {
                let mut t = TraceSeries::new(cols[0], "", cols[1], "", tag_key, tag);
                if has_sigma {
                    t.sigma = Some(Vec::new());
                }
                traces.push(t);
                traces.len() - 1
            }
        };
        let t = &mut traces[idx];
        t.push(x, y);
        if has_sigma {
            let s = num(fields[2])?;
            if let Some(v) = t.sigma.as_mut() {
                v.push(s);
            }
        }
    }
    Ok(traces)
}
