//! Flat CSV result tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEADER: [&str; 7] = [
    "scenario",
    "scheme",
    "user",
    "p_dbm",
    "metric",
    "value",
    "half_width",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub scheme: String,
    /// `c1-k`, `c2-k` or `all`.
    pub user: String,
    pub p_dbm: f64,
    pub metric: String,
    pub value: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub rows: Vec<ReportRow>,
}

/// Label of user `i` in C1-then-C2 order.
pub fn user_label(i: usize, m1: usize) -> String {
    if i < m1 {
        format!("c1-{}", i + 1)
    } else {
        format!("c2-{}", i - m1 + 1)
    }
}

impl MetricReport {
    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        scenario: &str,
        scheme: &str,
        user: &str,
        p_dbm: f64,
        metric: &str,
        value: f64,
        half_width: f64,
    ) {
        self.rows.push(ReportRow {
            scenario: scenario.to_owned(),
            scheme: scheme.to_owned(),
            user: user.to_owned(),
            p_dbm,
            metric: metric.to_owned(),
            value,
            half_width,
        });
    }

    /// CSV text. Floats use the shortest representation that parses back to
    /// the same value.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let fmt = |x: f64| format!("{x:?}");
        let mut write = |rec: &[&str]| w.write_record(rec).expect("writing to memory cannot fail");
        write(&HEADER);
        for r in &self.rows {
            write(&[
                &r.scenario,
                &r.scheme,
                &r.user,
                &fmt(r.p_dbm),
                &r.metric,
                &fmt(r.value),
                &fmt(r.half_width),
            ]);
        }
        let bytes = w.into_inner().expect("flushing to memory cannot fail");
        String::from_utf8(bytes).expect("fields are UTF-8")
    }

    pub fn emit(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        Self::parse(text.as_bytes(), Path::new("<memory>"))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&bytes[..], path)
    }

    fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        let csv_err = |source| Error::Csv {
            path: path.to_owned(),
            source,
        };
        let mut r = csv::Reader::from_reader(bytes);
        let header = r.headers().map_err(csv_err)?;
        if header.iter().ne(HEADER) {
            return Err(Error::config(format!(
                "{}: unexpected header {:?}",
                path.display(),
                header.iter().collect::<Vec<_>>()
            )));
        }
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<ReportRow>, _>>()
            .map_err(csv_err)?;
        Ok(Self { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(
            MetricReport::default().to_csv(),
            "scenario,scheme,user,p_dbm,metric,value,half_width\n"
        );
    }

    #[test]
    fn round_trip() {
        let mut r = MetricReport::default();
        r.push(
            "s",
            "proposed",
            "c2-1",
            10.0,
            "ergodic-rate",
            0.1 + 0.2,
            1e-300,
        );
        r.push("s", "tdma", "all", -2.5, "jain", 1.0 / 3.0, 0.0);
        r.push("a,b", "tdma", "all", 4.0, "outage", 5e-324, 0.0);
        let text = r.to_csv();
        assert!(text.ends_with('\n'));
        assert!(text.contains("0.30000000000000004"));
        assert_eq!(MetricReport::from_csv(&text).unwrap(), r);
    }

    #[test]
    fn labels() {
        assert_eq!(user_label(0, 2), "c1-1");
        assert_eq!(user_label(2, 2), "c2-1");
        assert_eq!(user_label(0, 0), "c2-1");
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(MetricReport::from_csv("a,b\n1,2\n").is_err());
    }
}
