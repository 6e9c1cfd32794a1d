//! Downstream-metric tables.
//!
//! A comma-separated file with the header
//! `run_id,step,layer,task,metric_value,orientation`, one measurement per row.
//! `orientation` is `higher` (accuracy-like) or `lower` (error-rate-like).

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;

pub const METRICS_HEADER: [&str; 6] = ["run_id", "step", "layer", "task", "metric_value", "orientation"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "higher")]
    HigherIsBetter,
    #[serde(rename = "lower")]
    LowerIsBetter,
}

impl Orientation {
    pub fn token(self) -> &'static str {
        match self {
            Orientation::HigherIsBetter => "higher",
            Orientation::LowerIsBetter => "lower",
        }
    }
}

impl std::str::FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "higher" => Ok(Orientation::HigherIsBetter),
            "lower" => Ok(Orientation::LowerIsBetter),
            other => Err(other.to_string()),
        }
    }
}

/// One downstream measurement for a (run, checkpoint, layer, task).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamRecord {
    pub run_id: String,
    pub step: u64,
    pub layer: u32,
    pub task: String,
    pub metric_value: f64,
    pub orientation: Orientation,
}

impl DownstreamRecord {
    pub fn key(&self) -> (&str, u64, u32, &str) {
        (&self.run_id, self.step, self.layer, &self.task)
    }
}

fn field(rec: &csv::StringRecord, i: usize, line: u64) -> Result<&str, IngestError> {
    rec.get(i).ok_or_else(|| IngestError::Metrics {
        line,
        reason: format!("missing column '{}'", METRICS_HEADER[i]),
    })
}

/// Parses a metrics table. Line numbers in errors are 1-based and count the
/// header as line 1.
pub fn read_metrics<R: Read>(source: R) -> Result<Vec<DownstreamRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| IngestError::Metrics {
        line: 1,
        reason: e.to_string(),
    })?;
    if headers.iter().ne(METRICS_HEADER.iter().copied()) {
        return Err(IngestError::Metrics {
            line: 1,
            reason: format!(
                "header must be '{}', found '{}'",
                METRICS_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut out = Vec::new();
    let mut seen: HashMap<(String, u64, u32, String), u64> = HashMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| IngestError::Metrics {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let run_id = field(&rec, 0, line)?.to_string();
        let parse_int = |i: usize| -> Result<u64, IngestError> {
            let raw = field(&rec, i, line)?;
            raw.parse().map_err(|_| IngestError::Metrics {
                line,
                reason: format!("{} '{raw}' is not a nonnegative integer", METRICS_HEADER[i]),
            })
        };
        let step = parse_int(1)?;
        let layer = u32::try_from(parse_int(2)?).map_err(|_| IngestError::Metrics {
            line,
            reason: "layer out of range".into(),
        })?;
        let task = field(&rec, 3, line)?.to_string();
        let raw_metric = field(&rec, 4, line)?;
        let metric_value: f64 = raw_metric.parse().map_err(|_| IngestError::NonNumericMetric {
            line,
            value: raw_metric.to_string(),
        })?;
        if !metric_value.is_finite() {
            return Err(IngestError::NonNumericMetric {
                line,
                value: raw_metric.to_string(),
            });
        }
        let raw_orientation = field(&rec, 5, line)?;
        let orientation = raw_orientation
            .parse::<Orientation>()
            .map_err(|token| IngestError::UnknownOrientation { line, token })?;
        if run_id.is_empty() || task.is_empty() {
            return Err(IngestError::Metrics {
                line,
                reason: "run_id and task must be nonempty".into(),
            });
        }

        let key = (run_id.clone(), step, layer, task.clone());
        if let Some(&first_line) = seen.get(&key) {
            return Err(IngestError::DuplicateKey {
                key: format!("{run_id},{step},{layer},{task}"),
                first_line,
                line,
            });
        }
        seen.insert(key, line);
        out.push(DownstreamRecord {
            run_id,
            step,
            layer,
            task,
            metric_value,
            orientation,
        });
    }
    Ok(out)
}

pub fn read_metrics_file(path: impl AsRef<Path>) -> Result<Vec<DownstreamRecord>, IngestError> {
    let file = File::open(path.as_ref()).map_err(|e| IngestError::io_at(path.as_ref(), e))?;
    read_metrics(file)
}

/// Writes records in the table format [`read_metrics`] accepts.
pub fn write_metrics<W: Write>(records: &[DownstreamRecord], out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| IngestError::Metrics {
        line: 0,
        reason: e.to_string(),
    };
    w.write_record(METRICS_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.run_id.as_str(),
            &r.step.to_string(),
            &r.layer.to_string(),
            &r.task,
            &r.metric_value.to_string(),
            r.orientation.token(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "run_id,step,layer,task,metric_value,orientation\n";

    fn parse(body: &str) -> Result<Vec<DownstreamRecord>, IngestError> {
        read_metrics(format!("{HEADER}{body}").as_bytes())
    }

    #[test]
    fn single_lower_row() {
        let r = parse("r1,20000,6,PR,0.12,lower\n").unwrap();
        assert_eq!(
            r,
            vec![DownstreamRecord {
                run_id: "r1".into(),
                step: 20000,
                layer: 6,
                task: "PR".into(),
                metric_value: 0.12,
                orientation: Orientation::LowerIsBetter,
            }]
        );
    }

    #[test]
    fn duplicate_lists_both_lines() {
        let err = parse("r1,20000,6,PR,0.12,lower\nr1,20000,3,PR,0.2,lower\nr1,20000,6,PR,0.13,lower\n")
            .unwrap_err();
        assert!(matches!(
            err,
            IngestError::DuplicateKey {
                first_line: 2,
                line: 4,
                ..
            }
        ));
        let msg = err.to_string();
        assert!(msg.contains("lines 2 and 4"), "{msg}");
    }

    #[test]
    fn unknown_orientation() {
        let err = parse("r1,1,0,KS,0.9,up\n").unwrap_err();
        assert!(matches!(err, IngestError::UnknownOrientation { line: 2, ref token } if token == "up"));
    }

    #[test]
    fn non_numeric_metric() {
        let err = parse("r1,1,0,KS,abc,higher\n").unwrap_err();
        assert!(matches!(err, IngestError::NonNumericMetric { line: 2, .. }));
        assert!(matches!(
            parse("r1,1,0,KS,NaN,higher\n"),
            Err(IngestError::NonNumericMetric { .. })
        ));
    }

    #[test]
    fn wrong_header() {
        let err = read_metrics("run,step,layer,task,value,orientation\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::Metrics { line: 1, .. }));
    }

    #[test]
    fn full_sweep_fixture_count() {
        let mut body = String::new();
        for task in ["PR", "TIMIT", "KS", "SID"] {
            for layer in [0, 3, 6, 9] {
                for k in 1..=15u64 {
                    let o = if task == "PR" { "lower" } else { "higher" };
                    body.push_str(&format!("r1,{},{layer},{task},0.5,{o}\n", k * 20000));
                }
            }
        }
        assert_eq!(parse(&body).unwrap().len(), 240);
    }

    #[test]
    fn write_then_read() {
        let recs = parse("a,1,0,PR,0.25,lower\nb,2,3,SID,0.75,higher\n").unwrap();
        let mut buf = Vec::new();
        write_metrics(&recs, &mut buf).unwrap();
        assert_eq!(read_metrics(&buf[..]).unwrap(), recs);
    }
}
