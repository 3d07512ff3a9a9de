use std::path::Path;

use super::LabelTrack;
use crate::error::{Error, Result};

/// One row group of a label file.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelEntry {
    /// `recording_id,rate_hz,labels` with a compact `0`/`1` string.
    Track(LabelTrack),
    /// `recording_id,start_s,end_s` rows, each a label-1 span.
    Intervals { recording_id: String, spans: Vec<(f64, f64)> },
}

impl LabelEntry {
    pub fn recording_id(&self) -> &str {
        match self {
            LabelEntry::Track(t) => &t.recording_id,
            LabelEntry::Intervals { recording_id, .. } => recording_id,
        }
    }
}

/// Parse either label CSV flavour, chosen by header. Interval rows are
/// grouped per recording in first-appearance order.
pub fn read_label_csv(path: &Path) -> Result<Vec<LabelEntry>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("{}: missing column `{name}`", path.display())))
    };
    let mut out = Vec::new();
    if headers.iter().any(|h| h == "labels") {
        let (id_c, rate_c, lab_c) = (col("recording_id")?, col("rate_hz")?, col("labels")?);
        for row in reader.records() {
            let row = row?;
            let rate: f64 = row[rate_c]
                .parse()
                .map_err(|_| Error::Format(format!("bad rate `{}`", &row[rate_c])))?;
            let labels = row[lab_c]
                .bytes()
                .map(|b| match b {
                    b'0' => Ok(0u8),
                    b'1' => Ok(1u8),
                    other => Err(Error::Format(format!("bad label character `{}`", other as char))),
                })
                .collect::<Result<Vec<u8>>>()?;
            out.push(LabelEntry::Track(LabelTrack::new(&row[id_c], labels, rate)?));
        }
    } else {
        let (id_c, s_c, e_c) = (col("recording_id")?, col("start_s")?, col("end_s")?);
        for row in reader.records() {
            let row = row?;
            let parse = |c: usize| {
                row[c]
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad time `{}`", &row[c])))
            };
            let span = (parse(s_c)?, parse(e_c)?);
            let id = &row[id_c];
            match out.iter_mut().find(|e: &&mut LabelEntry| e.recording_id() == id) {
                Some(LabelEntry::Intervals { spans, .. }) => spans.push(span),
                _ => out.push(LabelEntry::Intervals { recording_id: id.to_string(), spans: vec![span] }),
            }
        }
    }
    Ok(out)
}

pub fn write_label_csv(path: &Path, tracks: &[LabelTrack]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["recording_id", "rate_hz", "labels"])?;
    for t in tracks {
        let s: String = t.labels.iter().map(|&l| if l == 1 { '1' } else { '0' }).collect();
        w.write_record([t.recording_id.as_str(), &t.rate.to_string(), &s])?;
    }
    w.flush()?;
    Ok(())
}

/// Rasterize label-1 spans at `rate`: tick `i` is 1 when its midpoint lies in a span.
pub fn intervals_to_track(id: &str, spans: &[(f64, f64)], duration_s: f64, rate: f64) -> Result<LabelTrack> {
    let n = (duration_s * rate).round().max(1.0) as usize;
    let labels = (0..n)
        .map(|i| {
            let mid = (i as f64 + 0.5) / rate;
            u8::from(spans.iter().any(|&(s, e)| mid >= s && mid < e))
        })
        .collect();
    LabelTrack::new(id, labels, rate)
}
