//! CSV exports and dependency-free SVG line plots.

use std::fmt::Write as _;
use std::path::Path;

use super::crossval::GridResult;
use super::metrics::EvalReport;
use super::spectra::ClassSpectra;
use crate::error::Result;

pub fn write_report_csv(path: &Path, rows: &[(String, EvalReport)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["model", "f1", "tpr", "tnr", "tnr_defined", "roc_area", "pr_area", "n_pos", "n_neg"])?;
    for (name, r) in rows {
        w.write_record([
            name.clone(),
            format!("{:.6}", r.f1),
            format!("{:.6}", r.tpr),
            format!("{:.6}", r.tnr),
            r.tnr_defined.to_string(),
            format!("{:.6}", r.roc_area),
            format!("{:.6}", r.pr_area),
            r.n_pos.to_string(),
            r.n_neg.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_csv(path: &Path, header: [&str; 2], points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for (x, y) in points {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectra_csv(path: &Path, s: &ClassSpectra) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["freq_hz", "x0_test", "x0_train", "x1_test", "x1_train"])?;
    for (i, f) in s.freq_axis.iter().enumerate() {
        w.write_record([f, &s.test[0][i], &s.train[0][i], &s.test[1][i], &s.train[1][i]].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_grid_csv(path: &Path, g: &GridResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["rank", "point", "mean_score", "n_params", "fold_scores", "best", "error"])?;
    for (rank, &i) in g.ranking().iter().enumerate() {
        let e = &g.entries[i];
        let folds: Vec<String> = e.fold_scores.iter().map(|s| format!("{s:.6}")).collect();
        w.write_record([
            (rank + 1).to_string(),
            e.point.to_string(),
            format!("{:.6}", e.mean_score),
            e.n_params.to_string(),
            folds.join(";"),
            (i == g.best).to_string(),
            e.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: &'a [(f64, f64)],
    pub dashed: bool,
}

pub struct Panel<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub series: Vec<Series<'a>>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 320.0;
const MARGIN: f64 = 56.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(series: &[Series<'_>]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        return (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    (x0, x1, y0, y1)
}

/// Vertically stacked panels with axes, tick labels and a legend.
pub fn svg_panels(panels: &[Panel<'_>]) -> String {
    let height = PANEL_H * panels.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (pi, p) in panels.iter().enumerate() {
        let top = pi as f64 * PANEL_H;
        let (x0, x1, y0, y1) = bounds(&p.series);
        let (left, right) = (MARGIN, PANEL_W - 16.0);
        let (upper, lower) = (top + 28.0, top + PANEL_H - 40.0);
        let sx = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
        let sy = |y: f64| lower - (y - y0) / (y1 - y0) * (lower - upper);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, PANEL_W / 2.0, top + 18.0, esc(p.title));
        let _ = writeln!(s, r#"<rect x="{left}" y="{upper}" width="{}" height="{}" fill="none" stroke="black"/>"#, right - left, lower - upper);
        for t in 0..=4 {
            let fx = x0 + (x1 - x0) * f64::from(t) / 4.0;
            let fy = y0 + (y1 - y0) * f64::from(t) / 4.0;
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, sx(fx), lower + 14.0, tick(fx));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 4.0, sy(fy) + 4.0, tick(fy));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (left + right) / 2.0, lower + 30.0, esc(p.x_label));
        let _ = writeln!(
            s,
            r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{1}</text>"#,
            (upper + lower) / 2.0,
            esc(p.y_label)
        );
        for (si, ser) in p.series.iter().enumerate() {
            let color = COLORS[si % COLORS.len()];
            let path: Vec<String> = ser
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let dash = if ser.dashed { r#" stroke-dasharray="5,3""# } else { "" };
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#, path.join(" "));
            let ly = upper + 14.0 + 14.0 * si as f64;
            let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#, right - 120.0, right - 100.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, right - 96.0, ly + 4.0, esc(ser.name));
        }
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Two panels (class 0 above class 1), each with test and train spectra.
pub fn spectra_svg(s: &ClassSpectra, title: &str) -> String {
    let pts = |v: &[f64]| -> Vec<(f64, f64)> { s.freq_axis.iter().copied().zip(v.iter().copied()).collect() };
    let data: Vec<[Vec<(f64, f64)>; 2]> = (0..2).map(|c| [pts(&s.test[c]), pts(&s.train[c])]).collect();
    let titles = [format!("{title}: class 0 (no event)"), format!("{title}: class 1 (event)")];
    let panels: Vec<Panel<'_>> = (0..2)
        .map(|c| Panel {
            title: &titles[c],
            x_label: "frequency (Hz)",
            y_label: "standardized magnitude",
            series: vec![
                Series { name: "test (top predictions)", points: &data[c][0], dashed: false },
                Series { name: "train (labels)", points: &data[c][1], dashed: true },
            ],
        })
        .collect();
    svg_panels(&panels)
}

pub fn curve_svg(title: &str, x_label: &str, y_label: &str, curves: &[(String, Vec<(f64, f64)>)]) -> String {
    svg_panels(&[Panel {
        title,
        x_label,
        y_label,
        series: curves.iter().map(|(n, p)| Series { name: n, points: p, dashed: false }).collect(),
    }])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_and_escaped() {
        let svg = curve_svg("ROC <cnn>", "fpr", "tpr", &[("a&b".into(), vec![(0.0, 0.0), (0.5, 0.9), (1.0, 1.0)])]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("ROC &lt;cnn&gt;") && svg.contains("a&amp;b"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        let empty = curve_svg("t", "x", "y", &[("flat".into(), vec![(1.0, 2.0)])]);
        assert!(!empty.contains("NaN"));
    }

    #[test]
    fn csv_exports() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        write_curve_csv(&p, ["fpr", "tpr"], &[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "fpr,tpr\n0,0\n1,1\n");
    }
}
