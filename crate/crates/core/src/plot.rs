//! Dependency-free SVG figures for visual inspection, each written next to a
//! CSV holding the plotted numbers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dataset::{Beat, BeatSet};
use crate::error::{Error, Result};
use crate::evaluation::{method3_best, EpochCurve};
use crate::metrics::{distance, DistanceKind};
use crate::templates::Template;

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;

/// Pixel coordinates of `values` inside a `w x h` box at `(x0, y0)`,
/// amplitude scaled to the box. A constant series sits on the middle line.
fn project(values: &[f64], x0: f64, y0: f64, w: f64, h: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let n = values.len();
    let span = hi - lo;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = x0 + if n > 1 { w * i as f64 / (n - 1) as f64 } else { w / 2.0 };
            let frac = if span > 0.0 { (v - lo) / span } else { 0.5 };
            (x, y0 + h * (1.0 - frac))
        })
        .collect()
}

fn points_attr(pts: &[(f64, f64)]) -> String {
    pts.iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn range(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(s: &mut String) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
}

/// One beat as a polyline, with `annotations` (label, value) printed below
/// the title, e.g. the distances of the beat to a template.
pub fn beat_svg(beat: &[f64], title: &str, annotations: &[(String, f64)]) -> String {
    let (lo, hi) = range(beat);
    let pts = project(beat, MARGIN, MARGIN, WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN, lo, hi);
    let mut s = String::new();
    header(&mut s);
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="black" stroke-width="1.5" points="{}"/>"#,
        points_attr(&pts)
    );
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="20" font-size="14">{}</text>"#, escape(title));
    for (i, (label, value)) in annotations.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12">{} = {value:.3}</text>"#,
            WIDTH - 180.0,
            MARGIN + 14.0 * i as f64,
            escape(label)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="4" y="{}" font-size="10">{lo:.2}</text><text x="4" y="{}" font-size="10">{hi:.2}</text>"#,
        HEIGHT - MARGIN,
        MARGIN
    );
    s.push_str("</svg>\n");
    s
}

/// `t,amplitude` header plus one row per sample.
pub fn beat_csv(beat: &[f64]) -> String {
    let mut s = String::from("t,amplitude\n");
    for (i, v) in beat.iter().enumerate() {
        let _ = writeln!(s, "{i},{v}");
    }
    s
}

/// Distances (top panel) and losses (bottom panel) against epoch.
pub fn curve_svg(curve: &EpochCurve) -> String {
    let epochs: Vec<f64> = curve.points.iter().map(|p| p.epoch as f64).collect();
    let series_top: [(&str, &str, Vec<f64>); 3] = [
        ("DTW", "#1f77b4", curve.points.iter().map(|p| p.s2_dtw).collect()),
        ("Frechet", "#ff7f0e", curve.points.iter().map(|p| p.s2_frechet).collect()),
        ("Euclidean", "#2ca02c", curve.points.iter().map(|p| p.s2_euclid).collect()),
    ];
    let series_bottom: [(&str, &str, Vec<f64>); 2] = [
        ("generator loss", "#d62728", curve.points.iter().map(|p| p.generator_loss).collect()),
        ("discriminator loss", "#9467bd", curve.points.iter().map(|p| p.discriminator_loss).collect()),
    ];
    let panel_h = (HEIGHT - 3.0 * MARGIN) / 2.0;
    let w = WIDTH - 2.0 * MARGIN;
    let mut s = String::new();
    header(&mut s);
    let (e_lo, e_hi) = range(&epochs);
    let panel = |series: &[(&str, &str, Vec<f64>)], y0: f64, s: &mut String| {
        let all: Vec<f64> = series.iter().flat_map(|(_, _, v)| v.iter().copied()).collect();
        let (lo, hi) = range(&all);
        for (k, (name, color, values)) in series.iter().enumerate() {
            let pts: Vec<(f64, f64)> = project(values, MARGIN, y0, w, panel_h, lo, hi)
                .into_iter()
                .zip(&epochs)
                .map(|((_, y), &e)| {
                    let x = if e_hi > e_lo { MARGIN + w * (e - e_lo) / (e_hi - e_lo) } else { MARGIN + w / 2.0 };
                    (x, y)
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                points_attr(&pts)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="11" fill="{color}">{name}</text>"#,
                WIDTH - 150.0,
                y0 + 12.0 * (k + 1) as f64
            );
        }
    };
    panel(&series_top, MARGIN, &mut s);
    panel(&series_bottom, 2.0 * MARGIN + panel_h, &mut s);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="20" font-size="14">similarity and loss per epoch</text>"#);
    s.push_str("</svg>\n");
    s
}

/// Writes `<stem>.svg` and `<stem>.csv` for one beat.
pub fn write_beat_figure(
    dir: impl AsRef<Path>,
    stem: &str,
    beat: &Beat,
    title: &str,
    annotations: &[(String, f64)],
) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let svg = dir.join(format!("{stem}.svg"));
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&svg, beat_svg(beat.as_slice(), title, annotations))?;
    fs::write(&csv, beat_csv(beat.as_slice()))?;
    Ok((svg, csv))
}

/// Writes `<stem>.svg` and `<stem>.csv` for an epoch curve.
pub fn write_curve_figure(dir: impl AsRef<Path>, stem: &str, curve: &EpochCurve) -> Result<(PathBuf, PathBuf)> {
    if curve.points.is_empty() {
        return Err(Error::EmptySet);
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let svg = dir.join(format!("{stem}.svg"));
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&svg, curve_svg(curve))?;
    curve.save(&csv)?;
    Ok((svg, csv))
}

/// Distances of `beat` to the template under all three metrics.
pub fn distance_annotations(beat: &Beat, template: &Template) -> Result<Vec<(String, f64)>> {
    DistanceKind::ALL
        .iter()
        .map(|&k| Ok((k.name().to_string(), distance(k, beat.as_slice(), template.beat.as_slice())?)))
        .collect()
}

/// For each metric, the generated beat closest to the template, annotated
/// with its distances under all three metrics. Returns the SVG paths.
pub fn best_beat_figures(gen: &BeatSet, template: &Template, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for kind in DistanceKind::ALL {
        let (beat, report) = method3_best(gen, template, kind)?;
        let title = format!(
            "minimum {} (beat {})",
            kind.name(),
            report.best_index.unwrap_or_default()
        );
        let ann = distance_annotations(&beat, template)?;
        let (svg, _) = write_beat_figure(&dir, &format!("best_{}", kind.name()), &beat, &title, &ann)?;
        out.push(svg);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::CurvePoint;

    fn polyline_points(svg: &str) -> Vec<(f64, f64)> {
        let start = svg.find("points=\"").unwrap() + 8;
        let end = start + svg[start..].find('"').unwrap();
        svg[start..end]
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect()
    }

    #[test]
    fn constant_beat_is_horizontal() {
        let svg = beat_svg(&[0.3; 16], "flat", &[]);
        let pts = polyline_points(&svg);
        assert_eq!(pts.len(), 16);
        assert!(pts.iter().all(|p| p.1 == pts[0].1));
        assert!(svg.contains(r#"viewBox="0 0 640 320""#));
    }

    #[test]
    fn golden_small_beat() {
        let svg = beat_svg(&[0.0, 1.0, 0.5], "t", &[("dtw".into(), 1.25)]);
        assert_eq!(
            polyline_points(&svg),
            vec![(40.0, 280.0), (320.0, 40.0), (600.0, 160.0)]
        );
        assert!(svg.contains("dtw = 1.250"));
    }

    #[test]
    fn csv_rows_match_length() {
        let csv = beat_csv(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(csv.lines().count() - 1, 4);
    }

    #[test]
    fn curve_has_five_series() {
        let curve = EpochCurve {
            points: (1..=3)
                .map(|e| CurvePoint {
                    epoch: e,
                    s2_dtw: e as f64,
                    s2_frechet: 1.0,
                    s2_euclid: 2.0,
                    generator_loss: 0.7,
                    discriminator_loss: 1.3,
                })
                .collect(),
        };
        assert_eq!(curve_svg(&curve).matches("<polyline").count(), 5);
    }
}
