//! SVG line chart of micro F1 against noise bin.

use std::fmt::Write;

use kpi_anomaly::evaluation::{EvaluationReport, NoiseBin};

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// One polyline per classifier family across the binned noise levels
/// present in the report.
pub fn render(report: &EvaluationReport) -> String {
    let bins: Vec<NoiseBin> = NoiseBin::BINNED.iter().copied().filter(|b| report.bin(*b).is_some()).collect();
    let mut families = Vec::new();
    for b in &report.bins {
        for c in &b.classifiers {
            if !families.contains(&c.family) {
                families.push(c.family);
            }
        }
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let x = |i: usize| {
        if bins.len() <= 1 {
            LEFT + pw / 2.0
        } else {
            LEFT + pw * i as f64 / (bins.len() - 1) as f64
        }
    };
    let y = |v: f64| TOP + ph * (1.0 - v.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" x2="{:.1}" y1="{yv:.1}" y2="{yv:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y(v) + 4.0,
            yv = y(v)
        );
    }
    for (i, b) in bins.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{b}</text>"#, x(i), TOP + ph + 20.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">noise bin</text>"#, LEFT + pw / 2.0, H - 8.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">micro F1</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (fi, fam) in families.iter().enumerate() {
        let color = COLORS[fi % COLORS.len()];
        let pts: Vec<(f64, f64)> = bins
            .iter()
            .enumerate()
            .filter_map(|(i, b)| report.classifier(*b, *fam).map(|c| (x(i), y(c.micro_f1))))
            .collect();
        let path: Vec<String> = pts.iter().map(|(a, b)| format!("{a:.1},{b:.1}")).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" "));
        for (a, b) in &pts {
            let _ = writeln!(s, r#"<circle cx="{a:.1}" cy="{b:.1}" r="3.5" fill="{color}"/>"#);
        }
        let ly = TOP + 16.0 * fi as f64 + 8.0;
        let lx = W - RIGHT + 16.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" x2="{:.1}" y1="{ly:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            fam.as_str()
        );
    }
    s.push_str("</svg>\n");
    s
}
