// SPDX-License-Identifier: MIT OR Apache-2.0

//! Minimal deterministic SVG plots. No timestamps or random ids; numbers are
//! printed with fixed precision so reruns are byte-identical.

use std::fmt::Write as _;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Half-width of a shaded band around `y`, in y units.
    pub band: Option<Vec<f64>>,
}

/// Line chart with y fixed to `[0, 1]`.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], config_hash: &str) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 180.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let x_max = series.iter().flat_map(|s| s.x.iter().copied()).fold(1.0_f64, f64::max);
    let sx = |x: f64| left + pw * x / x_max;
    let sy = |y: f64| top + ph * (1.0 - y.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, "<!-- config_hash={config_hash} -->");
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" font-size="14" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        esc(title)
    );
    for k in 0..=5 {
        let y = k as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{left:.1}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{y:.1}</text>"##,
            left + pw,
            left - 6.0,
            sy(y) + 3.0,
            py = sy(y)
        );
    }
    let ticks = (x_max as usize).clamp(1, 10);
    for k in 0..=ticks {
        let x = x_max * k as f64 / ticks as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{:.0}</text>"#,
            sx(x),
            top + ph + 14.0,
            x
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 12.0,
        esc(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        esc(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if let Some(band) = &ser.band {
            let upper =
                ser.x.iter().zip(&ser.y).zip(band).map(|((&x, &y), &b)| format!("{:.1},{:.1}", sx(x), sy(y + b)));
            let lower =
                ser.x.iter().zip(&ser.y).zip(band).rev().map(|((&x, &y), &b)| format!("{:.1},{:.1}", sx(x), sy(y - b)));
            let pts: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
                pts.join(" ")
            );
        }
        let pts: Vec<String> = ser.x.iter().zip(&ser.y).map(|(&x, &y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ =
            writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
        let ly = top + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
            w - right + 10.0,
            w - right + 26.0,
            w - right + 30.0,
            ly + 3.0,
            esc(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Square heatmap of values in `[0, 1]`, white at 0 and dark blue at 1.
pub fn heatmap(title: &str, labels: &[usize], values: &[f64], config_hash: &str) -> String {
    let n = labels.len();
    let cell = (360.0 / n.max(1) as f64).clamp(4.0, 40.0);
    let (left, top) = (50.0, 40.0);
    let side = cell * n as f64;
    let (w, h) = (left + side + 90.0, top + side + 40.0);
    let shade = |v: f64| {
        let v = v.clamp(0.0, 1.0);
        let lerp = |a: f64, b: f64| (a + (b - a) * v).round() as u8;
        format!("#{:02x}{:02x}{:02x}", lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0))
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(s, "<!-- config_hash={config_hash} -->");
    let _ = writeln!(s, r#"<rect width="{w:.0}" height="{h:.0}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" font-size="14" text-anchor="middle">{}</text>"#,
        left + side / 2.0,
        esc(title)
    );
    let step = n.div_ceil(12).max(1);
    for (i, l) in labels.iter().enumerate() {
        for j in 0..n {
            let v = values[i * n + j];
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{cell:.1}" height="{cell:.1}" fill="{}"><title>{} {} {:.4}</title></rect>"#,
                left + cell * j as f64,
                top + cell * i as f64,
                shade(v),
                l,
                labels[j],
                v
            );
        }
        if i % step == 0 {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="end">{l}</text>"#,
                left - 4.0,
                top + cell * (i as f64 + 0.5) + 3.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="middle">{l}</text>"#,
                left + cell * (i as f64 + 0.5),
                top + side + 12.0
            );
        }
    }
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let y = top + side - side * v;
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}" font-size="9">{v:.2}</text>"#,
            left + side + 16.0,
            y - 6.0,
            shade(v),
            left + side + 32.0,
            y + 3.0
        );
    }
    s.push_str("</svg>\n");
    s
}
