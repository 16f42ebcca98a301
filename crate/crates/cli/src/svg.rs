//! Minimal log-scale line chart drawn from CSV rows.
//!
//! The x axis is `d` when every plotted row shares one power and the delays
//! vary, otherwise `power_db`. Rows with `d = 0` do not depend on the delay
//! and are drawn flat across the delay axis.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::table::{read_csv, Row};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Power,
    Delay,
}

fn pick_axis(rows: &[Row]) -> Axis {
    let mut powers: Vec<f64> = rows.iter().map(|r| r.power_db).collect();
    powers.sort_by(f64::total_cmp);
    powers.dedup();
    let mut delays: Vec<usize> = rows.iter().filter(|r| r.d > 0).map(|r| r.d).collect();
    delays.sort_unstable();
    delays.dedup();
    if powers.len() == 1 && delays.len() > 1 {
        Axis::Delay
    } else {
        Axis::Power
    }
}

fn usable(r: &Row) -> bool {
    r.mse.is_finite() && r.mse > 0.0 && r.power_db.is_finite()
}

/// Series name and points, in first-appearance order.
fn series(rows: &[Row], axis: Axis) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut order: Vec<String> = Vec::new();
    let mut map: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let (lo, hi) = match axis {
        Axis::Delay => {
            let ds = rows.iter().filter(|r| r.d > 0).map(|r| r.d as f64);
            (ds.clone().fold(f64::INFINITY, f64::min), ds.fold(f64::NEG_INFINITY, f64::max))
        }
        Axis::Power => (0.0, 0.0),
    };
    for r in rows.iter().filter(|r| usable(r)) {
        let name = match axis {
            Axis::Delay => r.strategy.clone(),
            Axis::Power if r.d == 0 => r.strategy.clone(),
            Axis::Power => format!("{} d={}", r.strategy, r.d),
        };
        if !map.contains_key(&name) {
            order.push(name.clone());
        }
        let pts = map.entry(name).or_default();
        match axis {
            Axis::Power => pts.push((r.power_db, r.mse)),
            Axis::Delay if r.d == 0 => {
                pts.push((lo, r.mse));
                pts.push((hi, r.mse));
            }
            Axis::Delay => pts.push((r.d as f64, r.mse)),
        }
    }
    order
        .into_iter()
        .map(|name| {
            let mut pts = map.remove(&name).unwrap_or_default();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            (name, pts)
        })
        .collect()
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-9);
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 { 0.0 } else { t });
        t += step;
    }
    out
}

/// Renders CSV text; equal input gives byte-identical output.
pub fn render_csv(text: &str) -> csv::Result<String> {
    Ok(render(&read_csv(text)?))
}

pub fn render(rows: &[Row]) -> String {
    let axis = pick_axis(rows);
    let lines = series(rows, axis);
    let pts = lines.iter().flat_map(|(_, p)| p.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, -1.0, 0.0);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y.log10()) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ =
        writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for t in nice_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 16.0,
            t
        );
    }
    for k in (y0 as i32)..=(y1 as i32) {
        let y = TOP + (y1 - k as f64) / (y1 - y0) * ph;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{k}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let xlabel = match axis {
        Axis::Power => "power (dB)",
        Axis::Delay => "delay d",
    };
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">MSE</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (i, (name, p)) in lines.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        for &(x, y) in p {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
