//! Tabular and SVG emitters for trajectories, occupancies and returns.
//!
//! The SVG panels are self-contained vector images: one draws x-y
//! trajectories of every buffer over the arena, the other a polar chart of
//! per-angle returns for one or more labelled series.

use crate::env::{Buffer, EnvSpec};
use std::fmt::Write;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Tab-separated trajectory records: `episode step x y`.
pub fn trajectory_table(buf: &Buffer) -> String {
    let mut out = String::from("episode\tstep\tx\ty\n");
    for (ep, episode) in buf.episodes().enumerate() {
        for tr in episode {
            let _ = writeln!(out, "{ep}\t{}\t{}\t{}", tr.t, tr.s[0], tr.s[1]);
        }
    }
    out
}

fn svg_header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    )
}

/// X-Y trajectory panel over the state box, one colour per buffer.
pub fn svg_trajectories(buffers: &[(&str, &Buffer)], spec: &EnvSpec) -> String {
    let (w, h) = (460.0, 460.0);
    let margin = 40.0;
    let lo = spec.state_bounds[0][0];
    let hi = spec.state_bounds[0][1];
    let scale = (w - 2.0 * margin) / (hi - lo);
    let px = |x: f64| margin + (x - lo) * scale;
    let py = |y: f64| h - margin - (y - lo) * scale;

    let mut s = svg_header(w, h);
    let _ = writeln!(
        s,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>",
        px(lo),
        py(hi),
        (hi - lo) * scale,
        (hi - lo) * scale
    );
    // origin cross
    let _ = writeln!(
        s,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>",
        px(lo),
        py(0.0),
        px(hi),
        py(0.0)
    );
    let _ = writeln!(
        s,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>",
        px(0.0),
        py(lo),
        px(0.0),
        py(hi)
    );

    for (bi, (label, buf)) in buffers.iter().enumerate() {
        let color = PALETTE[bi % PALETTE.len()];
        for episode in buf.episodes() {
            let mut points = String::new();
            if let Some(first) = episode.first() {
                let _ = write!(points, "{},{}", px(first.s[0]), py(first.s[1]));
            }
            for tr in episode {
                let _ = write!(points, " {},{}", px(tr.s2[0]), py(tr.s2[1]));
            }
            let _ = writeln!(
                s,
                "<polyline points=\"{points}\" fill=\"none\" stroke=\"{color}\" \
                 stroke-width=\"1\" stroke-opacity=\"0.7\"/>"
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{label}</text>",
            8.0,
            16.0 + 14.0 * bi as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Polar chart of per-angle returns for labelled series (angle in degrees,
/// 0 pointing up, counterclockwise).
pub fn svg_angle_returns(angles_deg: &[f64], series: &[(&str, &[f64])]) -> String {
    let (w, h) = (460.0, 460.0);
    let (cx, cy) = (w / 2.0, h / 2.0);
    let radius = 180.0;
    let max_val = series
        .iter()
        .flat_map(|(_, vals)| vals.iter())
        .fold(1e-9_f64, |acc, &v| acc.max(v.abs()));

    let point = |angle_deg: f64, value: f64| {
        let rad = angle_deg.to_radians();
        let r = radius * (value.max(0.0) / max_val);
        // 0 degrees points up, angles increase counterclockwise
        (cx - r * rad.sin(), cy - r * rad.cos())
    };

    let mut s = svg_header(w, h);
    for frac in [0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{}\" fill=\"none\" stroke=\"#eee\"/>",
            radius * frac
        );
    }
    for &a in angles_deg {
        let (x, y) = point(a, max_val);
        let _ = writeln!(s, "<line x1=\"{cx}\" y1=\"{cy}\" x2=\"{x}\" y2=\"{y}\" stroke=\"#eee\"/>");
        let (tx, ty) = point(a, max_val * 1.12);
        let _ = writeln!(
            s,
            "<text x=\"{tx}\" y=\"{ty}\" font-size=\"10\" text-anchor=\"middle\" fill=\"#666\">{a}&#176;</text>"
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{cx}\" y=\"{}\" font-size=\"9\" text-anchor=\"middle\" fill=\"#999\">scale max {max_val:.2}</text>",
        cy + radius + 32.0
    );

    for (si, (label, vals)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let mut points = String::new();
        for (a, v) in angles_deg.iter().zip(vals.iter()) {
            let (x, y) = point(*a, *v);
            let _ = write!(points, "{x},{y} ");
        }
        // close the loop
        if let (Some(a), Some(v)) = (angles_deg.first(), vals.first()) {
            let (x, y) = point(*a, *v);
            let _ = write!(points, "{x},{y}");
        }
        let _ = writeln!(
            s,
            "<polyline points=\"{points}\" fill=\"{color}\" fill-opacity=\"0.12\" \
             stroke=\"{color}\" stroke-width=\"1.5\"/>"
        );
        let _ = writeln!(
            s,
            "<text x=\"8\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{label}</text>",
            16.0 + 14.0 * si as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{rollout, RewardSpec};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trajectory_table_has_one_row_per_step() {
        let sp = EnvSpec { horizon: 4, ..EnvSpec::point_mass_2d() };
        let drift = |_s: &[f64], _rng: &mut ChaCha8Rng| vec![1.0, 0.0];
        let buf = rollout(&drift, &sp, RewardSpec::None, 2, 0, 0).unwrap();
        let table = trajectory_table(&buf);
        assert_eq!(table.lines().count(), 1 + 8);
        assert!(table.starts_with("episode\tstep\tx\ty"));
    }

    #[test]
    fn svg_panels_are_well_formed() {
        let sp = EnvSpec { horizon: 5, ..EnvSpec::point_mass_2d() };
        let drift = |_s: &[f64], _rng: &mut ChaCha8Rng| vec![0.3, 1.0];
        let buf = rollout(&drift, &sp, RewardSpec::None, 1, 0, 0).unwrap();
        let svg = svg_trajectories(&[("member 0", &buf)], &sp);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polyline"));

        let angles = [0.0, 60.0, 120.0, 180.0, 240.0, 300.0];
        let a = [30.0, 25.0, 28.0, 31.0, 27.0, 29.0];
        let b = [31.0, 14.0, -2.0, -25.0, 1.0, 18.0];
        let radar = svg_angle_returns(&angles, &[("ensemble", &a), ("supervised", &b)]);
        assert!(radar.starts_with("<svg") && radar.trim_end().ends_with("</svg>"));
        // negative returns are clamped to the centre rather than inverted
        assert!(radar.contains("circle"));
    }
}
