//! Static SVG 1.1 plots: airspace snapshots and Monte Carlo scatters.

use std::fmt::Write;

use crate::geometry::{sample_trajectory, GeometryConfig, Point};
use crate::nlp::Solution;
use crate::simkit::{BatchReport, VIOLATION_EPS};
use crate::traffic::Scenario;

const PX_PER_NM: f64 = 12.0;
const MARGIN_NM: f64 = 4.0;
const TRAJECTORY_STEP: f64 = 5.0;
const GREEN: &str = "#2e9e44";
const RED: &str = "#d62728";

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

/// Maps airspace coordinates (NM, y up) onto the canvas (px, y down).
struct Frame {
    half: f64,
}

impl Frame {
    fn size(&self) -> f64 {
        2.0 * self.half * PX_PER_NM
    }

    fn map(&self, p: Point) -> (f64, f64) {
        ((p.x + self.half) * PX_PER_NM, (self.half - p.y) * PX_PER_NM)
    }
}

/// Aircraft in the air at `t`, with their remaining paths, plus the
/// surroundings. Returns the document and whether `t` fell inside the
/// plan's time span; outside it the airspace is drawn empty.
pub fn snapshot(config: &GeometryConfig, scenario: &Scenario, solution: &Solution, t: f64) -> (String, bool) {
    let reach =
        config.gates.values().chain(std::iter::once(&config.faf)).map(|p| p.norm()).fold(config.tcp_radius, f64::max);
    let frame = Frame { half: reach + MARGIN_NM };
    let size = frame.size();
    let mut out = String::new();
    header(&mut out, size, size);

    let (cx, cy) = frame.map(Point::new(0.0, 0.0));
    let _ = writeln!(
        out,
        r##"<circle id="tcp-boundary" cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="none" stroke="#888" stroke-dasharray="6 4"/>"##,
        config.tcp_radius * PX_PER_NM
    );
    let (fx, fy) = frame.map(config.faf);
    let _ = writeln!(
        out,
        r##"<line id="final-approach" x1="{fx:.2}" y1="{fy:.2}" x2="{cx:.2}" y2="{cy:.2}" stroke="#444" stroke-width="2"/>"##
    );
    let _ = writeln!(
        out,
        r##"<rect id="runway-threshold" x="{:.2}" y="{:.2}" width="8" height="8" fill="#444"/>"##,
        cx - 4.0,
        cy - 4.0
    );
    let _ = writeln!(out, r##"<circle id="faf" cx="{fx:.2}" cy="{fy:.2}" r="5" fill="#1f77b4"/>"##);
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">FAF</text>"#, fx + 6.0, fy - 6.0);
    for (name, p) in &config.gates {
        let (gx, gy) = frame.map(*p);
        let name = escape(name);
        let _ = writeln!(
            out,
            r##"<polygon class="gate" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="#ff7f0e"/>"##,
            gx,
            gy - 7.0,
            gx - 6.0,
            gy + 5.0,
            gx + 6.0,
            gy + 5.0
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{name}</text>"#, gx + 8.0, gy + 4.0);
    }

    let in_span = t >= 0.0 && t <= solution.makespan();
    if in_span {
        // Airborne aircraft in landing order, with their current positions.
        let mut airborne: Vec<(usize, Point)> = Vec::new();
        for (rank, plan) in solution.plans.iter().enumerate() {
            let Some(arrival) = scenario.arrivals.get(plan.arrival_id) else { continue };
            if t < arrival.entry_time || t > plan.faf_time {
                continue;
            }
            let Ok(samples) = sample_trajectory(config, arrival.entry_point, plan.d, &plan.speeds, TRAJECTORY_STEP)
            else {
                continue;
            };
            let elapsed = t - arrival.entry_time;
            let here = crate::geometry::position_at_time(&plan.geometry, &plan.speeds, elapsed);
            let mut points = vec![here];
            points.extend(samples.iter().filter(|s| s.time > elapsed).map(|s| s.position));
            let path: Vec<String> = points
                .iter()
                .map(|p| {
                    let (x, y) = frame.map(*p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                out,
                r##"<polyline class="remaining-path" points="{}" fill="none" stroke="#9467bd" stroke-width="1.5"/>"##,
                path.join(" ")
            );
            airborne.push((rank, here));
        }
        for pair in airborne.windows(2) {
            let ((r0, p0), (r1, p1)) = (pair[0], pair[1]);
            if r1 != r0 + 1 {
                continue;
            }
            let violating = solution.slacks.get(r0).is_some_and(|&s| s > VIOLATION_EPS);
            let (colour, class) = if violating { (RED, "connector violating") } else { (GREEN, "connector separated") };
            let (x0, y0) = frame.map(p0);
            let (x1, y1) = frame.map(p1);
            let _ = writeln!(
                out,
                r#"<line class="{class}" x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="{colour}" stroke-width="1.5"/>"#
            );
        }
        for (rank, p) in &airborne {
            let (x, y) = frame.map(*p);
            let id = solution.plans[*rank].arrival_id;
            let _ = writeln!(
                out,
                r#"<circle class="aircraft" data-id="{id}" cx="{x:.2}" cy="{y:.2}" r="4" fill="black"/>"#
            );
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="10">{id}</text>"#, x + 5.0, y - 5.0);
        }
    }
    let _ = writeln!(out, r#"<text x="10" y="20">t = {t:.1} s</text>"#);
    out.push_str("</svg>\n");
    (out, in_span)
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn covering(values: impl Iterator<Item = f64>, floor: f64) -> Self {
        let hi = values.fold(floor, f64::max);
        Self { lo: 0.0, hi: nice_ceiling(hi) }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..=5).map(|k| self.lo + (self.hi - self.lo) * k as f64 / 5.0).collect()
    }
}

fn nice_ceiling(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let step = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if m * step >= v {
            return m * step;
        }
    }
    10.0 * step
}

const PLOT_W: f64 = 640.0;
const PANEL_H: f64 = 260.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 40.0;
const GAP: f64 = 70.0;

/// Violation share and total stretch against landing rate, one panel each,
/// with the runway capacity marked by a dashed vertical line.
pub fn scatter(report: &BatchReport) -> String {
    let runs: Vec<_> = report.runs.iter().filter(|r| r.metrics.n_aircraft >= 2).collect();
    let x_axis = Axis::covering(runs.iter().map(|r| r.metrics.faf_landing_rate), report.capacity_threshold * 1.1);
    let panels: [(&str, &str, Axis, Vec<f64>); 2] = [
        (
            "violations",
            "separation violations (%)",
            Axis { lo: 0.0, hi: 100.0 },
            runs.iter().map(|r| r.metrics.violation_pct).collect(),
        ),
        (
            "stretch",
            "total path stretch (NM)",
            Axis::covering(runs.iter().map(|r| r.metrics.total_stretch), 1.0),
            runs.iter().map(|r| r.metrics.total_stretch).collect(),
        ),
    ];

    let width = LEFT + PLOT_W + 30.0;
    let height = TOP + 2.0 * PANEL_H + GAP + 50.0;
    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(
        out,
        r#"<text x="{LEFT}" y="20" font-size="14">Monte Carlo batch: {} runs, master seed {}</text>"#,
        report.runs.len(),
        report.master_seed
    );

    for (i, (key, label, y_axis, ys)) in panels.iter().enumerate() {
        let top = TOP + i as f64 * (PANEL_H + GAP);
        let bottom = top + PANEL_H;
        let px = |x: f64| LEFT + x_axis.frac(x) * PLOT_W;
        let py = |y: f64| bottom - y_axis.frac(y) * PANEL_H;
        let _ = writeln!(out, r#"<g id="panel-{key}">"#);
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{top}" width="{PLOT_W}" height="{PANEL_H}" fill="none" stroke="#333"/>"##
        );
        for tick in x_axis.ticks() {
            let x = px(tick);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{:.2}" stroke="#333"/>"##,
                bottom + 5.0
            );
            let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{tick:.0}</text>"#, bottom + 18.0);
        }
        for tick in y_axis.ticks() {
            let y = py(tick);
            let _ =
                writeln!(out, r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#333"/>"##, LEFT - 5.0);
            let _ =
                writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{tick:.0}</text>"#, LEFT - 8.0, y + 4.0);
        }
        let _ = writeln!(
            out,
            r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{label}</text>"#,
            top + PANEL_H / 2.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">FAF landing rate (aircraft/hour)</text>"#,
            LEFT + PLOT_W / 2.0,
            bottom + 36.0
        );
        for (run, &y) in runs.iter().zip(ys) {
            let _ = writeln!(
                out,
                r##"<circle class="run" cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f77b4" fill-opacity="0.7"/>"##,
                px(run.metrics.faf_landing_rate),
                py(y)
            );
        }
        let cx = px(report.capacity_threshold);
        let _ = writeln!(
            out,
            r##"<line id="capacity-line-{key}" class="capacity-line" x1="{cx:.2}" y1="{top}" x2="{cx:.2}" y2="{bottom}" stroke="{RED}" stroke-width="1.5" stroke-dasharray="6 4" data-rate="{:.4}"/>"##,
            report.capacity_threshold
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" fill="{RED}">capacity {:.2}</text>"#,
            cx + 4.0,
            top + 14.0,
            report.capacity_threshold
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escaping() {
        assert_eq!(escape("a<b&c>\"'"), "a&lt;b&amp;c&gt;&quot;&apos;");
    }

    #[test]
    fn nice_ceilings() {
        assert_eq!(nice_ceiling(0.0), 1.0);
        assert_eq!(nice_ceiling(60.0), 100.0);
        assert_eq!(nice_ceiling(87.3), 100.0);
        assert_eq!(nice_ceiling(180.0), 200.0);
        assert_eq!(nice_ceiling(2.2), 2.5);
    }
}
