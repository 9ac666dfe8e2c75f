//! Overhead SVG rendering of trajectory logs.

use std::fmt::Write;

use socnav::geometry::{Rect, Vec2};
use socnav::log::TrajectoryLog;

/// Pixels per metre.
pub const SCALE: f64 = 50.0;
/// Blank border around the world bounds, pixels.
pub const MARGIN: f64 = 20.0;

const ROBOT_STYLES: [(&str, &str); 4] = [("#d62728", "none"), ("#1f77b4", "6 3"), ("#2ca02c", "2 2"), ("#9467bd", "8 2 2 2")];

/// Maps world metres to SVG pixels with y pointing up.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    bounds: Rect,
}

impl Frame {
    pub fn new(bounds: Rect) -> Self {
        Self { bounds }
    }

    pub fn px(&self, p: Vec2) -> (f64, f64) {
        (MARGIN + (p.x - self.bounds.min.x) * SCALE, MARGIN + (self.bounds.max.y - p.y) * SCALE)
    }

    pub fn size(&self) -> (f64, f64) {
        (
            2.0 * MARGIN + (self.bounds.max.x - self.bounds.min.x) * SCALE,
            2.0 * MARGIN + (self.bounds.max.y - self.bounds.min.y) * SCALE,
        )
    }
}

fn union(logs: &[TrajectoryLog]) -> Rect {
    let mut b = logs[0].meta.bounds;
    for log in &logs[1..] {
        let o = log.meta.bounds;
        b.min = Vec2::new(b.min.x.min(o.min.x), b.min.y.min(o.min.y));
        b.max = Vec2::new(b.max.x.max(o.max.x), b.max.y.max(o.max.y));
    }
    b
}

fn points(frame: &Frame, pts: impl Iterator<Item = Vec2>) -> String {
    pts.map(|p| {
        let (x, y) = frame.px(p);
        format!("{x:.2},{y:.2}")
    })
    .collect::<Vec<_>>()
    .join(" ")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders one or more logs on shared axes. Static geometry comes from the
/// first log; each log adds its own robot, people and directive markers.
pub fn render(logs: &[TrajectoryLog]) -> String {
    assert!(!logs.is_empty(), "render needs at least one log");
    let frame = Frame::new(union(logs));
    let (w, h) = frame.size();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let meta = &logs[0].meta;
    let (x0, y0) = frame.px(Vec2::new(meta.bounds.min.x, meta.bounds.max.y));
    let bw = (meta.bounds.max.x - meta.bounds.min.x) * SCALE;
    let bh = (meta.bounds.max.y - meta.bounds.min.y) * SCALE;
    let _ = writeln!(
        out,
        r##"<rect class="bounds" x="{x0:.2}" y="{y0:.2}" width="{bw:.2}" height="{bh:.2}" fill="#fafafa" stroke="#cccccc"/>"##
    );
    for s in &meta.segments {
        let (ax, ay) = frame.px(s.a);
        let (bx, by) = frame.px(s.b);
        let _ = writeln!(
            out,
            r#"<line class="wall" x1="{ax:.2}" y1="{ay:.2}" x2="{bx:.2}" y2="{by:.2}" stroke="black" stroke-width="3"/>"#
        );
    }
    for d in &meta.doorways {
        let (cx, cy) = frame.px(d.center);
        let r = d.width / 2.0 * SCALE;
        let _ = writeln!(
            out,
            r##"<circle class="door" cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="none" stroke="#8c564b" stroke-dasharray="3 3"/>"##
        );
    }
    let (gx, gy) = frame.px(meta.goal);
    let _ = writeln!(
        out,
        r#"<circle class="goal" cx="{gx:.2}" cy="{gy:.2}" r="6" fill="gold" stroke="black"/>"#
    );

    for (i, log) in logs.iter().enumerate() {
        let (colour, dash) = ROBOT_STYLES[i % ROBOT_STYLES.len()];
        for track in &log.meta.humans {
            if track.points.is_empty() {
                continue;
            }
            let pts = points(&frame, track.points.iter().map(|p| p.position()));
            let _ = writeln!(
                out,
                r##"<polyline class="human log-{i}" points="{pts}" fill="none" stroke="#7f7f7f" stroke-dasharray="{dash}"/>"##
            );
        }
        if log.steps.is_empty() {
            continue;
        }
        let pts = points(&frame, log.steps.iter().map(|s| Vec2::new(s.x, s.y)));
        let _ = writeln!(
            out,
            r#"<polyline class="robot log-{i}" points="{pts}" fill="none" stroke="{colour}" stroke-width="2" stroke-dasharray="{dash}"/>"#
        );
        let mut last: Option<&str> = None;
        for s in &log.steps {
            let current = s.directive.as_deref();
            if current.is_some() && current != last {
                let (x, y) = frame.px(Vec2::new(s.x, s.y));
                let _ = writeln!(
                    out,
                    r#"<circle class="directive log-{i}" cx="{x:.2}" cy="{y:.2}" r="4" fill="{colour}"><title>t={:.1} {}</title></circle>"#,
                    s.t,
                    escape(current.unwrap_or_default())
                );
            }
            last = current;
        }
    }
    out.push_str("</svg>\n");
    out
}
