//! Small deterministic SVG renderers for the analysis tables.
//!
//! Every renderer is a pure function of its input: coordinates are
//! formatted with fixed precision and no timestamps or random ids are
//! embedded, so the same table always produces the same bytes. An
//! empty table renders the frame and axes with no marks.

use std::fmt::Write as _;

use lob_core::analysis::{EpisodeRow, EventKind, Kde};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const M_LEFT: f64 = 62.0;
const M_RIGHT: f64 = 20.0;
const M_TOP: f64 = 30.0;
const M_BOTTOM: f64 = 50.0;

const COLOR_GRAB: &str = "#2a7de1";
const COLOR_PUNCH: &str = "#e17c2a";
const COLOR_LINE: &str = "#2a7de1";
const COLOR_AXIS: &str = "#333333";
const COLOR_GRID: &str = "#dddddd";

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Tick label: trims to at most four significant decimals so axis text
/// stays compact for both step counts and metre-scale ranges.
fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// A fixed-size plot frame with linear data-to-pixel mapping.
struct Canvas {
    svg: String,
    x_lo: f64,
    x_span: f64,
    y_lo: f64,
    y_span: f64,
}

impl Canvas {
    fn new(title: &str, x_label: &str, y_label: &str, x_range: (f64, f64), y_range: (f64, f64)) -> Canvas {
        let (x_lo, x_hi) = x_range;
        let (y_lo, y_hi) = y_range;
        let x_span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
        let y_span = if y_hi > y_lo { y_hi - y_lo } else { 1.0 };
        let mut c = Canvas {
            svg: String::with_capacity(8 * 1024),
            x_lo,
            x_span,
            y_lo,
            y_span,
        };
        let w = fmt(WIDTH);
        let h = fmt(HEIGHT);
        let _ = write!(
            c.svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
             viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n\
             <rect width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>\n\
             <text x=\"{}\" y=\"19\" text-anchor=\"middle\" font-size=\"14\" fill=\"{COLOR_AXIS}\">{title}</text>\n",
            fmt(WIDTH / 2.0),
        );
        // Gridlines and ticks at five even divisions per axis.
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let px = M_LEFT + f * (WIDTH - M_LEFT - M_RIGHT);
            let py = HEIGHT - M_BOTTOM - f * (HEIGHT - M_TOP - M_BOTTOM);
            let xv = x_lo + f * x_span;
            let yv = y_lo + f * y_span;
            let _ = write!(
                c.svg,
                "<line x1=\"{px0}\" y1=\"{pt}\" x2=\"{px0}\" y2=\"{pb}\" stroke=\"{COLOR_GRID}\"/>\n\
                 <line x1=\"{pl}\" y1=\"{py0}\" x2=\"{pr}\" y2=\"{py0}\" stroke=\"{COLOR_GRID}\"/>\n\
                 <text x=\"{px0}\" y=\"{tx}\" text-anchor=\"middle\" font-size=\"11\" fill=\"{COLOR_AXIS}\">{xl}</text>\n\
                 <text x=\"{ty}\" y=\"{pyl}\" text-anchor=\"end\" font-size=\"11\" fill=\"{COLOR_AXIS}\">{yl}</text>\n",
                px0 = fmt(px),
                pt = fmt(M_TOP),
                pb = fmt(HEIGHT - M_BOTTOM),
                pl = fmt(M_LEFT),
                pr = fmt(WIDTH - M_RIGHT),
                py0 = fmt(py),
                tx = fmt(HEIGHT - M_BOTTOM + 16.0),
                ty = fmt(M_LEFT - 6.0),
                pyl = fmt(py + 4.0),
                xl = fmt_tick(xv),
                yl = fmt_tick(yv),
            );
        }
        // Axis lines and labels on top of the grid.
        let _ = write!(
            c.svg,
            "<line x1=\"{pl}\" y1=\"{pb}\" x2=\"{pr}\" y2=\"{pb}\" stroke=\"{COLOR_AXIS}\" stroke-width=\"1.5\"/>\n\
             <line x1=\"{pl}\" y1=\"{pt}\" x2=\"{pl}\" y2=\"{pb}\" stroke=\"{COLOR_AXIS}\" stroke-width=\"1.5\"/>\n\
             <text x=\"{cx}\" y=\"{bx}\" text-anchor=\"middle\" font-size=\"12\" fill=\"{COLOR_AXIS}\">{x_label}</text>\n\
             <text x=\"16\" y=\"{cy}\" text-anchor=\"middle\" font-size=\"12\" fill=\"{COLOR_AXIS}\" \
             transform=\"rotate(-90 16 {cy})\">{y_label}</text>\n",
            pl = fmt(M_LEFT),
            pr = fmt(WIDTH - M_RIGHT),
            pt = fmt(M_TOP),
            pb = fmt(HEIGHT - M_BOTTOM),
            cx = fmt(M_LEFT + (WIDTH - M_LEFT - M_RIGHT) / 2.0),
            bx = fmt(HEIGHT - 12.0),
            cy = fmt(M_TOP + (HEIGHT - M_TOP - M_BOTTOM) / 2.0),
        );
        c
    }

    fn map_x(&self, x: f64) -> f64 {
        M_LEFT + (x - self.x_lo) / self.x_span * (WIDTH - M_LEFT - M_RIGHT)
    }

    fn map_y(&self, y: f64) -> f64 {
        HEIGHT - M_BOTTOM - (y - self.y_lo) / self.y_span * (HEIGHT - M_TOP - M_BOTTOM)
    }

    fn circle(&mut self, x: f64, y: f64, fill: &str) {
        let _ = write!(
            self.svg,
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{fill}\" fill-opacity=\"0.7\"/>\n",
            fmt(self.map_x(x)),
            fmt(self.map_y(y)),
        );
    }

    fn polyline(&mut self, points: impl Iterator<Item = (f64, f64)>, stroke: &str) {
        let mut attr = String::new();
        for (x, y) in points {
            if !attr.is_empty() {
                attr.push(' ');
            }
            let _ = write!(attr, "{},{}", fmt(self.map_x(x)), fmt(self.map_y(y)));
        }
        if attr.is_empty() {
            return;
        }
        let _ = write!(
            self.svg,
            "<polyline points=\"{attr}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.8\"/>\n",
        );
    }

    fn legend(&mut self, entries: &[(&str, &str)]) {
        let mut y = M_TOP + 14.0;
        for (label, color) in entries {
            let _ = write!(
                self.svg,
                "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{color}\"/>\n\
                 <text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{COLOR_AXIS}\">{label}</text>\n",
                fmt(WIDTH - M_RIGHT - 110.0),
                fmt(y),
                fmt(WIDTH - M_RIGHT - 100.0),
                fmt(y + 4.0),
            );
            y += 16.0;
        }
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

/// Episode reward against the initial box-to-target distance, one mark
/// per episode that produced at least one contact event, colored by the
/// kind of the last event.
pub fn scatter_reward_vs_distance(rows: &[EpisodeRow]) -> String {
    let x_hi = rows
        .iter()
        .map(|r| r.target_distance)
        .fold(0.8_f64, f64::max)
        .ceil_decimal();
    let mut c = Canvas::new(
        "Episode reward vs target distance",
        "initial box-target distance (m)",
        "cumulative reward",
        (0.0, x_hi),
        (-60.0, 0.0),
    );
    c.legend(&[("grab", COLOR_GRAB), ("punch", COLOR_PUNCH)]);
    for row in rows {
        let color = match row.last_event_kind {
            Some(EventKind::Grab) => COLOR_GRAB,
            Some(EventKind::Punch) => COLOR_PUNCH,
            None => continue,
        };
        c.circle(row.target_distance, row.cumulative_reward, color);
    }
    c.finish()
}

/// Attempts per episode against the steps left on the clock when the
/// episode first scored. Unsuccessful episodes sit on the zero line.
pub fn scatter_attempts_vs_steps_remaining(rows: &[EpisodeRow]) -> String {
    let y_hi = rows.iter().map(|r| r.attempts).max().unwrap_or(0).max(4) as f64;
    let mut c = Canvas::new(
        "Attempts vs steps remaining at success",
        "steps remaining",
        "attempts",
        (0.0, 60.0),
        (0.0, y_hi),
    );
    for row in rows {
        c.circle(row.steps_remaining as f64, row.attempts as f64, COLOR_LINE);
    }
    c.finish()
}

/// The success-position density along x as a single line.
pub fn density_line(kde: &Kde) -> String {
    let (x_range, y_hi) = if kde.grid.is_empty() {
        ((0.0, 1.0), 1.0)
    } else {
        let lo = kde.grid[0];
        let hi = kde.grid[kde.grid.len() - 1];
        let peak = kde.density.iter().cloned().fold(0.0_f64, f64::max);
        ((lo, hi), if peak > 0.0 { peak * 1.05 } else { 1.0 })
    };
    let mut c = Canvas::new(
        "Success density along x",
        "box x at episode end (m)",
        "density (1/m)",
        x_range,
        (0.0, y_hi),
    );
    c.polyline(
        kde.grid.iter().cloned().zip(kde.density.iter().cloned()),
        COLOR_LINE,
    );
    c.finish()
}

trait CeilDecimal {
    /// Rounds up to the next tenth so the axis end lands on a clean tick.
    fn ceil_decimal(self) -> f64;
}

impl CeilDecimal for f64 {
    fn ceil_decimal(self) -> f64 {
        (self * 10.0).ceil() / 10.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lob_core::sim::Variant;

    fn row(dist: f64, reward: f64, kind: Option<EventKind>, attempts: u32, left: u32) -> EpisodeRow {
        EpisodeRow {
            episode_index: 0,
            variant: Variant::Flat,
            seed: 1,
            target: [dist, 0.0, 0.025],
            target_distance: dist,
            cumulative_reward: reward,
            grabs: 0,
            punches: 0,
            attempts,
            steps_remaining: left,
            success: reward > -60.0,
            last_event_kind: kind,
        }
    }

    #[test]
    fn rendering_is_byte_stable() {
        let rows = vec![
            row(0.30, -12.0, Some(EventKind::Grab), 1, 48),
            row(0.55, -29.0, Some(EventKind::Punch), 2, 31),
        ];
        let a = scatter_reward_vs_distance(&rows);
        let b = scatter_reward_vs_distance(&rows);
        assert_eq!(a, b);
        assert!(a.contains(COLOR_GRAB) && a.contains(COLOR_PUNCH));
    }

    #[test]
    fn empty_tables_render_axes_only() {
        let svg = scatter_reward_vs_distance(&[]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(!svg.contains("fill-opacity"));
        let svg = scatter_attempts_vs_steps_remaining(&[]);
        assert!(!svg.contains("fill-opacity"));
        let svg = density_line(&Kde {
            grid: Vec::new(),
            density: Vec::new(),
        });
        assert!(!svg.contains("polyline"));
    }

    #[test]
    fn rows_without_events_draw_no_reward_marks() {
        let rows = vec![row(0.4, -60.0, None, 0, 0)];
        let svg = scatter_reward_vs_distance(&rows);
        assert!(!svg.contains("fill-opacity"));
    }

    #[test]
    fn density_line_tracks_the_grid() {
        let kde = Kde {
            grid: vec![0.2, 0.3, 0.4],
            density: vec![0.1, 5.0, 0.1],
        };
        let svg = density_line(&kde);
        assert!(svg.contains("polyline"));
        assert_eq!(svg.matches("<circle").count(), 0);
    }
}
