//! Self-contained SVG plots: path with orientation ticks, torque profile,
//! line charts and heat maps. No timestamps or external assets, so output is
//! a pure function of the data.

use std::fmt::Write;

use ddtraj_core::robot::torque_from_accel;
use ddtraj_core::{ConstraintConfig, RobotParams, Trajectory};

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Data-to-pixel map for a plot area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

fn pad(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        return (c - 1.0, c + 1.0);
    }
    let m = 0.05 * (hi - lo);
    (lo - m, hi + m)
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Self { x: pad(x.0, x.1), y: pad(y.0, y.1) }
    }

    /// Widens one axis so a data unit has the same length on both.
    fn equal_aspect(mut self) -> Self {
        let (pw, ph) = (W - 2.0 * MARGIN, H - 2.0 * MARGIN);
        let per_px = ((self.x.1 - self.x.0) / pw).max((self.y.1 - self.y.0) / ph);
        let (cx, cy) = (0.5 * (self.x.0 + self.x.1), 0.5 * (self.y.0 + self.y.1));
        self.x = (cx - 0.5 * per_px * pw, cx + 0.5 * per_px * pw);
        self.y = (cy - 0.5 * per_px * ph, cy + 0.5 * per_px * ph);
        self
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
        let _ =
            write!(out, r##"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="#444"/>"##, r - l, b - t);
        for xv in nice_ticks(self.x) {
            let x = self.px(xv);
            let _ = write!(
                out,
                r##"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{:.2}" stroke="#444"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"##,
                b + 5.0,
                b + 18.0,
                tick(xv)
            );
        }
        for yv in nice_ticks(self.y) {
            let y = self.py(yv);
            let _ = write!(
                out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{l}" y2="{y:.2}" stroke="#444"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"##,
                l - 5.0,
                l - 8.0,
                y + 4.0,
                tick(yv)
            );
        }
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="30" font-size="15" text-anchor="middle">{}</text><text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text><text x="16" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            W / 2.0,
            escape(title),
            W / 2.0,
            H - 15.0,
            escape(xlabel),
            H / 2.0,
            H / 2.0,
            escape(ylabel)
        );
    }
}

/// Round tick positions (steps of 1, 2 or 5 times a power of ten), about
/// five per axis.
fn nice_ticks((lo, hi): (f64, f64)) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    if !(raw > 0.0) || !raw.is_finite() {
        return vec![lo];
    }
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn document(body: &str) -> String {
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif"><rect width="100%" height="100%" fill="white"/>{body}</svg>
"#
    )
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str, dash: bool) {
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
    let dash = if dash { r#" stroke-dasharray="6 4""# } else { "" };
    let _ =
        write!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#, coords.join(" "));
}

fn legend(out: &mut String, labels: &[String]) {
    for (i, label) in labels.iter().enumerate() {
        let y = MARGIN + 14.0 + 16.0 * i as f64;
        let x = W - MARGIN - 110.0;
        let _ = write!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/><text x="{}" y="{}" font-size="11">{}</text>"#,
            x + 20.0,
            PALETTE[i % PALETTE.len()],
            x + 26.0,
            y + 4.0,
            escape(label)
        );
    }
}

/// `(x, y)` path with start and end markers and heading ticks every
/// `max(1, N / 20)` steps.
pub fn path_svg(traj: &Trajectory, title: &str) -> String {
    let xs = extent(traj.states.iter().map(|s| s.x));
    let ys = extent(traj.states.iter().map(|s| s.y));
    let f = Frame::new(xs, ys).equal_aspect();
    let mut out = String::new();
    f.axes(&mut out, title, "x (m)", "y (m)");
    let pts: Vec<(f64, f64)> = traj.states.iter().map(|s| (s.x, s.y)).collect();
    polyline(&mut out, &f, &pts, PALETTE[0], false);
    let every = (traj.steps() / 20).max(1);
    let len = 18.0;
    for (k, s) in traj.states.iter().enumerate() {
        if k % every != 0 && k != traj.steps() {
            continue;
        }
        let (x, y) = (f.px(s.x), f.py(s.y));
        let _ = write!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1.5"/>"#,
            x + len * s.phi.cos(),
            y - len * s.phi.sin()
        );
    }
    if let (Some(a), Some(b)) = (traj.states.first(), traj.states.last()) {
        let _ = write!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="6" fill="#2ca02c"/>"##, f.px(a.x), f.py(a.y));
        let _ = write!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="12" height="12" fill="#d62728"/>"##,
            f.px(b.x) - 6.0,
            f.py(b.y) - 6.0
        );
    }
    document(&out)
}

/// Wheel torques against the step index with the bounds dashed.
pub fn torque_svg(traj: &Trajectory, params: &RobotParams, cfg: &ConstraintConfig, title: &str) -> String {
    let taus: Vec<(f64, f64)> = traj
        .controls
        .iter()
        .zip(&traj.states)
        .map(|(c, s)| {
            let t = torque_from_accel(&c.accel(), &s.wheel_velocity(), params);
            (t.tau_r, t.tau_l)
        })
        .collect();
    let ys = extent(taus.iter().flat_map(|t| [t.0, t.1]).chain([cfg.tau_min, cfg.tau_max]));
    let f = Frame::new((0.0, traj.steps() as f64), ys);
    let mut out = String::new();
    f.axes(&mut out, title, "step k", "torque (N m)");
    // hold each value over its step
    let stairs = |pick: fn(&(f64, f64)) -> f64| -> Vec<(f64, f64)> {
        taus.iter().enumerate().flat_map(|(k, t)| [(k as f64, pick(t)), (k as f64 + 1.0, pick(t))]).collect()
    };
    polyline(&mut out, &f, &stairs(|t| t.0), PALETTE[0], false);
    polyline(&mut out, &f, &stairs(|t| t.1), PALETTE[1], false);
    for bound in [cfg.tau_min, cfg.tau_max] {
        polyline(&mut out, &f, &[(0.0, bound), (traj.steps() as f64, bound)], "#888", true);
    }
    legend(&mut out, &["tau_R".into(), "tau_L".into()]);
    document(&out)
}

/// One line per labelled series.
pub fn line_chart(series: &[(String, Vec<(f64, f64)>)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let xs = extent(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let ys = extent(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let f = Frame::new(xs, ys);
    let mut out = String::new();
    f.axes(&mut out, title, xlabel, ylabel);
    for (i, (_, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        polyline(&mut out, &f, pts, color, false);
        for &(x, y) in pts {
            let _ = write!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, f.px(x), f.py(y));
        }
    }
    legend(&mut out, &series.iter().map(|s| s.0.clone()).collect::<Vec<_>>());
    document(&out)
}

/// Grid of cells coloured by a value in `[0, 1]`; `None` cells are hatched
/// grey. `values[i][j]` belongs to `rows[i]` and `cols[j]`.
pub fn heat_map(
    rows: &[f64],
    cols: &[f64],
    values: &[Vec<Option<f64>>],
    title: &str,
    row_label: &str,
    col_label: &str,
) -> String {
    let mut out = String::new();
    let (l, t) = (MARGIN + 20.0, MARGIN);
    let cw = (W - l - MARGIN - 60.0) / cols.len().max(1) as f64;
    let ch = (H - t - MARGIN - 20.0) / rows.len().max(1) as f64;
    let _ =
        write!(out, r#"<text x="{:.1}" y="30" font-size="15" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    for (i, r) in rows.iter().enumerate() {
        let y = t + ch * i as f64;
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
            l - 6.0,
            y + ch / 2.0 + 4.0,
            tick(*r)
        );
        for (j, _) in cols.iter().enumerate() {
            let x = l + cw * j as f64;
            let v = values.get(i).and_then(|row| row.get(j)).copied().flatten();
            let (fill, label) = match v {
                Some(v) => (heat(v), format!("{v:.2}")),
                None => ("#cccccc".to_string(), "n/a".into()),
            };
            let _ = write!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{fill}" stroke="white"/><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{label}</text>"#,
                x + cw / 2.0,
                y + ch / 2.0 + 4.0
            );
        }
    }
    let bottom = t + ch * rows.len() as f64;
    for (j, c) in cols.iter().enumerate() {
        let _ = write!(
            out,
            r#"<text x="{:.2}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            l + cw * (j as f64 + 0.5),
            bottom + 16.0,
            tick(*c)
        );
    }
    let _ = write!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text><text x="16" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        l + cw * cols.len() as f64 / 2.0,
        bottom + 36.0,
        escape(col_label),
        t + ch * rows.len() as f64 / 2.0,
        t + ch * rows.len() as f64 / 2.0,
        escape(row_label)
    );
    document(&out)
}

/// Blue (0) to red (1).
fn heat(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let r = (40.0 + 215.0 * v).round() as u8;
    let b = (255.0 - 215.0 * v).round() as u8;
    format!("rgb({r},70,{b})")
}
