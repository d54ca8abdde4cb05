//! Minimal static line plots. Output depends only on the input numbers, so
//! the files are byte-stable.

use std::fmt::Write;

use ptlevels::Parity;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 560.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub struct Curve {
    pub parity: Parity,
    pub points: Vec<(f64, f64)>,
    /// Points drawn with the parity marker: `+` even, `×` odd.
    pub marks: Vec<(f64, f64)>,
}

pub struct Plot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub x_range: (f64, f64),
    /// Embedded verbatim in a comment.
    pub config: &'a str,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let step = nice_step(hi - lo);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    ((first..=last).map(|i| i as f64 * step).collect(), decimals)
}

fn y_range(curves: &[Curve]) -> (f64, f64) {
    let ys = curves.iter().flat_map(|c| c.points.iter().map(|p| p.1));
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn color(p: Parity) -> &'static str {
    match p {
        Parity::Even => "#1f4e9a",
        Parity::Odd => "#b22222",
    }
}

pub fn render(plot: &Plot, curves: &[Curve]) -> String {
    let (x0, x1) = plot.x_range;
    let (y0, y1) = y_range(curves);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(s, "<!-- config {} -->", plot.config.replace("--", "- -"));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, plot.title);
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);

    let (xt, xd) = ticks(x0, x1);
    for x in xt {
        let px = sx(x);
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{x:.xd$}</text>"#, TOP + ph + 20.0);
    }
    let (yt, yd) = ticks(y0, y1);
    for y in yt {
        let py = sy(y);
        let y = if y == 0.0 { 0.0 } else { y };
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">{y:.yd$}</text>"#, LEFT - 8.0, py + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 15.0, plot.x_label);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        plot.y_label
    );

    for c in curves {
        let pts: Vec<String> = c.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#, color(c.parity), pts.join(" "));
        if c.marks.is_empty() {
            continue;
        }
        let mut d = String::new();
        for &(x, y) in &c.marks {
            let (px, py) = (sx(x), sy(y));
            match c.parity {
                Parity::Even => {
                    let _ = write!(d, "M{:.2} {py:.2}H{:.2}M{px:.2} {:.2}V{:.2}", px - 3.0, px + 3.0, py - 3.0, py + 3.0);
                }
                Parity::Odd => {
                    let _ = write!(d, "M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}", px - 2.5, py - 2.5, px + 2.5, py + 2.5, px - 2.5, py + 2.5, px + 2.5, py - 2.5);
                }
            }
        }
        let _ = writeln!(s, r#"<path fill="none" stroke="{}" stroke-width="1" d="{d}"/>"#, color(c.parity));
    }

    let lx = LEFT + 15.0;
    let _ = writeln!(s, r#"<path stroke="{}" d="M{:.2} {:.2}H{:.2}M{lx:.2} {:.2}V{:.2}"/>"#, color(Parity::Even), lx - 4.0, TOP + 15.0, lx + 4.0, TOP + 11.0, TOP + 19.0);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">even y-parity</text>"#, lx + 10.0, TOP + 19.0);
    let _ = writeln!(s, r#"<path stroke="{}" d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}"/>"#, color(Parity::Odd), lx - 3.0, TOP + 32.0, lx + 3.0, TOP + 38.0, lx - 3.0, TOP + 38.0, lx + 3.0, TOP + 32.0);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">odd y-parity</text>"#, lx + 10.0, TOP + 39.0);
    s.push_str("</svg>\n");
    s
}
