//! Phase portrait of the saddle's stable branches with the shooting line,
//! written as plain SVG.

use std::fmt::Write;

use contact_kam::minimizer::ManifoldCurve;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

struct Frame {
    x: (f64, f64),
    p: (f64, f64),
}

impl Frame {
    fn sx(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn sy(&self, p: f64) -> f64 {
        HEIGHT - MARGIN - (p - self.p.0) / (self.p.1 - self.p.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

/// `crossings` are `(x, p)` points in the universal cover, drawn as markers.
pub fn figure(branches: &[&ManifoldCurve], x0: f64, crossings: &[(f64, f64)]) -> String {
    let pi = std::f64::consts::PI;
    let mut x_lo = branches
        .iter()
        .flat_map(|b| b.points.iter().map(|z| z[0]))
        .fold(-pi, f64::min)
        .max(-3.0 * pi);
    let mut x_hi = branches
        .iter()
        .flat_map(|b| b.points.iter().map(|z| z[0]))
        .fold(pi, f64::max)
        .min(3.0 * pi);
    x_lo = x_lo.min(x0 - 0.5);
    x_hi = x_hi.max(x0 + 0.5);
    let p_max = branches
        .iter()
        .flat_map(|b| b.points.iter().map(|z| z[1].abs()))
        .fold(1.0, f64::max);
    let f = Frame {
        x: (x_lo, x_hi),
        p: (-p_max, p_max),
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<defs><clipPath id="plot"><rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}"/></clipPath></defs>"#, WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{y:.2}" x2="{x2:.2}" y2="{y:.2}" stroke="gray" stroke-width="0.5"/>"#,
        y = f.sy(0.0),
        x2 = WIDTH - MARGIN
    );
    for b in branches {
        let pts: Vec<String> = b
            .points
            .iter()
            .map(|z| format!("{:.2},{:.2}", f.sx(z[0]), f.sy(z[1])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline clip-path="url(#plot)" fill="none" stroke="red" stroke-width="3" points="{}"/>"#,
            pts.join(" ")
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{x:.2}" y1="{MARGIN}" x2="{x:.2}" y2="{y2:.2}" stroke="blue" stroke-width="1.5" stroke-dasharray="6 4"/>"#,
        x = f.sx(x0),
        y2 = HEIGHT - MARGIN
    );
    for &(x, p) in crossings {
        if x >= x_lo && x <= x_hi {
            let _ = writeln!(
                s,
                r#"<circle class="p0" cx="{:.2}" cy="{:.2}" r="5" fill="black"/>"#,
                f.sx(x),
                f.sy(p)
            );
        }
    }
    let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="red"/>"#, f.sx(0.0), f.sy(0.0));
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle">x</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="14">p</text>"#,
        HEIGHT / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" fill="blue">x = {x0}</text>"#,
        f.sx(x0) + 4.0,
        MARGIN + 14.0
    );
    s.push_str("</svg>\n");
    s
}
