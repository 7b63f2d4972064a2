//! SVG rendering of a sampled mass-energy curve. Mass uses a log axis and
//! energy a symmetric log axis (linear inside |I| < 1), since both span
//! several decades along the branch.

use std::fmt::Write;

use normwave::radial::fmt_num;
use normwave::shooting::{Branch, Curve, CurvePoint};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

const LOW_COLOR: &str = "#c0392b";
const HIGH_COLOR: &str = "#1f5fa8";

fn symlog(e: f64) -> f64 {
    e.signum() * e.abs().ln_1p() / std::f64::consts::LN_10
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, mass: f64) -> f64 {
        LEFT + (mass.log10() - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, energy: f64) -> f64 {
        TOP + (self.y.1 - symlog(energy)) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn polyline(out: &mut String, frame: &Frame, pts: &[CurvePoint], color: &str) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            format!(
                "{},{}",
                fmt_num(frame.px(p.mass)),
                fmt_num(frame.py(p.energy))
            )
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
        coords.join(" ")
    );
    for p in pts {
        let _ = writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#,
            fmt_num(frame.px(p.mass)),
            fmt_num(frame.py(p.energy))
        );
    }
}

fn energy_label(e: f64) -> String {
    if e == 0.0 {
        "0".into()
    } else {
        format!(
            "{}1e{}",
            if e < 0.0 { "-" } else { "" },
            e.abs().log10().round() as i32
        )
    }
}

/// Renders the present points of `curve`, coloured by branch.
pub fn curve_svg(curve: &Curve) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let pts: Vec<CurvePoint> = curve.present().copied().collect();
    if pts.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{LEFT}" y="{}">no solutions in the sweep</text>"#,
            HEIGHT / 2.0
        );
        out.push_str("</svg>\n");
        return out;
    }
    let (mlo, mhi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.mass), b.max(p.mass))
        });
    let (elo, ehi) = pts.iter().fold((0.0f64, 0.0f64), |(a, b), p| {
        (a.min(p.energy), b.max(p.energy))
    });
    let x = (
        mlo.log10().floor(),
        mhi.log10().ceil().max(mlo.log10().floor() + 1.0),
    );
    let y = (symlog(elo).floor().min(-1.0), symlog(ehi).ceil().max(1.0));
    let frame = Frame { x, y };

    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    for k in (x.0 as i32)..=(x.1 as i32) {
        for mult in [1.0, 2.0, 5.0] {
            let m = mult * 10f64.powi(k);
            if m.log10() > x.1 + 1e-12 {
                continue;
            }
            let px = fmt_num(frame.px(m));
            let _ = writeln!(
                out,
                r##"<line x1="{px}" y1="{y0}" x2="{px}" y2="{y1}" stroke="#e4e4e4"/>"##
            );
            let _ = writeln!(
                out,
                r#"<text x="{px}" y="{}" text-anchor="middle">{m}</text>"#,
                y1 + 16.0
            );
        }
    }
    let mut ticks = vec![0.0];
    for k in 0..=(y.1.max(-y.0) as i32) {
        ticks.push(10f64.powi(k));
        ticks.push(-10f64.powi(k));
    }
    for e in ticks {
        let s = symlog(e);
        if s < y.0 - 1e-12 || s > y.1 + 1e-12 {
            continue;
        }
        let py = fmt_num(frame.py(e));
        let stroke = if e == 0.0 {
            r#"stroke="black" stroke-dasharray="4 3""#
        } else {
            r##"stroke="#e4e4e4""##
        };
        let _ = writeln!(
            out,
            r#"<line x1="{x0}" y1="{py}" x2="{x1}" y2="{py}" {stroke}/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{py}" text-anchor="end" dy="4">{}</text>"#,
            x0 - 6.0,
            energy_label(e)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">mass (log scale)</text>"#,
        0.5 * (x0 + x1),
        HEIGHT - 18.0
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(20,{}) rotate(-90)" text-anchor="middle">energy I (symmetric log)</text>"#,
        0.5 * (y0 + y1)
    );
    polyline(&mut out, &frame, &curve.branch(Branch::LowOmega), LOW_COLOR);
    polyline(
        &mut out,
        &frame,
        &curve.branch(Branch::HighOmega),
        HIGH_COLOR,
    );
    let lx = x1 + 16.0;
    for (i, (label, color)) in [
        ("omega below mass minimum", LOW_COLOR),
        ("omega above mass minimum", HIGH_COLOR),
    ]
    .iter()
    .enumerate()
    {
        let ly = y0 + 20.0 + 20.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{lx}" y="{}" width="12" height="12" fill="{color}"/>"#,
            ly - 10.0
        );
        let _ = writeln!(out, r#"<text x="{}" y="{ly}">{label}</text>"#, lx + 18.0);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(omega: f64, mass: f64, energy: f64) -> Option<CurvePoint> {
        Some(CurvePoint {
            omega,
            u0: 1.0,
            mass,
            energy,
            action: 0.0,
            nodes: 0,
        })
    }

    #[test]
    fn colours_both_branches() {
        let curve = Curve {
            omegas: vec![0.01, 0.02, 0.03, 0.04],
            points: vec![
                point(0.01, 400.0, 2.0),
                point(0.02, 200.0, 1.0),
                None,
                point(0.04, 900.0, -50.0),
            ],
        };
        let svg = curve_svg(&curve);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(LOW_COLOR) && svg.contains(HIGH_COLOR));
        assert_eq!(svg.matches("<circle").count(), 4);
    }

    #[test]
    fn empty_curve_still_renders() {
        let svg = curve_svg(&Curve {
            omegas: vec![0.2],
            points: vec![None],
        });
        assert!(svg.contains("no solutions"));
    }
}
