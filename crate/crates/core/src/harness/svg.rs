//! Single-file SVG log-log plot of a rate experiment.

use std::fmt::Write;

use crate::harness::rates::RateResult;

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 56.0;

/// Mean MSE against tensor size on log-log axes, with error bars and the
/// largest-half fit as a dashed line.
pub fn render_svg(result: &RateResult, title: &str) -> String {
    let pts: Vec<(f64, f64, f64)> = result
        .points
        .iter()
        .filter(|p| p.mean_mse > 0.0 && p.mean_mse.is_finite())
        .map(|p| ((p.size as f64).log10(), p.mean_mse.log10(), p.std_error))
        .collect();
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let (mut x0, mut x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let (xm, ym) = (0.05 * (x1 - x0), 0.1 * (y1 - y0));
    let (x0, x1, y0, y1) = (x0 - xm, x1 + xm, y0 - ym, y1 + ym);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="black" points="{},{} {},{} {},{}"/>"#,
        PAD,
        PAD,
        PAD,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">log10 n</text>"#, W / 2.0, H - 14.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">log10 MSE</text>"#,
        H / 2.0,
        H / 2.0
    );
    for &(x, y, se) in &pts {
        let mean = 10f64.powf(y);
        let lo = (mean - se).max(mean * 1e-3).log10();
        let hi = (mean + se).log10();
        let _ = writeln!(s, r#"<line x1="{0:.2}" x2="{0:.2}" y1="{1:.2}" y2="{2:.2}" stroke="gray"/>"#, sx(x), sy(lo), sy(hi));
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="steelblue"/>"#, sx(x), sy(y));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{:.2}</text>"#, sx(x), H - PAD + 14.0, x);
    }
    if let Some(fit) = result.fit_half {
        let line = |x: f64| (fit.intercept + fit.slope * x * std::f64::consts::LN_10) / std::f64::consts::LN_10;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-dasharray="5,4"/>"#,
            sx(x0),
            sy(line(x0)),
            sx(x1),
            sy(line(x1))
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="firebrick">slope {:.3} ± {:.3}</text>"#,
            PAD + 8.0,
            PAD + 14.0,
            fit.slope,
            fit.half_width
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
