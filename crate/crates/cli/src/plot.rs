//! Minimal SVG line plot of an energy-versus-scale curve.

use std::fmt::Write;

use scale_opt::synthetic::EnergySample;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Energy over `ln s`, with vertical markers at the given scales. Grid points
/// without enough valid points break the line.
pub fn energy_curve_svg(curve: &[EnergySample], markers: &[(&str, f64)]) -> String {
    let valid: Vec<(f64, f64)> = curve
        .iter()
        .filter_map(|c| c.energy.map(|e| (c.scale.ln(), e)))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if curve.is_empty() || valid.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{MARGIN}" y="{MARGIN}">no valid energy samples</text>"#
        );
        svg.push_str("</svg>\n");
        return svg;
    }

    let x_lo = curve[0].scale.ln();
    let x_hi = curve[curve.len() - 1].scale.ln().max(x_lo + 1e-12);
    let y_lo = valid.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y_hi = valid
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(y_lo + 1e-12);
    let px = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let mut run: Vec<String> = Vec::new();
    let flush = |run: &mut Vec<String>, svg: &mut String| {
        if run.len() > 1 {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
                run.join(" ")
            );
        }
        run.clear();
    };
    for c in curve {
        match c.energy {
            Some(e) => run.push(format!("{:.2},{:.2}", px(c.scale.ln()), py(e))),
            None => flush(&mut run, &mut svg),
        }
    }
    flush(&mut run, &mut svg);

    for (i, (label, s)) in markers.iter().enumerate() {
        let x = px(s.ln());
        let color = ["crimson", "darkgreen", "darkorange"][i % 3];
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{MARGIN}" x2="{x:.2}" y2="{}" stroke="{color}" stroke-dasharray="4 3"/>"#,
            HEIGHT - MARGIN
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" font-size="12" fill="{color}">{label} = {s:.4}</text>"#,
            x + 4.0,
            MARGIN + 14.0 * (i + 1) as f64
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">scale (log axis), {:.3} to {:.3}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        curve[0].scale,
        curve[curve.len() - 1].scale
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">energy</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}
