//! Minimal SVG rendering of a medium-regime kernel.

use std::fmt::Write as _;

const SIZE: f64 = 480.0;
const PAD: f64 = 40.0;

fn px(m: f64, h: f64) -> (f64, f64) {
    (PAD + m * SIZE, PAD + (1.0 - h) * SIZE)
}

fn coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Unit square with the kernel region shaded: the rectangle under the cap
/// up to `M̄`, then the area under the frontier samples.
pub fn kernel(h_bar: f64, frontier: &[[f64; 2]]) -> String {
    let full = SIZE + 2.0 * PAD;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}">"#
    );
    let (x0, y0) = px(0.0, 1.0);
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{SIZE}" height="{SIZE}" fill="none" stroke="#000"/>"##,
        coord(x0),
        coord(y0)
    );

    let mut region = vec![px(0.0, 0.0), px(0.0, h_bar)];
    region.extend(frontier.iter().map(|p| px(p[0], p[1])));
    if let Some(last) = frontier.last() {
        region.push(px(last[0], 0.0));
    }
    let points: Vec<String> = region
        .iter()
        .map(|(x, y)| format!("{},{}", coord(*x), coord(*y)))
        .collect();
    let _ = writeln!(
        out,
        r##"<polygon points="{}" fill="#9ecae1" stroke="#08519c" stroke-width="1.5"/>"##,
        points.join(" ")
    );

    let (cx0, cy) = px(0.0, h_bar);
    let (cx1, _) = px(1.0, h_bar);
    let _ = writeln!(
        out,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#a50f15" stroke-dasharray="6 4"/>"##,
        coord(cx0),
        coord(cy),
        coord(cx1),
        coord(cy)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">m</text>"#,
        coord(PAD + SIZE / 2.0),
        coord(full - 10.0)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" font-size="14" text-anchor="middle">h</text>"#,
        coord(PAD + SIZE / 2.0)
    );
    out.push_str("</svg>\n");
    out
}
