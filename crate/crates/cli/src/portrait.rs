//! Latent-space phase portrait as a standalone SVG.

use std::fmt::Write as _;

use serde::Serialize;
use stablenode::{Result, StableNodeModel, Tensor};

pub const DEFAULT_GRID: usize = 40;
const SIZE: f64 = 640.0;
const MARGIN: f64 = 40.0;
const ACTIVE_FILL: &str = "#1b7837";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Bounds {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad bound `{p}`: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        let [xmin, xmax, ymin, ymax] = v[..] else {
            return Err(format!("expected xmin,xmax,ymin,ymax, got {} values", v.len()));
        };
        if !(v.iter().all(|x| x.is_finite()) && xmin < xmax && ymin < ymax) {
            return Err("bounds must be finite with xmin < xmax and ymin < ymax".into());
        }
        Ok(Bounds { xmin, xmax, ymin, ymax })
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.xmin) / (self.xmax - self.xmin) * (SIZE - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        MARGIN + (self.ymax - y) / (self.ymax - self.ymin) * (SIZE - 2.0 * MARGIN)
    }

    fn contains(&self, p: &[f64]) -> bool {
        (self.xmin..=self.xmax).contains(&p[0]) && (self.ymin..=self.ymax).contains(&p[1])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PortraitSummary {
    pub grid: usize,
    /// Fraction of grid cells where the corrective term is active (L > 0).
    pub active_fraction: f64,
    pub max_speed: f64,
    pub latent_attractors: Vec<Vec<f64>>,
}

/// Renders f̂ on a `grid × grid` lattice of cell centres. Cells with L > 0
/// are shaded, arrows show direction with length scaled by relative speed,
/// attractors are red discs. `paths` are latent polylines drawn on top.
pub fn render(model: &StableNodeModel, bounds: Bounds, grid: usize, paths: &[Vec<Vec<f64>>]) -> Result<(String, PortraitSummary)> {
    let n = grid * grid;
    let (cw, ch) = ((bounds.xmax - bounds.xmin) / grid as f64, (bounds.ymax - bounds.ymin) / grid as f64);
    let mut pts = Vec::with_capacity(2 * n);
    for j in 0..grid {
        for i in 0..grid {
            pts.push(bounds.xmin + (i as f64 + 0.5) * cw);
            pts.push(bounds.ymin + (j as f64 + 0.5) * ch);
        }
    }
    let x = Tensor::new(vec![n, 2], pts)?;
    let bm = model.frozen()?;
    let (l, f_hat) = bm.detached(|b| {
        let (l, _, f_hat) = b.parts(&x)?.stabilize(b.corrective())?;
        Ok((l.to_vec(), f_hat.to_vec()))
    })?;
    let speeds: Vec<f64> = f_hat.chunks(2).map(|v| v[0].hypot(v[1])).collect();
    let max_speed = speeds.iter().copied().filter(|s| s.is_finite()).fold(0.0, f64::max);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    let cell_w = bounds.px(bounds.xmin + cw) - bounds.px(bounds.xmin);
    let cell_h = bounds.py(bounds.ymin) - bounds.py(bounds.ymin + ch);
    let _ = writeln!(svg, r#"<g id="active" fill="{ACTIVE_FILL}" fill-opacity="0.35">"#);
    let mut active = 0;
    for (k, &lv) in l.iter().enumerate() {
        if lv > 0.0 {
            active += 1;
            let (i, j) = (k % grid, k / grid);
            let x0 = bounds.px(bounds.xmin + i as f64 * cw);
            let y0 = bounds.py(bounds.ymin + (j + 1) as f64 * ch);
            let _ = writeln!(svg, r#"<rect x="{x0:.2}" y="{y0:.2}" width="{cell_w:.2}" height="{cell_h:.2}"/>"#);
        }
    }
    svg.push_str("</g>\n");

    let _ = writeln!(svg, r##"<g id="field" stroke="#333" stroke-width="1" fill="#333">"##);
    let arrow_max = 0.45 * cell_w.min(cell_h);
    for (k, v) in f_hat.chunks(2).enumerate() {
        let s = speeds[k];
        if !(s > 0.0 && s.is_finite()) {
            continue;
        }
        let p = &x.data()[2 * k..2 * k + 2];
        let (cx, cy) = (bounds.px(p[0]), bounds.py(p[1]));
        // sqrt keeps slow regions visible next to fast ones
        let len = arrow_max * (s / max_speed).sqrt().max(0.15);
        let (dx, dy) = (v[0] / s, -v[1] / s);
        let (tx, ty) = (cx + dx * len, cy + dy * len);
        let (bx, by) = (cx - dx * len, cy - dy * len);
        let head = 0.35 * len;
        let (lx, ly) = (tx - dx * head - dy * head * 0.5, ty - dy * head + dx * head * 0.5);
        let (rx, ry) = (tx - dx * head + dy * head * 0.5, ty - dy * head - dx * head * 0.5);
        let _ = writeln!(
            svg,
            r#"<line x1="{bx:.2}" y1="{by:.2}" x2="{tx:.2}" y2="{ty:.2}"/><polygon points="{tx:.2},{ty:.2} {lx:.2},{ly:.2} {rx:.2},{ry:.2}"/>"#
        );
    }
    svg.push_str("</g>\n");

    if !paths.is_empty() {
        let _ = writeln!(svg, r##"<g id="demos" fill="none" stroke="#2166ac" stroke-width="1.5">"##);
        for path in paths {
            let pts: Vec<String> = path.iter().map(|p| format!("{:.2},{:.2}", bounds.px(p[0]), bounds.py(p[1]))).collect();
            let _ = writeln!(svg, r#"<polyline points="{}"/>"#, pts.join(" "));
        }
        svg.push_str("</g>\n");
    }

    let latent = model.latent_attractors()?;
    let _ = writeln!(svg, r##"<g id="attractors" fill="#d7191c" stroke="black">"##);
    for a in latent.iter().filter(|a| bounds.contains(a)) {
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="6"/>"#, bounds.px(a[0]), bounds.py(a[1]));
    }
    svg.push_str("</g>\n");

    let inner = SIZE - 2.0 * MARGIN;
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{inner}" height="{inner}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<g font-family="sans-serif" font-size="12"><text x="{MARGIN}" y="{}">{}</text><text x="{}" y="{}" text-anchor="end">{}</text><text x="{}" y="{}" text-anchor="end">{}</text><text x="{}" y="{}" text-anchor="end">{}</text><text x="{}" y="{}">x1</text><text x="12" y="{}">x2</text></g>"#,
        SIZE - MARGIN + 16.0,
        bounds.xmin,
        SIZE - MARGIN,
        SIZE - MARGIN + 16.0,
        bounds.xmax,
        MARGIN - 6.0,
        SIZE - MARGIN,
        bounds.ymin,
        MARGIN - 6.0,
        MARGIN + 4.0,
        bounds.ymax,
        SIZE / 2.0,
        SIZE - 12.0,
        SIZE / 2.0
    );
    svg.push_str("</svg>\n");
    Ok((
        svg,
        PortraitSummary {
            grid,
            active_fraction: active as f64 / n as f64,
            max_speed,
            latent_attractors: latent,
        },
    ))
}
