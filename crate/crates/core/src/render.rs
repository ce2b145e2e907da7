//! Deterministic SVG snapshots of one occupancy frame: grid lines,
//! colored region overlays, per-cell robot counts, and optional robot
//! dots. SVG keeps golden tests diffable.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::grid::{cell_bounds, GridConfig, OccupancyMatrix};

/// A named set of cells drawn as a colored overlay (0-based cells).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub cells: Vec<(usize, usize)>,
    /// Any SVG color, e.g. `#cc4444`.
    pub color: String,
}

const CANVAS: f64 = 512.0;
const MARGIN: f64 = 16.0;

fn sx(cfg: &GridConfig, x: f64) -> f64 {
    let a = cfg.side_length;
    MARGIN + (x + a / 2.0) / a * (CANVAS - 2.0 * MARGIN)
}

fn sy(cfg: &GridConfig, y: f64) -> f64 {
    let a = cfg.side_length;
    MARGIN + (a / 2.0 - y) / a * (CANVAS - 2.0 * MARGIN)
}

/// Renders one frame. `positions`, when given, are drawn as dots;
/// otherwise cells are shaded by occupancy share.
pub fn render_svg(
    cfg: &GridConfig,
    occupancy: &OccupancyMatrix,
    positions: Option<&[(f64, f64)]>,
    regions: &[Region],
    title: &str,
) -> String {
    let n = cfg.cells_per_side();
    let total = occupancy.total().max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{c}\" height=\"{c}\" viewBox=\"0 0 {c} {c}\">",
        c = CANVAS
    );
    let _ = writeln!(out, "<!-- {title} -->");
    let _ = writeln!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{c}\" height=\"{c}\" fill=\"white\"/>",
        c = CANVAS
    );

    // Occupancy shading (skipped when explicit positions are drawn).
    if positions.is_none() {
        for i in 0..n {
            for j in 0..n {
                let count = occupancy.get(i, j);
                if count == 0 {
                    continue;
                }
                let b = cell_bounds(cfg, i + 1, j + 1).expect("cell in range");
                let opacity = 0.15 + 0.65 * (count as f64 / total);
                let _ = writeln!(
                    out,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#3366aa\" fill-opacity=\"{:.3}\"/>",
                    sx(cfg, b.x_min),
                    sy(cfg, b.y_max),
                    sx(cfg, b.x_max) - sx(cfg, b.x_min),
                    sy(cfg, b.y_min) - sy(cfg, b.y_max),
                    opacity.min(0.9),
                );
            }
        }
    }

    // Region overlays.
    for region in regions {
        for &(i, j) in &region.cells {
            let b = cell_bounds(cfg, i + 1, j + 1).expect("cell in range");
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\" fill-opacity=\"0.3\" stroke=\"{}\" stroke-width=\"2\"><title>{}</title></rect>",
                sx(cfg, b.x_min),
                sy(cfg, b.y_max),
                sx(cfg, b.x_max) - sx(cfg, b.x_min),
                sy(cfg, b.y_min) - sy(cfg, b.y_max),
                region.color,
                region.color,
                region.name,
            );
        }
    }

    // Grid lines.
    for g in 0..=n {
        let t = MARGIN + g as f64 / n as f64 * (CANVAS - 2.0 * MARGIN);
        let _ = writeln!(
            out,
            "<line x1=\"{t:.2}\" y1=\"{m:.2}\" x2=\"{t:.2}\" y2=\"{e:.2}\" stroke=\"#888\" stroke-width=\"1\"/>",
            m = MARGIN,
            e = CANVAS - MARGIN
        );
        let _ = writeln!(
            out,
            "<line x1=\"{m:.2}\" y1=\"{t:.2}\" x2=\"{e:.2}\" y2=\"{t:.2}\" stroke=\"#888\" stroke-width=\"1\"/>",
            m = MARGIN,
            e = CANVAS - MARGIN
        );
    }

    // Per-cell counts.
    for i in 0..n {
        for j in 0..n {
            let count = occupancy.get(i, j);
            if count == 0 {
                continue;
            }
            let b = cell_bounds(cfg, i + 1, j + 1).expect("cell in range");
            let cx = sx(cfg, (b.x_min + b.x_max) / 2.0);
            let cy = sy(cfg, (b.y_min + b.y_max) / 2.0);
            let _ = writeln!(
                out,
                "<text x=\"{cx:.2}\" y=\"{cy:.2}\" font-size=\"14\" text-anchor=\"middle\" fill=\"#222\">{count}</text>"
            );
        }
    }

    // Robot dots.
    if let Some(positions) = positions {
        for &(x, y) in positions {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#cc3333\"/>",
                sx(cfg, x),
                sy(cfg, y)
            );
        }
    }

    out.push_str("</svg>\n");
    out
}
