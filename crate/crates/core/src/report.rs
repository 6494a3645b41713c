//! Report artifacts: CSV, JSON, the final mesh and a log-log SVG convergence plot.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::adaptivity::{fit_rate, RunReport};
use crate::error::Result;
use crate::mesh::Mesh;
use crate::scalar::Real;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Series plotted against `ndof`: `η_σ`, `η_p`, `η_du` and the `HΛ` error of `σ` when known.
fn series(report: &RunReport) -> Vec<(&'static str, Vec<(f64, f64)>)> {
    let mut out = vec![(
        "eta_sigma",
        report
            .steps
            .iter()
            .map(|s| (s.ndof as f64, s.eta_sigma))
            .collect::<Vec<_>>(),
    )];
    if report.k == 1 {
        out.push((
            "eta_p",
            report
                .steps
                .iter()
                .filter_map(|s| Some((s.ndof as f64, s.eta_p?)))
                .collect(),
        ));
        out.push((
            "eta_du",
            report
                .steps
                .iter()
                .filter_map(|s| Some((s.ndof as f64, s.eta_du?)))
                .collect(),
        ));
    }
    out.push((
        "err_sigma",
        report
            .steps
            .iter()
            .filter_map(|s| {
                let (a, b) = (s.err_sigma_l2?, s.err_dsigma_l2.unwrap_or(0.0));
                Some((s.ndof as f64, (a * a + b * b).sqrt()))
            })
            .collect(),
    ));
    out.into_iter()
        .map(|(n, pts)| {
            (
                n,
                pts.into_iter()
                    .filter(|&(x, y)| x > 0.0 && y > 0.0)
                    .collect::<Vec<_>>(),
            )
        })
        .filter(|(_, pts)| !pts.is_empty())
        .collect()
}

/// Self-contained SVG with one polyline per series and the fitted slopes as text.
pub fn rates_svg(report: &RunReport) -> String {
    let data = series(report);
    let all: Vec<(f64, f64)> = data
        .iter()
        .flat_map(|(_, p)| p.iter().map(|&(x, y)| (x.log10(), y.log10())))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">log10 ndof</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})">log10 value</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}" font-size="10">{x0:.2}</text>"#,
        HEIGHT - MARGIN + 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{x1:.2}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{y0:.2}</text>"#,
        MARGIN - 4.0,
        HEIGHT - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{y1:.2}</text>"#,
        MARGIN - 4.0,
        MARGIN + 10.0
    );
    for (i, (name, pts)) in data.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x.log10()), py(y.log10())))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let slope = fit_rate(pts)
            .map(|r| format!("{r:.3}"))
            .unwrap_or_else(|_| "n/a".into());
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{name} (ndof slope {slope})</text>"#,
            WIDTH - MARGIN - 200.0,
            MARGIN + 16.0 + 14.0 * i as f64
        );
    }
    let annotation = match report.fitted_rate {
        Some(r) => format!("fitted rate s = {r:.12}"),
        None => "fitted rate s = n/a".to_string(),
    };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12">{annotation}</text>"#,
        MARGIN + 6.0,
        MARGIN - 10.0
    );
    s.push_str("</svg>\n");
    s
}

/// Parses the value written after `fitted rate s = `.
pub fn parse_svg_rate(svg: &str) -> Option<f64> {
    let i = svg.find("fitted rate s = ")? + "fitted rate s = ".len();
    let rest = &svg[i..];
    let end = rest.find('<')?;
    rest[..end].trim().parse().ok()
}

/// Writes `report.csv`, `report.json`, `mesh_final.txt` and optionally `rates.svg`.
pub fn write_artifacts<T: Real>(
    dir: &Path,
    report: &RunReport,
    final_mesh: &Mesh<T>,
    emit_svg: bool,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.csv"), report.to_csv())?;
    fs::write(dir.join("report.json"), report.to_json())?;
    let mut mesh = Vec::new();
    final_mesh.write(&mut mesh)?;
    fs::write(dir.join("mesh_final.txt"), mesh)?;
    if emit_svg {
        fs::write(dir.join("rates.svg"), rates_svg(report))?;
    }
    Ok(())
}
