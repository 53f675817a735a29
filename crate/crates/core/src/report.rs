//! Text outputs: CSV tables, SVG mesh renderings and the run manifest.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::adaptivity::ConvergenceRecord;
use crate::estimators::IndicatorSet;
use crate::mesh::Mesh;
use crate::recovery::{RecoveredFlux, Space};

pub const HISTORY_HEADER: &str = "step,dof,error,estimator,effectivity,slope";

/// 17 significant digits, round-trips every finite double.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

pub fn history_csv(records: &[ConvergenceRecord]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.step,
            r.dof,
            fmt_opt(r.error),
            fmt_real(r.estimator),
            fmt_opt(r.effectivity),
            fmt_opt(r.slope)
        );
    }
    out
}

/// Parses a history table written by [`history_csv`]. Empty cells become `None`.
pub fn parse_history_csv(text: &str) -> crate::Result<Vec<ConvergenceRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HISTORY_HEADER => {}
        _ => return Err(crate::Error::Parse { line: 1, msg: "bad history header".into() }),
    }
    let opt = |s: &str, line: usize| -> crate::Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| crate::Error::Parse { line, msg: format!("bad number `{s}`") })
        }
    };
    let mut records = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(crate::Error::Parse { line: n, msg: "expected 6 columns".into() });
        }
        let int = |s: &str| {
            s.parse::<usize>().map_err(|_| crate::Error::Parse { line: n, msg: format!("bad integer `{s}`") })
        };
        records.push(ConvergenceRecord {
            step: int(f[0])?,
            dof: int(f[1])?,
            error: opt(f[2], n)?,
            estimator: opt(f[3], n)?.ok_or(crate::Error::Parse { line: n, msg: "missing estimator".into() })?,
            effectivity: opt(f[4], n)?,
            slope: opt(f[5], n)?,
        });
    }
    Ok(records)
}

/// `kind,id,value` rows (edge rows use `<kind>:edge`), then one summary row per global quantity.
pub fn indicators_csv(set: &IndicatorSet) -> String {
    let kind = set.kind.name();
    let mut out = String::from("kind,id,value\n");
    for (e, v) in set.edge.iter().enumerate() {
        let _ = writeln!(out, "{kind}:edge,{e},{}", fmt_real(*v));
    }
    for (t, v) in set.element.iter().enumerate() {
        let _ = writeln!(out, "{kind}:element,{t},{}", fmt_real(*v));
    }
    for (name, v) in
        [("xi", set.xi), ("xi_hat", set.xi_hat), ("xi_hat2", set.xi_hat2), ("eta", set.eta), ("osc", set.osc)]
    {
        let _ = writeln!(out, "summary,{name},{}", fmt_real(v));
    }
    out
}

pub fn flux_csv(flux: &RecoveredFlux) -> String {
    let mut out = String::from("edge_id,space,dof1,dof2\n");
    for (e, d) in flux.dofs.iter().enumerate() {
        match flux.space {
            Space::Rt => {
                let _ = writeln!(out, "{e},rt,{},", fmt_real(d[0]));
            }
            Space::Bdm => {
                let _ = writeln!(out, "{e},bdm,{},{}", fmt_real(d[0]), fmt_real(d[1]));
            }
        }
    }
    out
}

const SVG_SIZE: f64 = 800.0;
const LEGEND_HEIGHT: f64 = 60.0;
const LOW: [f64; 3] = [49.0, 54.0, 149.0];
const HIGH: [f64; 3] = [215.0, 48.0, 39.0];

fn color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let c: Vec<u8> = (0..3).map(|i| (LOW[i] + t * (HIGH[i] - LOW[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// One polygon per triangle. With `overlay` the fill follows a linear map from its min to its max.
pub fn render_mesh_svg(mesh: &Mesh, overlay: Option<&[f64]>) -> String {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in mesh.vertices() {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let extent = (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
    let scale = SVG_SIZE / extent;
    let (w, h) = ((x1 - x0) * scale, (y1 - y0) * scale);
    let legend = if overlay.is_some() { LEGEND_HEIGHT } else { 0.0 };
    let range = overlay.map(|v| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    });

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {:.3} {:.3}\" width=\"{:.0}\" height=\"{:.0}\">",
        w,
        h + legend,
        w,
        h + legend
    );
    let stroke = (0.5f64).min(200.0 / (mesh.num_triangles() as f64).sqrt().max(1.0));
    let _ = writeln!(out, "<g stroke=\"#000000\" stroke-width=\"{stroke:.3}\" stroke-linejoin=\"round\">");
    for t in 0..mesh.num_triangles() {
        let pts: Vec<String> =
            mesh.corners(t).iter().map(|p| format!("{:.4},{:.4}", (p.x - x0) * scale, (y1 - p.y) * scale)).collect();
        let fill = match (overlay, range) {
            (Some(v), Some((lo, hi))) => color(if hi > lo { (v[t] - lo) / (hi - lo) } else { 0.0 }),
            _ => "#ffffff".to_string(),
        };
        let _ = writeln!(out, "<polygon points=\"{}\" fill=\"{fill}\"/>", pts.join(" "));
    }
    out.push_str("</g>\n");
    if let Some((lo, hi)) = range {
        let _ = writeln!(
            out,
            "<defs><linearGradient id=\"cmap\"><stop offset=\"0\" stop-color=\"{}\"/><stop offset=\"1\" stop-color=\"{}\"/></linearGradient></defs>",
            color(0.0),
            color(1.0)
        );
        let top = h + 10.0;
        let _ = writeln!(
            out,
            "<rect x=\"10\" y=\"{top:.3}\" width=\"{:.3}\" height=\"16\" fill=\"url(#cmap)\"/>",
            (w - 20.0).max(1.0)
        );
        let ty = top + 36.0;
        let _ = writeln!(
            out,
            "<text x=\"10\" y=\"{ty:.3}\" font-size=\"14\" font-family=\"monospace\">min {lo:.6e}</text>"
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.3}\" y=\"{ty:.3}\" font-size=\"14\" font-family=\"monospace\" text-anchor=\"end\">max {hi:.6e}</text>",
            w - 10.0
        );
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub problem: String,
    pub estimator: String,
    pub theta: f64,
    pub max_dof: usize,
    pub solver_tol: f64,
    pub max_iter: usize,
    pub max_steps: usize,
    /// The loop uses no random numbers, so identical manifests give identical outputs.
    pub deterministic: bool,
    pub outputs: Vec<String>,
    pub version: String,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::Parse { line: e.line(), msg: e.to_string() })
    }
}
