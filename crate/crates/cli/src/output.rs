//! Files written under the output root.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

pub struct Output {
    root: PathBuf,
    header: Vec<String>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

impl Output {
    pub fn new(cfg: &ExperimentConfig, command: &str) -> Result<Self, CliError> {
        let root = cfg.output_dir();
        fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        let g = &cfg.grid;
        let header = vec![
            format!("fixangle {}", env!("CARGO_PKG_VERSION")),
            format!("command {command}"),
            format!("config_sha256 {}", cfg.hash()),
            format!(
                "grid n={} h={} dt_factor={} half_width={} t0={} t_end={}",
                g.n, g.h, g.dt_factor, g.half_width, g.t0, g.t_end
            ),
        ];
        Ok(Self { root, header })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// CSV with `# key value` metadata lines ahead of the column header.
    pub fn csv(
        &self,
        name: &str,
        columns: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        let mut text = String::new();
        for line in &self.header {
            let _ = writeln!(text, "# {line}");
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(columns).map_err(|e| io_err(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| io_err(&path, e))?;
        }
        let body = w.into_inner().map_err(|e| io_err(&path, e))?;
        text.push_str(&String::from_utf8_lossy(&body));
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        let meta = serde_json::json!({
            "meta": self.header,
            "result": value,
        });
        let text = serde_json::to_string_pretty(&meta).map_err(|e| io_err(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    pub fn text(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}

/// Shortest round-trip form, so reruns produce identical bytes.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Polyline chart of `(x, y)` series; `log_y` plots `ln y` for positive values.
pub fn svg_chart(
    title: &str,
    x_label: &str,
    series: &[(&str, Vec<(f64, f64)>)],
    log_y: bool,
) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const M: f64 = 48.0;
    const COLORS: [&str; 6] = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
    ];
    let pts: Vec<(&str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|(name, s)| {
            let p = s
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
                .map(|&(x, y)| (x, if log_y { y.ln() } else { y }))
                .collect();
            (*name, p)
        })
        .collect();
    let all = pts.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-300 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-300 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{M}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - M,
        W - M,
        H - M
    );
    let _ = writeln!(
        s,
        r#"<line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>"#,
        H - M
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{M}" y="{}" text-anchor="middle">{x0:.3}</text>"#,
        H - M + 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x1:.3}</text>"#,
        W - M,
        H - M + 14.0
    );
    let ylab = if log_y { "ln " } else { "" };
    let _ = writeln!(s, r#"<text x="4" y="{}">{ylab}{y1:.3}</text>"#, M);
    let _ = writeln!(s, r#"<text x="4" y="{}">{ylab}{y0:.3}</text>"#, H - M);
    for (i, (name, p)) in pts.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let path: Vec<String> = p
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        for &(x, y) in p {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{c}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{c}">{name}</text>"#,
            W - M - 100.0,
            M + 14.0 * i as f64
        );
    }
    s.push_str("</svg>\n");
    s
}
