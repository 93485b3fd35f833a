//! Trajectory CSV, key/value summaries and SVG line charts.

use std::fmt;
use std::io::Write;
use std::path::Path;

use gne_core::sim::Trajectory;

/// Column names for a trajectory with `m` outputs and `p` constraints.
pub fn csv_header(m: usize, p: usize, consensus: bool, tracking: bool) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=m).map(|i| format!("y_{i}")));
    h.extend((1..=p).map(|l| format!("margin_{l}")));
    h.push("phi".into());
    if consensus {
        h.push("consensus_err".into());
    }
    if tracking {
        h.push("z_err".into());
    }
    h
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        "nan".into()
    }
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, m: usize, p: usize, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(m, p, traj.consensus.is_some(), traj.tracking.is_some()))?;
    for s in 0..traj.len() {
        let mut row = vec![num(traj.times[s])];
        row.extend(traj.outputs[s].iter().map(|&v| num(v)));
        row.extend(traj.margins[s].iter().map(|&v| num(v)));
        row.push(num(traj.barrier[s]));
        if let Some(c) = &traj.consensus {
            row.push(num(c[s]));
        }
        if let Some(z) = &traj.tracking {
            row.push(num(z[s]));
        }
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Ordered `key=value` report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        let value = value.to_string().replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn set_list(&mut self, key: &str, values: impl IntoIterator<Item = f64>) {
        let v = values.into_iter().map(num).collect::<Vec<_>>().join(",");
        self.set(key, v);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Inverse of the `Display` form.
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { entries }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

pub const SVG_WIDTH: f64 = 800.0;
pub const SVG_HEIGHT: f64 = 500.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Polyline chart of several series against a shared time axis. Non-finite
/// values break the line.
pub fn line_chart(title: &str, times: &[f64], series: &[(String, Vec<f64>)]) -> String {
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let (pw, ph) = (SVG_WIDTH - left - right, SVG_HEIGHT - top - bottom);
    let t0 = times.first().copied().unwrap_or(0.0);
    let t1 = times.last().copied().unwrap_or(1.0);
    let t1 = if t1 > t0 { t1 } else { t0 + 1.0 };
    let finite = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(lo.is_finite() && hi.is_finite()) {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let sx = |t: f64| left + (t - t0) / (t1 - t0) * pw;
    let sy = |v: f64| top + (hi - v) / (hi - lo) * ph;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        left + pw / 2.0,
        escape(title)
    ));
    s.push_str(&format!(
        "<rect x=\"{left}\" y=\"{top}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let t = t0 + f * (t1 - t0);
        let v = lo + f * (hi - lo);
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{:.3}</text>\n",
            sx(t),
            top + ph + 18.0,
            t
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{:.4}</text>\n",
            left - 6.0,
            sy(v) + 4.0,
            v
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">t</text>\n",
        left + pw / 2.0,
        SVG_HEIGHT - 12.0
    ));
    for (idx, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut runs: Vec<Vec<String>> = vec![Vec::new()];
        for (&t, &v) in times.iter().zip(values) {
            if v.is_finite() {
                runs.last_mut().unwrap().push(format!("{:.2},{:.2}", sx(t), sy(v)));
            } else if !runs.last().unwrap().is_empty() {
                runs.push(Vec::new());
            }
        }
        for run in runs.iter().filter(|r| !r.is_empty()) {
            s.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                run.join(" ")
            ));
        }
        let ly = top + 14.0 + 16.0 * idx as f64;
        s.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            left + pw + 10.0,
            left + pw + 30.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            left + pw + 36.0,
            ly + 4.0,
            escape(name)
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `outputs.svg`, `margins.svg` and, when recorded, `consensus.svg`.
pub fn write_plots(dir: &Path, traj: &Trajectory) -> std::io::Result<Vec<String>> {
    let column = |f: &dyn Fn(usize) -> f64| (0..traj.len()).map(f).collect::<Vec<_>>();
    let m = traj.outputs.first().map_or(0, |y| y.len());
    let p = traj.margins.first().map_or(0, |g| g.len());
    let outputs: Vec<_> = (0..m).map(|i| (format!("y_{}", i + 1), column(&|s| traj.outputs[s][i]))).collect();
    let margins: Vec<_> = (0..p).map(|l| (format!("margin_{}", l + 1), column(&|s| traj.margins[s][l]))).collect();
    let mut written = Vec::new();
    std::fs::write(dir.join("outputs.svg"), line_chart("outputs", &traj.times, &outputs))?;
    written.push("outputs.svg".to_string());
    std::fs::write(dir.join("margins.svg"), line_chart("constraint margins -g(y)", &traj.times, &margins))?;
    written.push("margins.svg".to_string());
    if traj.consensus.is_some() || traj.tracking.is_some() {
        let mut extra = Vec::new();
        if let Some(c) = &traj.consensus {
            extra.push(("consensus_err".to_string(), c.clone()));
        }
        if let Some(z) = &traj.tracking {
            extra.push(("z_err".to_string(), z.clone()));
        }
        std::fs::write(dir.join("consensus.svg"), line_chart("estimate errors", &traj.times, &extra))?;
        written.push("consensus.svg".to_string());
    }
    Ok(written)
}
