//! CSV and SVG writers for run artifacts.
//!
//! Floats are written as `{:.8e}`, so equal inputs give byte-identical files.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::analysis::{ExplorationRow, TrajectoryPoint};
use crate::experiment::{ComparisonRow, LearningCurve};
use crate::learners::{write_checkpoint, Checkpoint};

fn num(x: f64) -> String {
    format!("{x:.8e}")
}

/// `repetition,episode,reward`, one row per episode of each repetition.
pub fn write_curve(w: &mut impl Write, curve: &LearningCurve) -> io::Result<()> {
    writeln!(w, "repetition,episode,reward")?;
    for (rep, rewards) in curve.rewards.iter().enumerate() {
        for (e, r) in rewards.iter().enumerate() {
            writeln!(w, "{rep},{e},{}", num(*r))?;
        }
    }
    Ok(())
}

/// Per-episode median, min and max across repetitions.
pub fn write_curve_stats(w: &mut impl Write, curve: &LearningCurve) -> io::Result<()> {
    writeln!(w, "episode,median,min,max,mean")?;
    let (med, lo, hi, mean) = (curve.median(), curve.min(), curve.max(), curve.mean());
    for e in 0..curve.episodes() {
        writeln!(w, "{e},{},{},{},{}", num(med[e]), num(lo[e]), num(hi[e]), num(mean[e]))?;
    }
    Ok(())
}

/// Table-style summary: final reward and episodes to threshold, both medians
/// over repetitions. An empty episodes field means the threshold was never
/// reached by the median curve.
pub fn write_summary(w: &mut impl Write, rows: &[ComparisonRow], threshold: f64) -> io::Result<()> {
    writeln!(
        w,
        "controller,learner,schedule,final_reward_median,episodes_to_threshold_median,threshold"
    )?;
    for r in rows {
        let ett = r.episodes_to_threshold_median.map(num).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{ett},{}",
            r.controller,
            r.learner,
            r.schedule,
            num(r.final_reward_median),
            num(threshold)
        )?;
    }
    Ok(())
}

pub fn write_landscape(w: &mut impl Write, points: &[(f64, f64)]) -> io::Result<()> {
    writeln!(w, "scale,reward")?;
    for (s, r) in points {
        writeln!(w, "{},{}", num(*s), num(*r))?;
    }
    Ok(())
}

pub fn write_exploration(w: &mut impl Write, rows: &[ExplorationRow]) -> io::Result<()> {
    writeln!(w, "episode,sigma_swing,sigma_lift")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.episode, num(r.swing), num(r.lift))?;
    }
    Ok(())
}

pub fn write_trajectories(w: &mut impl Write, points: &[TrajectoryPoint]) -> io::Result<()> {
    writeln!(w, "episode,t,joint,value")?;
    for p in points {
        writeln!(w, "{},{},{},{}", p.episode, p.t, p.joint, num(p.value))?;
    }
    Ok(())
}

/// Feature trace with a per-step flag for non-neighbour co-activation.
pub fn write_interference(
    w: &mut impl Write,
    trace: &[Vec<f64>],
    overlap: &[bool],
) -> io::Result<()> {
    let n = trace.first().map_or(0, Vec::len);
    let header: Vec<String> = (0..n).map(|k| format!("basis_{k}")).collect();
    writeln!(w, "t,{},non_neighbor_overlap", header.join(","))?;
    for (t, (row, &o)) in trace.iter().zip(overlap).enumerate() {
        let vals: Vec<String> = row.iter().map(|&v| num(v)).collect();
        writeln!(w, "{t},{},{}", vals.join(","), u8::from(o))?;
    }
    Ok(())
}

/// Writes `contents` produced by `f` to `path` in one go.
pub fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> io::Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf)
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> crate::Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, ck)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Axis range of a plot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub label: &'static str,
    pub min: f64,
    pub max: f64,
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Minimal line plot with fixed axes; points outside the range are clamped
/// to the frame.
pub fn svg_line_plot(title: &str, x: Axis, y: Axis, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let px = |v: f64| {
        let f = if x.max > x.min { (v - x.min) / (x.max - x.min) } else { 0.0 };
        MARGIN + f.clamp(0.0, 1.0) * (SVG_W - 2.0 * MARGIN)
    };
    let py = |v: f64| {
        let f = if y.max > y.min { (v - y.min) / (y.max - y.min) } else { 0.0 };
        SVG_H - MARGIN - f.clamp(0.0, 1.0) * (SVG_H - 2.0 * MARGIN)
    };
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    s += &format!("<text x=\"{}\" y=\"20\" text-anchor=\"middle\">{title}</text>\n", SVG_W / 2.0);
    s += &format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        SVG_W - 2.0 * MARGIN,
        SVG_H - 2.0 * MARGIN
    );
    s += &format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{} [{:.3}, {:.3}]</text>\n",
        SVG_W / 2.0,
        SVG_H - 15.0,
        x.label,
        x.min,
        x.max
    );
    s += &format!(
        "<text x=\"15\" y=\"{}\" transform=\"rotate(-90 15 {})\" text-anchor=\"middle\">{} [{:.3}, {:.3}]</text>\n",
        SVG_H / 2.0,
        SVG_H / 2.0,
        y.label,
        y.min,
        y.max
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let path: Vec<String> = pts.iter().map(|&(a, b)| format!("{:.2},{:.2}", px(a), py(b))).collect();
        s += &format!(
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        );
        s += &format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{colour}\">{name}</text>\n",
            MARGIN + 8.0,
            MARGIN + 16.0 * (i as f64 + 1.0)
        );
    }
    s += "</svg>\n";
    s
}

/// Episode vs median reward, y fixed to [-0.1, 0.5].
pub fn curve_svg(title: &str, curves: &[(&str, &LearningCurve)]) -> String {
    let episodes = curves.iter().map(|(_, c)| c.episodes()).max().unwrap_or(0);
    let series: Vec<(&str, Vec<(f64, f64)>)> = curves
        .iter()
        .map(|(n, c)| (*n, c.median().into_iter().enumerate().map(|(e, r)| (e as f64, r)).collect()))
        .collect();
    svg_line_plot(
        title,
        Axis { label: "episode", min: 0.0, max: episodes.max(1) as f64 },
        Axis { label: "reward", min: -0.1, max: 0.5 },
        &series,
    )
}

/// Scale vs reward over the scanned grid, y fixed to [-0.1, 0.5].
pub fn landscape_svg(title: &str, points: &[(f64, f64)]) -> String {
    let lo = points.first().map_or(-1.0, |p| p.0);
    let hi = points.last().map_or(1.0, |p| p.0);
    svg_line_plot(
        title,
        Axis { label: "step scale", min: lo, max: hi },
        Axis { label: "reward", min: -0.1, max: 0.5 },
        &[("reward", points.to_vec())],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_csv_layout() {
        let curve = LearningCurve { rewards: vec![vec![0.5, 1.0], vec![0.25, -2.0]] };
        let mut buf = Vec::new();
        write_curve(&mut buf, &curve).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "repetition,episode,reward");
        assert_eq!(lines[1], "0,0,5.00000000e-1");
        assert_eq!(lines[4], "1,1,-2.00000000e0");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn empty_curve_has_header_only() {
        let mut buf = Vec::new();
        write_curve_stats(&mut buf, &LearningCurve::default()).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "episode,median,min,max,mean\n");
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = landscape_svg("t", &[(-1.0, 0.0), (0.0, 0.1), (1.0, 9.0)]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
