use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dataset::{ClassLabel, EpochSet};
use crate::error::{Error, Result};
use crate::sigproc::{welch_psd, WelchConfig};
use crate::tensor::Tensor;

/// Upper frequency shown in the chart.
pub const PLOT_MAX_HZ: f64 = 40.0;
pub const MU_BAND: (f64, f64) = (8.0, 12.0);

/// Mean spectral density per class, averaged over trials and channels.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdTable {
    pub frequencies: Vec<f64>,
    pub classes: Vec<ClassLabel>,
    /// `power[class][bin]`.
    pub power: Vec<Vec<f64>>,
}

/// Computes the table for `classes` (all classes present when `None`).
pub fn class_psd(set: &EpochSet, classes: Option<&[ClassLabel]>) -> Result<PsdTable> {
    let classes: Vec<ClassLabel> = match classes {
        Some(c) => c.to_vec(),
        None => ClassLabel::ALL.iter().copied().filter(|l| set.labels.contains(l)).collect(),
    };
    if classes.is_empty() {
        return Err(Error::Data("no labelled trials to analyse".into()));
    }
    let fs = set.sampling_rate;
    let mut cfg = WelchConfig::one_second(fs);
    cfg.segment = cfg.segment.min(set.samples());
    let (ch, samples) = (set.channels(), set.samples());
    let mut frequencies = Vec::new();
    let mut power = Vec::with_capacity(classes.len());
    for &class in &classes {
        let trials: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i] == class).collect();
        if trials.is_empty() {
            return Err(Error::Data(format!("class {class} has no trials")));
        }
        let mut acc: Vec<f64> = Vec::new();
        for &i in &trials {
            let est = welch_psd(&Tensor::new(&[ch, samples], set.trial(i).to_vec())?, fs, cfg)?;
            let bins = est.frequencies.len();
            if acc.is_empty() {
                acc = vec![0.0; bins];
                frequencies = est.frequencies.clone();
            }
            for row in est.power.data().chunks(bins) {
                for (a, p) in acc.iter_mut().zip(row) {
                    *a += p;
                }
            }
        }
        let denom = (trials.len() * ch) as f64;
        power.push(acc.into_iter().map(|v| v / denom).collect());
    }
    Ok(PsdTable {
        frequencies,
        classes,
        power,
    })
}

impl PsdTable {
    pub fn csv(&self) -> String {
        let mut out = String::from("frequency");
        for c in &self.classes {
            out.push(',');
            out.push_str(c.name());
        }
        out.push('\n');
        for (k, f) in self.frequencies.iter().enumerate() {
            let _ = write!(out, "{f}");
            for row in &self.power {
                let _ = write!(out, ",{:e}", row[k]);
            }
            out.push('\n');
        }
        out
    }

    /// Line chart of every class up to [`PLOT_MAX_HZ`], mu band shaded.
    pub fn svg(&self) -> String {
        let (w, h, pad) = (640.0, 360.0, 48.0);
        let visible: Vec<usize> = (0..self.frequencies.len())
            .filter(|&k| self.frequencies[k] <= PLOT_MAX_HZ)
            .collect();
        let ymax = self
            .power
            .iter()
            .flat_map(|r| visible.iter().map(move |&k| r[k]))
            .fold(0.0f64, f64::max);
        let ymax = if ymax > 0.0 { ymax } else { 1.0 };
        let x = |f: f64| pad + (w - 2.0 * pad) * f / PLOT_MAX_HZ;
        let y = |p: f64| h - pad - (h - 2.0 * pad) * p / ymax;
        let palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22"];

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{pad}" width="{:.1}" height="{:.1}" fill="#eeeeee"/>"##,
            x(MU_BAND.0),
            x(MU_BAND.1) - x(MU_BAND.0),
            h - 2.0 * pad
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">mu 8-12 Hz</text>"#, x(MU_BAND.0), pad - 6.0);
        let _ = writeln!(
            s,
            r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{0}" stroke="black"/>"#,
            h - pad,
            w - pad
        );
        for tick in (0..=PLOT_MAX_HZ as usize).step_by(10) {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{tick}</text>"#, x(tick as f64), h - pad + 16.0);
        }
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Hz</text>"#, w / 2.0, h - 10.0);
        for (i, (class, row)) in self.classes.iter().zip(&self.power).enumerate() {
            let colour = palette[i % palette.len()];
            let points: Vec<String> = visible
                .iter()
                .map(|&k| format!("{:.2},{:.2}", x(self.frequencies[k]), y(row[k])))
                .collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" points="{}"/>"#, points.join(" "));
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" fill="{colour}">{}</text>"#,
                w - pad - 90.0,
                pad + 14.0 * (i as f64 + 1.0),
                class.name()
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Writes `psd.csv` and `psd.svg` into `dir`.
pub fn psd_report(set: &EpochSet, classes: Option<&[ClassLabel]>, dir: &Path) -> Result<PsdTable> {
    let table = class_psd(set, classes)?;
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (name, body) in [("psd.csv", table.csv()), ("psd.svg", table.svg())] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|source| Error::Io { path, source })?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_signal_gives_flat_zero_curves() {
        let set = EpochSet::new(
            Tensor::zeros(&[4, 2, 500]),
            vec![ClassLabel::Rest, ClassLabel::Grasp, ClassLabel::Rest, ClassLabel::Grasp],
            "s",
            250.0,
        )
        .unwrap();
        let t = class_psd(&set, None).unwrap();
        assert_eq!(t.classes, vec![ClassLabel::Grasp, ClassLabel::Rest]);
        assert!(t.power.iter().flatten().all(|&p| p == 0.0));
        let csv = t.csv();
        assert!(csv.lines().all(|l| l.split(',').count() == 3));
        assert!(t.svg().contains("mu 8-12 Hz"));
        assert!(class_psd(&set, Some(&[ClassLabel::Twist])).is_err());
    }
}
