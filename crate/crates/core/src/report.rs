//! Curve tables and figures.
//!
//! CSV columns are frozen as `size,arm,mean,min,max,folds`, one row per
//! summary cell, values to four decimals. The SVG is rendered from the
//! same rounded values, so re-rendering from a reloaded CSV reproduces it
//! byte for byte. x is log-scaled training size, y is F1 on [0, 1]; the
//! plain arm is a solid line, the warm arm dashed, each over a shaded
//! min–max band.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::runner::{Arm, CurveSummary};

pub const CSV_HEADER: &str = "size,arm,mean,min,max,folds";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub size: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveArtifact {
    pub task_id: String,
    /// Ordered plain, warm; only arms with data.
    pub series: Vec<(Arm, Vec<CurvePoint>)>,
}

fn round4(v: f64) -> f64 {
    format!("{v:.4}").parse().expect("formatted float parses")
}

impl CurveArtifact {
    pub fn from_summary(summary: &CurveSummary) -> Self {
        let series = [Arm::Plain, Arm::Warm]
            .into_iter()
            .filter_map(|arm| {
                let pts: Vec<CurvePoint> = summary
                    .series(arm)
                    .map(|c| CurvePoint {
                        size: c.size,
                        mean: round4(c.mean),
                        min: round4(c.min),
                        max: round4(c.max),
                        folds: c.folds,
                    })
                    .collect();
                (!pts.is_empty()).then_some((arm, pts))
            })
            .collect();
        CurveArtifact {
            task_id: summary.task_id.clone(),
            series,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (arm, pts) in &self.series {
            for p in pts {
                let _ = writeln!(
                    out,
                    "{},{},{:.4},{:.4},{:.4},{}",
                    p.size, arm, p.mean, p.min, p.max, p.folds
                );
            }
        }
        out
    }

    /// Parses a CSV written by [`CurveArtifact::to_csv`].
    pub fn from_csv(task_id: &str, raw: &str) -> Result<Self> {
        let mut lines = raw.lines();
        match lines.next() {
            Some(h) if h == CSV_HEADER => {}
            _ => {
                return Err(Error::parse(
                    "<csv>",
                    1,
                    format!("expected header {CSV_HEADER:?}"),
                ))
            }
        }
        let mut plain = Vec::new();
        let mut warm = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let err = |m: &str| Error::parse("<csv>", lineno, m.to_string());
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(err("expected 6 columns"));
            }
            let num = |s: &str| -> Result<f64> {
                let v: f64 = s.parse().map_err(|_| err("bad number"))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(err("score outside [0, 1]"));
                }
                Ok(v)
            };
            let p = CurvePoint {
                size: cols[0].parse().map_err(|_| err("bad size"))?,
                mean: num(cols[2])?,
                min: num(cols[3])?,
                max: num(cols[4])?,
                folds: cols[5].parse().map_err(|_| err("bad fold count"))?,
            };
            if !(p.min <= p.mean && p.mean <= p.max) {
                return Err(err("expected min <= mean <= max"));
            }
            let series = match cols[1].parse::<Arm>()? {
                Arm::Plain => &mut plain,
                Arm::Warm => &mut warm,
            };
            if series.last().is_some_and(|q: &CurvePoint| q.size >= p.size) {
                return Err(err("sizes must increase within an arm"));
            }
            series.push(p);
        }
        let series = [(Arm::Plain, plain), (Arm::Warm, warm)]
            .into_iter()
            .filter(|(_, p)| !p.is_empty())
            .collect();
        Ok(CurveArtifact {
            task_id: task_id.to_string(),
            series,
        })
    }

    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const LEFT: f64 = 60.0;
        const RIGHT: f64 = 20.0;
        const TOP: f64 = 30.0;
        const BOTTOM: f64 = 50.0;
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;

        let sizes = self
            .series
            .iter()
            .flat_map(|(_, p)| p.iter().map(|q| q.size));
        let (lo, hi) = sizes.fold((usize::MAX, 0), |(lo, hi), s| (lo.min(s), hi.max(s)));
        let (lx, hx) = if lo > hi {
            (0.0, 1.0)
        } else {
            let (a, b) = ((lo.max(1) as f64).log10(), (hi.max(1) as f64).log10());
            if b > a {
                (a, b)
            } else {
                (a - 0.5, b + 0.5)
            }
        };
        let x = |size: usize| LEFT + ((size.max(1) as f64).log10() - lx) / (hx - lx) * pw;
        let y = |v: f64| TOP + (1.0 - v) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
            W / 2.0,
            xml_escape(&self.task_id)
        );
        for tick in 0..=5 {
            let v = tick as f64 / 5.0;
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT:.1}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                y(v) + 4.0,
                yy = y(v)
            );
        }
        let mut ticks: Vec<usize> = self
            .series
            .iter()
            .flat_map(|(_, p)| p.iter().map(|q| q.size))
            .collect();
        ticks.sort_unstable();
        ticks.dedup();
        for t in ticks {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{t}</text>"#,
                x(t),
                TOP + ph + 16.0
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT:.1}" y="{TOP:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">training examples</text>"#,
            LEFT + pw / 2.0,
            H - 10.0
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">F1</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0
        );

        for (i, (arm, pts)) in self.series.iter().enumerate() {
            let (color, dash) = match arm {
                Arm::Plain => ("#1f77b4", ""),
                Arm::Warm => ("#ff7f0e", r#" stroke-dasharray="6 4""#),
            };
            let upper = pts
                .iter()
                .map(|p| format!("{:.2},{:.2}", x(p.size), y(p.max)));
            let lower = pts
                .iter()
                .rev()
                .map(|p| format!("{:.2},{:.2}", x(p.size), y(p.min)));
            let band: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(
                s,
                r#"<polygon class="band {arm}" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                band.join(" ")
            );
            let line: Vec<String> = pts
                .iter()
                .map(|p| format!("{:.2},{:.2}", x(p.size), y(p.mean)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline class="mean {arm}" points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
                line.join(" ")
            );
            let ly = TOP + 14.0 + 16.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{arm}</text>"#,
                LEFT + pw - 90.0,
                LEFT + pw - 60.0,
                LEFT + pw - 54.0,
                ly + 4.0
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
