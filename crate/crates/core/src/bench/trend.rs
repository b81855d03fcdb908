//! Ordering verdicts across a one-knob sweep. Milliseconds are reported,
//! never asserted.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bench::{Pass, ScenarioRun};
use crate::error::{Error, Result};

/// Relative slack on the linear-in-`x` checks.
pub const LINEAR_TOLERANCE: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knob {
    /// `d`
    MaskDistance,
    /// `x`
    RaysPerFrame,
    /// Grid resolution; the knob value is the total coarse cell count.
    Size,
}

impl Knob {
    pub fn label(self) -> &'static str {
        match self {
            Knob::MaskDistance => "d",
            Knob::RaysPerFrame => "x",
            Knob::Size => "n",
        }
    }

    /// Report column header for the knob values.
    pub fn column(self) -> &'static str {
        match self {
            Knob::Size => "cells",
            k => k.label(),
        }
    }

    pub fn format(self, v: f64) -> String {
        if v.is_infinite() {
            "inf".into()
        } else {
            format!("{v}")
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrendRow {
    pub scenario_id: String,
    pub value: f64,
    pub v_ns: u64,
    pub jf_ns: u64,
    pub rt_ns: u64,
    pub dl_ns: u64,
    pub masked_texels: u64,
    pub rays_traced: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrendReport {
    pub knob: Knob,
    /// Sorted by knob value.
    pub rows: Vec<TrendRow>,
    pub verdicts: Vec<Verdict>,
    pub threads: usize,
}

impl TrendReport {
    pub fn all_hold(&self) -> bool {
        self.verdicts.iter().all(|v| v.holds)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

impl fmt::Display for TrendReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = |ns: u64| ns as f64 / 1e6;
        writeln!(f, "sweep over {} ({} worker thread(s); timings are medians)", self.knob.label(), self.threads)?;
        writeln!(
            f,
            "{:>10} {:>10} {:>10} {:>10} {:>10} {:>12} {:>14}",
            self.knob.column(),
            "V ms",
            "JF ms",
            "RT ms",
            "DL ms",
            "masked",
            "rays/frame"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>10} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>12} {:>14}",
                self.knob.format(r.value),
                ms(r.v_ns),
                ms(r.jf_ns),
                ms(r.rt_ns),
                ms(r.dl_ns),
                r.masked_texels,
                r.rays_traced
            )?;
        }
        for v in &self.verdicts {
            writeln!(f, "[{}] {}: {}", if v.holds { "ok" } else { "NO" }, v.name, v.detail)?;
        }
        Ok(())
    }
}

/// The knob that varies across `runs`, or an error when anything else differs too.
fn detect_knob(runs: &[ScenarioRun]) -> Result<Knob> {
    let first = &runs[0].scenario;
    let mut knobs = Vec::new();
    for r in &runs[1..] {
        let s = &r.scenario;
        let mut a = first.clone();
        let mut b = s.clone();
        let (da, db) = (a.dims()?, b.dims()?);
        if da != db && !knobs.contains(&Knob::Size) {
            knobs.push(Knob::Size);
        }
        if a.rays_per_frame != b.rays_per_frame && !knobs.contains(&Knob::RaysPerFrame) {
            knobs.push(Knob::RaysPerFrame);
        }
        if a.mask_distance != b.mask_distance && !knobs.contains(&Knob::MaskDistance) {
            knobs.push(Knob::MaskDistance);
        }
        for x in [&mut a, &mut b] {
            x.id.clear();
            x.output_dir = None;
            x.size = None;
            x.coarse_dims = None;
            x.fine_dims = None;
            x.rays_per_frame = 0;
            x.mask_distance = 0.0;
        }
        if a != b {
            return Err(Error::Config(format!(
                "scenarios {:?} and {:?} differ in more than the swept knob",
                first.id, s.id
            )));
        }
    }
    match knobs.as_slice() {
        [k] => Ok(*k),
        [] => Err(Error::Config("scenarios do not vary any knob".into())),
        _ => Err(Error::Config(format!("mixed-knob input: {knobs:?} all vary"))),
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

/// Least-squares line through `(x, y)`.
fn fit_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = pts.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

pub fn trend_report(runs: &[ScenarioRun]) -> Result<TrendReport> {
    if runs.len() < 2 {
        return Err(Error::Config("a trend needs at least two scenarios".into()));
    }
    let knob = detect_knob(runs)?;
    let mut rows: Vec<TrendRow> = runs
        .iter()
        .map(|r| {
            let s = &r.scenario;
            let value = match knob {
                Knob::MaskDistance => s.mask_distance,
                Knob::RaysPerFrame => s.rays_per_frame as f64,
                Knob::Size => s.dims().map(|(c, _)| c.iter().product::<usize>() as f64).unwrap_or(0.0),
            };
            let last = r.timings.last().copied().unwrap_or_default();
            TrendRow {
                scenario_id: s.id.clone(),
                value,
                v_ns: r.median(Pass::V).as_nanos() as u64,
                jf_ns: r.median(Pass::JF).as_nanos() as u64,
                rt_ns: r.median(Pass::RT).as_nanos() as u64,
                dl_ns: r.median(Pass::DL).as_nanos() as u64,
                masked_texels: last.masked_texels,
                rays_traced: last.rays_traced,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    if rows.windows(2).any(|w| w[0].value == w[1].value) {
        return Err(Error::Config("two scenarios share the same knob value".into()));
    }

    let mut verdicts = Vec::new();
    let col = |f: fn(&TrendRow) -> u64| rows.iter().map(|r| f(r) as f64).collect::<Vec<_>>();
    match knob {
        Knob::MaskDistance => {
            let rays = col(|r| r.rays_traced);
            verdicts.push(Verdict {
                name: "rays traced strictly increase with d".into(),
                holds: strictly_increasing(&rays),
                detail: format!("{rays:?}"),
            });
            let masked = col(|r| r.masked_texels);
            verdicts.push(Verdict {
                name: "masked texels never decrease with d".into(),
                holds: masked.windows(2).all(|w| w[1] >= w[0]),
                detail: format!("{masked:?}"),
            });
            let rt = col(|r| r.rt_ns);
            verdicts.push(Verdict {
                name: "RT time increases with d".into(),
                holds: strictly_increasing(&rt),
                detail: format!("ms {:?}", rt.iter().map(|v| v / 1e6).collect::<Vec<_>>()),
            });
        }
        Knob::RaysPerFrame => {
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.value, r.rt_ns as f64)).collect();
            let (a, b) = fit_line(&pts);
            let worst = pts
                .iter()
                .map(|&(x, y)| ((y - (a + b * x)) / (a + b * x)).abs())
                .fold(0.0, f64::max);
            verdicts.push(Verdict {
                name: "RT time linear in x".into(),
                holds: b > 0.0 && worst <= LINEAR_TOLERANCE,
                detail: format!(
                    "fit {:.3} ms + {:.3} ms per ray, worst deviation {:.0}%",
                    a / 1e6,
                    b / 1e6,
                    worst * 100.0
                ),
            });
            let at = |x: f64| rows.iter().find(|r| r.value == x).map(|r| r.rt_ns as f64);
            if let (Some(r5), Some(r10)) = (at(5.0), at(10.0)) {
                let ratio = r10 / r5;
                verdicts.push(Verdict {
                    name: "RT at x=10 about twice x=5".into(),
                    holds: (ratio / 2.0 - 1.0).abs() <= LINEAR_TOLERANCE,
                    detail: format!("ratio {ratio:.2}"),
                });
            }
            let exact = rows.iter().all(|r| r.rays_traced == r.value as u64 * r.masked_texels);
            verdicts.push(Verdict {
                name: "rays traced = x * masked texels".into(),
                holds: exact,
                detail: format!("{} of {} rows", rows.iter().filter(|r| r.rays_traced == r.value as u64 * r.masked_texels).count(), rows.len()),
            });
        }
        Knob::Size => {
            let jf = col(|r| r.jf_ns);
            verdicts.push(Verdict {
                name: "JF time increases with size".into(),
                holds: strictly_increasing(&jf),
                detail: format!("ms {:?}", jf.iter().map(|v| v / 1e6).collect::<Vec<_>>()),
            });
            let growth: Vec<String> = rows
                .windows(2)
                .map(|w| {
                    format!(
                        "x{:.1} time for x{:.0} cells",
                        w[1].jf_ns as f64 / w[0].jf_ns.max(1) as f64,
                        w[1].value / w[0].value
                    )
                })
                .collect();
            let superlinear = rows
                .windows(2)
                .all(|w| w[1].jf_ns as f64 / w[0].jf_ns.max(1) as f64 > w[1].value / w[0].value);
            verdicts.push(Verdict {
                name: "JF time superlinear in cell count".into(),
                holds: superlinear,
                detail: growth.join(", "),
            });
        }
    }
    Ok(TrendReport {
        knob,
        rows,
        verdicts,
        threads: runs[0].threads,
    })
}
