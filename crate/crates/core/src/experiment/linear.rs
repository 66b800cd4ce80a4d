//! Linear-stability tables and α sweeps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::config::{parse_index_list, parse_real_list, rate_override, Config, Resolver};
use super::table::{Cell, TableResult};
use super::{grid_value, in_pool};
use crate::collision::{rate_ladder, trt1, trt2, RelaxationVector, UtildePolicy};
use crate::equilibrium::EquilibriumKind;
use crate::error::{Error, Result};
use crate::moments::{Family, MomentBasis};
use crate::stability::{KScan, ShiftPolicy, StabilityProblem};

/// Which pair of rates the ladder indices `(m, n)` drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrtKind {
    /// `m → s_e`, `n → s_ν`.
    Trt1,
    /// `m → s_e`, `n → s_p`.
    Trt2,
}

impl TrtKind {
    pub fn rates(self, m: u32, n: u32) -> Result<RelaxationVector> {
        self.pair(rate_ladder(m), rate_ladder(n))
    }

    /// Rates from `s_e` and the second rate (`s_ν` or `s_p`).
    pub fn pair(self, s_e: f64, second: f64) -> Result<RelaxationVector> {
        match self {
            TrtKind::Trt1 => trt1(s_e, second),
            TrtKind::Trt2 => trt2(s_e, second),
        }
    }

    /// Config key and label of the second rate.
    fn second_rate(self) -> (&'static str, &'static str) {
        match self {
            TrtKind::Trt1 => ("relaxation.s_nu", "s_nu"),
            TrtKind::Trt2 => ("relaxation.s_p", "s_p"),
        }
    }
}

impl fmt::Display for TrtKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrtKind::Trt1 => "trt1",
            TrtKind::Trt2 => "trt2",
        })
    }
}

impl FromStr for TrtKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "trt1" => Ok(TrtKind::Trt1),
            "trt2" => Ok(TrtKind::Trt2),
            other => Err(Error::Config(format!("unknown relaxation type `{other}`"))),
        }
    }
}

/// Frame velocity of the linearized problem from the nonlinear policy name.
pub fn shift_policy(p: UtildePolicy) -> ShiftPolicy {
    match p {
        UtildePolicy::Zero => ShiftPolicy::Zero,
        UtildePolicy::Fluid => ShiftPolicy::EqualsV,
        UtildePolicy::ScaledFluid(c) => ShiftPolicy::ScaledV(c),
        UtildePolicy::Fixed(w) => ShiftPolicy::Fixed(w),
    }
}

/// Settings shared by every max-speed search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedSearch {
    pub scan: KScan,
    pub tol: f64,
    pub v_cap: f64,
    pub theta: f64,
}

impl SpeedSearch {
    fn resolve(r: &mut Resolver) -> Result<Self> {
        let kgrid: usize = r.get("experiment.kgrid", 64)?;
        let tol: f64 = r.get("experiment.tol", 0.01)?;
        let v_cap: f64 = r.get("experiment.v_cap", 1.0)?;
        let theta: f64 = r.get("experiment.theta", 0.0)?;
        if !(tol > 0.0) || !(v_cap >= 0.0) {
            return Err(Error::Config(format!("need tol > 0 and v_cap >= 0, got {tol} and {v_cap}")));
        }
        let scan = KScan::new(kgrid).map_err(|e| Error::Config(e.to_string()))?;
        Ok(SpeedSearch {
            scan,
            tol,
            v_cap,
            theta,
        })
    }

    /// Max stable speed on the `tol` grid, or a NaN cell on failure.
    pub fn cell(&self, basis: MomentBasis, kind: EquilibriumKind, rates: Result<RelaxationVector>, policy: ShiftPolicy) -> Cell {
        let run = || -> Result<f64> {
            let prob = StabilityProblem::unit(basis, kind, rates?, policy, self.theta)?;
            self.scan.max_stable_speed(&prob, self.tol, self.v_cap)
        };
        match run() {
            Ok(v) => Cell::Value(snap(v, self.tol)),
            Err(e) => {
                log::warn!("stability cell failed: {e}");
                Cell::Nan
            }
        }
    }
}

/// Removes accumulated float noise from a multiple of `step`.
fn snap(v: f64, step: f64) -> f64 {
    grid_value((v / step).round() as i64, step)
}

/// Labelled rates along one axis of a table.
pub type RateAxis = Vec<(String, f64)>;

/// The ladder `2 − 2⁻ⁱ` from `ladder_key`, or the single rate in `fixed_key`.
fn rate_axis(r: &mut Resolver, fixed_key: &str, label: &str, ladder_key: &str, index: &str) -> Result<RateAxis> {
    if let Some(s) = rate_override(r, fixed_key)? {
        return Ok(vec![(format!("{label}={s}"), s)]);
    }
    let ladder = r.get_with(ladder_key, "0..7", parse_index_list)?;
    Ok(ladder.into_iter().map(|i| (format!("{index}={i}"), rate_ladder(i))).collect())
}

/// Max stable speed over the `(m, n)` rate ladder.
///
/// `relaxation.s_e` replaces the `m` ladder by one column, and
/// `relaxation.s_nu` (TRT₁) or `relaxation.s_p` (TRT₂) the `n` ladder by one row.
#[derive(Debug, Clone)]
pub struct LinearTable {
    pub basis: MomentBasis,
    pub kind: EquilibriumKind,
    pub trt: TrtKind,
    pub policy: ShiftPolicy,
    /// Columns: `s_e`.
    pub columns: RateAxis,
    /// Rows: `s_ν` or `s_p`.
    pub rows: RateAxis,
    pub search: SpeedSearch,
    pub config: Config,
}

impl LinearTable {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let mut r = Resolver::new(cfg);
        let family: Family = r.get("family", Family::A)?;
        let alpha: f64 = r.get("alpha", 0.0)?;
        let kind: EquilibriumKind = r.get("equilibrium", EquilibriumKind::Truncated2)?;
        let trt: TrtKind = r.get("relaxation.type", TrtKind::Trt1)?;
        let policy = shift_policy(r.utilde(UtildePolicy::Zero)?);
        let (second_key, second_label) = trt.second_rate();
        let other = match trt {
            TrtKind::Trt1 => "relaxation.s_p",
            TrtKind::Trt2 => "relaxation.s_nu",
        };
        if cfg.get(other).is_some() {
            return Err(Error::Config(format!("`{other}` does not apply to {trt}")));
        }
        let columns = rate_axis(&mut r, "relaxation.s_e", "s_e", "experiment.m", "m")?;
        let rows = rate_axis(&mut r, second_key, second_label, "experiment.n", "n")?;
        let search = SpeedSearch::resolve(&mut r)?;
        Ok(LinearTable {
            basis: MomentBasis::new(family, alpha),
            kind,
            trt,
            policy,
            columns,
            rows,
            search,
            config: r.finish(),
        })
    }

    /// Rows are `n` (labelled by the index alone), columns `m`.
    pub fn run(&self, threads: Option<usize>) -> Result<TableResult> {
        let cells: Vec<(f64, f64)> = self
            .rows
            .iter()
            .flat_map(|&(_, b)| self.columns.iter().map(move |&(_, a)| (a, b)))
            .collect();
        let values: Vec<Cell> = in_pool(threads, || {
            cells
                .par_iter()
                .map(|&(a, b)| self.search.cell(self.basis, self.kind, self.trt.pair(a, b), self.policy))
                .collect()
        })?;
        let columns = self.columns.iter().map(|(l, _)| l.clone()).collect();
        let mut table = TableResult::new("stability table", "n", columns, self.config.clone());
        for (row, (label, _)) in values.chunks(self.columns.len()).zip(&self.rows) {
            let label = label.strip_prefix("n=").unwrap_or(label);
            table.push_row(label, row.to_vec(), 2);
        }
        Ok(table)
    }
}

/// One curve of an α sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curve {
    pub family: Family,
    pub policy: UtildePolicy,
    pub trt: TrtKind,
    pub m: u32,
    pub n: u32,
}

impl Curve {
    pub fn label(&self) -> String {
        format!("{} {} {} m={} n={}", self.family, self.policy, self.trt, self.m, self.n)
    }

    pub fn is_bgk(&self) -> bool {
        self.m == self.n
    }
}

impl fmt::Display for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}:{}", self.family, self.policy, self.trt, self.m, self.n)
    }
}

impl FromStr for Curve {
    type Err = Error;

    /// `family:utilde:trt:m:n`, e.g. `B:fluid:trt2:0:3`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::Config(format!("bad curve `{s}`, expected family:utilde:trt:m:n"));
        if parts.len() != 5 {
            return Err(bad());
        }
        Ok(Curve {
            family: parts[0].parse()?,
            policy: parts[1].parse()?,
            trt: parts[2].parse()?,
            m: parts[3].trim().parse().map_err(|_| bad())?,
            n: parts[4].trim().parse().map_err(|_| bad())?,
        })
    }
}

pub fn parse_curves(s: &str) -> Result<Vec<Curve>> {
    s.split(';').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

/// Every combination of family, frame, TRT type and `(m, n)` pair.
pub fn default_curves() -> Vec<Curve> {
    let mut out = Vec::new();
    for policy in [UtildePolicy::Zero, UtildePolicy::Fluid] {
        for family in [Family::A, Family::B] {
            for trt in [TrtKind::Trt1, TrtKind::Trt2] {
                for (m, n) in [(0, 3), (3, 0), (0, 7), (7, 0), (7, 7)] {
                    out.push(Curve {
                        family,
                        policy,
                        trt,
                        m,
                        n,
                    });
                }
            }
        }
    }
    out
}

/// Max stable speed as a function of α, one column per curve.
#[derive(Debug, Clone)]
pub struct AlphaSweep {
    pub alphas: Vec<f64>,
    pub curves: Vec<Curve>,
    pub kind: EquilibriumKind,
    pub search: SpeedSearch,
    pub config: Config,
}

impl AlphaSweep {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let mut r = Resolver::new(cfg);
        let alphas = r.get_with("experiment.alphas", "-1,-0.5,0,0.5,1", parse_real_list)?;
        for a in alphas.iter().filter(|a| a.abs() > 1.0) {
            log::warn!("alpha = {a} lies outside [-1, 1]");
        }
        let defaults = default_curves().iter().map(Curve::to_string).collect::<Vec<_>>().join(";");
        let curves = r.get_with("experiment.curves", &defaults, parse_curves)?;
        if curves.is_empty() {
            return Err(Error::Config("no curves to sweep".into()));
        }
        let kind: EquilibriumKind = r.get("equilibrium", EquilibriumKind::Truncated2)?;
        let search = SpeedSearch::resolve(&mut r)?;
        Ok(AlphaSweep {
            alphas,
            curves,
            kind,
            search,
            config: r.finish(),
        })
    }

    /// Rows are α, columns curves.
    pub fn run(&self, threads: Option<usize>) -> Result<TableResult> {
        let jobs: Vec<(f64, Curve)> = self
            .alphas
            .iter()
            .flat_map(|&a| self.curves.iter().map(move |&c| (a, c)))
            .collect();
        let values: Vec<Cell> = in_pool(threads, || {
            jobs.par_iter()
                .map(|&(alpha, c)| {
                    self.search.cell(
                        MomentBasis::new(c.family, alpha),
                        self.kind,
                        c.trt.rates(c.m, c.n),
                        shift_policy(c.policy),
                    )
                })
                .collect()
        })?;
        let columns = self.curves.iter().map(Curve::label).collect();
        let mut table = TableResult::new("stability alpha-sweep", "alpha", columns, self.config.clone());
        for (row, alpha) in values.chunks(self.curves.len()).zip(&self.alphas) {
            table.push_row(alpha.to_string(), row.to_vec(), 2);
        }
        Ok(table)
    }
}
