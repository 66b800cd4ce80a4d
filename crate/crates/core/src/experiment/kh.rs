//! Kelvin-Helmholtz stability scans and the vorticity run.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::config::{parse_real, parse_real_list, rate_override, Config, Resolver};
use super::table::{Cell, TableResult};
use super::{grid_value, in_pool};
use crate::collision::{trt1, viscosity_to_rates, UtildePolicy};
use crate::equilibrium::{EquilibriumKind, LatticeConstants};
use crate::error::{Error, Result};
use crate::lattice::{d2q9, Grid};
use crate::moments::{Family, MomentBasis};
use crate::sim::{dump_path, init_kelvin_helmholtz, write_fields_csv, BlowUp, RunOutcome, SchemeConfig, ShearLayer, Simulation};

/// The six scheme variants compared across meshes.
pub const MESH_VARIANTS: &str =
    "0:zero:truncated2;0:fluid:truncated2;0:zero:product4;0:fluid:product4;1:zero:truncated2;1:fluid:truncated2";

/// Variants of the frame-velocity scan; the frame is set by the scale.
pub const UTILDE_VARIANTS: &str = "0:fluid:truncated2;1:fluid:truncated2;0:fluid:product4";

/// Moment parameter, frame velocity and equilibrium of one scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KhVariant {
    pub alpha: f64,
    pub policy: UtildePolicy,
    pub kind: EquilibriumKind,
}

impl KhVariant {
    pub fn label(&self) -> String {
        format!("alpha={} utilde={} {}", self.alpha, self.policy, self.kind)
    }
}

impl fmt::Display for KhVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.alpha, self.policy, self.kind)
    }
}

impl FromStr for KhVariant {
    type Err = Error;

    /// `alpha:utilde:equilibrium`, e.g. `0:fluid:product4`.
    fn from_str(s: &str) -> Result<Self> {
        let (alpha, rest) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("bad variant `{s}`, expected alpha:utilde:equilibrium")))?;
        let (policy, kind) = rest
            .rsplit_once(':')
            .ok_or_else(|| Error::Config(format!("bad variant `{s}`, expected alpha:utilde:equilibrium")))?;
        Ok(KhVariant {
            alpha: parse_real(alpha)?,
            policy: policy.parse()?,
            kind: kind.parse()?,
        })
    }
}

pub fn parse_variants(s: &str) -> Result<Vec<KhVariant>> {
    let v: Vec<KhVariant> = s.split(';').filter(|t| !t.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(Error::Config("no scheme variants given".into()));
    }
    Ok(v)
}

/// Physical and run parameters common to every KH probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KhParams {
    pub family: Family,
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    pub iterations: u64,
    /// Blow-up threshold on `|u|` in units of `λ`.
    pub speed_limit: f64,
    /// Explicit rates that take the place of the viscosity mapping.
    pub s_e: Option<f64>,
    pub s_nu: Option<f64>,
}

impl KhParams {
    fn resolve(r: &mut Resolver, lambda_default: f64) -> Result<Self> {
        let trt: String = r.get("relaxation.type", "trt1".to_string())?;
        if !trt.eq_ignore_ascii_case("trt1") {
            return Err(Error::Config(format!("shear-layer runs use trt1 rates, got `{trt}`")));
        }
        let p = KhParams {
            family: r.get("family", Family::A)?,
            lambda: r.get("lambda", lambda_default)?,
            mu: r.get("viscosity.mu", 0.0366)?,
            nu: r.get("viscosity.nu", 1e-4)?,
            iterations: r.get("experiment.iterations", 2000)?,
            speed_limit: r.get("experiment.speed_limit", 10.0)?,
            s_e: rate_override(r, "relaxation.s_e")?,
            s_nu: rate_override(r, "relaxation.s_nu")?,
        };
        if !(p.lambda > 0.0) || !(p.mu >= 0.0) || !(p.nu >= 0.0) || p.iterations == 0 || !(p.speed_limit > 0.0) {
            return Err(Error::Config(format!("invalid run parameters {p:?}")));
        }
        Ok(p)
    }

    pub fn scheme(&self, variant: &KhVariant, n: usize, nu: f64) -> Result<SchemeConfig> {
        let vset = d2q9(self.lambda)?;
        let grid = Grid::square(n, self.lambda)?;
        let (s_e, s_nu) = self.rates(n, nu)?;
        SchemeConfig::new(
            MomentBasis::new(self.family, variant.alpha),
            variant.kind,
            trt1(s_e, s_nu)?,
            variant.policy,
            grid,
            vset,
        )
    }

    /// One shear-layer run at Mach `ma` on an `n × n` mesh.
    pub fn probe(&self, variant: &KhVariant, n: usize, nu: f64, ma: f64) -> Result<RunOutcome> {
        let cfg = self.scheme(variant, n, nu)?;
        let layer = ShearLayer::from_mach(ma, self.lambda);
        let state = init_kelvin_helmholtz(&cfg.grid, &layer, cfg.kind, &LatticeConstants::d2q9(&cfg.vset), &cfg.vset)?;
        let limit = self.speed_limit * self.lambda;
        let outcome = Simulation::new(cfg, state)?.with_speed_limit(limit).run(self.iterations);
        log::debug!("{} n={n} nu={nu} Ma={ma}: {outcome:?}", variant.label());
        Ok(outcome)
    }

    /// `(s_e, s_ν)` on an `n × n` mesh.
    pub fn rates(&self, n: usize, nu: f64) -> Result<(f64, f64)> {
        let grid = Grid::square(n, self.lambda)?;
        let (s_e, s_nu) = viscosity_to_rates(self.mu, nu, self.lambda, grid.dt)?;
        Ok((self.s_e.unwrap_or(s_e), self.s_nu.unwrap_or(s_nu)))
    }
}

/// How the largest passing value on a grid is located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Search {
    /// Halves the bracket; assumes stability is lost once and for all.
    Bisect,
    /// Steps up until the first failure.
    Linear,
}

impl fmt::Display for Search {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Search::Bisect => "bisect",
            Search::Linear => "linear",
        })
    }
}

impl FromStr for Search {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bisect" => Ok(Search::Bisect),
            "linear" => Ok(Search::Linear),
            other => Err(Error::Config(format!("unknown search `{other}`"))),
        }
    }
}

impl Search {
    /// Largest index in `lo..=hi` that passes, or `None` if `lo` fails.
    pub fn last_passing(self, lo: usize, hi: usize, mut pass: impl FnMut(usize) -> Result<bool>) -> Result<Option<usize>> {
        if lo > hi {
            return Err(Error::invalid(format!("empty search range {lo}..={hi}")));
        }
        match self {
            Search::Linear => {
                for i in lo..=hi {
                    if !pass(i)? {
                        return Ok(i.checked_sub(1).filter(|&p| p >= lo));
                    }
                }
                Ok(Some(hi))
            }
            Search::Bisect => {
                if !pass(lo)? {
                    return Ok(None);
                }
                if pass(hi)? {
                    return Ok(Some(hi));
                }
                let (mut good, mut bad) = (lo, hi);
                while bad - good > 1 {
                    let mid = good + (bad - good) / 2;
                    if pass(mid)? {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
                Ok(Some(good))
            }
        }
    }
}

fn mesh_size(dx: f64) -> Result<usize> {
    let n = (1.0 / dx).round();
    if !(n >= 4.0) || ((1.0 / dx) - n).abs() > 1e-9 * n {
        return Err(Error::Config(format!("space step {dx} is not 1/n for an integer n >= 4")));
    }
    Ok(n as usize)
}

fn dx_label(n: usize) -> String {
    format!("dx=1/{n}")
}

fn nan_on_error(what: &str, r: Result<Cell>) -> Cell {
    r.unwrap_or_else(|e| {
        log::warn!("{what} failed: {e}");
        Cell::Nan
    })
}

/// Largest Mach number on the `step` grid in `(0, ma_max]` whose run survives.
pub fn max_stable_mach(
    params: &KhParams,
    variant: &KhVariant,
    n: usize,
    nu: f64,
    step: f64,
    ma_max: f64,
    search: Search,
) -> Result<f64> {
    let top = (ma_max / step + 1e-9).floor() as usize;
    if top == 0 {
        return Err(Error::Config(format!("Mach cap {ma_max} is below the step {step}")));
    }
    let found = search.last_passing(1, top, |i| Ok(params.probe(variant, n, nu, i as f64 * step)?.is_stable()))?;
    if found == Some(top) {
        log::warn!("{} n={n}: stable up to the Mach cap {ma_max}", variant.label());
    }
    Ok(found.map_or(0.0, |i| grid_value(i as i64, step)))
}

fn resolve_meshes(r: &mut Resolver, default: &str) -> Result<Vec<usize>> {
    let dx = r.get_with("experiment.dx", default, parse_real_list)?;
    dx.into_iter().map(mesh_size).collect()
}

/// Max stable Mach number per mesh and variant.
#[derive(Debug, Clone)]
pub struct MaScan {
    pub params: KhParams,
    pub variants: Vec<KhVariant>,
    pub meshes: Vec<usize>,
    pub step: f64,
    pub ma_max: f64,
    pub search: Search,
    pub config: Config,
}

impl MaScan {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let mut r = Resolver::new(cfg);
        let params = KhParams::resolve(&mut r, 1.0)?;
        let variants = r.get_with("experiment.variants", MESH_VARIANTS, parse_variants)?;
        let meshes = resolve_meshes(&mut r, "1/16,1/32,1/64,1/128,1/256,1/512")?;
        let step: f64 = r.get("experiment.tol", 0.01)?;
        let ma_max: f64 = r.get("experiment.ma_max", 1.5)?;
        let search: Search = r.get("experiment.search", Search::Bisect)?;
        if !(step > 0.0) {
            return Err(Error::Config(format!("Mach step must be positive, got {step}")));
        }
        Ok(MaScan {
            params,
            variants,
            meshes,
            step,
            ma_max,
            search,
            config: r.finish(),
        })
    }

    /// Rows `s_e`, `s_nu`, then one per variant; columns are meshes.
    pub fn run(&self, threads: Option<usize>) -> Result<TableResult> {
        let columns: Vec<String> = self.meshes.iter().map(|&n| dx_label(n)).collect();
        let mut table = TableResult::new("kh scan-ma", "variant", columns, self.config.clone());
        let rates: Vec<(f64, f64)> = self.meshes.iter().map(|&n| self.params.rates(n, self.params.nu)).collect::<Result<_>>()?;
        table.push_row("s_e", rates.iter().map(|r| Cell::Value(r.0)).collect(), 2);
        table.push_row("s_nu", rates.iter().map(|r| Cell::Value(r.1)).collect(), 2);
        let jobs: Vec<(KhVariant, usize)> =
            self.variants.iter().flat_map(|&v| self.meshes.iter().map(move |&n| (v, n))).collect();
        let cells: Vec<Cell> = in_pool(threads, || {
            jobs.par_iter()
                .map(|(v, n)| {
                    let r = max_stable_mach(&self.params, v, *n, self.params.nu, self.step, self.ma_max, self.search);
                    nan_on_error(&v.label(), r.map(Cell::Value))
                })
                .collect()
        })?;
        for (row, v) in cells.chunks(self.meshes.len()).zip(&self.variants) {
            table.push_row(v.label(), row.to_vec(), 2);
        }
        Ok(table)
    }
}

/// Max stable Reynolds number `1/ν` at fixed Mach per mesh and variant.
#[derive(Debug, Clone)]
pub struct ReScan {
    pub params: KhParams,
    pub variants: Vec<KhVariant>,
    pub meshes: Vec<usize>,
    pub ma: f64,
    pub re_step: f64,
    pub re_max: f64,
    pub search: Search,
    pub config: Config,
}

impl ReScan {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let mut r = Resolver::new(cfg);
        let params = KhParams::resolve(&mut r, 1.0)?;
        if params.s_nu.is_some() {
            return Err(Error::Config("the Reynolds scan sets s_nu itself; drop `relaxation.s_nu`".into()));
        }
        let variants = r.get_with("experiment.variants", MESH_VARIANTS, parse_variants)?;
        let meshes = resolve_meshes(&mut r, "1/16,1/32,1/64,1/128")?;
        let ma: f64 = r.get("experiment.ma", 0.09)?;
        let re_step: f64 = r.get("experiment.re_step", 1000.0)?;
        let re_max: f64 = r.get("experiment.re_max", 200000.0)?;
        let search: Search = r.get("experiment.search", Search::Bisect)?;
        if !(re_step > 0.0) || re_max < re_step {
            return Err(Error::Config(format!("need 0 < re_step <= re_max, got {re_step} and {re_max}")));
        }
        Ok(ReScan {
            params,
            variants,
            meshes,
            ma,
            re_step,
            re_max,
            search,
            config: r.finish(),
        })
    }

    pub fn cell(&self, variant: &KhVariant, n: usize) -> Result<Cell> {
        if self.params.probe(variant, n, 0.0, self.ma)?.is_stable() {
            return Ok(Cell::Unbounded);
        }
        let top = (self.re_max / self.re_step + 1e-9).floor() as usize;
        let found = self.search.last_passing(1, top, |j| {
            let nu = 1.0 / (j as f64 * self.re_step);
            Ok(self.params.probe(variant, n, nu, self.ma)?.is_stable())
        })?;
        if found == Some(top) {
            log::warn!("{} n={n}: stable up to the Reynolds cap {}", variant.label(), self.re_max);
        }
        Ok(Cell::Value(found.map_or(0.0, |j| j as f64 * self.re_step)))
    }

    /// Row `s_e`, then one per variant; columns are meshes.
    pub fn run(&self, threads: Option<usize>) -> Result<TableResult> {
        let columns: Vec<String> = self.meshes.iter().map(|&n| dx_label(n)).collect();
        let mut table = TableResult::new("kh scan-re", "variant", columns, self.config.clone());
        let s_e: Vec<Cell> = self
            .meshes
            .iter()
            .map(|&n| self.params.rates(n, 0.0).map(|r| Cell::Value(r.0)))
            .collect::<Result<_>>()?;
        table.push_row("s_e", s_e, 2);
        let jobs: Vec<(KhVariant, usize)> =
            self.variants.iter().flat_map(|&v| self.meshes.iter().map(move |&n| (v, n))).collect();
        let cells: Vec<Cell> = in_pool(threads, || {
            jobs.par_iter().map(|(v, n)| nan_on_error(&v.label(), self.cell(v, *n))).collect()
        })?;
        for (row, v) in cells.chunks(self.meshes.len()).zip(&self.variants) {
            table.push_row(v.label(), row.to_vec(), 0);
        }
        Ok(table)
    }
}

/// Max stable Mach number with the frame velocity set to `c u`.
#[derive(Debug, Clone)]
pub struct UtildeScan {
    pub params: KhParams,
    pub variants: Vec<KhVariant>,
    pub scales: Vec<f64>,
    pub n: usize,
    pub step: f64,
    pub ma_max: f64,
    pub search: Search,
    pub config: Config,
}

impl UtildeScan {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let mut r = Resolver::new(cfg);
        let params = KhParams::resolve(&mut r, 1.0)?;
        let variants = r.get_with("experiment.variants", UTILDE_VARIANTS, parse_variants)?;
        let scales = r.get_with("experiment.scales", "0,0.2,0.4,0.6,0.8,1,1.2,1.4", parse_real_list)?;
        let n: usize = r.get("grid.n", 128)?;
        let step: f64 = r.get("experiment.tol", 0.01)?;
        let ma_max: f64 = r.get("experiment.ma_max", 1.5)?;
        let search: Search = r.get("experiment.search", Search::Bisect)?;
        if !(step > 0.0) {
            return Err(Error::Config(format!("Mach step must be positive, got {step}")));
        }
        Ok(UtildeScan {
            params,
            variants,
            scales,
            n,
            step,
            ma_max,
            search,
            config: r.finish(),
        })
    }

    /// One row per variant, one column per scale.
    pub fn run(&self, threads: Option<usize>) -> Result<TableResult> {
        let columns = self.scales.iter().map(|c| format!("c={c}")).collect();
        let mut table = TableResult::new("kh scan-utilde", "variant", columns, self.config.clone());
        let jobs: Vec<KhVariant> = self
            .variants
            .iter()
            .flat_map(|v| {
                self.scales.iter().map(move |&c| KhVariant {
                    policy: UtildePolicy::ScaledFluid(c),
                    ..*v
                })
            })
            .collect();
        let cells: Vec<Cell> = in_pool(threads, || {
            jobs.par_iter()
                .map(|v| {
                    let r = max_stable_mach(&self.params, v, self.n, self.params.nu, self.step, self.ma_max, self.search);
                    nan_on_error(&v.label(), r.map(Cell::Value))
                })
                .collect()
        })?;
        for (row, v) in cells.chunks(self.scales.len()).zip(&self.variants) {
            table.push_row(format!("alpha={} {}", v.alpha, v.kind), row.to_vec(), 2);
        }
        Ok(table)
    }
}

/// A field dump written by [`VorticityRun`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dump {
    pub time: f64,
    pub iteration: u64,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VorticityReport {
    pub dumps: Vec<Dump>,
    /// Set when the run broke before the last requested time.
    pub blow_up: Option<BlowUp>,
}

/// A single shear-layer run with field dumps at chosen times.
#[derive(Debug, Clone)]
pub struct VorticityRun {
    pub params: KhParams,
    pub variant: KhVariant,
    pub n: usize,
    pub ma: f64,
    pub times: Vec<f64>,
    pub prefix: String,
    pub config: Config,
}

impl VorticityRun {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let mut r = Resolver::new(cfg);
        let ma: f64 = r.get("experiment.ma", 0.04)?;
        if !(ma > 0.0) {
            return Err(Error::Config(format!("Mach number must be positive, got {ma}")));
        }
        // shear speed of one by default
        let params = KhParams::resolve(&mut r, 3f64.sqrt() / ma)?;
        let variant = r.get_with("experiment.variant", "0:fluid:truncated2", str::parse::<KhVariant>)?;
        let n: usize = r.get("grid.n", 128)?;
        let times = r.get_with("experiment.times", "0,0.6,1", parse_real_list)?;
        let prefix: String = r.get("experiment.prefix", "kh".to_string())?;
        if times.iter().any(|t| *t < 0.0) {
            return Err(Error::Config("dump times must be non-negative".into()));
        }
        Ok(VorticityRun {
            params,
            variant,
            n,
            ma,
            times,
            prefix,
            config: r.finish(),
        })
    }

    /// Runs to the last requested time, dumping at the nearest iterations.
    pub fn run(&self, out_dir: &Path) -> Result<VorticityReport> {
        let cfg = self.params.scheme(&self.variant, self.n, self.params.nu)?;
        let (grid, vset) = (cfg.grid, cfg.vset.clone());
        let layer = ShearLayer::from_mach(self.ma, self.params.lambda);
        let state = init_kelvin_helmholtz(&grid, &layer, cfg.kind, &LatticeConstants::d2q9(&vset), &vset)?;
        let mut sim = Simulation::new(cfg, state)?.with_speed_limit(self.params.speed_limit * self.params.lambda);
        let mut stops: Vec<(u64, f64)> = self.times.iter().map(|&t| ((t / grid.dt).round() as u64, t)).collect();
        stops.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        stops.dedup_by_key(|s| s.0);
        std::fs::create_dir_all(out_dir)?;
        let mut dumps = Vec::new();
        for (iteration, time) in stops {
            while sim.state().iteration < iteration {
                if let Err(b) = sim.step() {
                    return Ok(VorticityReport { dumps, blow_up: Some(b) });
                }
            }
            if let Err(b) = sim.check() {
                return Ok(VorticityReport { dumps, blow_up: Some(b) });
            }
            let path = dump_path(out_dir, &self.prefix, iteration);
            let mut out = BufWriter::new(File::create(&path)?);
            write_fields_csv(&mut out, sim.state(), &grid, &vset)?;
            std::io::Write::flush(&mut out)?;
            log::info!("t={time} (iteration {iteration}) -> {}", path.display());
            dumps.push(Dump { time, iteration, path });
        }
        Ok(VorticityReport { dumps, blow_up: None })
    }
}
