//! Drivers that turn a flat configuration into result tables or field dumps.

pub mod config;
pub mod kh;
pub mod linear;
pub mod table;

pub use config::Config;
pub use kh::{KhParams, KhVariant, MaScan, ReScan, Search, UtildeScan, VorticityReport, VorticityRun};
pub use linear::{AlphaSweep, Curve, LinearTable, TrtKind};
pub use table::{Cell, Row, TableResult};

use crate::error::{Error, Result};

/// `i · step`, computed as `i / (1/step)` when that reciprocal is an integer so
/// that `i = 7, step = 0.01` gives the double nearest 0.07.
pub fn grid_value(i: i64, step: f64) -> f64 {
    let inv = 1.0 / step;
    if (inv - inv.round()).abs() < 1e-9 * inv {
        i as f64 / inv.round()
    } else {
        i as f64 * step
    }
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub(crate) fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Config("thread count must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
