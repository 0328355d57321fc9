//! Cross-layer modeling of SRAM, STT-MRAM and SOT-MRAM last-level caches:
//! bitcell registry, analytical cache model, EDAP tuning, workload-level
//! energy/delay analysis, iso-area DRAM-traffic simulation and capacity
//! scaling sweeps.

pub mod cachemodel;
pub mod error;
pub mod isoarea;
pub mod isocap;
mod kv;
pub mod sweep;
pub mod techlib;
pub mod tuner;
pub mod workloads;

pub use error::{Error, Result};
