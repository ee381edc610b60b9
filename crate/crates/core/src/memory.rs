//! Embedding-table memory accounting.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryEstimate {
    pub bytes: u64,
    /// `bytes / 10^9`
    pub gb_decimal: f64,
    /// `bytes / 2^30`
    pub gb_binary: f64,
}

impl MemoryEstimate {
    /// Both conventions rounded to two decimals, e.g. `"0.12 GB / 0.11 GiB"`.
    pub fn display(&self) -> String {
        format!("{:.2} GB / {:.2} GiB", self.gb_decimal, self.gb_binary)
    }
}

/// Size of a `vocab_size × dim` table of `bytes_per_param`-byte values.
pub fn memory_estimate(vocab_size: u64, dim: u64, bytes_per_param: u64) -> MemoryEstimate {
    let bytes = vocab_size * dim * bytes_per_param;
    MemoryEstimate {
        bytes,
        gb_decimal: bytes as f64 / 1e9,
        gb_binary: bytes as f64 / (1u64 << 30) as f64,
    }
}

/// Rounds to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}
