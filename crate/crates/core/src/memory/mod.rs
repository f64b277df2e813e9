//! External memories attached to the controller.
//!
//! Both variants follow the same step contract: any writes happen first, then
//! the read heads address the (possibly updated) memory. With writes disabled
//! the memory tensor is passed through untouched, which is what the
//! next-state simulation used for Bellman targets relies on.

pub mod lrua;
pub mod ntm;

/// Reset value for every memory cell; non-zero so cosine similarity is
/// defined on the first step.
pub const MEMORY_RESET_VALUE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryConfig {
    pub slots: usize,
    pub width: usize,
    pub read_heads: usize,
    /// NTM only; LRUA pairs one write with each read head.
    pub write_heads: usize,
    /// LRUA usage decay.
    pub usage_decay: f64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig { slots: 128, width: 40, read_heads: 1, write_heads: 1, usage_decay: 0.95 }
    }
}
