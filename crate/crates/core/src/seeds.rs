//! Seed derivation for reproducible sweeps.
//!
//! Cell seeds are `splitmix64(base ^ splitmix64(cell))` and trial seeds are
//! derived from the cell seed the same way, so every trial is regenerable
//! from the base seed and its (cell, trial) index.

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn cell_seed(base: u64, cell: u64) -> u64 {
    splitmix64(base ^ splitmix64(cell))
}

pub fn trial_seed(base: u64, cell: u64, trial: u64) -> u64 {
    cell_seed(cell_seed(base, cell), trial)
}
