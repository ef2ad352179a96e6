//! Seed fan-out.
//!
//! Every stage takes its own seed derived from one global seed and the stage
//! name, so re-running a single stage reproduces its output without replaying
//! the stages before it.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a stage seed from the global seed and a stage name.
///
/// Stable across platforms and compiler versions (FNV-1a over the name, mixed
/// with splitmix64).
pub fn derive_seed(global: u64, stage: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(global ^ splitmix64(h))
}
