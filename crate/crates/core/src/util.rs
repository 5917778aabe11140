//! Small crate-internal helpers.

/// FNV-1a hash of a label, mixed with a run seed and a role tag. Used to
/// derive independent, platform-stable RNG streams per tensor key.
pub(crate) fn derive_seed(run_seed: u64, label: &str, role: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in label.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ role.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ run_seed.wrapping_mul(0xa076_1d64_78bd_642f)
}
