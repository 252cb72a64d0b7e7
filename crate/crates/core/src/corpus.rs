//! Deterministic synthetic stand-ins for the Pizza&Chili text collections.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AMINO_ACIDS: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";
// Rough Swiss-Prot residue frequencies, per mille, in `AMINO_ACIDS` order.
const AMINO_WEIGHTS: [u32; 20] = [83, 14, 55, 67, 39, 71, 23, 59, 58, 97, 24, 41, 47, 39, 55, 66, 53, 69, 11, 29];

/// Newline-separated protein sequences, `len` bytes exactly.
pub fn proteins(len: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: u32 = AMINO_WEIGHTS.iter().sum();
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let record = rng.gen_range(50..600);
        for _ in 0..record {
            if out.len() + 1 >= len {
                break;
            }
            let mut pick = rng.gen_range(0..total);
            let mut i = 0;
            while pick >= AMINO_WEIGHTS[i] {
                pick -= AMINO_WEIGHTS[i];
                i += 1;
            }
            out.push(AMINO_ACIDS[i]);
        }
        out.push(b'\n');
    }
    out.truncate(len);
    out
}

/// Newline-separated 60-base reads sampled from a random reference a tenth
/// of the output size, with about one substitution per hundred bases.
/// `len` bytes exactly.
pub fn dna(len: usize, seed: u64) -> Vec<u8> {
    const READ: usize = 60;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reference: Vec<u8> = (0..(len / 10).max(READ))
        .map(|_| b"ACGT"[rng.gen_range(0..4)])
        .collect();
    let mut out = Vec::with_capacity(len + READ + 1);
    while out.len() < len {
        let start = rng.gen_range(0..=reference.len() - READ);
        for &b in &reference[start..start + READ] {
            out.push(if rng.gen_range(0..100) == 0 { b"ACGT"[rng.gen_range(0..4)] } else { b });
        }
        out.push(b'\n');
    }
    out.truncate(len);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_length_and_alphabet() {
        let p = proteins(10_000, 1);
        assert_eq!(p.len(), 10_000);
        assert!(p.iter().all(|b| AMINO_ACIDS.contains(b) || *b == b'\n'));
        assert!(p.contains(&b'\n'));
        assert_eq!(proteins(10_000, 1), p);
        assert_ne!(proteins(10_000, 2), p);
        let d = dna(500, 3);
        assert_eq!(d.len(), 500);
        assert!(d.iter().all(|b| b"ACGT\n".contains(b)));
    }
}
