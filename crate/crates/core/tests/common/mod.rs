use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A family of related strings: mutated copies of one ancestor, with some
/// internal repeats so that junctions occur at every k.
pub fn family(
    rng: &mut impl Rng,
    count: usize,
    len_range: std::ops::RangeInclusive<usize>,
) -> Vec<String> {
    let alphabet = if rng.gen_bool(0.2) { 2 } else { 4 };
    let len = rng.gen_range(len_range.clone());
    let mut ancestor: Vec<u8> = (0..len)
        .map(|_| b"ACGT"[rng.gen_range(0..alphabet)])
        .collect();
    if len > 40 && rng.gen_bool(0.5) {
        let a = rng.gen_range(0..len - 20);
        let piece = ancestor[a..a + rng.gen_range(5..20)].to_vec();
        let at = rng.gen_range(0..len - piece.len());
        ancestor[at..at + piece.len()].copy_from_slice(&piece);
    }
    (0..count)
        .map(|_| {
            let mut s = ancestor.clone();
            for _ in 0..rng.gen_range(0..6) {
                let i = rng.gen_range(0..s.len());
                match rng.gen_range(0..3) {
                    0 => s[i] = b"ACGT"[rng.gen_range(0..4)],
                    1 if s.len() > 1 => {
                        s.remove(i);
                    }
                    _ => s.insert(i, b"ACGT"[rng.gen_range(0..4)]),
                }
            }
            let lo = *len_range.start();
            let hi = *len_range.end();
            while s.len() < lo {
                s.push(b"ACGT"[rng.gen_range(0..4)]);
            }
            s.truncate(hi);
            String::from_utf8(s).unwrap()
        })
        .collect()
}
