use cdbg::analysis::bloom_fp_prob;
use cdbg::edge_membership::BloomFilter;
use cdbg::kmer_model::HashFamily;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn digests(family: &HashFamily, window: &[u8]) -> Vec<u64> {
    let w = family.window(window.len());
    let st = w.init(window);
    (0..family.len()).map(|i| w.digest(&st, i)).collect()
}

#[test]
fn empirical_rate_tracks_the_closed_form() {
    let h = 4;
    let log2 = 18;
    let b = 1u64 << log2;
    let family = HashFamily::new(h, 31);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for q in [0.01, 0.1] {
        let n = (-(b as f64) / h as f64 * (1.0 - f64::powf(q, 1.0 / h as f64)).ln()).round() as u64;
        let bloom = BloomFilter::new(log2, h).unwrap();
        // keys are 32-mers whose first base is A (inserted) or C (queried),
        // so inserted and queried sets are disjoint
        let key = |rng: &mut ChaCha8Rng, first: u8| {
            let mut w: Vec<u8> = (0..32).map(|_| rng.gen_range(0..4)).collect();
            w[0] = first;
            w
        };
        for _ in 0..n {
            bloom.insert_digests(&digests(&family, &key(&mut rng, 0)));
        }
        let queries = 100_000;
        let hits = (0..queries)
            .filter(|_| bloom.contains_digests(&digests(&family, &key(&mut rng, 1))))
            .count();
        let empirical = hits as f64 / queries as f64;
        let predicted = bloom_fp_prob(h as u32, n, b);
        assert!((predicted - q).abs() < 1e-3 * q.max(0.01));
        assert!(
            (empirical / predicted - 1.0).abs() < 0.2,
            "q={q}: empirical {empirical} predicted {predicted}"
        );
        let expected_fill = 1.0 - (-(h as f64) * n as f64 / b as f64).exp();
        assert!((bloom.fill_ratio() - expected_fill).abs() < 0.02);
    }
}
