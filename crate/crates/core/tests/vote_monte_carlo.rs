//! The simulated majority vote agrees with the exact vote distribution.

use ternvote::aggregators::aggregate_vote;
use ternvote::compressors::ternary_compress;
use ternvote::oracle::vote_distribution_exact;
use ternvote::{stream, CompressorParams, GradientVector};

#[test]
fn vote_frequencies_match_exact_distribution() {
    const TRIALS: usize = 200_000;
    let cases: [(&[f64], f64, f64); 3] =
        [(&[0.5, -0.2, 0.9, 0.1, -0.7], 1.0, 2.0), (&[1.5, 1.5, -2.0], 2.0, 4.0), (&[0.3, 0.1, 0.2, -0.1], 1.0, 8.0)];
    for (case, &(u, a, b)) in cases.iter().enumerate() {
        let exact = vote_distribution_exact(u, a, b).unwrap();
        let p = CompressorParams::new(a, b, a, 1);
        // one coordinate per trial: each worker compresses its input TRIALS times
        let messages: Vec<_> = u
            .iter()
            .enumerate()
            .map(|(m, &x)| {
                let g = GradientVector::new(vec![x; TRIALS]).unwrap();
                ternary_compress(&g, &p, &mut stream(case as u64, 0, m as u64, "vote-mc")).unwrap()
            })
            .collect();
        let votes = aggregate_vote(&messages).unwrap();
        let (plus, zero, minus) = votes.symbol_counts();
        for (count, prob) in [(plus, exact.p_plus), (zero, exact.p_zero), (minus, exact.p_minus)] {
            let freq = count as f64 / TRIALS as f64;
            let se = (prob * (1.0 - prob) / TRIALS as f64).sqrt().max(1e-9);
            assert!((freq - prob).abs() <= 5.0 * se, "case {case}: frequency {freq} vs exact {prob}");
        }
    }
}
