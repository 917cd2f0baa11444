#![allow(dead_code)]

use sscover::instance::{gen_random_setcover, Instance, RandomSetCoverParams};

/// Small random corpus: at most 6 items (completion item included), at most
/// 3 outcomes per item.
pub fn corpus(count: usize, seed: u64) -> Vec<Instance> {
    (0..count as u64)
        .map(|i| {
            let s = seed.wrapping_mul(1_000_003).wrapping_add(i);
            let p = RandomSetCoverParams {
                n: 3 + (s % 5) as usize,
                m: 1 + (s / 5 % 5) as usize,
                max_support: 1 + (s / 25 % 3) as usize,
                density: [0.3, 0.45, 0.6][(s / 75 % 3) as usize],
                max_cost: 1 + s / 225 % 3,
                seed: s,
            };
            gen_random_setcover(&p).expect("corpus parameters are valid")
        })
        .collect()
}
