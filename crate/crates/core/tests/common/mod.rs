#![allow(dead_code)]

use jtree::bench::{generate_random_network, NetworkSpec};
use jtree::util::{derive_seed, rng};
use jtree::BeliefNetwork;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

/// Random network with `arcs` arcs, possibly fewer than `n - 1`, in which
/// case it falls apart into several components.
pub fn network(n: usize, arcs: usize, card_max: u32, seed: u64) -> BeliefNetwork {
    let max = n * (n - 1) / 2;
    let arcs = arcs.min(max);
    let spec = NetworkSpec::new(n, arcs.max(n - 1), 2, card_max, seed);
    let mut net = generate_random_network(&spec).expect("valid spec");
    let mut r = rng(derive_seed(seed, 7));
    let all = net.arcs();
    for &(p, c) in all.choose_multiple(&mut r, (n - 1).saturating_sub(arcs)) {
        net.remove_arc(p, c).expect("arc exists");
    }
    net
}

/// Networks with `n` in `[lo, hi]`, up to `2n` arcs and cardinalities in `[2, 4]`.
pub fn fuzz_suite(count: usize, lo: usize, hi: usize, seed: u64) -> Vec<BeliefNetwork> {
    let mut r = rng(seed);
    (0..count)
        .map(|i| {
            let n = r.random_range(lo..=hi);
            let arcs = r.random_range(0..=2 * n);
            network(n, arcs, 4, derive_seed(seed, i as u64))
        })
        .collect()
}

/// Random polytree, or a polyforest when `forest` drops some arcs.
pub fn polytree(n: usize, seed: u64, forest: bool) -> BeliefNetwork {
    let mut net = network(n, n - 1, 4, seed);
    if forest {
        let mut r = rng(derive_seed(seed, 3));
        let mut arcs = net.arcs();
        arcs.shuffle(&mut r);
        let k = r.random_range(0..=arcs.len() / 2);
        for &(p, c) in &arcs[..k] {
            net.remove_arc(p, c).expect("arc exists");
        }
    }
    net
}
