#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use relbound::structures::StructureNode;

/// Random single-occurrence tree over components `0..s`.
pub fn random_tree<R: Rng>(rng: &mut R, s: usize) -> StructureNode {
    let mut ids: Vec<usize> = (0..s).collect();
    ids.shuffle(rng);
    build(rng, &ids)
}

fn build<R: Rng>(rng: &mut R, ids: &[usize]) -> StructureNode {
    if ids.len() == 1 {
        return StructureNode::Component(ids[0]);
    }
    let m = rng.random_range(2..=ids.len().min(5));
    // m non-empty consecutive groups
    let mut cuts: Vec<usize> = (1..ids.len()).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts[..m - 1].to_vec();
    cuts.sort_unstable();
    let mut children = Vec::with_capacity(m);
    let mut start = 0;
    for end in cuts.into_iter().chain(std::iter::once(ids.len())) {
        children.push(build(rng, &ids[start..end]));
        start = end;
    }
    match rng.random_range(0..3) {
        0 => StructureNode::Series(children),
        1 => StructureNode::Parallel(children),
        _ => StructureNode::KOutOfN { k: rng.random_range(1..=m), children },
    }
}

/// Random reliabilities, with a few exact 0/1 entries mixed in.
pub fn random_reliabilities<R: Rng>(rng: &mut R, s: usize) -> Vec<f64> {
    (0..s)
        .map(|_| match rng.random_range(0..20) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        })
        .collect()
}
