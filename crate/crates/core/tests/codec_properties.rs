use std::collections::BTreeMap;

use nmds::codec::{
    classify_set, combinations, count_recovery_sets, decode, encode_stripe, enumerate_recovery_sets_within,
    is_decodable_oracle, CodeParams, NodeId, NodeSet, Packet,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

/// Solves for `d_1..d_k` by Gauss-Jordan elimination over GF(2) on rows
/// augmented with their packets. Independent of the structured decoder.
fn gaussian_decode(params: &CodeParams, shares: &BTreeMap<NodeId, Packet>) -> Option<Vec<Packet>> {
    let mut rows: Vec<(u64, Vec<u8>)> =
        shares.iter().map(|(&n, p)| (params.row(n), p.as_bytes().to_vec())).collect();
    let k = params.k();
    for col in 0..k {
        let pivot = (col..rows.len()).find(|&r| rows[r].0 >> col & 1 == 1)?;
        rows.swap(col, pivot);
        let (pivot_row, pivot_bytes) = rows[col].clone();
        for (r, (row, bytes)) in rows.iter_mut().enumerate() {
            if r != col && *row >> col & 1 == 1 {
                *row ^= pivot_row;
                bytes.iter_mut().zip(&pivot_bytes).for_each(|(a, b)| *a ^= b);
            }
        }
    }
    Some(rows.into_iter().take(k).map(|(_, b)| Packet::new(b)).collect())
}

fn random_fragments(rng: &mut impl Rng, k: usize, len: usize) -> Vec<Packet> {
    (0..k).map(|_| Packet::new((0..len).map(|_| rng.gen()).collect())).collect()
}

#[test]
fn classifier_agrees_with_rank_oracle() {
    for k in 2..=8 {
        let params = CodeParams::new(k).unwrap();
        for bits in combinations(params.n(), k) {
            let set = NodeSet::from_bits(bits);
            let structured = classify_set(&params, set).is_decodable();
            let oracle = is_decodable_oracle(&params, &set.to_vec()).unwrap();
            assert_eq!(structured, oracle, "k = {k}, subset {set}");
        }
    }
}

#[test]
fn enumeration_count_law() {
    for k in 2..=10 {
        let params = CodeParams::new(k).unwrap();
        let sets = enumerate_recovery_sets_within(&params, 10).unwrap();
        let k = k as u128;
        let closed = (1u128 << (k - 2)) * (k * k - k + 2);
        assert_eq!(sets.len() as u128, closed);
        assert_eq!(count_recovery_sets(&params).total, closed);
        assert_eq!(k * (k - 1) * (1 << (k - 2)) + (1 << (k - 1)), closed);
    }
}

#[test]
fn decode_roundtrip_and_differential_on_every_decodable_subset() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    for k in 2..=8 {
        let params = CodeParams::new(k).unwrap();
        let fragments = random_fragments(&mut rng, k, 7);
        let stripe = encode_stripe(&params, &fragments).unwrap();
        for set in enumerate_recovery_sets_within(&params, 8).unwrap() {
            let shares = stripe.shares(set.nodes.iter().copied().collect());
            let structured = decode(&params, &shares).unwrap();
            assert_eq!(structured, fragments, "k = {k}, set {:?}", set.nodes);
            assert_eq!(gaussian_decode(&params, &shares).as_ref(), Some(&structured));
            // re-encoding reproduces every parity
            let again = encode_stripe(&params, &structured).unwrap();
            assert_eq!(again, stripe);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_subsets_decode_iff_full_rank(k in 2usize..=8, seed in any::<u64>(), len in 1usize..32) {
        let params = CodeParams::new(k).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let fragments = random_fragments(&mut rng, k, len);
        let stripe = encode_stripe(&params, &fragments).unwrap();
        let mut order: Vec<NodeId> = params.nodes().collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let set: NodeSet = order[..k].iter().copied().collect();
        let shares = stripe.shares(set);
        match decode(&params, &shares) {
            Ok(d) => prop_assert_eq!(d, fragments),
            Err(_) => prop_assert!(gaussian_decode(&params, &shares).is_none()),
        }
    }
}
