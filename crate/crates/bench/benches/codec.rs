use std::collections::BTreeMap;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use nmds::codec::{decode, encode_stripe, select_recovery_set, CodeParams, NodeId, Packet};
use nmds::repair::{best_single_repair, execute_plan, plan_single_repairs};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const FRAGMENT: usize = 64 * 1024;

fn fragments(k: usize, rng: &mut StdRng) -> Vec<Packet> {
    (0..k)
        .map(|_| {
            let mut b = vec![0u8; FRAGMENT];
            rng.fill(&mut b[..]);
            Packet::new(b)
        })
        .collect()
}

fn codec(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(1);
    let mut group = c.benchmark_group("codec");
    for k in [4usize, 8, 16] {
        let p = CodeParams::new(k).unwrap();
        let data = fragments(k, &mut rng);
        group.throughput(Throughput::Bytes((k * FRAGMENT) as u64));
        group.bench_with_input(BenchmarkId::new("encode", k), &data, |b, data| {
            b.iter(|| encode_stripe(&p, black_box(data)).unwrap())
        });

        let stripe = encode_stripe(&p, &data).unwrap();
        // worst case: every other systematic node is gone
        let alive = p.nodes().filter(|n| n.is_parity() || n.partition % 2 == 1).collect();
        let chosen = select_recovery_set(&p, alive).unwrap();
        let shares: BTreeMap<NodeId, Packet> = chosen.iter().map(|&n| (n, stripe.packet(n).clone())).collect();
        group.bench_with_input(BenchmarkId::new("decode", k), &shares, |b, shares| {
            b.iter(|| decode(&p, black_box(shares)).unwrap())
        });

        let target = NodeId::systematic(0);
        let plan = best_single_repair(&p, target, p.all_nodes().without(target)).unwrap();
        let survivors = stripe.shares(p.all_nodes().without(target));
        group.throughput(Throughput::Bytes(FRAGMENT as u64));
        group.bench_with_input(BenchmarkId::new("repair", k), &survivors, |b, s| {
            b.iter(|| execute_plan(&plan, black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn planning(c: &mut Criterion) {
    let mut group = c.benchmark_group("planning");
    for k in [5usize, 10, 16] {
        let p = CodeParams::new(k).unwrap();
        let s = NodeId::systematic(0);
        let alive = p.all_nodes().without(s).without(s.related());
        group.bench_with_input(BenchmarkId::new("all_plans", k), &alive, |b, &alive| {
            b.iter(|| plan_single_repairs(&p, s, alive).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("best_plan", k), &alive, |b, &alive| {
            b.iter(|| best_single_repair(&p, s, alive).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, codec, planning);
criterion_main!(benches);
