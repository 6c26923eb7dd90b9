use criterion::{black_box, criterion_group, criterion_main, Criterion};

use market_eq::equilibrium::{
    build_stability_lp, solve_stability_lp, two_firm_weighted_pspe, StabilityObjective,
};
use market_eq::experiments::{gen_random_value_table, power_table};
use market_eq::network::{network_to_synergy, synergy_to_network, SynergyMatrix};
use market_eq::partition::{configuration_lp, max_cut_two_firm, optimal_partition_weighted};
use market_eq::rational::{rat, rat_int};
use market_eq::{CompetitionGame, Limits, Valuation};
use rand::SeedableRng;

fn capped_game(weights: Vec<u32>, caps: &[i64]) -> CompetitionGame {
    let w: u64 = weights.iter().map(|&x| x as u64).sum();
    let vals = caps
        .iter()
        .map(|&c| Valuation::Weighted((0..=w as i64).map(|x| rat_int(x.min(c))).collect()))
        .collect();
    CompetitionGame::new(weights, vals).unwrap()
}

fn bench_partition_dp(c: &mut Criterion) {
    let limits = Limits::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let weights: Vec<u32> = (0..14).map(|i| 2 + (i * 5 % 13) as u32).collect();
    let w: u64 = weights.iter().map(|&x| x as u64).sum();
    let table = gen_random_value_table(w, true, &mut rng);
    let game = CompetitionGame::new(weights, vec![Valuation::Weighted(table); 3]).unwrap();
    c.bench_function("weighted_partition_dp_n14_k3", |b| {
        b.iter(|| optimal_partition_weighted(black_box(&game), &limits).unwrap())
    });
}

fn bench_stability_lp(c: &mut Criterion) {
    let limits = Limits::default();
    let game = capped_game(vec![2, 2, 2, 2, 2, 3, 3, 3, 5], &[6, 6, 6, 6]);
    let (p, _) = optimal_partition_weighted(&game, &limits).unwrap();
    c.bench_function("stability_lp_collapsed", |b| {
        b.iter(|| {
            let lp = build_stability_lp(
                black_box(&game),
                &p,
                true,
                StabilityObjective::MinimizeTotalPay,
                false,
                &limits,
            )
            .unwrap();
            solve_stability_lp(&lp).unwrap()
        })
    });
}

fn bench_two_firm_construction(c: &mut Criterion) {
    let limits = Limits::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let weights: Vec<u32> = (0..10).map(|i| 1 + (i * 3 % 6) as u32).collect();
    let w: u64 = weights.iter().map(|&x| x as u64).sum();
    let t1 = gen_random_value_table(w, true, &mut rng);
    let t2 = gen_random_value_table(w, true, &mut rng);
    let game = CompetitionGame::new(
        weights,
        vec![Valuation::Weighted(t1), Valuation::Weighted(t2)],
    )
    .unwrap();
    c.bench_function("two_firm_construction_n10", |b| {
        b.iter(|| two_firm_weighted_pspe(black_box(&game), &limits).unwrap())
    });
}

fn bench_configuration_lp(c: &mut Criterion) {
    let limits = Limits::default();
    let game = capped_game(vec![2, 2, 2, 2, 2, 3, 3, 3, 5], &[6, 6, 6, 6]);
    c.bench_function("configuration_lp_n9_k4", |b| {
        b.iter(|| configuration_lp(black_box(&game), &limits).unwrap())
    });
}

fn bench_network_conversion(c: &mut Criterion) {
    let limits = Limits::default();
    let m = SynergyMatrix::from_rows(vec![
        vec![rat_int(1), rat_int(2), rat_int(1), rat_int(0)],
        vec![rat_int(2), rat_int(0), rat_int(2), rat_int(3)],
        vec![rat_int(1), rat_int(2), rat_int(2), rat_int(1)],
        vec![rat_int(0), rat_int(3), rat_int(1), rat_int(2)],
    ])
    .unwrap();
    c.bench_function("synergy_network_round_trip", |b| {
        b.iter(|| {
            let h = synergy_to_network(black_box(&m)).unwrap();
            network_to_synergy(&h, &limits).unwrap()
        })
    });
    c.bench_function("max_cut_n4", |b| {
        b.iter(|| max_cut_two_firm(black_box(&m), &limits).unwrap())
    });
}

fn bench_power_table(c: &mut Criterion) {
    c.bench_function("power_table_w79", |b| {
        b.iter(|| power_table(black_box(79), &rat(7, 10)))
    });
}

criterion_group!(
    benches,
    bench_partition_dp,
    bench_stability_lp,
    bench_two_firm_construction,
    bench_configuration_lp,
    bench_network_conversion,
    bench_power_table
);
criterion_main!(benches);
