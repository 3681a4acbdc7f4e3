//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdmr_core::detector::TdmrDetector;
use tdmr_core::grain::{
    solve_grain_distribution, write_bits, GrainDistribution, GrainGenerator, GrainImage,
};
use tdmr_core::harness::{rate_search, BlockResult, SimConfig, Simulation};
use tdmr_core::oracle::{
    enumerate_tilings, exact_bit_posteriors, exact_codeword_posteriors, TinyInstance,
};
use tdmr_core::sccc::{bit_to_polarity, map_decode, ConvCodeSpec, Mode, SccCodec};
use tdmr_core::trellis::{
    aa_index, channel_table, enumerate_states, input_index, output_index, states, transition_table,
    ChannelModel, FeedbackProbs, GrainState, NUM_STATES,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let mut out = f();
    let took = start.elapsed();
    if let Some(limit) = limit {
        if took > limit {
            out.pass = false;
            out.detail += &format!("; exceeded {limit:?}");
        }
    }
    (out, took)
}

// ---------------------------------------------------------------- 1

/// Next states of `AA` and their factors, transcribed; every state not listed
/// has probability zero.
const AA_ROW: &[(&str, &str)] = &[
    ("AA", "P1·P1·P(B̄,F̄)"),
    ("AB", "P1·P2·P(B̄,F̄)"),
    ("AD", "P1·P3·P(B̄,F̄)"),
    ("AF", "P1·P4·P(B̄,F̄)"),
    ("BC", "P2·P(B̄,F̄)"),
    ("CA", "P1·P(B)"),
    ("CB", "P2·P(B)"),
    ("CD", "P3·P(B)"),
    ("CF", "P4·P(B)"),
    ("DA", "P1·P3·P(B̄,F̄)"),
    ("DB", "P2·P3·P(B̄,F̄)"),
    ("DD", "P3·P3·P(B̄,F̄)"),
    ("DF", "P4·P3·P(B̄,F̄)"),
    ("FG", "P4·P(B̄,F̄)"),
    ("GA", "P1·P(F)"),
    ("GB", "P2·P(F)"),
    ("GD", "P3·P(F)"),
    ("GF", "P4·P(F)"),
];

fn factor_multiset(s: &str) -> Vec<String> {
    let mut v: Vec<String> = s.split('·').map(str::to_owned).collect();
    v.sort();
    v
}

fn criterion_1() -> Outcome {
    let all = enumerate_states();
    if all.len() != 39 {
        return outcome(false, format!("{} states", all.len()));
    }
    let table = transition_table();
    let expected: BTreeMap<&str, &str> = AA_ROW.iter().copied().collect();
    for (i, s) in states().iter().enumerate() {
        let name = s.to_string();
        let got = table.factor(aa_index(), i).map(|f| f.to_string());
        let want = expected.get(name.as_str());
        let ok = match (&got, want) {
            (None, None) => true,
            (Some(g), Some(w)) => factor_multiset(g) == factor_multiset(w),
            _ => false,
        };
        if !ok {
            return outcome(false, format!("AA -> {name}: got {got:?}, want {want:?}"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let corners = [
        (0.0, 0.0, 0.0),
        (0.5, 0.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.5, 0.0, 1.0),
        (0.25, 0.5, 0.5),
        (0.36, 1.0, 0.0),
    ];
    let mut worst: f64 = 0.0;
    for draw in 0..100 {
        let (p2, p_b, p_f) = match corners.get(draw) {
            Some(&c) => c,
            None => {
                let p_b: f64 = rng.gen();
                (
                    rng.gen_range(0.0..=0.5),
                    p_b,
                    rng.gen::<f64>() * (1.0 - p_b),
                )
            }
        };
        let dist = GrainDistribution::from_p2(p2).unwrap();
        let fb = FeedbackProbs::new(p_b, p_f).unwrap();
        for s in 0..NUM_STATES {
            worst = worst.max((table.row_sum(s, &dist, &fb) - 1.0).abs());
        }
    }
    outcome(
        worst <= 1e-12,
        format!("39 states, AA row matches, max |row sum - 1| = {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- 2

fn all_y() -> impl Iterator<Item = [i8; 4]> {
    (0..16).map(|k| std::array::from_fn(|i| if k >> i & 1 == 1 { 1 } else { -1 }))
}

fn all_u() -> impl Iterator<Item = [i8; 2]> {
    (0..4).map(|k| std::array::from_fn(|i| if k >> i & 1 == 1 { 1 } else { -1 }))
}

fn criterion_2() -> Outcome {
    let table = channel_table(ChannelModel::Lookahead);
    let values = table.values();
    if values.len() != 2496 {
        return outcome(false, format!("{} entries", values.len()));
    }
    if let Some(v) = values
        .iter()
        .find(|v| ![0.0, 0.125, 0.25, 0.5].contains(*v))
    {
        return outcome(false, format!("entry {v} outside {{0, 1/8, 1/4, 1/2}}"));
    }
    for s in 0..NUM_STATES {
        for u in 0..4 {
            let sum: f64 = table.slice(s, u).iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return outcome(false, format!("slice ({s}, {u}) sums to {sum}"));
            }
        }
    }
    type Rule = fn([i8; 4], [i8; 2]) -> f64;
    let cases: [(&str, Rule); 5] = [
        ("FG", |y, _| {
            if y.iter().all(|&v| v == y[0]) {
                0.5
            } else {
                0.0
            }
        }),
        ("AA", |y, u| {
            if y[0] == u[0] && y[1] == u[1] {
                0.25
            } else {
                0.0
            }
        }),
        ("DD", |y, _| {
            if y[0] == y[2] && y[1] == y[3] {
                0.25
            } else {
                0.0
            }
        }),
        ("EE", |y, u| {
            if y[0] == u[0] && y[1] == u[1] {
                0.25
            } else {
                0.0
            }
        }),
        ("DB", |y, _| if y[0] == y[2] { 0.125 } else { 0.0 }),
    ];
    for (name, rule) in cases {
        let s: GrainState = name.parse().unwrap();
        let idx = s.index().unwrap();
        for u in all_u() {
            for y in all_y() {
                let got = table.get(idx, input_index(u), output_index(y));
                if got != rule(y, u) {
                    return outcome(
                        false,
                        format!("{name} u={u:?} y={y:?}: {got} != {}", rule(y, u)),
                    );
                }
            }
        }
    }
    outcome(
        true,
        "2496 entries in {0, 1/8, 1/4, 1/2}, slices sum to 1, FG/AA/DD/EE/DB cases exact",
    )
}

// ---------------------------------------------------------------- 3

fn sample_tiling(
    rows: usize,
    cols: usize,
    dist: &GrainDistribution,
    rng: &mut ChaCha8Rng,
) -> GrainImage {
    let tilings = enumerate_tilings(rows, cols, dist).unwrap();
    let total: f64 = tilings.iter().map(|t| t.1).sum();
    let mut x = rng.gen::<f64>() * total;
    for (image, w) in &tilings {
        x -= w;
        if x <= 0.0 {
            return image.clone();
        }
    }
    tilings.last().unwrap().0.clone()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    for p2 in [0.0, 0.25, 0.4] {
        let dist = GrainDistribution::from_p2(p2).unwrap();
        let det = TdmrDetector::new(dist);
        for trial in 0..20 {
            let image = sample_tiling(2, 8, &dist, &mut rng);
            let bits: Vec<i8> = (0..16).map(|_| if rng.gen() { 1 } else { -1 }).collect();
            let written = write_bits(&image, &bits).unwrap();
            let apriori: Vec<f64> = if trial % 2 == 0 {
                vec![0.0; 16]
            } else {
                (0..16).map(|_| rng.gen_range(-4.0..4.0)).collect()
            };
            let exact = exact_bit_posteriors(&TinyInstance {
                dist,
                written: written.clone(),
                apriori: Some(apriori.clone()),
            })
            .unwrap();
            let pass = det
                .detector_pass(&written, 0, &apriori, &[FeedbackProbs::NONE; 8])
                .unwrap();
            for (&l, &p) in pass.posterior.iter().zip(&exact) {
                worst = worst.max((1.0 / (1.0 + (-l).exp()) - p).abs());
            }
            instances += 1;
        }
    }
    outcome(
        worst <= 1e-9,
        format!("{instances} instances of 2x8, max posterior gap {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for p2 in [0.0, 0.1, 0.25, 0.36, 0.5] {
        let dist = solve_grain_distribution(p2).unwrap();
        let gen = GrainGenerator::new(dist, &mut rng).unwrap();
        let image = gen.generate(1024, 1024, &mut rng).unwrap();
        if image.cells().len() != 1024 * 1024 {
            return outcome(false, format!("p2={p2}: incomplete coverage"));
        }
        if let Err(e) = image.validate() {
            return outcome(false, format!("p2={p2}: {e}"));
        }
        let freq = image.grain_frequencies();
        for (f, t) in freq.iter().zip(dist.as_array()) {
            worst = worst.max((f - t).abs());
        }
        if freq
            .iter()
            .zip(dist.as_array())
            .any(|(f, t)| (f - t).abs() > 0.02)
        {
            return outcome(
                false,
                format!("p2={p2}: frequencies {freq:?} vs {:?}", dist.as_array()),
            );
        }
    }
    outcome(
        true,
        format!("1024x1024 at 5 values of p2, max frequency error {worst:.4}"),
    )
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for rate in [0.2, 0.25, 1.0 / 3.0, 0.5] {
        let codec = SccCodec::new(rate, 2014).unwrap();
        for _ in 0..10 {
            let user: Vec<u8> = (0..codec.user_len())
                .map(|_| rng.gen_range(0..2u8))
                .collect();
            let coded = codec.encode(&user).unwrap();
            let channel: Vec<f64> = coded
                .iter()
                .map(|&b| 100.0 * bit_to_polarity(b) as f64)
                .collect();
            let out = codec.decoder().decode(&channel, 30, Some(&user)).unwrap();
            if out.errors != Some(0) {
                return outcome(false, format!("rate {rate}: {:?} errors", out.errors));
            }
        }
    }
    let mut worst: f64 = 0.0;
    for (code, terminated) in [
        (ConvCodeSpec::outer(), true),
        (ConvCodeSpec::inner(), false),
    ] {
        for _ in 0..10 {
            let steps = 12 + if terminated { code.memory } else { 0 };
            let channel: Vec<f64> = (0..2 * steps).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let apriori: Vec<f64> = (0..steps).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let map = map_decode(&code, &channel, &apriori, terminated);
            let exact =
                exact_codeword_posteriors(&code, &channel, &apriori, 12, terminated).unwrap();
            let p1 = |l: f64| 1.0 / (1.0 + l.exp());
            for (l, p) in map.input_posterior.iter().zip(&exact.input) {
                worst = worst.max((p1(*l) - p).abs());
            }
            for (l, p) in map.output_posterior.iter().zip(&exact.output) {
                worst = worst.max((p1(*l) - p).abs());
            }
        }
    }
    outcome(
        worst <= 1e-9,
        format!("40 noiseless blocks error-free; MAP vs enumeration max gap {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- 6, 8

fn end_to_end_runs() -> Vec<(f64, Vec<BlockResult>)> {
    [0.0, 0.25, 0.5]
        .into_iter()
        .map(|p2| {
            let cfg = SimConfig {
                p2,
                rate: 0.26,
                mode: Mode::Iterative,
                blocks: 20,
                ..SimConfig::default()
            };
            let sim = Simulation::new(cfg).unwrap();
            (p2, sim.run_blocks(20, false).unwrap())
        })
        .collect()
}

fn summary(runs: &[(f64, Vec<BlockResult>)]) -> String {
    runs.iter()
        .map(|(p2, r)| {
            let errors: usize = r.iter().map(|b| b.bit_errors).sum();
            let failed = r.iter().filter(|b| b.bit_errors > 0).count();
            let avg = r.iter().map(|b| b.outer_iters).sum::<usize>() as f64 / r.len() as f64;
            format!(
                "p2={p2}: {errors} bit errors, {failed}/{} blocks failed, avg outer iters {avg:.2}",
                r.len()
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn criterion_6(runs: &[(f64, Vec<BlockResult>)]) -> Outcome {
    let pass = runs
        .iter()
        .all(|(_, r)| r.len() == 20 && r.iter().all(|b| b.bit_errors == 0));
    outcome(pass, format!("rate 0.26 iterative: {}", summary(runs)))
}

fn criterion_8(runs: &[(f64, Vec<BlockResult>)]) -> Outcome {
    let avg = |p2: f64| {
        let r = &runs.iter().find(|(p, _)| *p == p2).unwrap().1;
        r.iter().map(|b| b.outer_iters).sum::<usize>() as f64 / r.len() as f64
    };
    let max = runs
        .iter()
        .flat_map(|(_, r)| r.iter().map(|b| b.outer_iters))
        .max()
        .unwrap_or(0);
    let (a0, a25) = (avg(0.0), avg(0.25));
    outcome(
        max <= 30 && a0 < a25,
        format!("max outer iters {max}; average {a0:.2} at p2=0 vs {a25:.2} at p2=0.25"),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let mut best = BTreeMap::new();
    for p2 in [0.0, 0.25, 0.5] {
        for mode in [Mode::NonIterative, Mode::Iterative] {
            let cfg = SimConfig {
                p2,
                mode,
                rate_min: 0.18,
                rate_max: 0.40,
                rate_step: 0.02,
                ..SimConfig::default()
            };
            let search = rate_search(&cfg, 20).unwrap();
            best.insert((format!("{p2}"), mode.to_string()), search.best_rate);
        }
    }
    let get = |p2: &str, mode: Mode| best[&(p2.to_string(), mode.to_string())];
    let mut failures = Vec::new();
    for p2 in ["0", "0.25", "0.5"] {
        if get(p2, Mode::Iterative) < get(p2, Mode::NonIterative) {
            failures.push(format!("iterative below non-iterative at p2={p2}"));
        }
    }
    for mode in [Mode::NonIterative, Mode::Iterative] {
        if get("0", mode) < get("0.25", mode) {
            failures.push(format!("{mode}: p2=0 below p2=0.25"));
        }
    }
    let table = best
        .iter()
        .map(|((p2, mode), r)| format!("p2={p2} {mode} {r:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    let detail = if failures.is_empty() {
        format!("best rates: {table}")
    } else {
        format!("{}; best rates: {table}", failures.join("; "))
    };
    outcome(failures.is_empty(), detail)
}

fn main() {
    // Honour `cargo test -- --list` and name filters minimally: this target has
    // a single logical test.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }

    let mut results: Vec<(u8, Outcome, Duration)> = Vec::new();
    let mut record = |id: u8, (o, d): (Outcome, Duration)| {
        println!(
            "criterion {id}: {} ({:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            d.as_secs_f64(),
            o.detail
        );
        results.push((id, o, d));
    };

    record(1, timed(Some(Duration::from_secs(1)), criterion_1));
    record(2, timed(Some(Duration::from_secs(1)), criterion_2));
    record(3, timed(Some(Duration::from_secs(60)), criterion_3));
    record(4, timed(Some(Duration::from_secs(60)), criterion_4));
    record(5, timed(Some(Duration::from_secs(120)), criterion_5));
    let start = Instant::now();
    let runs = end_to_end_runs();
    let e2e = start.elapsed();
    record(6, (criterion_6(&runs), e2e));
    record(7, timed(None, criterion_7));
    record(8, (criterion_8(&runs), Duration::ZERO));

    let failed: Vec<u8> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all 8 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
