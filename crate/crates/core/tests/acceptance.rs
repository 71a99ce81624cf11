//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a gating criterion fails.
//!
//! The two transfer suites (restaurant to tourist, movie to restaurant)
//! run at desk scale: 20 repeats of 30 epochs, sources trained for
//! `SOURCE_EPOCHS` epochs. They take most of the runtime. Set
//! `GOBOT_ACCEPTANCE_OUT` to a directory to keep their CSV tables.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use gobot::agent::{evaluate_policy, select_action, DialogueEnv, RandomPolicy, RulePolicy};
use gobot::domain::{build_unified_space, load_goals, DomainSchema, UnifiedSpace, REQUIRED_INTENTS};
use gobot::harness::{
    run_with_sources, std_dev, train_sources, AggregateResult, ExperimentOutputs, ExperimentPlan, ExperimentResult,
    Metric, RunRecord, Variant,
};
use gobot::kb::KnowledgeBase;
use gobot::neural::{train_batch, Experience, QWeights, ReplayBuffer};
use gobot::tracker::{FeatureLayout, StateVector, SLOT_BLOCKS};
use gobot::transfer::{initialize_weights, TransferSpec};

const MASTER_SEED: u64 = 7;
const SOURCE_EPOCHS: usize = 100;
const EFFECT_SIZES: [usize; 5] = [5, 10, 20, 30, 50];
const FULL_SIZE: usize = 120;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- 1

fn schema(name: &str, slots: &[String]) -> DomainSchema {
    DomainSchema {
        name: name.into(),
        slots: slots.to_vec(),
        user_intents: REQUIRED_INTENTS.iter().map(|s| s.to_string()).collect(),
        kb_ref: "kb.json".into(),
    }
}

/// Source weights where every entry is a distinct value far outside the
/// fresh initialization range.
fn marked(space: &UnifiedSpace, h: usize) -> QWeights {
    let d = FeatureLayout::new(space).dim();
    let mut w = QWeights::zeros(d, h, space.n_actions(), space.manifest_digest);
    for (i, x) in w.w1.iter_mut().enumerate() {
        *x = 1000.0 + i as f64;
    }
    for (i, x) in w.w2.iter_mut().enumerate() {
        *x = -1000.0 - i as f64;
    }
    for (i, x) in w.b1.iter_mut().enumerate() {
        *x = 500.0 + i as f64;
    }
    for (i, x) in w.b2.iter_mut().enumerate() {
        *x = -500.0 - i as f64;
    }
    w
}

/// Slot named by a feature or action label, if any.
fn label_slot(label: &str) -> Option<&str> {
    let (block, rest) = label.split_once(':')?;
    if block == "agent_action" {
        return rest.split_once('(').map(|(_, s)| s.trim_end_matches(')'));
    }
    SLOT_BLOCKS.contains(&block).then_some(rest)
}

/// Checks one transfer against the name-based oracle: a row or column is
/// mapped iff everything it refers to exists in both schemas.
fn check_transfer(source: &DomainSchema, target: &DomainSchema, h: usize, seed: u64) -> Result<(usize, usize), String> {
    let space = build_unified_space(source, target).map_err(|e| e.to_string())?;
    let common: BTreeSet<&str> = source
        .slots
        .iter()
        .filter(|s| target.has_slot(s))
        .map(String::as_str)
        .collect();
    let mapped = |slot: Option<&str>| slot.is_none_or(|s| common.contains(s));
    let src = marked(&space, h);
    let out = initialize_weights(&TransferSpec {
        source_weights: &src,
        space: &space,
        fresh_seed: seed,
    })
    .map_err(|e| e.to_string())?;

    let labels = FeatureLayout::new(&space).labels(&space);
    let same = |a: f64, b: f64| a.to_bits() == b.to_bits();
    let (mut rows, mut cols) = (0, 0);
    for (i, label) in labels.iter().enumerate() {
        let row = i * h..(i + 1) * h;
        let hits = row.clone().filter(|&k| same(out.w1[k], src.w1[k])).count();
        if mapped(label_slot(label)) {
            if hits != h {
                return Err(format!("row `{label}` copied {hits} of {h}"));
            }
            rows += 1;
        } else if hits != 0 {
            return Err(format!("row `{label}` has {hits} source values"));
        }
    }
    let a_n = space.n_actions();
    for (a, action) in space.actions.iter().enumerate() {
        let hits = (0..h)
            .filter(|&j| same(out.w2[j * a_n + a], src.w2[j * a_n + a]))
            .count()
            + usize::from(same(out.b2[a], src.b2[a]));
        if mapped(action.slot()) {
            if hits != h + 1 {
                return Err(format!("action `{action}` copied {hits} of {}", h + 1));
            }
            cols += 1;
        } else if hits != 0 {
            return Err(format!("action `{action}` has {hits} source values"));
        }
    }
    if !out.b1.iter().zip(&src.b1).all(|(a, b)| same(*a, *b)) {
        return Err("b1 not copied".into());
    }
    Ok((rows, cols))
}

fn criterion_1() -> Verdict {
    let mut notes = Vec::new();
    for (a, b) in [("movie", "restaurant"), ("restaurant", "tourist")] {
        let s = DomainSchema::load(&schema_path(a)).unwrap();
        let t = DomainSchema::load(&schema_path(b)).unwrap();
        match check_transfer(&s, &t, 80, 3) {
            Ok((rows, cols)) => notes.push(format!("{a}->{b}: {rows} rows, {cols} actions copied")),
            Err(e) => return verdict(false, format!("{a}->{b}: {e}")),
        }
    }

    let pool: Vec<String> = [
        "area", "city", "date", "food", "name", "near", "phone", "price", "time", "type",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let subset = proptest::sample::subsequence(pool.clone(), 1..=pool.len());
    let mut runner = TestRunner::new_with_rng(
        PropConfig {
            cases: 200,
            failure_persistence: None,
            ..PropConfig::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let result = runner.run(
        &(subset.clone(), subset, 1usize..12, any::<u64>()),
        |(s, t, h, seed)| {
            let outcome = check_transfer(&schema("src", &s), &schema("tgt", &t), h, seed);
            prop_assert!(outcome.is_ok(), "{:?}", outcome);
            Ok(())
        },
    );
    match result {
        Ok(()) => {
            notes.push("200 random schema pairs".into());
            verdict(true, notes.join("; "))
        }
        Err(e) => verdict(false, format!("random schemas: {e}")),
    }
}

// ---------------------------------------------------------------- 2

fn loss(w: &QWeights, target: &QWeights, batch: &[&Experience]) -> f64 {
    w.gradient(target, batch, 0.9).unwrap().0
}

fn param(w: &mut QWeights, part: usize) -> &mut Vec<f64> {
    match part {
        0 => &mut w.w1,
        1 => &mut w.b1,
        2 => &mut w.w2,
        _ => &mut w.b2,
    }
}

/// Relative error `|g - n| / (|g| + |n|)` between the analytic gradient
/// and central differences, over all parameters of one random net.
fn gradient_error(rng: &mut ChaCha8Rng) -> f64 {
    let d = rng.gen_range(2..10);
    let h = rng.gen_range(2..10);
    let n_actions = rng.gen_range(2..6);
    let mut w = QWeights::rand_init(d, h, n_actions, 0, rng.gen());
    let target = QWeights::rand_init(d, h, n_actions, 0, rng.gen());
    let state = |rng: &mut ChaCha8Rng| StateVector {
        values: (0..d)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    0.0
                } else {
                    rng.gen_range(-1.0..1.0)
                }
            })
            .collect(),
    };
    let batch: Vec<Experience> = (0..rng.gen_range(1..9))
        .map(|_| Experience {
            state: state(rng),
            action: rng.gen_range(0..n_actions),
            reward: [-1.0, -20.0, 40.0][rng.gen_range(0..3)],
            next_state: state(rng),
            done: rng.gen_bool(0.3),
        })
        .collect();
    let batch: Vec<&Experience> = batch.iter().collect();
    let (_, g) = w.gradient(&target, &batch, 0.9).unwrap();
    let analytic: Vec<f64> = [&g.w1, &g.b1, &g.w2, &g.b2].into_iter().flatten().copied().collect();

    let eps = 1e-6;
    let mut numeric = Vec::with_capacity(analytic.len());
    for part in 0..4 {
        for i in 0..param(&mut w, part).len() {
            let orig = param(&mut w, part)[i];
            param(&mut w, part)[i] = orig + eps;
            let up = loss(&w, &target, &batch);
            param(&mut w, part)[i] = orig - eps;
            let down = loss(&w, &target, &batch);
            param(&mut w, part)[i] = orig;
            numeric.push((up - down) / (2.0 * eps));
        }
    }
    let diff: f64 = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / (norm(&analytic) + norm(&numeric)).max(1e-12)
}

/// Q-learning on the chain with the network module. Returns the first
/// checked episode at which the max-norm error drops below 0.05.
fn chain_run(seed: u64, oracle: &[[f64; 2]; N_CHAIN]) -> (Option<usize>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = QWeights::rand_init(N_CHAIN, 16, 2, 0, seed);
    let mut target = w.clone();
    let mut buffer = ReplayBuffer::new(2000);
    let mut steps = 0usize;
    let error = |w: &QWeights| -> f64 {
        (0..N_CHAIN)
            .flat_map(|s| {
                let q = w.forward(&one_hot(s)).unwrap();
                [(q[0] - oracle[s][0]).abs(), (q[1] - oracle[s][1]).abs()]
            })
            .fold(0.0, f64::max)
    };
    let mut last = f64::INFINITY;
    for episode in 1..=2000usize {
        let mut s = rng.gen_range(0..N_CHAIN);
        for _ in 0..20 {
            let state = StateVector { values: one_hot(s) };
            let a = select_action(&w, &state, 0.3, &mut rng).unwrap();
            let (next, r) = chain_step(s, a);
            buffer.push(Experience {
                state,
                action: a,
                reward: r,
                next_state: StateVector {
                    values: next.map_or(vec![0.0; N_CHAIN], one_hot),
                },
                done: next.is_none(),
            });
            if buffer.len() >= 16 {
                let batch = buffer.sample(16, &mut rng).unwrap();
                train_batch(&mut w, &target, &batch, 0.05, 0.9).unwrap();
            }
            steps += 1;
            if steps.is_multiple_of(50) {
                target = w.clone();
            }
            match next {
                Some(n) => s = n,
                None => break,
            }
        }
        if episode.is_multiple_of(25) {
            last = error(&w);
            if last < 0.05 {
                return (Some(episode), last);
            }
        }
    }
    (None, last)
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let worst = (0..100).map(|_| gradient_error(&mut rng)).fold(0.0, f64::max);
    let oracle = chain_value_iteration(0.9);
    let runs: Vec<_> = (0..20).map(|seed| chain_run(seed, &oracle)).collect();
    let reached = runs.iter().filter(|(e, _)| e.is_some()).count();
    let slowest = runs.iter().filter_map(|(e, _)| *e).max().unwrap_or(0);
    verdict(
        worst < 1e-5 && reached >= 19,
        format!(
            "worst gradient relative error {worst:.2e} over 100 nets; chain within 0.05 of Q* for {reached}/20 seeds (slowest at episode {slowest})"
        ),
    )
}

// ---------------------------------------------------------------- 3, 4

fn restaurant_env() -> (DialogueEnv, Vec<gobot::domain::UserGoal>) {
    let schema = DomainSchema::load(&schema_path("restaurant")).unwrap();
    let kb = KnowledgeBase::load(&schema).unwrap();
    let space = build_unified_space(&schema, &schema).unwrap();
    let mut goals = load_goals(&goals_path("restaurant", "train"), &schema).unwrap();
    goals.extend(load_goals(&goals_path("restaurant", "test"), &schema).unwrap());
    (
        DialogueEnv::new(Arc::new(space), Arc::new(schema), Arc::new(kb), 20),
        goals,
    )
}

fn criterion_3() -> Verdict {
    let (env, goals) = restaurant_env();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut sim = env.simulator(3);
    let mut record = Vec::new();
    let (mut successes, mut longest) = (0usize, 0usize);
    for i in 0..10_000 {
        record.clear();
        let goal = &goals[rng.gen_range(0..goals.len())];
        let mut policy = RandomPolicy { rng: &mut rng };
        let episode = env
            .run_dialogue(&mut sim, goal, &mut policy, Some(&mut record), None)
            .unwrap();
        longest = longest.max(record.len());
        successes += usize::from(episode.success);
        let (last, rest) = record.split_last().unwrap();
        let terminal_ok = last.done && (last.reward == -20.0 || last.reward == 40.0);
        let steps_ok = rest.iter().all(|e| !e.done && e.reward == -1.0);
        let success_ok = (last.reward == 40.0) == episode.success;
        if record.len() > 20 || episode.turns > 20 || !terminal_ok || !steps_ok || !success_ok {
            return verdict(
                false,
                format!(
                    "dialogue {i}: {} steps, rewards {:?}",
                    record.len(),
                    record.iter().map(|e| e.reward).collect::<Vec<_>>()
                ),
            );
        }
    }
    verdict(
        true,
        format!("10000 random dialogues, longest {longest} turns, {successes} successes"),
    )
}

fn criterion_4() -> Verdict {
    let (env, goals) = restaurant_env();
    let rate = evaluate_policy(&env, &mut RulePolicy, &goals, 3, 4).unwrap();
    verdict(
        rate >= 0.3,
        format!("rule agent success {rate:.3} on {} restaurant goals x 3", goals.len()),
    )
}

// ---------------------------------------------------------------- suites

struct Suite {
    name: &'static str,
    effect: ExperimentResult,
    four_way: ExperimentResult,
}

fn plan(source: &str, target: &str, sizes: Vec<usize>, variants: Vec<Variant>) -> ExperimentPlan {
    ExperimentPlan {
        source_schema: schema_path(source),
        source_goals: goals_path(source, "train"),
        target_schema: schema_path(target),
        target_goals: goals_path(target, "train"),
        test_goals: goals_path(target, "test"),
        sizes,
        variants,
        source_epochs: Some(SOURCE_EPOCHS),
        master_seed: MASTER_SEED,
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..ExperimentPlan::default()
    }
}

fn run_suite(name: &'static str, source: &str, target: &str) -> Suite {
    let start = Instant::now();
    let effect_plan = plan(
        source,
        target,
        EFFECT_SIZES.to_vec(),
        vec![Variant::TransferWarmStart, Variant::WarmStartOnly],
    );
    let four_plan = plan(source, target, vec![FULL_SIZE], Variant::ALL.to_vec());
    let data = effect_plan.load_data().unwrap();
    effect_plan.validate(&data).unwrap();
    let sources = train_sources(&effect_plan, &data).unwrap();
    let effect = run_with_sources(&effect_plan, &data, sources.clone()).unwrap();
    let four_way = run_with_sources(&four_plan, &data, sources).unwrap();
    if let Some(dir) = std::env::var_os("GOBOT_ACCEPTANCE_OUT") {
        for (part, result) in [("effect", &effect), ("four_way", &four_way)] {
            let dir = std::path::Path::new(&dir).join(name).join(part);
            std::fs::create_dir_all(&dir).unwrap();
            ExperimentOutputs::in_dir(&dir).write(result).unwrap();
        }
    }
    eprintln!("suite {name}: {:.0} s", start.elapsed().as_secs_f64());
    Suite { name, effect, four_way }
}

fn find(rows: &[AggregateResult], v: Variant, x: usize) -> &AggregateResult {
    rows.iter().find(|r| r.variant == v && r.x == x).expect("aggregate row")
}

fn table(rows: &[AggregateResult]) -> String {
    rows.iter()
        .map(|r| format!("{} n={} {:.3}+-{:.3}", r.variant, r.x, r.mean, r.ci95))
        .collect::<Vec<_>>()
        .join(", ")
}

fn criterion_5(s: &Suite) -> Verdict {
    let rows = s.effect.by_size(Metric::Test);
    let gaps: Vec<f64> = EFFECT_SIZES
        .iter()
        .map(|&x| find(&rows, Variant::TransferWarmStart, x).mean - find(&rows, Variant::WarmStartOnly, x).mean)
        .collect();
    let gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    verdict(
        gap >= 0.20,
        format!(
            "{}: mean test gap TL+WS - WS = {gap:.3} (need >= 0.20); {}",
            s.name,
            table(&rows)
        ),
    )
}

fn criterion_6(s: &Suite) -> Verdict {
    let rows = s.effect.by_size(Metric::Train);
    let mut pass = true;
    for &x in &EFFECT_SIZES {
        let (a, b) = (
            find(&rows, Variant::TransferWarmStart, x),
            find(&rows, Variant::WarmStartOnly, x),
        );
        pass &= a.mean > b.mean;
        if x <= 20 {
            pass &= a.mean - a.ci95 > b.mean + b.ci95;
        }
    }
    verdict(pass, format!("{}: train success {}", s.name, table(&rows)))
}

fn criterion_7(suites: &[Suite]) -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for s in suites {
        let rows = s.four_way.by_size(Metric::Test);
        let best = find(&rows, Variant::TransferWarmStart, FULL_SIZE).mean;
        let top = rows.iter().map(|r| r.mean).fold(f64::NEG_INFINITY, f64::max);
        pass &= best >= top;
        notes.push(format!("{}: {}", s.name, table(&rows)));
    }
    verdict(pass, notes.join("; "))
}

/// The epoch that must carry the flush flag, if any.
fn expected_flush(reports: &[gobot::agent::EpochReport]) -> Option<usize> {
    reports.iter().find(|r| r.explore_success_rate >= 0.3).map(|r| r.epoch)
}

fn criterion_8(suites: &[Suite]) -> Verdict {
    let mut logs: Vec<(String, &[gobot::agent::EpochReport])> = Vec::new();
    for s in suites {
        for result in [&s.effect, &s.four_way] {
            logs.extend(
                result
                    .runs
                    .iter()
                    .map(|r: &RunRecord| (r.run_id.clone(), r.reports.as_slice())),
            );
        }
        logs.extend(
            s.effect
                .source_reports
                .iter()
                .enumerate()
                .map(|(i, r)| (format!("source-{i}"), r.as_slice())),
        );
    }
    let mut flushed = 0;
    for (id, reports) in &logs {
        let flags: Vec<usize> = reports.iter().filter(|r| r.flushed).map(|r| r.epoch).collect();
        if flags.len() > 1 || flags.first().copied() != expected_flush(reports) {
            return verdict(
                false,
                format!("{id}: flushed at {flags:?}, expected {:?}", expected_flush(reports)),
            );
        }
        flushed += flags.len();
    }
    verdict(
        true,
        format!(
            "{} logged runs, {flushed} flushed, all at the first epoch with explore success >= 0.3",
            logs.len()
        ),
    )
}

fn criterion_9() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    match cli_reproducibility(dir.path()) {
        Ok(diff) if diff.is_empty() => verdict(true, "train, transfer, eval and experiment outputs byte-identical"),
        Ok(diff) => verdict(false, format!("differing files: {diff:?}")),
        Err(e) => verdict(false, e),
    }
}

fn criterion_10(suites: &[Suite]) -> Verdict {
    let mut pass = false;
    let mut notes = Vec::new();
    for s in suites {
        let runs = |v: Variant| s.four_way.completed().filter(move |r| r.variant == v);
        let zero = runs(Variant::TransferOnly)
            .filter(|r| {
                r.reports
                    .iter()
                    .all(|e| e.test_success_rate == 0.0 && e.train_success_rate == 0.0)
            })
            .count();
        let at10 = |v: Variant| -> Vec<f64> {
            runs(v)
                .filter_map(|r| r.reports.get(10))
                .map(|e| e.test_success_rate)
                .collect()
        };
        let sd_tl = std_dev(&at10(Variant::TransferOnly)).unwrap_or(0.0);
        let sd_both = std_dev(&at10(Variant::TransferWarmStart)).unwrap_or(0.0);
        pass |= zero > 0 || sd_tl > sd_both;
        notes.push(format!(
            "{}: {zero} all-zero TL runs, epoch-10 test sd TL {sd_tl:.3} vs TL+WS {sd_both:.3}",
            s.name
        ));
    }
    verdict(pass, notes.join("; "))
}

fn main() -> ExitCode {
    let mut failed_gating = Vec::new();
    let mut report = |n: usize, gating: bool, v: Verdict| {
        let status = if v.pass { "PASS" } else { "FAIL" };
        let tag = if gating { "" } else { " (logged, not gating)" };
        println!("criterion {n}: {status}{tag}: {}", v.detail);
        if gating && !v.pass {
            failed_gating.push(n);
        }
    };

    let timed = |f: fn() -> Verdict| {
        let start = Instant::now();
        let v = f();
        Verdict {
            detail: format!("{} [{:.1} s]", v.detail, start.elapsed().as_secs_f64()),
            ..v
        }
    };
    report(1, true, timed(criterion_1));
    report(2, true, timed(criterion_2));
    report(3, true, timed(criterion_3));
    report(4, true, timed(criterion_4));

    let extension = run_suite("restaurant->tourist", "restaurant", "tourist");
    report(5, true, criterion_5(&extension));
    let overlap = run_suite("movie->restaurant", "movie", "restaurant");
    report(6, true, criterion_6(&overlap));
    let suites = [extension, overlap];
    report(7, true, criterion_7(&suites));
    report(8, true, criterion_8(&suites));
    report(9, true, timed(criterion_9));
    report(10, false, criterion_10(&suites));

    if failed_gating.is_empty() {
        println!("acceptance: all gating criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed_gating:?}");
        ExitCode::FAILURE
    }
}
