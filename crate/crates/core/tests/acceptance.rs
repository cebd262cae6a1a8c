//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any hard criterion fails. The timing criterion only warns.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use zil_graph::autodiff::{backprop, forward, grad_check};
use zil_graph::graph::{Activation, ParamKey};
use zil_graph::harness::report::angle_degrees;
use zil_graph::harness::{run_ablation_suite, run_benchmark, run_equivalence_suite, ExperimentConfig};
use zil_graph::leveller::{audit_paths, level};
use zil_graph::pc::{il_train_step, Stopping};
use zil_graph::zil::{check_quiet_before_arrival, zil_train_step, ZilVariant};
use zil_graph::zoo::{build_model, random_graph, untie, Family, ModelSpec};

const SEEDS: u64 = 20;
const RANDOM_GRAPHS: u64 = 100;
const EXACT: f64 = 1e-9;
const POSITIVE: f64 = 1e-6;
const IL_OUTPUT_ERROR: f64 = 1e-3;

enum Outcome {
    Pass(String),
    Fail(String),
    Warn(String),
}

type Check = fn() -> Outcome;

fn spec(family: Family, dims: &[usize]) -> ModelSpec {
    ModelSpec::new(family, dims.to_vec(), Activation::Tanh, 0)
}

fn exact_families() -> Vec<ModelSpec> {
    vec![
        spec(Family::Mlp, &[4, 16, 1]),
        spec(Family::Mlp, &[4, 16, 16, 1]),
        spec(Family::Mlp, &[4, 16, 16, 16, 1]),
        spec(Family::Conv1d, &[8, 3]),
        spec(Family::Conv1d, &[8, 3, 2]),
        spec(Family::Rnn, &[3, 4, 5]),
    ]
}

fn skip_families() -> Vec<ModelSpec> {
    vec![spec(Family::Residual, &[4, 4, 4, 1]), spec(Family::ToyAttention, &[4])]
}

fn suite_cfg(models: Vec<ModelSpec>) -> ExperimentConfig {
    ExperimentConfig { models, seeds: (0..SEEDS).collect(), ..ExperimentConfig::default() }
}

fn fmt_failures<'a>(items: impl Iterator<Item = &'a String>) -> String {
    let v: Vec<&String> = items.take(5).collect();
    v.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("; ")
}

fn ac1_layer_indexed_exact() -> Outcome {
    let start = Instant::now();
    let res = match run_equivalence_suite(&suite_cfg(exact_families())) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let rows: Vec<_> = res.rows.iter().filter(|r| r.algorithm == ZilVariant::LayerIndexed.tag()).collect();
    let worst = rows.iter().map(|r| r.divergence).fold(0.0, f64::max);
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| r.divergence > EXACT)
        .map(|r| format!("{} seed {}: {:e}", r.model, r.seed, r.divergence))
        .collect();
    let detail = format!("{} runs, max divergence {worst:.2e}, {elapsed:.2}s", rows.len());
    if bad.is_empty() && elapsed < 30.0 && rows.len() == 6 * SEEDS as usize {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(format!("{detail}; {}", fmt_failures(bad.iter())))
    }
}

fn ac2_layer_indexed_fails_on_skips() -> Outcome {
    let res = match run_equivalence_suite(&suite_cfg(skip_families())) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let rows: Vec<_> = res.rows.iter().filter(|r| r.graph == "raw").collect();
    let least = rows.iter().map(|r| r.divergence).fold(f64::INFINITY, f64::min);
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| r.divergence.is_nan() || r.divergence <= POSITIVE)
        .map(|r| format!("{} seed {}: {:e}", r.model, r.seed, r.divergence))
        .collect();
    let detail = format!("{} runs, min divergence {least:.2e}", rows.len());
    if bad.is_empty() && rows.len() == 2 * SEEDS as usize {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(format!("{detail}; {}", fmt_failures(bad.iter())))
    }
}

fn all_families() -> Vec<ModelSpec> {
    let mut v = exact_families();
    v.extend(skip_families());
    v
}

fn ac3_level_structured_exact() -> Outcome {
    let res = match run_equivalence_suite(&suite_cfg(all_families())) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let rows: Vec<_> = res.rows.iter().filter(|r| r.algorithm == ZilVariant::LevelStructured.tag()).collect();
    let worst = rows.iter().map(|r| r.divergence).fold(0.0, f64::max);
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| r.divergence > EXACT)
        .map(|r| format!("{} seed {}: {:e}", r.model, r.seed, r.divergence))
        .collect();
    let detail = format!("{} runs on levelled graphs, max divergence {worst:.2e}", rows.len());
    if bad.is_empty() {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(format!("{detail}; {}", fmt_failures(bad.iter())))
    }
}

fn ac4_ablations_diverge() -> Outcome {
    let res = match run_ablation_suite(&suite_cfg(all_families())) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let mut least: BTreeMap<String, f64> = BTreeMap::new();
    let mut bad = Vec::new();
    for r in &res.rows {
        let e = least.entry(r.algorithm.clone()).or_insert(f64::INFINITY);
        *e = e.min(r.divergence);
        if r.divergence.is_nan() || r.divergence <= POSITIVE {
            bad.push(format!("{} seed {} {}: {:e}", r.model, r.seed, r.algorithm, r.divergence));
        }
    }
    let detail = least.iter().map(|(k, v)| format!("{k} min {v:.2e}")).collect::<Vec<_>>().join(", ");
    if bad.is_empty() {
        Outcome::Pass(format!("{} runs; {detail}", res.rows.len()))
    } else {
        Outcome::Fail(format!("{detail}; {}", fmt_failures(bad.iter())))
    }
}

fn random_size(seed: u64) -> usize {
    6 + (seed % 7) as usize
}

fn ac5_leveller_neutral() -> Outcome {
    let mut bad = Vec::new();
    let mut inserted = 0;
    for seed in 0..RANDOM_GRAPHS {
        let m = match random_graph(seed, random_size(seed)) {
            Ok(m) => m,
            Err(e) => return Outcome::Fail(format!("seed {seed}: {e}")),
        };
        let (lv, report) = m.levelled();
        inserted += report.inserted;
        let f0 = forward(&m.graph, &m.params).unwrap().mu;
        let f1 = forward(&lv.graph, &lv.params).unwrap().mu;
        let fw_same = (0..m.graph.len()).all(|i| f0[i].iter().zip(&f1[i]).all(|(a, b)| a.to_bits() == b.to_bits()));
        let b0 = backprop(&m.graph, &m.params, m.target, 0.1).unwrap().update.flat();
        let b1 = backprop(&lv.graph, &lv.params, lv.target, 0.1).unwrap().update.flat();
        let bp_same = b0.len() == b1.len() && b0.iter().zip(&b1).all(|(a, b)| a.to_bits() == b.to_bits());
        let audit_ok =
            audit_paths(&lv.graph, usize::MAX).map(|paths| paths.values().all(|s| s.len() == 1)).unwrap_or(false);
        let (_, again) = level(&lv.graph);
        if !(fw_same && bp_same && audit_ok && again.inserted == 0) {
            bad.push(format!(
                "seed {seed}: forward {fw_same} bp {bp_same} audit {audit_ok} reinserted {}",
                again.inserted
            ));
        }
    }
    if bad.is_empty() {
        Outcome::Pass(format!("{RANDOM_GRAPHS} random graphs, {inserted} identities inserted in total"))
    } else {
        Outcome::Fail(fmt_failures(bad.iter()))
    }
}

fn ac6_gradients_match_finite_differences() -> Outcome {
    let mut models = Vec::new();
    for s in all_families().into_iter().chain([spec(Family::SqrtToy, &[]), spec(Family::SkipToy, &[])]) {
        for seed in 0..3 {
            models.push((format!("{} seed {seed}", s.label()), build_model(&s.with_seed(seed))));
        }
    }
    for seed in 0..RANDOM_GRAPHS {
        models.push((format!("random seed {seed}"), random_graph(seed, random_size(seed))));
    }
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (name, m) in &models {
        let m = match m {
            Ok(m) => m,
            Err(e) => return Outcome::Fail(format!("{name}: {e}")),
        };
        match grad_check(&m.graph, &m.params, m.target, 1e-6) {
            Ok(gc) => {
                worst = worst.max(gc.max_rel_error);
                if gc.max_rel_error.is_nan() || gc.max_rel_error >= 1e-6 {
                    bad.push(format!("{name}: {:e}", gc.max_rel_error));
                }
            }
            Err(e) => bad.push(format!("{name}: {e}")),
        }
    }
    let detail = format!("{} models, max relative error {worst:.2e}", models.len());
    if bad.is_empty() {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(format!("{detail}; {}", fmt_failures(bad.iter())))
    }
}

fn ac7_no_early_errors() -> Outcome {
    let mut runs = 0;
    let mut violations = 0;
    let mut bad = Vec::new();
    for s in all_families() {
        for seed in 0..SEEDS {
            let (lv, _) = build_model(&s.with_seed(seed)).unwrap().levelled();
            let (_, trace) =
                zil_train_step(&lv.graph, &lv.params, lv.target, 0.01, ZilVariant::LevelStructured).unwrap();
            let check = check_quiet_before_arrival(&trace, &lv.graph);
            runs += 1;
            violations += check.violations.len();
            if !check.holds {
                bad.push(format!("{} seed {seed}: {} violations", s.label(), check.violations.len()));
            }
        }
    }
    if bad.is_empty() {
        Outcome::Pass(format!("{runs} level-scheduled runs, {violations} violations"))
    } else {
        Outcome::Fail(fmt_failures(bad.iter()))
    }
}

fn ac8_tied_update_is_member_sum() -> Outcome {
    let mut worst = 0.0f64;
    let mut groups = 0;
    for s in [spec(Family::Conv1d, &[8, 3]), spec(Family::Conv1d, &[8, 3, 2]), spec(Family::Rnn, &[3, 4, 5])] {
        for seed in 0..SEEDS {
            let m = build_model(&s.with_seed(seed)).unwrap();
            let loose = untie(&m.graph);
            let tied = backprop(&m.graph, &m.params, m.target, 0.01).unwrap().update;
            let free = backprop(&loose, &m.params, m.target, 0.01).unwrap().update;
            for tg in m.graph.tie_groups() {
                groups += 1;
                let got = tied.get(ParamKey::Tied(tg.id)).unwrap();
                let mut sum = vec![0.0; got.len()];
                for &v in &tg.members {
                    for (acc, d) in sum.iter_mut().zip(free.get(ParamKey::Leaf(v)).unwrap()) {
                        *acc += d;
                    }
                }
                let dev = got.iter().zip(&sum).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst = worst.max(dev);
            }
        }
    }
    let detail = format!("{groups} tie groups, max deviation {worst:.2e}");
    if groups > 0 && worst <= 1e-12 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn ac9_timing_order() -> Outcome {
    let cfg = ExperimentConfig::bench_default();
    match run_benchmark(&cfg) {
        Ok(res) => {
            let median = |alg: &str| res.rows.iter().find(|r| r.algorithm == alg).map_or(f64::NAN, |r| r.median_ms);
            let (bp, il, zil) = (median("bp"), median("il"), median("zil_level"));
            let detail = format!(
                "median BP {bp:.4}ms, IL(T={}) {il:.4}ms, Z-IL {zil:.4}ms; IL/Z-IL {:.2}x, Z-IL/BP {:.2}x",
                cfg.il_steps,
                il / zil,
                zil / bp
            );
            if il >= 5.0 * zil && zil <= 3.0 * bp {
                Outcome::Pass(detail)
            } else {
                Outcome::Warn(detail)
            }
        }
        Err(e) => Outcome::Warn(e.to_string()),
    }
}

fn ac10_il_approaches_bp() -> Outcome {
    let m = build_model(&ModelSpec::new(Family::Mlp, vec![4, 8, 1], Activation::Linear, 0)).unwrap();
    // IL settles near BP only while the output error is small
    let y = forward(&m.graph, &m.params).unwrap().output(&m.graph) + IL_OUTPUT_ERROR;
    let bp = backprop(&m.graph, &m.params, y, 0.01).unwrap().update;
    let mut angles = Vec::new();
    for t in [10, 50, 200, 1000] {
        let il = il_train_step(&m.graph, &m.params, y, 0.01, 0.05, Stopping::Fixed(t)).unwrap();
        angles.push((t, angle_degrees(&il, &bp)));
    }
    let monotone = angles.windows(2).all(|w| w[1].1 <= w[0].1);
    let last = angles.last().unwrap().1;
    let detail = angles.iter().map(|(t, a)| format!("T={t}: {a:.3}°")).collect::<Vec<_>>().join(", ");
    if monotone && last < 5.0 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn main() -> ExitCode {
    let checks: [(&str, &str, Check); 10] = [
        ("AC1", "layer-indexed Z-IL equals BP on layered models", ac1_layer_indexed_exact),
        ("AC2", "layer-indexed Z-IL differs from BP with skip connections", ac2_layer_indexed_fails_on_skips),
        ("AC3", "level-scheduled Z-IL equals BP on levelled graphs", ac3_level_structured_exact),
        ("AC4", "each ablation breaks exactness", ac4_ablations_diverge),
        ("AC5", "levelling preserves forward values and BP bit for bit", ac5_leveller_neutral),
        ("AC6", "BP matches central finite differences", ac6_gradients_match_finite_differences),
        ("AC7", "errors stay zero before a vertex's level is reached", ac7_no_early_errors),
        ("AC8", "tied update equals the sum over untied members", ac8_tied_update_is_member_sum),
        ("AC9", "timing order IL > Z-IL ~ BP (soft)", ac9_timing_order),
        ("AC10", "IL update angle to BP shrinks with T", ac10_il_approaches_bp),
    ];
    let mut failed = 0;
    for (id, what, check) in checks {
        match check() {
            Outcome::Pass(d) => println!("{id:<5} PASS  {what}: {d}"),
            Outcome::Warn(d) => println!("{id:<5} WARN  {what}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("{id:<5} FAIL  {what}: {d}");
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria met");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
