// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Runs without a test harness.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use instprobe::actstore::{ActivationRun, Role};
use instprobe::analysis::{
    alignment, cross_layer_agreement, kendall_tau, variation_agreement, AlignmentCategory, Prediction,
};
use instprobe::probes::{
    cross_validate, layer_features, mdl_codelength, mdl_codelength_features, probe_layer, shuffled_labels, CvOptions,
    MdlSchedule, ProbeConfig, ProbeJob, ProbeKind,
};
use instprobe::seed::substream;
use instprobe::synth::{generate_planted_run, PlantProfile};
use rand::Rng;

use oracles::*;

const DELTAS: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 4.0, 6.0];
/// Φ(δ/2) for `DELTAS`, rounded to three decimals.
const TABLE: [f64; 6] = [0.500, 0.599, 0.691, 0.841, 0.977, 0.999];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Standard normal CDF by composite Simpson quadrature of the density.
fn phi(x: f64) -> f64 {
    let steps = 4000;
    let h = x / steps as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(0.0) + pdf(x);
    for k in 1..steps {
        s += pdf(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + s * h / 3.0
}

/// Accuracy of the Bayes rule `sign(z)` on `z ~ N(±δ/2, 1)`, by simulation.
fn monte_carlo_bayes(delta: f64, draws: usize, seed: u64) -> f64 {
    let mut rng = substream(seed, &["bayes-mc"]);
    let mut correct = 0usize;
    for i in 0..draws {
        let (u1, u2): (f64, f64) = (1.0 - rng.random::<f64>(), rng.random());
        let noise = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        let positive = i % 2 == 0;
        let z = if positive { delta / 2.0 } else { -delta / 2.0 } + noise;
        correct += ((z > 0.0) == positive) as usize;
    }
    correct as f64 / draws as f64
}

/// Sample-role ladder: layer `l` carries separation `deltas[l]`.
fn ladder(dim: usize, n: usize, deltas: &[f64], seed: u64) -> ActivationRun {
    let mut p = PlantProfile::uniform(deltas.len(), dim, n, 0.0, 0.0);
    p.sample_separation = Some(deltas.to_vec());
    p.output_separation = None;
    generate_planted_run(&p, seed).expect("valid profile")
}

fn calibration() -> Outcome {
    let start = Instant::now();
    let seeds = 5;
    let mut mean = [0.0; 6];
    for seed in 0..seeds {
        let run = ladder(64, 2000, &DELTAS, seed);
        for (layer, m) in mean.iter_mut().enumerate() {
            let s = cross_validate(&run, Role::Sample, layer, &ProbeConfig::linear(), &CvOptions::default()).unwrap();
            *m += s.mean / seeds as f64;
        }
    }
    let elapsed = start.elapsed();
    let mut pass = elapsed < Duration::from_secs(120);
    let mut parts = Vec::new();
    for (k, &d) in DELTAS.iter().enumerate() {
        let bayes = phi(d / 2.0);
        let mc = monte_carlo_bayes(d, 400_000, k as u64);
        // the quadrature must agree with the rounded table and the simulation
        let oracle_ok = (bayes - TABLE[k]).abs() <= 5e-4 && (bayes - mc).abs() <= 0.0025;
        let ok = oracle_ok && (mean[k] - bayes).abs() <= 0.03;
        pass &= ok;
        parts.push(format!("δ={d}: {:.4} vs {:.4}{}", mean[k], bayes, if ok { "" } else { " (!)" }));
    }
    outcome(pass, format!("{}; {:.1}s", parts.join(", "), elapsed.as_secs_f64()))
}

fn selectivity() -> Outcome {
    let job = ProbeJob { control_seed: Some(17), ..ProbeJob::default() };
    let run = ladder(64, 2000, &[0.0, 4.0], 21);
    let null = probe_layer(&run, Role::Sample, 0, &job).unwrap().selectivity().unwrap();
    let strong = probe_layer(&run, Role::Sample, 1, &job).unwrap().selectivity().unwrap();
    outcome(strong >= 0.30 && null.abs() <= 0.05, format!("δ=4: {strong:.4} (≥ 0.30), δ=0: {null:+.4} (|·| ≤ 0.05)"))
}

fn mdl() -> Outcome {
    let run = ladder(64, 2000, &[0.0, 6.0], 22);
    let cfg = ProbeConfig::linear();
    let schedule = MdlSchedule::default_for(run.manifest.num_instances());
    let strong = mdl_codelength(&run, Role::Sample, 1, &cfg, &schedule, 0).unwrap();
    let x = layer_features(&run, Role::Sample, 1).unwrap();
    let shuffled = shuffled_labels(&run.manifest.labels(), 23);
    let null = mdl_codelength_features(&x, &shuffled, &cfg, &schedule, 0).unwrap();
    // uniform code over two classes: one bit per label of the first block
    let first = &strong.blocks[0];
    let first_ok = first.start == 0 && first.bits == (first.end - first.start) as f64 * 2f64.log2();
    let total_ok = strong.codelength_bits == strong.blocks.iter().map(|b| b.bits).sum::<f64>();
    let pass = (null.compression - 1.0).abs() <= 0.1 && strong.compression >= 3.0 && first_ok && total_ok;
    outcome(
        pass,
        format!(
            "shuffled {:.4} (1 ± 0.1), δ=6 {:.3} (≥ 3), first block {} bits over {} labels",
            null.compression,
            strong.compression,
            first.bits,
            first.end - first.start
        ),
    )
}

fn kendall() -> Outcome {
    let mut rng = substream(31, &["acceptance-kendall"]);
    let mut worst = 0.0f64;
    let mut mismatched = 0;
    for case in 0..100 {
        let n = rng.random_range(2..=300);
        let (x, y) = random_pair(&mut rng, n, case % 2 == 0);
        match (kendall_tau(&x, &y).unwrap(), brute_kendall(&x, &y)) {
            (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
            (a, b) if a == b => {}
            _ => mismatched += 1,
        }
    }
    outcome(worst <= 1e-12 && mismatched == 0, format!("max |Δ| = {worst:.2e} over 100 pairs, 50 with ties"))
}

fn exact_statistics() -> Outcome {
    let mut rng = substream(32, &["acceptance-exact"]);
    let mut failures = Vec::new();
    for case in 0..300 {
        let n = rng.random_range(1..=25);
        let l = rng.random_range(1..=6);
        let labels = random_bools(&mut rng, n);
        let behavior = random_bools(&mut rng, n);
        let preds: Vec<Vec<Prediction>> = (0..l).map(|_| random_predictions(&mut rng, n)).collect();

        let got = alignment(&preds, &behavior, &labels).unwrap();
        let counts = alignment_counts(&preds, &behavior, &labels);
        let props_ok = (0..l).all(|j| {
            AlignmentCategory::ALL.iter().all(|&c| got.proportion(j, c) == counts[j][c.index()] as f64 / n as f64)
        });
        if got.counts != counts || got.run_lengths != alignment_run_lengths(&preds, &behavior, &labels) || !props_ok {
            failures.push(format!("alignment case {case}"));
        }

        let layers: Vec<usize> = (0..l).collect();
        if cross_layer_agreement(&layers, &preds).unwrap().values != agreement_matrix(&preds) {
            failures.push(format!("heatmap case {case}"));
        }

        let keyed: BTreeMap<usize, BTreeMap<String, Prediction>> = (0..rng.random_range(2..=4))
            .map(|k| {
                (
                    k,
                    random_predictions(&mut rng, n)
                        .into_iter()
                        .enumerate()
                        .map(|(i, p)| (format!("i{i}"), p))
                        .collect(),
                )
            })
            .collect();
        let ag = variation_agreement(&keyed).unwrap();
        let (pairwise, all) = variation_rates(&keyed);
        if ag.pairwise.iter().map(|p| p.rate).collect::<Vec<_>>() != pairwise || ag.all_agree != all {
            failures.push(format!("agreement case {case}"));
        }
    }
    let detail = if failures.is_empty() {
        "300 random cases each for alignment, heatmap and variation agreement".to_string()
    } else {
        format!("mismatches: {}", failures.join(", "))
    };
    outcome(failures.is_empty(), detail)
}

const PIPELINE: &str = r#"
[synth]
seed = 41

[[synth.runs]]
name = "base_first"
[synth.runs.profile]
num_layers = 4
hidden_dim = 8
num_instances = 120
sample_separation = [0, 1, 2, 2]
output_separation = [0, 1, 2, 3]
behavior_coupling = 0.5

[[synth.runs]]
name = "base_after"
[synth.runs.profile]
num_layers = 4
hidden_dim = 8
num_instances = 120
variation = "sample_first"
sample_separation = [0, 1, 2, 2]
output_separation = [0, 0.5, 1, 1]
behavior_coupling = 0.5

[[synth.runs]]
name = "ablated_first"
[synth.runs.profile]
num_layers = 4
hidden_dim = 8
num_instances = 120
intervention = "full"
sample_separation = [0, 1, 2, 2]
output_separation = [0, 0.5, 0.5, 0.5]
behavior_coupling = 0.5

[probe]
control_seed = 3
mdl = true
"#;

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("pipeline.toml");
    std::fs::write(&cfg, PIPELINE).unwrap();
    let mut tables = Vec::new();
    for out in ["first", "second"] {
        let out = tmp.path().join(out);
        for sub in ["synth", "probe", "report"] {
            let args = ["instprobe", sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
            if let Err(e) = instprobe_cli::run(instprobe_cli::Cli::parse_from(args)) {
                return outcome(false, format!("{sub} failed: {e}"));
            }
        }
        tables.push(dir_bytes(&out.join("report")));
    }
    let tsv = tables[0].keys().filter(|k| k.ends_with(".tsv")).count();
    outcome(
        tables[0] == tables[1] && tsv >= 10,
        format!("{} report files ({tsv} tables) compared byte for byte", tables[0].len()),
    )
}

fn sample_size() -> Outcome {
    // the gap grows with the number of noise dimensions; see the informational line
    let dim = 16;
    let cv = CvOptions::default();
    let (mut small, mut large) = (0.0, 0.0);
    let seeds = 5;
    for seed in 0..seeds {
        small += cross_validate(&ladder(dim, 200, &[2.0, 2.0], seed), Role::Sample, 1, &ProbeConfig::linear(), &cv)
            .unwrap()
            .mean;
        large += cross_validate(&ladder(dim, 2000, &[2.0, 2.0], seed), Role::Sample, 1, &ProbeConfig::linear(), &cv)
            .unwrap()
            .mean;
    }
    let (small, large) = (small / seeds as f64, large / seeds as f64);
    let wide_small =
        cross_validate(&ladder(64, 200, &[2.0, 2.0], 0), Role::Sample, 1, &ProbeConfig::linear(), &cv).unwrap().mean;
    let wide_large =
        cross_validate(&ladder(64, 2000, &[2.0, 2.0], 0), Role::Sample, 1, &ProbeConfig::linear(), &cv).unwrap().mean;
    println!(
        "info  sample-size at d=64: N=200 {wide_small:.4}, N=2000 {wide_large:.4}, gap {:+.4}",
        wide_small - wide_large
    );
    outcome(
        (small - large).abs() <= 0.04,
        format!("d={dim}, 5 seeds: N=200 {small:.4}, N=2000 {large:.4}, gap {:+.4} (±0.04)", small - large),
    )
}

fn nonlinearity() -> Outcome {
    let run = ladder(64, 2000, &DELTAS, 51);
    let cv = CvOptions { folds: 4, seeds: vec![0] };
    let acc = |kind: ProbeKind, layer: usize| {
        cross_validate(&run, Role::Sample, layer, &ProbeConfig::of_kind(kind), &cv).unwrap().mean
    };
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (layer, d) in DELTAS.iter().enumerate() {
        let lin = acc(ProbeKind::Linear, layer);
        let (m1, m2) = (acc(ProbeKind::Mlp1, layer) - lin, acc(ProbeKind::Mlp2, layer) - lin);
        worst = worst.max(m1.abs()).max(m2.abs());
        parts.push(format!("δ={d}: {m1:+.3}/{m2:+.3}"));
    }
    outcome(worst <= 0.03, format!("mlp1/mlp2 minus linear: {}; max {worst:.4}", parts.join(", ")))
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 8] = [
        ("planted-signal calibration", calibration),
        ("selectivity", selectivity),
        ("mdl compression", mdl),
        ("kendall tau vs brute force", kendall),
        ("agreement/alignment/heatmap exact", exact_statistics),
        ("pipeline determinism", determinism),
        ("sample size N=200 vs N=2000", sample_size),
        ("non-linearity check", nonlinearity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        failed += !o.pass as usize;
        println!(
            "{}  {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
