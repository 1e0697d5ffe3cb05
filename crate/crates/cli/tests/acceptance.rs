//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use indiv_probe::embedding_store::EmbeddingTable;
use indiv_probe::lexicon::{parse_lexicon, Lexicon, NounEntry};
use indiv_probe::metrics::{
    average_matrices, individuation_proxy, minmax_normalize, quantity_distance_matrix, SumUpper,
};
use indiv_probe::phrasegen::{render_phrase, QuantityRange};
use indiv_probe::rng::SplitMix64;
use indiv_probe::stats::{mann_whitney, mann_whitney_p, UMethod};
use indiv_probe::synth::{oracle_proxy, synth_table};
use indiv_probe::{analyze_model, maximal_cliques, AnalysisOptions, EquivalenceGraph, SynthConfig};

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/fixtures");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit: Duration) -> (bool, String) {
    (elapsed < limit, format!("{:.3}s / limit {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(FIXTURES).join(name)
}

fn fixture_lexicon() -> Lexicon {
    parse_lexicon(&fs::read_to_string(fixture("hierarchy.lexicon.tsv")).unwrap()).unwrap().0
}

fn fixture_config() -> SynthConfig {
    SynthConfig::from_json(&fs::read_to_string(fixture("hierarchy.synth.json")).unwrap()).unwrap()
}

fn single_noun() -> NounEntry {
    NounEntry::new("apple", "apples", &["fruit"])
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0x5eed_0001);
    let entry = single_noun();
    let lex = Lexicon::from_entries(vec![entry.clone()]);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let horizon = 4 + (rng.next_u64() % 7) as u32;
        let hi = horizon + 1;
        let bound = FRAC_PI_2 / (f64::from(hi) / 2.0).ln();
        let beta = 0.98 * bound * rng.next_f64();
        let mut cfg = SynthConfig::new(beta);
        cfg.quantities = QuantityRange::new(2, hi).unwrap();
        let table = synth_table(&cfg, &lex).unwrap();
        let got = individuation_proxy(&table, &entry, horizon, SumUpper::Inclusive).unwrap().value;
        let want = oracle_proxy(&cfg, horizon).unwrap();
        worst = worst.max((got - want).abs());
    }
    let (fast, timing) = within(start.elapsed(), Duration::from_secs(1));
    outcome(worst <= 1e-12 && fast, format!("20 (beta, T) pairs, max |diff| {worst:.2e} <= 1e-12; {timing}"))
}

fn constant_table(entry: &NounEntry, hi: u32) -> EmbeddingTable {
    let v = [0.3, -1.2, 0.7, 2.0];
    let mut t = EmbeddingTable::new("const", v.len());
    for n in 2..=hi {
        t.insert(render_phrase(n, entry).unwrap(), &v, n as usize).unwrap();
    }
    t
}

fn trivial_identity() -> Outcome {
    let entry = single_noun();
    let table = constant_table(&entry, 11);
    let mut worst: f64 = 0.0;
    let at10 = individuation_proxy(&table, &entry, 10, SumUpper::Inclusive).unwrap().value;
    worst = worst.max((at10 - 0.8).abs());
    for t in 4..=10u32 {
        let got = individuation_proxy(&table, &entry, t, SumUpper::Inclusive).unwrap().value;
        worst = worst.max((got - f64::from(t - 2) / f64::from(t)).abs());
    }
    outcome(worst <= 1e-12, format!("T=10 gives {at10}; T in 4..=10 max |diff| {worst:.2e} <= 1e-12"))
}

fn heatmap_invariants() -> Outcome {
    let mut rng = SplitMix64::new(0x5eed_0003);
    let range = QuantityRange::new(2, 10).unwrap();
    let mut failures = Vec::new();
    let mut degenerate = 0;
    for case in 0..100 {
        let nouns = 1 + (rng.next_u64() % 4) as usize;
        let dim = 2 + (rng.next_u64() % 6) as usize;
        let entries: Vec<NounEntry> =
            (0..nouns).map(|k| NounEntry::new(&format!("n{k}"), &format!("n{k}s"), &["c"])).collect();
        let mut table = EmbeddingTable::new("random", dim);
        let mut line = 0;
        for e in &entries {
            for n in range.iter() {
                line += 1;
                let v: Vec<f64> = (0..dim).map(|_| rng.next_gaussian()).collect();
                table.insert(render_phrase(n, e).unwrap(), &v, line).unwrap();
            }
        }
        let per_noun: Vec<_> =
            entries.iter().map(|e| quantity_distance_matrix(&table, e, range).unwrap()).collect();
        let raw = average_matrices(&per_noun).unwrap();
        let m = minmax_normalize(&raw);
        let k = m.size();
        let symmetric = (0..k).all(|i| (0..k).all(|j| m.get(i, j) == m.get(j, i)));
        let zero_diag = (0..k).all(|i| m.get(i, i) == 0.0);
        let bounded = m.off_diagonal().all(|v| (0.0..=1.0).contains(&v));
        let (lo, hi) =
            raw.off_diagonal().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let attains = if hi > lo {
            m.off_diagonal().any(|v| v == 0.0) && m.off_diagonal().any(|v| v == 1.0)
        } else {
            degenerate += 1;
            true
        };
        if !(symmetric && zero_diag && bounded && attains) {
            failures.push(case);
        }
    }
    outcome(
        failures.is_empty(),
        format!("100 random tables, {} violations, {degenerate} degenerate", failures.len()),
    )
}

/// Two-sided exact p-value by enumerating every split of the pooled ranks.
fn permutation_p(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let total = pooled.len();
    let u_of = |mask: u32| -> f64 {
        let mut u = 0.0;
        for i in (0..total).filter(|i| mask & (1 << i) != 0) {
            for j in (0..total).filter(|j| mask & (1 << j) == 0) {
                if pooled[i] > pooled[j] {
                    u += 1.0;
                }
            }
        }
        u
    };
    let observed = u_of((1u32 << x.len()) - 1);
    let (mut le, mut ge, mut count) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != x.len() {
            continue;
        }
        let u = u_of(mask);
        count += 1;
        if u <= observed {
            le += 1;
        }
        if u >= observed {
            ge += 1;
        }
    }
    (2.0 * le.min(ge) as f64 / count as f64).min(1.0)
}

fn distinct_sample(rng: &mut SplitMix64, len: usize, seen: &mut BTreeSet<u64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let v = rng.next_gaussian();
        if seen.insert(v.to_bits()) {
            out.push(v);
        }
    }
    out
}

fn statistics_correctness() -> Outcome {
    let mut rng = SplitMix64::new(0x5eed_0004);
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for m in 1..12usize {
        for n in 1..=(12 - m) {
            for _ in 0..4 {
                let mut seen = BTreeSet::new();
                let x = distinct_sample(&mut rng, m, &mut seen);
                let y = distinct_sample(&mut rng, n, &mut seen);
                let got = mann_whitney_p(&x, &y).unwrap();
                worst = worst.max((got - permutation_p(&x, &y)).abs());
                cases += 1;
            }
        }
    }
    let r = mann_whitney(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    let anchor = r.p == 0.1 && r.method == UMethod::Exact;
    outcome(
        cases >= 200 && worst <= 0.05 && anchor,
        format!(
            "{cases} cases with |x|+|y| <= 12, max |diff| {worst:.2e} <= 0.05; [1,2,3] vs [4,5,6] p = {} ({:?})",
            r.p, r.method
        ),
    )
}

fn graph_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i:02}")).collect()
}

fn brute_force_cliques(n: usize, adj: &[Vec<bool>]) -> BTreeSet<Vec<String>> {
    let names = graph_names(n);
    let is_clique = |mask: u32| {
        (0..n).all(|i| mask & (1 << i) == 0 || (i + 1..n).all(|j| mask & (1 << j) == 0 || adj[i][j]))
    };
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << n) {
        if !is_clique(mask) {
            continue;
        }
        let extendable = (0..n).any(|v| mask & (1 << v) == 0 && is_clique(mask | (1 << v)));
        if !extendable {
            out.insert((0..n).filter(|i| mask & (1 << i) != 0).map(|i| names[i].clone()).collect());
        }
    }
    out
}

fn clique_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0x5eed_0005);
    let n = 12;
    let mut mismatches = 0;
    for case in 0..30 {
        let density = 0.1 + 0.8 * f64::from(case) / 29.0;
        let mut adj = vec![vec![false; n]; n];
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.next_f64() < density {
                    adj[i][j] = true;
                    adj[j][i] = true;
                    edges.push((i, j));
                }
            }
        }
        let g = EquivalenceGraph::from_edges(graph_names(n), &edges, 0.05);
        let got: BTreeSet<Vec<String>> = maximal_cliques(&g).unwrap().cliques.into_iter().collect();
        if got != brute_force_cliques(n, &adj) {
            mismatches += 1;
        }
    }

    let stats = |edges: &[(usize, usize)], k: usize| {
        let r = maximal_cliques(&EquivalenceGraph::from_edges(graph_names(k), edges, 0.05)).unwrap();
        (r.count, r.avg_size)
    };
    let k = 7;
    let path: Vec<_> = (0..k - 1).map(|i| (i, i + 1)).collect();
    let complete: Vec<_> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let closed =
        stats(&path, k) == (k - 1, 2.0) && stats(&[], k) == (k, 1.0) && stats(&complete, k) == (1, k as f64);

    let (fast, timing) = within(start.elapsed(), Duration::from_secs(1));
    outcome(
        mismatches == 0 && closed && fast,
        format!("30 random 12-vertex graphs, {mismatches} mismatches vs brute force; closed forms {closed}; {timing}"),
    )
}

fn synthetic_hierarchy() -> Outcome {
    let start = Instant::now();
    let lex = fixture_lexicon();
    let cfg = fixture_config();
    let table = synth_table(&cfg, &lex).unwrap();
    let a = analyze_model(&lex, &table, &AnalysisOptions::default()).unwrap();

    let mut by_beta: Vec<(f64, String)> =
        cfg.multipliers.iter().map(|(c, m)| (cfg.beta * m, c.clone())).collect();
    by_beta.sort_by(|x, y| x.0.total_cmp(&y.0));
    let means: Vec<f64> = by_beta.iter().map(|(_, c)| a.class(c).unwrap().mean).collect();

    let decreasing = means.windows(2).all(|w| w[0] > w[1]);
    let k = a.pvalues.size();
    let max_p = (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| a.pvalues.get(i, j))
        .fold(0.0, f64::max);
    let all_significant = k == 4 && max_p < 0.05;
    let singletons = a.cliques.count == 4 && a.cliques.cliques.iter().all(|c| c.len() == 1);
    let expected_order: Vec<String> = by_beta.iter().map(|(_, c)| c.clone()).collect();
    let order_matches = a.pvalues.classes == expected_order;
    let (fast, timing) = within(start.elapsed(), Duration::from_secs(10));

    let means_text: Vec<String> =
        by_beta.iter().zip(&means).map(|((b, _), m)| format!("beta {b:.1}: {m:.4}")).collect();
    outcome(
        decreasing && all_significant && singletons && order_matches && fast,
        format!(
            "(a) mean strictly decreasing in beta {decreasing} [{}]; (b) all p < 0.05 {all_significant} (max {max_p:.2e}); \
             (c) 4 singleton cliques {singletons}; (d) row order smallest beta on top {order_matches} (got {:?}); {timing}",
            means_text.join(", "),
            a.pvalues.classes
        ),
    )
}

fn run_cli(args: &[&str], env_jobs: Option<&str>) -> bool {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_indiv-probe"));
    cmd.args(args);
    match env_jobs {
        Some(j) => cmd.env("INDIV_PROBE_JOBS", j),
        None => cmd.env_remove("INDIV_PROBE_JOBS"),
    };
    cmd.output().map(|o| o.status.success()).unwrap_or(false)
}

fn numeric_outputs(out: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = vec![out.join("comparison.csv")];
    let mut model: Vec<PathBuf> =
        fs::read_dir(out.join("synth-hierarchy")).unwrap().map(|e| e.unwrap().path()).collect();
    model.sort();
    files.extend(model);
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.jsonl");
    let lexicon = fixture("hierarchy.lexicon.tsv");
    let config = fixture("hierarchy.synth.json");
    let ok = run_cli(
        &[
            "synth",
            "--lexicon",
            lexicon.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--out",
            table.to_str().unwrap(),
        ],
        None,
    );
    if !ok {
        return outcome(false, "synth subcommand failed");
    }
    let table_arg = format!("synth-hierarchy={}", table.display());
    let runs: [(&str, Option<&str>); 5] =
        [("1", None), ("1", None), ("2", None), ("8", None), ("0", Some("3"))];
    let mut outputs = Vec::new();
    for (i, (jobs, env)) in runs.iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let mut args = vec![
            "analyze",
            "--lexicon",
            lexicon.to_str().unwrap(),
            "--table",
            &table_arg,
            "--out",
            out.to_str().unwrap(),
        ];
        if env.is_none() {
            args.extend(["--jobs", jobs]);
        }
        if !run_cli(&args, *env) {
            return outcome(false, format!("analyze run {i} failed"));
        }
        outputs.push(numeric_outputs(&out));
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(
        identical && outputs[0].len() == 7,
        format!(
            "{} analyze runs (--jobs 1, 1, 2, 8, INDIV_PROBE_JOBS=3) over {} files byte-identical {identical}",
            runs.len(),
            outputs[0].len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("oracle equivalence", oracle_equivalence),
        ("trivial proxy identity", trivial_identity),
        ("heatmap invariants", heatmap_invariants),
        ("statistics correctness", statistics_correctness),
        ("clique correctness", clique_correctness),
        ("synthetic hierarchy end to end", synthetic_hierarchy),
        ("determinism across worker counts", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
