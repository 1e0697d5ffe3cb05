use std::fs;

use indiv_probe::embedding_store::{parse_table, EmbeddingTable};
use indiv_probe::lexicon::{parse_lexicon, Lexicon, NounEntry};
use indiv_probe::phrasegen::{phrase_manifest, render_phrase, QuantityRange};
use indiv_probe::report::{build_manifest, run_pipeline, RunConfig, TableSource};
use indiv_probe::synth::synth_table;
use indiv_probe::{analyze_model, AnalysisOptions, SynthConfig};

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/fixtures");

fn fixture_lexicon() -> Lexicon {
    parse_lexicon(&fs::read_to_string(format!("{FIXTURES}/hierarchy.lexicon.tsv")).unwrap()).unwrap().0
}

#[test]
fn identical_vectors_give_zero_heatmap_and_point_eight() {
    let apple = NounEntry::new("apple", "apples", &["fruit"]);
    let pear = NounEntry::new("pear", "pears", &["food"]);
    let lex = Lexicon::from_entries(vec![apple.clone(), pear.clone()]);
    let mut table = EmbeddingTable::new("const", 3);
    let mut line = 0;
    for e in [&apple, &pear] {
        for n in 2..=11 {
            line += 1;
            table.insert(render_phrase(n, e).unwrap(), &[1.0, 2.0, 2.0], line).unwrap();
        }
    }
    let a = analyze_model(&lex, &table, &AnalysisOptions::default()).unwrap();
    assert!(a.heatmap.rows().flatten().all(|&v| v == 0.0));
    assert!(a.heatmap_raw.off_diagonal().all(|v| v.abs() < 1e-12));
    for (_, s) in &a.scores {
        assert!((s.value - 0.8).abs() < 1e-12);
    }
    assert_eq!(a.cliques.count, 1);
}

#[test]
fn two_category_synth_separates() {
    let text = "lo0\tlo0s\tlow\nlo1\tlo1s\tlow\nlo2\tlo2s\tlow\nlo3\tlo3s\tlow\nlo4\tlo4s\tlow\nlo5\tlo5s\tlow\n\
                hi0\thi0s\thigh\nhi1\thi1s\thigh\nhi2\thi2s\thigh\nhi3\thi3s\thigh\nhi4\thi4s\thigh\nhi5\thi5s\thigh\n";
    let (lex, _) = parse_lexicon(text).unwrap();
    let mut cfg = SynthConfig::new(0.15);
    cfg.noise_sigma = 0.003;
    cfg.seed = 5;
    cfg.multipliers.insert("high".into(), 4.0);
    let table = synth_table(&cfg, &lex).unwrap();
    let a = analyze_model(&lex, &table, &AnalysisOptions::default()).unwrap();
    // the faster-rotating class scores higher and is listed first
    assert!(a.class("high").unwrap().mean > a.class("low").unwrap().mean);
    assert_eq!(a.pvalues.classes, vec!["high", "low"]);
    assert!(a.pvalues.between("high", "low").unwrap() < 0.05);
    assert_eq!(a.cliques.count, 2);
}

#[test]
fn fixture_hierarchy_is_fully_separated() {
    let lex = fixture_lexicon();
    let cfg =
        SynthConfig::from_json(&fs::read_to_string(format!("{FIXTURES}/hierarchy.synth.json")).unwrap())
            .unwrap();
    let table = synth_table(&cfg, &lex).unwrap();
    let a = analyze_model(&lex, &table, &AnalysisOptions::default()).unwrap();
    assert_eq!(a.nouns_used, 120);
    assert_eq!(a.classes.len(), 4);
    assert!(a.classes.iter().all(|c| c.len() == 30));
    assert_eq!(a.cliques.cliques.iter().map(Vec::len).collect::<Vec<_>>(), vec![1; 4]);
    // synthetic heatmaps grow with the quantity gap on the anchored row
    assert_eq!(a.inversions, 0);
}

#[test]
fn manifest_sizes() {
    let lex = fixture_lexicon();
    let m = phrase_manifest(&lex, QuantityRange::default());
    assert_eq!(m.provenance.len(), lex.len() * 10);
    assert_eq!(m.phrases.len(), m.provenance.len());

    let (shared, _) = parse_lexicon("fish\tfish\tanimal\nfishes\tfish\tfood\n").unwrap();
    let m = phrase_manifest(&shared, QuantityRange::default());
    assert_eq!(m.provenance.len(), 20);
    assert_eq!(m.phrases.len(), 10);
}

#[test]
fn run_pipeline_writes_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let lex_path = format!("{FIXTURES}/hierarchy.lexicon.tsv");
    let lex = fixture_lexicon();
    let cfg =
        SynthConfig::from_json(&fs::read_to_string(format!("{FIXTURES}/hierarchy.synth.json")).unwrap())
            .unwrap();
    let table_path = dir.path().join("t.jsonl");
    fs::write(&table_path, synth_table(&cfg, &lex).unwrap().to_jsonl()).unwrap();
    assert_eq!(parse_table(&fs::read_to_string(&table_path).unwrap()).unwrap().len(), 1200);

    let run = |out: &str, jobs: usize| {
        let options = AnalysisOptions { jobs, ..AnalysisOptions::default() };
        let cfg = RunConfig {
            lexicon_path: lex_path.clone().into(),
            tables: vec![TableSource { model_id: "fx".into(), path: table_path.clone() }],
            options,
            output_dir: dir.path().join(out),
        };
        run_pipeline(&cfg).unwrap();
        fs::read(dir.path().join(out).join("fx/summary.json")).unwrap()
    };
    assert_eq!(run("a", 1), run("b", 4));

    let manifest = build_manifest(lex_path.as_ref(), None, QuantityRange::default()).unwrap();
    assert_eq!(manifest.phrases.len(), 1200);
}

#[test]
fn failed_run_leaves_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let lex_path = dir.path().join("lex.tsv");
    fs::write(&lex_path, "apple\tapples\tfruit\npear\tpears\tfood\n").unwrap();
    let good = dir.path().join("good.jsonl");
    let mut t = EmbeddingTable::new("g", 2);
    let (lex, _) = parse_lexicon("apple\tapples\tfruit\npear\tpears\tfood\n").unwrap();
    let mut line = 0;
    for e in lex.entries() {
        for n in 2..=11u32 {
            line += 1;
            t.insert(render_phrase(n, e).unwrap(), &[1.0, f64::from(n)], line).unwrap();
        }
    }
    fs::write(&good, t.to_jsonl()).unwrap();
    let missing = dir.path().join("missing.jsonl");
    let out = dir.path().join("out");
    let cfg = RunConfig {
        lexicon_path: lex_path,
        tables: vec![
            TableSource { model_id: "good".into(), path: good },
            TableSource { model_id: "bad".into(), path: missing },
        ],
        options: AnalysisOptions::default(),
        output_dir: out.clone(),
    };
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!out.join("good").exists());
}
