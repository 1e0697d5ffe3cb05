//! Browser demo: three interactive views over synthetic tables.
//!
//! Each exported function takes plain numbers and returns a JSON string. On
//! invalid input the JSON is `{"error": "..."}`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use serde::Serialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

use indiv_probe::lexicon::{Lexicon, NounEntry};
use indiv_probe::metrics::{average_matrices, minmax_normalize, quantity_distance_matrix, SumUpper};
use indiv_probe::phrasegen::QuantityRange;
use indiv_probe::synth::{oracle_proxy_for_beta, synth_table};
use indiv_probe::{analyze_model, AnalysisOptions, SynthConfig};

const NOUNS_PER_CLASS: usize = 20;
const DIMENSION: usize = 16;

fn lexicon(classes: &[String]) -> Lexicon {
    let entries = classes
        .iter()
        .flat_map(|c| {
            (0..NOUNS_PER_CLASS).map(move |i| {
                let singular = format!("{c}-{i:02}");
                NounEntry::new(&singular, &format!("{singular}s"), &[c.as_str()])
            })
        })
        .collect();
    Lexicon::from_entries(entries)
}

fn config(beta: f64, noise: f64, seed: u64) -> SynthConfig {
    let mut cfg = SynthConfig::new(beta);
    cfg.noise_sigma = noise;
    cfg.seed = seed;
    cfg.dimension = DIMENSION;
    cfg
}

/// Largest rate that keeps every similarity positive over quantities 2..11.
pub fn beta_limit() -> f64 {
    FRAC_PI_2 / 5.5f64.ln()
}

#[derive(Debug, Serialize)]
pub struct Heatmap {
    pub quantities: Vec<u32>,
    pub values: Vec<Vec<f64>>,
    pub raw_min: f64,
    pub raw_max: f64,
}

/// Normalized quantity contrast matrix for one synthetic class.
pub fn heatmap(beta: f64, noise: f64, seed: u64) -> Result<Heatmap, String> {
    let lex = lexicon(&["demo".to_string()]);
    let table = synth_table(&config(beta, noise, seed), &lex).map_err(|e| e.to_string())?;
    let range = QuantityRange::new(2, 10).expect("valid");
    let per_noun = lex
        .entries()
        .iter()
        .map(|e| quantity_distance_matrix(&table, e, range))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let raw = average_matrices(&per_noun).map_err(|e| e.to_string())?;
    let (raw_min, raw_max) =
        raw.off_diagonal().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let norm = minmax_normalize(&raw);
    Ok(Heatmap {
        quantities: norm.quantities().to_vec(),
        values: norm.rows().map(<[f64]>::to_vec).collect(),
        raw_min,
        raw_max,
    })
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub beta: f64,
    pub closed_form: f64,
    pub measured_mean: f64,
    pub measured_std: f64,
}

/// Proxy against rate: closed form next to the measured class mean.
pub fn proxy_curve(noise: f64, points: usize, seed: u64) -> Result<Vec<CurvePoint>, String> {
    if points < 2 {
        return Err("need at least 2 points".into());
    }
    let lex = lexicon(&["demo".to_string()]);
    let limit = 0.98 * beta_limit();
    (0..points)
        .map(|i| {
            let beta = limit * i as f64 / (points - 1) as f64;
            let table = synth_table(&config(beta, noise, seed), &lex).map_err(|e| e.to_string())?;
            let a = analyze_single(&lex, &table)?;
            Ok(CurvePoint {
                beta,
                closed_form: oracle_proxy_for_beta(beta, 10, SumUpper::Inclusive)
                    .map_err(|e| e.to_string())?,
                measured_mean: a.0,
                measured_std: a.1,
            })
        })
        .collect()
}

fn analyze_single(lex: &Lexicon, table: &indiv_probe::EmbeddingTable) -> Result<(f64, f64), String> {
    let values = lex
        .entries()
        .iter()
        .map(|e| {
            indiv_probe::metrics::individuation_proxy(table, e, 10, SumUpper::Inclusive).map(|s| s.value)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, var.sqrt()))
}

/// Classes with the given rate multipliers: means, p-values and cliques.
pub fn hierarchy(
    base_beta: f64,
    multipliers: &[f64],
    noise: f64,
    seed: u64,
    alpha: f64,
) -> Result<Value, String> {
    if multipliers.len() < 2 {
        return Err("need at least 2 classes".into());
    }
    let names: Vec<String> = (0..multipliers.len()).map(|i| format!("class-{}", i + 1)).collect();
    let lex = lexicon(&names);
    let mut cfg = config(base_beta, noise, seed);
    cfg.multipliers = names.iter().cloned().zip(multipliers.iter().copied()).collect::<BTreeMap<_, _>>();
    let table = synth_table(&cfg, &lex).map_err(|e| e.to_string())?;
    let opts = AnalysisOptions { alpha, ..AnalysisOptions::default() };
    let a = analyze_model(&lex, &table, &opts).map_err(|e| e.to_string())?;
    let k = a.pvalues.size();
    Ok(json!({
        "classes": a.ordered_classes().iter().map(|c| json!({
            "category": c.category,
            "beta": cfg.beta * cfg.multipliers[&c.category],
            "mean": c.mean,
            "std": c.std,
        })).collect::<Vec<_>>(),
        "order": a.pvalues.classes,
        "pvalues": (0..k).map(|i| (0..k).map(|j| a.pvalues.get(i, j)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "cliques": a.cliques.cliques,
        "average_class_std": a.average_class_std,
    }))
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).expect("plain data serializes"),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen(js_name = betaLimit)]
pub fn beta_limit_js() -> f64 {
    beta_limit()
}

#[wasm_bindgen(js_name = heatmap)]
pub fn heatmap_js(beta: f64, noise: f64, seed: u32) -> String {
    to_json(heatmap(beta, noise, u64::from(seed)))
}

#[wasm_bindgen(js_name = proxyCurve)]
pub fn proxy_curve_js(noise: f64, points: u32, seed: u32) -> String {
    to_json(proxy_curve(noise, points as usize, u64::from(seed)))
}

/// `multipliers` is a comma-separated list such as `"1,2,3,4"`.
#[wasm_bindgen(js_name = hierarchy)]
pub fn hierarchy_js(base_beta: f64, multipliers: &str, noise: f64, seed: u32, alpha: f64) -> String {
    let parsed: Result<Vec<f64>, String> = multipliers
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad multiplier '{}'", s.trim())))
        .collect();
    to_json(parsed.and_then(|m| hierarchy(base_beta, &m, noise, u64::from(seed), alpha)))
}
