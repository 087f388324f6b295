//! Multi-seed experiment driver and its on-disk artifacts.
//!
//! A run directory holds:
//! - `rounds.csv`: `seed,round,capacity,test_accuracy,test_loss,train_loss`
//! - `gradnorms.csv`: `seed,round,client,capacity,layer,grad_norm_mean,grad_norm_std`
//! - `summary.txt`: header line plus one `capacity mean ± std` row per capacity
//! - `final_params.bin`: per seed, `u64` seed, `u64` count, then `count` f64, all little-endian

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::FederationConfig;
use crate::data::{build_split, filter_binary, BinaryDataset};
use crate::error::{Error, Result};
use crate::federation::{mean_std, run_federation, FederationOutcome};

pub const ROUNDS_HEADER: [&str; 6] = [
    "seed",
    "round",
    "capacity",
    "test_accuracy",
    "test_loss",
    "train_loss",
];
pub const GRADNORMS_HEADER: [&str; 7] = [
    "seed",
    "round",
    "client",
    "capacity",
    "layer",
    "grad_norm_mean",
    "grad_norm_std",
];

/// Final-round accuracy of every seed, per capacity.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSummary {
    pub header: String,
    pub final_accuracy: BTreeMap<usize, Vec<f64>>,
}

impl ExperimentSummary {
    /// `(mean, std)` in percent.
    pub fn capacity_stats(&self, capacity: usize) -> Option<(f64, f64)> {
        self.final_accuracy.get(&capacity).map(|v| {
            let (m, s) = mean_std(v);
            (100.0 * m, 100.0 * s)
        })
    }

    pub fn render(&self) -> String {
        let mut out = format!("# {}\ncapacity  accuracy\n", self.header);
        for &cap in self.final_accuracy.keys() {
            let (m, s) = self.capacity_stats(cap).expect("present key");
            out.push_str(&format!("{:<9} {m:.1} ± {s:.1}\n", format!("{cap}L")));
        }
        out
    }
}

fn summary_header(config: &FederationConfig) -> String {
    let seeds: Vec<String> = config.seeds.iter().map(u64::to_string).collect();
    format!(
        "dataset={} classes={}/{} technique={} variant={} shape={} rounds={} seeds={} eval={} test_size={}",
        config.dataset,
        config.class_a,
        config.class_b,
        config.technique,
        config.model_variant(),
        config.shape,
        config.rounds,
        seeds.join(","),
        config.eval_mode,
        config.test_size
    )
}

/// Loads and filters the training pool named by `config`.
pub fn load_pool(config: &FederationConfig, data_dir: &Path) -> Result<BinaryDataset> {
    let (a, b) = config.class_pair()?;
    let raw = config.dataset.load_train(data_dir)?;
    filter_binary(&raw, a, b)
}

/// Trains one seed end to end.
pub fn run_seed(
    config: &FederationConfig,
    pool: &BinaryDataset,
    seed: u64,
) -> Result<FederationOutcome> {
    let split = build_split(
        pool,
        config.capacities.len(),
        config.per_client,
        config.test_size,
        config.n_qubits,
        seed,
    )?;
    if split.clipped > 0 {
        log::info!(
            "seed {seed}: {} test features clipped to the fitted range",
            split.clipped
        );
    }
    run_federation(config, seed, &split.clients, &split.test)
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<fs::File>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

/// Runs every seed and writes the artifacts into `out_dir`.
pub fn run_experiment(
    config: &FederationConfig,
    data_dir: &Path,
    out_dir: &Path,
) -> Result<ExperimentSummary> {
    config.validate()?;
    let pool = load_pool(config, data_dir)?;
    fs::create_dir_all(out_dir)?;
    let mut rounds = csv_writer(&out_dir.join("rounds.csv"), &ROUNDS_HEADER)?;
    let mut norms = csv_writer(&out_dir.join("gradnorms.csv"), &GRADNORMS_HEADER)?;
    let mut params = fs::File::create(out_dir.join("final_params.bin"))?;
    let mut summary = ExperimentSummary {
        header: summary_header(config),
        final_accuracy: BTreeMap::new(),
    };

    for &seed in &config.seeds {
        log::info!("seed {seed}: training {} rounds", config.rounds);
        let outcome = run_seed(config, &pool, seed)?;
        write_history(config, seed, &outcome, &mut rounds, &mut norms)?;
        let bytes = outcome.final_params_bytes(config.technique);
        params.write_all(&seed.to_le_bytes())?;
        params.write_all(&((bytes.len() / 8) as u64).to_le_bytes())?;
        params.write_all(&bytes)?;
        if let Some(last) = outcome.history.last() {
            for &(cap, acc, _) in &last.capacity_metrics {
                summary.final_accuracy.entry(cap).or_default().push(acc);
            }
        }
    }
    rounds.flush()?;
    norms.flush()?;
    fs::write(out_dir.join("summary.txt"), summary.render())?;
    Ok(summary)
}

fn write_history(
    config: &FederationConfig,
    seed: u64,
    outcome: &FederationOutcome,
    rounds: &mut csv::Writer<fs::File>,
    norms: &mut csv::Writer<fs::File>,
) -> Result<()> {
    for rec in &outcome.history {
        for &(cap, acc, loss) in &rec.capacity_metrics {
            let train: Vec<f64> = config
                .capacities
                .iter()
                .zip(&rec.client_losses)
                .filter(|(&c, _)| c == cap)
                .map(|(_, &l)| l)
                .collect();
            rounds.write_record([
                seed.to_string(),
                rec.round.to_string(),
                cap.to_string(),
                acc.to_string(),
                loss.to_string(),
                mean_std(&train).0.to_string(),
            ])?;
        }
        for (client, layers) in rec.grad_norms.iter().enumerate() {
            for (layer, &(m, s)) in layers.iter().enumerate() {
                norms.write_record([
                    seed.to_string(),
                    rec.round.to_string(),
                    client.to_string(),
                    config.capacities[client].to_string(),
                    (layer + 1).to_string(),
                    m.to_string(),
                    s.to_string(),
                ])?;
            }
        }
    }
    Ok(())
}

/// One run's summary as read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryFile {
    pub fields: BTreeMap<String, String>,
    /// `(capacity, mean, std)` in percent.
    pub rows: Vec<(usize, f64, f64)>,
}

impl SummaryFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| Error::input("summary is missing its header line"))?;
        let fields = header
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let mut rows = Vec::new();
        for line in lines.skip(1) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::input(format!("malformed summary row `{line}`"));
            if parts.len() != 4 || parts[2] != "±" {
                return Err(bad());
            }
            let cap = parts[0]
                .strip_suffix('L')
                .and_then(|c| c.parse().ok())
                .ok_or_else(bad)?;
            let m = parts[1].parse().map_err(|_| bad())?;
            let s = parts[3].parse().map_err(|_| bad())?;
            rows.push((cap, m, s));
        }
        Ok(Self { fields, rows })
    }

    pub fn label(&self) -> String {
        let get = |k: &str| self.fields.get(k).map_or("?", String::as_str);
        format!("{}/{}", get("technique"), get("variant"))
    }
}

/// Capacity by run table with the best entry of each row marked and the
/// gap to it, `best - value`, beside every cell.
pub fn tabulate(dirs: &[PathBuf]) -> Result<String> {
    if dirs.is_empty() {
        return Err(Error::config("tabulate needs at least one run directory"));
    }
    let mut runs = Vec::new();
    for d in dirs {
        let path = d.join("summary.txt");
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        runs.push(
            SummaryFile::parse(&text)
                .map_err(|e| Error::config(format!("{}: {e}", path.display())))?,
        );
    }
    let key = |s: &SummaryFile| {
        (
            s.fields.get("dataset").cloned(),
            s.fields.get("classes").cloned(),
        )
    };
    let first = key(&runs[0]);
    for (d, r) in dirs.iter().zip(&runs) {
        if key(r) != first {
            return Err(Error::config(format!(
                "{} uses {:?}/{:?}, expected {:?}/{:?}",
                d.display(),
                key(r).0,
                key(r).1,
                first.0,
                first.1
            )));
        }
    }
    let mut capacities: Vec<usize> = runs
        .iter()
        .flat_map(|r| r.rows.iter().map(|x| x.0))
        .collect();
    capacities.sort_unstable();
    capacities.dedup();

    let labels: Vec<String> = runs.iter().map(SummaryFile::label).collect();
    let width = labels.iter().map(String::len).max().unwrap_or(0).max(22);
    let mut out = format!(
        "# dataset={} classes={}\n{:<8}",
        first.0.unwrap_or_default(),
        first.1.unwrap_or_default(),
        "capacity"
    );
    for l in &labels {
        out.push_str(&format!(" | {l:<width$}"));
    }
    out.push_str(" | best\n");
    for cap in capacities {
        let cells: Vec<Option<(f64, f64)>> = runs
            .iter()
            .map(|r| r.rows.iter().find(|x| x.0 == cap).map(|x| (x.1, x.2)))
            .collect();
        let best = cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|(m, _)| (i, m)))
            .fold(None, |acc: Option<(usize, f64)>, (i, m)| match acc {
                Some((_, bm)) if bm >= m => acc,
                _ => Some((i, m)),
            });
        out.push_str(&format!("{:<8}", format!("{cap}L")));
        for (i, c) in cells.iter().enumerate() {
            let text = match (c, best) {
                (Some((m, s)), Some((bi, bm))) => {
                    let mark = if i == bi { "*" } else { " " };
                    format!("{m:.1} ± {s:.1}{mark} (Δ {:.1})", bm - m)
                }
                _ => "-".to_string(),
            };
            out.push_str(&format!(" | {text:<width$}"));
        }
        let winner = best.map_or("-", |(i, _)| labels[i].as_str());
        out.push_str(&format!(" | {winner}\n"));
    }
    Ok(out)
}
