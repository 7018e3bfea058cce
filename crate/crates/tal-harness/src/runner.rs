//! Experiment execution. An experiment is a grid of independent cells
//! (scheme x seed for CartPole training, one cell per advantage scale for
//! the tabular chain). Each finished cell is persisted atomically and
//! recorded in a manifest, so an interrupted run resumes without redoing
//! completed work and a finished run is a no-op to repeat.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use tsallis_rl::envs::{chain_mdp, CartPole};
use tsallis_rl::{
    action_gap, solve, train, CurvePoint, RegularizerConfig, SchemeConfig, UpdateRule,
};

use crate::output::{mean_std, render_svg, write_atomic, Series};
use crate::spec::{ChainSpec, ExperimentKind, ExperimentSpec};
use crate::HarnessError;

/// Options shared by every `run` invocation.
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub jobs: Option<usize>,
    pub seed_override: Option<Vec<u64>>,
}

/// Counts reported after a run.
#[derive(Debug, Default)]
pub struct RunSummary {
    pub trained: usize,
    pub skipped: usize,
    pub failed: usize,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    experiment: String,
    complete: Vec<String>,
}

impl Manifest {
    fn load(path: &Path, experiment: &str) -> Self {
        let Ok(text) = std::fs::read_to_string(path) else {
            return Manifest {
                experiment: experiment.to_string(),
                complete: Vec::new(),
            };
        };
        match serde_json::from_str::<Manifest>(&text) {
            Ok(m) if m.experiment == experiment => m,
            _ => Manifest {
                experiment: experiment.to_string(),
                complete: Vec::new(),
            },
        }
    }

    fn store(&self, path: &Path) -> Result<(), HarnessError> {
        let mut sorted = self.complete.clone();
        sorted.sort_unstable();
        let doc = serde_json::to_string_pretty(&Manifest {
            experiment: self.experiment.clone(),
            complete: sorted,
        })
        .expect("manifest serializes");
        write_atomic(path, &(doc + "\n"))
    }
}

#[derive(Serialize)]
struct FailureReport<'a> {
    experiment: &'a str,
    failures: Vec<CellFailure>,
}

#[derive(Serialize)]
struct CellFailure {
    cell: String,
    message: String,
}

/// Deterministic per-cell RNG seed: FNV-1a over the experiment name, the
/// scheme's position in the experiment spec, and the training seed.
/// Independent of worker scheduling and stable across runs.
pub fn cell_seed(experiment: &str, scheme_index: usize, seed: u64) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(PRIME);
        }
    };
    eat(experiment.as_bytes());
    eat(&[0]);
    eat(&(scheme_index as u64).to_le_bytes());
    eat(&seed.to_le_bytes());
    h
}

/// Run a validated spec. Completed cells found in the manifest are loaded
/// from disk instead of retrained; failures are collected into a
/// machine-readable report and returned as a runtime error after all other
/// cells finish.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<RunSummary, HarnessError> {
    spec.validate()?;
    let exp_dir = opts.out_dir.join(&spec.name);
    std::fs::create_dir_all(&exp_dir)?;
    match spec.kind {
        ExperimentKind::CartpoleTraining => run_cartpole(spec, opts, &exp_dir),
        ExperimentKind::ChainActionGap => {
            if opts.seed_override.is_some() {
                return Err(HarnessError::Spec(
                    "--seed-override does not apply to chain-action-gap (deterministic)".into(),
                ));
            }
            run_chain(spec, &exp_dir)
        }
    }
}

const CURVE_HEADER: &str = "step,episode_return_mean,action_gap_mean";

fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{:.17e},{:.17e}\n",
            p.step, p.episode_return_mean, p.action_gap_mean
        ));
    }
    out
}

fn parse_curve_csv(text: &str) -> Result<Vec<CurvePoint>, HarnessError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CURVE_HEADER => {}
        other => {
            return Err(HarnessError::Runtime(format!(
                "unexpected curve header {other:?}"
            )))
        }
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut it = line.split(',');
        let step = it
            .next()
            .and_then(|f| f.parse::<usize>().ok())
            .ok_or_else(|| HarnessError::Runtime(format!("bad step on data row {i}")))?;
        let ret = it
            .next()
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| HarnessError::Runtime(format!("bad return on data row {i}")))?;
        let gap = it
            .next()
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| HarnessError::Runtime(format!("bad gap on data row {i}")))?;
        points.push(CurvePoint {
            step,
            episode_return_mean: ret,
            action_gap_mean: gap,
        });
    }
    Ok(points)
}

struct CellOutcome {
    scheme_index: usize,
    cell_id: String,
    points: Option<Vec<CurvePoint>>,
    skipped: bool,
    error: Option<String>,
}

fn run_cartpole(
    spec: &ExperimentSpec,
    opts: &RunOptions,
    exp_dir: &Path,
) -> Result<RunSummary, HarnessError> {
    let seeds: Vec<u64> = opts
        .seed_override
        .clone()
        .unwrap_or_else(|| spec.seeds.clone());
    let manifest_path = exp_dir.join("manifest.json");
    let manifest = Mutex::new(Manifest::load(&manifest_path, &spec.name));

    struct Cell {
        scheme_index: usize,
        seed: u64,
        cell_id: String,
        csv_path: PathBuf,
    }
    let mut cells = Vec::new();
    for (si, scheme) in spec.schemes.iter().enumerate() {
        std::fs::create_dir_all(exp_dir.join(&scheme.label))?;
        for &seed in &seeds {
            cells.push(Cell {
                scheme_index: si,
                seed,
                cell_id: format!("{}/seed-{}", scheme.label, seed),
                csv_path: exp_dir.join(&scheme.label).join(format!("seed-{seed}.csv")),
            });
        }
    }

    let run_cell = |cell: &Cell| -> CellOutcome {
        let already = {
            let m = manifest.lock().expect("manifest lock");
            m.complete.contains(&cell.cell_id)
        };
        if already && cell.csv_path.exists() {
            let loaded = std::fs::read_to_string(&cell.csv_path)
                .map_err(HarnessError::from)
                .and_then(|t| parse_curve_csv(&t));
            return match loaded {
                Ok(points) => {
                    println!("cell {}: skipped (already complete)", cell.cell_id);
                    CellOutcome {
                        scheme_index: cell.scheme_index,
                        cell_id: cell.cell_id.clone(),
                        points: Some(points),
                        skipped: true,
                        error: None,
                    }
                }
                Err(e) => CellOutcome {
                    scheme_index: cell.scheme_index,
                    cell_id: cell.cell_id.clone(),
                    points: None,
                    skipped: false,
                    error: Some(format!("could not reload completed cell: {e}")),
                },
            };
        }
        let scheme = &spec.schemes[cell.scheme_index];
        let cfg = scheme.agent_config(&spec.agent);
        let run_seed = cell_seed(&spec.name, cell.scheme_index, cell.seed);
        let started = Instant::now();
        let mut env = CartPole::new();
        match train::<f32, _>(&mut env, &cfg, run_seed) {
            Ok((_, curve)) => {
                let write = write_atomic(&cell.csv_path, &curve_csv(&curve.points));
                if let Err(e) = write {
                    return CellOutcome {
                        scheme_index: cell.scheme_index,
                        cell_id: cell.cell_id.clone(),
                        points: None,
                        skipped: false,
                        error: Some(e.to_string()),
                    };
                }
                {
                    let mut m = manifest.lock().expect("manifest lock");
                    if !m.complete.contains(&cell.cell_id) {
                        m.complete.push(cell.cell_id.clone());
                    }
                    let _ = m.store(&manifest_path);
                }
                println!(
                    "cell {}: trained, final trailing-20 return {:.1} ({:.0}s)",
                    cell.cell_id,
                    curve.final_trailing_mean(),
                    started.elapsed().as_secs_f64()
                );
                CellOutcome {
                    scheme_index: cell.scheme_index,
                    cell_id: cell.cell_id.clone(),
                    points: Some(curve.points),
                    skipped: false,
                    error: None,
                }
            }
            Err(e) => CellOutcome {
                scheme_index: cell.scheme_index,
                cell_id: cell.cell_id.clone(),
                points: None,
                skipped: false,
                error: Some(e.to_string()),
            },
        }
    };

    let outcomes: Vec<CellOutcome> = if let Some(jobs) = opts.jobs {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
        pool.install(|| {
            use rayon::prelude::*;
            cells.par_iter().map(run_cell).collect()
        })
    } else {
        cells.iter().map(run_cell).collect()
    };

    // Aggregate each scheme across seeds, in spec order.
    let mut summary = RunSummary::default();
    let mut failures = Vec::new();
    for o in &outcomes {
        if let Some(msg) = &o.error {
            summary.failed += 1;
            failures.push(CellFailure {
                cell: o.cell_id.clone(),
                message: msg.clone(),
            });
        } else if o.skipped {
            summary.skipped += 1;
        } else {
            summary.trained += 1;
        }
    }

    let mut return_series = Vec::new();
    let mut gap_series = Vec::new();
    for (si, scheme) in spec.schemes.iter().enumerate() {
        let curves: Vec<&Vec<CurvePoint>> = outcomes
            .iter()
            .filter(|o| o.scheme_index == si)
            .filter_map(|o| o.points.as_ref())
            .collect();
        if curves.is_empty() {
            continue;
        }
        let n_points = curves.iter().map(|c| c.len()).min().unwrap_or(0);
        let mut rows = String::from("step,return_mean,return_std,gap_mean,gap_std\n");
        let mut xs = Vec::new();
        let mut ret_mean = Vec::new();
        let mut ret_std = Vec::new();
        let mut gap_mean = Vec::new();
        let mut gap_std = Vec::new();
        for p in 0..n_points {
            let step = curves[0][p].step;
            let rets: Vec<f64> = curves.iter().map(|c| c[p].episode_return_mean).collect();
            let gaps: Vec<f64> = curves.iter().map(|c| c[p].action_gap_mean).collect();
            let (rm, rs) = mean_std(&rets);
            let (gm, gs) = mean_std(&gaps);
            rows.push_str(&format!(
                "{step},{rm:.17e},{rs:.17e},{gm:.17e},{gs:.17e}\n"
            ));
            xs.push(step as f64);
            ret_mean.push(rm);
            ret_std.push(rs);
            gap_mean.push(gm);
            gap_std.push(gs);
        }
        write_atomic(&exp_dir.join(&scheme.label).join("aggregate.csv"), &rows)?;
        return_series.push(Series {
            label: scheme.label.clone(),
            xs: xs.clone(),
            mean: ret_mean,
            std: ret_std,
        });
        gap_series.push(Series {
            label: scheme.label.clone(),
            xs,
            mean: gap_mean,
            std: gap_std,
        });
    }
    write_atomic(
        &exp_dir.join("returns.svg"),
        &render_svg(
            &spec.name,
            "environment steps",
            "trailing-20 episode return",
            &return_series,
        ),
    )?;
    write_atomic(
        &exp_dir.join("action-gaps.svg"),
        &render_svg(
            &spec.name,
            "environment steps",
            "mean action gap at probe states",
            &gap_series,
        ),
    )?;

    finish(spec, exp_dir, summary, failures)
}

fn chain_beta_id(beta: f64) -> String {
    format!("beta-{beta}")
}

fn run_chain(spec: &ExperimentSpec, exp_dir: &Path) -> Result<RunSummary, HarnessError> {
    let chain: &ChainSpec = spec.chain.as_ref().expect("validated chain table");
    let mdp = chain_mdp(chain.n_states, chain.slip, chain.gamma)
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let terminal = chain.n_states - 1;
    let manifest_path = exp_dir.join("manifest.json");
    let mut manifest = Manifest::load(&manifest_path, &spec.name);

    let mut summary = RunSummary::default();
    let mut failures = Vec::new();
    let mut gap_curves = Vec::new();
    let mut aggregate = String::from("beta,mean_gap\n");
    for &beta in &chain.betas {
        let id = chain_beta_id(beta);
        let cfg = SchemeConfig::new(
            UpdateRule::Tal,
            RegularizerConfig::tsallis(chain.q, chain.alpha),
        )
        .with_beta(beta);
        let solved = solve(&mdp, &cfg, chain.max_sweeps, chain.tol);
        let (q, _, trace) = match solved {
            Ok(t) => t,
            Err(e) => {
                summary.failed += 1;
                failures.push(CellFailure {
                    cell: id,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if !trace.converged {
            summary.failed += 1;
            failures.push(CellFailure {
                cell: id,
                message: format!("no fixed point within {} sweeps", chain.max_sweeps),
            });
            continue;
        }
        write_atomic(&exp_dir.join(format!("{id}-trace.csv")), &trace.to_csv())?;
        let mut gaps_csv = String::from("state,gap\n");
        let mut gaps = Vec::new();
        for s in 0..mdp.n_states {
            if s == terminal {
                continue;
            }
            let row: Vec<f64> = (0..mdp.n_actions).map(|a| q[[s, a]]).collect();
            let gap = action_gap(&row).map_err(|e| HarnessError::Runtime(e.to_string()))?;
            gaps_csv.push_str(&format!("{s},{gap:.17e}\n"));
            gaps.push(gap);
        }
        write_atomic(&exp_dir.join(format!("{id}-gaps.csv")), &gaps_csv)?;
        let (mean_gap, _) = mean_std(&gaps);
        aggregate.push_str(&format!("{beta},{mean_gap:.17e}\n"));
        gap_curves.push(Series {
            label: id.clone(),
            xs: (1..=trace.mean_gaps.len()).map(|i| i as f64).collect(),
            mean: trace.mean_gaps.clone(),
            std: vec![0.0; trace.mean_gaps.len()],
        });
        if !manifest.complete.contains(&id) {
            manifest.complete.push(id.clone());
        }
        println!(
            "cell {id}: converged in {} sweeps, mean action gap {mean_gap:.5}",
            trace.n_sweeps()
        );
        summary.trained += 1;
    }
    write_atomic(&exp_dir.join("aggregate.csv"), &aggregate)?;
    write_atomic(
        &exp_dir.join("action-gaps.svg"),
        &render_svg(
            &spec.name,
            "sweep",
            "mean action gap over non-terminal states",
            &gap_curves,
        ),
    )?;
    manifest.store(&manifest_path)?;

    finish(spec, exp_dir, summary, failures)
}

fn finish(
    spec: &ExperimentSpec,
    exp_dir: &Path,
    summary: RunSummary,
    failures: Vec<CellFailure>,
) -> Result<RunSummary, HarnessError> {
    if failures.is_empty() {
        return Ok(summary);
    }
    let report = FailureReport {
        experiment: &spec.name,
        failures,
    };
    let doc = serde_json::to_string_pretty(&report).expect("report serializes");
    write_atomic(&exp_dir.join("error-report.json"), &(doc + "\n"))?;
    Err(HarnessError::Runtime(format!(
        "{} cell(s) failed; see {}",
        summary.failed,
        exp_dir.join("error-report.json").display()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_seeds_are_stable_and_distinct() {
        let a = cell_seed("exp", 0, 0);
        assert_eq!(a, cell_seed("exp", 0, 0));
        let others = [
            cell_seed("exp", 0, 1),
            cell_seed("exp", 1, 0),
            cell_seed("exq", 0, 0),
        ];
        for o in others {
            assert_ne!(a, o);
        }
    }

    #[test]
    fn curve_csv_round_trips() {
        let points = vec![
            CurvePoint {
                step: 100,
                episode_return_mean: 12.345678901234567,
                action_gap_mean: 1e-9,
            },
            CurvePoint {
                step: 200,
                episode_return_mean: 0.0,
                action_gap_mean: 499.99,
            },
        ];
        let parsed = parse_curve_csv(&curve_csv(&points)).unwrap();
        assert_eq!(parsed.len(), 2);
        for (a, b) in points.iter().zip(&parsed) {
            assert_eq!(a.step, b.step);
            assert_eq!(a.episode_return_mean, b.episode_return_mean);
            assert_eq!(a.action_gap_mean, b.action_gap_mean);
        }
        assert!(parse_curve_csv("bad header\n1,2,3\n").is_err());
    }
}
