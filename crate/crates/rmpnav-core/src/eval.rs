//! Batch evaluation: seeded suites of episodes per world, exact
//! reached/collision/stuck counts with Wilson intervals, and side-by-side
//! agent comparison tables.

use crate::config::Config;
use crate::planner::OccupancyGrid;
use crate::world::{simulate_episode, Controller, Environment, Outcome};
use crate::worldgen::{derive_seed, sample_scenario};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("mismatched suites: {0}")]
    MismatchedSuites(String),
    #[error("malformed table: {0}")]
    MalformedTable(String),
}

/// An environment with a stable name for reporting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedWorld {
    pub name: String,
    pub env: Environment,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub world: usize,
    pub index: usize,
    pub seed: u64,
    /// `None` when no feasible start/goal pair was found for this seed.
    pub outcome: Option<Outcome>,
    pub steps: usize,
    pub duration: f64,
    pub solver_failures: usize,
}

/// Exact outcome counts for one world (or the aggregate).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldStats {
    pub name: String,
    pub episodes: usize,
    pub reached: usize,
    pub collision: usize,
    pub stuck: usize,
    pub infeasible: usize,
}

fn pct(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

/// 95% Wilson score interval for a binomial proportion, in percent.
pub fn wilson_interval(successes: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (0.0, 100.0);
    }
    let z = 1.959963984540054_f64;
    let n = total as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    (100.0 * (center - half).max(0.0), 100.0 * (center + half).min(1.0))
}

impl WorldStats {
    pub fn reached_pct(&self) -> f64 {
        pct(self.reached, self.episodes)
    }

    pub fn collision_pct(&self) -> f64 {
        pct(self.collision, self.episodes)
    }

    pub fn stuck_pct(&self) -> f64 {
        pct(self.stuck, self.episodes)
    }

    pub fn reached_interval(&self) -> (f64, f64) {
        wilson_interval(self.reached, self.episodes)
    }
}

/// All episodes of one agent over one suite of worlds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub agent: String,
    pub suite_seed: u64,
    pub episodes_per_world: usize,
    pub worlds: Vec<String>,
    pub per_world: Vec<WorldStats>,
    pub episodes: Vec<EpisodeRecord>,
}

impl SuiteResult {
    pub fn aggregate(&self) -> WorldStats {
        let mut total = WorldStats {
            name: "ALL".into(),
            episodes: 0,
            reached: 0,
            collision: 0,
            stuck: 0,
            infeasible: 0,
        };
        for w in &self.per_world {
            total.episodes += w.episodes;
            total.reached += w.reached;
            total.collision += w.collision;
            total.stuck += w.stuck;
            total.infeasible += w.infeasible;
        }
        total
    }

    /// Deterministic per-world CSV with exact counts, percentages and the
    /// Wilson 95% interval on reached%.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "agent,world,episodes,reached,collision,stuck,infeasible,reached_pct,collision_pct,stuck_pct,reached_ci_lo,reached_ci_hi\n",
        );
        for w in self.per_world.iter().chain(std::iter::once(&self.aggregate())) {
            let (lo, hi) = w.reached_interval();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
                self.agent,
                w.name,
                w.episodes,
                w.reached,
                w.collision,
                w.stuck,
                w.infeasible,
                w.reached_pct(),
                w.collision_pct(),
                w.stuck_pct(),
                lo,
                hi
            ));
        }
        out
    }
}

/// Runs `episodes_per_world` seeded episodes of one agent in every world.
/// Scenario sequences depend only on the suite seed and world order, so
/// different agents see byte-identical scenarios; episodes run in parallel
/// with order-independent aggregation.
pub fn run_suite(
    worlds: &[NamedWorld],
    episodes_per_world: usize,
    agent: &dyn Controller,
    agent_name: &str,
    cfg: &Config,
    suite_seed: u64,
) -> SuiteResult {
    assert!(episodes_per_world >= 1, "need at least one episode per world");
    let geom = cfg.geometry();
    let grids: Vec<OccupancyGrid> = worlds
        .par_iter()
        .map(|w| OccupancyGrid::rasterize(&w.env, cfg.planner.resolution, cfg.planner.inflation(&geom)))
        .collect();

    let jobs: Vec<(usize, usize)> = (0..worlds.len())
        .flat_map(|w| (0..episodes_per_world).map(move |e| (w, e)))
        .collect();
    let episodes: Vec<EpisodeRecord> = jobs
        .par_iter()
        .map(|&(w, e)| {
            let seed = derive_seed(derive_seed(suite_seed, w as u64), e as u64);
            match sample_scenario(&worlds[w].env, &grids[w], cfg, seed, 3.0) {
                Some(scn) => {
                    let traj = simulate_episode(&scn, agent, cfg);
                    EpisodeRecord {
                        world: w,
                        index: e,
                        seed,
                        outcome: Some(traj.outcome),
                        steps: traj.samples.len().saturating_sub(1),
                        duration: traj.duration(),
                        solver_failures: traj.solver_failures,
                    }
                }
                None => EpisodeRecord {
                    world: w,
                    index: e,
                    seed,
                    outcome: None,
                    steps: 0,
                    duration: 0.0,
                    solver_failures: 0,
                },
            }
        })
        .collect();

    let per_world = worlds
        .iter()
        .enumerate()
        .map(|(w, world)| {
            let mut stats = WorldStats {
                name: world.name.clone(),
                episodes: 0,
                reached: 0,
                collision: 0,
                stuck: 0,
                infeasible: 0,
            };
            for rec in episodes.iter().filter(|r| r.world == w) {
                match rec.outcome {
                    Some(Outcome::Reached) => stats.reached += 1,
                    Some(Outcome::Collision) => stats.collision += 1,
                    Some(Outcome::Stuck) => stats.stuck += 1,
                    None => {
                        stats.infeasible += 1;
                        continue;
                    }
                }
                stats.episodes += 1;
            }
            stats
        })
        .collect();

    SuiteResult {
        agent: agent_name.to_string(),
        suite_seed,
        episodes_per_world,
        worlds: worlds.iter().map(|w| w.name.clone()).collect(),
        per_world,
        episodes,
    }
}

/// Side-by-side per-world reached/collision percentages, one row per agent.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareTable {
    pub worlds: Vec<String>,
    pub rows: Vec<CompareRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub agent: String,
    /// (reached%, collision%) per world, then the aggregate pair.
    pub cells: Vec<(f64, f64)>,
    pub aggregate: (f64, f64),
}

/// Builds the comparison table; all results must come from the same suite
/// (same seed, worlds and episode counts).
pub fn compare(results: &[SuiteResult]) -> Result<CompareTable, EvalError> {
    let first = results.first().ok_or_else(|| {
        EvalError::MismatchedSuites("need at least one suite result".into())
    })?;
    for r in results {
        if r.suite_seed != first.suite_seed {
            return Err(EvalError::MismatchedSuites(format!(
                "seed {} vs {}",
                r.suite_seed, first.suite_seed
            )));
        }
        if r.worlds != first.worlds {
            return Err(EvalError::MismatchedSuites("world lists differ".into()));
        }
        if r.episodes_per_world != first.episodes_per_world {
            return Err(EvalError::MismatchedSuites("episode counts differ".into()));
        }
    }
    let rows = results
        .iter()
        .map(|r| {
            let cells = r
                .per_world
                .iter()
                .map(|w| (w.reached_pct(), w.collision_pct()))
                .collect();
            let agg = r.aggregate();
            CompareRow {
                agent: r.agent.clone(),
                cells,
                aggregate: (agg.reached_pct(), agg.collision_pct()),
            }
        })
        .collect();
    Ok(CompareTable { worlds: first.worlds.clone(), rows })
}

impl CompareTable {
    /// Lossless CSV (floats printed shortest-round-trip).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent");
        for w in &self.worlds {
            out.push_str(&format!(",{w}_reached_pct,{w}_collision_pct"));
        }
        out.push_str(",all_reached_pct,all_collision_pct\n");
        for row in &self.rows {
            out.push_str(&row.agent);
            for (r, c) in &row.cells {
                out.push_str(&format!(",{r},{c}"));
            }
            out.push_str(&format!(",{},{}\n", row.aggregate.0, row.aggregate.1));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<CompareTable, EvalError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| EvalError::MalformedTable("empty table".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || (cols.len() - 3) % 2 != 0 {
            return Err(EvalError::MalformedTable("unexpected column count".into()));
        }
        let worlds: Vec<String> = cols[1..cols.len() - 2]
            .chunks(2)
            .map(|c| c[0].trim_end_matches("_reached_pct").to_string())
            .collect();
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(EvalError::MalformedTable(format!("ragged row: {line}")));
            }
            let nums: Vec<f64> = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| EvalError::MalformedTable(e.to_string()))?;
            let cells = nums[..nums.len() - 2].chunks(2).map(|c| (c[0], c[1])).collect();
            rows.push(CompareRow {
                agent: fields[0].to_string(),
                cells,
                aggregate: (nums[nums.len() - 2], nums[nums.len() - 1]),
            });
        }
        Ok(CompareTable { worlds, rows })
    }
}

impl std::fmt::Display for CompareTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:<18}", "agent")?;
        for w in &self.worlds {
            write!(f, " | {w:>9} reach/coll")?;
        }
        writeln!(f, " | {:>9} reach/coll", "ALL")?;
        for row in &self.rows {
            write!(f, "{:<18}", row.agent)?;
            for (r, c) in &row.cells {
                write!(f, " | {r:>9.1}% / {c:>4.1}%")?;
            }
            writeln!(f, " | {:>9.1}% / {:>4.1}%", row.aggregate.0, row.aggregate.1)?;
        }
        Ok(())
    }
}
