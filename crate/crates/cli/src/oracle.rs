//! `oracle analytic | search | count | sweep`.

use crate::inputs::{load_scenario, write_file};
use crate::manifest::Manifest;
use anyhow::{bail, Result};
use clap::{Args, Subcommand};
use qff_core::oracles::{
    analytic_optimum, analytic_two_qubit, brute_force_search, default_idle_grid, fixed_first_count, refine, strategy_count,
    sweep, sweep_csv, OracleModel, SearchOptions,
};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Subcommand)]
pub enum OracleCommand {
    /// Closed-form decay time of the alternating one-ancilla protocol.
    Analytic(AnalyticArgs),
    /// Exhaustive search over measurement trees.
    Search(SearchArgs),
    /// Number of candidate trees for a search size.
    Count(CountArgs),
    /// Winning strategy family over a grid of ancilla couplings.
    Sweep(SweepArgs),
}

/// Search-space options shared by `search`, `count` and `sweep`.
#[derive(Args, Clone)]
pub struct SpaceArgs {
    #[arg(long, default_value_t = 1)]
    depth: usize,
    /// Number of log-spaced idle durations in [0.01, 1] trivial decay times.
    #[arg(long, default_value_t = 12)]
    grid_points: usize,
    /// Explicit idle durations in trivial decay times (overrides --grid-points).
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    /// Fix the first measurement and mirror its second subtree.
    #[arg(long)]
    fixed_first: bool,
}

impl SpaceArgs {
    fn grid(&self) -> Result<Vec<f64>> {
        if !self.grid.is_empty() {
            if self.grid.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
                bail!("idle durations must be positive");
            }
            return Ok(self.grid.clone());
        }
        if self.grid_points == 0 {
            bail!("--grid-points must be at least 1");
        }
        Ok(default_idle_grid(self.grid_points))
    }

    fn options(&self, top_k: usize) -> Result<SearchOptions> {
        Ok(SearchOptions { depth: self.depth, grid: self.grid()?, fixed_first: self.fixed_first, top_k, ..Default::default() })
    }
}

#[derive(Args)]
pub struct AnalyticArgs {
    /// Ancilla-to-data coupling ratios.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    mu_ratios: Vec<f64>,
    #[arg(long, default_value_t = 500.0)]
    t_triv: f64,
    /// Scan range in trivial decay times.
    #[arg(long, default_value_t = 1e-3)]
    tau_min: f64,
    #[arg(long, default_value_t = 10.0)]
    tau_max: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct SearchArgs {
    /// Correlated-dephasing scenario file or built-in name.
    #[arg(long, conflicts_with = "ratios")]
    scenario: Option<String>,
    /// Coupling ratios `1,mu2[,mu3]` relative to the data qubit.
    #[arg(long, value_delimiter = ',')]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 500.0)]
    t_triv: f64,
    #[command(flatten)]
    space: SpaceArgs,
    #[arg(long, default_value_t = 20)]
    top_k: usize,
    /// Golden-section refinement rounds on the winner's idle times (0 disables).
    #[arg(long, default_value_t = 2)]
    refine: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct CountArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[arg(long, default_value_t = 2)]
    ancillas: usize,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    mu2: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    mu3: Vec<f64>,
    #[arg(long, default_value_t = 500.0)]
    t_triv: f64,
    #[command(flatten)]
    space: SpaceArgs,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(c: OracleCommand) -> Result<()> {
    match c {
        OracleCommand::Analytic(a) => analytic(a),
        OracleCommand::Search(a) => search(a),
        OracleCommand::Count(a) => count(a),
        OracleCommand::Sweep(a) => run_sweep(a),
    }
}

fn analytic(a: AnalyticArgs) -> Result<()> {
    if a.points < 2 || !(a.tau_min > 0.0) || !(a.tau_max > a.tau_min) {
        bail!("need at least 2 points and 0 < tau-min < tau-max");
    }
    let mut csv = String::from("mu_ratio,tau,tau_over_t_triv,theta,g,t_eff,t_eff_over_t_triv\n");
    let mut optima = Vec::new();
    for &r in &a.mu_ratios {
        for i in 0..a.points {
            let x = a.tau_min * (a.tau_max / a.tau_min).powf(i as f64 / (a.points - 1) as f64);
            let p = analytic_two_qubit(x * a.t_triv, 1.0, r, a.t_triv)?;
            csv += &format!(
                "{r},{:.12e},{x:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                p.tau,
                p.theta,
                p.g,
                p.t_eff,
                p.t_eff / a.t_triv
            );
        }
        if let Ok((tau, t)) = analytic_optimum(1.0, r, a.t_triv) {
            optima.push(Optimum { mu_ratio: r, tau, t_eff: t, t_eff_over_t_triv: t / a.t_triv });
        }
    }
    let mut m = Manifest::begin(&a.out, None, None, Vec::new())?;
    let result = (|| -> Result<()> {
        write_file(&a.out.join("analytic.csv"), &csv)?;
        write_file(&a.out.join("optima.json"), &(serde_json::to_string_pretty(&optima)? + "\n"))?;
        m.output("analytic.csv");
        m.output("optima.json");
        Ok(())
    })();
    m.finish(result)
}

#[derive(Serialize)]
struct Optimum {
    mu_ratio: f64,
    tau: f64,
    t_eff: f64,
    t_eff_over_t_triv: f64,
}

#[derive(Serialize)]
struct Best {
    tree: String,
    shape: String,
    t_eff: f64,
    t_eff_over_t_triv: f64,
    mean_time: f64,
    candidates: String,
    refined_tree: Option<String>,
    refined_t_eff: Option<f64>,
}

fn search(a: SearchArgs) -> Result<()> {
    let (model, hash) = match (&a.scenario, a.ratios.is_empty()) {
        (Some(s), _) => {
            let cfg = load_scenario(s)?;
            (OracleModel::from_config(&cfg)?, Some(cfg.hash()))
        }
        (None, false) => (OracleModel::from_ratios(&a.ratios, a.t_triv)?, None),
        (None, true) => bail!("pass --scenario or --ratios"),
    };
    let opts = a.space.options(a.top_k)?;
    let mut m = Manifest::begin(&a.out, hash, None, Vec::new())?;
    let result = (|| -> Result<()> {
        let res = brute_force_search(&model, &opts)?;
        let refined = match a.refine {
            0 => None,
            n => Some(refine(&model, &res.best, n)?),
        };
        let best = Best {
            tree: res.best.to_string(),
            shape: res.best.shape(),
            t_eff: res.evaluation.t_eff,
            t_eff_over_t_triv: res.evaluation.t_eff / res.t_triv,
            mean_time: res.evaluation.mean_time,
            candidates: res.candidates.to_string(),
            refined_tree: refined.as_ref().map(|(t, _)| t.to_string()),
            refined_t_eff: refined.as_ref().map(|(_, e)| e.t_eff),
        };
        write_file(&a.out.join("ranking.csv"), &res.ranking_csv())?;
        write_file(&a.out.join("best.json"), &(serde_json::to_string_pretty(&best)? + "\n"))?;
        m.output("ranking.csv");
        m.output("best.json");
        println!("{} T_eff/T_triv = {:.6}", best.tree, best.t_eff_over_t_triv);
        Ok(())
    })();
    m.finish(result)
}

fn count(a: CountArgs) -> Result<()> {
    if a.space.depth == 0 || a.ancillas == 0 {
        bail!("depth and ancillas must be at least 1");
    }
    let n = a.space.grid()?.len();
    let c = match a.space.fixed_first {
        true => fixed_first_count(a.space.depth, n, a.ancillas),
        false => strategy_count(a.space.depth, n, a.ancillas),
    };
    println!("{c}");
    Ok(())
}

fn run_sweep(a: SweepArgs) -> Result<()> {
    if a.mu2.is_empty() || a.mu3.is_empty() {
        bail!("--mu2 and --mu3 need at least one value");
    }
    let opts = a.space.options(1)?;
    let mut m = Manifest::begin(&a.out, None, None, Vec::new())?;
    let result = (|| -> Result<()> {
        let rows = sweep(&a.mu2, &a.mu3, a.t_triv, &opts)?;
        write_file(&a.out.join("sweep.csv"), &sweep_csv(&rows))?;
        m.output("sweep.csv");
        Ok(())
    })();
    m.finish(result)
}
