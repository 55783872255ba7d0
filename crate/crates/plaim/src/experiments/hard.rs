//! Desk-scale rerun of the chained-instance procedure: tune gradient descent
//! and the continuized momentum method, fit their decay rates, and test the
//! acceleration heuristic (average aiming value against the threshold built
//! from path-averaged constants).

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{CliError, ExperimentConfig};
use super::ExperimentOutcome;
use crate::optim::{
    run_gd, run_nm_continuized, GdConfig, NmContinuizedConfig, NoiseModel, RunRecord,
};
use crate::testbed::{hard_pl_instance, HardInstanceConfig};
use crate::trajectory::{decay_fit_window, fit_rate};

fn err(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

/// Ladder factor: bump positions sit at this fraction of the equilibrium
/// coordinates, so every coordinate crosses its bump (and its flat spot)
/// on the way from the all-zeros start.
const LADDER_BETA: f64 = 0.8;
/// Horizon for the tuning objective.
const TUNE_ITERS: usize = 1000;
/// Tuning objective: the gap at the horizon, with ties (runs that have hit
/// the rounding floor) resolved at mid-horizon checkpoints.
const CHECKPOINTS: [usize; 3] = [1000, 500, 250];
/// Relative floor for rate-fit windows.
const FIT_FLOOR: f64 = 1e-10;

fn score(gaps: &[f64]) -> [f64; 3] {
    let floor = 1e-300;
    let mut s = [f64::INFINITY; 3];
    for (i, &k) in CHECKPOINTS.iter().enumerate() {
        if k < gaps.len() {
            s[i] = gaps[k].max(floor);
        }
    }
    s
}

fn score_less(a: &[f64; 3], b: &[f64; 3]) -> bool {
    for i in 0..3 {
        if a[i] < b[i] {
            return true;
        }
        if a[i] > b[i] {
            return false;
        }
    }
    false
}

struct TunedGd {
    gamma: f64,
    record: RunRecord,
}

fn tune_gd(obj: &crate::objective::Objective, l: f64) -> Result<TunedGd, CliError> {
    let x0 = vec![0.0; obj.dim()];
    // log grid of stepsizes; among exact ties the larger stepsize wins
    let gammas: Vec<f64> = (0..61)
        .map(|i| 0.01 / l * (3000.0f64).powf(i as f64 / 60.0))
        .collect();
    let runs: Vec<(f64, Option<RunRecord>)> = gammas
        .par_iter()
        .map(|&gamma| {
            let cfg = GdConfig::new(gamma, TUNE_ITERS).expect("positive gamma");
            let rec = run_gd(obj, &cfg, &x0, &NoiseModel::none()).ok();
            (gamma, rec.filter(|r| !r.diverged))
        })
        .collect();
    let mut best: Option<(f64, RunRecord, [f64; 3])> = None;
    for (gamma, rec) in runs {
        let Some(rec) = rec else { continue };
        let s = score(&rec.f_gaps);
        let better = match &best {
            None => true,
            // ties go to the larger stepsize
            Some((bg, _, bs)) => score_less(&s, bs) || (s == *bs && gamma > *bg),
        };
        if better {
            best = Some((gamma, rec, s));
        }
    }
    let (gamma, record, _) =
        best.ok_or_else(|| CliError::Failed("no stable stepsize found".into()))?;
    Ok(TunedGd { gamma, record })
}

struct TunedNm {
    cfg: NmContinuizedConfig,
    record: RunRecord,
}

fn tune_nm(obj: &crate::objective::Objective, l: f64, seed: u64) -> Result<TunedNm, CliError> {
    let x0 = vec![0.0; obj.dim()];
    let mut grid = Vec::new();
    for i in 0..6 {
        let eta = 1e-2 * (300.0f64).powf(i as f64 / 5.0);
        for j in 0..6 {
            let eta_prime = 1e-4 * (1e4f64).powf(j as f64 / 5.0);
            for &gl in &[0.5, 1.0, 2.0, 4.0] {
                for &gpl in &[0.5, 2.0, 8.0] {
                    grid.push((eta, eta_prime, gl / l, gpl / l.sqrt()));
                }
            }
        }
    }
    let runs: Vec<(usize, Option<RunRecord>)> = grid
        .par_iter()
        .enumerate()
        .map(|(idx, &(eta, etap, gamma, gamma_prime))| {
            let cfg = NmContinuizedConfig::new(eta, etap, gamma, gamma_prime)
                .expect("grid parameters are valid")
                .with_iters(TUNE_ITERS)
                .with_seed(seed);
            let rec = run_nm_continuized(obj, &cfg, &x0, &NoiseModel::none()).ok();
            (idx, rec.filter(|r| !r.diverged))
        })
        .collect();
    let mut best: Option<(usize, RunRecord, [f64; 3])> = None;
    for (idx, rec) in runs {
        let Some(rec) = rec else { continue };
        let s = score(&rec.f_gaps);
        let better = match &best {
            None => true,
            Some((bi, _, bs)) => score_less(&s, bs) || (s == *bs && idx < *bi),
        };
        if better {
            best = Some((idx, rec, s));
        }
    }
    let (idx, record, _) =
        best.ok_or_else(|| CliError::Failed("no stable momentum configuration found".into()))?;
    let (eta, etap, gamma, gamma_prime) = grid[idx];
    Ok(TunedNm {
        cfg: NmContinuizedConfig::new(eta, etap, gamma, gamma_prime)
            .expect("grid parameters are valid")
            .with_iters(TUNE_ITERS)
            .with_seed(seed),
        record,
    })
}

/// Path statistics over the pre-floor window of a record: mean pointwise PL,
/// mean aiming, and the min/max pointwise quadratic-growth ratio.
struct PathStats {
    mu_mean: f64,
    aim_mean: f64,
    mu0_min: f64,
    mu0_max: f64,
}

fn path_stats(obj: &crate::objective::Objective, record: &RunRecord, hi: usize) -> PathStats {
    let x_star = obj.x_star().expect("hard instance has a minimizer");
    let f_star = obj.f_star().expect("hard instance has a minimum");
    let mut mu_sum = 0.0;
    let mut mu_n = 0usize;
    let mut aim_sum = 0.0;
    let mut aim_n = 0usize;
    let mut mu0_min = f64::INFINITY;
    let mut mu0_max = f64::NEG_INFINITY;
    for k in 0..hi.min(record.len()) {
        let x = &record.iterates[k];
        let gap = obj.value(x) - f_star;
        let dist = crate::linalg::dist(x, x_star);
        if gap <= 1e-13 || dist <= 1e-12 {
            continue;
        }
        let g = obj.gradient(x);
        let g2 = crate::linalg::dot(&g, &g);
        mu_sum += g2 / (2.0 * gap);
        mu_n += 1;
        if g2 > 0.0 {
            let diff: Vec<f64> = x.iter().zip(x_star.iter()).map(|(a, b)| a - b).collect();
            aim_sum += crate::linalg::dot(&g, &diff) / (g2.sqrt() * dist);
            aim_n += 1;
        }
        let q = 2.0 * gap / (dist * dist);
        mu0_min = mu0_min.min(q);
        mu0_max = mu0_max.max(q);
    }
    PathStats {
        mu_mean: if mu_n > 0 { mu_sum / mu_n as f64 } else { f64::NAN },
        aim_mean: if aim_n > 0 { aim_sum / aim_n as f64 } else { f64::NAN },
        mu0_min,
        mu0_max,
    }
}

pub(crate) struct HardOutcomeNumbers {
    pub rate_gd: f64,
    pub rate_nm: f64,
    pub a_tilde: f64,
    pub threshold: f64,
    pub gd_record: RunRecord,
    pub nm_record: RunRecord,
}

pub(crate) fn run_hard(cfg: &ExperimentConfig) -> Result<(HardOutcomeNumbers, String), CliError> {
    let block_len = cfg.override_usize("T")?.unwrap_or(10);
    let blocks = cfg.override_usize("t")?.unwrap_or(5);
    let beta = cfg.override_f64("beta")?.unwrap_or(LADDER_BETA);
    let target_l = cfg.override_f64("target_l")?.unwrap_or(1e3);

    let hard_cfg = HardInstanceConfig::desk_scale(block_len, blocks, beta, target_l).map_err(err)?;
    let spec = hard_pl_instance(&hard_cfg).map_err(err)?;
    let obj = &spec.objective;
    let l = target_l;

    let gd = tune_gd(obj, l)?;
    let nm = tune_nm(obj, l, cfg.seed)?;

    let w_gd = decay_fit_window(&gd.record.f_gaps, FIT_FLOOR);
    let w_nm = decay_fit_window(&nm.record.f_gaps, FIT_FLOOR);
    let fit_gd = fit_rate(&gd_index_axis(&gd.record), &gd.record.f_gaps, Some(w_gd)).map_err(err)?;
    let fit_nm = fit_rate(&gd_index_axis(&nm.record), &nm.record.f_gaps, Some(w_nm)).map_err(err)?;

    let stats_gd = path_stats(obj, &gd.record, w_gd.1);
    let stats_nm = path_stats(obj, &nm.record, w_nm.1);

    // Acceleration heuristic. Pointwise PL values enter with the
    // 2 ||grad f||^2 / gap normalization this heuristic is calibrated to
    // (4x the standardized ratio):
    // threshold = mu~_gd gamma_gd / sqrt(gamma_nm mu~_nm) * (L0~/mu0~)^{1/4}.
    let mu_gd_b3 = 4.0 * stats_gd.mu_mean;
    let mu_nm_b3 = 4.0 * stats_nm.mu_mean;
    let threshold = mu_gd_b3 * gd.gamma / (nm.cfg.gamma * mu_nm_b3).sqrt()
        * (stats_nm.mu0_max / stats_nm.mu0_min).powf(0.25);
    let a_tilde = stats_nm.aim_mean;

    let mut detail = String::new();
    let _ = writeln!(
        detail,
        "instance: T={block_len} t={blocks} d={} beta={beta} scale={:.6e}",
        hard_cfg.dim(),
        hard_cfg.scale
    );
    let _ = writeln!(
        detail,
        "tuned GD: gamma*L = {:.6e}, fit window [{}, {}), rate = {:.6e} (r2 {:.4})",
        gd.gamma * l,
        w_gd.0,
        w_gd.1,
        fit_gd.rate,
        fit_gd.r_squared
    );
    let _ = writeln!(
        detail,
        "tuned NM: eta={:.4e} eta'={:.4e} gamma*L={:.4e} gamma'*sqrt(L)={:.4e}, \
         fit window [{}, {}), rate = {:.6e} (r2 {:.4})",
        nm.cfg.eta,
        nm.cfg.eta_prime,
        nm.cfg.gamma * l,
        nm.cfg.gamma_prime * l.sqrt(),
        w_nm.0,
        w_nm.1,
        fit_nm.rate,
        fit_nm.r_squared
    );
    let _ = writeln!(
        detail,
        "path stats (NM window): mu~_nm = {:.6e}, a~ = {:.6e}, mu0~ = {:.6e}, L0~ = {:.6e}",
        stats_nm.mu_mean, stats_nm.aim_mean, stats_nm.mu0_min, stats_nm.mu0_max
    );
    let _ = writeln!(detail, "path stats (GD window): mu~_gd = {:.6e}", stats_gd.mu_mean);
    let _ = writeln!(
        detail,
        "heuristic pair: a~ = {:.6e} vs threshold = {:.6e} (ratio {:.4})",
        a_tilde,
        threshold,
        a_tilde / threshold
    );

    Ok((
        HardOutcomeNumbers {
            rate_gd: fit_gd.rate,
            rate_nm: fit_nm.rate,
            a_tilde,
            threshold,
            gd_record: gd.record,
            nm_record: nm.record,
        },
        detail,
    ))
}

fn gd_index_axis(record: &RunRecord) -> Vec<f64> {
    (0..record.len()).map(|k| k as f64).collect()
}

pub(crate) fn hard_instance(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, CliError> {
    let mut out = ExperimentOutcome::default();
    let (numbers, detail) = run_hard(cfg)?;
    out.summary.push_str(&detail);

    let mut buf = Vec::new();
    numbers.gd_record.write_csv(&mut buf)?;
    out.write_file(&cfg.out_dir, "hard_gd_trace.csv", &buf)?;
    let mut buf = Vec::new();
    numbers.nm_record.write_csv(&mut buf)?;
    out.write_file(&cfg.out_dir, "hard_nm_trace.csv", &buf)?;

    let ratio = numbers.rate_nm / numbers.rate_gd;
    out.check(
        cfg.check,
        "no momentum acceleration",
        ratio <= 1.5,
        format!(
            "fitted NM rate {:.4e} vs GD rate {:.4e} (ratio {ratio:.3})",
            numbers.rate_nm, numbers.rate_gd
        ),
    );
    let pair = numbers.a_tilde / numbers.threshold;
    out.check(
        cfg.check,
        "heuristic pair comparable",
        (0.5..=2.0).contains(&pair),
        format!(
            "a~ = {:.4e}, threshold = {:.4e} (ratio {pair:.3})",
            numbers.a_tilde, numbers.threshold
        ),
    );
    Ok(out)
}
