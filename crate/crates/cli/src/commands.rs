//! Subcommands: run an experiment, write its files, return its record.

use std::fmt::Write as _;

use anyhow::Result;
use quasistat::dynamics::run_trajectory;
use quasistat::pointproc::sample_pp_exponential;
use quasistat::rng::{stream_rng, Purpose};
use quasistat::stattest::{SampleMatrix, Verdict};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::experiments::{
    after_ensemble, before_ensemble, compare_oracles_experiment, gen_functional_experiment, invariance_experiment,
    lemma_experiment, Coordinates,
};
use crate::record::{fmt_f64, matrix_csv, pvalues_csv, write_text, ResultRecord};

fn column_stats(record: &mut ResultRecord, prefix: &str, m: &SampleMatrix) {
    let n = m.nrows() as f64;
    for j in 0..m.ncols() {
        let col = m.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = if m.nrows() > 1 {
            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        record.stat(format!("mean_{prefix}_{}", j + 1), mean);
        record.stat(format!("se_{prefix}_{}", j + 1), (var / n).sqrt());
    }
}

/// Top-k masses (`samples.csv`), or for `pp` the top-k points (`points.csv`)
/// and gaps (`gaps.csv`).
pub fn cmd_sample(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    cfg.validate()?;
    let mut record = ResultRecord::new("sample", cfg);
    if cfg.kind == "pp" {
        let seed = cfg.seed()?;
        let k = cfg.topk;
        let rows: Vec<Vec<f64>> = (0..cfg.replicas as u64)
            .into_par_iter()
            .map(|r| Ok(sample_pp_exponential(cfg.rho, k + 1, &mut stream_rng(seed, Purpose::Before, r))?.into_points()))
            .collect::<Result<_>>()?;
        let points = SampleMatrix::new(rows.iter().map(|p| p[..k].to_vec()).collect())?;
        let gaps = SampleMatrix::new(rows.iter().map(|p| p.windows(2).map(|w| w[0] - w[1]).collect()).collect())?;
        write_text(&cfg.out.join("points.csv"), &matrix_csv("x", &points))?;
        write_text(&cfg.out.join("gaps.csv"), &matrix_csv("gap", &gaps))?;
        column_stats(&mut record, "x", &points);
        column_stats(&mut record, "gap", &gaps);
    } else {
        let (m, coords) = before_ensemble(cfg)?;
        write_text(&cfg.out.join("samples.csv"), &matrix_csv(coords.prefix(), &m))?;
        column_stats(&mut record, coords.prefix(), &m);
    }
    record.write(&cfg.out)?;
    Ok(record)
}

/// Evolved ensemble. Partitions are reshuffled `τ` times (`evolved.csv`);
/// `pp` runs truncated additive trajectories under the configured shift and
/// writes the final points and gaps.
pub fn cmd_evolve(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    cfg.validate()?;
    let mut record = ResultRecord::new("evolve", cfg);
    if cfg.kind == "pp" {
        let seed = cfg.seed()?;
        let k = cfg.topk;
        let law = cfg.increment_law()?;
        let policy = cfg.shift_policy()?;
        let finals: Vec<(Vec<f64>, f64)> = (0..cfg.replicas as u64)
            .into_par_iter()
            .map(|r| {
                let start = sample_pp_exponential(cfg.rho, cfg.trunc_n, &mut stream_rng(seed, Purpose::Before, r))?;
                let t = run_trajectory(start, &law, cfg.tau, policy, &mut stream_rng(seed, Purpose::Evolution, r))?;
                let offset = *t.offsets.last().expect("at least one snapshot");
                Ok((t.last().points()[..=k].to_vec(), offset))
            })
            .collect::<Result<_>>()?;
        let points = SampleMatrix::new(finals.iter().map(|(p, _)| p[..k].to_vec()).collect())?;
        let gaps = SampleMatrix::new(finals.iter().map(|(p, _)| p.windows(2).map(|w| w[0] - w[1]).collect()).collect())?;
        write_text(&cfg.out.join("evolved_points.csv"), &matrix_csv("x", &points))?;
        write_text(&cfg.out.join("evolved_gaps.csv"), &matrix_csv("gap", &gaps))?;
        column_stats(&mut record, "x", &points);
        column_stats(&mut record, "gap", &gaps);
        let mean_offset = finals.iter().map(|f| f.1).sum::<f64>() / finals.len() as f64;
        record.stat("mean_total_shift", mean_offset);
    } else {
        let (m, coords) = after_ensemble(cfg)?;
        write_text(&cfg.out.join("evolved.csv"), &matrix_csv(coords.prefix(), &m))?;
        column_stats(&mut record, coords.prefix(), &m);
    }
    record.write(&cfg.out)?;
    Ok(record)
}

pub fn cmd_test_invariance(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let outcome = invariance_experiment(cfg)?;
    let report = &outcome.report;
    let prefix = outcome.coordinates.prefix();
    let mut record = ResultRecord::new("test-invariance", cfg);
    let mut rows = Vec::new();
    for (j, ks) in report.per_coordinate_ks.iter().enumerate() {
        let name = format!("ks_{prefix}_{}", j + 1);
        record.stat(name.clone(), ks.statistic);
        record.p(name.clone(), ks.p_value);
        rows.push((name, ks.statistic, ks.p_value));
    }
    record.stat("energy", report.energy.statistic);
    record.p("energy", report.energy.p_value);
    record.stat("min_ks_p", report.min_ks_p());
    record.stat("n_before", report.n_before as f64);
    record.stat("n_after", report.n_after as f64);
    rows.push(("energy".into(), report.energy.statistic, report.energy.p_value));
    record.verdict = Some(report.verdict.as_str().to_string());
    record.flag("invariance_consistent", report.verdict == Verdict::Consistent);
    if outcome.coordinates == Coordinates::Gaps {
        let threshold = cfg.level / outcome.marginals.len() as f64;
        for (j, ks) in outcome.marginals.iter().enumerate() {
            let name = format!("ks_exp_{prefix}_{}", j + 1);
            record.p(name.clone(), ks.p_value);
            record.flag(name.clone(), ks.p_value >= threshold);
            rows.push((name, ks.statistic, ks.p_value));
        }
    }
    write_text(&cfg.out.join("before.csv"), &matrix_csv(prefix, &outcome.before))?;
    write_text(&cfg.out.join("after.csv"), &matrix_csv(prefix, &outcome.after))?;
    write_text(&cfg.out.join("pvalues.csv"), &pvalues_csv(&rows))?;
    record.write(&cfg.out)?;
    Ok(record)
}

pub fn cmd_verify_lemma(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let o = lemma_experiment(cfg)?;
    let mut record = ResultRecord::new("verify-lemma", cfg);
    record.stat("front_ceiling", o.ceiling);
    record.stat("markov_violations", o.markov_violations as f64);
    record.stat("min_markov_margin", o.min_markov_margin);
    record.stat("ceiling_violations", o.ceiling_violations as f64);
    record.stat("max_front_excess", o.max_front_excess);
    record.stat("jump_events", o.jump.events as f64);
    record.stat("jump_empirical", o.jump.empirical);
    record.stat("jump_bound", o.jump.bound);
    record.stat("jump_std_error", o.jump.std_error);
    record.flag("markov_bound", o.markov_violations == 0);
    record.flag("front_ceiling", o.ceiling_violations == 0);
    record.flag("jump_bound", o.jump.pass);
    let mut csv = String::from("replica,min_markov_margin,front,jump\n");
    for (r, row) in o.rows.iter().enumerate() {
        writeln!(csv, "{r},{},{},{}", fmt_f64(row.min_markov_margin), fmt_f64(row.front), u8::from(row.jump))
            .expect("string write");
    }
    write_text(&cfg.out.join("lemma.csv"), &csv)?;
    record.write(&cfg.out)?;
    Ok(record)
}

pub fn cmd_gen_functional(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let o = gen_functional_experiment(cfg)?;
    let mut record = ResultRecord::new("gen-functional", cfg);
    record.stat("mc_mean", o.mc.mean);
    record.stat("mc_std_error", o.mc.std_error);
    record.stat("closed_form", o.closed_form);
    record.stat("relative_deviation", o.rel_dev);
    record.flag("within_3se", o.within_3se);
    record.flag("relative_deviation", o.rel_dev < cfg.max_rel_dev);
    record.write(&cfg.out)?;
    Ok(record)
}

pub fn cmd_compare_oracles(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let o = compare_oracles_experiment(cfg)?;
    let mut record = ResultRecord::new("compare-oracles", cfg);
    let mut rows = Vec::new();
    for c in &o.comparisons {
        let r = &c.report;
        for (j, ks) in r.per_coordinate_ks.iter().enumerate() {
            let name = format!("{}_ks_xi_{}", c.name, j + 1);
            record.p(name.clone(), ks.p_value);
            rows.push((name, ks.statistic, ks.p_value));
        }
        let name = format!("{}_energy", c.name);
        record.stat(name.clone(), r.energy.statistic);
        record.p(name.clone(), r.energy.p_value);
        rows.push((name, r.energy.statistic, r.energy.p_value));
        let want = if o.expect_rejection { Verdict::Rejected } else { Verdict::Consistent };
        record.flag(format!("{}_{}", c.name, want.as_str()), r.verdict == want);
    }
    for m in &o.second_moments {
        record.stat(format!("{}_sum_squares_mean", m.name), m.estimate.mean);
        record.stat(format!("{}_sum_squares_se", m.name), m.estimate.std_error);
        record.flag(format!("{}_sum_squares_within_3se", m.name), m.within_3se);
    }
    record.verdict = Some(if o.pass() { "pass" } else { "fail" }.to_string());
    write_text(&cfg.out.join("pvalues.csv"), &pvalues_csv(&rows))?;
    record.write(&cfg.out)?;
    Ok(record)
}
