//! Ensembles and the experiments behind each subcommand.
//!
//! Replica `r` of every ensemble draws from its own stream, keyed by the
//! master seed, a purpose and `r`, so outputs do not depend on the number of
//! worker threads and ensembles of different sizes share their prefixes.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use quasistat::analysis::{
    front_ceiling, front_position, front_profile, gap_vector, gen_functional_pp_exponential,
    gen_functional_term_with, jump_event_occurred, jump_event_report, markov_bound_check, sum_squares,
    JumpEventReport, McEstimate, TestFunction,
};
use quasistat::dynamics::{
    evolve_multiplicative, run_trajectory, sample_evolved_pp_exponential, shift_tail, IncrementLaw, ShiftPolicy,
};
use quasistat::pointproc::{
    config_from_mass_partition, geometric_partition, mass_partition_from_config, sample_pd_poisson_kingman,
    sample_pd_stickbreaking, sample_pp_exponential, sample_pp_exponential_with_beta, MassPartition,
    PointConfiguration,
};
use quasistat::rng::{stream_rng, Purpose};
use quasistat::stattest::{invariance_verdict, marginal_law_test, InvarianceReport, KsResult, SampleMatrix, Verdict};
use rand::Rng;
use rayon::prelude::*;

use crate::config::ExperimentConfig;

/// Column prefix of a sample matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinates {
    Masses,
    Gaps,
}

impl Coordinates {
    pub fn prefix(self) -> &'static str {
        match self {
            Coordinates::Masses => "xi",
            Coordinates::Gaps => "gap",
        }
    }
}

fn par_rows<F>(n: usize, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync + Send,
{
    (0..n as u64).into_par_iter().map(f).collect()
}

fn matrix(rows: Vec<Vec<f64>>) -> Result<SampleMatrix> {
    Ok(SampleMatrix::new(rows)?)
}

/// PD(α, 0) partition from the sampler named in the config.
pub fn pd_partition<R: Rng + ?Sized>(cfg: &ExperimentConfig, alpha: f64, rng: &mut R) -> Result<MassPartition> {
    Ok(match cfg.sampler.as_str() {
        "pk" => sample_pd_poisson_kingman(alpha, cfg.trunc_n, rng)?,
        "sb" => sample_pd_stickbreaking(alpha, cfg.topk, rng)?,
        "pp" => mass_partition_from_config(&sample_pp_exponential(alpha, cfg.trunc_n, rng)?)?,
        other => bail!("unknown sampler {other:?}"),
    })
}

/// Rows of a custom partition file: comma-separated masses, one partition
/// per line; lines that do not parse (such as a header) are skipped.
pub fn read_partitions(path: &Path) -> Result<Vec<MassPartition>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let Ok(mut masses) = parsed else { continue };
        ensure!(
            masses.iter().all(|m| m.is_finite() && *m >= 0.0),
            "{}:{}: masses must be finite and nonnegative",
            path.display(),
            lineno + 1
        );
        masses.retain(|&m| m > 0.0);
        masses.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = masses.iter().sum();
        ensure!(
            total > 0.0 && total <= 1.0 + 1e-9,
            "{}:{}: masses sum to {total}, expected (0, 1]",
            path.display(),
            lineno + 1
        );
        let tail = (1.0 - total).max(0.0);
        let scale = total + tail;
        let masses: Vec<f64> = masses.into_iter().map(|m| m / scale).collect();
        out.push(MassPartition::new(masses, tail / scale)?);
    }
    ensure!(!out.is_empty(), "{}: no partitions found", path.display());
    Ok(out)
}

/// Start partition of replica `r` of the `purpose` ensemble.
fn start_partition(
    cfg: &ExperimentConfig,
    seed: u64,
    purpose: Purpose,
    r: u64,
    custom: &[MassPartition],
) -> Result<MassPartition> {
    let mut rng = stream_rng(seed, purpose, r);
    match cfg.kind.as_str() {
        "pd" => pd_partition(cfg, cfg.alpha, &mut rng),
        "geometric" => Ok(geometric_partition(cfg.trunc_n)?),
        "mixture" => {
            let total: f64 = cfg.mixture_weights.iter().sum();
            let mut pick = stream_rng(seed, Purpose::Mixture, 2 * r + u64::from(purpose == Purpose::After))
                .random::<f64>()
                * total;
            let mut alpha = *cfg.mixture_alphas.last().expect("validated non-empty");
            for (&a, &w) in cfg.mixture_alphas.iter().zip(&cfg.mixture_weights) {
                if pick < w {
                    alpha = a;
                    break;
                }
                pick -= w;
            }
            pd_partition(cfg, alpha, &mut rng)
        }
        "custom" => {
            // Even rows form the reference ensemble, odd rows get evolved.
            let i = 2 * r as usize + usize::from(purpose == Purpose::After);
            Ok(custom[i].clone())
        }
        other => bail!("kind {other:?} has no mass partitions"),
    }
}

fn custom_rows(cfg: &ExperimentConfig) -> Result<(Vec<MassPartition>, usize)> {
    if cfg.kind != "custom" {
        return Ok((Vec::new(), cfg.replicas));
    }
    let path = cfg.custom_path.as_ref().context("kind = custom needs custom_path")?;
    let rows = read_partitions(path)?;
    let n = cfg.replicas.min(rows.len() / 2);
    ensure!(n >= 1, "{}: need at least two partitions", path.display());
    Ok((rows, n))
}

/// `τ` multiplicative steps.
fn evolve_partition(
    cfg: &ExperimentConfig,
    law: &IncrementLaw,
    start: MassPartition,
    seed: u64,
    r: u64,
) -> Result<MassPartition> {
    let mut rng = stream_rng(seed, Purpose::Evolution, r);
    let mut p = start;
    for _ in 0..cfg.tau {
        p = evolve_multiplicative(&p, law, cfg.beta, &mut rng)?;
    }
    Ok(p)
}

/// Top-k rows of the reference ("before") ensemble.
pub fn before_ensemble(cfg: &ExperimentConfig) -> Result<(SampleMatrix, Coordinates)> {
    let seed = cfg.seed()?;
    let k = cfg.topk;
    if cfg.kind == "pp" {
        let rows = par_rows(cfg.replicas, |r| {
            let c = sample_pp_exponential(cfg.rho, k + 1, &mut stream_rng(seed, Purpose::Before, r))?;
            Ok(gap_vector(&c, k)?)
        })?;
        return Ok((matrix(rows)?, Coordinates::Gaps));
    }
    let (custom, n) = custom_rows(cfg)?;
    let rows = par_rows(n, |r| Ok(start_partition(cfg, seed, Purpose::Before, r, &custom)?.top(k)))?;
    Ok((matrix(rows)?, Coordinates::Masses))
}

/// Top-k rows of an independent ensemble after `τ` evolution steps.
///
/// Partitions are reshuffled. For `pp`, the gaps are those of the top of the
/// evolved full process, sampled without fixed truncation.
pub fn after_ensemble(cfg: &ExperimentConfig) -> Result<(SampleMatrix, Coordinates)> {
    let seed = cfg.seed()?;
    let k = cfg.topk;
    let law = cfg.increment_law()?;
    if cfg.kind == "pp" {
        let rows = par_rows(cfg.replicas, |r| {
            let mut rng = stream_rng(seed, Purpose::After, r);
            let front = sample_evolved_pp_exponential(cfg.rho, &law, cfg.tau, k + 1, cfg.miss_tolerance, &mut rng)?;
            Ok(gap_vector(&front.config, k)?)
        })?;
        return Ok((matrix(rows)?, Coordinates::Gaps));
    }
    let (custom, n) = custom_rows(cfg)?;
    let rows = par_rows(n, |r| {
        let start = start_partition(cfg, seed, Purpose::After, r, &custom)?;
        Ok(evolve_partition(cfg, &law, start, seed, r)?.top(k))
    })?;
    Ok((matrix(rows)?, Coordinates::Masses))
}

pub struct InvarianceOutcome {
    pub before: SampleMatrix,
    pub after: SampleMatrix,
    pub coordinates: Coordinates,
    pub report: InvarianceReport,
    /// For gaps: one-sample KS of `gap_i` after evolution against Exp(iρ).
    pub marginals: Vec<KsResult>,
}

pub fn invariance_experiment(cfg: &ExperimentConfig) -> Result<InvarianceOutcome> {
    cfg.validate()?;
    let (before, coordinates) = before_ensemble(cfg)?;
    let (after, _) = after_ensemble(cfg)?;
    let mut rng = stream_rng(cfg.seed()?, Purpose::Permutation, 0);
    let report = invariance_verdict(&before, &after, cfg.level, cfg.n_perm, &mut rng)?;
    let marginals = if coordinates == Coordinates::Gaps {
        (0..after.ncols())
            .map(|j| {
                let rate = (j + 1) as f64 * cfg.rho;
                marginal_law_test(&after.column(j), move |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() })
            })
            .collect::<std::result::Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    Ok(InvarianceOutcome {
        before,
        after,
        coordinates,
        report,
        marginals,
    })
}

/// Tail-normalized start for the lemma checks: `X_i = ln ξ_i / β` for a
/// PD(α, 0) partition, or a tail-shifted PP(ρ) sample when `β > ρ`.
pub fn normalized_start(cfg: &ExperimentConfig, seed: u64, r: u64) -> Result<PointConfiguration> {
    let mut rng = stream_rng(seed, Purpose::Before, r);
    match cfg.kind.as_str() {
        "pd" => {
            let p = pd_partition(cfg, cfg.alpha, &mut rng)?;
            let c = config_from_mass_partition(&p)?;
            let points = c.points().iter().map(|x| x / cfg.beta).collect();
            Ok(PointConfiguration::new(points, cfg.beta, c.tail_weight_estimate())?)
        }
        "pp" => {
            ensure!(
                cfg.beta > cfg.rho,
                "Σ e^(βX) diverges for PP(ρ) unless beta > rho (beta = {}, rho = {})",
                cfg.beta,
                cfg.rho
            );
            let c = sample_pp_exponential_with_beta(cfg.rho, cfg.beta, cfg.trunc_n, &mut rng)?;
            Ok(shift_tail(&c)?)
        }
        other => bail!("verify-lemma supports kind pd or pp, got {other:?}"),
    }
}

/// Per-replica lemma diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaRow {
    pub markov_violations: usize,
    pub min_markov_margin: f64,
    pub front: f64,
    pub jump: bool,
}

pub struct LemmaOutcome {
    pub ceiling: f64,
    pub grid: Vec<f64>,
    pub rows: Vec<LemmaRow>,
    pub markov_violations: usize,
    pub min_markov_margin: f64,
    pub ceiling_violations: usize,
    pub max_front_excess: f64,
    pub jump: JumpEventReport,
}

pub fn lemma_experiment(cfg: &ExperimentConfig) -> Result<LemmaOutcome> {
    cfg.validate()?;
    let seed = cfg.seed()?;
    let law = cfg.increment_law()?;
    ensure!(law.gaussian_params().is_some(), "verify-lemma needs Gaussian increments (law = gaussian or lognormal)");
    let v = law.log_mgf(cfg.beta);
    let ceiling = front_ceiling(&law, cfg.beta, cfg.tau);
    let (lo, hi) = (-5.0, ceiling.max(0.0) + 5.0);
    let m = cfg.grid_points;
    let grid: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    let c_plus_k = cfg.lemma_c + cfg.lemma_k;
    let rows: Vec<LemmaRow> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let start = normalized_start(cfg, seed, r)?;
            let profile = front_profile(&start, &law, cfg.tau)?;
            let check = markov_bound_check(&profile, &grid)?;
            let front = front_position(&profile)?;
            let trajectory =
                run_trajectory(start, &law, cfg.tau, ShiftPolicy::None, &mut stream_rng(seed, Purpose::Evolution, r))?;
            Ok(LemmaRow {
                markov_violations: check.violations,
                min_markov_margin: check.min_margin,
                front,
                jump: jump_event_occurred(&trajectory, c_plus_k),
            })
        })
        .collect::<Result<_>>()?;
    let events = rows.iter().filter(|r| r.jump).count();
    let jump = jump_event_report(events, rows.len(), cfg.tau, cfg.lemma_k, cfg.lemma_c, cfg.beta, v)?;
    Ok(LemmaOutcome {
        ceiling,
        markov_violations: rows.iter().map(|r| r.markov_violations).sum(),
        min_markov_margin: rows.iter().map(|r| r.min_markov_margin).fold(f64::INFINITY, f64::min),
        ceiling_violations: rows.iter().filter(|r| r.front > ceiling).count(),
        max_front_excess: rows.iter().map(|r| r.front - ceiling).fold(f64::NEG_INFINITY, f64::max),
        grid,
        rows,
        jump,
    })
}

pub struct GenFunctionalOutcome {
    pub mc: McEstimate,
    pub closed_form: f64,
    pub rel_dev: f64,
    pub within_3se: bool,
}

pub fn test_function(cfg: &ExperimentConfig) -> Result<TestFunction> {
    let steps = cfg.step_heights.iter().copied().zip(cfg.step_widths.iter().copied()).collect();
    Ok(TestFunction::new(steps)?)
}

/// Monte Carlo generating functional over PP(ρ) samples of `trunc_n`
/// points, against the closed form under the same leader-term convention.
pub fn gen_functional_experiment(cfg: &ExperimentConfig) -> Result<GenFunctionalOutcome> {
    cfg.validate()?;
    let seed = cfg.seed()?;
    let f = test_function(cfg)?;
    let values: Vec<f64> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let c = sample_pp_exponential(cfg.rho, cfg.trunc_n, &mut stream_rng(seed, Purpose::Before, r))?;
            Ok(gen_functional_term_with(&c, &f, cfg.leader_term)?)
        })
        .collect::<Result<_>>()?;
    let mc = McEstimate::from_values(&values)?;
    let closed_form = gen_functional_pp_exponential(cfg.rho, &f, cfg.leader_term)?;
    let diff = (mc.mean - closed_form).abs();
    Ok(GenFunctionalOutcome {
        mc,
        closed_form,
        rel_dev: diff / closed_form,
        within_3se: diff <= 3.0 * mc.std_error,
    })
}

pub struct OracleComparison {
    pub name: String,
    pub report: InvarianceReport,
}

pub struct SecondMoment {
    pub name: String,
    pub estimate: McEstimate,
    pub target: f64,
    pub within_3se: bool,
}

pub struct OracleOutcome {
    pub comparisons: Vec<OracleComparison>,
    pub second_moments: Vec<SecondMoment>,
    /// Whether this was the two-α power check, where rejection is expected.
    pub expect_rejection: bool,
}

impl OracleOutcome {
    pub fn pass(&self) -> bool {
        let want = if self.expect_rejection { Verdict::Rejected } else { Verdict::Consistent };
        self.comparisons.iter().all(|c| c.report.verdict == want) && self.second_moments.iter().all(|m| m.within_3se)
    }
}

/// Poisson–Kingman vs stick-breaking vs normalized exp-of-PP(ρ = α) at β = 1,
/// each from its own streams; or PK at `alpha` vs PK at `alpha_alt`.
pub fn compare_oracles_experiment(cfg: &ExperimentConfig) -> Result<OracleOutcome> {
    cfg.validate()?;
    let seed = cfg.seed()?;
    let k = cfg.topk;
    let n = cfg.replicas;
    let alpha = cfg.alpha;
    let verdict = |a: &SampleMatrix, b: &SampleMatrix, idx: u64| {
        invariance_verdict(a, b, cfg.level, cfg.n_perm, &mut stream_rng(seed, Purpose::Permutation, idx))
    };
    if let Some(alt) = cfg.alpha_alt {
        let draw = |a: f64, purpose: Purpose| {
            par_rows(n, |r| Ok(sample_pd_poisson_kingman(a, cfg.trunc_n, &mut stream_rng(seed, purpose, r))?.top(k)))
        };
        let a = matrix(draw(alpha, Purpose::Before)?)?;
        let b = matrix(draw(alt, Purpose::Oracle)?)?;
        return Ok(OracleOutcome {
            comparisons: vec![OracleComparison {
                name: "pk_alpha_vs_pk_alpha_alt".into(),
                report: verdict(&a, &b, 0)?,
            }],
            second_moments: Vec::new(),
            expect_rejection: true,
        });
    }
    let sampled: Vec<[MassPartition; 3]> = (0..n as u64)
        .into_par_iter()
        .map(|r| {
            let pk = sample_pd_poisson_kingman(alpha, cfg.trunc_n, &mut stream_rng(seed, Purpose::Before, r))?;
            let sb = sample_pd_stickbreaking(alpha, cfg.oracle_sticks, &mut stream_rng(seed, Purpose::Oracle, r))?;
            let pp = sample_pp_exponential(alpha, cfg.trunc_n, &mut stream_rng(seed, Purpose::After, r))?;
            Ok([pk, sb, mass_partition_from_config(&pp)?])
        })
        .collect::<Result<_>>()?;
    let names = ["pk", "sb", "pp"];
    let mut matrices = Vec::new();
    let mut second_moments = Vec::new();
    for (i, name) in names.iter().enumerate() {
        matrices.push(matrix(sampled.iter().map(|s| s[i].top(k)).collect())?);
        let squares: Vec<f64> = sampled.iter().map(|s| sum_squares(&s[i])).collect();
        let estimate = McEstimate::from_values(&squares)?;
        let target = 1.0 - alpha;
        second_moments.push(SecondMoment {
            name: name.to_string(),
            estimate,
            target,
            within_3se: (estimate.mean - target).abs() <= 3.0 * estimate.std_error,
        });
    }
    let mut comparisons = Vec::new();
    for (idx, (i, j)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        comparisons.push(OracleComparison {
            name: format!("{}_vs_{}", names[i], names[j]),
            report: verdict(&matrices[i], &matrices[j], idx as u64)?,
        });
    }
    Ok(OracleOutcome {
        comparisons,
        second_moments,
        expect_rejection: false,
    })
}
