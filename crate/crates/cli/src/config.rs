//! Flat key-value experiment configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use quasistat::dynamics::{IncrementLaw, ShiftPolicy};
use serde::{Deserialize, Serialize};

/// Environment variable consulted when no seed is given on the command line
/// or in the config file.
pub const SEED_ENV: &str = "QUASISTAT_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// pd | pp | geometric | mixture | custom
    pub kind: String,
    pub alpha: f64,
    pub rho: f64,
    pub beta: f64,
    /// gaussian | lognormal | uniform | constant
    pub law: String,
    /// Mean of `h` (gaussian) or of `ln W` (lognormal).
    pub law_mu: f64,
    /// Standard deviation of `h` (gaussian) or of `ln W` (lognormal).
    pub law_sigma: f64,
    pub law_low: f64,
    pub law_high: f64,
    pub law_value: f64,
    pub replicas: usize,
    pub trunc_n: usize,
    pub tau: usize,
    pub topk: usize,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub level: f64,
    pub n_perm: usize,
    /// leader | tail | none
    pub shift: String,
    /// pk | sb | pp, for `sample` and `evolve` with kind = pd.
    pub sampler: String,
    pub mixture_alphas: Vec<f64>,
    pub mixture_weights: Vec<f64>,
    /// Partition rows for kind = custom.
    pub custom_path: Option<PathBuf>,
    /// Expected-miss tolerance of the exact front sampler.
    pub miss_tolerance: f64,
    pub lemma_k: f64,
    pub lemma_c: f64,
    pub grid_points: usize,
    pub step_heights: Vec<f64>,
    pub step_widths: Vec<f64>,
    pub leader_term: bool,
    pub max_rel_dev: f64,
    /// Pieces kept by the stick-breaking oracle for the second-moment check.
    pub oracle_sticks: usize,
    /// When set, compare-oracles contrasts PD(alpha) with PD(alpha_alt).
    pub alpha_alt: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ln2 = std::f64::consts::LN_2;
        Self {
            kind: "pd".into(),
            alpha: 0.5,
            rho: 1.0,
            beta: 1.0,
            law: "lognormal".into(),
            law_mu: 0.0,
            law_sigma: 1.0,
            law_low: -1.0,
            law_high: 1.0,
            law_value: 0.0,
            replicas: 2000,
            trunc_n: quasistat::pointproc::DEFAULT_TRUNCATION,
            tau: 1,
            topk: 5,
            seed: None,
            out: PathBuf::from("out"),
            level: 0.01,
            n_perm: 199,
            shift: "leader".into(),
            sampler: "pk".into(),
            mixture_alphas: vec![0.3, 0.7],
            mixture_weights: vec![0.5, 0.5],
            custom_path: None,
            miss_tolerance: 1e-3,
            lemma_k: 0.5,
            lemma_c: 1.0,
            grid_points: 100,
            step_heights: vec![ln2],
            step_widths: vec![ln2],
            leader_term: false,
            max_rel_dev: 0.02,
            oracle_sticks: 50,
            alpha_alt: None,
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub replicas: Option<usize>,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub beta: Option<f64>,
    pub tau: Option<usize>,
    pub topk: Option<usize>,
    pub trunc_n: Option<usize>,
    pub level: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies flag overrides; the seed falls back to `env_seed` when neither
    /// the flags nor the file set one.
    pub fn apply(&mut self, o: &Overrides, env_seed: Option<&str>) -> anyhow::Result<()> {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = o.$f.clone() { self.$f = v; })* };
        }
        set!(out, replicas, alpha, rho, beta, tau, topk, trunc_n, level);
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if self.seed.is_none() {
            if let Some(s) = env_seed {
                let s = s.trim();
                self.seed = Some(s.parse().with_context(|| format!("{SEED_ENV}={s:?} is not a u64"))?);
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> anyhow::Result<u64> {
        self.seed
            .ok_or_else(|| anyhow::anyhow!("no seed: pass --seed, set seed in the config, or set {SEED_ENV}"))
    }

    pub fn increment_law(&self) -> anyhow::Result<IncrementLaw> {
        let law = match self.law.as_str() {
            "gaussian" => IncrementLaw::gaussian(self.law_mu, self.law_sigma),
            "lognormal" => IncrementLaw::lognormal_weight_at(self.law_mu, self.law_sigma, self.beta),
            "uniform" => IncrementLaw::uniform(self.law_low, self.law_high),
            "constant" => IncrementLaw::constant(self.law_value),
            other => bail!("unknown law {other:?} (expected gaussian, lognormal, uniform or constant)"),
        };
        Ok(law?)
    }

    pub fn shift_policy(&self) -> anyhow::Result<ShiftPolicy> {
        Ok(match self.shift.as_str() {
            "leader" => ShiftPolicy::Leader,
            "tail" => ShiftPolicy::Tail,
            "none" => ShiftPolicy::None,
            other => bail!("unknown shift {other:?} (expected leader, tail or none)"),
        })
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(
            ["pd", "pp", "geometric", "mixture", "custom"].contains(&self.kind.as_str()),
            "unknown kind {:?} (expected pd, pp, geometric, mixture or custom)",
            self.kind
        );
        ensure!(self.alpha > 0.0 && self.alpha < 1.0, "alpha must lie in (0, 1), got {}", self.alpha);
        ensure!(self.rho > 0.0 && self.rho.is_finite(), "rho must be positive, got {}", self.rho);
        ensure!(self.beta > 0.0 && self.beta.is_finite(), "beta must be positive, got {}", self.beta);
        self.increment_law()?;
        self.shift_policy()?;
        ensure!(["pk", "sb", "pp"].contains(&self.sampler.as_str()), "unknown sampler {:?}", self.sampler);
        ensure!(self.replicas >= 1, "replicas must be at least 1");
        ensure!(self.topk >= 1, "topk must be at least 1");
        ensure!(
            self.trunc_n > self.topk,
            "trunc_n ({}) must exceed topk ({})",
            self.trunc_n,
            self.topk
        );
        ensure!(self.tau <= 100_000, "tau must be at most 100000, got {}", self.tau);
        ensure!(self.level > 0.0 && self.level < 1.0, "level must lie in (0, 1), got {}", self.level);
        ensure!(self.n_perm >= quasistat::stattest::MIN_PERMUTATIONS, "n_perm must be at least 199");
        ensure!(
            self.mixture_alphas.len() == self.mixture_weights.len() && !self.mixture_alphas.is_empty(),
            "mixture_alphas and mixture_weights must be non-empty and of equal length"
        );
        ensure!(
            self.mixture_alphas.iter().all(|&a| a > 0.0 && a < 1.0),
            "mixture_alphas must lie in (0, 1)"
        );
        ensure!(
            self.mixture_weights.iter().all(|&w| w >= 0.0 && w.is_finite())
                && self.mixture_weights.iter().sum::<f64>() > 0.0,
            "mixture_weights must be nonnegative with a positive sum"
        );
        if self.kind == "custom" {
            ensure!(self.custom_path.is_some(), "kind = custom needs custom_path");
        }
        ensure!(self.miss_tolerance > 0.0, "miss_tolerance must be positive");
        ensure!(self.grid_points >= 2, "grid_points must be at least 2");
        ensure!(
            self.step_heights.len() == self.step_widths.len(),
            "step_heights and step_widths must have equal length"
        );
        ensure!(self.max_rel_dev > 0.0, "max_rel_dev must be positive");
        ensure!(self.oracle_sticks >= self.topk, "oracle_sticks must be at least topk");
        if let Some(a) = self.alpha_alt {
            ensure!(a > 0.0 && a < 1.0, "alpha_alt must lie in (0, 1), got {a}");
        }
        self.seed()?;
        Ok(())
    }
}
