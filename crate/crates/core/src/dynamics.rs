//! Evolution maps, normalization shifts and the multi-step driver.
//!
//! The additive map moves every point by an independent increment `h_i` and
//! re-sorts. The multiplicative map sends `ξ_i` to `ξ_i W_i / Σ_j ξ_j W_j`
//! with `W_i = e^{β h_i}` and re-sorts. Both consume one increment per tracked
//! entry, in index order, so the two maps can be driven by the same stream.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::pointproc::{expected_power_tail, MassPartition, PointConfiguration};
use crate::special::{irwin_hall_cdf, normal_sf, IRWIN_HALL_MAX_TERMS};

/// Law of the i.i.d. increments `h`. Every kind has finite exponential
/// moments of all orders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IncrementLaw {
    /// `h ~ Normal(mu, sigma^2)`.
    Gaussian { mu: f64, sigma: f64 },
    /// `h` such that `W = e^{beta h}` is `LogNormal(mu, sigma^2)`, i.e.
    /// `h ~ Normal(mu / beta, (sigma / beta)^2)`.
    LogNormalWeight { mu: f64, sigma: f64, beta: f64 },
    /// `h ~ Uniform(a, b)`.
    Uniform { a: f64, b: f64 },
    /// Point mass at `c`. Has no density; used for degenerate checks.
    Constant { c: f64 },
}

impl IncrementLaw {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(invalid("mu", "must be finite"));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid("sigma", format!("must be positive, got {sigma}")));
        }
        Ok(Self::Gaussian { mu, sigma })
    }

    /// `W = e^{h}` lognormal with log-mean `mu` and log-sd `sigma`.
    pub fn lognormal_weight(mu: f64, sigma: f64) -> Result<Self> {
        Self::lognormal_weight_at(mu, sigma, 1.0)
    }

    pub fn lognormal_weight_at(mu: f64, sigma: f64, beta: f64) -> Result<Self> {
        Self::gaussian(mu, sigma)?;
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(invalid("beta", format!("must be positive, got {beta}")));
        }
        Ok(Self::LogNormalWeight { mu, sigma, beta })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(invalid("a, b", format!("need finite a < b, got ({a}, {b})")));
        }
        Ok(Self::Uniform { a, b })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(invalid("c", "must be finite"));
        }
        Ok(Self::Constant { c })
    }

    /// Mean and standard deviation of `h` when `h` is Gaussian (or a point mass).
    pub fn gaussian_params(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Gaussian { mu, sigma } => Some((mu, sigma)),
            Self::LogNormalWeight { mu, sigma, beta } => Some((mu / beta, sigma / beta)),
            Self::Constant { c } => Some((c, 0.0)),
            Self::Uniform { .. } => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Uniform { a, b } => 0.5 * (a + b),
            _ => self.gaussian_params().expect("gaussian family").0,
        }
    }

    /// `v_β = ln E[e^{β h}]`.
    pub fn log_mgf(&self, beta: f64) -> f64 {
        if beta == 0.0 {
            return 0.0;
        }
        match *self {
            Self::Uniform { a, b } => {
                let width = beta * (b - a);
                // ln((e^{βb} - e^{βa}) / (β(b-a))) = βa + ln(expm1(βw)/(βw))
                if width > 0.0 {
                    beta * a + (width.exp_m1() / width).ln()
                } else {
                    beta * b + ((-width).exp_m1() / (-width)).ln()
                }
            }
            _ => {
                let (mu, sigma) = self.gaussian_params().expect("gaussian family");
                beta * mu + 0.5 * beta * beta * sigma * sigma
            }
        }
    }

    /// One draw of `h`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            Self::Constant { c } => c,
            _ => {
                let (mu, sigma) = self.gaussian_params().expect("gaussian family");
                let z: f64 = StandardNormal.sample(rng);
                mu + sigma * z
            }
        }
    }

    /// One draw of `S(τ) = h(1) + ... + h(τ)`. Gaussian kinds draw the sum
    /// from its exact law in one step.
    pub fn sample_sum<R: Rng + ?Sized>(&self, tau: usize, rng: &mut R) -> f64 {
        if tau == 0 {
            return 0.0;
        }
        match self.gaussian_params() {
            Some((mu, sigma)) => {
                let t = tau as f64;
                if sigma == 0.0 {
                    return t * mu;
                }
                let z: f64 = StandardNormal.sample(rng);
                t * mu + sigma * t.sqrt() * z
            }
            None => (0..tau).map(|_| self.sample(rng)).sum(),
        }
    }

    /// Largest value `S(τ)` can take, if bounded.
    pub fn max_sum(&self, tau: usize) -> Option<f64> {
        let t = tau as f64;
        match *self {
            Self::Uniform { b, .. } => Some(t * b),
            Self::Constant { c } => Some(t * c),
            _ if tau == 0 => Some(0.0),
            _ => None,
        }
    }

    /// `P(S(τ) >= t)`.
    pub fn sum_tail(&self, tau: usize, t: f64) -> Result<f64> {
        if tau == 0 {
            return Ok(if t <= 0.0 { 1.0 } else { 0.0 });
        }
        let steps = tau as f64;
        match *self {
            Self::Uniform { a, b } => {
                if tau > IRWIN_HALL_MAX_TERMS as usize {
                    return Err(Error::UnsupportedLaw(format!(
                        "uniform sum tail beyond {IRWIN_HALL_MAX_TERMS} steps (got {tau})"
                    )));
                }
                let x = (t - steps * a) / (b - a);
                Ok(1.0 - irwin_hall_cdf(tau as u32, x))
            }
            _ => {
                let (mu, sigma) = self.gaussian_params().expect("gaussian family");
                if sigma == 0.0 {
                    return Ok(if steps * mu >= t { 1.0 } else { 0.0 });
                }
                Ok(normal_sf((t - steps * mu) / (sigma * steps.sqrt())))
            }
        }
    }
}

/// Re-centering applied after each evolution step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftPolicy {
    /// `X_i ↦ X_i - X_1`.
    Leader,
    /// `X_i ↦ X_i - (1/β) ln Σ_j e^{β X_j}`.
    Tail,
    None,
}

/// Decreasing stable order of `values`; ties keep the lower original index first.
fn decreasing_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).expect("finite values"));
    order
}

/// Additive step; also returns, for each output position, the index the point
/// held before the step.
pub fn evolve_additive_tracked<R: Rng + ?Sized>(
    config: &PointConfiguration,
    law: &IncrementLaw,
    rng: &mut R,
) -> Result<(PointConfiguration, Vec<usize>)> {
    let increments: Vec<f64> = (0..config.len()).map(|_| law.sample(rng)).collect();
    apply_increments(config, &increments, law.log_mgf(config.beta()))
}

/// Moves point `i` by `increments[i]` and re-sorts; the tail weight is
/// multiplied by `e^{log_mgf}`.
pub fn apply_increments(
    config: &PointConfiguration,
    increments: &[f64],
    log_mgf: f64,
) -> Result<(PointConfiguration, Vec<usize>)> {
    if increments.len() != config.len() {
        return Err(invalid("increments", "one increment per point required"));
    }
    let moved: Vec<f64> = config.points().iter().zip(increments).map(|(x, h)| x + h).collect();
    if moved.iter().any(|y| !y.is_finite()) {
        return Err(Error::NonFinite("increment draw"));
    }
    let order = decreasing_order(&moved);
    let points = order.iter().map(|&i| moved[i]).collect();
    let tail = config.tail_weight_estimate() * log_mgf.exp();
    Ok((PointConfiguration::from_parts(points, config.beta(), tail), order))
}

/// `X_i ↦ X_i + h_i`, re-sorted. The untracked tail weight is advanced by its
/// mean factor `E[e^{βh}]`.
pub fn evolve_additive<R: Rng + ?Sized>(
    config: &PointConfiguration,
    law: &IncrementLaw,
    rng: &mut R,
) -> Result<PointConfiguration> {
    evolve_additive_tracked(config, law, rng).map(|(c, _)| c)
}

pub fn evolve_multiplicative_tracked<R: Rng + ?Sized>(
    partition: &MassPartition,
    law: &IncrementLaw,
    beta: f64,
    rng: &mut R,
) -> Result<(MassPartition, Vec<usize>)> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(invalid("beta", format!("must be positive, got {beta}")));
    }
    let log_weights: Vec<f64> = (0..partition.len()).map(|_| beta * law.sample(rng)).collect();
    apply_log_weights(partition, &log_weights, law.log_mgf(beta))
}

/// Multiplies mass `i` by `e^{log_weights[i]}` and the tail by `e^{log_mean_weight}`,
/// renormalizes and re-sorts. Works in log space throughout.
pub fn apply_log_weights(
    partition: &MassPartition,
    log_weights: &[f64],
    log_mean_weight: f64,
) -> Result<(MassPartition, Vec<usize>)> {
    if log_weights.len() != partition.len() {
        return Err(invalid("log_weights", "one weight per mass required"));
    }
    let logs: Vec<f64> = partition
        .masses()
        .iter()
        .zip(log_weights)
        .map(|(&m, &w)| m.ln() + w)
        .collect();
    if logs.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::NonFinite("multiplicative weight"));
    }
    let log_tail = if partition.tail_mass() > 0.0 {
        partition.tail_mass().ln() + log_mean_weight
    } else {
        f64::NEG_INFINITY
    };
    let top = logs.iter().copied().fold(log_tail, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::WeightsUnderflow);
    }
    let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let tail_weight = (log_tail - top).exp();
    let total: f64 = weights.iter().sum::<f64>() + tail_weight;
    let order = decreasing_order(&weights);
    let mut masses = Vec::with_capacity(order.len());
    let mut kept = Vec::with_capacity(order.len());
    for &i in &order {
        let m = weights[i] / total;
        if m > 0.0 {
            masses.push(m);
            kept.push(i);
        }
    }
    if masses.is_empty() {
        return Err(Error::WeightsUnderflow);
    }
    Ok((MassPartition::from_parts(masses, tail_weight / total), kept))
}

/// `ξ_i ↦ ξ_i W_i / (Σ_j ξ_j W_j + tail·E[W])`, `W_i = e^{β h_i}`, re-sorted.
pub fn evolve_multiplicative<R: Rng + ?Sized>(
    partition: &MassPartition,
    law: &IncrementLaw,
    beta: f64,
    rng: &mut R,
) -> Result<MassPartition> {
    evolve_multiplicative_tracked(partition, law, beta, rng).map(|(p, _)| p)
}

fn translate(config: &PointConfiguration, offset: f64) -> PointConfiguration {
    let beta = config.beta();
    let points = config.points().iter().map(|&x| x - offset).collect();
    let tail = config.tail_weight_estimate();
    let tail = if tail > 0.0 && tail.is_finite() {
        (tail.ln() - beta * offset).exp()
    } else {
        tail
    };
    PointConfiguration::from_parts(points, beta, tail)
}

/// Moves the leader to 0.
pub fn shift_leader(config: &PointConfiguration) -> PointConfiguration {
    translate(config, config.leader())
}

/// Shifts so that `Σ_i e^{β X_i} + tail = 1`.
pub fn shift_tail(config: &PointConfiguration) -> Result<PointConfiguration> {
    let offset = config.log_partition()? / config.beta();
    Ok(translate(config, offset))
}

/// Applies `policy`, returning the shifted configuration and the amount
/// subtracted from every point.
pub fn apply_shift(config: &PointConfiguration, policy: ShiftPolicy) -> Result<(PointConfiguration, f64)> {
    match policy {
        ShiftPolicy::None => Ok((config.clone(), 0.0)),
        ShiftPolicy::Leader => Ok((shift_leader(config), config.leader())),
        ShiftPolicy::Tail => {
            let offset = config.log_partition()? / config.beta();
            Ok((translate(config, offset), offset))
        }
    }
}

/// A state the trajectory driver can advance.
pub trait Evolve: Clone {
    /// β used when the caller does not choose one.
    fn default_beta(&self) -> f64;

    /// Number of tracked entries.
    fn entries(&self) -> usize;

    /// One step, plus the pre-step index of each post-step entry.
    fn evolve_step<R: Rng + ?Sized>(
        &self,
        law: &IncrementLaw,
        beta: f64,
        rng: &mut R,
    ) -> Result<(Self, Vec<usize>)>;

    /// Re-centering; returns the state and the offset subtracted.
    fn shifted(&self, policy: ShiftPolicy) -> Result<(Self, f64)>;
}

impl Evolve for PointConfiguration {
    fn default_beta(&self) -> f64 {
        self.beta()
    }

    fn entries(&self) -> usize {
        self.len()
    }

    /// The additive map uses the configuration's own β for the tail update.
    fn evolve_step<R: Rng + ?Sized>(
        &self,
        law: &IncrementLaw,
        _beta: f64,
        rng: &mut R,
    ) -> Result<(Self, Vec<usize>)> {
        evolve_additive_tracked(self, law, rng)
    }

    fn shifted(&self, policy: ShiftPolicy) -> Result<(Self, f64)> {
        apply_shift(self, policy)
    }
}

impl Evolve for MassPartition {
    fn default_beta(&self) -> f64 {
        1.0
    }

    fn entries(&self) -> usize {
        self.len()
    }

    fn evolve_step<R: Rng + ?Sized>(
        &self,
        law: &IncrementLaw,
        beta: f64,
        rng: &mut R,
    ) -> Result<(Self, Vec<usize>)> {
        evolve_multiplicative_tracked(self, law, beta, rng)
    }

    /// Mass-partitions are already normalized; every policy is the identity.
    fn shifted(&self, _policy: ShiftPolicy) -> Result<(Self, f64)> {
        Ok((self.clone(), 0.0))
    }
}

/// `τ + 1` snapshots of an evolving state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub tau: usize,
    pub snapshots: Vec<S>,
    pub shift_policy: ShiftPolicy,
    /// `origins[t][p]`: index in the start state of the entry at position `p`
    /// of snapshot `t`.
    pub origins: Vec<Vec<usize>>,
    /// Total amount subtracted by shifts up to each snapshot.
    pub offsets: Vec<f64>,
}

impl<S> Trajectory<S> {
    pub fn start(&self) -> &S {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &S {
        self.snapshots.last().expect("at least the start snapshot")
    }
}

impl Trajectory<PointConfiguration> {
    /// Unshifted final positions `X_i + S_i(τ)` paired with their start index.
    pub fn final_positions(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let offset = *self.offsets.last().expect("non-empty");
        self.last()
            .points()
            .iter()
            .zip(self.origins.last().expect("non-empty"))
            .map(move |(&y, &i)| (i, y + offset))
    }

    /// Cumulative displacement `S_i(τ)` of every start point, by start index.
    pub fn displacements(&self) -> Vec<f64> {
        let start = self.start().points();
        let mut out = vec![0.0; start.len()];
        for (i, y) in self.final_positions() {
            out[i] = y - start[i];
        }
        out
    }
}

/// Runs `tau` steps with the state's default β.
pub fn run_trajectory<S: Evolve, R: Rng + ?Sized>(
    start: S,
    law: &IncrementLaw,
    tau: usize,
    policy: ShiftPolicy,
    rng: &mut R,
) -> Result<Trajectory<S>> {
    let beta = start.default_beta();
    run_trajectory_with_beta(start, law, beta, tau, policy, rng)
}

pub fn run_trajectory_with_beta<S: Evolve, R: Rng + ?Sized>(
    start: S,
    law: &IncrementLaw,
    beta: f64,
    tau: usize,
    policy: ShiftPolicy,
    rng: &mut R,
) -> Result<Trajectory<S>> {
    let mut snapshots = Vec::with_capacity(tau + 1);
    let mut origins: Vec<Vec<usize>> = Vec::with_capacity(tau + 1);
    let mut offsets = Vec::with_capacity(tau + 1);
    let identity: Vec<usize> = (0..start.entries()).collect();
    snapshots.push(start);
    origins.push(identity);
    offsets.push(0.0);
    for _ in 0..tau {
        let current = snapshots.last().expect("non-empty");
        let (next, order) = current.evolve_step(law, beta, rng)?;
        let (next, offset) = next.shifted(policy)?;
        let prev = origins.last().expect("non-empty");
        let composed = order.iter().map(|&i| prev[i]).collect();
        let total = offsets.last().expect("non-empty") + offset;
        snapshots.push(next);
        origins.push(composed);
        offsets.push(total);
    }
    Ok(Trajectory {
        tau,
        snapshots,
        shift_policy: policy,
        origins,
        offsets,
    })
}

/// Upper bound on the expected number of points of `PP(ρ e^{-ρy} dy)` lying
/// below `depth` that sit at or above `level` after `τ` steps of `law`.
///
/// For Gaussian sums `S ~ N(m, s^2)` the exact count is
/// `e^{-ρ(T-m)} [e^{ρ²s²/2} Φ̄((T-m-x-ρs²)/s) - e^{ρ(T-m-x)} Φ̄((T-m-x)/s)]`;
/// the first term alone is returned. Bounded laws give 0 once no point below
/// `depth` can reach `level`.
pub fn expected_overtakers(rho: f64, law: &IncrementLaw, tau: usize, depth: f64, level: f64) -> f64 {
    if let Some(reach) = law.max_sum(tau) {
        if depth + reach < level {
            return 0.0;
        }
        if law.gaussian_params().is_none() || tau == 0 {
            return f64::INFINITY;
        }
    }
    let (mu, sigma) = match law.gaussian_params() {
        Some(p) => p,
        None => return f64::INFINITY,
    };
    let t = tau as f64;
    let m = t * mu;
    let s = sigma * t.sqrt();
    if s == 0.0 {
        return if depth + m < level { 0.0 } else { f64::INFINITY };
    }
    let log_pref = -rho * (level - m) + 0.5 * rho * rho * s * s;
    let z = (level - m - depth - rho * s * s) / s;
    (log_pref + normal_sf(z).ln()).exp()
}

/// Top of the PP(ρ) front after `τ` steps, sampled without fixed truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolvedFront {
    /// The `keep` largest evolved points (`beta = 1`).
    pub config: PointConfiguration,
    /// Number of start points generated before stopping.
    pub points_generated: usize,
    /// Bound on the expected number of missed points above the kept ones.
    pub miss_bound: f64,
}

/// Hard cap on start points generated by [`sample_evolved_pp_exponential`].
pub const MAX_FRONT_DEPTH: usize = 50_000_000;

/// The `keep` largest points of `{X_i + S_i(τ)}` where `X` is the full
/// Poisson process with intensity `ρ e^{-ρy} dy` and `S_i(τ)` are independent
/// `τ`-step sums of `law`.
///
/// Start points are generated in decreasing order from arrival times, each
/// moved by its own `τ`-step sum, until the expected number of not yet
/// generated points that could still land above the current `keep`-th
/// evolved point drops below `miss_tolerance`. The multiset of evolved points
/// does not depend on intermediate re-sorting, so this is `τ` applications of
/// [`evolve_additive`] restricted to the top of the front.
pub fn sample_evolved_pp_exponential<R: Rng + ?Sized>(
    rho: f64,
    law: &IncrementLaw,
    tau: usize,
    keep: usize,
    miss_tolerance: f64,
    rng: &mut R,
) -> Result<EvolvedFront> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(invalid("rho", format!("must be positive, got {rho}")));
    }
    if keep == 0 {
        return Err(invalid("keep", "must be at least 1"));
    }
    if !(miss_tolerance > 0.0) {
        return Err(invalid("miss_tolerance", "must be positive"));
    }
    // Min-heap of the `keep` largest evolved values.
    let mut heap: std::collections::BinaryHeap<std::cmp::Reverse<Key>> = Default::default();
    let mut discarded_weight = 0.0;
    let mut gamma = 0.0;
    let mut generated = 0usize;
    let mut bound = f64::INFINITY;
    while generated < MAX_FRONT_DEPTH {
        let e: f64 = Exp1.sample(rng);
        if e <= 0.0 {
            continue;
        }
        gamma += e;
        generated += 1;
        let x = -gamma.ln() / rho;
        let y = x + law.sample_sum(tau, rng);
        if heap.len() < keep {
            heap.push(std::cmp::Reverse(Key(y)));
        } else {
            let floor = heap.peek().expect("full heap").0 .0;
            if y > floor {
                heap.pop();
                heap.push(std::cmp::Reverse(Key(y)));
                discarded_weight += floor.exp();
            } else {
                discarded_weight += y.exp();
            }
        }
        if heap.len() == keep && generated % 32 == 0 {
            let floor = heap.peek().expect("full heap").0 .0;
            bound = expected_overtakers(rho, law, tau, x, floor);
            if bound < miss_tolerance {
                break;
            }
        }
    }
    if !(bound < miss_tolerance) {
        return Err(invalid(
            "miss_tolerance",
            format!("not reached after {MAX_FRONT_DEPTH} points (bound {bound})"),
        ));
    }
    let mut points: Vec<f64> = heap.into_iter().map(|r| r.0 .0).collect();
    crate::pointproc::sort_decreasing(&mut points);
    let untracked = expected_power_tail(gamma, 1.0 / rho) * (law.log_mgf(1.0) * tau as f64).exp();
    let config = PointConfiguration::new(points, 1.0, discarded_weight + untracked)?;
    Ok(EvolvedFront {
        config,
        points_generated: generated,
        miss_bound: bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct Key(f64);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.partial_cmp(&other.0).expect("finite")
    }
}
