//! Front profile, front position, generating functionals, moment
//! diagnostics and the almost-sure bounds for tail-normalized starts.

use crate::dynamics::{IncrementLaw, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::pointproc::{MassPartition, PointConfiguration};
use crate::special::{bisect_decreasing, normal_sf};

/// Tolerance on `F(z) = 1` and on `𝒩F(0) = 1`.
pub const FRONT_TOLERANCE: f64 = 1e-9;

/// Allowed deviation from `Σ e^{βX_i} + tail = 1` for a start to count as
/// tail-normalized.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// `v_β = ln E[e^{βh}]`.
pub fn v_beta(law: &IncrementLaw, beta: f64) -> f64 {
    law.log_mgf(beta)
}

/// `y ↦ F_{X,τ}(y) = Σ_i P(S_i(τ) + X_i >= y)` over the tracked points.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontProfile {
    config: PointConfiguration,
    tau: usize,
    law: IncrementLaw,
}

pub fn front_profile(config: &PointConfiguration, law: &IncrementLaw, tau: usize) -> Result<FrontProfile> {
    // Surfaces unsupported (law, τ) pairs once, up front.
    law.sum_tail(tau, 0.0)?;
    Ok(FrontProfile {
        config: config.clone(),
        tau,
        law: *law,
    })
}

impl FrontProfile {
    pub fn config(&self) -> &PointConfiguration {
        &self.config
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn law(&self) -> &IncrementLaw {
        &self.law
    }

    /// Expected number of points at or above `y` after `τ` steps.
    pub fn eval(&self, y: f64) -> f64 {
        let points = self.config.points();
        match self.law.gaussian_params() {
            Some((mu, sigma)) if self.tau > 0 && sigma > 0.0 => {
                let t = self.tau as f64;
                let m = t * mu;
                let s = sigma * t.sqrt();
                let mut acc = 0.0;
                for &x in points {
                    let z = (y - x - m) / s;
                    // Points are decreasing, so every later term underflows too.
                    if z > 40.0 {
                        break;
                    }
                    acc += normal_sf(z);
                }
                acc
            }
            _ => points
                .iter()
                .map(|&x| self.law.sum_tail(self.tau, y - x).expect("validated in front_profile"))
                .sum(),
        }
    }
}

/// `Z_{X,τ} = sup{y : F_{X,τ}(y) >= 1}`.
///
/// For a continuous profile this is the root of `F = 1`. With no spread
/// (`τ = 0` or a point-mass law) `F` is a step function and the supremum is the
/// evolved leader. Fails with [`Error::NoFrontCrossing`] if `F < 1`
/// everywhere, e.g. a single point under Gaussian increments.
pub fn front_position(profile: &FrontProfile) -> Result<f64> {
    let config = profile.config();
    let leader = config.leader();
    if let Some(reach) = profile.law().max_sum(profile.tau()) {
        if profile.tau() == 0 || profile.law().gaussian_params().is_some() {
            return Ok(leader + reach);
        }
    }
    if let Some((_, sigma)) = profile.law().gaussian_params() {
        if config.len() < 2 && sigma > 0.0 {
            return Err(Error::NoFrontCrossing);
        }
    }
    let f = |y: f64| profile.eval(y);
    let speed = v_beta(profile.law(), config.beta()) / config.beta() * profile.tau() as f64;
    let mut lo = leader - 10.0;
    let mut step = 10.0;
    let mut grown = 0;
    while f(lo) < 1.0 {
        step *= 2.0;
        lo = leader - step;
        grown += 1;
        if grown > 60 {
            return Err(Error::NoFrontCrossing);
        }
    }
    let mut hi = leader + speed.max(0.0) + 10.0;
    let mut step = hi - leader;
    grown = 0;
    while f(hi) >= 1.0 {
        step *= 2.0;
        hi = leader + step;
        grown += 1;
        if grown > 60 {
            return Err(Error::NonFinite("front position bracket"));
        }
    }
    let xtol = 1e-13 * (1.0 + lo.abs().max(hi.abs()));
    Ok(bisect_decreasing(f, 1.0, lo, hi, xtol))
}

/// `𝒩F(y) = F(y + Z)`, so that `𝒩F(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedProfile {
    profile: FrontProfile,
    z: f64,
}

impl NormalizedProfile {
    pub fn eval(&self, y: f64) -> f64 {
        self.profile.eval(y + self.z)
    }

    pub fn front(&self) -> f64 {
        self.z
    }
}

pub fn normalized_profile(profile: &FrontProfile) -> Result<NormalizedProfile> {
    let z = front_position(profile)?;
    Ok(NormalizedProfile {
        profile: profile.clone(),
        z,
    })
}

/// Nonnegative, compactly supported step function `Σ_j a_j 1_{[0, d_j]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    steps: Vec<(f64, f64)>,
}

impl TestFunction {
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, d) in &steps {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(invalid("a", format!("step height must be finite and >= 0, got {a}")));
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(invalid("d", format!("step width must be finite and > 0, got {d}")));
            }
        }
        Ok(Self { steps })
    }

    /// `a · 1_{[0, d]}`.
    pub fn step(a: f64, d: f64) -> Result<Self> {
        Self::new(vec![(a, d)])
    }

    pub fn zero() -> Self {
        Self { steps: Vec::new() }
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u < 0.0 {
            return 0.0;
        }
        self.steps.iter().filter(|&&(_, d)| u <= d).map(|&(a, _)| a).sum()
    }

    /// Right end of the support (0 for the zero function).
    pub fn support_end(&self) -> f64 {
        self.steps.iter().filter(|s| s.0 > 0.0).map(|s| s.1).fold(0.0, f64::max)
    }

    fn is_zero(&self) -> bool {
        self.steps.iter().all(|s| s.0 == 0.0)
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("Monte Carlo values"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(Self {
            mean,
            std_error: (var / n).sqrt(),
            samples: values.len(),
        })
    }
}

/// `exp(-Σ_i f(X_1 - X_i))` for one configuration, leader term included.
pub fn gen_functional_term(config: &PointConfiguration, f: &TestFunction) -> Result<f64> {
    gen_functional_term_with(config, f, true)
}

/// As [`gen_functional_term`], optionally dropping the `i = 1` term `f(0)`.
pub fn gen_functional_term_with(config: &PointConfiguration, f: &TestFunction, include_leader_term: bool) -> Result<f64> {
    if f.is_zero() {
        return Ok(1.0);
    }
    let leader = config.leader();
    let support = f.support_end();
    let depth = leader - config.points()[config.len() - 1];
    if !(depth > support) {
        return Err(Error::TruncationTooShallow { depth, support });
    }
    let skip = usize::from(!include_leader_term);
    let mut acc = 0.0;
    for &x in &config.points()[skip..] {
        let u = leader - x;
        if u > support {
            break;
        }
        acc += f.eval(u);
    }
    Ok((-acc).exp())
}

/// `G_μ(f) = E_μ[exp(-Σ_i f(X_1 - X_i))]` estimated over `configs`.
pub fn gen_functional_mc(configs: &[PointConfiguration], f: &TestFunction) -> Result<McEstimate> {
    gen_functional_mc_with(configs, f, true)
}

pub fn gen_functional_mc_with(
    configs: &[PointConfiguration],
    f: &TestFunction,
    include_leader_term: bool,
) -> Result<McEstimate> {
    let values = configs
        .iter()
        .map(|c| gen_functional_term_with(c, f, include_leader_term))
        .collect::<Result<Vec<_>>>()?;
    McEstimate::from_values(&values)
}

/// Closed form of the gap generating functional of `PP(ρ e^{-ρy} dy)`:
/// `1 / (1 + c)` with `c = ∫_0^∞ (1 - e^{-f(u)}) ρ e^{ρu} du`, times
/// `e^{-f(0)}` when the leader's own term is included.
///
/// Conditioning on the maximum, the points below it are Poisson, which gives
/// `exp(-c e^{-ρx})` at maximum `x`; the Gumbel law of the maximum then
/// integrates this to `1 / (1 + c)`.
pub fn gen_functional_pp_exponential(rho: f64, f: &TestFunction, include_leader_term: bool) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(invalid("rho", format!("must be positive, got {rho}")));
    }
    let mut ends: Vec<f64> = f.steps().iter().filter(|s| s.0 > 0.0).map(|s| s.1).collect();
    ends.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    ends.dedup();
    let mut c = 0.0;
    let mut left = 0.0;
    for &right in &ends {
        // f is constant on (left, right].
        let height = f.eval(right);
        c += -(-height).exp_m1() * ((rho * right).exp() - (rho * left).exp());
        left = right;
    }
    let mut g = 1.0 / (1.0 + c);
    if include_leader_term {
        g *= (-f.eval(0.0)).exp();
    }
    Ok(g)
}

/// `(X_i - X_{i+1})` for `i = 1..k`.
pub fn gap_vector(config: &PointConfiguration, k: usize) -> Result<Vec<f64>> {
    if config.len() < k + 1 {
        return Err(Error::TooFewPoints {
            needed: k + 1,
            have: config.len(),
        });
    }
    Ok(config.points().windows(2).take(k).map(|w| w[0] - w[1]).collect())
}

/// `Σ ξ_i²` plus the midpoint of `[0, tail · ξ_last]`, which brackets the
/// untracked contribution.
pub fn sum_squares(partition: &MassPartition) -> f64 {
    let tracked: f64 = partition.masses().iter().map(|m| m * m).sum();
    let last = partition.masses().last().copied().unwrap_or(0.0);
    tracked + 0.5 * partition.tail_mass() * last
}

fn check_tail_normalized(config: &PointConfiguration) -> Result<()> {
    let log_z = config.log_partition()?;
    if log_z.abs() > NORMALIZATION_TOLERANCE {
        return Err(invalid(
            "config",
            format!("start is not tail-normalized (ln Σ e^(βX) = {log_z})"),
        ));
    }
    Ok(())
}

/// `e^{v_β τ - β y}` plus the truncation term `tail · e^{v_β τ - β y}`.
pub fn markov_front_bound(config: &PointConfiguration, law: &IncrementLaw, tau: usize, y: f64) -> f64 {
    let beta = config.beta();
    let base = (v_beta(law, beta) * tau as f64 - beta * y).exp();
    base * (1.0 + config.tail_weight_estimate())
}

/// Outcome of checking `F_{X,τ}(y) <= e^{v_β τ - β y}` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovCheck {
    pub grid_points: usize,
    pub violations: usize,
    /// Smallest `bound - F` over the grid.
    pub min_margin: f64,
}

/// Exact (no slack) check of the Markov bound for a tail-normalized start.
pub fn markov_bound_check(profile: &FrontProfile, grid: &[f64]) -> Result<MarkovCheck> {
    check_tail_normalized(profile.config())?;
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for &y in grid {
        let margin = markov_front_bound(profile.config(), profile.law(), profile.tau(), y) - profile.eval(y);
        if margin < 0.0 {
            violations += 1;
        }
        min_margin = min_margin.min(margin);
    }
    Ok(MarkovCheck {
        grid_points: grid.len(),
        violations,
        min_margin,
    })
}

/// `(v_β / β) τ`, the almost-sure ceiling on the front of a tail-normalized start.
pub fn front_ceiling(law: &IncrementLaw, beta: f64, tau: usize) -> f64 {
    v_beta(law, beta) / beta * tau as f64
}

/// `e^{-τ((C+K)β - v_β)}`.
pub fn jump_event_bound(tau: usize, c_plus_k: f64, beta: f64, v_beta: f64) -> f64 {
    (-(tau as f64) * (c_plus_k * beta - v_beta)).exp()
}

/// Whether some start point moved by more than `-X_i + (C+K)τ`, i.e. whether
/// some unshifted final position exceeds `(C+K)τ`.
pub fn jump_event_occurred(trajectory: &Trajectory<PointConfiguration>, c_plus_k: f64) -> bool {
    let level = c_plus_k * trajectory.tau as f64;
    trajectory.final_positions().any(|(_, y)| y > level)
}

/// Empirical frequency of the jump event against its analytic bound.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpEventReport {
    pub tau: usize,
    pub replicas: usize,
    pub events: usize,
    pub empirical: f64,
    pub bound: f64,
    /// Binomial standard error at `p = bound`.
    pub std_error: f64,
    /// `empirical <= bound + 3 std_error`.
    pub pass: bool,
}

/// Builds the report from an event count.
pub fn jump_event_report(
    events: usize,
    replicas: usize,
    tau: usize,
    k: f64,
    c: f64,
    beta: f64,
    v_beta: f64,
) -> Result<JumpEventReport> {
    if replicas == 0 {
        return Err(Error::Empty("trajectories"));
    }
    if !((c + k) * beta > v_beta) {
        return Err(invalid("K, C", format!("need (C+K)β > v_β, got ({} )·{beta} <= {v_beta}", c + k)));
    }
    let bound = jump_event_bound(tau, c + k, beta, v_beta);
    let empirical = events as f64 / replicas as f64;
    let std_error = (bound * (1.0 - bound) / replicas as f64).sqrt();
    Ok(JumpEventReport {
        tau,
        replicas,
        events,
        empirical,
        bound,
        std_error,
        pass: empirical <= bound + 3.0 * std_error,
    })
}

/// Counts the jump event over tail-normalized trajectories sharing one horizon.
pub fn jump_event_bound_check<'a, I>(trajectories: I, k: f64, c: f64, beta: f64, v_beta: f64) -> Result<JumpEventReport>
where
    I: IntoIterator<Item = &'a Trajectory<PointConfiguration>>,
{
    let mut tau = None;
    let mut replicas = 0;
    let mut events = 0;
    for t in trajectories {
        match tau {
            None => tau = Some(t.tau),
            Some(h) if h != t.tau => return Err(invalid("trajectories", "horizons differ")),
            _ => {}
        }
        check_tail_normalized(t.start())?;
        replicas += 1;
        if jump_event_occurred(t, c + k) {
            events += 1;
        }
    }
    jump_event_report(events, replicas, tau.unwrap_or(0), k, c, beta, v_beta)
}

/// Log-linear least squares fit `ln v ≈ intercept - rate · y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn exponential_shape_fit(ys: &[f64], values: &[f64]) -> Result<ExponentialFit> {
    if ys.len() != values.len() {
        return Err(invalid("values", "length differs from grid"));
    }
    if ys.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, have: ys.len() });
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(invalid("values", "must be positive for a log-linear fit"));
    }
    let n = ys.len() as f64;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = ys.iter().sum::<f64>() / n;
    let my = logs.iter().sum::<f64>() / n;
    let sxx: f64 = ys.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = ys.iter().zip(&logs).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = logs.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(ExponentialFit {
        rate: -slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{run_trajectory, shift_tail, ShiftPolicy};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian() -> IncrementLaw {
        IncrementLaw::gaussian(0.0, 1.0).unwrap()
    }

    #[test]
    fn zero_horizon_profile_counts_points() {
        let c = PointConfiguration::new(vec![2.0, 1.0, 1.0, -1.0], 1.0, 0.0).unwrap();
        let p = front_profile(&c, &gaussian(), 0).unwrap();
        assert_eq!(p.eval(1.5), 1.0);
        assert_eq!(p.eval(1.0), 3.0);
        assert_eq!(p.eval(-5.0), 4.0);
        assert_eq!(p.eval(2.1), 0.0);
        assert_eq!(front_position(&p).unwrap(), 2.0);
    }

    #[test]
    fn single_point_profile_is_gaussian_tail() {
        let c = PointConfiguration::new(vec![0.0], 1.0, 0.0).unwrap();
        let p = front_profile(&c, &gaussian(), 1).unwrap();
        for y in [-2.0, 0.0, 0.7, 3.0] {
            assert_abs_diff_eq!(p.eval(y), 0.5 * libm::erfc(y / 2f64.sqrt()), epsilon = 1e-15);
        }
        assert_eq!(front_position(&p), Err(Error::NoFrontCrossing));
    }

    #[test]
    fn front_root_and_normalization() {
        let c = PointConfiguration::new(vec![0.5, 0.0, -0.3, -2.0], 1.0, 0.0).unwrap();
        for tau in [1, 3, 10] {
            let p = front_profile(&c, &gaussian(), tau).unwrap();
            let z = front_position(&p).unwrap();
            assert!((p.eval(z) - 1.0).abs() <= FRONT_TOLERANCE);
            let n = normalized_profile(&p).unwrap();
            assert!((n.eval(0.0) - 1.0).abs() <= FRONT_TOLERANCE);
        }
    }

    #[test]
    fn normalized_profile_is_translation_invariant() {
        let c = PointConfiguration::new(vec![0.5, 0.0, -0.3, -2.0], 1.0, 0.0).unwrap();
        let moved = PointConfiguration::new(c.points().iter().map(|x| x + 4.25).collect(), 1.0, 0.0).unwrap();
        let a = normalized_profile(&front_profile(&c, &gaussian(), 2).unwrap()).unwrap();
        let b = normalized_profile(&front_profile(&moved, &gaussian(), 2).unwrap()).unwrap();
        for y in [-3.0, -1.0, 0.0, 0.5, 2.0] {
            assert_abs_diff_eq!(a.eval(y), b.eval(y), epsilon = 1e-9);
        }
    }

    #[test]
    fn uniform_profile_supported_for_short_horizons() {
        let c = PointConfiguration::new(vec![0.0, -0.5], 1.0, 0.0).unwrap();
        let u = IncrementLaw::uniform(-1.0, 1.0).unwrap();
        let p = front_profile(&c, &u, 2).unwrap();
        let z = front_position(&p).unwrap();
        assert!((p.eval(z) - 1.0).abs() <= FRONT_TOLERANCE);
        assert!(matches!(front_profile(&c, &u, 50), Err(Error::UnsupportedLaw(_))));
    }

    #[test]
    fn markov_bound_and_ceiling_on_normalized_start() {
        let raw = PointConfiguration::new(vec![1.0, 0.2, 0.1, -0.5, -3.0], 1.0, 0.0).unwrap();
        let c = shift_tail(&raw).unwrap();
        for tau in [0, 1, 5, 10] {
            let p = front_profile(&c, &gaussian(), tau).unwrap();
            let grid: Vec<f64> = (0..100).map(|i| -5.0 + 0.15 * i as f64).collect();
            let check = markov_bound_check(&p, &grid).unwrap();
            assert_eq!(check.violations, 0);
            let z = front_position(&p).unwrap();
            assert!(z <= front_ceiling(&gaussian(), 1.0, tau));
        }
        // Without normalization the check refuses to run.
        let p = front_profile(&raw, &gaussian(), 1).unwrap();
        assert!(markov_bound_check(&p, &[0.0]).is_err());
    }

    #[test]
    fn test_function_and_closed_form() {
        let f = TestFunction::step(2f64.ln(), 2f64.ln()).unwrap();
        let g = gen_functional_pp_exponential(1.0, &f, false).unwrap();
        assert_abs_diff_eq!(g, 2.0 / 3.0, epsilon = 1e-15);
        let with_leader = gen_functional_pp_exponential(1.0, &f, true).unwrap();
        assert_abs_diff_eq!(with_leader, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(gen_functional_pp_exponential(1.3, &TestFunction::zero(), true).unwrap(), 1.0);
        let flat = TestFunction::step(0.0, 5.0).unwrap();
        assert_eq!(gen_functional_pp_exponential(1.0, &flat, true).unwrap(), 1.0);
        assert!(TestFunction::step(-1.0, 1.0).is_err());
        assert!(TestFunction::step(1.0, 0.0).is_err());
    }

    #[test]
    fn closed_form_matches_quadrature_for_step_sums() {
        // c = ∫_0^∞ (1 - e^{-f(u)}) ρ e^{ρu} du by the midpoint rule.
        let f = TestFunction::new(vec![(0.4, 0.3), (1.1, 0.9), (0.2, 0.6)]).unwrap();
        let rho = 0.8;
        let n = 2_000_000;
        let h = 1.0 / n as f64;
        let c: f64 = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) * h;
                (1.0 - (-f.eval(u)).exp()) * rho * (rho * u).exp()
            })
            .sum::<f64>()
            * h;
        let g = gen_functional_pp_exponential(rho, &f, false).unwrap();
        assert_abs_diff_eq!(g, 1.0 / (1.0 + c), epsilon = 1e-6);
    }

    #[test]
    fn mc_functional_edge_cases() {
        let c = PointConfiguration::new(vec![0.0, -0.5, -3.0], 1.0, 0.0).unwrap();
        let est = gen_functional_mc(std::slice::from_ref(&c), &TestFunction::zero()).unwrap();
        assert_eq!(est.mean, 1.0);
        let huge = TestFunction::step(1e6, 1.0).unwrap();
        assert_eq!(gen_functional_mc(std::slice::from_ref(&c), &huge).unwrap().mean, 0.0);
        let wide = TestFunction::step(1.0, 4.0).unwrap();
        assert!(matches!(
            gen_functional_mc(std::slice::from_ref(&c), &wide),
            Err(Error::TruncationTooShallow { .. })
        ));
    }

    #[test]
    fn gaps_and_sum_squares() {
        let c = PointConfiguration::new(vec![3.0, 1.0, 0.0], 1.0, 0.0).unwrap();
        assert_eq!(gap_vector(&c, 2).unwrap(), vec![2.0, 1.0]);
        assert!(gap_vector(&c, 3).is_err());
        let e = PointConfiguration::new(vec![1.0, 1.0, 1.0], 1.0, 0.0).unwrap();
        assert_eq!(gap_vector(&e, 2).unwrap(), vec![0.0, 0.0]);
        assert_eq!(sum_squares(&MassPartition::new(vec![1.0], 0.0).unwrap()), 1.0);
        assert_eq!(sum_squares(&MassPartition::new(vec![0.5, 0.5], 0.0).unwrap()), 0.5);
    }

    #[test]
    fn jump_event_edge_cases() {
        let start = shift_tail(&PointConfiguration::new(vec![0.0, -1.0, -2.0], 1.0, 0.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t0 = run_trajectory(start.clone(), &gaussian(), 0, ShiftPolicy::None, &mut rng).unwrap();
        let r = jump_event_bound_check([&t0], 0.5, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(r.events, 0);
        assert!(r.pass);
        let t = run_trajectory(start, &gaussian(), 10, ShiftPolicy::None, &mut rng).unwrap();
        let r = jump_event_bound_check([&t], 1e6, 0.0, 1.0, 0.5).unwrap();
        assert_eq!(r.empirical, 0.0);
        assert!(r.pass);
        assert!(jump_event_bound_check([&t], 0.0, 0.2, 1.0, 0.5).is_err());
        assert_abs_diff_eq!(jump_event_bound(10, 1.5, 1.0, 0.5), (-10f64).exp(), epsilon = 1e-18);
    }

    #[test]
    fn exponential_fit_recovers_rate() {
        let ys: Vec<f64> = (0..20).map(|i| i as f64 * 0.2).collect();
        let vs: Vec<f64> = ys.iter().map(|y| 3.0 * (-1.7 * y).exp()).collect();
        let fit = exponential_shape_fit(&ys, &vs).unwrap();
        assert_abs_diff_eq!(fit.rate, 1.7, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }
}
