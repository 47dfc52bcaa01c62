//! Exact top-N samplers for exponential-intensity Poisson processes and
//! Poisson-Dirichlet mass-partitions, and the maps between point
//! configurations and mass-partitions.
//!
//! Infinite processes are truncated through the arrival-time representation:
//! with `Γ_1 < Γ_2 < ...` the arrival times of a unit-rate Poisson process on
//! the half-line, the `n` largest points of a Poisson process with a
//! decreasing tail intensity are images of `Γ_1..Γ_n`. Truncation therefore
//! never biases the tracked positions, only normalizing sums, which carry an
//! explicit tail estimate.

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1};

use crate::error::{invalid, Error, Result};

/// Tolerance on `Σ masses + tail_mass = 1`.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Default number of tracked atoms per sampled partition.
pub const DEFAULT_TRUNCATION: usize = 500;

/// Upper limit on sticks drawn by [`sample_pd_stickbreaking`].
pub const MAX_STICKS: usize = 10_000_000;

/// A decreasing finite truncation of a point configuration on the real line.
///
/// `tail_weight_estimate` estimates `Σ_{i>N} e^{β X_i}` over the untracked
/// points. It is `+∞` when the underlying process is not summable at `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfiguration {
    points: Vec<f64>,
    beta: f64,
    tail_weight_estimate: f64,
}

impl PointConfiguration {
    pub fn new(points: Vec<f64>, beta: f64, tail_weight_estimate: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("point configuration"));
        }
        if let Some(i) = points.iter().position(|x| !x.is_finite()) {
            return Err(invalid("points", format!("entry {i} is not finite")));
        }
        if let Some(i) = points.windows(2).position(|w| w[0] < w[1]) {
            return Err(invalid("points", format!("not non-increasing at index {i}")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(invalid("beta", format!("must be positive and finite, got {beta}")));
        }
        if !(tail_weight_estimate >= 0.0) {
            return Err(invalid(
                "tail_weight_estimate",
                format!("must be nonnegative, got {tail_weight_estimate}"),
            ));
        }
        Ok(Self {
            points,
            beta,
            tail_weight_estimate,
        })
    }

    /// Builds from unordered points; sorts decreasingly, ties kept in input order.
    pub fn from_unsorted(mut points: Vec<f64>, beta: f64, tail_weight_estimate: f64) -> Result<Self> {
        sort_decreasing(&mut points);
        Self::new(points, beta, tail_weight_estimate)
    }

    pub(crate) fn from_parts(points: Vec<f64>, beta: f64, tail_weight_estimate: f64) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0] >= w[1]));
        Self {
            points,
            beta,
            tail_weight_estimate,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn into_points(self) -> Vec<f64> {
        self.points
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tail_weight_estimate(&self) -> f64 {
        self.tail_weight_estimate
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest point `X_1`.
    pub fn leader(&self) -> f64 {
        self.points[0]
    }

    /// Same points read at another stability exponent. The tail estimate is
    /// not transferable across exponents and is reset to `tail`.
    pub fn with_beta(&self, beta: f64, tail: f64) -> Result<Self> {
        Self::new(self.points.clone(), beta, tail)
    }

    /// `ln(Σ_i e^{β X_i} + tail)`, computed with the maximum factored out.
    pub fn log_partition(&self) -> Result<f64> {
        if self.tail_weight_estimate.is_infinite() {
            return Err(Error::NotSummable { beta: self.beta });
        }
        let top = self.beta * self.points[0];
        let mut acc: f64 = self
            .points
            .iter()
            .map(|&x| (self.beta * x - top).exp())
            .sum();
        if self.tail_weight_estimate > 0.0 {
            acc += (self.tail_weight_estimate.ln() - top).exp();
        }
        Ok(top + acc.ln())
    }
}

/// Decreasingly ordered masses with the untracked remainder in `tail_mass`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassPartition {
    masses: Vec<f64>,
    tail_mass: f64,
}

impl MassPartition {
    pub fn new(masses: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::Empty("mass partition"));
        }
        if let Some(i) = masses.iter().position(|&m| !(m > 0.0 && m <= 1.0)) {
            if masses[i] == 0.0 {
                return Err(Error::ZeroMass(i));
            }
            return Err(invalid("masses", format!("entry {i} = {} outside (0, 1]", masses[i])));
        }
        if let Some(i) = masses.windows(2).position(|w| w[0] < w[1]) {
            return Err(invalid("masses", format!("not non-increasing at index {i}")));
        }
        if !(tail_mass >= 0.0) || !tail_mass.is_finite() {
            return Err(invalid("tail_mass", format!("must be finite and nonnegative, got {tail_mass}")));
        }
        let total: f64 = masses.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(invalid("masses", format!("total mass {total} differs from 1")));
        }
        Ok(Self { masses, tail_mass })
    }

    pub(crate) fn from_parts(masses: Vec<f64>, tail_mass: f64) -> Self {
        Self { masses, tail_mass }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// `Σ masses + tail_mass`.
    pub fn total(&self) -> f64 {
        self.masses.iter().sum::<f64>() + self.tail_mass
    }

    /// The first `k` masses, zero-padded if fewer are tracked.
    pub fn top(&self, k: usize) -> Vec<f64> {
        (0..k).map(|i| self.masses.get(i).copied().unwrap_or(0.0)).collect()
    }
}

/// Arrival times `Γ_1 < ... < Γ_N` of a unit-rate Poisson process.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalTimes {
    gammas: Vec<f64>,
}

impl ArrivalTimes {
    /// Cumulative sums of the given exponential variates.
    pub fn from_exponentials(draws: &[f64]) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Empty("exponential draws"));
        }
        if let Some(i) = draws.iter().position(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(invalid("draws", format!("entry {i} is not a positive finite number")));
        }
        let gammas = draws
            .iter()
            .scan(0.0, |acc, &e| {
                *acc += e;
                Some(*acc)
            })
            .collect();
        Ok(Self { gammas })
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    /// `Γ_N`.
    pub fn last(&self) -> f64 {
        *self.gammas.last().expect("non-empty by construction")
    }
}

/// Lévy intensities with an exact arrival-time sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevyMeasureSpec {
    /// `α s^{-α-1} ds` on the positive half-line, `0 < α < 1`.
    PowerLaw { alpha: f64 },
    /// `ρ e^{-ρ y} dy` on the real line, `ρ > 0`.
    ExponentialIntensity { rho: f64 },
}

impl LevyMeasureSpec {
    pub fn power_law(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self::PowerLaw { alpha })
    }

    pub fn exponential_intensity(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self::ExponentialIntensity { rho })
    }

    /// Expected number of atoms at or above `level`.
    pub fn expected_count_above(&self, level: f64) -> f64 {
        match *self {
            Self::PowerLaw { alpha } => {
                if level <= 0.0 {
                    f64::INFINITY
                } else {
                    level.powf(-alpha)
                }
            }
            Self::ExponentialIntensity { rho } => (-rho * level).exp(),
        }
    }

    /// The atom whose expected count above it equals `gamma`.
    pub fn atom_at_arrival(&self, gamma: f64) -> f64 {
        match *self {
            Self::PowerLaw { alpha } => gamma.powf(-1.0 / alpha),
            Self::ExponentialIntensity { rho } => -gamma.ln() / rho,
        }
    }

    /// Largest `arrivals.len()` atoms, decreasing.
    pub fn atoms(&self, arrivals: &ArrivalTimes) -> Vec<f64> {
        arrivals.gammas.iter().map(|&g| self.atom_at_arrival(g)).collect()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(invalid("rho", format!("must be positive and finite, got {rho}")));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    Ok(())
}

/// Stable decreasing sort; equal values keep their original order.
pub(crate) fn sort_decreasing(values: &mut [f64]) {
    values.sort_by(|a, b| b.partial_cmp(a).expect("finite values"));
}

pub fn sample_gamma_arrivals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ArrivalTimes> {
    check_n(n)?;
    let mut gammas = Vec::with_capacity(n);
    let mut acc = 0.0;
    while gammas.len() < n {
        let e: f64 = Exp1.sample(rng);
        // A zero draw is representable; skipping it keeps Γ strictly increasing.
        if e > 0.0 {
            acc += e;
            gammas.push(acc);
        }
    }
    Ok(ArrivalTimes { gammas })
}

/// Expected `Σ_{j>N} Γ_j^{-p}` given `Γ_N`, i.e. `∫_{Γ_N}^∞ t^{-p} dt`, for `p > 1`.
pub fn expected_power_tail(gamma_last: f64, p: f64) -> f64 {
    if p <= 1.0 {
        return f64::INFINITY;
    }
    gamma_last.powf(1.0 - p) / (p - 1.0)
}

/// Points `X_i = -ln(Γ_i)/ρ` at stability exponent `beta`.
pub fn pp_points_from_arrivals(rho: f64, beta: f64, arrivals: &ArrivalTimes) -> Result<PointConfiguration> {
    check_rho(rho)?;
    let spec = LevyMeasureSpec::ExponentialIntensity { rho };
    let points = spec.atoms(arrivals);
    let tail = expected_power_tail(arrivals.last(), beta / rho);
    PointConfiguration::new(points, beta, tail)
}

/// Top `n` points of the Poisson process with intensity `ρ e^{-ρy} dy`, with
/// `beta = 1`. The tail estimate is infinite when `ρ >= 1`, since the process is
/// then not summable at `beta = 1`.
pub fn sample_pp_exponential<R: Rng + ?Sized>(rho: f64, n: usize, rng: &mut R) -> Result<PointConfiguration> {
    sample_pp_exponential_with_beta(rho, 1.0, n, rng)
}

pub fn sample_pp_exponential_with_beta<R: Rng + ?Sized>(
    rho: f64,
    beta: f64,
    n: usize,
    rng: &mut R,
) -> Result<PointConfiguration> {
    check_rho(rho)?;
    let arrivals = sample_gamma_arrivals(n, rng)?;
    pp_points_from_arrivals(rho, beta, &arrivals)
}

/// The `n` largest atoms of a Poisson process with intensity `α s^{-α-1} ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawAtoms {
    pub atoms: Vec<f64>,
    /// `Γ_N` of the generating arrivals.
    pub gamma_last: f64,
}

pub fn pk_atoms_from_arrivals(alpha: f64, arrivals: &ArrivalTimes) -> Result<PowerLawAtoms> {
    let spec = LevyMeasureSpec::power_law(alpha)?;
    Ok(PowerLawAtoms {
        atoms: spec.atoms(arrivals),
        gamma_last: arrivals.last(),
    })
}

pub fn sample_pk_powerlaw<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> Result<PowerLawAtoms> {
    check_alpha(alpha)?;
    let arrivals = sample_gamma_arrivals(n, rng)?;
    pk_atoms_from_arrivals(alpha, &arrivals)
}

/// Expected total of the untracked power-law atoms given `Γ_N`:
/// `α Γ_N^{(α-1)/α} / (1-α)`.
pub fn pk_tail_correction(alpha: f64, gamma_last: f64) -> f64 {
    alpha * gamma_last.powf((alpha - 1.0) / alpha) / (1.0 - alpha)
}

/// Normalizes atoms by `S + T` where `T` is [`pk_tail_correction`].
pub fn normalize_to_mass_partition(atoms: &[f64], alpha: f64, gamma_last: f64) -> Result<MassPartition> {
    check_alpha(alpha)?;
    if !(gamma_last > 0.0) {
        return Err(invalid("gamma_last", "must be positive"));
    }
    normalize_with_tail(atoms, pk_tail_correction(alpha, gamma_last))
}

/// Normalizes decreasing positive atoms with an explicit tail total.
pub fn normalize_with_tail(atoms: &[f64], tail: f64) -> Result<MassPartition> {
    if atoms.is_empty() {
        return Err(Error::Empty("atoms"));
    }
    if !(tail >= 0.0) || !tail.is_finite() {
        return Err(invalid("tail", "must be finite and nonnegative"));
    }
    let total = atoms.iter().sum::<f64>() + tail;
    let masses: Vec<f64> = atoms.iter().map(|a| a / total).collect();
    let tail_mass = tail / total;
    MassPartition::new(masses, tail_mass)
}

/// PD(α, 0) through the Poisson-Kingman construction with `n` tracked atoms.
pub fn sample_pd_poisson_kingman<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> Result<MassPartition> {
    let atoms = sample_pk_powerlaw(alpha, n, rng)?;
    normalize_to_mass_partition(&atoms.atoms, alpha, atoms.gamma_last)
}

/// Stick products `V_i Π_{j<i}(1-V_j)`, sorted, keeping the `n` largest
/// positive ones. The tail is whatever the kept masses leave of 1.
pub fn masses_from_sticks(sticks: &[f64], n: usize) -> Result<MassPartition> {
    check_n(n)?;
    if sticks.is_empty() {
        return Err(Error::Empty("sticks"));
    }
    let mut residual = 1.0;
    let mut products = Vec::with_capacity(sticks.len());
    for &v in sticks {
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid("sticks", format!("stick {v} outside [0, 1]")));
        }
        products.push(v * residual);
        residual *= 1.0 - v;
    }
    finish_sticks(products, n)
}

fn finish_sticks(mut products: Vec<f64>, n: usize) -> Result<MassPartition> {
    sort_decreasing(&mut products);
    products.truncate(n);
    products.retain(|&m| m > 0.0);
    if products.is_empty() {
        return Err(Error::WeightsUnderflow);
    }
    let kept: f64 = products.iter().sum();
    let tail = (1.0 - kept).max(0.0);
    Ok(MassPartition::from_parts(products, tail))
}

/// PD(α, 0) through size-biased stick breaking, `V_i ~ Beta(1-α, iα)`.
///
/// Sticks are drawn until the unbroken remainder falls below the current
/// `n`-th largest piece, at which point no later stick can enter the top `n`.
/// Gives up after [`MAX_STICKS`] sticks and returns the best `n` so far.
pub fn sample_pd_stickbreaking<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> Result<MassPartition> {
    check_alpha(alpha)?;
    check_n(n)?;
    let mut residual = 1.0;
    let mut products: Vec<f64> = Vec::new();
    // Min-heap of the n largest pieces seen so far.
    let mut top: std::collections::BinaryHeap<std::cmp::Reverse<OrdF64>> = Default::default();
    for i in 1..=MAX_STICKS {
        let dist = Beta::new(1.0 - alpha, i as f64 * alpha)
            .map_err(|e| invalid("alpha", e.to_string()))?;
        let v: f64 = dist.sample(rng);
        let piece = v * residual;
        residual *= 1.0 - v;
        products.push(piece);
        if top.len() < n {
            top.push(std::cmp::Reverse(OrdF64(piece)));
        } else if piece > top.peek().expect("non-empty").0 .0 {
            top.pop();
            top.push(std::cmp::Reverse(OrdF64(piece)));
        }
        let threshold = if top.len() < n { 0.0 } else { top.peek().expect("non-empty").0 .0 };
        if residual <= threshold || residual == 0.0 {
            break;
        }
    }
    finish_sticks(products, n)
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.partial_cmp(&other.0).expect("finite")
    }
}

/// `ξ_i = e^{β X_i} / (Σ_j e^{β X_j} + tail)`, evaluated in log space.
pub fn mass_partition_from_config(config: &PointConfiguration) -> Result<MassPartition> {
    config.log_partition()?;
    let beta = config.beta();
    let leader = config.leader();
    // Work relative to the leader so large |X| does not cost precision.
    let rel: Vec<f64> = config.points().iter().map(|&x| beta * (x - leader)).collect();
    let log_tail = if config.tail_weight_estimate() > 0.0 {
        config.tail_weight_estimate().ln() - beta * leader
    } else {
        f64::NEG_INFINITY
    };
    let sum: f64 = rel.iter().map(|r| r.exp()).sum::<f64>() + log_tail.exp();
    let log_z = sum.ln();
    let masses: Vec<f64> = rel.iter().map(|&r| (r - log_z).exp()).collect();
    let tail_mass = (log_tail - log_z).exp();
    if masses[0] == 0.0 {
        return Err(Error::WeightsUnderflow);
    }
    // Points deep enough to underflow carry less than f64::MIN_POSITIVE each.
    let kept: Vec<f64> = masses.into_iter().take_while(|&m| m > 0.0).collect();
    Ok(MassPartition::from_parts(kept, tail_mass))
}

/// `X_i = ln ξ_i` at `beta = 1`; the tail mass becomes the tail weight.
pub fn config_from_mass_partition(partition: &MassPartition) -> Result<PointConfiguration> {
    if let Some(i) = partition.masses().iter().position(|&m| m <= 0.0) {
        return Err(Error::ZeroMass(i));
    }
    let points = partition.masses().iter().map(|m| m.ln()).collect();
    PointConfiguration::new(points, 1.0, partition.tail_mass())
}

/// `ξ_i = 2^{-i}` for `i = 1..n`, tail `2^{-n}`: a proper partition that is
/// not a Poisson-Dirichlet mixture.
pub fn geometric_partition(n: usize) -> Result<MassPartition> {
    check_n(n)?;
    let masses: Vec<f64> = (1..=n).map(|i| 0.5f64.powi(i as i32)).collect();
    let tail = 0.5f64.powi(n as i32);
    MassPartition::new(masses, tail)
}
