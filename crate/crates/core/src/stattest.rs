//! Two-sample tests turning simulated ensembles into invariance verdicts.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::rng::{stream_rng, Purpose};
use crate::special::kolmogorov_sf;

/// Smallest permutation count accepted by [`energy_distance_perm_test`].
pub const MIN_PERMUTATIONS: usize = 199;

/// Smallest ensemble size accepted by [`invariance_verdict`].
pub const MIN_VERDICT_SAMPLES: usize = 500;

/// Replicas by tracked coordinates, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: Vec<f64>,
    cols: usize,
}

impl SampleMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map(Vec::len).ok_or(Error::Empty("sample matrix"))?;
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                left: cols,
                right: bad.len(),
            });
        }
        Self::from_flat(rows.into_iter().flatten().collect(), cols)
    }

    pub fn from_flat(data: Vec<f64>, cols: usize) -> Result<Self> {
        if cols == 0 {
            return Err(invalid("k", "need at least one coordinate"));
        }
        if data.is_empty() {
            return Err(Error::Empty("sample matrix"));
        }
        if data.len() % cols != 0 {
            return Err(invalid("data", format!("{} values do not fill rows of {cols}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample matrix entry"));
        }
        Ok(Self { data, cols })
    }

    pub fn nrows(&self) -> usize {
        self.data.len() / self.cols
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

/// KS statistic with its asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("KS sample"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsResult> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::Empty("KS sample"));
    }
    let a = sorted(xs)?;
    let b = sorted(ys)?;
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        // Step past every copy of the smaller value in both samples at once.
        let t = a[i].min(b[j]);
        while i < n && a[i] == t {
            i += 1;
        }
        while j < m && b[j] == t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf(ne.sqrt() * d),
    })
}

/// One-sample Kolmogorov–Smirnov test against `cdf`.
pub fn marginal_law_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::Empty("KS sample"));
    }
    let s = sorted(samples)?;
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return Err(invalid("cdf", format!("value {f} outside [0, 1]")));
        }
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf(n.sqrt() * d),
    })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Pooled distances with the pieces needed to re-split them cheaply.
struct PooledDistances {
    dist: Vec<f64>,
    row_sums: Vec<f64>,
    total: f64,
    size: usize,
}

impl PooledDistances {
    fn new(x: &SampleMatrix, y: &SampleMatrix) -> Self {
        let pooled: Vec<&[f64]> = x.rows().chain(y.rows()).collect();
        let size = pooled.len();
        let mut dist = vec![0.0; size * size];
        for i in 0..size {
            for j in (i + 1)..size {
                let d = euclidean(pooled[i], pooled[j]);
                dist[i * size + j] = d;
                dist[j * size + i] = d;
            }
        }
        let row_sums: Vec<f64> = dist.chunks_exact(size).map(|r| r.iter().sum()).collect();
        let total = row_sums.iter().sum();
        Self {
            dist,
            row_sums,
            total,
            size,
        }
    }

    /// V-statistic energy distance for the split given by `in_x`.
    fn statistic(&self, in_x: &[f64], x_rows: &[usize], n: usize) -> f64 {
        let m = self.size - n;
        let mut sxx = 0.0;
        let mut rx = 0.0;
        for &i in x_rows {
            let row = &self.dist[i * self.size..(i + 1) * self.size];
            sxx += row.iter().zip(in_x).map(|(d, w)| d * w).sum::<f64>();
            rx += self.row_sums[i];
        }
        let sxy = rx - sxx;
        let syy = self.total - 2.0 * sxy - sxx;
        let (nf, mf) = (n as f64, m as f64);
        2.0 * sxy / (nf * mf) - sxx / (nf * nf) - syy / (mf * mf)
    }
}

/// `E = 2 mean‖x−y‖ − mean‖x−x'‖ − mean‖y−y'‖`, averaging over all ordered
/// pairs including the diagonal.
pub fn energy_statistic(x: &SampleMatrix, y: &SampleMatrix) -> Result<f64> {
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            left: x.ncols(),
            right: y.ncols(),
        });
    }
    let pooled = PooledDistances::new(x, y);
    let n = x.nrows();
    let mut mask = vec![0.0; pooled.size];
    mask[..n].fill(1.0);
    let rows: Vec<usize> = (0..n).collect();
    Ok(pooled.statistic(&mask, &rows, n))
}

/// Energy statistic with its permutation p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyResult {
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
    /// Master seed of the permutation streams.
    pub seed: u64,
}

/// Permutation test on the energy distance.
///
/// Permutation `i` shuffles with its own stream under a master seed drawn
/// from `rng`, so the result does not depend on the thread count.
pub fn energy_distance_perm_test<R: RngCore + ?Sized>(
    x: &SampleMatrix,
    y: &SampleMatrix,
    n_perm: usize,
    rng: &mut R,
) -> Result<EnergyResult> {
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            left: x.ncols(),
            right: y.ncols(),
        });
    }
    if n_perm < MIN_PERMUTATIONS {
        return Err(invalid("n_perm", format!("need at least {MIN_PERMUTATIONS}, got {n_perm}")));
    }
    let seed: u64 = rng.random();
    let pooled = PooledDistances::new(x, y);
    let n = x.nrows();
    let size = pooled.size;
    let observed = {
        let mut mask = vec![0.0; size];
        mask[..n].fill(1.0);
        let rows: Vec<usize> = (0..n).collect();
        pooled.statistic(&mask, &rows, n)
    };
    let slack = 1e-12 * observed.abs().max(1.0);
    let exceed = (0..n_perm)
        .into_par_iter()
        .map(|p| {
            let mut prng = stream_rng(seed, Purpose::Permutation, p as u64);
            let mut idx: Vec<usize> = (0..size).collect();
            idx.shuffle(&mut prng);
            let x_rows = &idx[..n];
            let mut mask = vec![0.0; size];
            for &i in x_rows {
                mask[i] = 1.0;
            }
            usize::from(pooled.statistic(&mask, x_rows, n) >= observed - slack)
        })
        .sum::<usize>();
    Ok(EnergyResult {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (n_perm + 1) as f64,
        permutations: n_perm,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Rejected,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::Rejected => "rejected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub per_coordinate_ks: Vec<KsResult>,
    pub energy: EnergyResult,
    pub verdict: Verdict,
    pub level: f64,
    pub n_before: usize,
    pub n_after: usize,
    pub k: usize,
}

impl InvarianceReport {
    pub fn energy_p(&self) -> f64 {
        self.energy.p_value
    }

    pub fn min_ks_p(&self) -> f64 {
        self.per_coordinate_ks.iter().map(|r| r.p_value).fold(1.0, f64::min)
    }
}

/// Rejected iff `min KS p < level / k` or `energy p < level`.
pub fn decide(ks: &[KsResult], energy_p: f64, level: f64) -> Verdict {
    let k = ks.len().max(1) as f64;
    let min_ks = ks.iter().map(|r| r.p_value).fold(1.0, f64::min);
    if min_ks < level / k || energy_p < level {
        Verdict::Rejected
    } else {
        Verdict::Consistent
    }
}

/// Bonferroni-corrected per-coordinate KS plus one joint energy test.
pub fn invariance_verdict<R: RngCore + ?Sized>(
    before: &SampleMatrix,
    after: &SampleMatrix,
    level: f64,
    n_perm: usize,
    rng: &mut R,
) -> Result<InvarianceReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid("level", format!("must lie in (0, 1), got {level}")));
    }
    if before.ncols() != after.ncols() {
        return Err(Error::DimensionMismatch {
            left: before.ncols(),
            right: after.ncols(),
        });
    }
    for m in [before, after] {
        if m.nrows() < MIN_VERDICT_SAMPLES {
            return Err(Error::SampleTooSmall {
                needed: MIN_VERDICT_SAMPLES,
                have: m.nrows(),
            });
        }
    }
    let k = before.ncols();
    let per_coordinate_ks = (0..k)
        .map(|j| ks_two_sample(&before.column(j), &after.column(j)))
        .collect::<Result<Vec<_>>>()?;
    let energy = energy_distance_perm_test(before, after, n_perm, rng)?;
    Ok(InvarianceReport {
        verdict: decide(&per_coordinate_ks, energy.p_value, level),
        per_coordinate_ks,
        energy,
        level,
        n_before: before.nrows(),
        n_after: after.nrows(),
        k,
    })
}
