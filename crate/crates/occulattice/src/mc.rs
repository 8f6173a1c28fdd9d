//! Simulation harness: truncated-walk occupation tails, a Monte Carlo Green
//! oracle, and single-path sup statistics over shifted copies of a set.
//!
//! Determinism contract: every walk/replica draws from its own counter-mode
//! ChaCha8 stream derived from (seed, index), so results are bit-identical
//! for a given config regardless of worker count.

use crate::error::{Error, Result};
use crate::sites::SiteSet;
use crate::walk::ValidatedWalk;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const MAX_D: usize = 8;
const MAX_TRUNCATED_FRACTION: f64 = 1e-3;
pub const DEFAULT_STEP_CAP: u64 = 10_000_000;
pub const DEFAULT_SITE_CAP: usize = 1 << 26;

/// Default truncation radius for a tail run targeting survival up to `u_max`.
pub fn default_truncation_radius(u_max: u64) -> f64 {
    (1.0e3f64).max(50.0 * (u_max as f64) * (u_max as f64))
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub walk: ValidatedWalk<f64>,
    pub set: SiteSet,
    pub n_walks: u64,
    pub truncation_radius: f64,
    pub step_cap: u64,
    pub seed: u64,
    pub workers: usize,
}

impl SimConfig {
    fn check(&self) -> Result<()> {
        if self.n_walks < 1 {
            return Err(Error::InvalidConfig("n_walks must be >= 1".into()));
        }
        if self.step_cap < 1 {
            return Err(Error::InvalidConfig("step_cap must be >= 1".into()));
        }
        if self.truncation_radius <= self.set.diameter() {
            return Err(Error::InvalidConfig(
                "truncation radius must exceed the diameter of the set".into(),
            ));
        }
        Ok(())
    }
}

/// Empirical tail of the truncated occupation total.
#[derive(Clone, Debug, PartialEq)]
pub struct TailEstimate {
    /// counts[j] = number of walks with occupation total exactly j.
    pub counts: Vec<u64>,
    pub n_walks: u64,
    pub truncated: u64,
}

impl TailEstimate {
    pub fn truncated_fraction(&self) -> f64 {
        self.truncated as f64 / self.n_walks as f64
    }

    /// P_hat(J > u).
    pub fn survival_hat(&self, u: u64) -> f64 {
        let above: u64 =
            self.counts.iter().skip(u as usize + 1).sum();
        above as f64 / self.n_walks as f64
    }

    /// Binomial standard error of `survival_hat(u)`.
    pub fn stderr(&self, u: u64) -> f64 {
        let p = self.survival_hat(u);
        (p * (1.0 - p) / self.n_walks as f64).sqrt()
    }

    pub fn max_count(&self) -> u64 {
        self.counts.len().saturating_sub(1) as u64
    }
}

// ---------------------------------------------------------------------------
// stepping engine

/// Offsets flattened into fixed-width rows for branch-light stepping.
struct Stepper {
    d: usize,
    offsets: Vec<[i64; MAX_D]>,
    cumulative: Vec<f64>,
    uniform: bool,
    /// rejection threshold for byte sampling: largest multiple of k below 256
    byte_limit: u8,
}

impl Stepper {
    fn new(walk: &ValidatedWalk<f64>) -> Self {
        let d = walk.dimension();
        let offsets: Vec<[i64; MAX_D]> = walk
            .offsets()
            .iter()
            .map(|v| {
                let mut row = [0i64; MAX_D];
                row[..d].copy_from_slice(v);
                row
            })
            .collect();
        let mut cumulative = Vec::with_capacity(offsets.len());
        let mut acc = 0.0;
        for &p in walk.probabilities() {
            acc += p;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        let k = offsets.len();
        let byte_limit = if k <= 256 { (256 - 256 % k) as u8 } else { 0 };
        Stepper { d, offsets, cumulative, uniform: walk.is_uniform(), byte_limit }
    }
}

/// One walker: position, running squared norm, and a buffered rng.
struct Walker<'a> {
    stepper: &'a Stepper,
    rng: ChaCha8Rng,
    buf: [u8; 1024],
    buf_at: usize,
    pos: [i64; MAX_D],
    sqnorm: i64,
}

impl<'a> Walker<'a> {
    fn new(stepper: &'a Stepper, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Walker { stepper, rng, buf: [0; 1024], buf_at: 1024, pos: [0; MAX_D], sqnorm: 0 }
    }

    #[inline]
    fn next_byte(&mut self) -> u8 {
        if self.buf_at == self.buf.len() {
            self.rng.fill_bytes(&mut self.buf);
            self.buf_at = 0;
        }
        let b = self.buf[self.buf_at];
        self.buf_at += 1;
        b
    }

    #[inline]
    fn draw_index(&mut self) -> usize {
        let k = self.stepper.offsets.len();
        if self.stepper.uniform && self.stepper.byte_limit > 0 {
            loop {
                let b = self.next_byte();
                if b < self.stepper.byte_limit {
                    return (b as usize) % k;
                }
            }
        } else {
            let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            match self.stepper.cumulative.iter().position(|&c| u < c) {
                Some(i) => i,
                None => k - 1,
            }
        }
    }

    #[inline]
    fn step(&mut self) {
        let idx = self.draw_index();
        let v = &self.stepper.offsets[idx];
        let mut delta = 0i64;
        for a in 0..self.stepper.d {
            delta += v[a] * (2 * self.pos[a] + v[a]);
            self.pos[a] += v[a];
        }
        self.sqnorm += delta;
    }
}

/// Membership test against a small fixed set, gated by squared norm.
struct SetProbe {
    d: usize,
    rows: Vec<([i64; MAX_D], i64)>,
    max_sqnorm: i64,
}

impl SetProbe {
    fn new(set: &SiteSet) -> Self {
        let d = set.dimension();
        let rows = set
            .points()
            .iter()
            .map(|p| {
                let mut row = [0i64; MAX_D];
                row[..d].copy_from_slice(p);
                let sq: i64 = p.iter().map(|c| c * c).sum();
                (row, sq)
            })
            .collect::<Vec<_>>();
        let max_sqnorm = rows.iter().map(|r| r.1).max().unwrap_or(0);
        SetProbe { d, rows, max_sqnorm }
    }

    #[inline]
    fn contains(&self, pos: &[i64; MAX_D], sqnorm: i64) -> bool {
        if sqnorm > self.max_sqnorm {
            return false;
        }
        'rows: for (row, sq) in &self.rows {
            if *sq != sqnorm {
                continue;
            }
            for a in 0..self.d {
                if row[a] != pos[a] {
                    continue 'rows;
                }
            }
            return true;
        }
        false
    }
}

/// Visits to `probe` before first exit from the ball of radius R (or the step
/// cap). Returns (visit count, hit_cap).
fn run_walk(walker: &mut Walker, probe: &SetProbe, r2_threshold: i64, step_cap: u64) -> (u64, bool) {
    let mut visits = 0u64;
    if probe.contains(&walker.pos, walker.sqnorm) {
        visits += 1;
    }
    let mut steps = 0u64;
    while steps < step_cap {
        walker.step();
        steps += 1;
        if walker.sqnorm > r2_threshold {
            return (visits, false);
        }
        if probe.contains(&walker.pos, walker.sqnorm) {
            visits += 1;
        }
    }
    (visits, true)
}

fn with_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool")
        .install(f)
}

/// Empirical law of the truncated occupation total of `cfg.set`, walks
/// started at the origin.
pub fn simulate_occupation(cfg: &SimConfig) -> Result<TailEstimate> {
    cfg.check()?;
    let stepper = Stepper::new(&cfg.walk);
    let probe = SetProbe::new(&cfg.set);
    let r2_threshold = (cfg.truncation_radius * cfg.truncation_radius).floor() as i64;

    let est = with_pool(cfg.workers, || {
        let chunk = 4096u64;
        let n_chunks = cfg.n_walks.div_ceil(chunk);
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * chunk;
                let hi = (lo + chunk).min(cfg.n_walks);
                let mut counts: Vec<u64> = Vec::new();
                let mut truncated = 0u64;
                for w in lo..hi {
                    let mut walker = Walker::new(&stepper, cfg.seed, w);
                    let (j, capped) = run_walk(&mut walker, &probe, r2_threshold, cfg.step_cap);
                    if capped {
                        truncated += 1;
                    }
                    let j = j as usize;
                    if j >= counts.len() {
                        counts.resize(j + 1, 0);
                    }
                    counts[j] += 1;
                }
                (counts, truncated)
            })
            .reduce(
                || (Vec::new(), 0u64),
                |(mut a, ta), (b, tb)| {
                    if a.len() < b.len() {
                        a.resize(b.len(), 0);
                    }
                    for (i, v) in b.into_iter().enumerate() {
                        a[i] += v;
                    }
                    (a, ta + tb)
                },
            )
    });

    let estimate = TailEstimate { counts: est.0, n_walks: cfg.n_walks, truncated: est.1 };
    if estimate.truncated_fraction() >= MAX_TRUNCATED_FRACTION {
        return Err(Error::ExcessiveTruncation { fraction: estimate.truncated_fraction() });
    }
    Ok(estimate)
}

/// Mean and stderr of visit counts to the single site `x`: the Monte Carlo
/// side of the Green oracle pair.
pub fn visit_count_estimate(
    walk: &ValidatedWalk<f64>,
    x: &[i64],
    n_walks: u64,
    radius: f64,
    seed: u64,
    workers: usize,
) -> Result<(f64, f64, u64)> {
    let site = SiteSet::new(vec![x.to_vec()])?;
    let norm: f64 = x.iter().map(|&c| (c * c) as f64).sum::<f64>();
    if radius <= norm.sqrt() {
        return Err(Error::InvalidConfig("radius must exceed |x|".into()));
    }
    let cfg = SimConfig {
        walk: walk.clone(),
        set: site,
        n_walks,
        truncation_radius: radius,
        step_cap: DEFAULT_STEP_CAP,
        seed,
        workers,
    };
    let stepper = Stepper::new(&cfg.walk);
    let probe = SetProbe::new(&cfg.set);
    let r2_threshold = (radius * radius).floor() as i64;
    let (sum, sumsq, truncated) = with_pool(workers, || {
        let chunk = 4096u64;
        let n_chunks = n_walks.div_ceil(chunk);
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * chunk;
                let hi = (lo + chunk).min(n_walks);
                let mut sum = 0u64;
                let mut sumsq = 0u64;
                let mut truncated = 0u64;
                for w in lo..hi {
                    let mut walker = Walker::new(&stepper, seed, w);
                    let (j, capped) = run_walk(&mut walker, &probe, r2_threshold, cfg.step_cap);
                    sum += j;
                    sumsq += j * j;
                    truncated += capped as u64;
                }
                (sum, sumsq, truncated)
            })
            .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2))
    });
    let n = n_walks as f64;
    let mean = sum as f64 / n;
    let var = (sumsq as f64 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    let fraction = truncated as f64 / n;
    if fraction >= MAX_TRUNCATED_FRACTION {
        return Err(Error::ExcessiveTruncation { fraction });
    }
    Ok((mean, (var / n).sqrt(), truncated))
}

// ---------------------------------------------------------------------------
// tail slope fit

/// Weighted least-squares slope of -log survival over u, weights from the
/// binomial variance of log survival_hat. Returns (theta_hat, stderr).
pub fn estimate_tail_slope(est: &TailEstimate, u_min: u64, u_max: u64) -> Result<(f64, f64)> {
    let mut rows = Vec::new();
    for u in u_min..=u_max {
        let p = est.survival_hat(u);
        if p > 0.0 && p < 1.0 {
            let w = est.n_walks as f64 * p / (1.0 - p); // 1 / Var(log p_hat)
            rows.push((u as f64, p.ln(), w));
        }
    }
    if rows.len() < 3 {
        return Err(Error::InsufficientTailMass { u_min, u_max });
    }
    let (slope, stderr) = weighted_line_fit(&rows);
    Ok((-slope, stderr))
}

/// Slope and its standard error for rows of (x, y, weight).
pub fn weighted_line_fit(rows: &[(f64, f64, f64)]) -> (f64, f64) {
    let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, w) in rows {
        sw += w;
        swx += w * x;
        swy += w * y;
        swxx += w * x * x;
        swxy += w * x * y;
    }
    let delta = sw * swxx - swx * swx;
    let slope = (sw * swxy - swx * swy) / delta;
    (slope, (sw / delta).sqrt())
}

// ---------------------------------------------------------------------------
// open-addressing visit map over packed coordinates

/// Visit counts keyed by lattice site, packed into a u64 with
/// floor(63/d) bits per coordinate (21 bits each for d = 3).
pub struct VisitMap {
    keys: Vec<u64>,
    counts: Vec<u32>,
    mask: usize,
    len: usize,
    d: usize,
    bits: u32,
    half: i64,
}

const EMPTY: u64 = u64::MAX;

#[inline]
fn mix(key: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = key.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl VisitMap {
    pub fn new(d: usize) -> Self {
        let bits = (63 / d) as u32;
        let cap = 1 << 16;
        VisitMap {
            keys: vec![EMPTY; cap],
            counts: vec![0; cap],
            mask: cap - 1,
            len: 0,
            d,
            bits,
            half: 1i64 << (bits - 1),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn pack(&self, pos: &[i64]) -> Option<u64> {
        let mut key = 0u64;
        for a in 0..self.d {
            let shifted = pos[a] + self.half;
            if shifted < 0 || shifted >= (1i64 << self.bits) {
                return None;
            }
            key = (key << self.bits) | shifted as u64;
        }
        Some(key)
    }

    pub fn unpack(&self, key: u64, pos: &mut [i64]) {
        let mut k = key;
        for a in (0..self.d).rev() {
            pos[a] = (k & ((1u64 << self.bits) - 1)) as i64 - self.half;
            k >>= self.bits;
        }
    }

    #[inline]
    pub fn add(&mut self, key: u64) -> u32 {
        if self.len * 10 >= self.keys.len() * 7 {
            self.grow();
        }
        let mut i = (mix(key) as usize) & self.mask;
        loop {
            let k = self.keys[i];
            if k == key {
                self.counts[i] += 1;
                return self.counts[i];
            }
            if k == EMPTY {
                self.keys[i] = key;
                self.counts[i] = 1;
                self.len += 1;
                return 1;
            }
            i = (i + 1) & self.mask;
        }
    }

    #[inline]
    pub fn get(&self, key: u64) -> u32 {
        let mut i = (mix(key) as usize) & self.mask;
        loop {
            let k = self.keys[i];
            if k == key {
                return self.counts[i];
            }
            if k == EMPTY {
                return 0;
            }
            i = (i + 1) & self.mask;
        }
    }

    fn grow(&mut self) {
        let new_cap = self.keys.len() * 2;
        let mut keys = vec![EMPTY; new_cap];
        let mut counts = vec![0u32; new_cap];
        let mask = new_cap - 1;
        for (slot, &k) in self.keys.iter().enumerate() {
            if k != EMPTY {
                let mut i = (mix(k) as usize) & mask;
                while keys[i] != EMPTY {
                    i = (i + 1) & mask;
                }
                keys[i] = k;
                counts[i] = self.counts[slot];
            }
        }
        self.keys = keys;
        self.counts = counts;
        self.mask = mask;
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.keys
            .iter()
            .zip(&self.counts)
            .filter(|(&k, _)| k != EMPTY)
            .map(|(&k, &c)| (k, c))
    }
}

// ---------------------------------------------------------------------------
// sup statistics

/// Sup statistics of one path of length n.
#[derive(Clone, Debug, PartialEq)]
pub struct SupStatistic {
    pub n: u64,
    /// max over all x in Z^d of the occupation of x + A; by the candidate
    /// identity only x of the form (visited site) - a can contribute.
    pub sup_over_x: u64,
    /// max over path centers X_m of the occupation of X_m + A.
    pub sup_over_path: u64,
    pub ratio_x: f64,
    pub ratio_path: f64,
    pub distinct_sites: usize,
}

/// Walk one seeded path of length `n`, accumulate per-site visit counts in an
/// open-addressing map, then scan visited sites against the A-offsets.
pub fn sup_occupation(
    walk: &ValidatedWalk<f64>,
    set: &SiteSet,
    n: u64,
    seed: u64,
    stream: u64,
    site_cap: usize,
) -> Result<SupStatistic> {
    let d = walk.dimension();
    let stepper = Stepper::new(walk);
    let mut walker = Walker::new(&stepper, seed, stream);
    let mut map = VisitMap::new(d);

    let key0 = map.pack(&walker.pos[..d]).expect("origin packs");
    map.add(key0);
    for _ in 0..n {
        walker.step();
        let key = map.pack(&walker.pos[..d]).ok_or_else(|| {
            Error::MemoryBudgetExceeded("walk left the packable coordinate range".into())
        })?;
        map.add(key);
        if map.len() > site_cap {
            return Err(Error::MemoryBudgetExceeded(format!(
                "distinct sites exceed cap {site_cap}"
            )));
        }
    }

    let offsets = set.points();
    let mut sup_x = 0u64;
    let mut sup_path = 0u64;
    let mut site = vec![0i64; d];
    let mut candidate = vec![0i64; d];
    let mut shifted = vec![0i64; d];
    for (key, _) in map.iter() {
        map.unpack(key, &mut site);
        // path-centered window
        let mut window = 0u64;
        for a2 in offsets {
            for (s, (&c, &o)) in shifted.iter_mut().zip(site.iter().zip(a2)) {
                *s = c + o;
            }
            if let Some(k) = map.pack(&shifted) {
                window += map.get(k) as u64;
            }
        }
        sup_path = sup_path.max(window);
        // all candidates site - a
        for a in offsets {
            for (cand, (&c, &o)) in candidate.iter_mut().zip(site.iter().zip(a)) {
                *cand = c - o;
            }
            let mut total = 0u64;
            for a2 in offsets {
                for (s, (&c, &o)) in shifted.iter_mut().zip(candidate.iter().zip(a2)) {
                    *s = c + o;
                }
                if let Some(k) = map.pack(&shifted) {
                    total += map.get(k) as u64;
                }
            }
            sup_x = sup_x.max(total);
        }
    }

    let log_n = (n as f64).ln();
    Ok(SupStatistic {
        n,
        sup_over_x: sup_x,
        sup_over_path: sup_path,
        ratio_x: sup_x as f64 / log_n,
        ratio_path: sup_path as f64 / log_n,
        distinct_sites: map.len(),
    })
}

/// One row of a growth-trend table.
#[derive(Clone, Debug)]
pub struct TrendRow {
    pub n: u64,
    pub reps: usize,
    pub median_x: f64,
    pub iqr_x: (f64, f64),
    pub median_path: f64,
    pub iqr_path: (f64, f64),
    pub ratios_x: Vec<f64>,
    pub ratios_path: Vec<f64>,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let t = q * (sorted.len() - 1) as f64;
    let lo = t.floor() as usize;
    let hi = t.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (t - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Medians and interquartile ranges of the sup ratios across seeded replicas
/// for each n in the schedule.
pub fn limit_trend(
    walk: &ValidatedWalk<f64>,
    set: &SiteSet,
    n_schedule: &[u64],
    reps: usize,
    seed: u64,
    workers: usize,
    site_cap: usize,
) -> Result<Vec<TrendRow>> {
    let mut rows = Vec::with_capacity(n_schedule.len());
    for (ni, &n) in n_schedule.iter().enumerate() {
        let stats: Result<Vec<SupStatistic>> = with_pool(workers, || {
            (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let stream = ((ni as u64) << 32) | rep as u64;
                    sup_occupation(walk, set, n, seed, stream, site_cap)
                })
                .collect()
        });
        let stats = stats?;
        let mut rx: Vec<f64> = stats.iter().map(|s| s.ratio_x).collect();
        let mut rp: Vec<f64> = stats.iter().map(|s| s.ratio_path).collect();
        rx.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rp.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.push(TrendRow {
            n,
            reps,
            median_x: percentile(&rx, 0.5),
            iqr_x: (percentile(&rx, 0.25), percentile(&rx, 0.75)),
            median_path: percentile(&rp, 0.5),
            iqr_path: (percentile(&rp, 0.25), percentile(&rp, 0.75)),
            ratios_x: rx,
            ratios_path: rp,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{validate_walk, WalkSpec};

    fn srw3() -> ValidatedWalk<f64> {
        validate_walk(&WalkSpec::simple_random_walk(3).unwrap()).unwrap()
    }

    fn tail_cfg(n_walks: u64, seed: u64, workers: usize) -> SimConfig {
        SimConfig {
            walk: srw3(),
            set: SiteSet::origin(3),
            n_walks,
            truncation_radius: 100.0,
            step_cap: 1_000_000,
            seed,
            workers,
        }
    }

    #[test]
    fn seed_replay_is_bit_identical() {
        let a = simulate_occupation(&tail_cfg(2000, 7, 1)).unwrap();
        let b = simulate_occupation(&tail_cfg(2000, 7, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimate_independent_of_worker_count() {
        let a = simulate_occupation(&tail_cfg(2000, 7, 1)).unwrap();
        let b = simulate_occupation(&tail_cfg(2000, 7, 2)).unwrap();
        let c = simulate_occupation(&tail_cfg(2000, 7, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn survival_hat_is_monotone_and_normalized() {
        let est = simulate_occupation(&tail_cfg(5000, 3, 0)).unwrap();
        assert_eq!(est.survival_hat(0), 1.0, "J >= 1 when the set contains the start");
        let mut prev = 1.0;
        for u in 1..=est.max_count() {
            let s = est.survival_hat(u);
            assert!(s <= prev);
            prev = s;
        }
        let total: u64 = est.counts.iter().sum();
        assert_eq!(total, est.n_walks);
    }

    #[test]
    fn origin_tail_matches_geometric_law() {
        // P(J > u) = (1 - gamma_3)^u with gamma_3 = 0.659462670449.
        // Truncation at R=100 biases upward by O(1/R).
        let est = simulate_occupation(&tail_cfg(200_000, 11, 0)).unwrap();
        let f = 1.0 - 0.659462670449;
        for u in 0..=8u64 {
            let s = est.survival_hat(u);
            let expect = f.powi(u as i32);
            let band = 4.0 * est.stderr(u) + 1.0 / 100.0;
            assert!((s - expect).abs() <= band, "u={u}: {s} vs {expect}");
        }
    }

    #[test]
    fn slope_fit_recovers_exact_rate() {
        // deterministic fit on the exact geometric curve
        let theta = 1.0771086_f64;
        let rows: Vec<(f64, f64, f64)> =
            (0..=8).map(|u| (u as f64, -(theta * u as f64), 1.0)).collect();
        let (slope, _) = weighted_line_fit(&rows);
        assert!((-slope - theta).abs() < 1e-12);
    }

    #[test]
    fn slope_from_simulation_near_rate() {
        let est = simulate_occupation(&tail_cfg(100_000, 5, 0)).unwrap();
        let (theta_hat, _) = estimate_tail_slope(&est, 0, 8).unwrap();
        let theta = -(1.0f64 - 0.659462670449).ln();
        assert!(
            (theta_hat - theta).abs() < 0.08 * theta,
            "theta_hat {theta_hat} vs {theta}"
        );
    }

    #[test]
    fn insufficient_tail_mass_detected() {
        let est = simulate_occupation(&tail_cfg(200, 2, 0)).unwrap();
        assert!(matches!(
            estimate_tail_slope(&est, 30, 60),
            Err(Error::InsufficientTailMass { .. })
        ));
    }

    #[test]
    fn visit_map_pack_round_trip() {
        let map = VisitMap::new(3);
        let mut out = [0i64; 3];
        for pos in [[0i64, 0, 0], [5, -3, 1], [-1000, 999, 123], [1 << 19, -(1 << 19), 7]] {
            let key = map.pack(&pos).unwrap();
            map.unpack(key, &mut out);
            assert_eq!(out, pos);
        }
        assert!(map.pack(&[1 << 21, 0, 0]).is_none());
    }

    #[test]
    fn visit_map_counts_and_growth() {
        let mut map = VisitMap::new(3);
        for i in 0..100_000i64 {
            let key = map.pack(&[i % 257, (i * 7) % 101, i % 3]).unwrap();
            map.add(key);
        }
        assert!(map.len() <= 257 * 101 * 3);
        let k = map.pack(&[0, 0, 0]).unwrap();
        assert!(map.get(k) > 0);
    }

    /// Brute-force scan over the stored path for small n.
    fn sup_naive(walk: &ValidatedWalk<f64>, set: &SiteSet, n: u64, seed: u64, stream: u64) -> (u64, u64) {
        let d = walk.dimension();
        let stepper = Stepper::new(walk);
        let mut walker = Walker::new(&stepper, seed, stream);
        let mut path = vec![walker.pos[..d].to_vec()];
        for _ in 0..n {
            walker.step();
            path.push(walker.pos[..d].to_vec());
        }
        let occupation = |x: &[i64]| -> u64 {
            path.iter()
                .filter(|p| {
                    set.points().iter().any(|a| {
                        p.iter().zip(x.iter().zip(a)).all(|(&pc, (&xc, &ac))| pc == xc + ac)
                    })
                })
                .count() as u64
        };
        let mut sup_x = 0;
        let mut sup_path = 0;
        let mut dedup: Vec<Vec<i64>> = Vec::new();
        for p in &path {
            sup_path = sup_path.max(occupation(p));
            for a in set.points() {
                let cand: Vec<i64> = p.iter().zip(a).map(|(&pc, &ac)| pc - ac).collect();
                if !dedup.contains(&cand) {
                    dedup.push(cand.clone());
                    sup_x = sup_x.max(occupation(&cand));
                }
            }
        }
        (sup_x, sup_path)
    }

    #[test]
    fn sup_scan_matches_naive_oracle() {
        let walk = srw3();
        for (set, seeds) in [
            (SiteSet::origin(3), 0..10u64),
            (SiteSet::ball1(3), 0..6u64),
        ] {
            for stream in seeds {
                let fast = sup_occupation(&walk, &set, 3000, 99, stream, DEFAULT_SITE_CAP).unwrap();
                let (sx, sp) = sup_naive(&walk, &set, 3000, 99, stream);
                assert_eq!(fast.sup_over_x, sx, "set {:?} stream {stream}", set.points().len());
                assert_eq!(fast.sup_over_path, sp);
                assert!(fast.sup_over_path <= fast.sup_over_x);
            }
        }
    }

    #[test]
    fn sup_path_never_exceeds_sup_x() {
        let walk = srw3();
        let set = SiteSet::ball1(3);
        for stream in 0..20 {
            let s = sup_occupation(&walk, &set, 20_000, 1, stream, DEFAULT_SITE_CAP).unwrap();
            assert!(s.sup_over_path <= s.sup_over_x);
        }
    }

    #[test]
    fn ratio_bounded_at_moderate_n() {
        let walk = srw3();
        let s = sup_occupation(&walk, &SiteSet::origin(3), 1_000_000, 42, 0, DEFAULT_SITE_CAP).unwrap();
        assert!(s.ratio_x > 0.0 && s.ratio_x < 3.0, "ratio {}", s.ratio_x);
    }

    #[test]
    fn trend_rows_are_deterministic() {
        let walk = srw3();
        let a = limit_trend(&walk, &SiteSet::origin(3), &[10_000, 30_000], 6, 3, 1, DEFAULT_SITE_CAP)
            .unwrap();
        let b = limit_trend(&walk, &SiteSet::origin(3), &[10_000, 30_000], 6, 3, 2, DEFAULT_SITE_CAP)
            .unwrap();
        assert_eq!(a[0].ratios_x, b[0].ratios_x);
        assert_eq!(a[1].ratios_path, b[1].ratios_path);
    }

    #[test]
    fn excessive_truncation_guard_fires() {
        let mut cfg = tail_cfg(200, 1, 1);
        cfg.truncation_radius = 5000.0;
        cfg.step_cap = 100; // walks cannot exit radius 5000 in 100 steps
        assert!(matches!(
            simulate_occupation(&cfg),
            Err(Error::ExcessiveTruncation { .. })
        ));
    }
}
