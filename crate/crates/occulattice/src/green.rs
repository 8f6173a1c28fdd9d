//! Lattice Green's function G(x) = (2pi)^-d  ∫ cos(x·p) / (1 - psi(p)) dp over
//! [-pi,pi]^d, evaluated to a requested tolerance for a whole box of x at once.
//!
//! The integrand is periodic and analytic except for the integrable 1/(p^T Σ p)
//! singularity at p = 0. A smooth elliptical bump times 2/(p^T Σ p) is
//! subtracted on the grid and added back in closed polar form, leaving a
//! bounded integrand whose midpoint-rule error shrinks like h^d; the cosine
//! sums for every x come from one FFT per refinement level, and two-stage
//! Richardson extrapolation in (h^d, h^{d+2}) supplies the value and an error
//! estimate per x.

use crate::error::{Error, Result};
use crate::mc;
use crate::scalar::{KahanSum, Scalar};
use crate::walk::ValidatedWalk;
use rustfft::num_complex::Complex;
use rustfft::{FftNum, FftPlanner};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

const MEMORY_BUDGET_BYTES: usize = 3 << 30;

/// C-infinity cutoff: 1 on [0, 1/2], 0 on [1, inf).
fn bump(u: f64) -> f64 {
    if u <= 0.5 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        let xi = 2.0 * u - 1.0;
        let f = |y: f64| (-1.0 / y).exp();
        f(1.0 - xi) / (f(xi) + f(1.0 - xi))
    }
}

/// ∫_0^1 bump(u) u^{d-3} du: exact power-rule piece on [0,1/2] plus composite
/// Simpson on the smooth shoulder.
fn radial_bump_integral(d: usize) -> f64 {
    let power = d as i32 - 3;
    let head = if power == 0 { 0.5 } else { 0.5f64.powi(power + 1) / (power + 1) as f64 };
    let n = 1 << 17;
    let h = 0.5 / n as f64;
    let f = |u: f64| bump(u) * u.powi(power);
    let mut sum = f(0.5) + f(1.0);
    for i in 1..2 * n {
        let u = 0.5 + i as f64 * h / 2.0;
        sum += f(u) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    head + sum * h / 6.0
}

/// Surface area of the unit sphere S^{d-1}: 2 pi^{d/2} / Gamma(d/2).
fn unit_sphere_area(d: usize) -> f64 {
    // Gamma(d/2) by recurrence from Gamma(1) or Gamma(1/2).
    let mut g = if d % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut a = if d % 2 == 0 { 1.0 } else { 0.5 };
    while a + 1e-9 < d as f64 / 2.0 {
        g *= a;
        a += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / g
}

/// Default refinement levels and servable box radius per dimension.
fn default_levels(d: usize) -> (Vec<usize>, usize) {
    match d {
        3 => (vec![96, 192, 384], 47),
        4 => (vec![20, 40, 80], 9),
        5 => (vec![8, 16, 32], 3),
        _ => (vec![4, 8, 16], 1),
    }
}

/// Cached evaluations x -> G(x) at a declared tolerance, keyed by walk identity.
#[derive(Clone, Debug)]
pub struct GreenTable<T: Scalar> {
    pub walk_id: String,
    pub tol: T,
    entries: HashMap<Vec<i64>, T>,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    version: u32,
    walk_id: String,
    tol: f64,
    entries: Vec<TableEntry>,
}

#[derive(Serialize, Deserialize)]
struct TableEntry {
    x: Vec<i64>,
    g: f64,
}

impl<T: Scalar> GreenTable<T> {
    pub fn new(walk_id: String, tol: T) -> Self {
        Self { walk_id, tol, entries: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, x: &[i64]) -> Option<T> {
        self.entries.get(x).copied()
    }

    pub fn insert(&mut self, x: Vec<i64>, g: T) {
        self.entries.insert(x, g);
    }

    pub fn to_json(&self) -> String {
        let mut entries: Vec<(&Vec<i64>, &T)> = self.entries.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        let file = TableFile {
            version: 1,
            walk_id: self.walk_id.clone(),
            tol: self.tol.as_f64(),
            entries: entries
                .into_iter()
                .map(|(x, g)| TableEntry { x: x.clone(), g: g.as_f64() })
                .collect(),
        };
        serde_json::to_string(&file).expect("table serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TableFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("cache: {e}")))?;
        if file.version != 1 {
            return Err(Error::InvalidConfig(format!("cache version {}", file.version)));
        }
        let mut table = GreenTable::new(file.walk_id, T::c(file.tol));
        for e in file.entries {
            table.insert(e.x, T::c(e.g));
        }
        Ok(table)
    }
}

/// Monte Carlo estimate of G(x): empirical mean of visits to x before first
/// exit from the ball of radius R; the independent cross-check of the
/// quadrature path. Truncation biases the mean by O(1/R).
#[derive(Clone, Debug)]
pub struct GreenEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_walks: u64,
    pub truncation_radius: f64,
}

pub fn green_mc_oracle(
    walk: &ValidatedWalk<f64>,
    x: &[i64],
    n_walks: u64,
    radius: f64,
    seed: u64,
    workers: usize,
) -> Result<GreenEstimate> {
    let (value, stderr, _) = mc::visit_count_estimate(walk, x, n_walks, radius, seed, workers)?;
    Ok(GreenEstimate { value, stderr, n_walks, truncation_radius: radius })
}

/// Multilevel quadrature state for one walk: extrapolated G values and error
/// estimates on the box |x|_inf <= xmax.
pub struct GreenEvaluator<T: Scalar + FftNum> {
    walk: ValidatedWalk<T>,
    tol: T,
    levels: Vec<usize>,
    xmax: usize,
    side: usize,
    values: Vec<T>,
    errors: Vec<T>,
}

impl<T: Scalar + FftNum> GreenEvaluator<T> {
    pub fn new(walk: ValidatedWalk<T>, tol: T) -> Result<Self> {
        let (levels, xmax) = default_levels(walk.dimension());
        Self::with_levels(walk, tol, levels, xmax)
    }

    pub fn with_levels(
        walk: ValidatedWalk<T>,
        tol: T,
        levels: Vec<usize>,
        xmax: usize,
    ) -> Result<Self> {
        assert!(levels.len() >= 3, "need three refinement levels");
        let d = walk.dimension();
        for w in levels.windows(2) {
            assert!(w[1] == 2 * w[0], "levels must double");
        }
        let n_max = *levels.last().unwrap();
        if (n_max as usize).pow(d as u32) * std::mem::size_of::<Complex<T>>() > MEMORY_BUDGET_BYTES {
            return Err(Error::MemoryBudgetExceeded(format!(
                "grid {n_max}^{d} exceeds the quadrature memory budget"
            )));
        }
        assert!(2 * xmax < levels[0], "box radius must fit the coarsest grid");

        let side = 2 * xmax + 1;
        let box_len = side.pow(d as u32);
        let mut level_boxes: Vec<Vec<T>> = Vec::with_capacity(levels.len());
        for &n in &levels {
            level_boxes.push(level_box(&walk, n, xmax)?);
        }

        // Richardson in h^d then h^{d+2}; the last correction is the estimate.
        let c1 = T::c((1u64 << d) as f64);
        let c2 = T::c((1u64 << (d + 2)) as f64);
        let mut values = vec![T::zero(); box_len];
        let mut errors = vec![T::zero(); box_len];
        let m = levels.len();
        for i in 0..box_len {
            let mut stage1 = Vec::with_capacity(m - 1);
            for l in 0..m - 1 {
                stage1.push((c1 * level_boxes[l + 1][i] - level_boxes[l][i]) / (c1 - T::one()));
            }
            let last = stage1[m - 2];
            let prev = stage1[m - 3];
            let refined = (c2 * last - prev) / (c2 - T::one());
            values[i] = refined;
            errors[i] = (refined - last).abs().max(T::c(64.0) * T::epsilon() * refined.abs());
        }

        Ok(Self { walk, tol, levels, xmax, side, values, errors })
    }

    pub fn walk(&self) -> &ValidatedWalk<T> {
        &self.walk
    }

    pub fn tol(&self) -> T {
        self.tol
    }

    pub fn xmax(&self) -> usize {
        self.xmax
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    fn index_of(&self, x: &[i64]) -> Option<usize> {
        let d = self.walk.dimension();
        if x.len() != d {
            return None;
        }
        let mut idx = 0usize;
        for &c in x {
            if c.unsigned_abs() as usize > self.xmax {
                return None;
            }
            idx = idx * self.side + (c + self.xmax as i64) as usize;
        }
        Some(idx)
    }

    /// Value and error estimate, if x lies in the servable box.
    pub fn green_with_error(&self, x: &[i64]) -> Option<(T, T)> {
        self.index_of(x).map(|i| (self.values[i], self.errors[i]))
    }

    /// G(x) certified to `tol`.
    pub fn green_at_tol(&self, x: &[i64], tol: T) -> Result<T> {
        match self.green_with_error(x) {
            Some((v, e)) if e <= tol => Ok(v),
            Some((_, e)) => Err(Error::ToleranceUnachievable {
                x: x.to_vec(),
                requested: tol.as_f64(),
                achievable: e.as_f64(),
            }),
            None => Err(Error::ToleranceUnachievable {
                x: x.to_vec(),
                requested: tol.as_f64(),
                achievable: f64::INFINITY,
            }),
        }
    }

    /// G(x) certified to the evaluator's tolerance.
    pub fn green(&self, x: &[i64]) -> Result<T> {
        self.green_at_tol(x, self.tol)
    }

    /// No-return probability gamma_d = 1 / G(0).
    pub fn escape_probability(&self) -> Result<T> {
        let zero = vec![0i64; self.walk.dimension()];
        Ok(T::one() / self.green(&zero)?)
    }

    /// Hitting probability t_y = G(y) / G(0), y != 0.
    pub fn hit_probability(&self, y: &[i64]) -> Result<T> {
        if y.iter().all(|&c| c == 0) {
            return Err(Error::ZeroOffset);
        }
        let zero = vec![0i64; self.walk.dimension()];
        Ok(self.green(y)? / self.green(&zero)?)
    }

    /// Export entries with |x|_inf <= radius that meet the tolerance.
    pub fn table(&self, radius: usize) -> GreenTable<T> {
        let d = self.walk.dimension();
        let r = radius.min(self.xmax) as i64;
        let mut table = GreenTable::new(self.walk.walk_id().to_string(), self.tol);
        let mut x = vec![-r; d];
        loop {
            if let Some(i) = self.index_of(&x) {
                if self.errors[i] <= self.tol {
                    table.insert(x.clone(), self.values[i]);
                }
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    return table;
                }
                axis -= 1;
                x[axis] += 1;
                if x[axis] <= r {
                    break;
                }
                x[axis] = -r;
            }
        }
    }
}

/// One midpoint level: G values for the whole box at grid size n per axis.
fn level_box<T: Scalar + FftNum>(
    walk: &ValidatedWalk<T>,
    n: usize,
    xmax: usize,
) -> Result<Vec<T>> {
    let d = walk.dimension();
    let h = 2.0 * std::f64::consts::PI / n as f64;

    // covariance quadratic form and the elliptical bump scale
    let cov = walk.covariance();
    let sigma = (0..d * d).map(|i| cov.matrix[i].as_f64()).collect::<Vec<f64>>();
    let (lambda_min, det) = covariance_spectrum(&sigma, d)?;
    let t0 = 0.9 * std::f64::consts::PI * lambda_min.sqrt();
    let polar_integral = 2.0 / det.sqrt()
        * unit_sphere_area(d)
        * t0.powi(d as i32 - 2)
        * radial_bump_integral(d)
        / (2.0 * std::f64::consts::PI).powi(d as i32);

    // midpoint grid coordinates and per-axis cosine tables
    let coords: Vec<f64> =
        (0..n).map(|k| -std::f64::consts::PI + (k as f64 + 0.5) * h).collect();

    // axis-aligned pairs use 1D tables; general offsets fall back to cos()
    struct AxisPair {
        axis: usize,
        table: Vec<f64>,
    }
    let mut axis_pairs: Vec<AxisPair> = Vec::new();
    let mut general_pairs: Vec<(Vec<i64>, f64)> = Vec::new();
    for (v, c) in walk.cosine_pairs() {
        let nz: Vec<usize> = (0..d).filter(|&a| v[a] != 0).collect();
        if nz.len() == 1 {
            let axis = nz[0];
            let w = c.as_f64();
            let m = v[axis] as f64;
            axis_pairs.push(AxisPair {
                axis,
                table: coords.iter().map(|&p| w * (m * p).cos()).collect(),
            });
        } else if nz.is_empty() {
            // zero offset contributes a constant
            general_pairs.push((v.clone(), c.as_f64()));
        } else {
            general_pairs.push((v.clone(), c.as_f64()));
        }
    }

    let total = n.pow(d as u32);
    let mut data: Vec<Complex<T>> = vec![Complex::new(T::zero(), T::zero()); total];
    let mut sum_a = KahanSum::<f64>::new();

    // fill W = 1/(1 - psi) and accumulate the bump sum in one pass
    let mut idx = vec![0usize; d];
    let mut p = vec![0.0f64; d];
    let mut flat = 0usize;
    loop {
        for a in 0..d {
            p[a] = coords[idx[a]];
        }
        for last in 0..n {
            p[d - 1] = coords[last];
            let mut psi = 0.0f64;
            for ap in &axis_pairs {
                let i = if ap.axis == d - 1 { last } else { idx[ap.axis] };
                psi += ap.table[i];
            }
            for (v, c) in &general_pairs {
                let mut dot = 0.0;
                for a in 0..d {
                    dot += v[a] as f64 * p[a];
                }
                psi += c * dot.cos();
            }
            let w = 1.0 / (1.0 - psi);
            // quadratic form p^T Sigma p
            let mut q = 0.0f64;
            for i in 0..d {
                let mut row = 0.0;
                for j in 0..d {
                    row += sigma[i * d + j] * p[j];
                }
                q += p[i] * row;
            }
            let b = bump(q.sqrt() / t0);
            if b > 0.0 {
                sum_a.add(2.0 / q * b);
            }
            data[flat + last] = Complex::new(T::c(w), T::zero());
        }
        // advance the outer multi-index (all axes but the last)
        flat += n;
        let mut axis = d - 1;
        loop {
            if axis == 0 {
                break;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < n {
                break;
            }
            idx[axis] = 0;
        }
        if flat >= total {
            break;
        }
    }

    fft_all_axes(&mut data, n, d);

    // phases for the midpoint offset: e^{i x (h/2 - pi)} per axis
    let side = 2 * xmax + 1;
    let phases: Vec<Complex<f64>> = (-(xmax as i64)..=xmax as i64)
        .map(|x| {
            let angle = x as f64 * (h / 2.0 - std::f64::consts::PI);
            Complex::new(angle.cos(), angle.sin())
        })
        .collect();

    let scale = (h / (2.0 * std::f64::consts::PI)).powi(d as i32);
    let sum_a = sum_a.value();
    let box_len = side.pow(d as u32);
    let mut out = vec![T::zero(); box_len];
    let mut x = vec![-(xmax as i64); d];
    let mut bi = 0usize;
    loop {
        let mut flat = 0usize;
        let mut phase = Complex::new(1.0f64, 0.0);
        for a in 0..d {
            let m = (-x[a]).rem_euclid(n as i64) as usize;
            flat = flat * n + m;
            phase = phase * phases[(x[a] + xmax as i64) as usize];
        }
        let f = data[flat];
        let re = f.re.as_f64() * phase.re - f.im.as_f64() * phase.im;
        out[bi] = T::c(scale * (re - sum_a) + polar_integral);
        bi += 1;
        let mut axis = d;
        loop {
            if axis == 0 {
                return Ok(out);
            }
            axis -= 1;
            x[axis] += 1;
            if x[axis] <= xmax as i64 {
                break;
            }
            x[axis] = -(xmax as i64);
        }
    }
}

/// Smallest eigenvalue and determinant of the (tiny) covariance matrix.
fn covariance_spectrum(sigma: &[f64], d: usize) -> Result<(f64, f64)> {
    use crate::linalg::{jacobi_eigen, SymMatrix};
    let m = SymMatrix::from_fn(d, |i, j| sigma[i * d + j]);
    let eig = jacobi_eigen(&m)?;
    let lambda_min = eig.values.iter().cloned().fold(f64::MAX, f64::min);
    let det: f64 = eig.values.iter().product();
    if lambda_min <= 0.0 {
        return Err(Error::DegenerateLattice { index: u128::MAX });
    }
    Ok((lambda_min, det))
}

/// In-place FFT along every axis of a row-major n^d cube.
fn fft_all_axes<T: FftNum>(data: &mut [Complex<T>], n: usize, d: usize) {
    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_forward(n);
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
    let mut line = vec![Complex::new(T::zero(), T::zero()); n];
    let total = data.len();
    for axis in (0..d).rev() {
        let stride = n.pow((d - 1 - axis) as u32);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(n) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * n;
        let mut base = 0;
        while base < total {
            for off in 0..stride {
                for k in 0..n {
                    line[k] = data[base + off + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for k in 0..n {
                    data[base + off + k * stride] = line[k];
                }
            }
            base += block;
        }
    }
}
