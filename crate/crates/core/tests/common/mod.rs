//! Reference implementations used as test oracles. None of these share code
//! with the library beyond the public types.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use sphlaplace::sampler::RngState;
use sphlaplace::UnitVector;

/// `C_1(σ) = 2σ(1 − e^{−π/σ})`.
pub fn c1_closed(sigma: f64) -> f64 {
    2.0 * sigma * (1.0 - (-PI / sigma).exp())
}

/// `C_2(σ) = 2πσ²(1 + e^{−π/σ}) / (1 + σ²)`.
pub fn c2_closed(sigma: f64) -> f64 {
    2.0 * PI * sigma * sigma * (1.0 + (-PI / sigma).exp()) / (1.0 + sigma * sigma)
}

/// Radial distance sampler by inverting a trapezoid CDF of
/// `e^{−r/σ} sin^{p−1} r` on a uniform grid.
pub struct GridRadialSampler {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridRadialSampler {
    pub fn new(p: usize, sigma: f64, cells: usize) -> Self {
        let h = PI / cells as f64;
        let grid: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
        let f = |r: f64| (-r / sigma).exp() * r.sin().max(0.0).powi(p as i32 - 1);
        let mut cdf = vec![0.0; cells + 1];
        for i in 1..=cells {
            cdf[i] = cdf[i - 1] + 0.5 * h * (f(grid[i - 1]) + f(grid[i]));
        }
        let total = cdf[cells];
        cdf.iter_mut().for_each(|c| *c /= total);
        Self { grid, cdf }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let j = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[j - 1], self.cdf[j]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.grid[j - 1] + t * (self.grid[j] - self.grid[j - 1])
    }

    pub fn radii(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngState::new(seed);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }
}

/// Golden-section minimization of `f` on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Pair-counting indices by explicit loops over all pairs.
pub fn brute_pairs(a: &[usize], b: &[usize]) -> (f64, f64) {
    let n = a.len();
    let (mut s11, mut s10, mut s01, mut s00) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in (i + 1)..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => s11 += 1,
                (true, false) => s10 += 1,
                (false, true) => s01 += 1,
                (false, false) => s00 += 1,
            }
        }
    }
    let jaccard = if s11 + s10 + s01 == 0 {
        1.0
    } else {
        s11 as f64 / (s11 + s10 + s01) as f64
    };
    let total = s11 + s10 + s01 + s00;
    let rand = if total == 0 {
        1.0
    } else {
        (s11 + s00) as f64 / total as f64
    };
    (jaccard, rand)
}

/// NMI with `sqrt(H(a) H(b))` normalization from explicit joint frequencies.
pub fn brute_nmi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let la: Vec<usize> = dedup(a);
    let lb: Vec<usize> = dedup(b);
    let pa: Vec<f64> = la.iter().map(|&x| a.iter().filter(|&&v| v == x).count() as f64 / n).collect();
    let pb: Vec<f64> = lb.iter().map(|&x| b.iter().filter(|&&v| v == x).count() as f64 / n).collect();
    let h = |p: &[f64]| -> f64 { p.iter().map(|&q| -q * q.ln()).sum() };
    let (ha, hb) = (h(&pa), h(&pb));
    if ha == 0.0 || hb == 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for (i, &x) in la.iter().enumerate() {
        for (j, &y) in lb.iter().enumerate() {
            let pxy = a.iter().zip(b).filter(|(&u, &v)| u == x && v == y).count() as f64 / n;
            if pxy > 0.0 {
                mi += pxy * (pxy / (pa[i] * pb[j])).ln();
            }
        }
    }
    mi / (ha * hb).sqrt()
}

fn dedup(v: &[usize]) -> Vec<usize> {
    let mut u = v.to_vec();
    u.sort_unstable();
    u.dedup();
    u
}

/// Point at geodesic distance `r` from `mu` in a uniformly random direction.
pub fn point_at<R: Rng>(mu: &UnitVector, r: f64, rng: &mut R) -> UnitVector {
    let m = mu.coords();
    let mut z: Vec<f64> = (0..m.len()).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
    let c: f64 = z.iter().zip(m).map(|(a, b)| a * b).sum();
    z.iter_mut().zip(m).for_each(|(zi, mi)| *zi -= c * mi);
    let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let coords = m
        .iter()
        .zip(&z)
        .map(|(mi, zi)| r.cos() * mi + r.sin() * zi / nz)
        .collect();
    UnitVector::new(coords).unwrap()
}

/// SL blob drawn with the grid radial sampler.
pub fn sl_blob(mu: &UnitVector, sigma: f64, n: usize, rng: &mut RngState) -> Vec<UnitVector> {
    let radial = GridRadialSampler::new(mu.dim(), sigma, 20_000);
    (0..n)
        .map(|_| {
            let r = radial.sample(rng);
            point_at(mu, r, rng)
        })
        .collect()
}

pub fn geodesic(x: &UnitVector, y: &UnitVector) -> f64 {
    sphlaplace::geodesic_distance(x, y).unwrap()
}
