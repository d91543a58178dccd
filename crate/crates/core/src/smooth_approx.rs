//! Smooth max `F_beta` and the mollified set indicator `g`.

use std::sync::OnceLock;

use crate::error::{input, Result};

/// `F_beta(x) = beta^{-1} log sum_j exp(beta (x_j + mu_j))`, evaluated with a
/// max shift. Satisfies `max_j x_j <= F_beta(x - mu) <= max_j x_j + log(p) / beta`.
pub fn softmax(x: &[f64], beta: f64, mu_bar: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return input("softmax needs p >= 1");
    }
    if x.len() != mu_bar.len() {
        return input("x and mu_bar must have equal length");
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return input("beta must be a positive finite number");
    }
    let shifted: Vec<f64> = x.iter().zip(mu_bar).map(|(a, b)| a + b).collect();
    let m = shifted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return input("softmax arguments must be finite");
    }
    let s: f64 = shifted.iter().map(|v| (beta * (v - m)).exp()).sum();
    Ok(m + s.ln() / beta)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn bump_raw(z: f64) -> f64 {
    if z.abs() < 1.0 {
        (1.0 / (z * z - 1.0)).exp()
    } else {
        0.0
    }
}

/// Normalizing constant `C` with `int C exp(1/(z^2-1)) dz = 1`.
pub fn bump_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        // split at 0 and +-0.5 to resolve the flat tails
        let (x, w) = gauss_legendre(400);
        let cuts = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let total: f64 = cuts
            .windows(2)
            .map(|ab| integrate(&x, &w, ab[0], ab[1], bump_raw))
            .sum();
        1.0 / total
    })
}

/// Compactly supported mollifier on `[-1, 1]`.
pub fn bump(z: f64) -> f64 {
    bump_constant() * bump_raw(z)
}

fn integrate<F: Fn(f64) -> f64>(x: &[f64], w: &[f64], a: f64, b: f64, f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    x.iter().zip(w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

fn merge(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// `g(t) = int h(t + delta z) phi(z) dz` with `h(y) = (1 - dist(y, A^delta)/delta)_+`
/// for a finite union of closed intervals `A`.
#[derive(Clone, Debug)]
pub struct MollifiedIndicator {
    set: Vec<(f64, f64)>,
    enlarged: Vec<(f64, f64)>,
    delta: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl MollifiedIndicator {
    pub fn new(set: &[(f64, f64)], delta: f64, quadrature_nodes: usize) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return input("delta must be > 0");
        }
        if set.is_empty() {
            return input("set must contain at least one interval");
        }
        if set.iter().any(|&(a, b)| !(a.is_finite() && b.is_finite() && a <= b)) {
            return input("intervals must be finite with lo <= hi");
        }
        if quadrature_nodes < 2 {
            return input("need at least 2 quadrature nodes");
        }
        let set = merge(set.to_vec());
        let enlarged = merge(set.iter().map(|&(a, b)| (a - delta, b + delta)).collect());
        let (nodes, weights) = gauss_legendre(quadrature_nodes);
        Ok(Self {
            set,
            enlarged,
            delta,
            nodes,
            weights,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn set(&self) -> &[(f64, f64)] {
        &self.set
    }

    fn dist_to_enlarged(&self, y: f64) -> f64 {
        self.enlarged
            .iter()
            .map(|&(a, b)| {
                if y < a {
                    a - y
                } else if y > b {
                    y - b
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn h(&self, y: f64) -> f64 {
        (1.0 - self.dist_to_enlarged(y) / self.delta).max(0.0)
    }

    /// Kinks of `h` in the integration variable `z`, restricted to `(-1, 1)`.
    fn breakpoints(&self, t: f64) -> Vec<f64> {
        let d = self.delta;
        let mut ys = Vec::with_capacity(4 * self.enlarged.len());
        for (i, &(a, b)) in self.enlarged.iter().enumerate() {
            ys.extend([a - d, a, b, b + d]);
            if let Some(&(next, _)) = self.enlarged.get(i + 1) {
                ys.push(0.5 * (b + next));
            }
        }
        let mut zs: Vec<f64> = ys
            .into_iter()
            .map(|y| (y - t) / d)
            .filter(|z| *z > -1.0 && *z < 1.0)
            .collect();
        zs.sort_by(f64::total_cmp);
        zs
    }

    pub fn eval(&self, t: f64) -> f64 {
        let d = self.delta;
        let inner = self.breakpoints(t);
        if inner.is_empty() {
            // h is affine on the window; only the flat cases occur away from kinks
            let (lo, hi) = (self.h(t - d), self.h(t + d));
            if lo == hi && (lo == 0.0 || lo == 1.0) {
                return lo;
            }
        }
        let mut cuts = Vec::with_capacity(inner.len() + 2);
        cuts.push(-1.0);
        cuts.extend(inner);
        cuts.push(1.0);
        let total: f64 = cuts
            .windows(2)
            .filter(|ab| ab[1] > ab[0])
            .map(|ab| {
                integrate(&self.nodes, &self.weights, ab[0], ab[1], |z| {
                    self.h(t + d * z) * bump(z)
                })
            })
            .sum();
        total.clamp(0.0, 1.0)
    }

    pub fn in_set(&self, t: f64) -> bool {
        self.set.iter().any(|&(a, b)| a <= t && t <= b)
    }

    /// Membership in `A^{k delta}`.
    pub fn in_enlargement(&self, t: f64, k: f64) -> bool {
        let r = k * self.delta;
        self.set.iter().any(|&(a, b)| a - r <= t && t <= b + r)
    }
}

pub fn mollified_indicator_eval(g: &MollifiedIndicator, t: f64) -> f64 {
    g.eval(t)
}

/// Scaled finite-difference maxima `max|g^(k)| delta^k`, `k = 1, 2, 3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeReport {
    pub d1_scaled: f64,
    pub d2_scaled: f64,
    pub d3_scaled: f64,
    /// `max|g'| delta <= 1.05`.
    pub lipschitz_ok: bool,
}

/// Central differences of orders 1-3 over `grid`.
pub fn derivative_bound_check(
    g: &MollifiedIndicator,
    grid: &[f64],
    fd_step: f64,
) -> Result<DerivativeReport> {
    let d = g.delta;
    if !(fd_step > 0.0) || fd_step > d / 100.0 {
        return input("fd_step must lie in (0, delta/100]");
    }
    if grid.is_empty() {
        return input("grid must be nonempty");
    }
    let lo = g.set.first().map(|s| s.0).unwrap_or(0.0) - 3.0 * d;
    let hi = g.set.last().map(|s| s.1).unwrap_or(0.0) + 3.0 * d;
    let (gmin, gmax) = grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    if gmin > lo || gmax < hi {
        return input("grid must cover the 3*delta enlargement of the set");
    }
    let h = fd_step;
    let (mut m1, mut m2, mut m3) = (0.0f64, 0.0f64, 0.0f64);
    for &t in grid {
        let f = |k: f64| g.eval(t + k * h);
        let (fm2, fm1, f0, fp1, fp2) = (f(-2.0), f(-1.0), f(0.0), f(1.0), f(2.0));
        m1 = m1.max(((fp1 - fm1) / (2.0 * h)).abs());
        m2 = m2.max(((fp1 - 2.0 * f0 + fm1) / (h * h)).abs());
        m3 = m3.max(((fp2 - 2.0 * fp1 + 2.0 * fm1 - fm2) / (2.0 * h * h * h)).abs());
    }
    Ok(DerivativeReport {
        d1_scaled: m1 * d,
        d2_scaled: m2 * d * d,
        d3_scaled: m3 * d * d * d,
        lipschitz_ok: m1 * d <= 1.05,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn softmax_examples() {
        let p = 5;
        let x = vec![0.7; p];
        let v = softmax(&x, 3.0, &vec![0.0; p]).unwrap();
        assert!((v - (0.7 + (p as f64).ln() / 3.0)).abs() < 1e-14);
        assert_eq!(softmax(&[1.25], 40.0, &[0.5]).unwrap(), 1.75);
        assert!(softmax(&[1.0], 0.0, &[0.0]).is_err());
        assert!(softmax(&[], 1.0, &[]).is_err());
        assert!(softmax(&[1.0, 2.0], 1.0, &[0.0]).is_err());
    }

    #[test]
    fn softmax_sandwich_p8() {
        let mut r = rng::rng_from(8);
        let beta = 50.0;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..8).map(|_| r.random_range(-3.0..3.0)).collect();
            let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let f = softmax(&x, beta, &[0.0; 8]).unwrap();
            let gap = f - m;
            assert!(gap >= 0.0 && gap <= 8f64.ln() / beta + 1e-12);
        }
    }

    #[test]
    fn softmax_is_stable_for_large_arguments() {
        let v = softmax(&[1e4, 1e4 - 1.0], 100.0, &[0.0, 0.0]).unwrap();
        assert!(v.is_finite());
        assert!((v - 1e4).abs() < 1e-3);
    }

    #[test]
    fn softmax_monotone_in_each_coordinate() {
        let mut r = rng::rng_from(81);
        for _ in 0..500 {
            let p = r.random_range(1..10);
            let x: Vec<f64> = (0..p).map(|_| r.random_range(-2.0..2.0)).collect();
            let mu: Vec<f64> = (0..p).map(|_| r.random_range(-1.0..1.0)).collect();
            let beta = r.random_range(0.1..20.0);
            let base = softmax(&x, beta, &mu).unwrap();
            let j = r.random_range(0..p);
            let mut y = x.clone();
            y[j] += r.random_range(0.0..0.5);
            assert!(softmax(&y, beta, &mu).unwrap() >= base);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        // exact through degree 13
        let v: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(12)).sum();
        assert!((v - 2.0 / 13.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn bump_is_normalized() {
        // brute-force midpoint rule with 2e6 cells
        let m = 2_000_000;
        let hstep = 2.0 / m as f64;
        let total: f64 = (0..m).map(|i| bump(-1.0 + (i as f64 + 0.5) * hstep)).sum::<f64>() * hstep;
        assert!((total - 1.0).abs() < 1e-10);
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(-1.3), 0.0);
    }

    /// Independent composite Simpson oracle on `[-1, 1]` with `m` cells.
    fn brute_g(g: &MollifiedIndicator, t: f64, m: usize) -> f64 {
        let hstep = 2.0 / m as f64;
        let f = |z: f64| g.h(t + g.delta() * z) * bump(z);
        let mut s = f(-1.0) + f(1.0);
        for i in 1..m {
            let z = -1.0 + i as f64 * hstep;
            s += if i % 2 == 1 { 4.0 * f(z) } else { 2.0 * f(z) };
        }
        s * hstep / 3.0
    }

    #[test]
    fn mollifier_examples() {
        let g = MollifiedIndicator::new(&[(0.0, 1.0)], 0.1, 201).unwrap();
        assert_eq!(mollified_indicator_eval(&g, 0.5), 1.0);
        assert_eq!(mollified_indicator_eval(&g, 2.0), 0.0);
        let v = g.eval(1.15);
        assert!(v > 0.0 && v < 1.0);
        assert!((v - brute_g(&g, 1.15, 100_000)).abs() < 1e-6);
        for t in [-0.27, -0.15, -0.05, 1.05, 1.2, 1.29] {
            assert!((g.eval(t) - brute_g(&g, t, 100_000)).abs() < 1e-6, "t = {t}");
        }
        assert!(MollifiedIndicator::new(&[(0.0, 1.0)], 0.0, 201).is_err());
        assert!(MollifiedIndicator::new(&[(1.0, 0.0)], 0.1, 201).is_err());
    }

    #[test]
    fn mollifier_sandwich_and_union() {
        let g = MollifiedIndicator::new(&[(0.0, 0.3), (0.55, 1.0)], 0.05, 201).unwrap();
        for i in 0..1000 {
            let t = -0.4 + 1.8 * i as f64 / 999.0;
            let v = g.eval(t);
            if g.in_set(t) {
                assert!(v >= 1.0 - 1e-8);
            }
            if !g.in_enlargement(t, 3.0) {
                assert!(v <= 1e-8);
            }
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn mollifier_monotone_while_approaching() {
        // to the right of A = [0,1], distance to A^delta grows with t
        let g = MollifiedIndicator::new(&[(0.0, 1.0)], 0.1, 201).unwrap();
        let mut prev = g.eval(0.9);
        for i in 1..=600 {
            let t = 0.9 + 0.5 * i as f64 / 600.0;
            let v = g.eval(t);
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn derivative_check_examples() {
        let grid: Vec<f64> = (0..=1000).map(|i| -0.5 + 2.0 * i as f64 / 1000.0).collect();
        let g = MollifiedIndicator::new(&[(0.0, 1.0)], 0.1, 201).unwrap();
        let rep = derivative_bound_check(&g, &grid, 0.001).unwrap();
        assert!(rep.lipschitz_ok, "{rep:?}");
        assert!(rep.d1_scaled <= 1.05);

        let flat = derivative_bound_check(&g, &[-0.5, 0.5, 1.5], 0.001).unwrap();
        assert!(flat.d1_scaled < 1e-6 && flat.d2_scaled < 1e-6 && flat.d3_scaled < 1e-6);
        assert!(derivative_bound_check(&g, &grid, 0.01).is_err());
        assert!(derivative_bound_check(&g, &[0.5], 0.001).is_err());
    }

    #[test]
    fn higher_derivative_constants_are_stable_in_delta() {
        let mut d2 = Vec::new();
        let mut d3 = Vec::new();
        for delta in [0.05, 0.1, 0.2] {
            let g = MollifiedIndicator::new(&[(0.0, 1.0)], delta, 201).unwrap();
            let grid: Vec<f64> = (0..=2000)
                .map(|i| -4.0 * delta + (1.0 + 8.0 * delta) * i as f64 / 2000.0)
                .collect();
            let rep = derivative_bound_check(&g, &grid, delta / 100.0).unwrap();
            assert!(rep.d2_scaled.is_finite() && rep.d3_scaled.is_finite());
            d2.push(rep.d2_scaled);
            d3.push(rep.d3_scaled);
        }
        for v in [d2, d3] {
            let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
            assert!(hi / lo < 2.0, "{v:?}");
        }
    }
}
