//! Suprema over a net of the empirical process, the multiplier bootstrap
//! process and the empirical bootstrap process.
//!
//! The conditional laws of `Z^e` and `Z^*` given the data depend on the data
//! only through the matrix `f_j(X_i)`, so it is computed once per sample
//! ([`ValueMatrix`]) and shared across replications.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::function_class::Net;
use crate::population::{population_moments, DataSample, Distribution, PopulationOptions};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProcessKind {
    /// Empirical process supremum.
    #[serde(rename = "Z")]
    Z,
    /// Multiplier (Gaussian) bootstrap supremum.
    #[serde(rename = "Ze")]
    Ze,
    /// Empirical (multinomial) bootstrap supremum.
    #[serde(rename = "Zstar")]
    Zstar,
    /// Supremum of the limiting Gaussian process.
    #[serde(rename = "Ztilde")]
    Ztilde,
}

impl ProcessKind {
    pub fn label(self) -> &'static str {
        match self {
            ProcessKind::Z => "Z",
            ProcessKind::Ze => "Ze",
            ProcessKind::Zstar => "Zstar",
            ProcessKind::Ztilde => "Ztilde",
        }
    }
}

/// One draw of a supremum statistic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupSample {
    pub value: f64,
    pub kind: ProcessKind,
    /// Seed of the data sample the draw conditions on (`Ze`, `Zstar`).
    pub conditioning_seed: Option<u64>,
    pub weight_seed: Option<u64>,
}

/// Row-major `n x N` matrix of `f_j(X_i)`.
#[derive(Clone, Debug)]
pub struct ValueMatrix {
    n: usize,
    width: usize,
    data: Vec<f64>,
    drift: Vec<f64>,
    data_seed: u64,
}

impl ValueMatrix {
    pub fn new(data: &DataSample, net: &Net) -> Result<Self> {
        if data.points.dim() != net.class.dim {
            return input("data dimension differs from class dimension");
        }
        if data.n() == 0 {
            return input("data sample is empty");
        }
        let width = net.len();
        let mut values = Vec::with_capacity(data.n() * width);
        for x in data.points.rows() {
            values.extend(net.members.iter().map(|f| net.class.value(f, x)));
        }
        Ok(Self {
            n: data.n(),
            width,
            data: values,
            drift: net.drift.clone(),
            data_seed: data.seed,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    /// `P_n f_j` for each member.
    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.width];
        for row in self.data.chunks_exact(self.width) {
            for (a, v) in m.iter_mut().zip(row) {
                *a += v;
            }
        }
        let n = self.n as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// `max_j (B_j + n^{-1/2} sum_i w_i (f_j(X_i) - c_j))`.
    fn weighted_sup(&self, weights: &[f64], centers: &[f64]) -> f64 {
        let mut acc = vec![0.0; self.width];
        let mut wsum = 0.0;
        for (row, &w) in self.data.chunks_exact(self.width).zip(weights) {
            if w == 0.0 {
                continue;
            }
            wsum += w;
            for (a, v) in acc.iter_mut().zip(row) {
                *a += w * v;
            }
        }
        let scale = (self.n as f64).sqrt();
        acc.iter()
            .zip(centers)
            .zip(&self.drift)
            .map(|((a, c), b)| b + (a - wsum * c) / scale)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Precomputed pieces for repeated bootstrap draws given one data sample.
#[derive(Clone, Debug)]
pub struct Conditional {
    values: ValueMatrix,
    sample_means: Vec<f64>,
}

impl Conditional {
    pub fn new(data: &DataSample, net: &Net) -> Result<Self> {
        let values = ValueMatrix::new(data, net)?;
        let sample_means = values.column_means();
        Ok(Self {
            values,
            sample_means,
        })
    }

    pub fn values(&self) -> &ValueMatrix {
        &self.values
    }

    /// `Z^e` for explicitly supplied multipliers (test hook).
    pub fn multiplier_sup_with(&self, multipliers: &[f64]) -> Result<f64> {
        if multipliers.len() != self.values.n {
            return input("need one multiplier per observation");
        }
        Ok(self.values.weighted_sup(multipliers, &self.sample_means))
    }

    /// `Z^*` for explicitly supplied multinomial counts (test hook).
    pub fn bootstrap_sup_with(&self, counts: &[u32]) -> Result<f64> {
        if counts.len() != self.values.n {
            return input("need one count per observation");
        }
        let w: Vec<f64> = counts.iter().map(|&c| c as f64 - 1.0).collect();
        let zeros = vec![0.0; self.values.width];
        Ok(self.values.weighted_sup(&w, &zeros))
    }

    pub fn multiplier_sup(&self, multiplier_seed: u64) -> SupSample {
        let mut r = rng::rng_from(multiplier_seed);
        let e: Vec<f64> = (0..self.values.n).map(|_| r.sample(StandardNormal)).collect();
        SupSample {
            value: self.values.weighted_sup(&e, &self.sample_means),
            kind: ProcessKind::Ze,
            conditioning_seed: Some(self.values.data_seed),
            weight_seed: Some(multiplier_seed),
        }
    }

    pub fn bootstrap_sup(&self, weight_seed: u64) -> SupSample {
        let counts = draw_multinomial(self.values.n, weight_seed);
        let w: Vec<f64> = counts.iter().map(|&c| c as f64 - 1.0).collect();
        let zeros = vec![0.0; self.values.width];
        SupSample {
            value: self.values.weighted_sup(&w, &zeros),
            kind: ProcessKind::Zstar,
            conditioning_seed: Some(self.values.data_seed),
            weight_seed: Some(weight_seed),
        }
    }
}

/// `Pf_j` for every member of the net.
pub fn mean_vector(net: &Net, population: &Distribution, opts: &PopulationOptions) -> Result<Vec<f64>> {
    Ok(population_moments(net, population, opts)?.means)
}

/// `Z = max_j (B_j + n^{-1/2} sum_i (f_j(X_i) - Pf_j))`.
pub fn empirical_sup(data: &DataSample, net: &Net, means: &[f64]) -> Result<SupSample> {
    let values = ValueMatrix::new(data, net)?;
    empirical_sup_from(&values, means)
}

pub fn empirical_sup_from(values: &ValueMatrix, means: &[f64]) -> Result<SupSample> {
    if means.len() != values.width {
        return input("means length must equal net size");
    }
    let ones = vec![1.0; values.n];
    Ok(SupSample {
        value: values.weighted_sup(&ones, means),
        kind: ProcessKind::Z,
        conditioning_seed: None,
        weight_seed: None,
    })
}

pub fn multiplier_bootstrap_sup(data: &DataSample, net: &Net, multiplier_seed: u64) -> Result<SupSample> {
    Ok(Conditional::new(data, net)?.multiplier_sup(multiplier_seed))
}

pub fn empirical_bootstrap_sup(data: &DataSample, net: &Net, weight_seed: u64) -> Result<SupSample> {
    Ok(Conditional::new(data, net)?.bootstrap_sup(weight_seed))
}

fn draw_multinomial(n: usize, seed: u64) -> Vec<u32> {
    let mut r = rng::rng_from(seed);
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[r.random_range(0..n)] += 1;
    }
    counts
}

/// Multinomial(n; 1/n, .., 1/n) counts via `n` uniform cell assignments.
pub fn multinomial_weights(n: usize, seed: u64) -> Result<Vec<u32>> {
    if n == 0 {
        return input("n must be >= 1");
    }
    Ok(draw_multinomial(n, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_class::{FunctionClassSpec, Member, Net};
    use crate::population::Points;
    use proptest::prelude::*;

    fn tab_net(values: Vec<Vec<f64>>, drift: Vec<f64>) -> Net {
        let k = values.len();
        Net::from_members(
            FunctionClassSpec::tabulated(values),
            (0..k).map(|j| Member(vec![j as f64])).collect(),
            drift,
        )
        .unwrap()
    }

    fn data_at(idx: &[usize]) -> DataSample {
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| vec![i as f64]).collect();
        DataSample::tabulated(Points::from_rows(&rows).unwrap(), 99)
    }

    // Three members on the domain {0,1,2,3}; population uniform on the domain.
    fn three() -> Net {
        tab_net(
            vec![
                vec![1.0, 0.0, 0.0, 1.0],
                vec![2.0, -1.0, 0.5, 0.0],
                vec![0.0, 0.0, 3.0, 1.0],
            ],
            vec![0.1, 0.0, -0.2],
        )
    }

    #[test]
    fn empirical_sup_single_member() {
        let net = tab_net(vec![vec![0.0, 1.0]], vec![0.0]);
        let data = data_at(&[1, 1, 0, 1]);
        let z = empirical_sup(&data, &net, &[0.5]).unwrap();
        // sqrt(n) (P_n f - P f) = 2 (0.75 - 0.5)
        assert!((z.value - 0.5).abs() < 1e-15);
        assert_eq!(z.kind, ProcessKind::Z);
    }

    #[test]
    fn empirical_sup_centered_terms_vanish() {
        let net = tab_net(vec![vec![2.0, 2.0], vec![-1.0, -1.0]], vec![0.3, 0.7]);
        let data = data_at(&[0, 1, 1]);
        let z = empirical_sup(&data, &net, &[2.0, -1.0]).unwrap();
        assert_eq!(z.value, 0.7);
    }

    #[test]
    fn empirical_sup_matches_enumeration() {
        let net = three();
        let data = data_at(&[0, 2, 2, 3]);
        // P f_j over the uniform domain
        let means = [0.5, 0.375, 1.0];
        // hand computation: sums over data rows 0,2,2,3
        //   f1: 1+0+0+1 = 2     -> (2 - 4*0.5)/2   = 0
        //   f2: 2+0.5+0.5+0 = 3 -> (3 - 1.5)/2     = 0.75
        //   f3: 0+3+3+1 = 7     -> (7 - 4)/2       = 1.5
        // with drift: 0.1, 0.75, 1.3
        let z = empirical_sup(&data, &net, &means).unwrap();
        assert!((z.value - 1.3).abs() < 1e-14);
        assert!(empirical_sup(&data, &net, &means[..2]).is_err());
    }

    #[test]
    fn multiplier_examples() {
        let net = three();
        let data = data_at(&[0, 1, 2]);
        let c = Conditional::new(&data, &net).unwrap();
        assert_eq!(c.multiplier_sup_with(&[0.0; 3]).unwrap(), 0.1);

        let constant = tab_net(vec![vec![4.0; 4]], vec![0.25]);
        let cc = Conditional::new(&data, &constant).unwrap();
        assert_eq!(cc.multiplier_sup(5).value, 0.25);

        // n = 3, N = 2 by hand: f1 = (1,0,0), f2 = (2,-1,0.5)
        let two = tab_net(
            vec![vec![1.0, 0.0, 0.0, 1.0], vec![2.0, -1.0, 0.5, 0.0]],
            vec![0.0, 0.0],
        );
        let c2 = Conditional::new(&data, &two).unwrap();
        let e = [1.0, -2.0, 0.5];
        // P_n f1 = 1/3, P_n f2 = 0.5
        // f1: 1*(2/3) - 2*(-1/3) + 0.5*(-1/3) = 7/6
        // f2: 1*(1.5) - 2*(-1.5) + 0.5*(0)    = 4.5
        let expect = 4.5 / 3f64.sqrt();
        assert!((c2.multiplier_sup_with(&e).unwrap() - expect).abs() < 1e-14);
        let s = multiplier_bootstrap_sup(&data, &two, 17).unwrap();
        assert_eq!(s.kind, ProcessKind::Ze);
        assert_eq!(s.conditioning_seed, Some(99));
        assert_eq!(s.weight_seed, Some(17));
    }

    #[test]
    fn empirical_bootstrap_examples() {
        let net = three();
        let data = data_at(&[0, 1, 2]);
        let c = Conditional::new(&data, &net).unwrap();
        assert_eq!(c.bootstrap_sup_with(&[1, 1, 1]).unwrap(), 0.1);

        let constant = tab_net(vec![vec![4.0; 4], vec![-2.0; 4]], vec![0.0, 0.5]);
        let cc = Conditional::new(&data, &constant).unwrap();
        for seed in 0..20 {
            assert!((cc.bootstrap_sup(seed).value - 0.5).abs() < 1e-12);
        }

        // counts (2,0,1): weights (1,-1,0)
        //   f1 = (1,0,0):       1            -> 1/sqrt3 + 0.1
        //   f2 = (2,-1,0.5):    2 + 1 = 3    -> 3/sqrt3
        //   f3 = (0,0,3):       0            -> -0.2
        let expect = 3.0 / 3f64.sqrt();
        assert!((c.bootstrap_sup_with(&[2, 0, 1]).unwrap() - expect).abs() < 1e-14);
        assert_eq!(empirical_bootstrap_sup(&data, &net, 3).unwrap().kind, ProcessKind::Zstar);
    }

    #[test]
    fn multinomial_examples() {
        assert_eq!(multinomial_weights(1, 0).unwrap(), vec![1]);
        assert!(multinomial_weights(0, 0).is_err());
        for seed in 0..50 {
            let w = multinomial_weights(37, seed).unwrap();
            assert_eq!(w.iter().sum::<u32>(), 37);
        }
    }

    #[test]
    fn multinomial_binomial_moments() {
        // N_1 ~ Binomial(n, 1/n): mean 1, variance 1 - 1/n
        let n = 10_000;
        let reps = 10_000;
        let firsts: Vec<f64> = (0..reps)
            .map(|s| multinomial_weights(n, 1_000 + s as u64).unwrap()[0] as f64)
            .collect();
        let mean = firsts.iter().sum::<f64>() / reps as f64;
        let var = firsts.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let true_var = 1.0 - 1.0 / n as f64;
        let se_mean = (true_var / reps as f64).sqrt();
        // Var of the sample variance for Poisson(1)-like counts: (mu4 - s^4)/reps
        // with mu4 = 1 + 3 for Poisson(1).
        let se_var = ((4.0 - 1.0) / reps as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se_mean, "mean {mean}");
        assert!((var - true_var).abs() < 3.0 * se_var, "var {var}");
    }

    #[test]
    fn determinism() {
        let net = three();
        let data = data_at(&[0, 1, 2, 3, 3, 1]);
        let a = multiplier_bootstrap_sup(&data, &net, 4).unwrap();
        let b = multiplier_bootstrap_sup(&data, &net, 4).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let a = empirical_bootstrap_sup(&data, &net, 4).unwrap();
        let b = empirical_bootstrap_sup(&data, &net, 4).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    proptest! {
        #[test]
        fn bootstraps_invariant_to_constant_shift(
            idx in proptest::collection::vec(0usize..4, 2..30),
            shift in -5.0f64..5.0,
            seed in 0u64..1000,
        ) {
            let net = three();
            let shifted = net.shifted(shift).unwrap();
            let data = data_at(&idx);
            let a = Conditional::new(&data, &net).unwrap();
            let b = Conditional::new(&data, &shifted).unwrap();
            prop_assert!((a.multiplier_sup(seed).value - b.multiplier_sup(seed).value).abs() < 1e-9);
            prop_assert!((a.bootstrap_sup(seed).value - b.bootstrap_sup(seed).value).abs() < 1e-9);
            let w = multinomial_weights(idx.len(), seed).unwrap();
            prop_assert_eq!(w.iter().map(|&c| c as i64 - 1).sum::<i64>(), 0);
        }

        #[test]
        fn adding_a_member_never_decreases_sup(
            idx in proptest::collection::vec(0usize..4, 1..20),
            seed in 0u64..1000,
        ) {
            let small = tab_net(
                vec![vec![1.0, 0.0, 0.0, 1.0], vec![2.0, -1.0, 0.5, 0.0]],
                vec![0.1, 0.0],
            );
            let big = three();
            let data = data_at(&idx);
            let zs = empirical_sup(&data, &small, &[0.5, 0.375]).unwrap().value;
            let zb = empirical_sup(&data, &big, &[0.5, 0.375, 1.0]).unwrap().value;
            prop_assert!(zb >= zs);
            let (cs, cb) = (Conditional::new(&data, &small).unwrap(), Conditional::new(&data, &big).unwrap());
            prop_assert!(cb.multiplier_sup(seed).value >= cs.multiplier_sup(seed).value);
            prop_assert!(cb.bootstrap_sup(seed).value >= cs.bootstrap_sup(seed).value);
        }
    }
}
