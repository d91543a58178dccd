//! Evaluable VC-type function classes, drift functionals, and greedy nets.
//!
//! Nets are built by farthest-point traversal of a candidate pool under the
//! `L2(Q)` metric of a probe sample `Q`. The traversal order does not depend
//! on the target radius, so net sizes are monotone in `epsilon` for a fixed
//! seed and pool.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::population::Points;
use crate::rng::{self, TAG_POOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassKind {
    /// `x -> 1{|x - c| <= r}`; params `[c_1..c_d, r]`.
    BallIndicators {
        center_range: [f64; 2],
        radius_range: [f64; 2],
    },
    /// `x -> 1{v.x <= t}` with `|v| = 1`; params `[v_1..v_d, t]`.
    HalfspaceIndicators { offset_range: [f64; 2] },
    /// `x -> v.x` with `|v| = 1`; params `[v_1..v_d]`.
    LinearSphere,
    /// Finite class on the domain `{0, .., m-1}` (`d = 1`); params `[index]`.
    /// `values[j][x]` is member `j` evaluated at point `x`.
    Tabulated { values: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionClassSpec {
    pub dim: usize,
    #[serde(flatten)]
    pub kind: ClassKind,
}

/// Parameter vector identifying one member of a class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member(pub Vec<f64>);

impl Member {
    pub fn params(&self) -> &[f64] {
        &self.0
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const UNIT_TOL: f64 = 1e-9;

impl FunctionClassSpec {
    pub fn ball_indicators(dim: usize, center_range: [f64; 2], radius_range: [f64; 2]) -> Self {
        Self {
            dim,
            kind: ClassKind::BallIndicators {
                center_range,
                radius_range,
            },
        }
    }

    pub fn linear_sphere(dim: usize) -> Self {
        Self {
            dim,
            kind: ClassKind::LinearSphere,
        }
    }

    pub fn tabulated(values: Vec<Vec<f64>>) -> Self {
        Self {
            dim: 1,
            kind: ClassKind::Tabulated { values },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("class dimension must be >= 1".into()));
        }
        let bad_range = |r: &[f64; 2]| !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]);
        match &self.kind {
            ClassKind::BallIndicators {
                center_range,
                radius_range,
            } => {
                if bad_range(center_range) || bad_range(radius_range) || radius_range[0] < 0.0 {
                    return Err(Error::Config(
                        "ball ranges must be finite, increasing, with nonnegative radii".into(),
                    ));
                }
            }
            ClassKind::HalfspaceIndicators { offset_range } => {
                if bad_range(offset_range) {
                    return Err(Error::Config("offset range must be finite and increasing".into()));
                }
            }
            ClassKind::LinearSphere => {}
            ClassKind::Tabulated { values } => {
                if self.dim != 1 {
                    return Err(Error::Config("tabulated classes live on d = 1".into()));
                }
                let m = values.first().map(Vec::len).unwrap_or(0);
                if m == 0 || values.iter().any(|v| v.len() != m) {
                    return Err(Error::Config(
                        "tabulated class needs >= 1 member, all tables of equal nonzero length"
                            .into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn is_indicator(&self) -> bool {
        matches!(
            self.kind,
            ClassKind::BallIndicators { .. } | ClassKind::HalfspaceIndicators { .. }
        )
    }

    pub fn param_len(&self) -> usize {
        match self.kind {
            ClassKind::BallIndicators { .. } | ClassKind::HalfspaceIndicators { .. } => {
                self.dim + 1
            }
            ClassKind::LinearSphere => self.dim,
            ClassKind::Tabulated { .. } => 1,
        }
    }

    pub fn check_member(&self, member: &Member) -> Result<()> {
        let p = member.params();
        if p.len() != self.param_len() {
            return input(format!(
                "member has {} parameters, class expects {}",
                p.len(),
                self.param_len()
            ));
        }
        match &self.kind {
            ClassKind::BallIndicators { .. } if p[self.dim] < 0.0 => {
                input("ball radius must be nonnegative")
            }
            ClassKind::HalfspaceIndicators { .. } | ClassKind::LinearSphere
                if (norm(&p[..self.dim]) - 1.0).abs() > UNIT_TOL =>
            {
                input("direction vector must have unit norm")
            }
            ClassKind::Tabulated { values }
                if p[0] < 0.0 || p[0].fract() != 0.0 || p[0] as usize >= values.len() =>
            {
                input("tabulated member index out of range")
            }
            _ => Ok(()),
        }
    }

    /// `f(x)` without validation; hot path for the process engine.
    #[inline]
    pub fn value(&self, member: &Member, x: &[f64]) -> f64 {
        let p = member.params();
        match &self.kind {
            ClassKind::BallIndicators { .. } => {
                let r = p[self.dim];
                let d2: f64 = x.iter().zip(p).map(|(a, c)| (a - c) * (a - c)).sum();
                if d2 <= r * r {
                    1.0
                } else {
                    0.0
                }
            }
            ClassKind::HalfspaceIndicators { .. } => {
                if dot(&p[..self.dim], x) <= p[self.dim] {
                    1.0
                } else {
                    0.0
                }
            }
            ClassKind::LinearSphere => dot(p, x),
            ClassKind::Tabulated { values } => {
                let row = &values[p[0] as usize];
                let i = x[0].round();
                if i >= 0.0 && (i as usize) < row.len() {
                    row[i as usize]
                } else {
                    0.0
                }
            }
        }
    }

    pub fn envelope(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ClassKind::BallIndicators { .. } | ClassKind::HalfspaceIndicators { .. } => 1.0,
            ClassKind::LinearSphere => norm(x),
            ClassKind::Tabulated { values } => {
                let i = x[0].round();
                if i < 0.0 {
                    return 0.0;
                }
                values
                    .iter()
                    .filter_map(|row| row.get(i as usize))
                    .fold(0.0, |acc: f64, v| acc.max(v.abs()))
            }
        }
    }

    fn random_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = norm(&v);
            if n > 1e-12 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }

    /// The candidate pool the greedy net is selected from. Tabulated classes
    /// use every member in order.
    pub fn candidate_pool(&self, pool_size: usize, seed: u64) -> Vec<Member> {
        let mut rng = rng::stream(seed, &[TAG_POOL]);
        match &self.kind {
            ClassKind::Tabulated { values } => {
                (0..values.len()).map(|j| Member(vec![j as f64])).collect()
            }
            ClassKind::BallIndicators {
                center_range,
                radius_range,
            } => (0..pool_size)
                .map(|_| {
                    let mut p: Vec<f64> = (0..self.dim)
                        .map(|_| rng.random_range(center_range[0]..center_range[1]))
                        .collect();
                    // radii in (lo, hi]
                    let u: f64 = rng.random();
                    p.push(radius_range[1] - u * (radius_range[1] - radius_range[0]));
                    Member(p)
                })
                .collect(),
            ClassKind::HalfspaceIndicators { offset_range } => (0..pool_size)
                .map(|_| {
                    let mut p = self.random_unit(&mut rng);
                    p.push(rng.random_range(offset_range[0]..offset_range[1]));
                    Member(p)
                })
                .collect(),
            ClassKind::LinearSphere => (0..pool_size)
                .map(|_| Member(self.random_unit(&mut rng)))
                .collect(),
        }
    }
}

/// Pointwise evaluation with validation.
pub fn evaluate(class: &FunctionClassSpec, member: &Member, x: &[f64]) -> Result<f64> {
    if x.len() != class.dim {
        return input(format!(
            "point has dimension {}, class expects {}",
            x.len(),
            class.dim
        ));
    }
    class.check_member(member)?;
    Ok(class.value(member, x))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftKind {
    Zero,
    /// One value per class member; tabulated classes only.
    Tabulated { values: Vec<f64> },
    /// `B(f) = intercept + coef . params(f)`.
    Linear { coef: Vec<f64>, intercept: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    #[serde(flatten)]
    pub kind: DriftKind,
    pub eta: f64,
}

impl DriftSpec {
    pub fn zero(eta: f64) -> Self {
        Self {
            kind: DriftKind::Zero,
            eta,
        }
    }

    pub fn value(&self, class: &FunctionClassSpec, member: &Member) -> Result<f64> {
        match &self.kind {
            DriftKind::Zero => Ok(0.0),
            DriftKind::Tabulated { values } => match class.kind {
                ClassKind::Tabulated { .. } => values
                    .get(member.params()[0] as usize)
                    .copied()
                    .ok_or_else(|| Error::Input("no tabulated drift for member".into())),
                _ => input("tabulated drift requires a tabulated class"),
            },
            DriftKind::Linear { coef, intercept } => {
                if coef.len() != member.params().len() {
                    return input("linear drift coefficient length differs from member params");
                }
                Ok(intercept + dot(coef, member.params()))
            }
        }
    }
}

/// Finite discretization `{f_1, .., f_N}` of a class with drift values.
#[derive(Clone, Debug, PartialEq)]
pub struct Net {
    pub class: FunctionClassSpec,
    pub members: Vec<Member>,
    pub drift: Vec<f64>,
    pub epsilon: f64,
    /// Covering radius achieved on the candidate pool (probe metric), or the
    /// lattice mesh for sphere grids.
    pub mesh: f64,
    pub probe_size: usize,
    /// Every pool candidate was selected; the pool may be too small.
    pub pool_exhausted: bool,
}

impl Net {
    /// Builds a net directly from members and drift values.
    pub fn from_members(class: FunctionClassSpec, members: Vec<Member>, drift: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return input("a net needs at least one member");
        }
        if drift.len() != members.len() {
            return input("drift length must equal the number of members");
        }
        for m in &members {
            class.check_member(m)?;
        }
        Ok(Self {
            class,
            members,
            drift,
            epsilon: 0.0,
            mesh: 0.0,
            probe_size: 0,
            pool_exhausted: false,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn max_drift(&self) -> f64 {
        self.drift.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Same net with every function shifted by `c` (test hook for
    /// invariance properties). Only tabulated classes support this.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        match &self.class.kind {
            ClassKind::Tabulated { values } => {
                let values = values
                    .iter()
                    .map(|row| row.iter().map(|v| v + c).collect())
                    .collect();
                Ok(Self {
                    class: FunctionClassSpec::tabulated(values),
                    ..self.clone()
                })
            }
            _ => input("only tabulated nets can be shifted"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetOptions {
    pub pool_size: usize,
    /// Optional hard cap on the number of members.
    pub max_members: Option<usize>,
}

impl Default for NetOptions {
    fn default() -> Self {
        Self {
            pool_size: 1000,
            max_members: None,
        }
    }
}

/// Values of a candidate on the probe sample.
enum Signature {
    Bits(Vec<u64>),
    Reals(Vec<f64>),
}

fn signatures(class: &FunctionClassSpec, pool: &[Member], probe: &Points) -> Vec<Signature> {
    let m = probe.len();
    pool.iter()
        .map(|f| {
            if class.is_indicator() {
                let mut b = vec![0u64; m.div_ceil(64)];
                for (i, x) in probe.rows().enumerate() {
                    if class.value(f, x) != 0.0 {
                        b[i / 64] |= 1 << (i % 64);
                    }
                }
                Signature::Bits(b)
            } else {
                Signature::Reals(probe.rows().map(|x| class.value(f, x)).collect())
            }
        })
        .collect()
}

/// `e_Q(f, g) = sqrt(Q (f - g)^2)` from probe signatures.
fn probe_distance(a: &Signature, b: &Signature, m: usize) -> f64 {
    let ss = match (a, b) {
        (Signature::Bits(x), Signature::Bits(y)) => x
            .iter()
            .zip(y)
            .map(|(p, q)| (p ^ q).count_ones() as f64)
            .sum::<f64>(),
        (Signature::Reals(x), Signature::Reals(y)) => {
            x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum()
        }
        _ => unreachable!("signatures of one class share a representation"),
    };
    (ss / m as f64).sqrt()
}

/// Farthest-point traversal of a pool. Returns the visiting order and, for
/// each visited point after the first, its distance to the earlier points.
/// Stops once the next distance would fall at or below `radius` or when
/// `cap` points are chosen. Also returns the covering radius achieved.
fn farthest_point<D>(len: usize, dist: D, radius: f64, cap: usize) -> (Vec<usize>, f64)
where
    D: Fn(usize, usize) -> f64,
{
    let mut chosen = vec![0usize];
    let mut min_d: Vec<f64> = (0..len).map(|i| dist(0, i)).collect();
    min_d[0] = 0.0;
    loop {
        let (far, far_d) = min_d
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        if far_d <= radius || chosen.len() >= cap {
            return (chosen, far_d.max(0.0));
        }
        chosen.push(far);
        for (i, slot) in min_d.iter_mut().enumerate() {
            let d = dist(far, i);
            if d < *slot {
                *slot = d;
            }
        }
        min_d[far] = 0.0;
    }
}

/// Probe-metric `L2(Q)` norm of the envelope.
fn envelope_norm(class: &FunctionClassSpec, probe: &Points) -> f64 {
    let ss: f64 = probe.rows().map(|x| class.envelope(x).powi(2)).sum();
    (ss / probe.len() as f64).sqrt()
}

/// Builds an `epsilon`-net. Indicator and tabulated classes use greedy
/// farthest-point selection under the probe metric; the linear class uses a
/// deterministic sphere lattice whose chord mesh is at most `epsilon`.
pub fn build_net(
    class: &FunctionClassSpec,
    epsilon: f64,
    metric_probe: &Points,
    drift: &DriftSpec,
    opts: &NetOptions,
    seed: u64,
) -> Result<Net> {
    if !(epsilon > 0.0) {
        return input("epsilon must be > 0");
    }
    if metric_probe.is_empty() {
        return input("metric probe must be nonempty");
    }
    if metric_probe.dim() != class.dim {
        return input("probe dimension differs from class dimension");
    }
    class.validate()?;
    let cap = opts.max_members.unwrap_or(usize::MAX).max(1);

    let (members, mesh, exhausted) = if let ClassKind::LinearSphere = class.kind {
        let lattice = sphere_net(class.dim, epsilon, seed)?;
        let members: Vec<Member> = lattice.points.into_iter().take(cap).map(Member).collect();
        (members, lattice.mesh, false)
    } else {
        let pool = class.candidate_pool(opts.pool_size, seed);
        if pool.is_empty() {
            return input("candidate pool is empty");
        }
        let sigs = signatures(class, &pool, metric_probe);
        let m = metric_probe.len();
        let (order, mesh) =
            farthest_point(pool.len(), |a, b| probe_distance(&sigs[a], &sigs[b], m), epsilon, cap);
        let exhausted = order.len() == pool.len() && pool.len() > 1;
        (order.into_iter().map(|i| pool[i].clone()).collect(), mesh, exhausted)
    };
    let drift_values = members
        .iter()
        .map(|f| drift.value(class, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(Net {
        class: class.clone(),
        members,
        drift: drift_values,
        epsilon,
        mesh,
        probe_size: metric_probe.len(),
        pool_exhausted: exhausted,
    })
}

/// Size of a greedy `epsilon * |F|_{Q,2}`-net of the candidate pool under the
/// probe metric. Nonincreasing in `epsilon` for a fixed seed and pool.
pub fn covering_number_estimate(
    class: &FunctionClassSpec,
    epsilon: f64,
    metric_probe: &Points,
    pool_size: usize,
    seed: u64,
) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return input("epsilon must lie in (0, 1]");
    }
    if metric_probe.is_empty() || metric_probe.dim() != class.dim {
        return input("metric probe must be nonempty with the class dimension");
    }
    class.validate()?;
    let pool = class.candidate_pool(pool_size, seed);
    let sigs = signatures(class, &pool, metric_probe);
    let m = metric_probe.len();
    let scale = envelope_norm(class, metric_probe);
    let (order, _) = farthest_point(
        pool.len(),
        |a, b| probe_distance(&sigs[a], &sigs[b], m),
        epsilon * scale,
        usize::MAX,
    );
    Ok(order.len())
}

/// Upper estimate of `N_B(eta)`: the minimal number of members whose drift
/// values strict-`eta`-cover all drift values. In one dimension the greedy
/// sweep is optimal, so this is exact for the supplied members.
pub fn drift_count(drift: &DriftSpec, class: &FunctionClassSpec, members: &[Member]) -> Result<usize> {
    if !(drift.eta > 0.0) {
        return input("eta must be > 0");
    }
    if matches!(drift.kind, DriftKind::Zero) {
        return Ok(1);
    }
    let values = members
        .iter()
        .map(|f| drift.value(class, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(drift_cover_count(&values, drift.eta))
}

pub(crate) fn drift_cover_count(values: &[f64], eta: f64) -> usize {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut count = 0;
    let mut i = 0;
    while i < v.len() {
        let first = v[i];
        // rightmost center still within eta of the first uncovered value
        let mut c = i;
        while c + 1 < v.len() && v[c + 1] - first < eta {
            c += 1;
        }
        let center = v[c];
        count += 1;
        i = c + 1;
        while i < v.len() && v[i] - center < eta {
            i += 1;
        }
    }
    count.max(1)
}

/// Unit vectors covering `S^{d-1}` with chord mesh at most the requested
/// value.
#[derive(Clone, Debug)]
pub struct SphereNet {
    pub points: Vec<Vec<f64>>,
    pub mesh: f64,
}

/// Number of equally spaced circle points needed for chord covering radius
/// `eps`.
pub fn circle_grid_size(eps: f64) -> usize {
    let half = (eps / 2.0).min(1.0);
    ((std::f64::consts::PI / (2.0 * half.asin())).ceil() as usize).max(1)
}

pub fn circle_grid(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
            vec![a.cos(), a.sin()]
        })
        .collect()
}

fn fibonacci_sphere(k: usize) -> Vec<Vec<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..k)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / k as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let a = golden * i as f64;
            vec![r * a.cos(), r * a.sin(), z]
        })
        .collect()
}

fn chord(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Estimated covering radius of `net` over a dense set of test directions.
fn covering_radius(net: &[Vec<f64>], tests: &[Vec<f64>]) -> f64 {
    tests
        .iter()
        .map(|t| net.iter().map(|v| chord(v, t)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Deterministic lattice in `d <= 3` (angular grid, Fibonacci lattice), a
/// seeded greedy net over random directions above.
pub fn sphere_net(dim: usize, eps: f64, seed: u64) -> Result<SphereNet> {
    if !(eps > 0.0) {
        return input("sphere net mesh must be > 0");
    }
    match dim {
        0 => input("sphere dimension must be >= 1"),
        1 => Ok(if eps >= 2.0 {
            SphereNet { points: vec![vec![1.0]], mesh: 2.0 }
        } else {
            SphereNet { points: vec![vec![1.0], vec![-1.0]], mesh: 0.0 }
        }),
        2 => {
            let m = circle_grid_size(eps);
            let mesh = 2.0 * (std::f64::consts::PI / (2.0 * m as f64)).sin();
            Ok(SphereNet { points: circle_grid(m), mesh })
        }
        3 => {
            if eps >= 2.0 {
                return Ok(SphereNet { points: vec![vec![0.0, 0.0, 1.0]], mesh: 2.0 });
            }
            let tests = fibonacci_sphere(20_000);
            let mut k = ((4.0 / (eps * eps)).ceil() as usize).max(2);
            loop {
                let pts = fibonacci_sphere(k);
                let mesh = covering_radius(&pts, &tests);
                if mesh <= eps {
                    return Ok(SphereNet { points: pts, mesh });
                }
                k += (k / 10).max(1);
            }
        }
        _ => {
            let class = FunctionClassSpec::linear_sphere(dim);
            let pool_size = 20_000;
            let pool: Vec<Vec<f64>> = class
                .candidate_pool(pool_size, seed)
                .into_iter()
                .map(|m| m.0)
                .collect();
            let (order, mesh) =
                farthest_point(pool.len(), |a, b| chord(&pool[a], &pool[b]), eps, usize::MAX);
            Ok(SphereNet {
                points: order.into_iter().map(|i| pool[i].clone()).collect(),
                mesh,
            })
        }
    }
}
