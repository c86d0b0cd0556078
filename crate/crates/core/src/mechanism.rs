//! Two-machine scheduling primitives: makespans, the threshold allocation
//! rule, expected approximation ratios of finite threshold distributions and
//! the closed-form worst-case ratio `phi`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

pub const DEFAULT_BRUTE_FORCE_CAP: usize = 20;

/// Processing times of `n` tasks on two machines. Row `0` is machine 1.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeMatrix<T = f64> {
    rows: [Vec<T>; 2],
}

impl<T: Scalar> TimeMatrix<T> {
    pub fn new(machine1: Vec<T>, machine2: Vec<T>) -> Result<Self> {
        if machine1.is_empty() {
            return Err(Error::InvalidInstance("an instance needs at least one task".into()));
        }
        if machine1.len() != machine2.len() {
            return Err(Error::DimensionMismatch { expected: machine1.len(), got: machine2.len() });
        }
        if machine1.iter().chain(&machine2).any(|t| !(t > &T::zero())) {
            return Err(Error::InvalidInstance("processing times must be strictly positive".into()));
        }
        Ok(Self { rows: [machine1, machine2] })
    }

    pub fn n(&self) -> usize {
        self.rows[0].len()
    }

    pub fn time(&self, machine: Machine, task: usize) -> &T {
        &self.rows[machine.index()][task]
    }

    pub fn row(&self, machine: Machine) -> &[T] {
        &self.rows[machine.index()]
    }

    /// Per-task ratio `T1j / T2j`, the only quantity the threshold mechanism looks at.
    pub fn ratios(&self) -> Vec<T> {
        self.rows[0].iter().zip(&self.rows[1]).map(|(a, b)| a.clone() / b.clone()).collect()
    }

    pub fn scaled(&self, lambda: &T) -> Self {
        let scale = |row: &Vec<T>| row.iter().map(|t| t.clone() * lambda.clone()).collect();
        Self { rows: [scale(&self.rows[0]), scale(&self.rows[1])] }
    }

    /// Column `j` of the result is column `perm[j]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let pick = |row: &Vec<T>| perm.iter().map(|&p| row[p].clone()).collect();
        Self { rows: [pick(&self.rows[0]), pick(&self.rows[1])] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Machine {
    One,
    Two,
}

impl Machine {
    fn index(self) -> usize {
        match self {
            Machine::One => 0,
            Machine::Two => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Allocation(pub Vec<Machine>);

impl Allocation {
    pub fn n(&self) -> usize {
        self.0.len()
    }

    /// Allocation encoded by the low `n` bits of `mask` (bit set = machine 1).
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self((0..n).map(|j| if mask >> j & 1 == 1 { Machine::One } else { Machine::Two }).collect())
    }
}

pub fn makespan<T: Scalar>(x: &Allocation, t: &TimeMatrix<T>) -> Result<T> {
    if x.n() != t.n() {
        return Err(Error::DimensionMismatch { expected: t.n(), got: x.n() });
    }
    let mut loads = [T::zero(), T::zero()];
    for (j, m) in x.0.iter().enumerate() {
        loads[m.index()] = loads[m.index()].clone() + t.time(*m, j).clone();
    }
    let [a, b] = loads;
    Ok(scalar::max(a, b))
}

pub fn optimal_makespan<T: Scalar>(t: &TimeMatrix<T>) -> Result<T> {
    optimal_makespan_capped(t, DEFAULT_BRUTE_FORCE_CAP)
}

/// Minimum makespan by enumerating all `2^n` allocations.
pub fn optimal_makespan_capped<T: Scalar>(t: &TimeMatrix<T>, cap: usize) -> Result<T> {
    let n = t.n();
    if n > cap || n > 63 {
        return Err(Error::BruteForceCap { n, cap });
    }
    let mut best: Option<T> = None;
    for mask in 0..(1u64 << n) {
        let mut loads = [T::zero(), T::zero()];
        for j in 0..n {
            let m = if mask >> j & 1 == 1 { Machine::One } else { Machine::Two };
            loads[m.index()] = loads[m.index()].clone() + t.time(m, j).clone();
        }
        let [a, b] = loads;
        let span = scalar::max(a, b);
        if best.as_ref().map_or(true, |b| &span < b) {
            best = Some(span);
        }
    }
    Ok(best.expect("at least one allocation"))
}

/// The threshold mechanism for a fixed threshold vector: task `j` goes to machine 1 iff
/// `T1j / T2j < z_j`, otherwise (ties included) to machine 2.
pub fn allocate<T: Scalar>(z: &[T], t: &TimeMatrix<T>) -> Result<Allocation> {
    if z.len() != t.n() {
        return Err(Error::DimensionMismatch { expected: t.n(), got: z.len() });
    }
    let alloc = t
        .ratios()
        .into_iter()
        .zip(z)
        .map(|(r, zj)| if &r < zj { Machine::One } else { Machine::Two })
        .collect();
    Ok(Allocation(alloc))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom<T = f64> {
    pub z: Vec<T>,
    pub w: T,
}

/// Finite-support distribution of threshold vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteThresholdDistribution<T = f64> {
    atoms: Vec<Atom<T>>,
    n: usize,
    symmetric: bool,
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl<T: Scalar> DiscreteThresholdDistribution<T> {
    pub fn new(atoms: Vec<Atom<T>>) -> Result<Self> {
        let n = atoms
            .first()
            .map(|a| a.z.len())
            .ok_or_else(|| Error::InvalidDistribution("no atoms".into()))?;
        if n == 0 {
            return Err(Error::InvalidDistribution("threshold vectors must be nonempty".into()));
        }
        let mut total = T::zero();
        for atom in &atoms {
            if atom.z.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: atom.z.len() });
            }
            if atom.w < T::zero() {
                return Err(Error::InvalidDistribution("negative weight".into()));
            }
            if atom.z.iter().any(|c| !(c > &T::zero()) || !scalar::to_f64(c).is_finite()) {
                return Err(Error::InvalidDistribution("thresholds must be positive and finite".into()));
            }
            total = total + atom.w.clone();
        }
        if (scalar::to_f64(&total) - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {}",
                scalar::to_f64(&total)
            )));
        }
        let mut dist = Self { atoms, n, symmetric: false };
        dist.symmetric = dist.is_permutation_invariant();
        Ok(dist)
    }

    pub fn point_mass(z: Vec<T>) -> Result<Self> {
        Self::new(vec![Atom { z, w: T::one() }])
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Spreads every atom uniformly over all coordinate permutations of its
    /// threshold vector.
    pub fn symmetrized(&self) -> Self {
        let perms = permutations(self.n);
        let share = T::one() / scalar::int::<T>(perms.len() as i64);
        let mut atoms = Vec::with_capacity(self.atoms.len() * perms.len());
        for atom in &self.atoms {
            for p in &perms {
                atoms.push(Atom {
                    z: p.iter().map(|&i| atom.z[i].clone()).collect(),
                    w: atom.w.clone() * share.clone(),
                });
            }
        }
        Self { atoms, n: self.n, symmetric: true }
    }

    /// Whether the law of `z` is invariant under coordinate permutations,
    /// checked by comparing the total weight on every permuted support point.
    pub fn is_permutation_invariant(&self) -> bool {
        let weight_at = |z: &[T]| -> T {
            self.atoms
                .iter()
                .filter(|a| a.z.as_slice() == z)
                .fold(T::zero(), |acc, a| acc + a.w.clone())
        };
        let tol = 1e-12;
        for atom in &self.atoms {
            let base = weight_at(&atom.z);
            for p in permutations(self.n) {
                let z: Vec<T> = p.iter().map(|&i| atom.z[i].clone()).collect();
                if (scalar::to_f64(&(weight_at(&z) - base.clone()))).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    heap_permute(n, &mut current, &mut out);
    out
}

fn heap_permute(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(a.clone());
        return;
    }
    for i in 0..k - 1 {
        heap_permute(k - 1, a, out);
        if k % 2 == 0 {
            a.swap(i, k - 1);
        } else {
            a.swap(0, k - 1);
        }
    }
    heap_permute(k - 1, a, out);
}

/// Expected approximation ratio of the threshold mechanism under `p` on instance `t`.
pub fn expected_ratio<T: Scalar>(p: &DiscreteThresholdDistribution<T>, t: &TimeMatrix<T>) -> Result<T> {
    if p.n() != t.n() {
        return Err(Error::DimensionMismatch { expected: t.n(), got: p.n() });
    }
    let opt = optimal_makespan(t)?;
    let mut total = T::zero();
    for atom in p.atoms() {
        let span = makespan(&allocate(&atom.z, t)?, t)?;
        total = total + atom.w.clone() * span;
    }
    Ok(total / opt)
}

/// Univariate and bivariate margins of a symmetric threshold law.
pub trait Margins<T> {
    /// `F(x) = P(z_1 <= x)`.
    fn cdf(&self, x: &T) -> T;
    /// `H(x, y) = P(z_1 <= x, z_2 <= y)`.
    fn joint(&self, x: &T, y: &T) -> T;
}

/// Margins given by two evaluators.
pub struct MarginPair<F, H> {
    pub f: F,
    pub h: H,
}

impl<T, F, H> Margins<T> for MarginPair<F, H>
where
    F: Fn(&T) -> T,
    H: Fn(&T, &T) -> T,
{
    fn cdf(&self, x: &T) -> T {
        (self.f)(x)
    }

    fn joint(&self, x: &T, y: &T) -> T {
        (self.h)(x, y)
    }
}

impl<T: Scalar> Margins<T> for DiscreteThresholdDistribution<T> {
    fn cdf(&self, x: &T) -> T {
        self.atoms
            .iter()
            .filter(|a| &a.z[0] <= x)
            .fold(T::zero(), |acc, a| acc + a.w.clone())
    }

    fn joint(&self, x: &T, y: &T) -> T {
        assert!(self.n >= 2, "bivariate margin needs at least two tasks");
        self.atoms
            .iter()
            .filter(|a| &a.z[0] <= x && &a.z[1] <= y)
            .fold(T::zero(), |acc, a| acc + a.w.clone())
    }
}

/// `phi(x, y) = 1 + y - min{1, 1 - 1/x + y} F(x) - y F(y) + min{1 + 1/x, 1 + y} H(x, y)`.
pub fn phi<T: Scalar, M: Margins<T> + ?Sized>(m: &M, x: &T, y: &T) -> T {
    let one = T::one();
    let u = one.clone() / x.clone();
    let alpha = scalar::min(one.clone(), one.clone() - u.clone() + y.clone());
    let beta = scalar::min(one.clone() + u, one.clone() + y.clone());
    one + y.clone() - alpha * m.cdf(x) - y.clone() * m.cdf(y) + beta * m.joint(x, y)
}

/// The adversarial instance with columns `(1, 1/x)`, `(y, 1)` and `n - 2`
/// padding columns `(eps, eps)`.
pub fn worst_case_instance<T: Scalar>(x: &T, y: &T, n: usize, eps: &T) -> Result<TimeMatrix<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("worst-case instance needs n >= 2, got {n}")));
    }
    if n > 2 && !(eps > &T::zero()) {
        return Err(Error::InvalidArgument("padding tasks need eps > 0".into()));
    }
    let mut m1 = vec![T::one(), y.clone()];
    let mut m2 = vec![T::one() / x.clone(), T::one()];
    m1.extend(std::iter::repeat(eps.clone()).take(n - 2));
    m2.extend(std::iter::repeat(eps.clone()).take(n - 2));
    TimeMatrix::new(m1, m2)
}

/// Source of random threshold vectors for Monte-Carlo estimation.
pub trait ThresholdSampler: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut ChaCha8Rng, z: &mut [f64]);
}

impl ThresholdSampler for DiscreteThresholdDistribution<f64> {
    fn dim(&self) -> usize {
        self.n
    }

    fn sample(&self, rng: &mut ChaCha8Rng, z: &mut [f64]) {
        let mut u: f64 = rng.random::<f64>();
        for atom in &self.atoms {
            if u < atom.w {
                z.copy_from_slice(&atom.z);
                return;
            }
            u -= atom.w;
        }
        let last = self.atoms.iter().rev().find(|a| a.w > 0.0).unwrap_or(&self.atoms[0]);
        z.copy_from_slice(&last.z);
    }
}

/// Sampler backed by a closure.
pub struct FnSampler<F> {
    pub n: usize,
    pub draw: F,
}

impl<F> ThresholdSampler for FnSampler<F>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn sample(&self, rng: &mut ChaCha8Rng, z: &mut [f64]) {
        (self.draw)(rng, z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

/// Trials per random stream. Streams are keyed by chunk index, so the
/// estimate does not depend on how many worker threads run.
const CHUNK: u64 = 4096;

#[derive(Clone, Copy)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Moments { count, mean, m2 }
    }
}

pub fn monte_carlo_ratio<S: ThresholdSampler + ?Sized>(
    sampler: &S,
    t: &TimeMatrix<f64>,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("Monte-Carlo needs at least one trial".into()));
    }
    if sampler.dim() != t.n() {
        return Err(Error::DimensionMismatch { expected: t.n(), got: sampler.dim() });
    }
    let opt = optimal_makespan(t)?;
    let ratios = t.ratios();
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = CHUNK.min(trials - c * CHUNK);
            let mut z = vec![0.0; t.n()];
            let mut acc = Moments { count: 0, mean: 0.0, m2: 0.0 };
            for _ in 0..count {
                sampler.sample(&mut rng, &mut z);
                let mut loads = [0.0, 0.0];
                for (j, (r, zj)) in ratios.iter().zip(&z).enumerate() {
                    let m = if r < zj { Machine::One } else { Machine::Two };
                    loads[m.index()] += t.time(m, j);
                }
                let value = loads[0].max(loads[1]) / opt;
                acc.count += 1;
                let delta = value - acc.mean;
                acc.mean += delta / acc.count as f64;
                acc.m2 += delta * (value - acc.mean);
            }
            acc
        })
        .collect();
    let total = parts
        .into_iter()
        .fold(Moments { count: 0, mean: 0.0, m2: 0.0 }, Moments::merge);
    let stderr = if total.count > 1 {
        (total.m2 / (total.count - 1) as f64 / total.count as f64).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate { mean: total.mean, stderr, trials })
}
