//! Differential Evolution, DE/rand/1/bin, over box-bounded real vectors.
//!
//! Every random draw of a run comes from one seeded ChaCha8 stream, consumed
//! in a fixed order:
//!
//! 1. population initialization, individual by individual, component by component;
//! 2. per generation and per target index `i`: donors `r1`, `r2`, `r3`
//!    (rejection-sampled until distinct from each other and from `i`), then the
//!    forced crossover index `j_rand`, then one uniform draw per component.
//!
//! Trial vectors of a generation are built from a frozen snapshot of the
//! previous generation and evaluated afterwards, so cost evaluation order does
//! not influence the random stream.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeConfig<T> {
    /// Population size `NP`.
    pub pop_size: usize,
    /// Generation limit `G_max`.
    pub max_generations: usize,
    /// Amplification factor `F` of the difference vector.
    pub f: T,
    /// Crossover constant `CR`.
    pub cr: T,
    /// Value to reach: the run stops once the best cost is at or below it.
    pub vtr: T,
    pub seed: u64,
}

impl<T: Scalar> Default for DeConfig<T> {
    fn default() -> Self {
        Self {
            pop_size: 50,
            max_generations: 500,
            f: T::lit(0.8),
            cr: T::lit(0.5),
            vtr: T::lit(1e-4),
            seed: 0,
        }
    }
}

impl<T: Scalar> DeConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 4 {
            return Err(Error::Config(format!(
                "NP ≥ 4 required for distinct donors, got {}",
                self.pop_size
            )));
        }
        if self.max_generations < 1 {
            return Err(Error::Config("G_max ≥ 1 required".into()));
        }
        if !(self.f > T::zero()) || !self.f.is_finite() {
            return Err(Error::Config(format!("F > 0 required, got {}", self.f)));
        }
        if !(self.cr >= T::zero() && self.cr <= T::one()) {
            return Err(Error::Config(format!(
                "CR must lie in [0, 1], got {}",
                self.cr
            )));
        }
        if self.vtr.is_nan() {
            return Err(Error::Config("VTR must not be NaN".into()));
        }
        Ok(())
    }
}

/// Per-component closed search box. Degenerate intervals (`lo == hi`) are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Scalar> Bounds<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Config(format!(
                "bounds dimension mismatch: {} lower vs {} upper",
                lo.len(),
                hi.len()
            )));
        }
        for (j, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(Error::Config(format!(
                    "bound {j} must satisfy lo ≤ hi, got [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lo
    }

    pub fn upper(&self) -> &[T] {
        &self.hi
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&l, &h))| v >= l && v <= h)
    }

    /// Clamps every component onto its interval.
    pub fn repair(&self, x: &mut [T]) {
        for (v, (&l, &h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.max(l).min(h);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual<T> {
    pub x: Vec<T>,
    pub cost: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeOutcome<T> {
    pub best: Individual<T>,
    pub generations_run: usize,
    pub converged_by_vtr: bool,
    /// Best cost of the initial population followed by one entry per generation.
    pub cost_trace: Vec<T>,
}

/// Instrumentation hooks, called synchronously from the optimizer loop.
pub trait Observer<T> {
    fn on_mutation(&mut self, _target: usize, _donors: [usize; 3]) {}

    fn on_trial(&mut self, _target: usize, _parent: &[T], _trial: &[T]) {}

    fn on_generation(&mut self, _generation: usize, _population: &[Individual<T>]) {}
}

pub struct NoObserver;

impl<T> Observer<T> for NoObserver {}

/// Mutant vector together with the donor indices that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Mutant<T> {
    pub v: Vec<T>,
    pub donors: [usize; 3],
}

fn uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.random::<f64>())
}

fn evaluate<T: Scalar, C>(cost_fn: &C, x: Vec<T>) -> Result<Individual<T>>
where
    C: Fn(&[T]) -> T,
{
    let cost = cost_fn(&x);
    if !cost.is_finite() {
        return Err(Error::NonFiniteCost {
            x: x.iter().map(|v| v.as_f64()).collect(),
            cost: cost.as_f64(),
        });
    }
    Ok(Individual { x, cost })
}

/// Draws `NP` individuals uniformly from the box and evaluates them.
pub fn initialize_population<T, C, R>(
    cost_fn: &C,
    bounds: &Bounds<T>,
    pop_size: usize,
    rng: &mut R,
) -> Result<Vec<Individual<T>>>
where
    T: Scalar,
    C: Fn(&[T]) -> T,
    R: Rng + ?Sized,
{
    let vectors: Vec<Vec<T>> = (0..pop_size)
        .map(|_| {
            bounds
                .lo
                .iter()
                .zip(&bounds.hi)
                .map(|(&l, &h)| l + uniform::<T, _>(rng) * (h - l))
                .collect()
        })
        .collect();
    vectors.into_iter().map(|x| evaluate(cost_fn, x)).collect()
}

/// Three indices, distinct from each other and from `target`.
pub fn pick_donors<R: Rng + ?Sized>(pop_size: usize, target: usize, rng: &mut R) -> [usize; 3] {
    debug_assert!(pop_size >= 4);
    let mut picked = [usize::MAX; 3];
    for k in 0..3 {
        picked[k] = loop {
            let r = rng.random_range(0..pop_size);
            if r != target && !picked[..k].contains(&r) {
                break r;
            }
        };
    }
    picked
}

/// `v = x_r1 + F·(x_r2 − x_r3)`, clamped into the box.
pub fn mutate<T, R>(
    population: &[Individual<T>],
    target: usize,
    f: T,
    bounds: &Bounds<T>,
    rng: &mut R,
) -> Mutant<T>
where
    T: Scalar,
    R: Rng + ?Sized,
{
    let donors = pick_donors(population.len(), target, rng);
    let mut v = difference_vector(
        &population[donors[0]].x,
        &population[donors[1]].x,
        &population[donors[2]].x,
        f,
    );
    bounds.repair(&mut v);
    Mutant { v, donors }
}

/// Unrepaired `base + F·(a − b)`.
pub fn difference_vector<T: Scalar>(base: &[T], a: &[T], b: &[T], f: T) -> Vec<T> {
    base.iter()
        .zip(a.iter().zip(b))
        .map(|(&x, (&p, &q))| x + f * (p - q))
        .collect()
}

/// Binomial crossover with one forced mutant component.
pub fn crossover<T, R>(parent: &[T], mutant: &[T], cr: T, rng: &mut R) -> Vec<T>
where
    T: Scalar,
    R: Rng + ?Sized,
{
    assert_eq!(
        parent.len(),
        mutant.len(),
        "crossover vectors differ in length"
    );
    let j_rand = rng.random_range(0..parent.len());
    parent
        .iter()
        .zip(mutant)
        .enumerate()
        .map(|(j, (&p, &m))| {
            let r: T = uniform(rng);
            if r <= cr || j == j_rand {
                m
            } else {
                p
            }
        })
        .collect()
}

/// The trial replaces the parent only on strictly lower cost.
pub fn select<T: Scalar>(parent: Individual<T>, trial: Individual<T>) -> Individual<T> {
    if trial.cost < parent.cost {
        trial
    } else {
        parent
    }
}

fn best_index<T: Scalar>(population: &[Individual<T>]) -> usize {
    // First minimum wins so ties resolve identically on every run.
    let mut best = 0;
    for (i, ind) in population.iter().enumerate().skip(1) {
        if ind.cost < population[best].cost {
            best = i;
        }
    }
    best
}

pub fn optimize<T, C>(cost_fn: C, bounds: &Bounds<T>, cfg: &DeConfig<T>) -> Result<DeOutcome<T>>
where
    T: Scalar,
    C: Fn(&[T]) -> T,
{
    optimize_with_observer(cost_fn, bounds, cfg, &mut NoObserver)
}

pub fn optimize_with_observer<T, C, O>(
    cost_fn: C,
    bounds: &Bounds<T>,
    cfg: &DeConfig<T>,
    observer: &mut O,
) -> Result<DeOutcome<T>>
where
    T: Scalar,
    C: Fn(&[T]) -> T,
    O: Observer<T> + ?Sized,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut population = initialize_population(&cost_fn, bounds, cfg.pop_size, &mut rng)?;
    observer.on_generation(0, &population);

    let mut cost_trace = Vec::with_capacity(cfg.max_generations + 1);
    cost_trace.push(population[best_index(&population)].cost);

    let mut generations_run = 0;
    let mut converged_by_vtr = false;
    while generations_run < cfg.max_generations {
        let trials: Vec<Vec<T>> = (0..cfg.pop_size)
            .map(|i| {
                let mutant = mutate(&population, i, cfg.f, bounds, &mut rng);
                observer.on_mutation(i, mutant.donors);
                let trial = crossover(&population[i].x, &mutant.v, cfg.cr, &mut rng);
                observer.on_trial(i, &population[i].x, &trial);
                trial
            })
            .collect();

        let mut next = Vec::with_capacity(cfg.pop_size);
        for (parent, trial) in population.into_iter().zip(trials) {
            next.push(select(parent, evaluate(&cost_fn, trial)?));
        }
        population = next;
        generations_run += 1;
        observer.on_generation(generations_run, &population);

        let best = population[best_index(&population)].cost;
        cost_trace.push(best);
        if best <= cfg.vtr {
            converged_by_vtr = true;
            break;
        }
    }

    let best = population.swap_remove(best_index(&population));
    Ok(DeOutcome {
        best,
        generations_run,
        converged_by_vtr,
        cost_trace,
    })
}

/// Writes `generation,best_cost` rows.
pub fn write_cost_trace<T: Scalar, W: Write>(trace: &[T], mut out: W) -> std::io::Result<()> {
    writeln!(out, "generation,best_cost")?;
    for (g, c) in trace.iter().enumerate() {
        writeln!(out, "{g},{c}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ind(x: Vec<f64>, cost: f64) -> Individual<f64> {
        Individual { x, cost }
    }

    fn sphere_at(p: Vec<f64>) -> impl Fn(&[f64]) -> f64 {
        move |x| x.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn box4(lo: f64, hi: f64) -> Bounds<f64> {
        Bounds::new(vec![lo; 4], vec![hi; 4]).unwrap()
    }

    #[test]
    fn config_validation() {
        let ok = DeConfig::<f64>::default();
        ok.validate().unwrap();
        assert_eq!((ok.pop_size, ok.max_generations), (50, 500));
        let bad = DeConfig { pop_size: 3, ..ok };
        assert!(bad.validate().unwrap_err().to_string().contains("NP ≥ 4"));
        assert!(DeConfig { cr: 1.5, ..ok }.validate().is_err());
        assert!(DeConfig { f: 0.0, ..ok }.validate().is_err());
        assert!(DeConfig {
            max_generations: 0,
            ..ok
        }
        .validate()
        .is_err());
    }

    #[test]
    fn degenerate_bounds_give_identical_population() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop =
            initialize_population(&sphere_at(vec![0.0; 4]), &box4(0.0, 0.0), 4, &mut rng).unwrap();
        assert_eq!(pop.len(), 4);
        assert!(pop.iter().all(|i| i.x == vec![0.0; 4] && i.cost == 0.0));
    }

    #[test]
    fn init_is_seeded_and_boxed() {
        let b = box4(-2.0, 3.0);
        let cost = sphere_at(vec![0.0; 4]);
        let a = initialize_population(&cost, &b, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let c = initialize_population(&cost, &b, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.len(), 50);
        assert!(a.iter().all(|i| b.contains(&i.x)));
    }

    #[test]
    fn difference_vector_arithmetic() {
        let v = difference_vector(&[0.0; 4], &[1.0; 4], &[0.0; 4], 0.8);
        assert_eq!(v, vec![0.8; 4]);
        let base = vec![0.1, 0.2, 0.3, 0.4];
        assert_eq!(difference_vector(&base, &[5.0; 4], &[5.0; 4], 0.8), base);
    }

    #[test]
    fn mutation_clamps_to_bounds() {
        let pop = vec![
            ind(vec![0.9; 4], 0.0),
            ind(vec![1.0; 4], 0.0),
            ind(vec![0.0; 4], 0.0),
            ind(vec![0.5; 4], 0.0),
        ];
        let b = box4(0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = mutate(&pop, 3, 0.8, &b, &mut rng);
            assert!(b.contains(&m.v));
            let raw = difference_vector(
                &pop[m.donors[0]].x,
                &pop[m.donors[1]].x,
                &pop[m.donors[2]].x,
                0.8,
            );
            for (r, v) in raw.iter().zip(&m.v) {
                assert_eq!(*v, r.clamp(0.0, 1.0));
            }
        }
    }

    #[test]
    fn donors_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for target in 0..4 {
            for _ in 0..200 {
                let [a, b, c] = pick_donors(4, target, &mut rng);
                let mut all = vec![a, b, c, target];
                all.sort();
                all.dedup();
                assert_eq!(all.len(), 4);
            }
        }
    }

    #[test]
    fn crossover_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let parent = vec![0.0; 4];
        let mutant = vec![1.0; 4];
        assert_eq!(crossover(&parent, &mutant, 1.0, &mut rng), mutant);
        for _ in 0..100 {
            let t = crossover(&parent, &mutant, 0.0, &mut rng);
            assert_eq!(t.iter().filter(|&&v| v == 1.0).count(), 1);
        }
        assert_eq!(crossover(&parent, &parent, 0.5, &mut rng), parent);
    }

    #[test]
    fn selection_is_strict() {
        let p = |c| ind(vec![0.0], c);
        let t = |c| ind(vec![1.0], c);
        assert_eq!(select(p(2.0), t(1.0)).x, vec![1.0]);
        assert_eq!(select(p(1.0), t(1.0)).x, vec![0.0]);
        assert_eq!(select(p(1.0), t(3.0)).x, vec![0.0]);
    }

    #[test]
    fn converges_on_sphere() {
        let target = vec![0.3, -1.2, 0.7, 1.9];
        let cfg = DeConfig {
            max_generations: 100,
            seed: 7,
            ..DeConfig::default()
        };
        let out = optimize(sphere_at(target.clone()), &box4(-2.0, 2.0), &cfg).unwrap();
        assert!(out.best.cost <= 1e-4, "cost {}", out.best.cost);
        for (x, p) in out.best.x.iter().zip(&target) {
            assert!((x - p).abs() <= 1e-2);
        }
    }

    #[test]
    fn vtr_controls_termination() {
        let cfg = DeConfig {
            max_generations: 17,
            vtr: -1.0,
            ..DeConfig::default()
        };
        let out = optimize(sphere_at(vec![0.0; 4]), &box4(-1.0, 1.0), &cfg).unwrap();
        assert_eq!(out.generations_run, 17);
        assert!(!out.converged_by_vtr);
        assert_eq!(out.cost_trace.len(), 18);

        let cfg = DeConfig {
            vtr: f64::MAX,
            ..cfg
        };
        let out = optimize(sphere_at(vec![0.0; 4]), &box4(-1.0, 1.0), &cfg).unwrap();
        assert_eq!(out.generations_run, 1);
        assert!(out.converged_by_vtr);
    }

    #[test]
    fn non_finite_cost_is_reported() {
        let cfg = DeConfig::<f64>::default();
        let err = optimize(
            |x: &[f64]| if x[0] > 0.0 { f64::NAN } else { 0.5 },
            &box4(-1.0, 1.0),
            &cfg,
        )
        .unwrap_err();
        match err {
            Error::NonFiniteCost { x, .. } => assert!(x[0] > 0.0),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn works_in_f32() {
        let cfg = DeConfig::<f32> {
            max_generations: 150,
            seed: 2,
            ..DeConfig::default()
        };
        let b = Bounds::new(vec![-1.0f32; 2], vec![1.0f32; 2]).unwrap();
        let out = optimize(
            |x: &[f32]| (x[0] - 0.25).powi(2) + (x[1] + 0.5).powi(2),
            &b,
            &cfg,
        )
        .unwrap();
        assert!(out.best.cost <= 1e-4);
    }

    #[test]
    fn cost_trace_csv() {
        let mut buf = Vec::new();
        write_cost_trace(&[3.0, 1.5, 1.5], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "generation,best_cost\n0,3\n1,1.5\n2,1.5\n"
        );
    }
}
