//! Binary hybrid PSO/GSA search over inclusion masks.
//!
//! Agents carry a binary position and a real velocity per dimension.
//! Each iteration the agents are scored, gravitational masses are derived
//! from the scores, the heaviest `Kbest` agents pull the others, and the
//! velocity blends inertia, that pull and the attraction towards the best
//! mask seen so far. A V-shaped arctan transfer turns |velocity| into a
//! bit-flip probability.
//!
//! Random draws happen on one seeded ChaCha stream in a fixed order
//! (regeneration, forces, velocities, flips); evaluation consumes none, so
//! running evaluations in parallel does not change the trajectory.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::Mask;
use crate::error::{Error, Result};
use crate::estimation::INFEASIBLE;

/// Added to inter-agent distances before dividing.
pub const DISTANCE_EPS: f64 = 1e-9;

/// Regeneration rounds per iteration before an all-empty population aborts the run.
pub const MAX_REGENERATION_ROUNDS: usize = 10;

/// Inertia weight schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Inertia {
    Constant(f64),
    /// Linear interpolation from `start` at t = 0 to `end` at t = max_iter.
    Linear { start: f64, end: f64 },
}

impl Inertia {
    pub fn at(&self, t: usize, max_iter: usize) -> f64 {
        match *self {
            Inertia::Constant(z) => z,
            Inertia::Linear { start, end } => start + (end - start) * t as f64 / max_iter as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub n_agents: usize,
    pub max_iter: usize,
    /// Initial gravitational constant.
    pub g0: f64,
    /// Exponential decay rate of the gravitational constant.
    pub gsa_alpha: f64,
    pub inertia: Inertia,
    pub v_max: f64,
    pub seed: u64,
    /// Evaluate agents on the rayon pool.
    pub parallel: bool,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            n_agents: 10,
            max_iter: 30,
            g0: 100.0,
            gsa_alpha: 23.0,
            inertia: Inertia::Constant(0.5),
            v_max: 6.0,
            seed: 0,
            parallel: false,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::InvalidConfig("n_agents must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.g0 > 0.0) {
            return Err(Error::InvalidConfig("G0 must be positive".into()));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::InvalidConfig("v_max must be positive".into()));
        }
        if !self.gsa_alpha.is_finite() {
            return Err(Error::InvalidConfig("gravitational decay must be finite".into()));
        }
        Ok(())
    }
}

/// Result of scoring one agent.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    /// The agent's fitness and the position it should carry forward
    /// (typically its pruned structure).
    Scored { fitness: f64, position: Mask },
    /// The agent encodes no usable regressor; it is re-randomized.
    Empty,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Best {
    pub position: Mask,
    pub fitness: f64,
    /// Iteration at which this record was set.
    pub iteration: usize,
}

#[derive(Clone, Debug)]
pub struct SwarmState {
    config: SwarmConfig,
    pub positions: Vec<Mask>,
    pub velocities: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
    pub masses: Vec<f64>,
    pub gbest: Option<Best>,
    /// Completed iterations.
    pub iteration: usize,
    /// Best fitness after each completed iteration.
    pub trace: Vec<f64>,
    rng: ChaCha8Rng,
}

fn random_mask(n_vars: usize, rng: &mut ChaCha8Rng) -> Mask {
    Mask::from((0..n_vars).map(|_| rng.random_bool(0.5)).collect::<Vec<_>>())
}

/// Random binary population (each bit 1 with probability 0.5) with zero velocities.
pub fn init_population(n_vars: usize, config: &SwarmConfig) -> Result<SwarmState> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let positions = (0..config.n_agents).map(|_| random_mask(n_vars, &mut rng)).collect();
    Ok(SwarmState {
        config: config.clone(),
        positions,
        velocities: vec![vec![0.0; n_vars]; config.n_agents],
        fitness: vec![INFEASIBLE; config.n_agents],
        masses: vec![1.0 / config.n_agents as f64; config.n_agents],
        gbest: None,
        iteration: 0,
        trace: Vec::with_capacity(config.max_iter),
        rng,
    })
}

/// `G(t) = G0 exp(-alpha t / max_iter)`.
pub fn gravitational_constant(t: usize, max_iter: usize, g0: f64, alpha: f64) -> f64 {
    g0 * (-alpha * t as f64 / max_iter as f64).exp()
}

/// Normalized masses for minimization: `m_i = (f_i - worst) / (best - worst)`,
/// `M_i = m_i / sum m`. Infeasible agents get zero mass and are excluded from
/// `worst`. Equal fitness everywhere gives uniform masses.
pub fn compute_masses(fitness: &[f64]) -> Vec<f64> {
    let n = fitness.len();
    let feasible = |f: f64| f < INFEASIBLE && f.is_finite();
    let finite: Vec<f64> = fitness.iter().copied().filter(|&f| feasible(f)).collect();
    if finite.is_empty() {
        return vec![1.0 / n as f64; n];
    }
    let best = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let worst = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = if best == worst {
        fitness.iter().map(|&f| if feasible(f) { 1.0 } else { 0.0 }).collect()
    } else {
        fitness
            .iter()
            .map(|&f| if feasible(f) { (f - worst) / (best - worst) } else { 0.0 })
            .collect()
    };
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        return vec![1.0 / n as f64; n];
    }
    raw.into_iter().map(|m| m / total).collect()
}

/// Size of the attracting set, shrinking linearly from `n_agents` at t = 0 to 1 at t = max_iter.
pub fn kbest_count(t: usize, max_iter: usize, n_agents: usize) -> usize {
    let frac = (t as f64 / max_iter as f64).min(1.0);
    let k = n_agents as f64 - (n_agents as f64 - 1.0) * frac;
    (k.round() as usize).clamp(1, n_agents)
}

/// Indices of the `k` heaviest agents, ties broken by index.
pub fn kbest_indices(masses: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..masses.len()).collect();
    order.sort_by(|&a, &b| masses[b].total_cmp(&masses[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Gravitational acceleration of every agent:
/// `a_{i,d} = sum_{j in kbest, j != i} kappa * G * M_j * (x_{j,d} - x_{i,d}) / (R_ij + eps)`
/// with `R_ij` the Euclidean distance between binary positions. `kappa` is
/// drawn once per `(i, j, d)` in agent-major order.
pub fn compute_accelerations(
    positions: &[Mask],
    masses: &[f64],
    g: f64,
    kbest: &[usize],
    mut kappa: impl FnMut() -> f64,
) -> Vec<Vec<f64>> {
    let n_vars = positions.first().map_or(0, |p| p.len());
    let mut accel = vec![vec![0.0; n_vars]; positions.len()];
    for (i, acc) in accel.iter_mut().enumerate() {
        let xi = positions[i].as_slice();
        for &j in kbest {
            if j == i {
                continue;
            }
            let xj = positions[j].as_slice();
            let hamming = xi.iter().zip(xj).filter(|(a, b)| a != b).count();
            let scale = g * masses[j] / ((hamming as f64).sqrt() + DISTANCE_EPS);
            for d in 0..n_vars {
                let diff = xj[d] as i8 - xi[d] as i8;
                let k = kappa();
                acc[d] += k * scale * diff as f64;
            }
        }
    }
    accel
}

/// Adaptive acceleration coefficients `c1' = 2 - 2 (t/T)^3`, `c2' = 2 + 2 (t/T)^3`.
pub fn adaptive_coefficients(t: usize, max_iter: usize) -> (f64, f64) {
    let r = (t as f64 / max_iter as f64).powi(3);
    (-2.0 * r + 2.0, 2.0 * r + 2.0)
}

/// `v <- zeta v + c1 kappa1 a + c2 kappa2 (gbest - x)`, clamped to `[-v_max, v_max]`.
/// Two independent draws per `(agent, dimension)`.
#[allow(clippy::too_many_arguments)]
pub fn update_velocities(
    velocities: &mut [Vec<f64>],
    accel: &[Vec<f64>],
    positions: &[Mask],
    gbest: &Mask,
    c1: f64,
    c2: f64,
    zeta: f64,
    v_max: f64,
    mut kappa: impl FnMut() -> f64,
) {
    for (i, v) in velocities.iter_mut().enumerate() {
        let x = positions[i].as_slice();
        for d in 0..v.len() {
            let k1 = kappa();
            let k2 = kappa();
            let social = gbest.get(d) as i8 - x[d] as i8;
            let raw = zeta * v[d] + c1 * k1 * accel[i][d] + c2 * k2 * social as f64;
            v[d] = raw.clamp(-v_max, v_max);
        }
    }
}

/// V-shaped transfer `S(v) = |(2/pi) atan((pi/2) v)|`.
pub fn transfer_probability(v: f64) -> f64 {
    (FRAC_2_PI * (FRAC_PI_2 * v).atan()).abs()
}

/// Flips bit `(i, d)` when a fresh uniform draw falls below `S(v_{i,d})`.
pub fn update_positions(positions: &mut [Mask], velocities: &[Vec<f64>], mut kappa: impl FnMut() -> f64) {
    for (x, v) in positions.iter_mut().zip(velocities) {
        for (d, &vd) in v.iter().enumerate() {
            if kappa() < transfer_probability(vd) {
                x.flip(d);
            }
        }
    }
}

impl SwarmState {
    pub fn config(&self) -> &SwarmConfig {
        &self.config
    }

    pub fn n_vars(&self) -> usize {
        self.velocities.first().map_or(0, |v| v.len())
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.config.max_iter
    }

    fn evaluate_all<F>(&self, agents: &[usize], evaluate: &F) -> Vec<Outcome>
    where
        F: Fn(&Mask) -> Outcome + Sync,
    {
        if self.config.parallel {
            agents.par_iter().map(|&i| evaluate(&self.positions[i])).collect()
        } else {
            agents.iter().map(|&i| evaluate(&self.positions[i])).collect()
        }
    }

    /// Scores every agent, re-randomizing agents whose structure is empty.
    /// Agents still empty after the regeneration rounds are marked infeasible;
    /// if none could be scored at all, the run aborts.
    fn score(&mut self, evaluate: &(impl Fn(&Mask) -> Outcome + Sync)) -> Result<()> {
        let n_vars = self.n_vars();
        let mut pending: Vec<usize> = (0..self.positions.len()).collect();
        let mut scored_any = false;
        for round in 0..=MAX_REGENERATION_ROUNDS {
            if round > 0 {
                for &i in &pending {
                    self.positions[i] = random_mask(n_vars, &mut self.rng);
                }
            }
            let outcomes = self.evaluate_all(&pending, evaluate);
            let mut still_empty = Vec::new();
            for (&i, outcome) in pending.iter().zip(outcomes) {
                match outcome {
                    Outcome::Scored { fitness, position } => {
                        self.fitness[i] = fitness;
                        self.positions[i] = position;
                        scored_any = true;
                    }
                    Outcome::Empty => still_empty.push(i),
                }
            }
            pending = still_empty;
            if pending.is_empty() {
                break;
            }
        }
        if !scored_any {
            return Err(Error::Aborted(format!(
                "every agent encoded an empty model after {MAX_REGENERATION_ROUNDS} regenerations"
            )));
        }
        for i in pending {
            self.fitness[i] = INFEASIBLE;
        }
        Ok(())
    }

    /// One full iteration: score, update the best record, then move the swarm.
    pub fn step<F>(&mut self, evaluate: &F) -> Result<()>
    where
        F: Fn(&Mask) -> Outcome + Sync,
    {
        let t = self.iteration;
        let max_iter = self.config.max_iter;
        self.score(evaluate)?;

        let (best_idx, &best_fit) = self
            .fitness
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
            .expect("at least one agent");
        let improved = self.gbest.as_ref().is_none_or(|g| best_fit < g.fitness);
        if improved {
            self.gbest = Some(Best { position: self.positions[best_idx].clone(), fitness: best_fit, iteration: t });
        }
        let gbest = self.gbest.as_ref().expect("set above").position.clone();
        self.trace.push(self.gbest.as_ref().unwrap().fitness);

        self.masses = compute_masses(&self.fitness);
        let g = gravitational_constant(t, max_iter, self.config.g0, self.config.gsa_alpha);
        let kbest = kbest_indices(&self.masses, kbest_count(t, max_iter, self.positions.len()));
        let rng = &mut self.rng;
        let accel = compute_accelerations(&self.positions, &self.masses, g, &kbest, || rng.random::<f64>());

        let (c1, c2) = adaptive_coefficients(t, max_iter);
        let zeta = self.config.inertia.at(t, max_iter);
        update_velocities(
            &mut self.velocities,
            &accel,
            &self.positions,
            &gbest,
            c1,
            c2,
            zeta,
            self.config.v_max,
            || rng.random::<f64>(),
        );
        update_positions(&mut self.positions, &self.velocities, || rng.random::<f64>());
        self.iteration += 1;
        Ok(())
    }

    /// Runs `step` until `max_iter` iterations have completed.
    pub fn run<F>(&mut self, evaluate: &F) -> Result<()>
    where
        F: Fn(&Mask) -> Outcome + Sync,
    {
        while !self.is_done() {
            self.step(evaluate)?;
        }
        Ok(())
    }
}
