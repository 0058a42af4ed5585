//! The two-player tug-of-war game with noise whose value is the DPP solution.
//!
//! One round: a fair coin picks the mover. The mover either stays or
//! triggers play; then the opponent picks `c`, and a coin with probability
//! `alpha` lets the mover choose the next point in the small ball. Otherwise
//! a tug-of-war with noise is played in the large ball: with probability
//! `beta` a fair coin decides which player moves the token anywhere in it,
//! and with probability `1 - beta` the next point is uniform in it. Time
//! drops by `tau` every round.

pub mod diagnostics;
pub mod strategy;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::dpp::DirichletProblem;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::ScalarField;
use crate::params::Params;

pub use strategy::{Player, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    /// Maximizer.
    I,
    /// Minimizer.
    II,
}

impl Role {
    pub fn opponent(self) -> Role {
        match self {
            Role::I => Role::II,
            Role::II => Role::I,
        }
    }
}

/// What happened in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Stay,
    MoverPick,
    TugI,
    TugII,
    Noise,
}

impl Branch {
    pub const ALL: [Branch; 5] = [Branch::Stay, Branch::MoverPick, Branch::TugI, Branch::TugII, Branch::Noise];

    pub fn tag(self) -> &'static str {
        match self {
            Branch::Stay => "stay",
            Branch::MoverPick => "mover_pick",
            Branch::TugI => "tug_i",
            Branch::TugII => "tug_ii",
            Branch::Noise => "noise",
        }
    }
}

/// Forces outcomes of the biased coins, for testing the transition law.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoinOverride {
    /// `Some(true)`: mover always picks in the small ball; `Some(false)`: never.
    pub alpha: Option<bool>,
    /// `Some(true)`: tug sub-round always moved by a player; `Some(false)`: always noise.
    pub beta: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Game {
    pub params: Params,
    pub domain: Domain,
    pub u0: ScalarField,
    pub g: ScalarField,
    /// Ends only when time runs out; leaving the domain does not stop play.
    #[serde(default)]
    pub whole_space: bool,
    #[serde(default)]
    pub coins: CoinOverride,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub x: Vec<f64>,
    pub t: f64,
    pub k: usize,
    /// Rounds until the clock reaches zero.
    pub rounds_left: usize,
    pub terminated: bool,
    pub payoff: Option<f64>,
}

/// Read-only view handed to strategies.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext<'a> {
    pub x: &'a [f64],
    pub t: f64,
    pub k: usize,
    pub rounds_left: usize,
    pub params: &'a Params,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub mover: Role,
    pub branch: Branch,
    pub c: Option<f64>,
    /// Out-of-range `c` or out-of-ball points that had to be clamped.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub x: Vec<f64>,
    pub t: f64,
    /// Branch taken in round `k`; `None` on the final row.
    pub branch: Option<Branch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub x0: Vec<f64>,
    pub t0: f64,
    pub payoff: f64,
    pub rounds: usize,
    pub violations: usize,
    pub trace: Option<Vec<TraceRow>>,
}

impl EpisodeRecord {
    /// Compact CSV: `k, x0.., t, branch, payoff` with the payoff on the final row.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let trace = self.trace.as_ref().ok_or(Error::Untraced)?;
        let d = self.x0.len();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["k".to_string()];
        header.extend((0..d).map(|i| format!("x{i}")));
        header.extend(["t".into(), "branch".into(), "payoff".into()]);
        out.write_record(&header)?;
        for (n, row) in trace.iter().enumerate() {
            let mut rec = vec![row.k.to_string()];
            rec.extend(row.x.iter().map(|v| v.to_string()));
            rec.push(row.t.to_string());
            rec.push(row.branch.map_or(String::new(), |b| b.tag().to_string()));
            rec.push(if n + 1 == trace.len() { self.payoff.to_string() } else { String::new() });
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Stream of the game coins for an episode; strategies draw from their own
/// streams so that coin sequences do not depend on the strategies played.
pub fn episode_rng(seed: u64, episode: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode * 3 + slot);
    rng
}

/// Uniform point in the closed ball `B_r(x)`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, x: &[f64], r: f64) -> Vec<f64> {
    let d = x.len();
    if d == 1 {
        let u: f64 = rng.random();
        return vec![x[0] + r * (2.0 * u - 1.0)];
    }
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let s = r * u.powf(1.0 / d as f64) / n;
        return x.iter().zip(&g).map(|(a, b)| a + s * b).collect();
    }
}

/// Projects `y` onto the closed ball `B_r(x)` along the ray from `x`.
fn clamp_to_ball(x: &[f64], y: Vec<f64>, r: f64, violations: &mut usize) -> Vec<f64> {
    let n = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if y.iter().all(|v| v.is_finite()) && n <= r * (1.0 + 1e-12) {
        return y;
    }
    *violations += 1;
    if !(n.is_finite()) || n == 0.0 {
        return x.to_vec();
    }
    x.iter().zip(&y).map(|(a, b)| a + (b - a) * (r / n)).collect()
}

impl Game {
    pub fn from_problem(problem: &DirichletProblem) -> Self {
        Self {
            params: problem.params,
            domain: problem.domain.clone(),
            u0: problem.u0.clone(),
            g: problem.g.clone(),
            whole_space: false,
            coins: CoinOverride::default(),
        }
    }

    fn exited(&self, x: &[f64]) -> bool {
        !self.whole_space && !self.domain.contains(x)
    }

    /// `g(x)` outside the domain, `u0(x)` inside.
    pub fn payoff(&self, x: &[f64]) -> f64 {
        if !self.whole_space && !self.domain.contains(x) {
            self.g.value(x)
        } else {
            self.u0.value(x)
        }
    }

    fn settle(&self, mut s: GameState) -> GameState {
        if s.rounds_left == 0 || self.exited(&s.x) {
            s.terminated = true;
            s.payoff = Some(self.payoff(&s.x));
        }
        s
    }

    pub fn start(&self, x0: &[f64], t0: f64) -> Result<GameState> {
        if x0.len() != self.params.d {
            return Err(Error::DimensionMismatch { expected: self.params.d, got: x0.len() });
        }
        if !(t0 > 0.0) {
            return Err(Error::InvalidParameter(format!("starting time must be positive, got {t0}")));
        }
        if !self.whole_space && !self.domain.contains(x0) {
            return Err(Error::InvalidParameter(format!("starting point {x0:?} is outside the domain")));
        }
        Ok(self.settle(GameState {
            x: x0.to_vec(),
            t: t0,
            k: 0,
            rounds_left: self.params.steps_to(t0),
            terminated: false,
            payoff: None,
        }))
    }

    /// One round. Coin order: fair coin, alpha coin, beta coin, tug coin,
    /// uniform draw; later coins are drawn only when needed.
    pub fn play_round(
        &self,
        state: &GameState,
        one: &mut dyn Player,
        two: &mut dyn Player,
        rng: &mut ChaCha8Rng,
    ) -> Result<(GameState, RoundOutcome)> {
        if state.terminated {
            return Err(Error::InvalidParameter("round played on a finished game".into()));
        }
        let pr = &self.params;
        let ctx = RoundContext { x: &state.x, t: state.t, k: state.k, rounds_left: state.rounds_left, params: pr };
        let mover = if rng.random_bool(0.5) { Role::I } else { Role::II };
        let (m, o): (&mut dyn Player, &mut dyn Player) = match mover {
            Role::I => (one, two),
            Role::II => (two, one),
        };
        let mut violations = 0;
        let (next, branch, c) = if m.stay_or_play(&ctx) {
            (state.x.clone(), Branch::Stay, None)
        } else {
            let mut c = o.pick_c(&ctx);
            if !(c >= pr.m_eps && c <= pr.big_m_eps) {
                violations += 1;
                c = if c.is_nan() { pr.m_eps } else { c.clamp(pr.m_eps, pr.big_m_eps) };
            }
            let heads = match self.coins.alpha {
                Some(f) => f,
                None => rng.random::<f64>() < pr.alpha,
            };
            if heads {
                let r = pr.small_radius(c);
                let y = m.pick_small_ball_point(&ctx, c);
                (clamp_to_ball(&state.x, y, r, &mut violations), Branch::MoverPick, Some(c))
            } else {
                let r = pr.tug_radius(c);
                let tug = match self.coins.beta {
                    Some(f) => f,
                    None => rng.random::<f64>() < pr.beta,
                };
                if tug {
                    let (who, branch) = if rng.random_bool(0.5) { (Role::I, Branch::TugI) } else { (Role::II, Branch::TugII) };
                    let y = if who == mover { m.pick_tug_point(&ctx, c) } else { o.pick_tug_point(&ctx, c) };
                    (clamp_to_ball(&state.x, y, r, &mut violations), branch, Some(c))
                } else {
                    (uniform_in_ball(rng, &state.x, r), Branch::Noise, Some(c))
                }
            }
        };
        let s = self.settle(GameState {
            x: next,
            t: state.t - pr.tau,
            k: state.k + 1,
            rounds_left: state.rounds_left - 1,
            terminated: false,
            payoff: None,
        });
        Ok((s, RoundOutcome { mover, branch, c, violations }))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn run_episode(
        &self,
        x0: &[f64],
        t0: f64,
        s1: &dyn Strategy,
        s2: &dyn Strategy,
        seed: u64,
        episode: u64,
        trace: bool,
    ) -> Result<EpisodeRecord> {
        let mut rng = episode_rng(seed, episode, 0);
        let mut one = s1.player(Role::I, episode_rng(seed, episode, 1));
        let mut two = s2.player(Role::II, episode_rng(seed, episode, 2));
        let mut state = self.start(x0, t0)?;
        let mut rows = trace.then(Vec::new);
        let mut violations = 0;
        while !state.terminated {
            let (next, out) = self.play_round(&state, one.as_mut(), two.as_mut(), &mut rng)?;
            if let Some(r) = rows.as_mut() {
                r.push(TraceRow { k: state.k, x: state.x.clone(), t: state.t, branch: Some(out.branch) });
            }
            violations += out.violations;
            state = next;
        }
        if let Some(r) = rows.as_mut() {
            r.push(TraceRow { k: state.k, x: state.x.clone(), t: state.t, branch: None });
        }
        Ok(EpisodeRecord {
            x0: x0.to_vec(),
            t0,
            payoff: state.payoff.expect("terminated state carries a payoff"),
            rounds: state.k,
            violations,
            trace: rows,
        })
    }

    /// Runs `n` episodes with streams derived from `seed`.
    #[allow(clippy::too_many_arguments)]
    pub fn run_episodes(
        &self,
        x0: &[f64],
        t0: f64,
        s1: &dyn Strategy,
        s2: &dyn Strategy,
        n: usize,
        seed: u64,
        trace: bool,
        exec: Execution,
    ) -> Result<Vec<EpisodeRecord>> {
        exec.try_map(n, |e| self.run_episode(x0, t0, s1, s2, seed, e as u64, trace))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn estimate_value(
        &self,
        x0: &[f64],
        t0: f64,
        s1: &dyn Strategy,
        s2: &dyn Strategy,
        n: usize,
        seed: u64,
        exec: Execution,
    ) -> Result<ValueEstimate> {
        if n < 2 {
            return Err(Error::InvalidParameter("need at least two episodes".into()));
        }
        let recs = self.run_episodes(x0, t0, s1, s2, n, seed, false, exec)?;
        let payoffs: Vec<f64> = recs.iter().map(|r| r.payoff).collect();
        let violations = recs.iter().map(|r| r.violations).sum();
        Ok(ValueEstimate::from_payoffs(&payoffs, seed, violations))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
    pub seed: u64,
    pub protocol_violations: usize,
}

impl ValueEstimate {
    pub const BINS: usize = 20;

    pub fn from_payoffs(payoffs: &[f64], seed: u64, protocol_violations: usize) -> Self {
        let n = payoffs.len();
        let mean = payoffs.iter().sum::<f64>() / n as f64;
        let min = payoffs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let var = if n > 1 { payoffs.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        let mut counts = vec![0; Self::BINS];
        for &p in payoffs {
            let b = if max > min { (((p - min) / (max - min)) * Self::BINS as f64) as usize } else { 0 };
            counts[b.min(Self::BINS - 1)] += 1;
        }
        Self {
            mean: mean.clamp(min, max),
            stderr: (var / n as f64).sqrt(),
            n,
            min,
            max,
            histogram: Histogram { lo: min, hi: max, counts },
            seed,
            protocol_violations,
        }
    }
}
