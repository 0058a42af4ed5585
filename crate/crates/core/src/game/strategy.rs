//! Strategies: a greedy player that reads the DPP solution and simple
//! baselines used to bracket the game value.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::amvf::{CGrid, Operator, OperatorEval};
use crate::domain::Domain;
use crate::dpp::SpaceTimeSolution;
use crate::error::{Error, Result};
use crate::field::{SamplingSpec, Sampler, ScalarField};
use crate::game::{uniform_in_ball, Role, RoundContext};
use crate::params::Params;

/// Per-episode decision maker for one role.
pub trait Player {
    /// As mover: `true` keeps the position for this round.
    fn stay_or_play(&mut self, ctx: &RoundContext) -> bool;
    /// As the opponent of the mover: `c` in `[m_eps, M_eps]`.
    fn pick_c(&mut self, ctx: &RoundContext) -> f64;
    /// As mover after the alpha coin: a point of `B_{eps^2 c^(1-alpha)}(x)`.
    fn pick_small_ball_point(&mut self, ctx: &RoundContext, c: f64) -> Vec<f64>;
    /// After winning the tug coin: a point of `B_{gamma eps c^(-alpha/2)}(x)`.
    fn pick_tug_point(&mut self, ctx: &RoundContext, c: f64) -> Vec<f64>;
}

/// Factory of per-episode players. `rng` is a stream reserved for the
/// player; game coins come from a separate stream.
pub trait Strategy: Sync {
    fn name(&self) -> &str;
    fn player(&self, role: Role, rng: ChaCha8Rng) -> Box<dyn Player + '_>;
}

/// Never stays, draws `c` log-uniformly and points uniformly.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformRandom;

struct RandomPlayer {
    rng: ChaCha8Rng,
}

impl Player for RandomPlayer {
    fn stay_or_play(&mut self, _: &RoundContext) -> bool {
        false
    }
    fn pick_c(&mut self, ctx: &RoundContext) -> f64 {
        let (m, big_m) = (ctx.params.m_eps, ctx.params.big_m_eps);
        let u: f64 = self.rng.random();
        (m * (big_m / m).powf(u)).clamp(m, big_m)
    }
    fn pick_small_ball_point(&mut self, ctx: &RoundContext, c: f64) -> Vec<f64> {
        uniform_in_ball(&mut self.rng, ctx.x, ctx.params.small_radius(c))
    }
    fn pick_tug_point(&mut self, ctx: &RoundContext, c: f64) -> Vec<f64> {
        uniform_in_ball(&mut self.rng, ctx.x, ctx.params.tug_radius(c))
    }
}

impl Strategy for UniformRandom {
    fn name(&self) -> &str {
        "uniform_random"
    }
    fn player(&self, _: Role, rng: ChaCha8Rng) -> Box<dyn Player + '_> {
        Box::new(RandomPlayer { rng })
    }
}

/// Always stays; when forced to act it keeps the token where it is and
/// picks `c = m_eps`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysStay;

/// Never stays; keeps the token at the ball center and picks the geometric
/// midpoint of `[m_eps, M_eps]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CenterStay;

struct FixedPlayer {
    stay: bool,
    mid_c: bool,
}

impl Player for FixedPlayer {
    fn stay_or_play(&mut self, _: &RoundContext) -> bool {
        self.stay
    }
    fn pick_c(&mut self, ctx: &RoundContext) -> f64 {
        if self.mid_c {
            (ctx.params.m_eps * ctx.params.big_m_eps).sqrt()
        } else {
            ctx.params.m_eps
        }
    }
    fn pick_small_ball_point(&mut self, ctx: &RoundContext, _: f64) -> Vec<f64> {
        ctx.x.to_vec()
    }
    fn pick_tug_point(&mut self, ctx: &RoundContext, _: f64) -> Vec<f64> {
        ctx.x.to_vec()
    }
}

impl Strategy for AlwaysStay {
    fn name(&self) -> &str {
        "always_stay"
    }
    fn player(&self, _: Role, _: ChaCha8Rng) -> Box<dyn Player + '_> {
        Box::new(FixedPlayer { stay: true, mid_c: false })
    }
}

impl Strategy for CenterStay {
    fn name(&self) -> &str {
        "center_stay"
    }
    fn player(&self, _: Role, _: ChaCha8Rng) -> Box<dyn Player + '_> {
        Box::new(FixedPlayer { stay: false, mid_c: true })
    }
}

/// Plays from the DPP solution: the mover stays exactly when the current
/// value beats its branch of the operator, the `c`-chooser takes the
/// opponent-worst `c` of the c-grid, and points are sampled extrema of the
/// next-step field. With `inverted` set it does the opposite of what its role
/// wants and never stays (the worst-sampled-point baseline).
#[derive(Debug, Clone)]
pub struct GreedyStrategy {
    fields: Vec<ScalarField>,
    domain: Domain,
    g: ScalarField,
    op: Operator,
    pub eta: f64,
    inverted: bool,
}

/// Greedy strategy for the game described by `params`, reading `solution`.
pub fn dpp_greedy_strategy(solution: &SpaceTimeSolution, params: &Params, eta: f64) -> Result<GreedyStrategy> {
    if !solution.params().same_problem(params) {
        return Err(Error::ParamsMismatch(format!(
            "solution has (d, p, eps) = ({}, {}, {}), game has ({}, {}, {})",
            solution.params().d,
            solution.params().p,
            solution.params().eps,
            params.d,
            params.p,
            params.eps
        )));
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter("eta must be positive".into()));
    }
    let pr = &solution.problem;
    Ok(GreedyStrategy {
        fields: solution.fields.iter().cloned().map(ScalarField::Lattice).collect(),
        domain: pr.domain.clone(),
        g: pr.g.clone(),
        op: Operator::new(pr.params, CGrid::new(&pr.params, pr.n_c)?).with_sampling(pr.sampling),
        eta,
        inverted: false,
    })
}

/// The worst-sampled-point baseline built on the same solution.
pub fn worst_sampled_point(solution: &SpaceTimeSolution, params: &Params) -> Result<GreedyStrategy> {
    let mut s = dpp_greedy_strategy(solution, params, 1.0)?;
    s.inverted = true;
    Ok(s)
}

impl GreedyStrategy {
    pub fn operator(&self) -> &Operator {
        &self.op
    }

    /// Field read by the round with `rounds_left` rounds to go.
    fn sampler(&self, rounds_left: usize) -> Sampler<'_> {
        let j = rounds_left.saturating_sub(1).min(self.fields.len() - 1);
        Sampler::with_exterior(&self.fields[j], &self.domain, &self.g, self.op.sampling)
    }

    pub fn sampling(&self) -> SamplingSpec {
        self.op.sampling
    }
}

struct GreedyPlayer<'a> {
    s: &'a GreedyStrategy,
    /// Role whose objective this player pursues.
    aim: Role,
    stays: bool,
    cache: Option<(usize, OperatorEval)>,
}

impl GreedyPlayer<'_> {
    fn eval(&mut self, ctx: &RoundContext) -> Option<OperatorEval> {
        if let Some((k, ev)) = self.cache {
            if k == ctx.k {
                return Some(ev);
            }
        }
        let ev = self.s.op.eval(&self.s.sampler(ctx.rounds_left), ctx.x).ok()?;
        self.cache = Some((ctx.k, ev));
        Some(ev)
    }

    fn extreme(&self, ctx: &RoundContext, r: f64) -> Vec<f64> {
        let maximize = self.aim == Role::I;
        match self.s.sampler(ctx.rounds_left).extreme_point(ctx.x, r, maximize) {
            Ok((y, _)) => y,
            Err(_) => ctx.x.to_vec(),
        }
    }
}

impl Player for GreedyPlayer<'_> {
    fn stay_or_play(&mut self, ctx: &RoundContext) -> bool {
        if !self.stays {
            return false;
        }
        match (self.eval(ctx), self.aim) {
            (Some(ev), Role::I) => ev.center > ev.first_inner,
            (Some(ev), Role::II) => ev.center < ev.second_inner,
            (None, _) => false,
        }
    }

    fn pick_c(&mut self, ctx: &RoundContext) -> f64 {
        let nodes = self.s.op.cgrid.nodes();
        match (self.eval(ctx), self.aim) {
            // the mover is II: maximize alpha inf + (1 - alpha) M
            (Some(ev), Role::I) => nodes[ev.second_c],
            // the mover is I: minimize alpha sup + (1 - alpha) M
            (Some(ev), Role::II) => nodes[ev.first_c],
            (None, _) => nodes[0],
        }
    }

    fn pick_small_ball_point(&mut self, ctx: &RoundContext, c: f64) -> Vec<f64> {
        self.extreme(ctx, ctx.params.small_radius(c))
    }

    fn pick_tug_point(&mut self, ctx: &RoundContext, c: f64) -> Vec<f64> {
        self.extreme(ctx, ctx.params.tug_radius(c))
    }
}

impl Strategy for GreedyStrategy {
    fn name(&self) -> &str {
        if self.inverted {
            "worst_sampled_point"
        } else {
            "greedy"
        }
    }

    fn player(&self, role: Role, _: ChaCha8Rng) -> Box<dyn Player + '_> {
        let aim = if self.inverted { role.opponent() } else { role };
        Box::new(GreedyPlayer { s: self, aim, stays: !self.inverted, cache: None })
    }
}
