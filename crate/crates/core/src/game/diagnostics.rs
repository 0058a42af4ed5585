//! Statistical checks on simulated play: martingale drift, branch
//! frequencies and uniformity of the noise step.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dpp::SpaceTimeSolution;
use crate::error::{Error, Result};
use crate::game::{Branch, EpisodeRecord, Role};
use crate::params::Params;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub role: Role,
    pub increments: usize,
    pub mean_increment: f64,
    pub stderr: f64,
    /// Role I: `mean >= -3 stderr`; role II: `mean <= 3 stderr`.
    pub consistent: bool,
}

/// Increments of `M_k = u_eps(x_k, t_k) - eta / 2^k` (role I) or
/// `u_eps(x_k, t_k) + eta / 2^k` (role II) along traced episodes.
pub fn martingale_diagnostic(episodes: &[EpisodeRecord], solution: &SpaceTimeSolution, eta: f64, role: Role) -> Result<MartingaleReport> {
    let sign = match role {
        Role::I => -1.0,
        Role::II => 1.0,
    };
    let params = solution.params();
    let mut incs = Vec::new();
    for ep in episodes {
        let trace = ep.trace.as_ref().ok_or(Error::Untraced)?;
        let total = params.steps_to(ep.t0);
        if total > solution.steps() {
            return Err(Error::InvalidParameter("episode starts beyond the solved horizon".into()));
        }
        let m: Vec<f64> = trace
            .iter()
            .map(|row| {
                let j = total - row.k;
                solution.value_at_step(j, &row.x) + sign * eta / 2f64.powi(row.k as i32)
            })
            .collect();
        incs.extend(m.windows(2).map(|w| w[1] - w[0]));
    }
    let n = incs.len();
    if n < 2 {
        return Err(Error::InvalidParameter("too few increments".into()));
    }
    let mean = incs.iter().sum::<f64>() / n as f64;
    let var = incs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let stderr = (var / n as f64).sqrt();
    let consistent = match role {
        Role::I => mean >= -3.0 * stderr,
        Role::II => mean <= 3.0 * stderr,
    };
    Ok(MartingaleReport { role, increments: n, mean_increment: mean, stderr, consistent })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchFrequencies {
    /// Rounds in which play was triggered.
    pub played: usize,
    pub stays: usize,
    /// Counts of mover-pick, tug-I, tug-II, noise.
    pub counts: [usize; 4],
    /// `alpha, (1-alpha) beta / 2, (1-alpha) beta / 2, (1-alpha)(1-beta)`.
    pub expected: [f64; 4],
    /// `|count - n q| / sqrt(n q (1 - q))` per branch.
    pub z_scores: [f64; 4],
    pub within_3_sigma: bool,
}

pub fn expected_branch_law(params: &Params) -> [f64; 4] {
    let (a, b) = (params.alpha, params.beta);
    [a, (1.0 - a) * b / 2.0, (1.0 - a) * b / 2.0, (1.0 - a) * (1.0 - b)]
}

pub fn branch_frequencies(episodes: &[EpisodeRecord], params: &Params) -> Result<BranchFrequencies> {
    let mut counts = [0usize; 4];
    let mut stays = 0;
    for ep in episodes {
        let trace = ep.trace.as_ref().ok_or(Error::Untraced)?;
        for row in trace {
            match row.branch {
                Some(Branch::Stay) => stays += 1,
                Some(Branch::MoverPick) => counts[0] += 1,
                Some(Branch::TugI) => counts[1] += 1,
                Some(Branch::TugII) => counts[2] += 1,
                Some(Branch::Noise) => counts[3] += 1,
                None => {}
            }
        }
    }
    let played: usize = counts.iter().sum();
    let expected = expected_branch_law(params);
    let mut z_scores = [0.0; 4];
    for i in 0..4 {
        let nq = played as f64 * expected[i];
        let sd = (nq * (1.0 - expected[i])).sqrt();
        z_scores[i] = if sd > 0.0 { (counts[i] as f64 - nq).abs() / sd } else { (counts[i] as f64 - nq).abs() };
    }
    let within_3_sigma = z_scores.iter().all(|&z| z <= 3.0);
    Ok(BranchFrequencies { played, stays, counts, expected, z_scores, within_3_sigma })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub bins: usize,
    pub samples: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Pearson test that `samples` are uniform on `[0, 1]`.
pub fn chi_square_uniform(samples: &[f64], bins: usize) -> Result<ChiSquareReport> {
    if bins < 2 || samples.len() < 5 * bins {
        return Err(Error::InvalidParameter("need at least two bins and five samples per bin".into()));
    }
    let mut counts = vec![0usize; bins];
    for &s in samples {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidParameter(format!("sample {s} outside [0, 1]")));
        }
        counts[((s * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let e = samples.len() as f64 / bins as f64;
    let statistic: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let dist = ChiSquared::new((bins - 1) as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(ChiSquareReport { bins, samples: samples.len(), statistic, p_value: 1.0 - dist.cdf(statistic) })
}

/// Maps noise moves from traced episodes to `[0, 1]`: the signed offset in
/// one dimension, the volume fraction `(|y - x| / r)^d` otherwise. Needs the
/// radius of each move, so it only applies to runs with a fixed `c`.
pub fn noise_uniform_samples(episodes: &[EpisodeRecord], radius: f64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for ep in episodes {
        let trace = ep.trace.as_ref().ok_or(Error::Untraced)?;
        for w in trace.windows(2) {
            if w[0].branch != Some(Branch::Noise) {
                continue;
            }
            let d = w[0].x.len();
            if d == 1 {
                out.push(((w[1].x[0] - w[0].x[0]) / radius + 1.0) / 2.0);
            } else {
                let n = w[0].x.iter().zip(&w[1].x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                out.push((n / radius).powi(d as i32).min(1.0));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::dpp::{solve_bounded, DirichletProblem};
    use crate::exec::Execution;
    use crate::field::ScalarField;
    use crate::functions::TestFunction;
    use crate::game::strategy::{CenterStay, UniformRandom};
    use crate::game::{CoinOverride, Game};

    fn constant_solution() -> SpaceTimeSolution {
        let params = Params::new(1, 3.0, 0.3).unwrap();
        let k = ScalarField::Analytic(TestFunction::Constant { value: 0.5 });
        let pr = DirichletProblem::new(Domain::interval(-1.0, 1.0), k.clone(), k, 0.3, params).unwrap().with_h(0.05).unwrap();
        solve_bounded(&pr).unwrap()
    }

    #[test]
    fn constant_field_increments_are_the_slack() {
        let sol = constant_solution();
        let game = Game::from_problem(&sol.problem);
        let eps = game.run_episodes(&[0.0], 0.3, &UniformRandom, &UniformRandom, 20, 9, true, Execution::Sequential).unwrap();
        let eta = 1e-3;
        // M_{k+1} - M_k = eta / 2^{k+1} for role I
        let rep = martingale_diagnostic(&eps[..1], &sol, eta, Role::I).unwrap();
        let rounds = eps[0].rounds;
        let expect: f64 = (0..rounds).map(|k| eta / 2f64.powi(k as i32 + 1)).sum::<f64>() / rounds as f64;
        assert!((rep.mean_increment - expect).abs() < 1e-12);
        assert!(rep.consistent);
        let rep2 = martingale_diagnostic(&eps, &sol, eta, Role::II).unwrap();
        assert!(rep2.mean_increment < 0.0 && rep2.consistent);
        let untraced = game.run_episodes(&[0.0], 0.3, &UniformRandom, &UniformRandom, 2, 9, false, Execution::Sequential).unwrap();
        assert!(matches!(martingale_diagnostic(&untraced, &sol, eta, Role::I), Err(Error::Untraced)));
    }

    #[test]
    fn branch_law_small_sample() {
        let params = Params::new(1, 3.0, 0.3).unwrap();
        let mut game = Game::from_problem(&constant_solution().problem);
        game.whole_space = true;
        let eps = game.run_episodes(&[0.0], 0.45, &CenterStay, &CenterStay, 2000, 4, true, Execution::Parallel).unwrap();
        let f = branch_frequencies(&eps, &params).unwrap();
        assert_eq!(f.played, 2000 * 10);
        assert_eq!(f.stays, 0);
        assert!(f.within_3_sigma, "{f:?}");
    }

    #[test]
    fn noise_step_is_uniform() {
        let mut game = Game::from_problem(&constant_solution().problem);
        game.whole_space = true;
        game.coins = CoinOverride { alpha: Some(false), beta: Some(false) };
        let eps = game.run_episodes(&[0.0], 0.45, &CenterStay, &CenterStay, 1000, 8, true, Execution::Parallel).unwrap();
        let r = game.params.tug_radius((game.params.m_eps * game.params.big_m_eps).sqrt());
        let s = noise_uniform_samples(&eps, r).unwrap();
        assert_eq!(s.len(), 10000);
        let rep = chi_square_uniform(&s, 20).unwrap();
        assert!(rep.p_value > 0.01, "{rep:?}");
        // a clearly non-uniform sample fails
        let skew: Vec<f64> = s.iter().map(|v| v * v).collect();
        assert!(chi_square_uniform(&skew, 20).unwrap().p_value < 0.01);
    }
}
