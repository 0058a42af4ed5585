//! Explicit time stepping `u^{j+1} = A_eps[u^j]` for Dirichlet problems on
//! bounded domains and for the truncated whole-space problem.

pub mod barrier;
pub mod checks;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::amvf::{CGrid, Operator};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::{SamplingSpec, Sampler, ScalarField};
use crate::functions::TestFunction;
use crate::grid::{Grid, LatticeField};
use crate::params::Params;

fn default_n_c() -> usize {
    CGrid::DEFAULT_COUNT
}

/// Initial datum `u0` on the domain, time-independent exterior datum `g`,
/// horizon and discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletProblem {
    pub domain: Domain,
    pub u0: ScalarField,
    pub g: ScalarField,
    pub horizon: f64,
    pub params: Params,
    pub h: f64,
    #[serde(default = "default_n_c")]
    pub n_c: usize,
    #[serde(default)]
    pub sampling: SamplingSpec,
}

impl DirichletProblem {
    /// Uses the default spacing `h = eps^2 m^(1-alpha) / 4`.
    pub fn new(domain: Domain, u0: ScalarField, g: ScalarField, horizon: f64, params: Params) -> Result<Self> {
        let pr = Self { domain, u0, g, horizon, params, h: params.default_h(), n_c: default_n_c(), sampling: SamplingSpec::default() };
        pr.validate()?;
        Ok(pr)
    }

    pub fn with_h(mut self, h: f64) -> Result<Self> {
        self.h = h;
        self.validate()?;
        Ok(self)
    }

    pub fn with_n_c(mut self, n_c: usize) -> Result<Self> {
        self.n_c = n_c;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.params.d;
        if self.domain.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.domain.dim() });
        }
        for f in [&self.u0, &self.g] {
            let fd = match f {
                ScalarField::Analytic(t) => t.dim(),
                ScalarField::Lattice(l) => Some(l.grid.dim()),
            };
            if let Some(fd) = fd {
                if fd != d {
                    return Err(Error::DimensionMismatch { expected: d, got: fd });
                }
            }
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon must be finite and nonnegative, got {}", self.horizon)));
        }
        if !(self.h > 0.0) {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {}", self.h)));
        }
        if self.h > self.params.band_width {
            return Err(Error::GridTooCoarse { h: self.h, band: self.params.band_width });
        }
        if self.n_c == 0 {
            return Err(Error::EmptyCGrid);
        }
        Ok(())
    }

    /// Lattice covering the domain plus every ball the operator can reach.
    pub fn grid(&self) -> Result<Grid> {
        let (lo, hi) = self.domain.bounding_box();
        let pad = self.params.reach + self.h * (1.0 + (self.params.d as f64).sqrt());
        let lo: Vec<f64> = lo.iter().map(|v| v - pad).collect();
        let hi: Vec<f64> = hi.iter().map(|v| v + pad).collect();
        Grid::covering(&lo, &hi, self.h)
    }

    pub fn operator(&self) -> Result<Operator> {
        Ok(Operator::new(self.params, CGrid::new(&self.params, self.n_c)?).with_sampling(self.sampling))
    }

    /// `u0` at nodes of the domain, `g` elsewhere.
    pub fn initial_field(&self, grid: &Grid) -> LatticeField {
        LatticeField::sample(grid.clone(), |x| if self.domain.contains(x) { self.u0.value(x) } else { self.g.value(x) })
    }

    pub fn steps(&self) -> usize {
        self.params.steps_to(self.horizon)
    }

    /// Hex SHA-256 of the canonical JSON description.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("problem serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One explicit step on a fixed lattice.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    problem: &'a DirichletProblem,
    op: Operator,
    grid: Grid,
    interior: Vec<usize>,
    exterior: Vec<(usize, f64)>,
    exec: Execution,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a DirichletProblem) -> Result<Self> {
        problem.validate()?;
        let grid = problem.grid()?;
        let mut interior = Vec::new();
        let mut exterior = Vec::new();
        for i in 0..grid.len() {
            let x = grid.node(i);
            if problem.domain.contains(&x) {
                interior.push(i);
            } else {
                exterior.push((i, problem.g.value(&x)));
            }
        }
        Ok(Self { problem, op: problem.operator()?, grid, interior, exterior, exec: Execution::default() })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    /// Applies the operator at every interior node and resets exterior nodes
    /// to `g`. Returns the new field and the number of sub-resolution balls.
    pub fn step(&self, u: &LatticeField, step_index: usize) -> Result<(LatticeField, usize)> {
        if u.grid != self.grid {
            return Err(Error::InvalidParameter("field lattice does not match the problem lattice".into()));
        }
        let field = ScalarField::Lattice(u.clone());
        let sampler = Sampler::with_exterior(&field, &self.problem.domain, &self.problem.g, self.op.sampling);
        let evals = self.exec.try_map(self.interior.len(), |k| self.op.eval(&sampler, &self.grid.node(self.interior[k])))?;
        let mut values = u.values.clone();
        let mut fallbacks = 0;
        for (&i, ev) in self.interior.iter().zip(&evals) {
            if !ev.value.is_finite() {
                return Err(Error::NonFinite { step: step_index, node: i });
            }
            values[i] = ev.value;
            fallbacks += ev.fallbacks;
        }
        for &(i, gv) in &self.exterior {
            values[i] = gv;
        }
        Ok((LatticeField { grid: self.grid.clone(), values }, fallbacks))
    }
}

/// One explicit step with default execution.
pub fn dpp_step(u: &LatticeField, problem: &DirichletProblem) -> Result<LatticeField> {
    Ok(Stepper::new(problem)?.step(u, 0)?.0)
}

/// Lattice values at `t_j = j tau`, `j = 0..=J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeSolution {
    pub problem: DirichletProblem,
    pub problem_hash: String,
    pub times: Vec<f64>,
    pub fields: Vec<LatticeField>,
    pub sup_norms: Vec<f64>,
    /// Sub-resolution balls per step (0 for the initial field).
    pub fallbacks: Vec<usize>,
    /// A-priori truncation error of a whole-space run.
    pub truncation_eta: Option<f64>,
}

impl SpaceTimeSolution {
    pub fn params(&self) -> &Params {
        &self.problem.params
    }

    pub fn steps(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn grid(&self) -> &Grid {
        &self.fields[0].grid
    }

    /// Field value at step `j`, reading `g` outside the domain.
    pub fn value_at_step(&self, j: usize, x: &[f64]) -> f64 {
        if self.problem.domain.contains(x) {
            self.fields[j].interpolate(x)
        } else {
            self.problem.g.value(x)
        }
    }

    /// The scheme's value `u_eps(x, t) = u^{ceil(t / tau)}(x)`.
    pub fn value_at(&self, x: &[f64], t: f64) -> Result<f64> {
        let j = self.params().steps_to(t);
        if j > self.steps() {
            return Err(Error::InvalidParameter(format!("time {t} beyond the recorded horizon")));
        }
        Ok(self.value_at_step(j, x))
    }

    /// Piecewise linear interpolant in time between mesh values.
    pub fn interpolant_linear(&self, x: &[f64], t: f64) -> f64 {
        let tau = self.params().tau;
        let s = (t / tau).clamp(0.0, self.steps() as f64);
        let k = (s.floor() as usize).min(self.steps().saturating_sub(1));
        let w = s - k as f64;
        let a = self.value_at_step(k, x);
        if self.steps() == 0 || w == 0.0 {
            return a;
        }
        (1.0 - w) * a + w * self.value_at_step(k + 1, x)
    }

    /// Left-constant interpolant `u^{floor(t / tau)}(x)`.
    pub fn interpolant_left_constant(&self, x: &[f64], t: f64) -> f64 {
        let tau = self.params().tau;
        let k = ((t / tau).max(0.0).floor() as usize).min(self.steps());
        self.value_at_step(k, x)
    }

    /// Writes `step_NNNNN.csv` for every `stride`-th step (and the last) plus
    /// `manifest.json`. Returns the written paths.
    pub fn export(&self, dir: &Path, stride: usize) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let stride = stride.max(1);
        let mut files = Vec::new();
        let mut steps = Vec::new();
        for j in 0..=self.steps() {
            if j % stride == 0 || j == self.steps() {
                let path = dir.join(format!("step_{j:05}.csv"));
                self.fields[j].write_csv(fs::File::create(&path)?)?;
                files.push(path);
                steps.push(j);
            }
        }
        let manifest = Manifest {
            params: self.problem.params,
            problem: &self.problem,
            problem_hash: &self.problem_hash,
            times: &self.times,
            sup_norms: &self.sup_norms,
            fallbacks: &self.fallbacks,
            exported_steps: steps,
            stride,
            truncation_eta: self.truncation_eta,
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        files.push(path);
        Ok(files)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    params: Params,
    problem: &'a DirichletProblem,
    problem_hash: &'a str,
    times: &'a [f64],
    sup_norms: &'a [f64],
    fallbacks: &'a [usize],
    exported_steps: Vec<usize>,
    stride: usize,
    truncation_eta: Option<f64>,
}

pub fn solve_bounded(problem: &DirichletProblem) -> Result<SpaceTimeSolution> {
    solve_bounded_with(problem, Execution::default())
}

pub fn solve_bounded_with(problem: &DirichletProblem, exec: Execution) -> Result<SpaceTimeSolution> {
    let stepper = Stepper::new(problem)?.with_execution(exec);
    let j_max = problem.steps();
    let mut u = problem.initial_field(stepper.grid());
    if let Some(i) = u.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: 0, node: i });
    }
    let mut times = vec![0.0];
    let mut sup_norms = vec![u.sup_norm()];
    let mut fallbacks = vec![0];
    let mut fields = Vec::with_capacity(j_max + 1);
    for j in 1..=j_max {
        let (next, fb) = stepper.step(&u, j)?;
        fields.push(std::mem::replace(&mut u, next));
        times.push(j as f64 * problem.params.tau);
        sup_norms.push(u.sup_norm());
        fallbacks.push(fb);
    }
    fields.push(u);
    Ok(SpaceTimeSolution { problem_hash: problem.hash(), problem: problem.clone(), times, fields, sup_norms, fallbacks, truncation_eta: None })
}

/// Half-width `K = ln(C e^{L T} / eta)` making the exponential envelope at
/// most `eta` on the box boundary up to time `T`.
pub fn truncation_half_width(decay_constant: f64, rate: f64, horizon: f64, eta: f64) -> Result<f64> {
    if !(decay_constant > 0.0) || !(eta > 0.0) {
        return Err(Error::InvalidParameter("decay constant and eta must be positive".into()));
    }
    Ok((decay_constant * (rate * horizon).exp() / eta).ln().max(0.0))
}

/// Whole-space problem truncated to a box with zero exterior datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WholeSpaceProblem {
    pub u0: ScalarField,
    /// `C` in the envelope `|u0(x)| <= C e^{-|x|}`.
    pub decay_constant: f64,
    /// Truncation tolerance; defaults to `1e-3 ||u0||`.
    pub eta: Option<f64>,
    pub horizon: f64,
    pub params: Params,
    pub h: Option<f64>,
    #[serde(default = "default_n_c")]
    pub n_c: usize,
}

impl WholeSpaceProblem {
    /// Bounded problem on `[-K, K]^d` and the tolerance `eta` used.
    pub fn truncate(&self) -> Result<(DirichletProblem, f64)> {
        let d = self.params.d;
        let h = self.h.unwrap_or(self.params.default_h());
        // sup norm and envelope check on a probe lattice reaching past the box
        let l = self.params.decay_rate();
        let probe_k = |eta: f64| truncation_half_width(self.decay_constant, l, self.horizon, eta);
        let sup = {
            let k0 = probe_k(1e-3)?.max(1.0);
            let per_axis = 200_000f64.powf(1.0 / d as f64);
            let g = Grid::covering(&vec![-k0; d], &vec![k0; d], h.max(2.0 * k0 / per_axis))?;
            (0..g.len()).map(|i| self.u0.value(&g.node(i)).abs()).fold(0.0, f64::max)
        };
        let eta = match self.eta {
            Some(e) => e,
            None if sup > 0.0 => 1e-3 * sup,
            None => 1e-3,
        };
        let k = probe_k(eta)?;
        let domain = Domain::cube(d, k);
        let problem = DirichletProblem {
            domain,
            u0: self.u0.clone(),
            g: ScalarField::Analytic(TestFunction::Constant { value: 0.0 }),
            horizon: self.horizon,
            params: self.params,
            h,
            n_c: self.n_c,
            sampling: SamplingSpec::default(),
        };
        problem.validate()?;
        let grid = problem.grid()?;
        for i in 0..grid.len() {
            let x = grid.node(i);
            let v = self.u0.value(&x).abs();
            let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            let bound = self.decay_constant * (-r).exp();
            if v > bound * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::DecayViolation { x, value: v, bound });
            }
        }
        Ok((problem, eta))
    }
}

pub fn solve_whole_space(problem: &WholeSpaceProblem) -> Result<SpaceTimeSolution> {
    solve_whole_space_with(problem, Execution::default())
}

pub fn solve_whole_space_with(problem: &WholeSpaceProblem, exec: Execution) -> Result<SpaceTimeSolution> {
    let (bounded, eta) = problem.truncate()?;
    let mut sol = solve_bounded_with(&bounded, exec)?;
    sol.truncation_eta = Some(eta);
    Ok(sol)
}
