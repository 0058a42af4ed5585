//! Runs a validated configuration and writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use amvf_core::amvf::{expansion_ladder, ExpansionReport};
use amvf_core::dpp::barrier::{build_barrier, check_barrier_ordering, BarrierKind, BarrierSpec, OrderingReport};
use amvf_core::dpp::checks::{interpolation_tolerance, regularity_report, sup_bound_report, RegularityReport, SupBoundReport};
use amvf_core::dpp::{solve_bounded_with, solve_whole_space_with, DirichletProblem, SpaceTimeSolution, WholeSpaceProblem};
use amvf_core::exec::Execution;
use amvf_core::field::ScalarField;
use amvf_core::game::strategy::{dpp_greedy_strategy, worst_sampled_point, AlwaysStay, CenterStay, Strategy, UniformRandom};
use amvf_core::game::{Game, ValueEstimate};
use serde::Serialize;

use crate::config::{ConfigError, ExperimentConfig, Kind, StrategyName};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write output directory {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error("numerical failure: {0}")]
    Numerical(#[from] amvf_core::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Output { .. } => 2,
            RunError::Numerical(_) => 3,
        }
    }
}

/// Problem built from the config before any computation starts.
enum Prepared {
    Expansion,
    Bounded(DirichletProblem),
    WholeSpace(WholeSpaceProblem),
}

fn invalid(e: amvf_core::Error) -> RunError {
    RunError::Config(ConfigError::Invalid(e.to_string()))
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, RunError> {
    cfg.validate()?;
    Ok(match cfg.kind {
        Kind::Expansion => Prepared::Expansion,
        Kind::Dirichlet | Kind::GameValue | Kind::PropertySuite => {
            let params = cfg.base_params()?;
            let mut pr = DirichletProblem::new(
                cfg.domain()?.clone(),
                ScalarField::Analytic(cfg.function("u0")?.clone()),
                ScalarField::Analytic(cfg.function("g")?.clone()),
                cfg.horizon()?,
                params,
            )
            .map_err(invalid)?
            .with_n_c(cfg.run.n_c)
            .map_err(invalid)?;
            if let Some(h) = cfg.run.h {
                pr = pr.with_h(h).map_err(invalid)?;
            }
            Prepared::Bounded(pr)
        }
        Kind::WholeSpace => {
            let ws = WholeSpaceProblem {
                u0: ScalarField::Analytic(cfg.function("u0")?.clone()),
                decay_constant: cfg.run.decay_constant.unwrap_or(1.0),
                eta: Some(cfg.run.eta),
                horizon: cfg.horizon()?,
                params: cfg.base_params()?,
                h: cfg.run.h,
                n_c: cfg.run.n_c,
            };
            ws.truncate().map_err(invalid)?;
            Prepared::WholeSpace(ws)
        }
    })
}

/// Checks the config and the problem it describes without running it.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), RunError> {
    prepare(cfg).map(|_| ())
}

/// Default output location: `$AMVF_OUTPUT_ROOT/<kind>-<hash prefix>`.
pub fn output_dir(cfg: &ExperimentConfig, root: Option<&Path>) -> PathBuf {
    match &cfg.run.output_dir {
        Some(d) => d.clone(),
        None => root.unwrap_or(Path::new("runs")).join(format!("{}-{}", cfg.kind.name(), &cfg.hash()[..12])),
    }
}

struct Writer {
    dir: PathBuf,
    hash: String,
    files: Vec<PathBuf>,
}

impl Writer {
    fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<(), RunError> {
        #[derive(Serialize)]
        struct Tagged<'a, T> {
            config_hash: &'a str,
            #[serde(flatten)]
            body: &'a T,
        }
        let text = serde_json::to_string_pretty(&Tagged { config_hash: &self.hash, body }).map_err(|e| amvf_core::Error::Format(e.to_string()))?;
        self.write(name, text.as_bytes())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| RunError::Output { path: path.clone(), source })?;
        self.files.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt = |e: csv::Error| amvf_core::Error::Format(e.to_string());
        w.write_record(header).map_err(fmt)?;
        for r in rows {
            w.write_record(&r).map_err(fmt)?;
        }
        let bytes = w.into_inner().map_err(|e| amvf_core::Error::Format(e.to_string()))?;
        self.write(name, &bytes)
    }
}

#[derive(Serialize)]
struct Probe {
    x: Vec<f64>,
    t: f64,
    value: f64,
}

#[derive(Serialize)]
struct DppSummary<'a> {
    problem_hash: &'a str,
    h: f64,
    tau: f64,
    steps: usize,
    truncation_eta: Option<f64>,
    box_half_width: Option<f64>,
    probe: Probe,
    sup_norms: &'a [f64],
    fallbacks: &'a [usize],
}

fn summarize<'a>(sol: &'a SpaceTimeSolution, cfg: &ExperimentConfig) -> Result<DppSummary<'a>, RunError> {
    let x = cfg.point()?;
    let t = cfg.probe_time()?;
    let value = sol.value_at(&x, t)?;
    Ok(DppSummary {
        problem_hash: &sol.problem_hash,
        h: sol.grid().h,
        tau: sol.params().tau,
        steps: sol.steps(),
        truncation_eta: sol.truncation_eta,
        box_half_width: sol.truncation_eta.map(|_| sol.problem.domain.bounding_box().1[0]),
        probe: Probe { x, t, value },
        sup_norms: &sol.sup_norms,
        fallbacks: &sol.fallbacks,
    })
}

fn write_solution(w: &mut Writer, sol: &SpaceTimeSolution, cfg: &ExperimentConfig) -> Result<(), RunError> {
    let rows = sol
        .times
        .iter()
        .zip(&sol.sup_norms)
        .enumerate()
        .map(|(j, (t, n))| vec![j.to_string(), t.to_string(), n.to_string()]);
    w.csv("sup_norms.csv", &["step", "time", "sup_norm"], rows)?;
    w.json("dpp_summary.json", &summarize(sol, cfg)?)?;
    if cfg.run.export_stride > 0 {
        let files = sol.export(&w.dir.join("steps"), cfg.run.export_stride)?;
        w.files.extend(files);
    }
    Ok(())
}

#[derive(Serialize)]
struct GameSummary {
    strategy_i: String,
    strategy_ii: String,
    x0: Vec<f64>,
    t0: f64,
    dpp_value: f64,
    interpolation_tolerance: f64,
    estimate: ValueEstimate,
}

#[derive(Serialize)]
struct PropertySummary {
    sup_bound: SupBoundReport,
    lower_barrier: OrderingReport,
    upper_barrier: OrderingReport,
    regularity: RegularityReport,
    all_passed: bool,
}

fn strategy<'a>(name: &StrategyName, greedy: &'a dyn Strategy, worst: &'a dyn Strategy) -> &'a dyn Strategy {
    match name {
        StrategyName::Greedy => greedy,
        StrategyName::UniformRandom => &UniformRandom,
        StrategyName::AlwaysStay => &AlwaysStay,
        StrategyName::CenterStay => &CenterStay,
        StrategyName::WorstSampledPoint => worst,
    }
}

/// Runs the experiment into `dir` and returns the files written, manifest
/// excluded.
pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    let prepared = prepare(cfg)?;
    fs::create_dir_all(dir).map_err(|source| RunError::Output { path: dir.to_path_buf(), source })?;
    let mut w = Writer { dir: dir.to_path_buf(), hash: cfg.hash(), files: Vec::new() };
    let exec = Execution::default();
    let threads = cfg.run.threads;
    match prepared {
        Prepared::Expansion => {
            let phi = cfg.function("phi")?;
            let (x, base, ladder) = (cfg.point()?, cfg.base_params()?, cfg.ladder()?);
            let rep: ExpansionReport = amvf_core::exec::with_threads(threads, || expansion_ladder(phi, &x, &base, &ladder, cfg.run.n_c))??;
            let mut bytes = Vec::new();
            rep.write_csv(&mut bytes)?;
            w.write("expansion_report.csv", &bytes)?;
            w.json("expansion_report.json", &rep)?;
        }
        Prepared::Bounded(pr) => {
            let sol = amvf_core::exec::with_threads(threads, || solve_bounded_with(&pr, exec))??;
            write_solution(&mut w, &sol, cfg)?;
            match cfg.kind {
                Kind::GameValue => {
                    let x0 = cfg.point()?;
                    let t0 = cfg.probe_time()?;
                    let greedy = dpp_greedy_strategy(&sol, &pr.params, cfg.run.eta)?;
                    let worst = worst_sampled_point(&sol, &pr.params)?;
                    let s1 = strategy(&cfg.run.strategy_i, &greedy, &worst);
                    let s2 = strategy(&cfg.run.strategy_ii, &greedy, &worst);
                    let game = Game::from_problem(&pr);
                    let estimate = amvf_core::exec::with_threads(threads, || game.estimate_value(&x0, t0, s1, s2, cfg.run.n_episodes, cfg.run.seed, exec))??;
                    let summary = GameSummary {
                        strategy_i: s1.name().to_string(),
                        strategy_ii: s2.name().to_string(),
                        dpp_value: sol.value_at(&x0, t0)?,
                        interpolation_tolerance: interpolation_tolerance(&sol),
                        x0,
                        t0,
                        estimate,
                    };
                    w.json("game_value.json", &summary)?;
                }
                Kind::PropertySuite => {
                    let anchor = cfg.point()?;
                    let spec = |kind| BarrierSpec { kind, anchor: anchor.clone(), eta: cfg.run.eta, exterior_radius: None, direction: None, amplitude: None };
                    let lower = build_barrier(&spec(BarrierKind::InitialLower), &pr)?;
                    let upper = build_barrier(&spec(BarrierKind::InitialUpper), &pr)?;
                    let scale = sol.sup_norms[0].max(1.0);
                    let lower_barrier = check_barrier_ordering(&sol, &lower, lower.sense(), 1e-6 * scale);
                    let upper_barrier = check_barrier_ordering(&sol, &upper, upper.sense(), 1e-6 * scale);
                    let mut shift = vec![0.0; pr.params.d];
                    shift[0] = sol.grid().h;
                    let regularity = regularity_report(&sol, &shift, 1.0)?;
                    let sup_bound = sup_bound_report(&sol, 1e-12);
                    let all_passed = sup_bound.violations == 0 && lower_barrier.violations == 0 && upper_barrier.violations == 0;
                    w.json("property_suite.json", &PropertySummary { sup_bound, lower_barrier, upper_barrier, regularity, all_passed })?;
                }
                _ => {}
            }
        }
        Prepared::WholeSpace(ws) => {
            let sol = amvf_core::exec::with_threads(threads, || solve_whole_space_with(&ws, exec))??;
            write_solution(&mut w, &sol, cfg)?;
            let mut shift = vec![0.0; ws.params.d];
            shift[0] = sol.grid().h;
            w.json("regularity.json", &regularity_report(&sol, &shift, 1.0)?)?;
        }
    }
    Ok(w.files)
}
