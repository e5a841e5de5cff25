//! The subcommands. Each returns its rendered output and whether any
//! analysis block failed.

use std::time::Instant;

use oqho_core::classical::{
    classical_quadform_variance, classical_rs_rate_paper, classical_rs_rate_sde,
    classical_theta_limit, mc_quadform_variance, mc_rs_rate, mc_stationary_stats, simulate,
};
use oqho_core::cumulants::{cumulant_rate, delta_table, factorial};
use oqho_core::gaussian::gramian_steady;
use oqho_core::large_dev::{BoundMethod, DeviationAnalysis};
use oqho_core::matfun::{expm, frobenius_inner, to_complex};
use oqho_core::quartic::{quartic_rate, quartic_report};
use serde::Serialize;

use crate::config::{fixture_digest, EpsGrid, McSettings, ModelSource, Resolved};
use crate::error::CliError;
use crate::output::{complex_rows, format_float, real, rows, to_csv, to_json, ComplexRows, Real, Rows};

/// Rendered command output.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    /// Analysis blocks that failed while others succeeded.
    pub failures: Vec<String>,
}

impl Output {
    fn complete(text: String) -> Self {
        Self { text, failures: Vec::new() }
    }
}

/// A report section that either holds its values or the reason it failed.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Block<T> {
    Done(T),
    Failed { error: String },
}

impl<T> Block<T> {
    fn from_result(result: Result<T, oqho_core::Error>, name: &str, failures: &mut Vec<String>) -> Self {
        match result {
            Ok(v) => Block::Done(v),
            Err(e) => {
                failures.push(format!("{name}: {e}"));
                Block::Failed { error: e.to_string() }
            }
        }
    }
}

#[derive(Debug, Serialize)]
struct ValidateReport {
    valid: bool,
    n: usize,
    m: usize,
    pr_residual: Real,
    abscissa: Real,
    hurwitz: bool,
}

pub fn validate(cfg: &Resolved) -> Result<Output, CliError> {
    let model = &cfg.model;
    model.require_hurwitz().map_err(CliError::ModelInvalid)?;
    Ok(Output::complete(to_json(&ValidateReport {
        valid: true,
        n: model.n(),
        m: model.m(),
        pr_residual: real(model.pr_residual()),
        abscissa: real(model.abscissa()),
        hurwitz: model.is_hurwitz(),
    })))
}

#[derive(Debug, Serialize)]
struct ModelBlock {
    source: String,
    n: usize,
    m: usize,
    pr_residual: Real,
    abscissa: Real,
    hurwitz: bool,
}

#[derive(Debug, Serialize)]
struct SteadyBlock {
    gramian: Rows,
    uncertainty_floor: Real,
}

#[derive(Debug, Serialize)]
struct ThetaRate {
    theta: Real,
    rate: Real,
    below_threshold: bool,
}

#[derive(Debug, Serialize)]
struct QuarticBlock {
    mean_rate: Real,
    variance_rate: Real,
    t_matrix: Rows,
    q_matrix: Rows,
    theta0: Real,
    rates: Vec<ThetaRate>,
    assumption: &'static str,
}

#[derive(Debug, Serialize)]
struct OrderRate {
    order: usize,
    rate: Block<Real>,
}

#[derive(Debug, Serialize)]
struct DeltaChecksum {
    order: usize,
    total: u64,
    expected: u64,
    certified: bool,
}

#[derive(Debug, Serialize)]
struct CumulantBlock {
    rates: Vec<OrderRate>,
    delta_checksums: Vec<DeltaChecksum>,
}

#[derive(Debug, Serialize)]
struct CurveRow {
    epsilon: Real,
    bound_closed: Option<Real>,
    bound_numeric: Option<Real>,
    theta_star: Option<Real>,
}

#[derive(Debug, Serialize)]
struct DeviationBlock {
    mu: Real,
    gamma: Rows,
    alpha: Real,
    shifted_envelope: bool,
    kernel_at_zero: Real,
    f_infnorm: Real,
    theta_limit: Real,
    curve: Vec<CurveRow>,
}

#[derive(Debug, Serialize)]
struct ClassicalRate {
    theta: Real,
    paper: Block<Real>,
    sde: Block<Real>,
}

#[derive(Debug, Serialize)]
struct Estimate {
    value: Real,
    stderr: Real,
    target: Real,
}

#[derive(Debug, Serialize)]
struct McBlock {
    h: Real,
    steps: usize,
    paths: usize,
    seed: u64,
    lag_time: Real,
    cov0_max_z: Real,
    covlag_max_z: Real,
    quadform_var: Estimate,
}

#[derive(Debug, Serialize)]
struct ClassicalBlock {
    quadform_variance: Real,
    quantum_onepoint_variance: Real,
    theta_limit: Real,
    rates: Vec<ClassicalRate>,
    mc: Block<McBlock>,
}

#[derive(Debug, Serialize)]
struct Provenance {
    version: &'static str,
    core_version: &'static str,
    fixture_sha256: Option<String>,
    seed: u64,
    tol: Real,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_clock_seconds: Option<Real>,
}

#[derive(Debug, Serialize)]
struct AnalysisReport {
    model: ModelBlock,
    steady_state: Block<SteadyBlock>,
    quartic: Block<QuarticBlock>,
    cumulants: CumulantBlock,
    deviation: Block<DeviationBlock>,
    classical: Block<ClassicalBlock>,
    provenance: Provenance,
}

/// Default grid from the closed-form domain start `nα` to `4nα`.
fn default_grid(analysis: &DeviationAnalysis) -> EpsGrid {
    let start = analysis.dim() as f64 * analysis.envelope().alpha;
    EpsGrid { min: start, max: 4.0 * start, steps: 31 }
}

fn curve_rows(analysis: &DeviationAnalysis, grid: &[f64], method: BoundMethod) -> Result<Vec<CurveRow>, oqho_core::Error> {
    let curve = analysis.bound_curve(grid, method)?;
    Ok(curve
        .points
        .iter()
        .map(|p| CurveRow {
            epsilon: real(p.epsilon),
            bound_closed: p.closed.map(|c| real(c.bound)),
            bound_numeric: p.numeric.map(|c| real(c.bound)),
            theta_star: p.theta_star().map(real),
        })
        .collect())
}

fn quartic_block(cfg: &Resolved) -> Result<QuarticBlock, oqho_core::Error> {
    let base = quartic_report(&cfg.model, &cfg.weight, 0.0)?;
    let rates = cfg
        .theta_list
        .iter()
        .map(|&theta| {
            Ok(ThetaRate {
                theta: real(theta),
                rate: real(quartic_rate(&cfg.model, &cfg.weight, theta)?),
                below_threshold: theta < base.theta0,
            })
        })
        .collect::<Result<_, oqho_core::Error>>()?;
    Ok(QuarticBlock {
        mean_rate: real(base.mean_rate),
        variance_rate: real(base.variance_rate),
        t_matrix: rows(&base.t_matrix),
        q_matrix: rows(&base.q_matrix),
        theta0: real(base.theta0),
        rates,
        assumption: base.assumption,
    })
}

fn cumulant_block(cfg: &Resolved, failures: &mut Vec<String>) -> CumulantBlock {
    let rates = cfg
        .orders
        .iter()
        .map(|&order| OrderRate {
            order,
            rate: Block::from_result(
                cumulant_rate(&cfg.model, &cfg.weight, order, &cfg.spec).map(real),
                &format!("cumulant rate {order}"),
                failures,
            ),
        })
        .collect();
    let delta_checksums = cfg
        .orders
        .iter()
        .filter_map(|&order| delta_table(order).ok().map(|t| (order, t)))
        .map(|(order, table)| DeltaChecksum {
            order,
            total: table.total(),
            expected: factorial(order - 1),
            certified: table.certify().is_ok(),
        })
        .collect();
    CumulantBlock { rates, delta_checksums }
}

fn deviation_block(cfg: &Resolved) -> Result<DeviationBlock, oqho_core::Error> {
    let analysis = DeviationAnalysis::new(&cfg.model, &cfg.weight)?;
    let grid = cfg.eps_grid.unwrap_or_else(|| default_grid(&analysis));
    let env = analysis.envelope();
    Ok(DeviationBlock {
        mu: real(env.mu),
        gamma: rows(&env.gamma),
        alpha: real(env.alpha),
        shifted_envelope: env.shifted,
        kernel_at_zero: real(analysis.kernel_at_zero()),
        f_infnorm: real(analysis.f_infnorm()),
        theta_limit: real(analysis.theta_limit()),
        curve: curve_rows(&analysis, &grid.values(), BoundMethod::Both)?,
    })
}

fn mc_block(cfg: &Resolved, mc: &McSettings) -> Result<McBlock, oqho_core::Error> {
    let batch = simulate(&cfg.model, mc.h, mc.steps, mc.paths, mc.seed)?;
    let stats = mc_stationary_stats(&batch, mc.steps)?;
    let steady = gramian_steady(&cfg.model)?;
    let target0 = steady.quantum_cov().clone();
    let target_lag = to_complex(&expm(cfg.model.drift(), stats.lag_time)?) * &target0;
    let var = mc_quadform_variance(&batch, &cfg.weight)?;
    let analytic = classical_quadform_variance(&cfg.model, &cfg.weight)?;
    Ok(McBlock {
        h: real(mc.h),
        steps: mc.steps,
        paths: mc.paths,
        seed: mc.seed,
        lag_time: real(stats.lag_time),
        cov0_max_z: real(stats.cov0.max_z_score(&target0)),
        covlag_max_z: real(stats.covlag.max_z_score(&target_lag)),
        quadform_var: Estimate {
            value: real(var.value),
            stderr: real(var.stderr),
            target: real(analytic),
        },
    })
}

fn classical_block(cfg: &Resolved, failures: &mut Vec<String>) -> Result<ClassicalBlock, oqho_core::Error> {
    let (model, pi) = (&cfg.model, &cfg.weight);
    let steady = gramian_steady(model)?;
    let (p, theta, w) = (steady.gramian(), model.theta(), pi.matrix());
    let quantum = 2.0 * frobenius_inner(w, &(p * w * p + theta * w * theta));
    let rates = cfg
        .theta_list
        .iter()
        .map(|&t| ClassicalRate {
            theta: real(t),
            paper: Block::from_result(
                classical_rs_rate_paper(model, pi, t, &cfg.spec).map(real),
                &format!("classical paper rate at {t}"),
                failures,
            ),
            sde: Block::from_result(
                classical_rs_rate_sde(model, pi, t, &cfg.spec).map(real),
                &format!("classical sde rate at {t}"),
                failures,
            ),
        })
        .collect();
    Ok(ClassicalBlock {
        quadform_variance: real(classical_quadform_variance(model, pi)?),
        quantum_onepoint_variance: real(quantum),
        theta_limit: real(classical_theta_limit(model, pi)?),
        rates,
        mc: Block::from_result(mc_block(cfg, &cfg.mc), "monte carlo", failures),
    })
}

pub fn analyze(cfg: &Resolved, timing: bool) -> Result<Output, CliError> {
    let started = Instant::now();
    let model = &cfg.model;
    model.require_hurwitz().map_err(CliError::ModelInvalid)?;
    let mut failures = Vec::new();
    let source = match &cfg.source {
        ModelSource::Fixture(name) => name.clone(),
        ModelSource::Inline => "inline".into(),
    };
    let steady = gramian_steady(model).map(|s| SteadyBlock {
        gramian: rows(s.gramian()),
        uncertainty_floor: real(s.uncertainty_floor()),
    });
    let report = AnalysisReport {
        model: ModelBlock {
            source,
            n: model.n(),
            m: model.m(),
            pr_residual: real(model.pr_residual()),
            abscissa: real(model.abscissa()),
            hurwitz: model.is_hurwitz(),
        },
        steady_state: Block::from_result(steady, "steady state", &mut failures),
        quartic: Block::from_result(quartic_block(cfg), "quartic", &mut failures),
        cumulants: cumulant_block(cfg, &mut failures),
        deviation: Block::from_result(deviation_block(cfg), "deviation", &mut failures),
        classical: {
            let result = classical_block(cfg, &mut failures);
            Block::from_result(result, "classical", &mut failures)
        },
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION"),
            core_version: oqho_core::VERSION,
            fixture_sha256: match &cfg.source {
                ModelSource::Fixture(name) => fixture_digest(name),
                ModelSource::Inline => None,
            },
            seed: cfg.mc.seed,
            tol: real(cfg.spec.abs_tol),
            wall_clock_seconds: timing.then(|| real(started.elapsed().as_secs_f64())),
        },
    };
    Ok(Output {
        text: to_json(&report),
        failures,
    })
}

#[derive(Debug, Serialize)]
struct CumulantOutput {
    order: usize,
    rate: Real,
}

pub fn cumulants(cfg: &Resolved, order: usize) -> Result<Output, CliError> {
    let rate = cumulant_rate(&cfg.model, &cfg.weight, order, &cfg.spec)?;
    Ok(Output::complete(to_json(&CumulantOutput { order, rate: real(rate) })))
}

/// Partial grid flags from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct GridArgs {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub steps: Option<usize>,
}

pub fn bound(cfg: &Resolved, args: GridArgs, method: BoundMethod) -> Result<Output, CliError> {
    let analysis = DeviationAnalysis::new(&cfg.model, &cfg.weight)?;
    let base = cfg.eps_grid.unwrap_or_else(|| default_grid(&analysis));
    let grid = EpsGrid {
        min: args.min.unwrap_or(base.min),
        max: args.max.unwrap_or(base.max),
        steps: args.steps.unwrap_or(base.steps),
    };
    if !(grid.min <= grid.max) {
        return Err(CliError::InvalidConfig(format!(
            "epsilon grid [{}, {}] is empty",
            grid.min, grid.max
        )));
    }
    let rows = curve_rows(&analysis, &grid.values(), method)?;
    let cell = |x: Option<Real>| x.map(|r| format_float(r.0));
    Ok(Output::complete(to_csv(
        &["epsilon", "bound_closed", "bound_numeric", "theta_star"],
        rows.into_iter().map(|r| {
            vec![
                Some(format_float(r.epsilon.0)),
                cell(r.bound_closed),
                cell(r.bound_numeric),
                cell(r.theta_star),
            ]
        }),
    )))
}

pub fn delta(order: usize) -> Result<Output, CliError> {
    let table = delta_table(order)?;
    Ok(Output::complete(to_csv(
        &["gamma_bits", "count"],
        table.rows().map(|(bits, count)| vec![Some(bits), Some(count.to_string())]),
    )))
}

pub fn cumulant_csv(cfg: &Resolved) -> Result<Output, CliError> {
    let rows = cfg
        .orders
        .iter()
        .map(|&r| Ok(vec![Some(r.to_string()), Some(format_float(cumulant_rate(&cfg.model, &cfg.weight, r, &cfg.spec)?))]))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Output::complete(to_csv(&["order", "rate"], rows)))
}

#[derive(Debug, Serialize)]
struct SimulationSettings {
    h: Real,
    steps: usize,
    paths: usize,
    seed: u64,
    lag: usize,
    lag_time: Real,
    theta: Option<Real>,
    horizon: Real,
}

#[derive(Debug, Serialize)]
struct SimulationTargets {
    cov0: ComplexRows,
    covlag: ComplexRows,
    quadform_var: Real,
    rs_rate_sde: Option<Real>,
    rs_rate_paper: Option<Real>,
}

#[derive(Debug, Serialize)]
struct SimulationErrors {
    cov0: ComplexRows,
    covlag: ComplexRows,
    quadform_var: Real,
    rs_rate_mc: Option<Real>,
}

#[derive(Debug, Serialize)]
struct SimulationZ {
    cov0: Real,
    covlag: Real,
    quadform_var: Real,
    rs_rate_sde: Option<Real>,
    rs_rate_paper: Option<Real>,
}

#[derive(Debug, Serialize)]
struct SimulationReport {
    settings: SimulationSettings,
    cov0: ComplexRows,
    covlag: ComplexRows,
    quadform_var: Real,
    rs_rate_mc: Option<Real>,
    targets: SimulationTargets,
    stderr: SimulationErrors,
    max_z: SimulationZ,
}

pub fn simulate_cmd(cfg: &Resolved, mc: &McSettings, lag: Option<usize>, theta: Option<f64>) -> Result<Output, CliError> {
    let model = &cfg.model;
    let lag = lag.unwrap_or(mc.steps);
    let batch = simulate(model, mc.h, mc.steps, mc.paths, mc.seed)?;
    let stats = mc_stationary_stats(&batch, lag)?;
    let steady = gramian_steady(model)?;
    let target0 = steady.quantum_cov().clone();
    let target_lag = to_complex(&expm(model.drift(), stats.lag_time)?) * &target0;
    let var = mc_quadform_variance(&batch, &cfg.weight)?;
    let var_target = classical_quadform_variance(model, &cfg.weight)?;
    let horizon = mc.steps as f64 * mc.h;
    let rate = match theta {
        Some(t) => Some((
            mc_rs_rate(model, &cfg.weight, t, horizon, mc.paths, mc.seed)?,
            classical_rs_rate_sde(model, &cfg.weight, t, &cfg.spec)?,
            classical_rs_rate_paper(model, &cfg.weight, t, &cfg.spec)?,
        )),
        None => None,
    };
    let report = SimulationReport {
        settings: SimulationSettings {
            h: real(mc.h),
            steps: mc.steps,
            paths: mc.paths,
            seed: mc.seed,
            lag,
            lag_time: real(stats.lag_time),
            theta: theta.map(real),
            horizon: real(horizon),
        },
        cov0: complex_rows(&stats.cov0.value),
        covlag: complex_rows(&stats.covlag.value),
        quadform_var: real(var.value),
        rs_rate_mc: rate.map(|r| real(r.0.value)),
        targets: SimulationTargets {
            cov0: complex_rows(&target0),
            covlag: complex_rows(&target_lag),
            quadform_var: real(var_target),
            rs_rate_sde: rate.map(|r| real(r.1)),
            rs_rate_paper: rate.map(|r| real(r.2)),
        },
        stderr: SimulationErrors {
            cov0: complex_rows(&stats.cov0.stderr),
            covlag: complex_rows(&stats.covlag.stderr),
            quadform_var: real(var.stderr),
            rs_rate_mc: rate.map(|r| real(r.0.stderr)),
        },
        max_z: SimulationZ {
            cov0: real(stats.cov0.max_z_score(&target0)),
            covlag: real(stats.covlag.max_z_score(&target_lag)),
            quadform_var: real(var.z_score(var_target)),
            rs_rate_sde: rate.map(|r| real(r.0.z_score(r.1))),
            rs_rate_paper: rate.map(|r| real(r.0.z_score(r.2))),
        },
    };
    Ok(Output::complete(to_json(&report)))
}
