//! The `roughstruct` command line.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numeric failure
//! (non-contraction, Chen defect above tolerance, fits without data).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use roughstruct_core::grid_paths::{
    generate_path, holder_seminorm_with, PairScan, PathKind, SampledPath, TimeGrid,
    EXHAUSTIVE_HOLDER_LEVEL,
};
use roughstruct_core::integration::{
    convergence_order_fit, fit_excluding_coarsest, refinement_study, rough_integral_path,
    young_integral,
};
use roughstruct_core::modelled_distributions::{
    multiply_by_wdot, to_modelled, ControlledPath, Nonlinearity, ScalarFn, VectorField,
};
use roughstruct_core::rde_solver::{solve_rde, IntegralRoute, SolverConfig};
use roughstruct_core::reconstruction::{
    certificate_by_scale, reconstruct, reconstruction_certificate, three_point_profile,
    wavelet_lift, wavelet_rough_integral,
};
use roughstruct_core::regularity_structure::{Model, ProbeBattery};
use roughstruct_core::rough_core::{
    lift_piecewise_smooth, relative_chen_defect, rough_path_seminorm, AnalyticForm, LiftMode,
    RoughPath,
};
use roughstruct_core::wavelets::{
    minimal_base_level, wavelet_coefficients, DyadicFrame, StieltjesMeasure, WaveletBasis,
    DEFAULT_TABLE_LEVEL,
};
use serde_json::{json, Value};

use crate::formats::{self, CoefficientFile, DiagnosticsFile, FormatError};

#[derive(Debug, Parser)]
#[command(
    name = "roughstruct",
    version,
    about = "Rough paths, reconstruction and rough differential equations on dyadic grids"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Grid level J of generated paths (2^J + 1 nodes).
    #[arg(long, global = true, default_value_t = 10)]
    pub grid_level: u32,
    /// Hölder exponent of the driver, in (1/3, 1/2].
    #[arg(long, global = true, default_value_t = 0.4)]
    pub alpha: f64,
    /// Solver exponent, in (alpha, 1/2].
    #[arg(long, global = true, default_value_t = 0.45)]
    pub beta: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print reports (and errors) as JSON.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a path and write it as CSV.
    Gen(GenArgs),
    /// Report the Hölder seminorm of a path CSV.
    Holder(HolderArgs),
    /// Lift a path CSV to a rough path (JSON plus the path CSV beside it).
    Lift(LiftArgs),
    /// Report the Chen defect of a rough-path JSON.
    Chen(ChenArgs),
    /// Integrate a controlled path against a path or rough path.
    Integrate(IntegrateArgs),
    /// Reconstruct `Y * Wdot` and write its error certificate as CSV.
    Reconstruct(ReconstructArgs),
    /// Solve `dY = F(Y) dW` and write the solution CSV.
    Solve(SolveArgs),
    /// Write an error-vs-scale table and report the fitted order.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    #[value(name = "sin_cos", alias = "sin-cos")]
    SinCos,
    Fbm,
    /// `W^i(t) = t`.
    Linear,
    /// Ascending coefficients from `--coeffs`, shared by every component.
    Polynomial,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "sin_cos")]
    pub kind: GenKind,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.5)]
    pub hurst: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct HolderArgs {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LiftKind {
    #[value(name = "piecewise-linear", alias = "linear")]
    PiecewiseLinear,
    Analytic,
    Wavelet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormKind {
    #[value(name = "sin_cos", alias = "sin-cos")]
    SinCos,
    Polynomial,
}

#[derive(Debug, Args)]
pub struct LiftArgs {
    pub path: PathBuf,
    #[arg(long, value_enum, default_value = "piecewise-linear")]
    pub mode: LiftKind,
    /// Closed form for `--mode analytic`.
    #[arg(long, value_enum, default_value = "sin_cos")]
    pub form: FormKind,
    /// Polynomial coefficients for `--form polynomial`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub coeffs: Vec<f64>,
    #[command(flatten)]
    pub wavelet: WaveletArgs,
    /// Also write the wavelet coefficients of every `dW^i` (a JSON array).
    #[arg(long)]
    pub coefficients: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WaveletArgs {
    /// Daubechies filter length (4, 6 or 8).
    #[arg(long, default_value_t = 8)]
    pub taps: usize,
    /// Top wavelet level J; defaults to grid level - 2.
    #[arg(long)]
    pub top: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ChenArgs {
    pub rough_path: PathBuf,
    /// Bound on `defect / (1 + sup |W|^2)`.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct IntegrandArgs {
    /// Controlled-path CSV (`t,y1..yd,yp11..ypdn`).
    #[arg(long, conflicts_with = "integrand_fn")]
    pub integrand: Option<PathBuf>,
    /// Integrand `y^i = g(W^i)` with `y'^{ij} = g'(W^i) delta_ij`; defaults
    /// to `identity` (`sin` for `convergence`).
    #[arg(long, value_enum)]
    pub integrand_fn: Option<IntegrandFn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegrandFn {
    Identity,
    Sin,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegrateMethod {
    Young,
    RoughRiemann,
    RoughWavelet,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    /// Path CSV (young) or rough-path JSON (rough methods).
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "rough-riemann")]
    pub method: IntegrateMethod,
    #[command(flatten)]
    pub integrand: IntegrandArgs,
    /// Mesh level of the compensated sums; defaults to the grid level.
    #[arg(long)]
    pub mesh: Option<u32>,
    #[command(flatten)]
    pub wavelet: WaveletArgs,
    /// Hölder exponent of the integrand for the Young admissibility check.
    #[arg(long, default_value_t = 1.0)]
    pub integrand_alpha: f64,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    pub rough_path: PathBuf,
    #[command(flatten)]
    pub integrand: IntegrandArgs,
    #[command(flatten)]
    pub wavelet: WaveletArgs,
    /// Also write the antiderivative of the reconstruction as CSV.
    #[arg(long)]
    pub antiderivative: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldKind {
    /// `F^{a j}(y) = y^a`.
    Linear,
    /// `F^{a j}(y) = sin y^a`.
    Sin,
    /// `F^{a j}(y) = tanh y^a`.
    Tanh,
    /// Quarter turn `F(y) = (-y^2, y^1)`, scalar driver.
    Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RouteKind {
    Riemann,
    Wavelet,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Path CSV (lifted piecewise-linearly) or rough-path JSON.
    pub input: PathBuf,
    #[arg(long = "F", value_enum, default_value = "linear")]
    pub field: FieldKind,
    /// Initial value, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "1"
    )]
    pub xi: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub window_level: u32,
    #[arg(long, default_value_t = 60)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "riemann")]
    pub route: RouteKind,
    /// Diagnostics JSON; defaults to `<out>.diagnostics.json` beside `--out`.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    /// Differences of compensated sums on successive meshes.
    Refinement,
    /// Largest three-point defect of the wavelet integral per interval length.
    ThreePoint,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    pub rough_path: PathBuf,
    #[arg(long, value_enum, default_value = "refinement")]
    pub kind: StudyKind,
    #[command(flatten)]
    pub integrand: IntegrandArgs,
    /// Coarsest mesh level of the refinement study.
    #[arg(long, default_value_t = 2)]
    pub coarsest: u32,
    /// Number of dyadic lengths in the three-point study.
    #[arg(long, default_value_t = 4)]
    pub lengths: u32,
    #[command(flatten)]
    pub wavelet: WaveletArgs,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl From<roughstruct_core::Error> for CliError {
    fn from(e: roughstruct_core::Error) -> Self {
        use roughstruct_core::Error as E;
        match e {
            E::NonContraction(_)
            | E::WorkingBoxExceeded
            | E::NotPositiveDefinite(_)
            | E::InsufficientSamples(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numeric(_) => 2,
            CliError::Usage(_) => 1,
            CliError::Format(FormatError::Core(e)) => CliError::from(e.clone()).exit_code(),
            CliError::Format(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Collected output of one command: a JSON report plus a text rendering.
struct Report {
    json: Value,
    text: String,
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<Option<Vec<u8>>> {
    match out {
        Some(p) => {
            formats::write_file(p, bytes)?;
            Ok(None)
        }
        None => Ok(Some(bytes.to_vec())),
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> formats::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn basis(args: &WaveletArgs) -> Result<WaveletBasis> {
    Ok(WaveletBasis::daubechies(args.taps)?.with_table(DEFAULT_TABLE_LEVEL)?)
}

fn top_level(args: &WaveletArgs, grid: &TimeGrid) -> Result<u32> {
    match args.top {
        Some(j) => Ok(j),
        None => grid.level().checked_sub(2).ok_or_else(|| {
            CliError::Usage(format!(
                "grid level {} is too coarse for a wavelet route",
                grid.level()
            ))
        }),
    }
}

fn is_json(p: &Path) -> bool {
    p.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn load_rough(p: &Path, alpha: f64) -> Result<RoughPath> {
    if is_json(p) {
        Ok(formats::load_rough_path(p)?)
    } else {
        let w = formats::load_path(p)?;
        Ok(lift_piecewise_smooth(&w, &LiftMode::Linear, alpha)?)
    }
}

fn need_rough_json(p: &Path) -> Result<RoughPath> {
    if !is_json(p) {
        return Err(CliError::Usage(format!(
            "{} is not a rough-path JSON",
            p.display()
        )));
    }
    Ok(formats::load_rough_path(p)?)
}

/// The controlled path from `--integrand`, or `y^i = g(W^i)`.
fn integrand(args: &IntegrandArgs, w: &SampledPath) -> Result<ControlledPath> {
    integrand_or(args, w, IntegrandFn::Identity)
}

fn integrand_or(
    args: &IntegrandArgs,
    w: &SampledPath,
    default: IntegrandFn,
) -> Result<ControlledPath> {
    match &args.integrand {
        Some(p) => {
            let cp = formats::read_controlled_csv(formats::read_file(p)?.as_slice(), w.dim())?;
            if cp.grid() != w.grid() {
                return Err(CliError::Usage(
                    "integrand and driver use different grids".into(),
                ));
            }
            Ok(cp)
        }
        None => {
            let g = match args.integrand_fn.unwrap_or(default) {
                IntegrandFn::Identity => ScalarFn::Identity,
                IntegrandFn::Sin => ScalarFn::Sin,
                IntegrandFn::Tanh => ScalarFn::Tanh,
            };
            let grid = *w.grid();
            let n = w.dim();
            let field = VectorField::Componentwise { d: n, n: 1, g };
            let mut y = SampledPath::zeros(grid, n);
            let mut yp = SampledPath::zeros(grid, n * n);
            let mut jac = vec![0.0; n * n];
            for k in 0..grid.len() {
                field.eval(w.value(k), y.value_mut(k));
                field.jacobian(w.value(k), &mut jac);
                yp.value_mut(k).copy_from_slice(&jac);
            }
            Ok(ControlledPath::new(y, yp, n)?)
        }
    }
}

fn sibling_csv(json: &Path) -> PathBuf {
    json.with_extension("path.csv")
}

fn gen(g: &Global, a: &GenArgs) -> Result<(Report, Option<Vec<u8>>)> {
    let grid = TimeGrid::new(a.horizon, g.grid_level)?;
    let kind = match a.kind {
        GenKind::SinCos => PathKind::SinCos,
        GenKind::Fbm => PathKind::Fbm {
            hurst: a.hurst,
            seed: g.seed,
        },
        GenKind::Linear => PathKind::Polynomial(vec![vec![0.0, 1.0]]),
        GenKind::Polynomial => {
            if a.coeffs.is_empty() {
                return Err(CliError::Usage("--kind polynomial needs --coeffs".into()));
            }
            PathKind::Polynomial(vec![a.coeffs.clone()])
        }
    };
    let w = generate_path(&kind, grid, a.dim)?;
    let bytes = csv_bytes(|b| formats::write_path_csv(&w, b))?;
    let stdout = emit(&g.out, &bytes)?;
    Ok((
        Report {
            json: json!({"rows": grid.len(), "dim": a.dim, "level": grid.level(), "horizon": grid.horizon()}),
            text: format!("wrote {} rows of dimension {}", grid.len(), a.dim),
        },
        stdout,
    ))
}

fn holder(g: &Global, a: &HolderArgs) -> Result<Report> {
    let w = formats::load_path(&a.path)?;
    let scan = PairScan::for_level(w.grid().level(), EXHAUSTIVE_HOLDER_LEVEL);
    let v = holder_seminorm_with(&w, g.alpha, scan)?;
    let scan_name = match scan {
        PairScan::Exhaustive => "exhaustive",
        PairScan::Dyadic => "dyadic",
    };
    Ok(Report {
        json: json!({"alpha": g.alpha, "seminorm": v, "scan": scan_name}),
        text: format!(
            "holder seminorm (alpha = {}): {v:.10e} [{scan_name} pairs]",
            g.alpha
        ),
    })
}

fn lift(g: &Global, a: &LiftArgs) -> Result<Report> {
    let w = formats::load_path(&a.path)?;
    let mut coefficient_tables = None;
    let rp = match a.mode {
        LiftKind::PiecewiseLinear => lift_piecewise_smooth(&w, &LiftMode::Linear, g.alpha)?,
        LiftKind::Analytic => {
            let form = match a.form {
                FormKind::SinCos => AnalyticForm::SinCos,
                FormKind::Polynomial => AnalyticForm::Polynomial(vec![a.coeffs.clone()]),
            };
            lift_piecewise_smooth(&w, &LiftMode::Analytic(form), g.alpha)?
        }
        LiftKind::Wavelet => {
            let b = basis(&a.wavelet)?;
            let top = top_level(&a.wavelet, w.grid())?;
            if a.coefficients.is_some() {
                let frame = DyadicFrame::new(&b, w.grid().horizon())?;
                let l = minimal_base_level(&b);
                let tables = (0..w.dim())
                    .map(|i| {
                        let xi = StieltjesMeasure::from_component(&w, i)?;
                        let t = wavelet_coefficients(&xi, &frame, l, top)?;
                        Ok(CoefficientFile::from(&t))
                    })
                    .collect::<std::result::Result<Vec<_>, roughstruct_core::Error>>()?;
                coefficient_tables = Some(tables);
            }
            wavelet_lift(&w, g.alpha, &b, top)?
        }
    };
    let json_out = g
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("lift needs --out for the rough-path JSON".into()))?;
    let csv_out = sibling_csv(&json_out);
    formats::save_rough_path(&rp, &json_out, &csv_out)?;
    if let (Some(p), Some(t)) = (&a.coefficients, &coefficient_tables) {
        formats::write_file(p, &formats::to_json(t)?)?;
    }
    let rel = relative_chen_defect(&rp);
    let (wn, xn) = rough_path_seminorm(&rp);
    Ok(Report {
        json: json!({
            "rough_path": json_out.display().to_string(),
            "path_csv": csv_out.display().to_string(),
            "relative_chen_defect": rel,
            "holder_path": wn,
            "holder_second_order": xn,
        }),
        text: format!(
            "wrote {} (path in {}); relative Chen defect {rel:.3e}; |W|_alpha {wn:.6e}, |X|_2alpha {xn:.6e}",
            json_out.display(),
            csv_out.display()
        ),
    })
}

fn chen(_g: &Global, a: &ChenArgs) -> Result<Report> {
    let rp = need_rough_json(&a.rough_path)?;
    let rel = relative_chen_defect(&rp);
    if rel > a.tolerance {
        return Err(CliError::Numeric(format!(
            "relative Chen defect {rel:e} exceeds tolerance {:e}",
            a.tolerance
        )));
    }
    Ok(Report {
        json: json!({"relative_chen_defect": rel, "tolerance": a.tolerance, "pass": true}),
        text: format!("relative Chen defect {rel:.3e} <= {:.1e}", a.tolerance),
    })
}

fn integrate(g: &Global, a: &IntegrateArgs) -> Result<(Report, Option<Vec<u8>>)> {
    let (series, extra) = match a.method {
        IntegrateMethod::Young => {
            let w = if is_json(&a.input) {
                formats::load_rough_path(&a.input)?.path().clone()
            } else {
                formats::load_path(&a.input)?
            };
            let cp = integrand(&a.integrand, &w)?;
            let grid = *w.grid();
            let q = cp.dim() * w.dim();
            let mut values = vec![0.0; grid.len() * q];
            let mut admissible = true;
            for k in 0..grid.intervals() {
                let step = young_integral(&cp.y, &w, k, k + 1, (a.integrand_alpha, g.alpha))?;
                admissible &= step.admissible;
                for c in 0..q {
                    values[(k + 1) * q + c] = values[k * q + c] + step.value[c];
                }
            }
            (
                SampledPath::new(grid, q, values)?,
                json!({"admissible": admissible}),
            )
        }
        IntegrateMethod::RoughRiemann => {
            let rp = need_rough_json(&a.input)?;
            let cp = integrand(&a.integrand, rp.path())?;
            let mesh = a.mesh.unwrap_or(rp.grid().level());
            (rough_integral_path(&cp, &rp, mesh)?, json!({"mesh": mesh}))
        }
        IntegrateMethod::RoughWavelet => {
            let rp = need_rough_json(&a.input)?;
            let cp = integrand(&a.integrand, rp.path())?;
            let b = basis(&a.wavelet)?;
            let top = top_level(&a.wavelet, rp.grid())?;
            let out = wavelet_rough_integral(&cp, &rp, &b, top)?;
            (
                out.integral,
                json!({"levels": [out.levels.0, out.levels.1], "three_point_certificate": out.certificate, "margin": out.margin}),
            )
        }
    };
    let end = series.value(series.grid().intervals()).to_vec();
    let bytes = csv_bytes(|b| formats::write_series_csv(&series, "I", b))?;
    let stdout = emit(&g.out, &bytes)?;
    let mut json = json!({"final": end});
    if let (Value::Object(m), Value::Object(e)) = (&mut json, extra) {
        m.extend(e);
    }
    let text = format!("integral over [0, T]: {end:?}");
    Ok((Report { json, text }, stdout))
}

fn reconstruct_cmd(g: &Global, a: &ReconstructArgs) -> Result<(Report, Option<Vec<u8>>)> {
    let rp = need_rough_json(&a.rough_path)?;
    let cp = integrand(&a.integrand, rp.path())?;
    let b = basis(&a.wavelet)?;
    let top = top_level(&a.wavelet, rp.grid())?;
    let f = multiply_by_wdot(&to_modelled(&cp, rp.alpha()))?;
    let model = Model::rough(&rp);
    let rec = reconstruct(&f, &model, &b, top)?;
    let cert = reconstruction_certificate(&rec, &f, &model, &ProbeBattery::standard(rp.grid()))?;
    if let Some(p) = &a.antiderivative {
        let bytes = csv_bytes(|buf| formats::write_series_csv(&rec.antiderivative, "z", buf))?;
        formats::write_file(p, &bytes)?;
    }
    let by_scale = certificate_by_scale(&cert);
    let bytes = csv_bytes(|buf| formats::write_certificate_csv(&cert, buf))?;
    let stdout = emit(&g.out, &bytes)?;
    let text = by_scale
        .iter()
        .map(|(l, c)| format!("lambda {l:.6e}: max ratio {c:.6e}"))
        .collect::<Vec<_>>()
        .join("\n");
    Ok((
        Report {
            json: json!({
                "gamma": f.gamma(),
                "levels": [rec.levels.0, rec.levels.1],
                "by_scale": by_scale,
            }),
            text: format!("gamma {:.3}\n{text}", f.gamma()),
        },
        stdout,
    ))
}

fn field(kind: FieldKind, d: usize, n: usize) -> Result<VectorField> {
    let componentwise = |g| VectorField::Componentwise { d, n, g };
    Ok(match kind {
        FieldKind::Linear => componentwise(ScalarFn::Identity),
        FieldKind::Sin => componentwise(ScalarFn::Sin),
        FieldKind::Tanh => componentwise(ScalarFn::Tanh),
        FieldKind::Rotation => {
            if (d, n) != (2, 1) {
                return Err(CliError::Usage(
                    "--F rotation needs a two-component --xi and a scalar driver".into(),
                ));
            }
            VectorField::rotation()
        }
    })
}

fn solve(g: &Global, a: &SolveArgs) -> Result<(Report, Option<Vec<u8>>)> {
    let rp = load_rough(&a.input, g.alpha)?;
    let f = field(a.field, a.xi.len(), rp.dim())?;
    let route = match a.route {
        RouteKind::Riemann => IntegralRoute::Riemann,
        RouteKind::Wavelet => IntegralRoute::Wavelet {
            basis: WaveletBasis::standard(),
            levels_below: 2,
        },
    };
    let cfg = SolverConfig {
        alpha: rp.alpha(),
        beta: g.beta,
        window_level: a.window_level,
        max_picard_iters: a.max_iters,
        fixed_point_tol: a.tol,
        route,
    };
    let (sol, diag) = solve_rde(&a.xi, &f, &rp, &cfg)?;
    let diagnostics = DiagnosticsFile::from(&diag);
    let diag_path = a
        .diagnostics
        .clone()
        .or_else(|| g.out.as_ref().map(|o| o.with_extension("diagnostics.json")));
    if let Some(p) = &diag_path {
        formats::write_file(p, &formats::to_json(&diagnostics)?)?;
    }
    let bytes = csv_bytes(|b| formats::write_controlled_csv(&sol, b))?;
    let stdout = emit(&g.out, &bytes)?;
    let end = sol.y.value(sol.grid().intervals()).to_vec();
    let ratio = diag.windows.iter().map(|w| w.ratio).fold(0.0, f64::max);
    Ok((
        Report {
            json: json!({
                "final": end,
                "windows": diag.windows.len(),
                "halvings": diag.halvings,
                "max_ratio": ratio,
                "residual": diag.residual,
                "diagnostics": diag_path.map(|p| p.display().to_string()),
            }),
            text: format!(
                "y(T) = {end:?}; {} window(s), {} halving(s), max ratio {ratio:.4}, residual {:.3e}",
                diag.windows.len(),
                diag.halvings,
                diag.residual
            ),
        },
        stdout,
    ))
}

fn convergence(g: &Global, a: &ConvergenceArgs) -> Result<(Report, Option<Vec<u8>>)> {
    let rp = need_rough_json(&a.rough_path)?;
    let cp = integrand_or(&a.integrand, rp.path(), IntegrandFn::Sin)?;
    let (samples, fit) = match a.kind {
        StudyKind::Refinement => {
            let level = rp.grid().level();
            if a.coarsest >= level {
                return Err(CliError::Usage(format!(
                    "--coarsest {} must be below the grid level {level}",
                    a.coarsest
                )));
            }
            let samples =
                refinement_study(&cp, &rp, 0, rp.grid().intervals(), (a.coarsest, level))?;
            let fit = fit_excluding_coarsest(&samples)?;
            (samples, fit)
        }
        StudyKind::ThreePoint => {
            let b = basis(&a.wavelet)?;
            let top = top_level(&a.wavelet, rp.grid())?;
            let out = wavelet_rough_integral(&cp, &rp, &b, top)?;
            let samples = three_point_profile(&out.integral, &cp, &rp, a.lengths, out.margin)?;
            let fit = convergence_order_fit(&samples)?;
            (samples, fit)
        }
    };
    let bytes = csv_bytes(|b| formats::write_convergence_csv(&samples, b))?;
    let stdout = emit(&g.out, &bytes)?;
    Ok((
        Report {
            json: json!({
                "slope": fit.slope,
                "intercept": fit.intercept,
                "r_squared": fit.r_squared,
                "samples": fit.samples,
            }),
            text: format!(
                "fitted order {:.4} (R^2 {:.4}) over {} samples",
                fit.slope, fit.r_squared, fit.samples
            ),
        },
        stdout,
    ))
}

fn dispatch(cli: &Cli) -> Result<(Report, Option<Vec<u8>>)> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen(a) => gen(g, a),
        Command::Holder(a) => holder(g, a).map(|r| (r, None)),
        Command::Lift(a) => lift(g, a).map(|r| (r, None)),
        Command::Chen(a) => chen(g, a).map(|r| (r, None)),
        Command::Integrate(a) => integrate(g, a),
        Command::Reconstruct(a) => reconstruct_cmd(g, a),
        Command::Solve(a) => solve(g, a),
        Command::Convergence(a) => convergence(g, a),
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ROUGHSTRUCT_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "ROUGHSTRUCT_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        if n == 0 {
            return Err(CliError::Usage(
                "ROUGHSTRUCT_THREADS must be positive".into(),
            ));
        }
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

fn print_error(json_mode: bool, e: &CliError) {
    if json_mode {
        let v = json!({"error": e.to_string(), "exit_code": e.exit_code()});
        println!("{v}");
    } else {
        eprintln!("error: {e}");
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let json_mode = args.iter().any(|a| a == "--json");
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                // --help and --version
                let _ = e.print();
                return 0;
            }
            if json_mode {
                print_error(true, &CliError::Usage(e.kind().to_string()));
            } else {
                let _ = e.print();
            }
            return 1;
        }
    };
    if let Err(e) = configure_threads() {
        print_error(cli.global.json, &e);
        return e.exit_code();
    }
    match dispatch(&cli) {
        Ok((report, data)) => {
            let mut stdout = std::io::stdout().lock();
            if let Some(bytes) = data {
                let _ = stdout.write_all(&bytes);
                if cli.global.json {
                    eprintln!("{}", report.json);
                } else {
                    eprintln!("{}", report.text);
                }
            } else if cli.global.json {
                let _ = writeln!(stdout, "{}", report.json);
            } else {
                let _ = writeln!(stdout, "{}", report.text);
            }
            0
        }
        Err(e) => {
            print_error(cli.global.json, &e);
            e.exit_code()
        }
    }
}
