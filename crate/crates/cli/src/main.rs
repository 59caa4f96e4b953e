//! `contactcurv` command-line front end.
//!
//! Every command builds its full report in memory and only then writes it,
//! so a failing command never leaves partial output behind.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use contactcurv::asymptotics::expansion_along_geodesic;
use contactcurv::canonical::{curvature_blocks, parallel_frame_from, ricci};
use contactcurv::comparison::{bound, BoundMethod};
use contactcurv::error::{Error, StructureError};
use contactcurv::flow::{first_conjugate_time, flow, hamiltonian, normalize_unit_speed, ExtremalState};
use contactcurv::structure::file::parse_model_unchecked;
use contactcurv::structure::models::BUILTIN_NAMES;
use contactcurv::structure::{builtin_model, tanno_tensors, validate, ContactModel, Generic3dParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const SCHEMA: u32 = 1;
/// Base points checked by `validate` for models that are not left-invariant.
const VALIDATE_POINTS: usize = 4;
const VALIDATE_SEED: u64 = 17;

#[derive(Parser)]
#[command(name = "contactcurv", version, about = "Curvature, geodesic-cost expansions and conjugate times of contact sub-Riemannian structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the builtin models and their classification.
    Models(OutputArgs),
    /// Check the contact invariants of a model.
    Validate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Integrate a normal geodesic.
    Geodesic {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        cov: CovectorArgs,
        /// Final time.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Integrator tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Number of output intervals.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Canonical curvature blocks at time `t` along a geodesic.
    Curvature {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        cov: CovectorArgs,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Small-time expansion of the geodesic cost Hessian.
    Qexpand {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        cov: CovectorArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// First conjugate time along a geodesic.
    Conjugate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        cov: CovectorArgs,
        /// Scan horizon.
        #[arg(long, default_value_t = 10.0)]
        tmax: f64,
        /// Start of the scan, skipping the degenerate start point.
        #[arg(long, default_value_t = 1e-2)]
        tmin: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Diameter bound from sampled curvature lower bounds.
    Bounds {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = Method::RicAb)]
        method: Method,
        /// Horizontal directions sampled per grid cell.
        #[arg(long, default_value_t = 16)]
        samples: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Builtin model name.
    #[arg(long, default_value = "heisenberg")]
    model: String,
    /// JSON model file; overrides `--model`.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Half the distribution rank.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Parameters of `generic3d`, e.g. `c10_1=0.5,c20_2=-0.5`.
    #[arg(long)]
    params: Option<String>,
}

#[derive(Args)]
struct CovectorArgs {
    /// Covector components `h0,h1,...,h2d` in the model frame; missing
    /// trailing components are zero.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    h: Vec<f64>,
    /// Use the covector as given instead of rescaling it to unit speed.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    #[value(name = "ric_c")]
    RicC,
    #[value(name = "ric_ab")]
    RicAb,
    Tensor,
}

impl From<Method> for BoundMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::RicC => BoundMethod::RicC,
            Method::RicAb => BoundMethod::RicAb,
            Method::Tensor => BoundMethod::Tensor,
        }
    }
}

/// Failure of a command, with its exit code.
struct Failure {
    code: u8,
    message: String,
    /// Report to emit even though the command failed.
    report: Option<Output>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string(), report: None }
    }
}

impl From<StructureError> for Failure {
    fn from(e: StructureError) -> Self {
        Error::from(e).into()
    }
}

impl From<contactcurv::error::FlowError> for Failure {
    fn from(e: contactcurv::error::FlowError) -> Self {
        Error::from(e).into()
    }
}

fn config_error(message: String) -> Failure {
    Failure { code: 2, message, report: None }
}

/// A finished report: the document body and a one-line summary.
struct Output {
    body: String,
    summary: String,
}

fn json_output(command: &str, mut report: Value, summary: String) -> Output {
    let mut doc = json!({"schema": SCHEMA, "command": command});
    if let (Some(d), Some(r)) = (doc.as_object_mut(), report.as_object_mut()) {
        d.append(r);
    }
    Output { body: serde_json::to_string_pretty(&doc).expect("reports serialize") + "\n", summary }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn load_model(args: &ModelArgs) -> Result<Box<dyn ContactModel>, Failure> {
    if let Some(path) = &args.model_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let m = contactcurv::structure::file::parse_model(&text)?;
        return Ok(Box::new(m));
    }
    let params = args.params.as_deref().map(Generic3dParams::parse).transpose()?;
    Ok(builtin_model(&args.model, args.d, params)?)
}

fn covector(model: &dyn ContactModel, args: &CovectorArgs) -> Result<ExtremalState, Failure> {
    let n = model.n();
    if args.h.len() > n {
        return Err(config_error(format!("--h takes at most {n} components for d = {}, got {}", model.d(), args.h.len())));
    }
    let mut h = args.h.clone();
    h.resize(n, 0.0);
    if h.iter().any(|v| !v.is_finite()) {
        return Err(config_error("--h components must be finite".into()));
    }
    let state = ExtremalState::new(model.base_point(), h);
    if hamiltonian(&state) <= 0.0 {
        return Err(config_error("covector has zero horizontal part".into()));
    }
    if args.no_normalize {
        return Ok(state);
    }
    let unit = normalize_unit_speed(&state)?;
    let factor = unit.h[1..].iter().zip(&state.h[1..]).find(|(_, b)| **b != 0.0).map_or(1.0, |(a, b)| a / b);
    if (factor - 1.0).abs() > 1e-12 {
        eprintln!("note: covector rescaled by {factor:.6} to unit speed");
    }
    Ok(unit)
}

fn csv_string(rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn cmd_models(out: &OutputArgs) -> Result<Output, Failure> {
    let mut entries = Vec::new();
    for name in BUILTIN_NAMES {
        let params = (name == "generic3d").then(|| Generic3dParams::unimodular(0.5, 0.3, -0.2));
        let m = builtin_model(name, 1, params)?;
        let flags = tanno_tensors(m.as_ref(), &m.base_point())?.flags;
        let family = if name == "generic3d" { "generic3d".to_string() } else { format!("{name}(d)") };
        entries.push(json!({
            "name": family,
            "d": if name == "generic3d" { "1" } else { "any >= 1" },
            "left_invariant": m.left_invariant(),
            "k_type": flags.is_k_type,
            "cr": flags.is_cr,
            "sasakian": flags.is_sasakian,
            "yang_mills": flags.is_yang_mills,
        }));
    }
    let summary = format!("{} builtin models", entries.len());
    if out.format == Format::Csv {
        let mut rows = vec![["name", "d", "left_invariant", "k_type", "cr", "sasakian", "yang_mills"].map(String::from).to_vec()];
        for e in &entries {
            rows.push(
                ["name", "d", "left_invariant", "k_type", "cr", "sasakian", "yang_mills"]
                    .iter()
                    .map(|k| match &e[*k] {
                        Value::String(s) => s.clone(),
                        v => v.to_string(),
                    })
                    .collect(),
            );
        }
        return Ok(Output { body: csv_string(&rows), summary });
    }
    Ok(json_output("models", json!({"models": entries}), summary))
}

fn cmd_validate(args: &ModelArgs) -> Result<Output, Failure> {
    let model: Box<dyn ContactModel> = match &args.model_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
            Box::new(parse_model_unchecked(&text)?)
        }
        None => load_model(args)?,
    };
    let points = if model.left_invariant() {
        vec![model.base_point()]
    } else {
        model.sample_points(VALIDATE_POINTS, &mut ChaCha8Rng::seed_from_u64(VALIDATE_SEED))
    };
    let rep = validate(model.as_ref(), &points);
    let failures = rep.failures();
    let flags = if rep.passed() { tanno_tensors(model.as_ref(), &points[0]).ok().map(|t| t.flags) } else { None };
    let body = json!({
        "model": model.name(),
        "d": model.d(),
        "passed": rep.passed(),
        "residuals": to_value(&rep),
        "failures": failures,
        "flags": flags.map(|f| to_value(&f)),
    });
    let summary = if rep.passed() {
        format!("{}: all invariants hold", model.name())
    } else {
        format!("{}: failed {}", model.name(), failures.join("; "))
    };
    let output = json_output("validate", body, summary.clone());
    if rep.passed() {
        Ok(output)
    } else {
        Err(Failure { code: 1, message: summary, report: Some(output) })
    }
}

fn cmd_geodesic(model: &dyn ContactModel, state: &ExtremalState, t: f64, tol: f64, samples: usize, out: &OutputArgs) -> Result<Output, Failure> {
    if !(tol > 0.0) {
        return Err(config_error("--tol must be positive".into()));
    }
    let geo = flow(model, state, t, tol)?;
    let times: Vec<f64> = (0..=samples.max(1)).map(|k| t * k as f64 / samples.max(1) as f64).collect();
    let drift = geo.energy_drift(samples.max(1));
    let summary = format!("integrated to t = {t} with |H(t) - H(0)| <= {drift:.3e}");
    if out.format == Format::Csv {
        let mut buf = Vec::new();
        geo.write_csv(&mut buf, &times)?;
        return Ok(Output { body: String::from_utf8(buf).expect("utf-8 csv"), summary });
    }
    let pts = times
        .iter()
        .map(|&s| geo.state(s).map(|st| json!({"t": s, "x": st.x, "h": st.h})))
        .collect::<Result<Vec<_>, _>>()?;
    let body = json!({
        "model": model.name(),
        "d": model.d(),
        "initial": to_value(state),
        "t_end": t,
        "tol": tol,
        "energy_drift": drift,
        "stats": to_value(&geo.stats()),
        "samples": pts,
    });
    Ok(json_output("geodesic", body, summary))
}

fn cmd_curvature(model: &dyn ContactModel, state: &ExtremalState, t: f64, out: &OutputArgs) -> Result<Output, Failure> {
    if !(t >= 0.0) {
        return Err(config_error("--t must be non-negative".into()));
    }
    let frame = parallel_frame_from(model, state, t.max(1e-2), None)?;
    let blocks = curvature_blocks(&frame, t)?;
    let (ra, rb, rc) = ricci(&blocks);
    let summary = format!("Ric^a = {ra:.10}, Ric^b = {rb:.10}, Ric^c = {rc:.10}");
    if out.format == Format::Csv {
        let m = &blocks.assembled;
        let mut rows = vec![vec!["i".to_string(), "j".to_string(), "value".to_string()]];
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                rows.push(vec![i.to_string(), j.to_string(), format!("{:.16e}", m[(i, j)])]);
            }
        }
        return Ok(Output { body: csv_string(&rows), summary });
    }
    let mut body = to_value(&blocks);
    body["model"] = json!(model.name());
    body["d"] = json!(model.d());
    Ok(json_output("curvature", body, summary))
}

fn cmd_qexpand(model: &dyn ContactModel, state: &ExtremalState, out: &OutputArgs) -> Result<Output, Failure> {
    let q = expansion_along_geodesic(model, state)?;
    let summary = format!(
        "trace I = {:.10}, series vs closed max deviation {:.3e}",
        q.i.trace(),
        q.series_vs_closed_max_dev.unwrap_or(0.0)
    );
    if out.format == Format::Csv {
        let mut rows = vec![vec!["operator".to_string(), "i".to_string(), "j".to_string(), "value".to_string()]];
        for (name, m) in [("I", &q.i), ("Q0", &q.q0), ("Q1", &q.q1), ("Q2", &q.q2)] {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    rows.push(vec![name.to_string(), i.to_string(), j.to_string(), format!("{:.16e}", m[(i, j)])]);
                }
            }
        }
        return Ok(Output { body: csv_string(&rows), summary });
    }
    let mut body = to_value(&q);
    body["model"] = json!(model.name());
    Ok(json_output("qexpand", body, summary))
}

fn cmd_conjugate(model: &dyn ContactModel, state: &ExtremalState, tmax: f64, tmin: f64, out: &OutputArgs) -> Result<Output, Failure> {
    if !(tmax > tmin && tmin > 0.0) {
        return Err(config_error("need 0 < --tmin < --tmax".into()));
    }
    let t = first_conjugate_time(model, state, tmax, tmin)?;
    let summary = match t {
        Some(t) => format!("first conjugate time {t:.10}"),
        None => format!("no conjugate time in [{tmin}, {tmax}]"),
    };
    if out.format == Format::Csv {
        let rows = vec![
            vec!["t_conjugate".to_string(), "t_max".to_string()],
            vec![t.map_or(String::new(), |t| format!("{t:.16e}")), tmax.to_string()],
        ];
        return Ok(Output { body: csv_string(&rows), summary });
    }
    let body = json!({
        "model": model.name(),
        "initial": to_value(state),
        "t_conjugate": t,
        "found": t.is_some(),
        "t_min": tmin,
        "t_max": tmax,
    });
    Ok(json_output("conjugate", body, summary))
}

fn cmd_bounds(model: &dyn ContactModel, method: Method, samples: usize, out: &OutputArgs) -> Result<Output, Failure> {
    if samples == 0 {
        return Err(config_error("--samples must be positive".into()));
    }
    let rep = bound(model, method.into(), samples)?;
    let summary = format!("diameter bound {:.10} ({} samples, {})", rep.diameter_bound, rep.n_samples, rep.note);
    if out.format == Format::Csv {
        return Ok(Output { body: rep.margins_csv(), summary });
    }
    Ok(json_output("bounds", to_value(&rep), summary))
}

fn run(cli: Cli) -> Result<(Output, Option<PathBuf>), Failure> {
    let (result, out) = match &cli.command {
        Command::Models(out) => (cmd_models(out), out),
        Command::Validate { model, out } => {
            if out.format == Format::Csv {
                return Err(config_error("validate reports are JSON only".into()));
            }
            (cmd_validate(model), out)
        }
        Command::Geodesic { model, cov, t, tol, samples, out } => {
            let m = load_model(model)?;
            let s = covector(m.as_ref(), cov)?;
            (cmd_geodesic(m.as_ref(), &s, *t, *tol, *samples, out), out)
        }
        Command::Curvature { model, cov, t, out } => {
            let m = load_model(model)?;
            let s = covector(m.as_ref(), cov)?;
            (cmd_curvature(m.as_ref(), &s, *t, out), out)
        }
        Command::Qexpand { model, cov, out } => {
            let m = load_model(model)?;
            let s = covector(m.as_ref(), cov)?;
            (cmd_qexpand(m.as_ref(), &s, out), out)
        }
        Command::Conjugate { model, cov, tmax, tmin, out } => {
            let m = load_model(model)?;
            let s = covector(m.as_ref(), cov)?;
            (cmd_conjugate(m.as_ref(), &s, *tmax, *tmin, out), out)
        }
        Command::Bounds { model, method, samples, out } => {
            let m = load_model(model)?;
            (cmd_bounds(m.as_ref(), *method, *samples, out), out)
        }
    };
    match result {
        Ok(o) => Ok((o, out.out.clone())),
        Err(mut f) => {
            if let Some(report) = f.report.take() {
                // The summary printed with the report already describes the failure.
                emit(&report, out.out.as_ref()).map_err(config_error)?;
                f.message.clear();
            }
            Err(f)
        }
    }
}

/// Writes the body to `path` (via a temporary file and rename) or stdout.
fn emit(output: &Output, path: Option<&PathBuf>) -> Result<(), String> {
    match path {
        Some(p) => {
            let tmp = p.with_extension("partial");
            std::fs::write(&tmp, &output.body).map_err(|e| format!("cannot write {}: {e}", tmp.display()))?;
            std::fs::rename(&tmp, p).map_err(|e| format!("cannot write {}: {e}", p.display()))?;
            println!("{}", output.summary);
        }
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(output.body.as_bytes()).map_err(|e| e.to_string())?;
            eprintln!("{}", output.summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((output, path)) => match emit(&output, path.as_ref()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
