//! The `fractalyze` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use fractalyze_core::classify::{boundary_data, h0_conditions, h0_membership, interpolate_spaces, SpaceKind, SpaceLabel};
use fractalyze_core::energy::{resistance, verify_harmonic_structure, Network, Target};
use fractalyze_core::jets::JetSpace;
use fractalyze_core::measure::dims;
use fractalyze_core::spectral::{
    critical_orders, decay_diagnostic, extract_tangent, l_omega, pretangent_sequence, Sampler, SobolevScale,
    SpectrumLadder,
};
use fractalyze_core::symmetry::D3;
use fractalyze_core::{builtin, Address, FractalSpec, VertexTable};

use crate::error::{AppError, AppResult};
use crate::jetio::{parse_jet, JetDoc, TangentDoc};
use crate::num::{fmt12, round12};
use crate::specio::parse_spec;
use crate::tables::{read_vertex_function, write_ladder, write_vertex_function, write_vertex_table};
use crate::{tolenv, verify};

#[derive(Debug, Parser)]
#[command(name = "fractalyze", version, about = "Boundary behaviour of Sobolev spaces on p.c.f. self-similar sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Source {
    /// One of interval, sg, sg3, hexagasket, vicsek, filled_sg.
    #[arg(long, global = true, conflicts_with = "spec")]
    pub builtin: Option<String>,
    /// Path to a fractalyze-spec/1 JSON document.
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dimensions, A1/A2 flags and the harmonic-structure residual.
    Info(Source),
    /// Eigenvalue ladder of A_w on H_k as CSV.
    Spectrum {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Boundary address `tau|w`; defaults to the first address of p1.
        #[arg(long)]
        omega: Option<String>,
    },
    /// Critical Sobolev orders of every boundary address as CSV.
    Criticals {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Tangent of a sampled function at a boundary address, as JSON.
    Tangent {
        #[command(flatten)]
        src: Source,
        /// Order of the tangent space is k-1.
        #[arg(long)]
        k: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        omega: String,
        /// Level of the sampled function.
        #[arg(long)]
        m: usize,
        /// vertex_id,value CSV on V_m.
        #[arg(long)]
        input: PathBuf,
    },
    /// Vanishing conditions of H^σ_0 and, with --jet, membership of a jet.
    Classify {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        jet: Option<PathBuf>,
    },
    /// Label of the interpolation space [X^σ, Y^σ']_θ.
    Interp {
        #[command(flatten)]
        src: Source,
        /// Endpoint `KIND:SIGMA` with KIND one of H, H0, H00.
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, required_unless_present = "scan")]
        theta: Option<f64>,
        /// Scan the interior points of `n` equal steps of [0, 1] and emit CSV.
        #[arg(long)]
        scan: Option<usize>,
    },
    /// Effective resistance between two vertices of V_m, or to V_0.
    Resistance {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        x: usize,
        /// A vertex id; omit for the resistance to the boundary.
        #[arg(long)]
        y: Option<usize>,
    },
    /// The acceptance suite, or health checks for one spec when a source is given.
    Verify {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
    /// Vertex table of V_m, or a jet sampled on V_m, as CSV.
    Export {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        jet: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn load(src: &Source) -> AppResult<FractalSpec> {
    match (&src.builtin, &src.spec) {
        (Some(name), None) => Ok(builtin(name)?),
        (None, Some(path)) => parse_spec(&read(path)?),
        _ => Err(AppError::Usage("give exactly one of --builtin NAME or --spec PATH".into())),
    }
}

fn read(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

fn emit(src: &Source, stdout: &mut dyn Write, bytes: &[u8]) -> AppResult<()> {
    match &src.out {
        Some(path) => fs::write(path, bytes).map_err(|e| AppError::io(path, e)),
        None => stdout.write_all(bytes).map_err(|e| AppError::io("<stdout>", e)),
    }
}

fn emit_json<T: Serialize>(src: &Source, stdout: &mut dyn Write, value: &T) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::Format(e.to_string()))?;
    text.push('\n');
    emit(src, stdout, text.as_bytes())
}

fn address(spec: &FractalSpec, text: &str) -> AppResult<Address> {
    let a = Address::parse(text, spec.n_letters())?;
    if spec.boundary_of(&a).is_none() {
        return Err(AppError::Usage(format!("`{text}` is not a boundary address of {}", spec.name())));
    }
    Ok(a)
}

fn finite(name: &str, x: f64) -> AppResult<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(AppError::Usage(format!("--{name} must be finite")))
    }
}

fn execute(cmd: &Command, stdout: &mut dyn Write) -> AppResult<i32> {
    let tol = tolenv::from_env()?;
    match cmd {
        Command::Info(src) => info(src, stdout),
        Command::Spectrum { src, k, omega } => {
            let spec = load(src)?;
            let omega = match omega {
                Some(t) => address(&spec, t)?,
                None => spec.addresses()[0][0].clone(),
            };
            let space = JetSpace::new(&spec, *k)?;
            let ladder = SpectrumLadder::new(&space.composition(&omega.period()), &tol)?;
            let mut buf = Vec::new();
            write_ladder(&mut buf, &ladder, &SobolevScale::of(&space, &omega))?;
            emit(src, stdout, &buf)?;
            Ok(0)
        }
        Command::Criticals { src, k } => {
            let spec = load(src)?;
            let mut rows: Vec<(f64, Vec<String>)> = Vec::new();
            for (_, omega) in spec.all_addresses() {
                for s in critical_orders(&spec, omega, *k, &tol)? {
                    let s = round12(s);
                    match rows.iter_mut().find(|r| r.0 == s) {
                        Some(r) => r.1.push(omega.to_string()),
                        None => rows.push((s, vec![omega.to_string()])),
                    }
                }
            }
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["sigma", "addresses"]).map_err(csv_err)?;
            for (s, list) in rows {
                w.write_record([fmt12(s), list.join(";")]).map_err(csv_err)?;
            }
            emit(src, stdout, &w.into_inner().map_err(|e| AppError::Format(e.to_string()))?)?;
            Ok(0)
        }
        Command::Tangent { src, k, sigma, omega, m, input } => {
            let spec = load(src)?;
            let sigma = finite("sigma", *sigma)?;
            if *k == 0 {
                return Err(AppError::Usage("--k must be at least 1; tangents live in H_{k-1}".into()));
            }
            let omega = address(&spec, omega)?;
            let table = VertexTable::build(&spec, *m);
            let f = read_vertex_function(read(input)?.as_bytes(), table.len())?;
            let space = JetSpace::new(&spec, k - 1)?;
            let ladder = SpectrumLadder::new(&space.composition(&omega.period()), &tol)?;
            let scale = SobolevScale::of(&space, &omega);
            let l = l_omega(&scale, &ladder.magnitudes(), sigma, &dims(&spec), &tol)?;
            let (jet, residuals, slope) = if l < 0 {
                (DVector::zeros(space.dim()), Vec::new(), None)
            } else {
                let sampler = Sampler::new(&space)?;
                let w = omega.period().len();
                let depth = m.checked_sub(omega.prefix().len() + sampler.fit_level()).ok_or(
                    fractalyze_core::Error::InsufficientDepth {
                        need: omega.prefix().len() + sampler.fit_level(),
                        have: *m,
                    },
                )?;
                let seq = pretangent_sequence(&sampler, &table, &f, &omega, depth / w + 1)?;
                let t = extract_tangent(&seq, &ladder, l, &tol)?;
                let decay = decay_diagnostic(&space, &table, &f, &t.jet, &omega, (m - omega.prefix().len()) / w)?;
                let slope = decay.slope.is_finite().then(|| round12(decay.slope));
                (t.jet, decay.residuals.iter().map(|&r| round12(r)).collect(), slope)
            };
            let doc = TangentDoc {
                omega: omega.to_string(),
                sigma,
                l,
                jet: JetDoc::from_vector(&jet, spec.nb()),
                residuals,
                slope,
            };
            emit_json(src, stdout, &doc)?;
            Ok(0)
        }
        Command::Classify { src, sigma, k, jet } => {
            let spec = load(src)?;
            let sigma = finite("sigma", *sigma)?;
            let set = h0_conditions(&spec, sigma, *k, &tol)?;
            let conditions: Vec<Value> = set
                .conditions
                .iter()
                .map(|c| {
                    json!({
                        "boundary": c.boundary + 1,
                        "omega": c.omega.to_string(),
                        "class": c.class,
                        "magnitude": round12(c.magnitude),
                        "dim": c.dim,
                        "threshold": round12(c.threshold),
                        "coordinates": c.coordinates.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let mut doc = json!({ "sigma": sigma, "k": k, "conditions": conditions });
            if let Some(path) = jet {
                let space = JetSpace::new(&spec, *k)?;
                let x = parse_jet(&read(path)?, spec.nb())?;
                if x.len() > space.dim() {
                    return Err(AppError::Usage(format!("jet order exceeds --k {k}")));
                }
                let mem = h0_membership(&spec, &boundary_data(&space, &space.lift(&x, *k)), sigma, *k, &tol)?;
                doc["member"] = json!(mem.member);
                doc["violations"] = mem
                    .violations
                    .iter()
                    .map(|v| {
                        json!({
                            "omega": v.omega.to_string(),
                            "class": v.class,
                            "size": round12(v.size),
                            "coordinates": v.coordinates.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                        })
                    })
                    .collect();
            }
            emit_json(src, stdout, &doc)?;
            Ok(0)
        }
        Command::Interp { src, from, to, theta, scan } => {
            let spec = load(src)?;
            let a = endpoint(from)?;
            let b = endpoint(to)?;
            match scan {
                Some(0 | 1) => Err(AppError::Usage("--scan needs at least two steps".into())),
                Some(n) => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["theta", "sigma_theta", "label", "critical", "witnesses"]).map_err(csv_err)?;
                    for i in 1..*n {
                        let th = i as f64 / *n as f64;
                        let lab = interpolate_spaces(&spec, a, b, th, &tol)?;
                        w.write_record([
                            fmt12(th),
                            fmt12(lab.sigma_theta),
                            label_text(&lab),
                            lab.critical.to_string(),
                            witnesses(&lab).join(";"),
                        ])
                        .map_err(csv_err)?;
                    }
                    emit(src, stdout, &w.into_inner().map_err(|e| AppError::Format(e.to_string()))?)?;
                    Ok(0)
                }
                None => {
                    let th = finite("theta", theta.expect("clap requires theta without scan"))?;
                    let lab = interpolate_spaces(&spec, a, b, th, &tol)?;
                    let doc = json!({
                        "name": lab.name.as_str(),
                        "sigma": round12(lab.sigma),
                        "sigma_theta": round12(lab.sigma_theta),
                        "critical": lab.critical,
                        "label": label_text(&lab),
                        "witnesses": witnesses(&lab),
                    });
                    emit_json(src, stdout, &doc)?;
                    Ok(0)
                }
            }
        }
        Command::Resistance { src, m, x, y } => {
            let spec = load(src)?;
            let table = VertexTable::build(&spec, *m);
            let net = Network::new(&spec, &table)?;
            let target = y.map_or(Target::Boundary, Target::Vertex);
            let r = resistance(&net, *x, target)?;
            let doc = json!({
                "m": m,
                "x": x,
                "y": y.map_or(json!("boundary"), |v| json!(v)),
                "resistance": round12(r),
            });
            emit_json(src, stdout, &doc)?;
            Ok(0)
        }
        Command::Verify { src, k } => {
            let results = if src.builtin.is_none() && src.spec.is_none() {
                verify::run_all(&tol)
            } else {
                verify::spec_checks(&load(src)?, *k, &tol)
            };
            let mut text = String::new();
            for c in &results {
                text.push_str(&format!("{c}\n"));
            }
            let failed = results.iter().filter(|c| !c.pass).count();
            text.push_str(&format!("{} passed, {failed} failed\n", results.len() - failed));
            emit(src, stdout, text.as_bytes())?;
            Ok(if failed == 0 { 0 } else { 2 })
        }
        Command::Export { src, m, jet } => {
            let spec = load(src)?;
            let table = VertexTable::build(&spec, *m);
            let mut buf = Vec::new();
            match jet {
                None => write_vertex_table(&mut buf, &table)?,
                Some(path) => {
                    let text = read(path)?;
                    let x = parse_jet(&text, spec.nb())?;
                    let space = JetSpace::new(&spec, x.len() / spec.nb() - 1)?;
                    let values: Vec<f64> = space.eval(&x, &table)?.iter().map(|&v| round12(v)).collect();
                    write_vertex_function(&mut buf, &values)?;
                }
            }
            emit(src, stdout, &buf)?;
            Ok(0)
        }
    }
}

fn info(src: &Source, stdout: &mut dyn Write) -> AppResult<i32> {
    let spec = load(src)?;
    let d = dims(&spec);
    let (a1, witness) = spec.check_a1();
    let residual = verify_harmonic_structure(&spec)?;
    let d3 = D3::detect(&spec).map(|s| s.iota.iter().map(|&x| round12(x)).collect::<Vec<_>>());
    let doc = json!({
        "name": spec.name(),
        "n_letters": spec.n_letters(),
        "boundary_points": spec.nb(),
        "d_H": round12(d.d_h),
        "d_S": round12(d.d_s),
        "a1": a1,
        "a1_witness": witness.map(|(p, list)| json!({
            "boundary": p + 1,
            "addresses": list.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
        })),
        "a2": d.a2_holds,
        "a2_residual": round12(d.a2_residual),
        "harmonic_residual": round12(residual),
        "d3_iota": d3,
    });
    emit_json(src, stdout, &doc)?;
    Ok(0)
}

fn csv_err(e: csv::Error) -> AppError {
    AppError::Format(format!("csv: {e}"))
}

fn endpoint(text: &str) -> AppResult<(SpaceKind, f64)> {
    let (kind, sigma) =
        text.split_once(':').ok_or_else(|| AppError::Usage(format!("endpoint `{text}` must look like H0:2.5")))?;
    let kind = match kind {
        "H" => SpaceKind::H,
        "H0" => SpaceKind::H0,
        "H00" => SpaceKind::H00,
        other => return Err(AppError::Usage(format!("unknown space `{other}`; expected H, H0 or H00"))),
    };
    let sigma: f64 = sigma.parse().map_err(|_| AppError::Usage(format!("`{sigma}` is not a number")))?;
    Ok((kind, finite("from/--to", sigma)?))
}

fn label_text(lab: &SpaceLabel) -> String {
    match lab.name.as_str() {
        "L2" => "L2".into(),
        "dual_H00" => format!("(H00^{})'", fmt12(lab.sigma)),
        name => format!("{name}^{}", fmt12(lab.sigma)),
    }
}

fn witnesses(lab: &SpaceLabel) -> Vec<String> {
    lab.witnesses.iter().map(|(a, c)| format!("{a}#{c}")).collect()
}
