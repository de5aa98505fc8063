//! Command dispatch for the `multimatrix` binary.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Value};

use multimatrix::algebra::{parse, parse_infer, parse_word, regularity_check, TracePoly};
use multimatrix::harness::{
    fit_expansion, read_csv, FitPoint, RunConfig, RunResult, Sampler,
};
use multimatrix::langevin::{estimate_gue, estimate_observables, sample_model};
use multimatrix::matrix::{gue_tuple, tr_n};
use multimatrix::rng::stream_rng;
use multimatrix::semicircle::{
    cond_exp, gaussian_to_f64, sd_residual, sd_residual_exact, tau_trace_poly, SemicircleFamily,
};
use multimatrix::stats::{mean_stderr, Estimate};
use multimatrix::transport::{flow_transport_report, pushforward_check, strong_conv_scan};
use multimatrix::wick::{gue_expect_word_capped, gue_series, DEFAULT_MAX_LETTERS};
use multimatrix::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "multimatrix", version, about = "Multimatrix models: oracles, sampling, transport")]
struct Cli {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for results.csv and manifest.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Exact genus series of E[tr_N w] for a word, or of a trace polynomial.
    Oracle {
        #[arg(long)]
        word: Option<String>,
        #[arg(long)]
        poly: Option<String>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MAX_LETTERS)]
        max_letters: usize,
    },
    /// Free semicircular moment τ(p).
    Tau {
        #[arg(long)]
        poly: String,
        #[arg(long)]
        d: Option<usize>,
        /// Covariance rows, e.g. "1,0.5;0.5,1".
        #[arg(long)]
        cov: Option<String>,
    },
    /// Schwinger–Dyson residuals τ(x_e f) − τ⊗τ(∂_e f).
    SdCheck {
        #[arg(long)]
        poly: String,
        #[arg(long)]
        d: Option<usize>,
        /// 1-based variable; all variables when absent.
        #[arg(long)]
        e: Option<usize>,
        #[arg(long)]
        cov: Option<String>,
    },
    /// Conditional expectation integrating out the listed semicircular variables.
    CondExp {
        #[arg(long)]
        poly: String,
        /// 1-based labels of the variables integrated out, e.g. "1,3".
        #[arg(long)]
        y: String,
        #[arg(long)]
        d: Option<usize>,
        /// Covariance of the integrated variables.
        #[arg(long)]
        cov: Option<String>,
    },
    /// κ_R and the k-regularity threshold for W.
    Regularity {
        #[arg(long = "W")]
        w: String,
        #[arg(long = "R", default_value_t = 4.0)]
        r: f64,
        #[arg(long, default_value_t = 0)]
        k: u32,
        #[arg(long)]
        d: Option<usize>,
    },
    /// Per-sample observable values from the configured model.
    Sample,
    /// Observable means with standard errors for N or each entry of n_grid.
    Estimate,
    /// Fits a0 + a1/N² + … to results.csv rows, a config run, or oracle values.
    FitExpansion {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        order: usize,
        #[arg(long)]
        oracle_word: Option<String>,
        /// Sizes for --oracle-word, e.g. "4,6,8,12,16".
        #[arg(long)]
        n_grid: Option<String>,
    },
    /// Applies the transport flow to M GUE samples.
    Transport,
    /// Compares transported GUE samples against direct sampling.
    PushforwardCheck,
    /// Operator norms of a polynomial over the N grid.
    StrongConv {
        #[arg(long)]
        poly: String,
    },
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn dispatch<O: Write, E: Write>(argv: &[String], out: &mut O, err: &mut E) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    if let Some(k) = cli.threads {
        // a pool configured earlier in the process keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
    match run(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_CONFIG
            }
        }
    }
}

fn poly_arg(s: &str, d: Option<usize>) -> Result<TracePoly> {
    match d {
        Some(d) => parse(s, d),
        None => parse_infer(s),
    }
}

fn family(cov: Option<&str>, d: usize) -> Result<SemicircleFamily> {
    let Some(text) = cov else {
        return Ok(SemicircleFamily::standard(d));
    };
    let rows = text
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Config(format!("covariance entry {x:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    SemicircleFamily::with_covariance(rows)
}

fn usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|e| Error::Config(format!("integer list entry {x:?}: {e}")))
        })
        .collect()
}

fn complex_json(z: Complex64) -> Value {
    if z.im == 0.0 {
        json!(z.re)
    } else {
        json!([z.re, z.im])
    }
}

fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

fn print_json<O: Write>(out: &mut O, v: &Value) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --config FILE".into()))?;
    let mut c = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    Ok(c)
}

fn save(cli: &Cli, result: &RunResult) -> Result<()> {
    if let Some(dir) = &cli.out {
        result.save(dir)?;
    }
    Ok(())
}

fn print_rows<O: Write>(out: &mut O, rows: &[Estimate]) -> Result<()> {
    writeln!(out, "observable,N,mean,stderr,M")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.observable, r.n, r.mean, r.stderr, r.m)?;
    }
    Ok(())
}

fn use_gue(c: &RunConfig, n: usize) -> Result<bool> {
    let model = c.model(n)?;
    match c.sampler {
        Sampler::Auto => Ok(model.is_gaussian()),
        Sampler::Langevin => Ok(false),
        Sampler::Gue if model.is_gaussian() => Ok(true),
        Sampler::Gue => Err(Error::Config(
            "sampler = \"gue\" requires the potential ½ΣX²".into(),
        )),
    }
}

fn estimate_rows(c: &RunConfig) -> Result<Vec<Estimate>> {
    let obs = c.observable_polys()?;
    let mut rows = Vec::new();
    for n in c.sizes() {
        if use_gue(c, n)? {
            rows.extend(estimate_gue(n, c.d, c.m * c.samples_per_trajectory, c.seed, &obs)?);
        } else {
            rows.extend(estimate_observables(&c.model(n)?, &c.sde_params(), &obs)?);
        }
    }
    Ok(rows)
}

fn fit_rows<O: Write>(out: &mut O, rows: &[Estimate], order: usize) -> Result<Value> {
    let mut names: Vec<&str> = rows.iter().map(|r| r.observable.as_str()).collect();
    names.dedup();
    let mut fits = Vec::new();
    for name in names {
        let pts: Vec<FitPoint> = rows
            .iter()
            .filter(|r| r.observable == name)
            .map(|r| FitPoint {
                n: r.n as f64,
                value: r.mean,
                stderr: r.stderr,
            })
            .collect();
        let f = fit_expansion(&pts, order)?;
        fits.push(json!({ "observable": name, "fit": f }));
    }
    let v = json!({ "order": order, "fits": fits });
    print_json(out, &v)?;
    Ok(v)
}

fn run<O: Write>(cli: &Cli, out: &mut O) -> Result<()> {
    match &cli.cmd {
        Cmd::Oracle {
            word,
            poly,
            d,
            max_letters,
        } => match (word, poly) {
            (Some(w), None) => {
                let s = gue_expect_word_capped(&parse_word(w)?, *max_letters)?;
                writeln!(out, "{}", s.to_json())?;
                Ok(())
            }
            (None, Some(p)) => {
                let c = gue_series(&poly_arg(p, *d)?, *max_letters)?;
                let coeffs: Vec<Value> = c.into_iter().map(complex_json).collect();
                writeln!(out, "{}", json!({ "coeffs": coeffs }))?;
                Ok(())
            }
            _ => Err(Error::Config("oracle takes exactly one of --word, --poly".into())),
        },
        Cmd::Tau { poly, d, cov } => {
            let p = poly_arg(poly, *d)?;
            let fam = family(cov.as_deref(), p.nvars())?;
            writeln!(out, "{}", fmt_complex(tau_trace_poly(&p, &fam)?))?;
            Ok(())
        }
        Cmd::SdCheck { poly, d, e, cov } => {
            let p = poly_arg(poly, *d)?;
            let fam = family(cov.as_deref(), p.nvars())?;
            let vars: Vec<usize> = match e {
                Some(e) if *e >= 1 => vec![e - 1],
                Some(_) => return Err(Error::Config("variables are numbered from 1".into())),
                None => (0..p.nvars()).collect(),
            };
            let mut rows = Vec::new();
            for v in vars {
                let row = match sd_residual_exact(&p, v, &fam) {
                    Ok(r) => json!({ "e": v + 1, "residual": complex_json(gaussian_to_f64(&r)), "exact": true }),
                    Err(Error::NotExact) => json!({
                        "e": v + 1,
                        "residual": complex_json(sd_residual(&p, v, &fam)?),
                        "exact": false
                    }),
                    Err(e) => return Err(e),
                };
                rows.push(row);
            }
            print_json(out, &json!({ "poly": p.to_string(), "residuals": rows }))
        }
        Cmd::CondExp { poly, y, d, cov } => {
            let p = poly_arg(poly, *d)?;
            let labels = usize_list(y)?;
            if labels.contains(&0) {
                return Err(Error::Config("variables are numbered from 1".into()));
            }
            let labels: Vec<usize> = labels.into_iter().map(|l| l - 1).collect();
            let fam = family(cov.as_deref(), labels.len())?;
            writeln!(out, "{}", cond_exp(&p, &labels, &fam)?)?;
            Ok(())
        }
        Cmd::Regularity { w, r, k, d } => {
            let w = poly_arg(w, *d)?;
            let rep = regularity_check(&w, *r, *k)?;
            print_json(out, &serde_json::to_value(&rep)?)
        }
        Cmd::Sample => {
            let c = load_config(cli)?;
            let obs = c.observable_polys()?;
            let mut table = String::from("trajectory,sample,N,observable,value\n");
            let mut rows = Vec::new();
            for n in c.sizes() {
                let samples: Vec<Vec<_>> = if use_gue(&c, n)? {
                    (0..(c.m * c.samples_per_trajectory) as u64)
                        .map(|i| vec![gue_tuple(&mut stream_rng(c.seed, &[0x5341_4d50, n as u64, i]), n, c.d, 1.0)])
                        .collect()
                } else {
                    sample_model(&c.model(n)?, &c.sde_params())?
                };
                for (j, f) in obs.iter().enumerate() {
                    let mut vals = Vec::new();
                    for (t, traj) in samples.iter().enumerate() {
                        for (s, y) in traj.iter().enumerate() {
                            let v = tr_n(&multimatrix::algebra::eval(f, y)?).re;
                            table.push_str(&format!("{t},{s},{n},{},{v}\n", c.observables[j]));
                            vals.push(v);
                        }
                    }
                    let (mean, stderr) = mean_stderr(&vals);
                    rows.push(Estimate {
                        observable: f.to_string(),
                        n,
                        mean,
                        stderr,
                        m: vals.len(),
                    });
                }
            }
            write!(out, "{table}")?;
            let result = RunResult::start("sample", &c)?.finish(rows, Value::Null);
            if let Some(dir) = &cli.out {
                result.save(dir)?;
                std::fs::write(dir.join("samples.csv"), table)?;
            }
            Ok(())
        }
        Cmd::Estimate => {
            let c = load_config(cli)?;
            let result = RunResult::start("estimate", &c)?;
            let rows = estimate_rows(&c)?;
            print_rows(out, &rows)?;
            save(cli, &result.finish(rows, Value::Null))
        }
        Cmd::FitExpansion {
            input,
            order,
            oracle_word,
            n_grid,
        } => {
            if let Some(w) = oracle_word {
                let series = gue_expect_word_capped(&parse_word(w)?, DEFAULT_MAX_LETTERS)?;
                let grid = usize_list(n_grid.as_deref().unwrap_or("2,3,4,6,8,12,16"))?;
                let rows: Vec<Estimate> = grid
                    .iter()
                    .map(|&n| Estimate {
                        observable: w.clone(),
                        n,
                        mean: series.eval(n),
                        stderr: 0.0,
                        m: 0,
                    })
                    .collect();
                fit_rows(out, &rows, *order)?;
                return Ok(());
            }
            if let Some(path) = input {
                fit_rows(out, &read_csv(path)?, *order)?;
                return Ok(());
            }
            let c = load_config(cli)?;
            let result = RunResult::start("fit-expansion", &c)?;
            let rows = estimate_rows(&c)?;
            let fits = fit_rows(out, &rows, *order)?;
            save(cli, &result.finish(rows, fits))
        }
        Cmd::Transport => {
            let c = load_config(cli)?;
            let spec = c.transport_spec()?;
            let obs = c.observable_polys()?;
            let result = RunResult::start("transport", &c)?;
            let mut vals = vec![Vec::new(); obs.len()];
            let mut tail: f64 = 0.0;
            let mut flow_se: f64 = 0.0;
            let mut stages = Vec::new();
            for i in 0..c.m as u64 {
                let h = gue_tuple(&mut stream_rng(c.seed, &[0x5452_414e, c.n as u64, i]), c.n, c.d, 1.0);
                let rep = flow_transport_report(&spec, &h, multimatrix::rng::stream_seed(c.seed, &[i]))?;
                let mut ev = multimatrix::algebra::Evaluator::new(&rep.map);
                for (j, f) in obs.iter().enumerate() {
                    vals[j].push(tr_n(&ev.eval(f)).re);
                }
                tail = tail.max(rep.accumulated_tail);
                flow_se = flow_se.max(rep.accumulated_stderr);
                if i == 0 {
                    stages = rep.stages.clone();
                }
            }
            let rows: Vec<Estimate> = obs
                .iter()
                .zip(&vals)
                .map(|(f, v)| {
                    let (mean, stderr) = mean_stderr(v);
                    Estimate {
                        observable: f.to_string(),
                        n: c.n,
                        mean,
                        stderr,
                        m: v.len(),
                    }
                })
                .collect();
            let report = json!({
                "pushforward": rows,
                "max_accumulated_tail": tail,
                "max_accumulated_stderr": flow_se,
                "decay_rate": spec.decay_rate()?,
                "T_max": spec.t_max,
                "first_sample_stages": stages,
            });
            print_json(out, &report)?;
            save(cli, &result.finish(rows, report))
        }
        Cmd::PushforwardCheck => {
            let c = load_config(cli)?;
            let spec = c.transport_spec()?;
            let result = RunResult::start("pushforward-check", &c)?;
            let rep = pushforward_check(&spec, c.n, &c.observable_polys()?, c.m, &c.sde_params(), c.seed)?;
            let mut rows = Vec::new();
            for cmp in &rep.comparisons {
                let mut p = cmp.pushforward.clone();
                p.observable = format!("{} [pushforward]", cmp.observable);
                let mut d = cmp.direct.clone();
                d.observable = format!("{} [direct]", cmp.observable);
                rows.push(p);
                rows.push(d);
            }
            let report = serde_json::to_value(&rep)?;
            print_json(out, &report)?;
            save(cli, &result.finish(rows, report))
        }
        Cmd::StrongConv { poly } => {
            let c = load_config(cli)?;
            let p = parse(poly, c.d)?;
            let result = RunResult::start("strong-conv", &c)?;
            let rep = strong_conv_scan(&p, &c.potential()?, &c.sizes(), &c.sde_params(), c.seed)?;
            let report = serde_json::to_value(&rep)?;
            print_json(out, &report)?;
            save(cli, &result.finish(Vec::new(), report))
        }
    }
}
