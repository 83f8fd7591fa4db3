//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::case::{DroopDirective, NetworkCase};
use crate::error::{Error, ErrorClass, Result};
use crate::fixtures;
use crate::io::{self, fmt_f64, fmt_opt, Format, Table};
use crate::linalg;
use crate::margin::{self, DeviceModel, FrequencyResponse, NetworkLoop, PlantZero};
use crate::network::{self, GridModel, OperatingPoint, ReducedNetwork};
use crate::ratlin::TransferMatrix;
use crate::reshape;
use crate::zerocalc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "zeroshape", version, about = "NMP zero analysis and droop placement for converter grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: RunOptions,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Write the Kron-reduced susceptance matrix.
    Reduce,
    /// Write the NMP zeros with an oracle cross-check.
    Zeros,
    /// Write the zero output directions.
    Direction,
    /// Write M_T, the exponential bounds and the Bode integral check.
    Bound,
    /// Write participation factors, sensitivities and the node ranking.
    Rank,
    /// Write the complementary-sensitivity sweep.
    Sweep,
    /// Write the eigenloci and the encirclement count.
    Nyquist,
    /// Run self-consistency checks; exit 3 on any failure.
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Default)]
pub enum FormatArg {
    #[default]
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct RunOptions {
    /// Grid model JSON.
    #[arg(long, global = true)]
    pub network: Option<PathBuf>,
    /// Operating point JSON.
    #[arg(long, global = true)]
    pub op: Option<PathBuf>,
    /// Device Jacobian JSON.
    #[arg(long, global = true)]
    pub device: Option<PathBuf>,
    /// Built-in fixture, `random-seed-<N>` or `didactic:z=..,kp=..,ki=..`.
    #[arg(long, global = true)]
    pub fixture: Option<String>,
    #[arg(long, global = true)]
    pub grid_min: Option<f64>,
    #[arg(long, global = true)]
    pub grid_max: Option<f64>,
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
    /// Droop gain at a node, `NODE=GAIN`; repeatable.
    #[arg(long = "droop", global = true, value_name = "NODE=GAIN")]
    pub droop: Vec<DroopDirective>,
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Relative tolerance for oracle agreement.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tol_rel: f64,
    /// Crossover frequency for a zero-only bound.
    #[arg(long, global = true)]
    pub omega_c: Option<f64>,
}

impl RunOptions {
    fn format(&self) -> Format {
        match self.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

/// Analysis subject resolved from the options.
pub enum Subject {
    Network { case: NetworkCase, device: Option<TransferMatrix> },
    Didactic { z: f64, kp: f64, ki: f64 },
}

impl Subject {
    pub fn load(opts: &RunOptions) -> Result<Self> {
        if let Some(name) = &opts.fixture {
            if opts.network.is_some() || opts.op.is_some() {
                return Err(Error::InvalidModel("--fixture excludes --network/--op".into()));
            }
            if name.starts_with("didactic") {
                let (z, kp, ki) = fixtures::parse_didactic(name)?;
                return Ok(Subject::Didactic { z, kp, ki });
            }
            let fx = fixtures::load_fixture(name)?;
            let net = fx.reduced()?;
            let op = fx.operating_point(&net)?;
            let droop: Vec<_> = fx.droop.iter().chain(&opts.droop).cloned().collect();
            let case = NetworkCase::from_reduced(net, op, &droop)?;
            let device = load_device(opts, &case)?;
            return Ok(Subject::Network { case, device });
        }
        let (Some(np), Some(op)) = (&opts.network, &opts.op) else {
            return Err(Error::InvalidModel("need --fixture, or both --network and --op".into()));
        };
        let model: GridModel = io::read_json(np)?;
        let op: OperatingPoint = io::read_json(op)?;
        let case = NetworkCase::build(&model, &op, &opts.droop)?;
        let device = load_device(opts, &case)?;
        Ok(Subject::Network { case, device })
    }

    fn network(&self, command: &str) -> Result<&NetworkCase> {
        match self {
            Subject::Network { case, .. } => Ok(case),
            Subject::Didactic { .. } => Err(Error::InvalidModel(format!("`{command}` needs a network input"))),
        }
    }

    /// Loop gain and its NMP zeros, when the subject has one.
    fn loop_gain(&self) -> Result<Option<(Box<dyn FrequencyResponse>, Vec<PlantZero>)>> {
        match self {
            Subject::Didactic { z, kp, ki } => {
                let l = fixtures::didactic_loop(*z, *kp, *ki)?;
                let zeros = margin::plant_rhp_zeros(&fixtures::didactic_plant(*z)?)?;
                Ok(Some((Box::new(l), zeros)))
            }
            Subject::Network { case, device: Some(dev) } => {
                let set = zerocalc::zeros_closed_form(&case.mats, case.omega0());
                let zeros = if case.jac.has_droop() {
                    let found = case.dominant_zero().map(|z| vec![z]).unwrap_or_default();
                    found
                        .into_iter()
                        .map(|z| {
                            let d = zerocalc::zero_direction(&case.jac, z)?;
                            Ok(PlantZero { z: Complex64::new(z, 0.0), direction: d.primary().clone() })
                        })
                        .collect::<Result<_>>()?
                } else {
                    margin::network_zeros(&case.jac, &set)?
                };
                Ok(Some((Box::new(NetworkLoop { jac: case.jac.clone(), device: dev.clone() }), zeros)))
            }
            Subject::Network { device: None, .. } => Ok(None),
        }
    }
}

fn load_device(opts: &RunOptions, case: &NetworkCase) -> Result<Option<TransferMatrix>> {
    let Some(path) = &opts.device else { return Ok(None) };
    let model: DeviceModel = io::read_json(path)?;
    Ok(Some(model.aggregate(case.net.node_order(), &case.mats.s_b)?))
}

fn grid(opts: &RunOptions, min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    let lo = opts.grid_min.unwrap_or(min);
    let hi = opts.grid_max.unwrap_or(max);
    let n = opts.grid_points.unwrap_or(points);
    if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidGrid(format!("need 0 < grid-min < grid-max, got [{lo}, {hi}]")));
    }
    if n < 3 {
        return Err(Error::InvalidGrid(format!("need at least 3 grid points, got {n}")));
    }
    Ok(zerocalc::log_grid(lo, hi, n))
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        ErrorClass::Input => EXIT_INPUT,
        ErrorClass::Numerical => EXIT_NUMERICAL,
    }
}

/// Parse `args`, run, report errors on stderr, return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let replay = args.iter().map(|a| a.to_string_lossy()).collect::<Vec<_>>().join(" ");
    match run(&cli, &replay) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli, replay: &str) -> Result<i32> {
    let opts = &cli.opts;
    std::fs::create_dir_all(&opts.out)?;
    if cli.command == Command::Reduce {
        return cmd_reduce(&load_reduced(opts)?, opts);
    }
    let subject = Subject::load(opts)?;
    match cli.command {
        Command::Reduce => unreachable!("handled above"),
        Command::Zeros => cmd_zeros(&subject, opts),
        Command::Direction => cmd_direction(&subject, opts),
        Command::Bound => cmd_bound(&subject, opts),
        Command::Rank => cmd_rank(&subject, opts),
        Command::Sweep => cmd_sweep(&subject, opts),
        Command::Nyquist => cmd_nyquist(&subject, opts),
        Command::Verify => cmd_verify(&subject, opts, replay),
    }
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

/// Reduced network alone; `reduce` needs no operating point.
fn load_reduced(opts: &RunOptions) -> Result<ReducedNetwork> {
    match (&opts.fixture, &opts.network) {
        (Some(name), None) if !name.starts_with("didactic") => fixtures::load_fixture(name)?.reduced(),
        (None, Some(path)) => network::build_reduced(&io::read_json(path)?),
        _ => Err(Error::InvalidModel("`reduce` needs exactly one of --fixture (network), --network".into())),
    }
}

fn cmd_reduce(net: &ReducedNetwork, opts: &RunOptions) -> Result<i32> {
    let path = match opts.format() {
        Format::Json => io::write_json(&opts.out, "B_r.json", net)?,
        Format::Csv => {
            let mut header = vec!["node".to_string()];
            header.extend(net.node_order().iter().cloned());
            let mut t = Table { header, rows: Vec::new() };
            for (i, id) in net.node_order().iter().enumerate() {
                let mut row = vec![id.clone()];
                row.extend((0..net.len()).map(|k| fmt_f64(net.b_r()[(i, k)])));
                t.push(row);
            }
            io::write_table(&opts.out, "B_r", &t, Format::Csv)?
        }
    };
    announce(&path);
    Ok(EXIT_OK)
}

fn oracle_range(case: &NetworkCase, opts: &RunOptions) -> Result<Vec<f64>> {
    grid(opts, 1.0, 10.0 * case.omega0(), zerocalc::DEFAULT_GRID_POINTS)
}

fn cmd_zeros(subject: &Subject, opts: &RunOptions) -> Result<i32> {
    let case = subject.network("zeros")?;
    let g = oracle_range(case, opts)?;
    let (lo, hi, pts) = (g[0], *g.last().expect("grid"), g.len());
    let set = zerocalc::zeros_closed_form(&case.mats, case.omega0());
    let eig = zerocalc::zeros_eigen_route(&case.mats, case.omega0())?;
    let oracle = zerocalc::zeros_oracle(&case.base, lo, hi, pts)?;
    let mut t = Table::new(&[
        "index", "sigma", "lambda_re", "lambda_im", "z_rad_s", "is_nmp", "residual", "oracle_z_rad_s", "oracle_agrees",
    ]);
    for (k, br) in set.branches.iter().enumerate() {
        let lambda = eig.get(k).map(|e| e.lambda).unwrap_or_default();
        let (residual, oracle_z, agrees) = match br.z {
            Some(z) if br.is_nmp() => {
                let nearest =
                    oracle.iter().map(|r| r.z).min_by(|a, b| (a - z).abs().total_cmp(&(b - z).abs()));
                let in_range = z >= lo && z <= hi;
                let agrees = nearest.map(|o| (o - z).abs() <= opts.tol_rel * z);
                let (oracle_cell, agree_cell) = match (in_range, agrees) {
                    (false, _) => (String::new(), "out_of_range".to_string()),
                    (true, Some(a)) => (fmt_opt(nearest), a.to_string()),
                    (true, None) => (String::new(), "false".to_string()),
                };
                (fmt_f64(zerocalc::residual_at(&case.base, z)?), oracle_cell, agree_cell)
            }
            _ => (String::new(), String::new(), String::new()),
        };
        t.push(vec![
            k.to_string(),
            fmt_f64(br.sigma),
            fmt_f64(lambda.re),
            fmt_f64(lambda.im),
            fmt_opt(br.z),
            br.is_nmp().to_string(),
            residual,
            oracle_z,
            agrees,
        ]);
    }
    announce(&io::write_table(&opts.out, "zeros", &t, opts.format())?);
    if case.jac.has_droop() {
        let roots = zerocalc::zeros_oracle(&case.jac, lo, hi, pts)?;
        let mut t = Table::new(&["index", "z_rad_s", "residual", "multiplicity_suspect"]);
        for (k, r) in roots.iter().enumerate() {
            t.push(vec![k.to_string(), fmt_f64(r.z), fmt_f64(r.residual), r.multiplicity_suspect.to_string()]);
        }
        announce(&io::write_table(&opts.out, "zeros_droop", &t, opts.format())?);
    }
    Ok(EXIT_OK)
}

fn cmd_direction(subject: &Subject, opts: &RunOptions) -> Result<i32> {
    let case = subject.network("direction")?;
    let g = oracle_range(case, opts)?;
    let zeros = case.nmp_zeros(g[0], *g.last().expect("grid"), g.len())?;
    let mut t = Table::new(&["zero_index", "z_rad_s", "vector_index", "component", "re", "im"]);
    for (zi, &z) in zeros.iter().enumerate() {
        let dir = zerocalc::zero_direction(&case.jac, z)?;
        for (vi, v) in dir.vectors.iter().enumerate() {
            for (c, x) in v.iter().enumerate() {
                t.push(vec![zi.to_string(), fmt_f64(z), vi.to_string(), c.to_string(), fmt_f64(x.re), fmt_f64(x.im)]);
            }
        }
    }
    announce(&io::write_table(&opts.out, "directions", &t, opts.format())?);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct BoundOutput {
    omega_c: f64,
    #[serde(rename = "M_T")]
    m_t: Option<f64>,
    bound_mimo: f64,
    bound_scalar: f64,
    gap: Option<f64>,
    dominant_zero: Option<f64>,
    lhs_integral: Option<f64>,
    rhs_integral: Option<f64>,
    truncation_est: Option<f64>,
    bode_inconclusive: Option<bool>,
    warnings: Vec<String>,
}

fn bode_range(zeros: &[PlantZero]) -> (f64, f64) {
    let mags = zeros.iter().map(|z| z.z.norm());
    let zmin = mags.clone().fold(f64::INFINITY, f64::min);
    let zmax = mags.fold(0.0, f64::max);
    if zmin.is_finite() { (1e-3 * zmin, 1e4 * zmax) } else { (1e-3, 1e6) }
}

fn cmd_bound(subject: &Subject, opts: &RunOptions) -> Result<i32> {
    let out = match subject.loop_gain()? {
        Some((l, zeros)) => {
            let sw = margin::sweep(l.as_ref(), &grid(opts, 1e-2, 1e6, 4000)?)?;
            let omega_c = opts.omega_c.unwrap_or(sw.omega_c);
            let rep = margin::bounds(&zeros, omega_c).with_peak(sw.m_t);
            let (lo, hi) = bode_range(&zeros);
            let bode = margin::bode_integral_check(l.as_ref(), &zeros, lo, hi)?;
            BoundOutput {
                omega_c,
                m_t: rep.m_t,
                bound_mimo: rep.bound_mimo,
                bound_scalar: rep.bound_scalar,
                gap: rep.gap(),
                dominant_zero: rep.dominant_zero,
                lhs_integral: Some(bode.lhs),
                rhs_integral: Some(bode.rhs),
                truncation_est: Some(bode.truncation_est),
                bode_inconclusive: Some(bode.inconclusive),
                warnings: sw.warnings,
            }
        }
        None => {
            let case = subject.network("bound")?;
            let omega_c = opts
                .omega_c
                .ok_or_else(|| Error::InvalidModel("zero-only bound needs --omega-c or --device".into()))?;
            let set = zerocalc::zeros_closed_form(&case.mats, case.omega0());
            let zeros = if case.jac.has_droop() {
                let z = case.dominant_zero()?;
                let d = zerocalc::zero_direction(&case.jac, z)?;
                vec![PlantZero { z: Complex64::new(z, 0.0), direction: d.primary().clone() }]
            } else {
                margin::network_zeros(&case.jac, &set)?
            };
            let rep = margin::bounds(&zeros, omega_c);
            BoundOutput {
                omega_c,
                m_t: None,
                bound_mimo: rep.bound_mimo,
                bound_scalar: rep.bound_scalar,
                gap: None,
                dominant_zero: rep.dominant_zero,
                lhs_integral: None,
                rhs_integral: None,
                truncation_est: None,
                bode_inconclusive: None,
                warnings: Vec::new(),
            }
        }
    };
    announce(&io::write_json(&opts.out, "bound.json", &out)?);
    Ok(EXIT_OK)
}

fn cmd_rank(subject: &Subject, opts: &RunOptions) -> Result<i32> {
    let case = subject.network("rank")?;
    let z0 = case.dominant_zero()?;
    let rep = reshape::rank_nodes(&case.jac, z0, case.net.node_order())?;
    announce(&io::write_json(&opts.out, "rank.json", &rep)?);
    println!("ranking: {}", rep.ranking.join(", "));
    Ok(EXIT_OK)
}

fn require_loop(subject: &Subject, command: &str) -> Result<Box<dyn FrequencyResponse>> {
    subject
        .loop_gain()?
        .map(|(l, _)| l)
        .ok_or_else(|| Error::InvalidModel(format!("`{command}` needs --device or a didactic fixture")))
}

fn cmd_sweep(subject: &Subject, opts: &RunOptions) -> Result<i32> {
    let l = require_loop(subject, "sweep")?;
    let sw = margin::sweep(l.as_ref(), &grid(opts, 1e-2, 1e6, 4000)?)?;
    let mut t = Table::new(&["omega_rad_s", "sigma_max_T", "ln_sigma_over_w2"]);
    for ((w, s), r) in sw.omegas.iter().zip(&sw.sigma_max).zip(sw.ln_sigma_over_w2()) {
        t.push(vec![fmt_f64(*w), fmt_f64(*s), fmt_f64(r)]);
    }
    for w in &sw.warnings {
        eprintln!("warning: {w}");
    }
    announce(&io::write_table(&opts.out, "sweep", &t, opts.format())?);
    println!("M_T = {} at {} rad/s; omega_c = {} rad/s", fmt_f64(sw.m_t), fmt_f64(sw.m_t_omega), fmt_f64(sw.omega_c));
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct NyquistSummary {
    min_distance: f64,
    min_distance_omega: f64,
    encirclements_cw: i64,
    open_loop_rhp_poles: Option<usize>,
    closed_loop_rhp_poles: Option<i64>,
    pairing_warnings: usize,
}

fn cmd_nyquist(subject: &Subject, opts: &RunOptions) -> Result<i32> {
    let l = require_loop(subject, "nyquist")?;
    let rep = margin::nyquist(l.as_ref(), &grid(opts, 1e-2, 1e6, 4000)?)?;
    let mut t = Table::new(&["omega_rad_s", "locus_index", "re", "im"]);
    for (i, w) in rep.omegas.iter().enumerate() {
        for (k, locus) in rep.loci.iter().enumerate() {
            t.push(vec![fmt_f64(*w), k.to_string(), fmt_f64(locus[i].re), fmt_f64(locus[i].im)]);
        }
    }
    announce(&io::write_table(&opts.out, "nyquist", &t, opts.format())?);
    let summary = NyquistSummary {
        min_distance: rep.min_distance,
        min_distance_omega: rep.min_distance_omega,
        encirclements_cw: rep.encirclements_cw,
        open_loop_rhp_poles: rep.open_loop_rhp_poles,
        closed_loop_rhp_poles: rep.closed_loop_rhp_poles,
        pairing_warnings: rep.pairing_warnings,
    };
    announce(&io::write_json(&opts.out, "nyquist_summary.json", &summary)?);
    Ok(EXIT_OK)
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    replay: &'a str,
    passed: bool,
    checks: &'a [Check],
}

fn cmd_verify(subject: &Subject, opts: &RunOptions, replay: &str) -> Result<i32> {
    let checks = match subject {
        Subject::Network { case, .. } => verify_network(case, opts)?,
        Subject::Didactic { z, kp, ki } => verify_didactic(*z, *kp, *ki, opts)?,
    };
    let passed = checks.iter().all(|c| c.passed);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    announce(&io::write_json(&opts.out, "verify.json", &VerifyOutput { replay, passed, checks: &checks })?);
    if passed {
        Ok(EXIT_OK)
    } else {
        eprintln!("verification failed; replay with: {replay}");
        Ok(EXIT_VERIFY)
    }
}

/// Route agreement, dual assembly, sensitivity and passivity checks.
pub fn verify_network(case: &NetworkCase, opts: &RunOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let w0 = case.omega0();
    let tol = opts.tol_rel;
    let set = zerocalc::zeros_closed_form(&case.mats, w0);
    let closed = set.zeros();
    let mut eig: Vec<f64> = zerocalc::zeros_eigen_route(&case.mats, w0)?.iter().filter_map(|b| b.z).collect();
    eig.sort_by(f64::total_cmp);
    let g = oracle_range(case, opts)?;
    let (lo, hi) = (g[0], *g.last().expect("grid"));
    let oracle: Vec<f64> = zerocalc::zeros_oracle(&case.base, lo, hi, g.len())?.iter().map(|r| r.z).collect();
    let in_range: Vec<f64> = closed.iter().copied().filter(|z| *z >= lo && *z <= hi).collect();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE);
    let eig_gap = if eig.len() == closed.len() {
        closed.iter().zip(&eig).map(|(a, b)| rel(*a, *b)).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    checks.push(Check::new(
        "closed_form_vs_eigen_route",
        eig_gap <= tol,
        format!("{} zeros vs {}, max relative gap {:.3e} (tol {tol:.1e})", closed.len(), eig.len(), eig_gap),
    ));
    let oracle_gap = if oracle.len() == in_range.len() {
        in_range.iter().zip(&oracle).map(|(a, b)| rel(*a, *b)).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    checks.push(Check::new(
        "closed_form_vs_oracle",
        oracle_gap <= tol,
        format!(
            "{} zeros in [{lo:.3e}, {hi:.3e}] vs {} oracle roots, max relative gap {oracle_gap:.3e}",
            in_range.len(),
            oracle.len()
        ),
    ));

    let probes = [
        Complex64::new(0.3 * w0, 0.0),
        Complex64::new(3.0 * w0, 0.0),
        Complex64::new(0.2 * w0, 0.7 * w0),
        Complex64::new(0.0, 0.5 * w0),
    ];
    let mut worst = 0.0f64;
    for s in probes {
        let a = case.jac.assemble(s)?;
        let b = case.jac.assemble_blocks(s)?;
        worst = worst.max(linalg::max_abs_diff(&a, &b) / linalg::frobenius(&a).max(1.0));
    }
    checks.push(Check::new("kronecker_vs_block_assembly", worst <= 1e-12, format!("max relative difference {worst:.3e}")));

    let z0 = case.dominant_zero()?;
    let rep = reshape::zero_sensitivity_report(&case.jac, z0)?;
    for i in 0..case.n() {
        let an = rep.dz_dk[i].re;
        let fd = reshape::finite_difference_sensitivity(&case.jac, z0, Some(i), 1e-4)?;
        checks.push(Check::new(
            format!("sensitivity_node_{}", case.net.node_order()[i]),
            (fd - an).abs() <= 0.01 * an.abs(),
            format!("analytic {} finite-difference {}", fmt_f64(an), fmt_f64(fd)),
        ));
    }
    let (gate, min_eig) = reshape::passivity_gate(&case.jac);
    if gate {
        checks.push(Check::new(
            "re_s_sys_positive",
            rep.s_sys.re > 0.0,
            format!("Re(S_sys) = {}", fmt_f64(rep.s_sys.re)),
        ));
    } else {
        checks.push(Check::new(
            "re_s_sys_positive",
            true,
            format!("passivity precondition unmet (min eig Re(Y) = {min_eig:.3e}); no verdict"),
        ));
    }
    Ok(checks)
}

/// Pole/encirclement agreement and plant-zero recovery on the 2×2 system.
pub fn verify_didactic(z: f64, kp: f64, ki: f64, opts: &RunOptions) -> Result<Vec<Check>> {
    let l = fixtures::didactic_loop(z, kp, ki)?;
    let poles = l.closed_loop_poles()?;
    let unstable = poles.poles.iter().filter(|p| p.value.re > 0.0).count() as i64;
    let ny = margin::nyquist(&l, &grid(opts, 1e-2, 1e6, 4000)?)?;
    let mut checks = vec![Check::new(
        "nyquist_vs_closed_loop_poles",
        ny.closed_loop_rhp_poles == Some(unstable),
        format!("Nyquist Z = {:?}, RHP closed-loop poles = {unstable}", ny.closed_loop_rhp_poles),
    )];
    let zeros = margin::plant_rhp_zeros(&fixtures::didactic_plant(z)?)?;
    let found: Vec<f64> = zeros.iter().map(|p| p.z.re).collect();
    checks.push(Check::new(
        "plant_zero_recovered",
        found.len() == 1,
        format!("RHP plant zeros {found:?}"),
    ));
    Ok(checks)
}
