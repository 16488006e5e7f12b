//! `msewave`: convergence sweeps, benchmark runs, mesh dumps and kernel
//! checks for the coupled mild-slope solver.

mod config;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use msewave::bench::{
    circular_shoal_sections, elliptic_shoal_sections, error_relative, extract_profile, kernel_check, load_or_run,
    plane_wave_mesh, run_coupled, run_plane_wave, self_convergence, CoupledCase, ErrorReport, Method, Section,
};
use msewave::greens::QuadratureSpec;
use msewave::io::{field_rows, write_convergence_csv, write_field_csv, write_profile_csv};
use msewave::mesh::Rectangle;
use msewave::sem::MassQuadrature;
use msewave::Error;

#[derive(Parser, Debug)]
#[command(name = "msewave", version, about = "Coupled BSEM-SEM mild-slope wave solver")]
struct Cli {
    /// Plain `key = value` file supplying defaults for the subcommand flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads; 1 gives reproducible output.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Error against the exact or a reference solution over a range of orders.
    Converge(ConvergeArgs),
    /// Solve one benchmark and write the field and section profiles.
    Run(RunArgs),
    /// Write the node, element and boundary listing of a benchmark mesh.
    DumpMesh(MeshArgs),
    /// Compare the transformed kernel on a flat bed with the Hankel kernel.
    KernelCheck(KernelArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CaseId {
    PlaneWave,
    CircularShoal,
    EllipticShoal,
    NullScatterer,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Sem,
    Bsem,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MassArg {
    Lgl,
    Gauss,
}

#[derive(Args, Debug)]
struct CaseArgs {
    /// Benchmark to set up.
    #[arg(long, value_enum)]
    case: CaseId,
    /// Elements along x.
    #[arg(long)]
    nx: Option<usize>,
    /// Elements along y.
    #[arg(long)]
    ny: Option<usize>,
    /// Wave period in seconds.
    #[arg(long)]
    period: Option<f64>,
    /// Incident direction in degrees from the x axis.
    #[arg(long)]
    theta: Option<f64>,
    /// Incident wave height in metres.
    #[arg(long)]
    height: Option<f64>,
    /// Depth of the null-scatterer case.
    #[arg(long)]
    depth: Option<f64>,
    /// Mass quadrature: nodal LGL, or Gauss on elements crossing a depth kink.
    #[arg(long, value_enum)]
    mass: Option<MassArg>,
    /// Gauss points for regular boundary integrals.
    #[arg(long)]
    gauss_points: Option<usize>,
    /// Panel width of the transverse kernel quadrature.
    #[arg(long)]
    kernel_panel: Option<f64>,
    /// Gauss points per transverse panel.
    #[arg(long)]
    kernel_points: Option<usize>,
    /// Transverse cut-off as a multiple of the largest wavenumber.
    #[arg(long)]
    kernel_cap: Option<f64>,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    #[command(flatten)]
    case: CaseArgs,
    /// Element size of the plane-wave mesh.
    #[arg(long, default_value_t = 0.2)]
    h: f64,
    /// Orders: `2..12`, `4` or `2,4,6`.
    #[arg(long, value_parser = parse_orders)]
    p: Option<Orders>,
    /// Discretization of the plane-wave sweep.
    #[arg(long, value_enum, default_value_t = MethodArg::Sem)]
    method: MethodArg,
    /// Order of the reference run for self-convergence.
    #[arg(long, default_value_t = 15)]
    ref_p: usize,
    /// Directory of stored reference fields.
    #[arg(long)]
    ref_dir: Option<PathBuf>,
    /// Record wall-clock times; `false` writes zeros so reruns are byte-identical.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    timing: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    case: CaseArgs,
    /// Element order.
    #[arg(long)]
    p: usize,
    /// Order of a reference run to report the relative error against.
    #[arg(long)]
    ref_p: Option<usize>,
    /// Directory of stored reference fields.
    #[arg(long)]
    ref_dir: Option<PathBuf>,
    /// Longitudinal section of the circular shoal.
    #[arg(long, default_value_t = 1.2)]
    section_y: f64,
    /// Samples per section profile.
    #[arg(long, default_value_t = 241)]
    samples: usize,
    /// Record wall-clock times; `false` writes zeros so reruns are byte-identical.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    timing: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MeshArgs {
    #[command(flatten)]
    case: CaseArgs,
    /// Element order.
    #[arg(long)]
    p: usize,
    /// Element size of the plane-wave mesh.
    #[arg(long, default_value_t = 0.2)]
    h: f64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct KernelArgs {
    /// Depth of the flat bed in metres.
    #[arg(long, default_value_t = 0.45)]
    depth: f64,
    /// Wave period in seconds.
    #[arg(long, default_value_t = 1.0)]
    period: f64,
    /// Number of field points, with kr log-spaced on [0.1, 20].
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    /// Panel width of the transverse kernel quadrature.
    #[arg(long)]
    kernel_panel: Option<f64>,
    /// Gauss points per transverse panel.
    #[arg(long)]
    kernel_points: Option<usize>,
    /// Transverse cut-off as a multiple of the largest wavenumber.
    #[arg(long)]
    kernel_cap: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
struct Orders(Vec<usize>);

fn parse_orders(s: &str) -> Result<Orders, String> {
    let bad = || format!("invalid order list `{s}`");
    let v: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if v.is_empty() || v.contains(&0) {
        return Err(bad());
    }
    Ok(Orders(v))
}

enum Failure {
    Clap(clap::Error),
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_possible_value().expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Clap(e)) => {
            let _ = e.print();
            if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

const SUBCOMMANDS: [&str; 4] = ["converge", "run", "dump-mesh", "kernel-check"];

/// `--config` path and subcommand name, found before full parsing so that
/// required flags may come from the file.
fn prescan(argv: &[OsString]) -> (Option<PathBuf>, Option<String>) {
    let mut config = None;
    let mut sub = None;
    let mut it = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned());
    while let Some(a) = it.next() {
        if a == "--config" {
            config = it.next().map(PathBuf::from);
        } else if let Some(v) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else if sub.is_none() && SUBCOMMANDS.contains(&a.as_str()) {
            sub = Some(a);
        }
    }
    (config, sub)
}

fn parse(argv: Vec<OsString>) -> Result<Cli, Failure> {
    let (Some(path), Some(name)) = prescan(&argv) else {
        return Cli::try_parse_from(&argv).map_err(Failure::Clap);
    };
    let entries = config::read_config(&path).map_err(Failure::Usage)?;
    let cmd = Cli::command();
    let sub = cmd.find_subcommand(&name).expect("known subcommand");
    let allowed: BTreeSet<String> = sub
        .get_arguments()
        .chain(cmd.get_arguments())
        .filter_map(|a| a.get_long())
        .filter(|l| !matches!(*l, "config" | "help" | "version"))
        .map(str::to_string)
        .collect();
    let merged = config::merge_args(&argv, &name, &entries, &allowed).map_err(Failure::Usage)?;
    let matches = Cli::command()
        .mut_subcommand(&name, |s| s.args_override_self(true))
        .try_get_matches_from(merged)
        .map_err(Failure::Clap)?;
    Cli::from_arg_matches(&matches).map_err(Failure::Clap)
}

fn run(argv: Vec<OsString>) -> Result<(), Failure> {
    let cli = parse(argv)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(Error::Internal(e.to_string())))?;
    }
    match cli.command {
        Command::Converge(a) => converge(a),
        Command::Run(a) => run_case(a),
        Command::DumpMesh(a) => dump_mesh(a),
        Command::KernelCheck(a) => kernel(a),
    }
}

fn coupled_case(a: &CaseArgs) -> Result<CoupledCase, Failure> {
    let mut case = match a.case {
        CaseId::CircularShoal => CoupledCase::circular_shoal(),
        CaseId::EllipticShoal => CoupledCase::elliptic_shoal(),
        CaseId::NullScatterer => CoupledCase::flat(
            Rectangle::new(0.0, 2.4, 0.0, 2.4),
            (10, 10),
            0.511,
            20f64.to_radians(),
            a.depth.unwrap_or(0.15),
        ),
        CaseId::PlaneWave => {
            return Err(Failure::Usage("plane-wave is a boundary-value test; use `converge`".into()));
        }
    };
    if a.depth.is_some() && a.case != CaseId::NullScatterer {
        return Err(Failure::Usage("--depth applies to the null-scatterer case only".into()));
    }
    if let Some(nx) = a.nx {
        case.nx = nx;
    }
    if let Some(ny) = a.ny {
        case.ny = ny;
    }
    if a.period.is_some() || a.theta.is_some() || a.height.is_some() {
        let period = a.period.unwrap_or(case.env.period());
        let theta = a.theta.map(f64::to_radians).unwrap_or(case.env.theta);
        let height = a.height.unwrap_or(case.incident_height);
        case = case.with_wave(period, theta, height);
    }
    if let Some(m) = a.mass {
        case.mass = match m {
            MassArg::Lgl => MassQuadrature::Lgl,
            MassArg::Gauss => MassQuadrature::GaussOnKinks,
        };
    }
    if let Some(n) = a.gauss_points {
        case.bsem.gauss_points = n;
    }
    if a.kernel_panel.is_some() || a.kernel_points.is_some() || a.kernel_cap.is_some() {
        let d = case.domain;
        let base = QuadratureSpec::for_extent(d.width().hypot(d.height()));
        case.kernel = Some(tune(base, a.kernel_panel, a.kernel_points, a.kernel_cap));
    }
    Ok(case)
}

fn tune(base: QuadratureSpec, panel: Option<f64>, points: Option<usize>, cap: Option<f64>) -> QuadratureSpec {
    QuadratureSpec {
        panel_width: panel.unwrap_or(base.panel_width),
        points: points.unwrap_or(base.points),
        cap_factor: cap.unwrap_or(base.cap_factor),
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(Error::io(dir, e)))
}

fn untimed(mut reports: Vec<ErrorReport>, timing: bool) -> Vec<ErrorReport> {
    if !timing {
        for r in &mut reports {
            r.runtime_s = 0.0;
        }
    }
    reports
}

fn print_reports(reports: &[ErrorReport]) {
    for r in reports {
        let e = r.linf_error.or(r.relative_error).unwrap_or(f64::NAN);
        println!("p={:2} dof={:7} error={e:.3e} time={:.2}s", r.p, r.dof, r.runtime_s);
    }
}

fn converge(a: ConvergeArgs) -> Result<(), Failure> {
    create_dir(&a.out)?;
    let path = a.out.join("convergence.csv");
    let reports = if a.case.case == CaseId::PlaneWave {
        let ps = a.p.map(|o| o.0).unwrap_or_else(|| (2..=12).collect());
        let method = match a.method {
            MethodArg::Sem => Method::Sem,
            MethodArg::Bsem => Method::Bsem,
        };
        run_plane_wave(a.h, &ps, method)?
    } else {
        let case = coupled_case(&a.case)?;
        let default: Vec<usize> = match a.case.case {
            CaseId::EllipticShoal => vec![4],
            _ => (2..=10).collect(),
        };
        let ps = a.p.map(|o| o.0).unwrap_or(default);
        if ps.iter().any(|&p| p > a.ref_p) {
            return Err(Failure::Usage(format!("orders must not exceed --ref-p {}", a.ref_p)));
        }
        let ref_dir = a.ref_dir.clone().unwrap_or_else(|| a.out.join("reference"));
        let reference = load_or_run(&case, a.ref_p, &ref_dir)?;
        self_convergence(&case, &ps, &reference)?
    };
    let reports = untimed(reports, a.timing);
    print_reports(&reports);
    write_convergence_csv(&path, &reports, a.timing)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn file_tag(name: &str) -> String {
    name.replace('=', "")
}

fn run_case(a: RunArgs) -> Result<(), Failure> {
    let case = coupled_case(&a.case)?;
    create_dir(&a.out)?;
    let run = run_coupled(&case, a.p)?;
    let sol = &run.solution;
    let max_h = sol.height_norm.iter().copied().fold(0.0, f64::max);
    println!(
        "{} p={} nodes={} residual={:.2e} max H/H0={max_h:.4} time={:.2}s",
        a.case.case,
        a.p,
        run.mesh.n_nodes(),
        sol.residual,
        run.runtime_s
    );
    let field = a.out.join("field.csv");
    write_field_csv(&field, &field_rows(&run.mesh, sol))?;
    println!("wrote {}", field.display());

    let sections: Vec<(String, Section)> = match a.case.case {
        CaseId::CircularShoal => circular_shoal_sections(a.section_y),
        CaseId::EllipticShoal => elliptic_shoal_sections(),
        _ => vec![(format!("y={}", a.section_y), Section::Y(a.section_y))],
    };
    for (name, section) in sections {
        let series = extract_profile(&run.mesh, sol, &case.env, &case.bathymetry, section, a.samples)?;
        let path = a.out.join(format!("profile_{}.csv", file_tag(&name)));
        write_profile_csv(&path, &series)?;
        println!("wrote {}", path.display());
    }

    if let Some(ref_p) = a.ref_p {
        let ref_dir = a.ref_dir.clone().unwrap_or_else(|| a.out.join("reference"));
        let reference = load_or_run(&case, ref_p, &ref_dir)?;
        let rel = error_relative(&run.mesh, &sol.phi_hat, &reference.mesh, &reference.solution.phi_hat)?;
        let report = ErrorReport {
            p: a.p,
            n: run.mesh.quads().len(),
            dof: run.mesh.n_nodes() + sol.q.len(),
            linf_error: None,
            relative_error: Some(rel),
            runtime_s: if a.timing { run.runtime_s } else { 0.0 },
        };
        print_reports(std::slice::from_ref(&report));
        let path = a.out.join("error.csv");
        write_convergence_csv(&path, &[report], a.timing)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn dump_mesh(a: MeshArgs) -> Result<(), Failure> {
    let mesh = if a.case.case == CaseId::PlaneWave {
        plane_wave_mesh(a.h, a.p)?
    } else {
        let case = coupled_case(&a.case)?;
        msewave::mesh::SpectralMesh::structured(case.domain, case.nx, case.ny, a.p)?
    };
    create_dir(&a.out)?;
    let path = a.out.join("mesh.txt");
    mesh.write_dump(&path)?;
    println!(
        "nodes={} quads={} boundary elements={}",
        mesh.n_nodes(),
        mesh.quads().len(),
        mesh.boundary_elements().len()
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn kernel(a: KernelArgs) -> Result<(), Failure> {
    let rows = kernel_check(a.depth, a.period, a.pairs, |s| tune(s, a.kernel_panel, a.kernel_points, a.kernel_cap))?;
    create_dir(&a.out)?;
    let path = a.out.join("kernel_check.csv");
    let mut text = String::from("x,y,kr,re_variable,im_variable,re_hankel,im_hankel,rel_error\n");
    for r in &rows {
        text.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.point[0], r.point[1], r.kr, r.variable.re, r.variable.im, r.hankel.re, r.hankel.im, r.rel_error
        ));
    }
    std::fs::write(&path, text).map_err(|e| Failure::Runtime(Error::io(&path, e)))?;
    let worst = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    println!("pairs={} max relative error={worst:.3e}", rows.len());
    println!("wrote {}", path.display());
    Ok(())
}
