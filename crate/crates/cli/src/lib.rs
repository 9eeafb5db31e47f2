//! `skewmix`: command line access to the skew product toolkit.

pub mod error;
pub mod manifest;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use skewmix_core::cohomology::{cohomology, DEFAULT_SERIES_TOL};
use skewmix_core::cones::{fit_phi, phi, DEFAULT_Y_SAMPLES};
use skewmix_core::correlation::{
    correlation_direct, correlation_fourier_with, locked_convention, ObservablePair, DENSITY_ITERS, DIRECT_U_GRID,
    DIRECT_X_GRID,
};
use skewmix_core::dynamics::preimages;
use skewmix_core::growth::{evolve, growth_bound_at, BoundaryReading};
use skewmix_core::oscillatory::{vdc_row, vdc_suite, vdc_suite_rows, SUITE_SIZE};
use skewmix_core::suite::{self, SuiteConfig, CRITERIA};
use skewmix_core::transfer::{invariant_density, ly_constants, norm_decay_experiment, Lookup, OneStep, SchemeConstants};
use skewmix_core::{bundled, MapConfig, SkewProductF64, Validation};

pub use error::CliError;
use manifest::RunManifest;
use output::{Cell, Format, Table};

pub const DEFAULT_GRID: usize = 1 << 12;
pub const DEFAULT_SPECTRUM_GRID: usize = 1 << 16;
pub const DEFAULT_OUT_DIR: &str = "skewmix-out";

#[derive(Debug, Parser)]
#[command(name = "skewmix", version, about = "Transfer operators, cones and correlation decay for skew products on the torus")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Map config (JSON file, or the name of a bundled example).
    #[arg(long, global = true)]
    pub config: Option<String>,
    #[arg(long, value_enum, default_value = "csv", global = true)]
    pub out: Format,
    /// Grid size (power of two) for operator based commands.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, env = "SKEWMIX_THREADS", global = true)]
    pub threads: Option<usize>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for the output table and the manifest.
    #[arg(long, default_value = DEFAULT_OUT_DIR, global = true)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
pub enum Command {
    /// Build the map, check the hypotheses and print its constants.
    Validate,
    /// Enumerate f^-n(y) with the cocycle data.
    Preimages {
        #[arg(long)]
        y: f64,
        #[arg(long)]
        n: usize,
    },
    /// phi(k) for k = 1..=n.
    Phi {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_Y_SAMPLES)]
        samples: usize,
    },
    /// Invariant slope, transfer function and the remainder chi.
    Cohomology {
        #[arg(long, default_value_t = DEFAULT_SERIES_TOL)]
        tol: f64,
    },
    /// Probe estimate of the norm of L_b^{n(b)}.
    Spectrum {
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
    },
    /// Growth bound along the partition refinement of Omega_0.
    Growth {
        /// Omega_0 as `lo,hi`.
        #[arg(long, value_parser = parse_pair_f64)]
        omega0: (f64, f64),
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eps: f64,
        /// Distance to the piece's own image endpoints only.
        #[arg(long)]
        own_endpoints_only: bool,
    },
    /// Oscillatory integrals against both van der Corput bounds.
    Vdc {
        #[arg(long, value_enum, default_value = "default")]
        suite: VdcSuite,
    },
    /// Correlation series by both estimators, with the rate fit.
    Correlation {
        /// Observable pair (JSON); defaults to g = h = cos(2 pi u) cos(2 pi x).
        #[arg(long)]
        obs: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        nmax: usize,
        /// Fit window `lo,hi`; defaults to `0,nmax`.
        #[arg(long, value_parser = parse_pair_usize)]
        window: Option<(usize, usize)>,
    },
    /// Run the acceptance criteria.
    Suite {
        /// Criteria to run, e.g. `1,4,10`; all by default.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VdcSuite {
    /// The seeded 50-problem suite.
    Default,
    /// `K = 1`, `theta = x`, `b = pi` on `[0, 1]`.
    ClosedForm,
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(T, T), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<T>().map_err(|_| format!("cannot parse `{v}`"));
    Ok((p(a)?, p(b)?))
}

fn parse_pair_f64(s: &str) -> Result<(f64, f64), String> {
    parse_pair(s)
}

fn parse_pair_usize(s: &str) -> Result<(usize, usize), String> {
    parse_pair(s)
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Preimages { .. } => "preimages",
            Command::Phi { .. } => "phi",
            Command::Cohomology { .. } => "cohomology",
            Command::Spectrum { .. } => "spectrum",
            Command::Growth { .. } => "growth",
            Command::Vdc { .. } => "vdc",
            Command::Correlation { .. } => "correlation",
            Command::Suite { .. } => "suite",
        }
    }

    fn needs_map(&self) -> bool {
        !matches!(self, Command::Vdc { .. } | Command::Suite { .. })
    }
}

/// Config text and where it came from.
pub struct LoadedConfig {
    pub source: String,
    pub text: String,
    pub config: MapConfig,
}

pub fn load_config(arg: Option<&str>) -> Result<LoadedConfig, CliError> {
    let arg = arg.unwrap_or("tripling_cos");
    let (source, text) = if Path::new(arg).is_file() {
        (arg.to_string(), std::fs::read_to_string(arg)?)
    } else {
        let name = Path::new(arg).file_name().and_then(|s| s.to_str()).unwrap_or(arg);
        match bundled::config_text(name) {
            Some(t) => (format!("bundled:{}", name.trim_end_matches(".json")), t.to_string()),
            None => return Err(CliError::Validation(format!("no config file or bundled example named `{arg}`"))),
        }
    };
    let config = MapConfig::from_json(&text)?;
    Ok(LoadedConfig { source, text, config })
}

/// What a subcommand hands back for writing.
struct Outcome {
    table: Table,
    /// Extra files written next to the table.
    files: Vec<PathBuf>,
    /// Replaces the table in JSON output when set.
    json: Option<Value>,
    constants: Option<Value>,
    suite_failures: usize,
}

impl Outcome {
    fn table(table: Table) -> Self {
        Self { table, files: Vec::new(), json: None, constants: None, suite_failures: 0 }
    }
}

fn skew_constants_json(sp: &SkewProductF64) -> Value {
    let k = sp.consts();
    json!({
        "lambda_tilde": k.lambda_tilde,
        "lambda_max": k.lambda_max,
        "sup_d2f": k.sup_d2f,
        "sup_tau": k.sup_tau,
        "sup_dtau": k.sup_dtau,
        "sup_d2tau": k.sup_d2tau,
        "c1": k.c1,
        "delta": k.delta,
        "beta": k.beta,
        "inversion_pieces": sp.pieces().len(),
    })
}

fn scheme_constants(sp: &SkewProductF64, fit: Option<skewmix_core::transfer::PhiFit<f64>>) -> Result<SchemeConstants<f64>, CliError> {
    Ok(SchemeConstants::new(sp, &ly_constants(sp)?, fit))
}

fn constants_json(sp: &SkewProductF64, scheme: &SchemeConstants<f64>) -> Value {
    json!({ "map": skew_constants_json(sp), "scheme": scheme })
}

fn run_validate(v: &Validation<f64>) -> Result<Outcome, CliError> {
    let sp = v.product();
    let scheme = scheme_constants(sp, None)?;
    let k = sp.consts();
    let mut t = Table::new(vec!["quantity", "value"]);
    let rows: Vec<(&str, Cell)> = vec![
        ("lambda_tilde", k.lambda_tilde.into()),
        ("lambda_max", k.lambda_max.into()),
        ("c1", k.c1.into()),
        ("delta", k.delta.into()),
        ("beta", k.beta.into()),
        ("c_beta", scheme.c_beta.into()),
        ("c_lambda", scheme.c_lambda.into()),
        ("c6", scheme.c6.into()),
        ("c7", scheme.c7.into()),
        ("rho", scheme.rho.into()),
        ("xi", scheme.xi.into()),
        ("inversion_pieces", sp.pieces().len().into()),
        ("tau_piecewise_constant", v.is_trivially_cohomologous().into()),
    ];
    for (q, c) in rows {
        t.push(vec![q.into(), c]);
    }
    let mut o = Outcome::table(t);
    o.constants = Some(constants_json(sp, &scheme));
    Ok(o)
}

fn grid_or(common: &Common, default: usize) -> usize {
    common.grid.unwrap_or(default)
}

fn execute(cli: &Cli, loaded: Option<&LoadedConfig>, seed: u64) -> Result<Outcome, CliError> {
    let validation = match loaded {
        Some(l) => Some(l.config.build::<f64>()?),
        None => None,
    };
    let sp = validation.as_ref().map(|v| v.product());
    let with_constants = |mut o: Outcome, fit| -> Result<Outcome, CliError> {
        if o.constants.is_none() {
            if let Some(sp) = sp {
                o.constants = Some(constants_json(sp, &scheme_constants(sp, fit)?));
            }
        }
        Ok(o)
    };
    match &cli.command {
        Command::Validate => run_validate(validation.as_ref().expect("map commands load a config")),
        Command::Preimages { y, n } => {
            let sp = sp.expect("map loaded");
            let tree = preimages(sp, *y, *n)?;
            let mut t = Table::new(vec!["word", "x", "J_n", "tau_n", "dtau_n"]);
            for nd in &tree.nodes {
                let word: Vec<String> = nd.word.symbols.iter().map(|s| s.to_string()).collect();
                t.push(vec![word.join("-").into(), nd.x.into(), nd.j_n.into(), nd.tau_n.into(), nd.dtau_n.into()]);
            }
            with_constants(Outcome::table(t), None)
        }
        Command::Phi { n, samples } => {
            let sp = sp.expect("map loaded");
            let mut t = Table::new(vec!["n", "phi", "phi_pow"]);
            let mut points = Vec::new();
            for k in 1..=*n {
                let r = phi(sp, k, *samples)?;
                points.push((k, r.phi));
                t.push(vec![k.into(), r.phi.into(), r.phi_pow.into()]);
            }
            let fit = if points.len() >= 2 { fit_phi(&points).ok() } else { None };
            with_constants(Outcome::table(t), fit)
        }
        Command::Cohomology { tol } => {
            let sp = sp.expect("map loaded");
            let grid = grid_or(&cli.common, DEFAULT_GRID);
            let r = cohomology(sp, grid, *tol)?;
            std::fs::create_dir_all(&cli.common.out_dir)?;
            let mut files = Vec::new();
            for (name, g) in [("theta", &r.theta), ("chi", &r.chi)] {
                let mut t = Table::new(vec!["x", name]);
                for (i, v) in g.values().iter().enumerate() {
                    t.push(vec![g.midpoint(i).into(), v.re.into()]);
                }
                let path = cli.common.out_dir.join(format!("cohomology_{name}.csv"));
                std::fs::write(&path, t.to_csv()?)?;
                files.push(path);
            }
            let verdict = format!("{:?}", r.verdict);
            let (theta_path, chi_path) = (files[0].display().to_string(), files[1].display().to_string());
            let mut t = Table::new(vec!["verdict", "deviation", "tol_chi", "theta_csv_path", "chi_csv_path"]);
            t.push(vec![verdict.clone().into(), r.deviation.into(), r.tol_chi.into(), theta_path.clone().into(), chi_path.clone().into()]);
            let mut o = Outcome::table(t);
            o.json = Some(json!({
                "verdict": verdict,
                "deviation": r.deviation,
                "tol_chi": r.tol_chi,
                "theta_csv_path": theta_path,
                "chi_csv_path": chi_path,
            }));
            o.files = files;
            with_constants(o, None)
        }
        Command::Spectrum { b } => {
            let sp = sp.expect("map loaded");
            let scheme = scheme_constants(sp, None)?;
            let op = OneStep::build(sp, grid_or(&cli.common, DEFAULT_SPECTRUM_GRID))?.twisted(*b, Lookup::Linear);
            let r = norm_decay_experiment(&op, &scheme, seed, &[])?;
            let mut t = Table::new(vec!["probe_id", "ratio", "n_b", "gamma2_est"]);
            for p in &r.probes {
                t.push(vec![p.probe_id.clone().into(), p.ratio.into(), r.n_b.into(), r.gamma2_est.into()]);
            }
            with_constants(Outcome::table(t), None)
        }
        Command::Growth { omega0, n, eps, own_endpoints_only } => {
            let sp = sp.expect("map loaded");
            let reading = if *own_endpoints_only { BoundaryReading::OwnEndpoints } else { BoundaryReading::AllBoundaryPoints };
            if eps.is_nan() || *eps <= 0.0 {
                return Err(CliError::Validation(format!("eps must be positive, got {eps}")));
            }
            let states = evolve(sp, omega0.0, omega0.1, *n)?;
            let mut t = Table::new(vec!["n", "pieces", "lhs", "rhs", "pass"]);
            for s in &states {
                let c = growth_bound_at(sp, &states[0], s, *eps, reading)?;
                t.push(vec![c.n.into(), c.pieces.into(), c.lhs.into(), c.rhs.into(), (c.pass && c.single_interval_bound).into()]);
            }
            with_constants(Outcome::table(t), None)
        }
        Command::Vdc { suite: which } => {
            let rows = match which {
                VdcSuite::Default => vdc_suite_rows(&vdc_suite::<f64>(seed, SUITE_SIZE)?)?,
                VdcSuite::ClosedForm => vec![vdc_row(0, &suite::vdc_closed_form())?],
            };
            let mut t = Table::new(vec!["problem_id", "integral_abs", "bound_paper", "bound_corrected", "pass"]);
            for r in rows {
                t.push(vec![r.id.into(), r.integral_abs.into(), r.bound_literal.into(), r.bound_corrected.into(), r.pass.into()]);
            }
            Ok(Outcome::table(t))
        }
        Command::Correlation { obs, nmax, window } => {
            let sp = sp.expect("map loaded");
            let (g, h) = match obs {
                Some(path) => {
                    let pair = ObservablePair::from_json(&std::fs::read_to_string(path)?)?;
                    (pair.g.build::<f64>()?, pair.h.build::<f64>()?)
                }
                None => (suite::cos_u_cos_x(), suite::cos_u_cos_x()),
            };
            let h_nu = invariant_density(sp, grid_or(&cli.common, DEFAULT_GRID), DENSITY_ITERS)?;
            let lock = locked_convention()?;
            let s = correlation_fourier_with(sp, &g, &h, *nmax, &h_nu, lock.convention)?;
            let d = correlation_direct(sp, &g, &h, *nmax, &h_nu, DIRECT_X_GRID, DIRECT_U_GRID)?;
            let fit = s.fit(window.unwrap_or((0, *nmax)))?;
            let mut t = Table::new(vec![
                "n",
                "cor_fourier_re",
                "cor_fourier_im",
                "cor_direct",
                "zeta_fit",
                "r2",
                "cor_direct_im",
                "tail_bound",
            ]);
            for (n, (f, dv)) in s.values.iter().zip(&d).enumerate() {
                t.push(vec![
                    n.into(),
                    f.re.into(),
                    f.im.into(),
                    dv.re.into(),
                    fit.zeta.into(),
                    fit.r2.into(),
                    dv.im.into(),
                    s.tail_bound.into(),
                ]);
            }
            with_constants(Outcome::table(t), None)
        }
        Command::Suite { only } => {
            let ids: Vec<usize> = if only.is_empty() { (1..=CRITERIA.len()).collect() } else { only.clone() };
            if let Some(bad) = ids.iter().find(|&&i| i == 0 || i > CRITERIA.len()) {
                return Err(CliError::Validation(format!("criteria are numbered 1 to {}, got {bad}", CRITERIA.len())));
            }
            let cfg = SuiteConfig { seed };
            let mut t = Table::new(vec!["criterion", "name", "pass", "seconds", "details", "info"]);
            let mut failures = 0;
            for id in ids {
                let r = suite::run_criterion(id, &cfg)?;
                eprintln!("{}", r.line());
                for i in &r.info {
                    eprintln!("       info: {i}");
                }
                failures += usize::from(!r.pass);
                t.push(vec![id.into(), r.name.into(), r.pass.into(), r.seconds.into(), r.details.join("; ").into(), r.info.join("; ").into()]);
            }
            let mut o = Outcome::table(t);
            o.suite_failures = failures;
            Ok(o)
        }
    }
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(|e| CliError::Io(e.to_string()))
}

/// Runs one command; returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run_cli(&cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("skewmix: {e}");
            e.exit_code()
        }
    }
}

fn run_cli(cli: &Cli, argv: &[OsString]) -> Result<(), CliError> {
    let start = Instant::now();
    let loaded = if cli.command.needs_map() { Some(load_config(cli.common.config.as_deref())?) } else { None };
    let seed = cli.common.seed.or(loaded.as_ref().map(|l| l.config.seed)).unwrap_or(suite::DEFAULT_SEED);
    let pool = thread_pool(cli.common.threads)?;
    let outcome = pool.install(|| execute(cli, loaded.as_ref(), seed))?;

    let format = cli.common.out;
    let body = match (&outcome.json, format) {
        (Some(v), Format::Json) => serde_json::to_string_pretty(v).expect("values serialize") + "\n",
        _ => outcome.table.render(format)?,
    };
    std::fs::create_dir_all(&cli.common.out_dir)?;
    let table_path = cli.common.out_dir.join(format!("{}.{}", cli.command.name(), format.extension()));
    std::fs::write(&table_path, &body)?;
    print!("{body}");

    let mut outputs = vec![table_path];
    outputs.extend(outcome.files.iter().cloned());
    let manifest = RunManifest::new(
        argv,
        cli,
        loaded.as_ref(),
        seed,
        pool.current_num_threads(),
        outcome.constants.clone(),
        start.elapsed().as_secs_f64(),
        &outputs,
    );
    let manifest_path = cli.common.out_dir.join(format!("{}.manifest.json", cli.command.name()));
    manifest.write(&manifest_path)?;

    if outcome.suite_failures > 0 {
        return Err(CliError::SuiteFailed(outcome.suite_failures));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_parse() {
        assert_eq!(parse_pair_f64("0, 0.05").unwrap(), (0.0, 0.05));
        assert_eq!(parse_pair_usize("4,14").unwrap(), (4, 14));
        assert!(parse_pair_f64("0.1").is_err());
    }

    #[test]
    fn bundled_names_resolve() {
        let l = load_config(Some("doubling.json")).unwrap();
        assert_eq!(l.source, "bundled:doubling");
        assert!(matches!(load_config(Some("nope")), Err(CliError::Validation(_))));
    }

    #[test]
    fn flags_anywhere() {
        let cli = Cli::try_parse_from(["skewmix", "preimages", "--y", "0.5", "--n", "3", "--out", "json", "--seed", "7"]).unwrap();
        assert_eq!(cli.common.out, Format::Json);
        assert_eq!(cli.common.seed, Some(7));
        assert_eq!(cli.command.name(), "preimages");
    }
}
