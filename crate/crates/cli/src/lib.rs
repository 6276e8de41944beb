//! The `gapfair` command line.
//!
//! Every solver result is checked by the matching exact verifier before it is
//! written. Exit codes: 0 success, 1 verification FAIL, 2 malformed input,
//! 3 precondition violated, 4 internal error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use gapfair::divisible;
use gapfair::format::{AllocationFile, FormatError, InstanceFile, KnapsackFile, Report, Verdict};
use gapfair::indivisible::{self, FefxRun};
use gapfair::knapsack::{self, Item, KnapsackQuery};
use gapfair::random;
use gapfair::rational::{self, Rational};
use gapfair::reductions::{self, Parity};
use gapfair::{Error, FractionalAllocation, GoodSet, Instance, IntegralAllocation};

#[derive(Debug, Parser)]
#[command(name = "gapfair", version, about = "Fair division under generalized assignment constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// FEF fractional allocation of divisible goods.
    SolveDivisible {
        instance: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Print the threshold vector of every iteration to stderr.
        #[arg(long)]
        trace: bool,
        /// Print the final LP1 to stderr.
        #[arg(long)]
        dump_lp: bool,
    },
    /// FEFx integral allocation.
    SolveFefx {
        instance: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Print every swap to stderr.
        #[arg(long)]
        trace: bool,
    },
    /// (1-ε)-FEFx integral allocation.
    SolveApproxFefx {
        instance: PathBuf,
        /// ε in (0, 1) as `p/q`.
        #[arg(long, value_parser = parse_rational)]
        eps: Rational,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        trace: bool,
    },
    /// Check an allocation file; exits 1 on FAIL.
    Verify {
        allocation: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Required for `apx-fefx`, in [0, 1).
        #[arg(long, value_parser = parse_rational)]
        eps: Option<Rational>,
        /// Instance to check against instead of the path recorded in the file.
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Solve a knapsack file through FEFx parity probes.
    ReduceKnapsack { knapsack: PathBuf },
    /// Write the Nash-welfare and single-good fixtures.
    Fixtures {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Seeded random instance.
    GenRandom {
        #[arg(long)]
        seed: u64,
        #[arg(short = 'n', value_parser = clap::value_parser!(u64).range(1..))]
        agents: u64,
        #[arg(short = 'm', value_parser = clap::value_parser!(u64).range(1..))]
        goods: u64,
        #[arg(long, default_value_t = 10)]
        max_value: u64,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
        max_size: u64,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        max_budget: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Fef,
    Fefx,
    ApxFefx,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Fef => "fef",
            Mode::Fefx => "fefx",
            Mode::ApxFefx => "apx-fefx",
        }
    }
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    rational::parse_pq(s).ok_or_else(|| format!("`{s}` is not a rational p/q"))
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    /// A solver result failed its own verifier.
    #[error("solver output failed verification: {0}")]
    Unverified(String),
    #[error("verification failed")]
    VerifyFailed,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerifyFailed => 1,
            CliError::Io { .. } | CliError::Format { .. } | CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                Error::ZeroSize { .. } | Error::Precondition(_) | Error::Epsilon { .. } => 3,
                Error::Internal(_) | Error::Lp(_) | Error::BruteForceLimit(_) => 4,
                _ => 2,
            },
            CliError::Unverified(_) => 4,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn format_err(path: &Path) -> impl FnOnce(FormatError) -> CliError + '_ {
    move |source| CliError::Format {
        path: path.to_path_buf(),
        source,
    }
}

fn load_instance(path: &Path) -> CliResult<(InstanceFile, Instance)> {
    let file = InstanceFile::parse(&read(path)?).map_err(format_err(path))?;
    let instance = file.to_instance().map_err(format_err(path))?;
    Ok((file, instance))
}

fn emit(out: &mut dyn Write, target: Option<&Path>, text: &str) -> CliResult {
    match target {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn set_string(set: &GoodSet) -> String {
    let goods: Vec<String> = set.iter().map(|g| (g + 1).to_string()).collect();
    format!("{{{}}}", goods.join(", "))
}

fn pass(mode: Mode) -> Report {
    Report {
        mode: mode.name().into(),
        verdict: Verdict::Pass,
        witness: None,
    }
}

/// Runs one command. Normal output goes to `out`, traces and notes to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::SolveDivisible {
            instance,
            output,
            trace,
            dump_lp,
        } => solve_divisible(instance, output.as_deref(), *trace, *dump_lp, out, err),
        Command::SolveFefx {
            instance,
            output,
            trace,
        } => solve_integral(instance, None, output.as_deref(), *trace, out, err),
        Command::SolveApproxFefx {
            instance,
            eps,
            output,
            trace,
        } => solve_integral(instance, Some(eps), output.as_deref(), *trace, out, err),
        Command::Verify {
            allocation,
            mode,
            eps,
            instance,
        } => verify(allocation, *mode, eps.as_ref(), instance.as_deref(), out),
        Command::ReduceKnapsack { knapsack } => reduce_knapsack(knapsack, out),
        Command::Fixtures { out_dir } => fixtures(out_dir, out),
        Command::GenRandom {
            seed,
            agents,
            goods,
            max_value,
            max_size,
            max_budget,
            output,
        } => {
            let instance = random::gen_random(
                *seed,
                *agents as usize,
                *goods as usize,
                *max_value,
                *max_size,
                *max_budget,
            );
            emit(out, output.as_deref(), &InstanceFile::from_instance(&instance).to_json())
        }
    }
}

fn solve_divisible(
    path: &Path,
    output: Option<&Path>,
    trace: bool,
    dump_lp: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult {
    let (_, instance) = load_instance(path)?;
    let outcome = divisible::divisible_fef(&instance)?;
    if trace {
        for (t, rec) in outcome.trace.iter().enumerate() {
            let step = match rec.raised {
                Some(k) => format!("LP1 infeasible, raise agent {}", k + 1),
                None => "LP1 feasible".into(),
            };
            let _ = writeln!(err, "iteration {}: tau = {}, {step}", t + 1, rec.tau);
        }
    }
    if dump_lp {
        let _ = writeln!(err, "LP1 at tau = {}", outcome.tau);
        let _ = write!(err, "{}", divisible::build_lp1(&outcome.augmented, &outcome.tau));
    }
    if !divisible::check_density_domination(&outcome.augmented, &outcome.augmented_allocation, &outcome.tau) {
        return Err(CliError::Unverified("density domination".into()));
    }
    if let Some(w) = divisible::fef_witness(&instance, &outcome.allocation)? {
        return Err(CliError::Unverified(w.to_string()));
    }
    let mut file = AllocationFile::fractional(&path.to_string_lossy(), &instance, &outcome.allocation);
    file.tau = Some(outcome.tau.as_slice().to_vec());
    file.report = Some(pass(Mode::Fef));
    emit(out, output, &file.to_json())
}

fn solve_integral(
    path: &Path,
    eps: Option<&Rational>,
    output: Option<&Path>,
    trace: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult {
    let (_, instance) = load_instance(path)?;
    let FefxRun { allocation, swaps } = match eps {
        Some(e) => indivisible::compute_approx_fefx(&instance, e)?,
        None => indivisible::compute_fefx(&instance)?,
    };
    if trace {
        for s in &swaps {
            let _ = writeln!(
                err,
                "iteration {}: agent {} takes {} (value {} -> {}), welfare {}",
                s.iteration,
                s.agent + 1,
                set_string(&s.set),
                s.value_before,
                s.value_after,
                s.welfare
            );
        }
    }
    let (mode, witness) = match eps {
        Some(e) => (Mode::ApxFefx, indivisible::approx_fefx_witness(&instance, &allocation, e)?),
        None => (Mode::Fefx, indivisible::fefx_witness(&instance, &allocation)?),
    };
    if let Some(w) = witness {
        return Err(CliError::Unverified(w.to_string()));
    }
    let mut file = AllocationFile::integral(&path.to_string_lossy(), &instance, &allocation);
    file.epsilon = eps.map(rational::to_pq);
    file.report = Some(pass(mode));
    emit(out, output, &file.to_json())
}

/// The recorded path is tried as given, then relative to the allocation file.
fn resolve_instance(allocation: &Path, recorded: &str) -> PathBuf {
    let direct = PathBuf::from(recorded);
    if direct.is_absolute() || direct.exists() {
        return direct;
    }
    match allocation.parent() {
        Some(dir) => dir.join(recorded),
        None => direct,
    }
}

fn as_fractional(a: &IntegralAllocation) -> FractionalAllocation {
    let rows = a
        .bundles()
        .iter()
        .map(|b| {
            (0..a.goods())
                .map(|g| if b.contains(&g) { rational::one() } else { rational::zero() })
                .collect()
        })
        .collect();
    FractionalAllocation::new(rows).expect("0/1 rows of disjoint bundles are in range")
}

fn verify(
    path: &Path,
    mode: Mode,
    eps: Option<&Rational>,
    instance_path: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult {
    let file = AllocationFile::parse(&read(path)?).map_err(format_err(path))?;
    let instance_path = match instance_path {
        Some(p) => p.to_path_buf(),
        None => resolve_instance(path, &file.instance),
    };
    let (instance_file, instance) = load_instance(&instance_path)?;
    file.check_hash(&instance).map_err(format_err(path))?;
    let integral = || file.to_integral(instance.goods()).map_err(format_err(path));

    let witness = match mode {
        Mode::Fef => {
            let x = match file.kind() {
                "integral" => as_fractional(&integral()?),
                _ => file.to_fractional().map_err(format_err(path))?,
            };
            divisible::fef_witness(&instance, &x)?.map(|w| {
                let mut text = w.to_string();
                if let Some(scale) = &instance_file.value_scale {
                    let k = rational::int(scale[w.agent]);
                    text += &format!(
                        "; in original units {} vs {}",
                        rational::to_pq(&(&w.own_value / &k)),
                        rational::to_pq(&(&w.envied_value / &k))
                    );
                }
                text
            })
        }
        Mode::Fefx => indivisible::fefx_witness(&instance, &integral()?)?.map(|w| w.to_string()),
        Mode::ApxFefx => {
            let eps = eps.ok_or_else(|| CliError::Usage("--mode apx-fefx needs --eps".into()))?;
            indivisible::approx_fefx_witness(&instance, &integral()?, eps)?.map(|w| w.to_string())
        }
    };
    let write = |out: &mut dyn Write, line: String| {
        writeln!(out, "{line}").map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        })
    };
    match witness {
        None => write(out, format!("{}: {}", mode.name(), Verdict::Pass)),
        Some(w) => {
            write(out, format!("{}: {}: {w}", mode.name(), Verdict::Fail))?;
            Err(CliError::VerifyFailed)
        }
    }
}

fn reduce_knapsack(path: &Path, out: &mut dyn Write) -> CliResult {
    let kp = KnapsackFile::parse(&read(path)?)
        .and_then(|f| f.to_problem())
        .map_err(format_err(path))?;
    let r = reductions::solve_knapsack_via_fefx(&kp, reductions::fefx_oracle)?;
    let items = (0..kp.items())
        .map(|good| Item {
            good,
            weight: kp.weights()[good],
            value: kp.values()[good],
        })
        .collect();
    let direct = knapsack::kns_exact(&KnapsackQuery::new(items, kp.capacity())).value;
    if direct != r.optimum {
        return Err(CliError::Unverified(format!(
            "reduction found {} but the dynamic program finds {direct}",
            r.optimum
        )));
    }
    let mut text = String::new();
    if r.doubled {
        text += "values doubled to make them even\n";
    }
    if r.free_value > 0 {
        text += &format!("weight-0 items contribute {}\n", r.free_value);
    }
    for p in &r.probes {
        let parity = match p.parity {
            Parity::Even => "even",
            Parity::Odd => "odd",
        };
        text += &format!("mu = {}: bundle {}, value {} ({parity})\n", p.mu, set_string(&p.bundle), p.value);
    }
    text += &format!("mu* = {}\nv* = {}\n", r.mu_star, r.optimum);
    emit(out, None, &text)
}

fn fixtures(dir: &Path, out: &mut dyn Write) -> CliResult {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mnw = reductions::mnw_fixture();
    let mut instance = InstanceFile::from_instance(&mnw.instance);
    instance.value_scale = Some(mnw.value_scale.clone());
    let allocation = AllocationFile::fractional("mnw-instance.json", &mnw.instance, &mnw.allocation);
    let single_good = InstanceFile::from_instance(&reductions::single_good_fixture());
    for (name, text) in [
        ("mnw-instance.json", instance.to_json()),
        ("mnw-allocation.json", allocation.to_json()),
        ("single-good-instance.json", single_good.to_json()),
    ] {
        let path = dir.join(name);
        emit(out, Some(&path), &text)?;
        let _ = writeln!(out, "{}", path.display());
    }
    Ok(())
}
