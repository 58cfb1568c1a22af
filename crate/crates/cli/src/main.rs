use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qudit_synth::circuit::{apply_circuit, circuit_unitary_with_cap, to_digits, Circuit, DEFAULT_DIM_CAP};
use qudit_synth::club::{club_terms, sequence_length, DEFAULT_TERM_CAP};
use qudit_synth::counts::{count_model, table_report, TableOptions};
use qudit_synth::io::{
    circuit_from_json, circuit_to_json, matrix_from_json, vector_from_json, vector_to_json, FORMAT_VERSION,
};
use qudit_synth::linalg::{StateVector, ONE};
use qudit_synth::lowering::{lower_circuit, LoweringOptions, TargetLevel};
use qudit_synth::random::{random_isometry, random_state, random_unitary, seeded_rng};
use qudit_synth::state_synth::{club_householder_with, global_phase_gate, state_prep_circuit_with, ClubOptions};
use qudit_synth::unitary_synth::{spectral_synthesize, synthesize_isometry, triangle};
use qudit_synth::verify::{
    expectation_value, sample_counts, sampled_value, subspace_expectation, verify_circuit, DensityMatrix, Synthesizer,
    VerifyOptions,
};

#[derive(Parser)]
#[command(name = "qudit-synth", about = "Ancilla-free qudit circuit synthesis", disable_version_flag = true)]
struct Cli {
    /// Seed for every random instance.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Verification tolerance.
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol: f64,
    /// Largest register dimension materialized as a matrix.
    #[arg(long, global = true, default_value_t = DEFAULT_DIM_CAP)]
    cap: usize,
    /// Print the tool and file-format versions.
    #[arg(long)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the ♣-sequence for (d, n).
    ClubSeq {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        /// Use ♣ instead of the ASCII `c`.
        #[arg(long)]
        pretty: bool,
    },
    /// Synthesize a circuit from a state or a matrix.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Lower a circuit to a smaller gate library.
    Lower {
        #[arg(long, alias = "in")]
        circuit: PathBuf,
        #[arg(long, value_enum, default_value_t = Level::Cinc)]
        level: Level,
        /// Drop INC-power remainders smaller than this in multi-control lowering.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the lowering report here as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare a circuit's unitary with a target matrix.
    Verify {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Require equality including the global phase.
        #[arg(long)]
        exact_phase: bool,
        /// Also require every gate to belong to this library.
        #[arg(long, value_enum)]
        library: Option<Level>,
    },
    /// Gate-count formulas and the reference table comparison.
    Counts {
        /// Emit the per-algorithm CSV table instead of one model.
        #[arg(long)]
        table: bool,
        /// Qudit dimension, `a` or `a..b` (inclusive).
        #[arg(long, default_value = "2..5")]
        d: String,
        /// Number of qudits, `a` or `a..b` (inclusive).
        #[arg(long, default_value = "2..6")]
        n: String,
        /// Register dimension up to which counts are measured by synthesis.
        #[arg(long, default_value_t = 27)]
        measure_cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expectation value of an operator in a density matrix.
    Expect {
        #[arg(long)]
        operator: PathBuf,
        #[arg(long)]
        rho: PathBuf,
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum, default_value_t = Algo::Triangle)]
        algo: Algo,
        /// Restrict to the first k eigenvectors.
        #[arg(long)]
        subspace: Option<usize>,
        /// Also sample this many measurement outcomes.
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Apply a circuit to a state.
    Simulate {
        #[arg(long, alias = "in")]
        circuit: PathBuf,
        /// Input state; defaults to |0..0>.
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Circuit mapping a state onto a basis ket, or preparing it.
    State {
        #[command(flatten)]
        shape: Shape,
        /// State vector JSON; omit to use a seeded random state.
        #[arg(long, alias = "in")]
        input: Option<PathBuf>,
        /// Emit the preparation circuit `U|0..0> = psi` instead of `W psi = |m>`.
        #[arg(long)]
        prep: bool,
        /// Basis index the state is collapsed onto.
        #[arg(long, default_value_t = 0)]
        target: usize,
        /// Append a phase gate so the result is exact rather than up to phase.
        #[arg(long)]
        fix_phase: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Circuit for a unitary or an isometry.
    Unitary {
        #[command(flatten)]
        shape: Shape,
        /// Matrix JSON; omit to use a seeded random unitary.
        #[arg(long, alias = "in")]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Algo::Triangle)]
        algo: Algo,
        /// Columns of the random isometry when no input is given.
        #[arg(long)]
        columns: Option<usize>,
        /// Append a phase gate so the circuit matches the input exactly.
        #[arg(long)]
        fix_phase: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Shape {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    TwoQudit,
    Cinc,
    CincOnly,
}

impl From<Level> for TargetLevel {
    fn from(l: Level) -> Self {
        match l {
            Level::TwoQudit => TargetLevel::TwoQudit,
            Level::Cinc => TargetLevel::Cinc,
            Level::CincOnly => TargetLevel::CincOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Triangle,
    Spectral,
    Isometry,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_range(s: &str) -> Result<std::ops::RangeInclusive<usize>> {
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse()?, b.trim_start_matches('=').trim().parse()?),
        None => {
            let v = s.trim().parse()?;
            (v, v)
        }
    };
    if lo > hi {
        bail!("empty range {s}");
    }
    Ok(lo..=hi)
}

fn dim_of(d: usize, n: usize, cap: usize) -> Result<usize> {
    if d < 2 || n < 1 {
        bail!("need d >= 2 and n >= 1");
    }
    match d.checked_pow(n as u32) {
        Some(dim) if dim <= cap => Ok(dim),
        _ => bail!("register d = {d}, n = {n} exceeds --cap {cap}"),
    }
}

/// Returns whether the command's check passed.
fn run(cli: Cli) -> Result<bool> {
    if cli.version {
        println!("qudit-synth {} (format {FORMAT_VERSION})", env!("CARGO_PKG_VERSION"));
        return Ok(true);
    }
    let Some(command) = cli.command else {
        bail!("no subcommand given; see --help");
    };
    let mut rng = seeded_rng(cli.seed);
    match command {
        Command::ClubSeq { d, n, pretty } => {
            if d < 2 || n < 1 {
                bail!("need d >= 2 and n >= 1");
            }
            let len = sequence_length(d, n)?;
            if len > DEFAULT_TERM_CAP.max(cli.cap as u128) {
                bail!("sequence has {len} terms, above the cap");
            }
            for term in club_terms(d, n) {
                if pretty {
                    println!("{term}");
                } else {
                    println!("{}", term.machine());
                }
            }
            Ok(true)
        }
        Command::Synth(SynthCommand::State { shape, input, prep, target, fix_phase, out }) => {
            let dim = dim_of(shape.d, shape.n, cli.cap)?;
            let psi = match input {
                Some(p) => vector_from_json(&read(&p)?)?,
                None => random_state(&mut rng, dim),
            };
            if psi.dim() != dim {
                bail!("state has dimension {}, register needs {dim}", psi.dim());
            }
            let circuit = if prep {
                state_prep_circuit_with(&psi, shape.d, shape.n, fix_phase)?
            } else {
                if target >= dim {
                    bail!("target {target} outside 0..{dim}");
                }
                let opts = ClubOptions { fix_phase, ..Default::default() };
                club_householder_with(&psi, &to_digits(target, shape.d, shape.n), shape.d, shape.n, opts)?.0
            };
            write_or_print(out.as_deref(), &circuit_to_json(&circuit))?;
            Ok(true)
        }
        Command::Synth(SynthCommand::Unitary { shape, input, algo, columns, fix_phase, out }) => {
            let (d, n) = (shape.d, shape.n);
            let dim = dim_of(d, n, cli.cap)?;
            let m = match (input, algo) {
                (Some(p), _) => matrix_from_json(&read(&p)?)?,
                (None, Algo::Isometry) => random_isometry(&mut rng, dim, columns.unwrap_or(1).clamp(1, dim)),
                (None, _) => random_unitary(&mut rng, dim),
            };
            let circuit = match algo {
                Algo::Triangle => triangle(&m, d, n)?,
                Algo::Spectral => spectral_synthesize(&m, d, n)?,
                Algo::Isometry => synthesize_isometry(&m, d, n)?,
            };
            let mut circuit = circuit;
            let u = circuit_unitary_with_cap(&circuit, cli.cap)?;
            let (_, phase) = u.submatrix(0, 0, dim, m.cols()).distance_up_to_phase(&m);
            eprintln!("global phase: {:.12} {:+.12}i", phase.re, phase.im);
            if fix_phase && (phase - ONE).norm() > 1e-15 {
                circuit.push(global_phase_gate(n, d, phase.conj()));
            }
            write_or_print(out.as_deref(), &circuit_to_json(&circuit))?;
            Ok(true)
        }
        Command::Lower { circuit, level, epsilon, out, report } => {
            let c = circuit_from_json(&read(&circuit)?)?;
            let (lowered, rep) = lower_circuit(&c, level.into(), &LoweringOptions { epsilon })?;
            write_or_print(out.as_deref(), &circuit_to_json(&lowered))?;
            let rep_json = serde_json::to_string_pretty(&rep)?;
            match report {
                Some(p) => fs::write(&p, rep_json).with_context(|| format!("writing {}", p.display()))?,
                None => eprintln!("{rep_json}"),
            }
            Ok(rep.library_violations.is_empty())
        }
        Command::Verify { circuit, target, exact_phase, library } => {
            let c = circuit_from_json(&read(&circuit)?)?;
            let t = matrix_from_json(&read(&target)?)?;
            let opts = VerifyOptions {
                up_to_phase: !exact_phase,
                tol: cli.tol,
                cap: cli.cap,
                library: library.map(|l| TargetLevel::from(l).library()),
            };
            let r = verify_circuit(&c, &t, &opts)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            Ok(r.passed)
        }
        Command::Counts { table, d, n, measure_cap, out } => {
            let (ds, ns) = (parse_range(&d)?, parse_range(&n)?);
            let csv = if table {
                table_report(ds, ns, &TableOptions { measure_cap, seed: cli.seed })?.to_csv()
            } else {
                let mut csv = String::from(
                    "d,n,triangle_cinc,triangle_cinc_inv,spectral_cinc,spectral_cinc_inv,triangle_bound,spectral_bound\n",
                );
                for d in ds {
                    for n in ns.clone() {
                        let m = count_model(d, n)?;
                        let (t, ti) = m.triangle()?;
                        let (s, si) = m.spectral()?;
                        csv.push_str(&format!("{d},{n},{t},{ti},{s},{si},{:e},{:e}\n", m.triangle_bound(), m.spectral_bound()));
                    }
                }
                csv
            };
            match out {
                Some(p) => fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{csv}"),
            }
            Ok(true)
        }
        Command::Expect { operator, rho, d, algo, subspace, shots } => {
            let a = matrix_from_json(&read(&operator)?)?;
            let rho = DensityMatrix::new(matrix_from_json(&read(&rho)?)?)?;
            if rho.dim() > cli.cap {
                bail!("dimension {} exceeds --cap {}", rho.dim(), cli.cap);
            }
            if let Some(k) = subspace {
                let r = subspace_expectation(&a, &rho, k, d)?;
                println!("{}", serde_json::to_string_pretty(&r)?);
                return Ok(true);
            }
            let synth = match algo {
                Algo::Triangle | Algo::Isometry => Synthesizer::Triangle,
                Algo::Spectral => Synthesizer::Spectral,
            };
            let e = expectation_value(&a, &rho, d, synth)?;
            let mut out = serde_json::to_value(&e)?;
            if let Some(shots) = shots {
                let h = &e.hermitian_part;
                let counts = sample_counts(&mut rng, &h.populations, shots)?;
                let mut sampled = serde_json::json!({
                    "shots": shots,
                    "hermitian_counts": counts,
                    "hermitian_estimate": sampled_value(&h.eigenvalues, &counts),
                });
                if let Some(anti) = &e.anti_hermitian_part {
                    let counts = sample_counts(&mut rng, &anti.populations, shots)?;
                    sampled["anti_hermitian_counts"] = serde_json::json!(counts);
                    sampled["anti_hermitian_estimate"] = serde_json::json!(sampled_value(&anti.eigenvalues, &counts));
                }
                out["sampled"] = sampled;
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
            let err = ((e.value.0 - e.direct.0).powi(2) + (e.value.1 - e.direct.1).powi(2)).sqrt();
            Ok(err < cli.tol)
        }
        Command::Simulate { circuit, state, out } => {
            let c: Circuit = circuit_from_json(&read(&circuit)?)?;
            let dim = dim_of(c.d, c.n, cli.cap)?;
            let psi = match state {
                Some(p) => vector_from_json(&read(&p)?)?,
                None => StateVector::basis(dim, 0),
            };
            let result = apply_circuit(&c, &psi)?;
            write_or_print(out.as_deref(), &vector_to_json(&result))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
