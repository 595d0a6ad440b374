//! The `campus-epi` command line: every analysis as a subcommand writing CSV.

pub mod format;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::classes::{self, ClassError};
use crate::dorm::{self, DormError, RoomVariant};
use crate::pgf::{FixedPointConfig, PgfError};
use crate::sim::{self, InitialInfection, SimConfig, SimError, STEPS_PER_WEEK};
use format::{csv, fmt_real, load_schedule, parse_int_list, parse_real_list};
use manifest::{checksum, RunManifest, VERSION};

/// Worker-count cap read by the binary.
pub const THREADS_ENV: &str = "CAMPUS_EPI_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    NonConvergence(String),
    #[error("infeasible schedule: {0}")]
    Schedule(String),
    #[error("{0}")]
    Replay(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Schedule(_) => 4,
            CliError::Replay(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<ClassError> for CliError {
    fn from(e: ClassError) -> Self {
        match e {
            ClassError::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            ClassError::InvalidSchedule(_) => CliError::Schedule(e.to_string()),
            ClassError::Shape(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<DormError> for CliError {
    fn from(e: DormError) -> Self {
        match e {
            DormError::Pgf(PgfError::NonConvergence { .. }) => CliError::NonConvergence(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Schedule(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "campus-epi",
    version,
    about = "Campus epidemic analyses: dorm rooms, class cutoffs, simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Single,
    Double,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Large-epidemic probability (or dorm size pgf) for single or double rooms.
    Dorm {
        #[arg(long, value_enum)]
        variant: VariantArg,
        /// n*p_D (single) or 2*n1*p_D (double): list or start:stop:step.
        #[arg(long)]
        local: String,
        /// Roommate infection probability p_L (double rooms).
        #[arg(long, default_value_t = 0.7)]
        pl: f64,
        /// N*p_G values: list or start:stop:step.
        #[arg(long, default_value = "0:3:0.05")]
        npg: String,
        /// Emit G_D(z) on the z grid instead of zeta.
        #[arg(long)]
        gd_grid: bool,
        #[arg(long, default_value_t = 1001)]
        grid_size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral radius and R0 of a class schedule.
    Classes {
        /// scenario1 | scenario2 | range10to120 | path to a schedule file.
        #[arg(long)]
        schedule: String,
        #[arg(long, default_value = "0.01")]
        p: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// R0 after moving classes larger than k online.
    Cutoff {
        #[arg(long)]
        schedule: String,
        #[arg(long)]
        p: String,
        /// Cutoffs: list or start:stop[:step]. Defaults to min(c)-1 ..= max(c).
        #[arg(long)]
        k: Option<String>,
        /// One row per p with the largest k keeping R0 <= 1.
        #[arg(long)]
        find_max_safe: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo ensemble of the class-meeting simulator.
    Simulate {
        #[arg(long)]
        schedule: String,
        #[arg(long, default_value_t = 0.01)]
        p: f64,
        #[arg(long, default_value_t = 0.5)]
        quarantine: f64,
        #[arg(long, default_value_t = 1000)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        max_steps: u32,
        /// Sample a single enrollment for every run.
        #[arg(long)]
        freeze_enrollment: bool,
        /// random | student:ID | class:ID | all
        #[arg(long, default_value = "random")]
        initial: String,
        /// Output prefix: writes PREFIX_trace.csv, PREFIX_summary.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-run final sizes (PREFIX_final_sizes.csv).
        #[arg(long)]
        final_sizes: bool,
    },
    /// Re-run a manifest and verify its checksum.
    Replay { manifest: PathBuf },
}

/// One named CSV body produced by a subcommand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    /// File name suffix appended to the output prefix, or empty when the
    /// output goes to `--out` itself.
    pub suffix: &'static str,
    pub contents: String,
}

#[derive(Debug)]
pub struct RunOutput {
    pub files: Vec<OutputFile>,
    /// Human-readable notes for stderr.
    pub notes: Vec<String>,
    pub params: Vec<(String, String)>,
    pub seed: Option<u64>,
    /// Set when some rows failed but the rest were written.
    pub partial_failure: Option<CliError>,
}

impl RunOutput {
    fn new(files: Vec<OutputFile>, params: Vec<(String, String)>) -> Self {
        Self {
            files,
            notes: Vec::new(),
            params,
            seed: None,
            partial_failure: None,
        }
    }

    pub fn checksum(&self) -> String {
        checksum(self.files.iter().map(|f| f.contents.as_str()))
    }
}

fn param(key: &str, value: impl ToString) -> (String, String) {
    (key.to_string(), value.to_string())
}

/// Runs a parsed command in memory.
pub fn execute(command: &Command) -> Result<RunOutput, CliError> {
    match command {
        Command::Dorm {
            variant,
            local,
            pl,
            npg,
            gd_grid,
            grid_size,
            ..
        } => cmd_dorm(*variant, local, *pl, npg, *gd_grid, *grid_size),
        Command::Classes { schedule, p, .. } => cmd_classes(schedule, p),
        Command::Cutoff {
            schedule,
            p,
            k,
            find_max_safe,
            ..
        } => cmd_cutoff(schedule, p, k.as_deref(), *find_max_safe),
        Command::Simulate {
            schedule,
            p,
            quarantine,
            runs,
            seed,
            max_steps,
            freeze_enrollment,
            initial,
            final_sizes,
            ..
        } => {
            let mut config = SimConfig::new(load_schedule(schedule)?, *p, *seed);
            config.quarantine_prob = *quarantine;
            config.max_steps = *max_steps;
            config.freeze_enrollment = *freeze_enrollment;
            config.initial = parse_initial(initial)?;
            let mut out = cmd_simulate(&config, *runs, *final_sizes)?;
            out.params.insert(0, param("schedule", schedule));
            Ok(out)
        }
        Command::Replay { .. } => Err(CliError::Usage("replay cannot be nested".into())),
    }
}

fn check_prob(name: &str, p: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{name} = {p} must lie in [0, 1]")))
    }
}

fn cmd_dorm(
    variant: VariantArg,
    local: &str,
    pl: f64,
    npg: &str,
    gd_grid: bool,
    grid_size: usize,
) -> Result<RunOutput, CliError> {
    let locals = parse_real_list(local)?;
    check_prob("--pl", pl)?;
    let cfg = FixedPointConfig {
        grid_size,
        ..Default::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let variant = match variant {
        VariantArg::Single => RoomVariant::Single,
        VariantArg::Double => RoomVariant::Double,
    };
    let pl_col = if variant == RoomVariant::Double { pl } else { 0.0 };
    // Validate every local rate up front so bad ranges are usage errors.
    for &l in &locals {
        match variant {
            RoomVariant::Single => dorm::SingleDormParams::from_rates(l, 0.0).map(|_| ())?,
            RoomVariant::Double => dorm::DoubleDormParams::from_rates(l, pl, 0.0).map(|_| ())?,
        }
    }
    let mut params = vec![
        param("variant", variant.as_str()),
        param("local", local),
        param("pl", fmt_real(pl_col)),
        param("grid_size", grid_size),
        param("tolerance", fmt_real(cfg.tolerance)),
        param("max_iterations", cfg.max_iterations),
    ];

    if gd_grid {
        params.push(param("mode", "gd-grid"));
        let mut rows = Vec::new();
        for &l in &locals {
            let values: Vec<(f64, f64)> = match variant {
                RoomVariant::Single => {
                    let p = dorm::SingleDormParams::from_rates(l, 0.0)?;
                    cfg.grid()
                        .into_iter()
                        .map(|z| dorm::gd_single(z, &p).map(|g| (z, g)))
                        .collect::<Result<_, _>>()?
                }
                RoomVariant::Double => {
                    let p = dorm::DoubleDormParams::from_rates(l, pl, 0.0)?;
                    let t = dorm::gd_double_curve(&p, &cfg)?;
                    t.grid().iter().copied().zip(t.values().iter().copied()).collect()
                }
            };
            rows.extend(values.into_iter().map(|(z, g)| {
                vec![
                    variant.as_str().to_string(),
                    fmt_real(l),
                    fmt_real(pl_col),
                    fmt_real(z),
                    fmt_real(g),
                ]
            }));
        }
        let body = csv(&["variant", "local", "pl", "z", "gd"], rows);
        return Ok(RunOutput::new(
            vec![OutputFile {
                suffix: "",
                contents: body,
            }],
            params,
        ));
    }

    let globals = parse_real_list(npg)?;
    for &g in &globals {
        if g < 0.0 {
            return Err(CliError::Usage(format!("--npg value {g} is negative")));
        }
        dorm::SingleDormParams::from_rates(0.0, g)?;
    }
    params.push(param("npg", npg));
    let sweep = dorm::sweep_zeta(variant, &locals, pl, &globals, &cfg);
    let mut failure = None;
    let mut notes = Vec::new();
    let rows: Vec<Vec<String>> = sweep
        .into_iter()
        .map(|row| {
            let zeta = match row.zeta {
                Ok(z) => fmt_real(z),
                Err(e) => {
                    notes.push(format!(
                        "local={} npg={}: {e}",
                        fmt_real(row.local),
                        fmt_real(row.global_mean)
                    ));
                    failure.get_or_insert_with(|| CliError::from(e));
                    String::new()
                }
            };
            vec![
                row.variant.as_str().to_string(),
                fmt_real(row.local),
                fmt_real(row.p_roommate),
                fmt_real(row.global_mean),
                zeta,
            ]
        })
        .collect();
    let body = csv(&["variant", "local", "pl", "npg", "zeta"], rows);
    let mut out = RunOutput::new(
        vec![OutputFile {
            suffix: "",
            contents: body,
        }],
        params,
    );
    out.notes = notes;
    out.partial_failure = failure;
    Ok(out)
}

fn parse_probabilities(spec: &str) -> Result<Vec<f64>, CliError> {
    let ps = parse_real_list(spec)?;
    for &p in &ps {
        if !(p > 0.0 && p <= 1.0) {
            return Err(CliError::Usage(format!("--p value {p} must lie in (0, 1]")));
        }
    }
    Ok(ps)
}

fn cmd_classes(schedule_spec: &str, p: &str) -> Result<RunOutput, CliError> {
    let schedule = load_schedule(schedule_spec)?;
    let ps = parse_probabilities(p)?;
    let rho = classes::spectral_radius(&classes::build_mean_matrix(&schedule))?;
    let rows = ps.iter().map(|&p| {
        vec![
            schedule_spec.to_string(),
            fmt_real(p),
            fmt_real(rho),
            fmt_real(p * rho),
        ]
    });
    let body = csv(&["schedule", "p", "rho", "r0"], rows);
    let mut out = RunOutput::new(
        vec![OutputFile {
            suffix: "",
            contents: body,
        }],
        vec![param("schedule", schedule_spec), param("p", p)],
    );
    if let Ok(block) = classes::reduced_two_block(&schedule) {
        let (hi, lo) = classes::eigenvalues_2x2(&block);
        out.notes.push(format!(
            "reduced 2x2 block (per unit p): [[{}, {}], [{}, {}]]; eigenvalues {} and {}",
            fmt_real(block[0][0]),
            fmt_real(block[0][1]),
            fmt_real(block[1][0]),
            fmt_real(block[1][1]),
            fmt_real(hi),
            fmt_real(lo)
        ));
    }
    Ok(out)
}

fn cmd_cutoff(
    schedule_spec: &str,
    p: &str,
    k: Option<&str>,
    find_max_safe: bool,
) -> Result<RunOutput, CliError> {
    let schedule = load_schedule(schedule_spec)?;
    let ps = parse_probabilities(p)?;
    let mut params = vec![param("schedule", schedule_spec), param("p", p)];
    if find_max_safe {
        params.push(param("mode", "find-max-safe"));
        let matrix = classes::build_mean_matrix(&schedule);
        let mut rows = Vec::new();
        for &p in &ps {
            let k = classes::max_safe_cutoff(&schedule, p)?;
            let rho = classes::spectral_radius(&classes::apply_cutoff(&matrix, classes::CutoffPolicy { k }))?;
            rows.push(vec![fmt_real(p), k.to_string(), fmt_real(p * rho)]);
        }
        let body = csv(&["p", "k", "r0"], rows);
        return Ok(RunOutput::new(
            vec![OutputFile {
                suffix: "",
                contents: body,
            }],
            params,
        ));
    }
    let ks = match k {
        Some(spec) => parse_int_list(spec)?,
        None => (schedule.min_size() - 1..=schedule.max_size()).collect(),
    };
    params.push(param("k", k.unwrap_or("default")));
    let mut failure = None;
    let rows: Vec<Vec<String>> = classes::cutoff_sweep(&schedule, &ps, &ks)
        .into_iter()
        .map(|row| {
            let r0 = match row.r0 {
                Ok(r) => fmt_real(r),
                Err(e) => {
                    failure.get_or_insert_with(|| CliError::from(e));
                    String::new()
                }
            };
            vec![fmt_real(row.p), row.k.to_string(), r0]
        })
        .collect();
    let body = csv(&["p", "k", "r0"], rows);
    let mut out = RunOutput::new(
        vec![OutputFile {
            suffix: "",
            contents: body,
        }],
        params,
    );
    out.partial_failure = failure;
    Ok(out)
}

fn parse_initial(spec: &str) -> Result<InitialInfection, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "--initial '{spec}' must be random, all, student:ID or class:ID"
        ))
    };
    match spec {
        "random" => Ok(InitialInfection::RandomStudent),
        "all" => Ok(InitialInfection::All),
        _ => {
            let (kind, id) = spec.split_once(':').ok_or_else(bad)?;
            let id: u32 = id.parse().map_err(|_| bad())?;
            match kind {
                "student" => Ok(InitialInfection::Student(id)),
                "class" => Ok(InitialInfection::RandomInClass(id)),
                _ => Err(bad()),
            }
        }
    }
}

fn initial_label(initial: InitialInfection) -> String {
    match initial {
        InitialInfection::RandomStudent => "random".into(),
        InitialInfection::All => "all".into(),
        InitialInfection::Student(s) => format!("student:{s}"),
        InitialInfection::RandomInClass(c) => format!("class:{c}"),
    }
}

pub fn cmd_simulate(config: &SimConfig, runs: usize, final_sizes: bool) -> Result<RunOutput, CliError> {
    let stats = sim::ensemble(config, runs)?;
    let trace_rows = (0..stats.p50.len()).map(|t| {
        vec![
            t.to_string(),
            fmt_real(t as f64 / f64::from(STEPS_PER_WEEK)),
            fmt_real(stats.p25[t]),
            fmt_real(stats.p50[t]),
            fmt_real(stats.p75[t]),
        ]
    });
    let trace = csv(&["step", "week", "p25", "p50", "p75"], trace_rows);
    let (f25, f50, f75) = stats.final_size_quartiles();
    let summary = csv(
        &[
            "runs",
            "p_no_community",
            "p_no_major",
            "final_size_p25",
            "final_size_p50",
            "final_size_p75",
        ],
        [vec![
            stats.runs.to_string(),
            fmt_real(stats.p_no_community_infection),
            fmt_real(stats.p_no_major_outbreak),
            fmt_real(f25),
            fmt_real(f50),
            fmt_real(f75),
        ]],
    );
    let mut files = vec![
        OutputFile {
            suffix: "_trace.csv",
            contents: trace,
        },
        OutputFile {
            suffix: "_summary.csv",
            contents: summary,
        },
    ];
    if final_sizes {
        let rows = stats
            .final_sizes
            .iter()
            .enumerate()
            .map(|(r, s)| vec![r.to_string(), s.to_string()]);
        files.push(OutputFile {
            suffix: "_final_sizes.csv",
            contents: csv(&["run", "final_size"], rows),
        });
    }
    let params = vec![
        param("p", fmt_real(config.p)),
        param("quarantine", fmt_real(config.quarantine_prob)),
        param("runs", runs),
        param("max_steps", config.max_steps),
        param("freeze_enrollment", config.freeze_enrollment),
        param("initial", initial_label(config.initial)),
    ];
    let mut out = RunOutput::new(files, params);
    out.seed = Some(config.seed);
    Ok(out)
}

fn subcommand_name(command: &Command) -> &'static str {
    match command {
        Command::Dorm { .. } => "dorm",
        Command::Classes { .. } => "classes",
        Command::Cutoff { .. } => "cutoff",
        Command::Simulate { .. } => "simulate",
        Command::Replay { .. } => "replay",
    }
}

fn out_path(command: &Command) -> Option<&Path> {
    match command {
        Command::Dorm { out, .. }
        | Command::Classes { out, .. }
        | Command::Cutoff { out, .. }
        | Command::Simulate { out, .. } => out.as_deref(),
        Command::Replay { .. } => None,
    }
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Builds the manifest for an executed command.
pub fn manifest_for(command: &Command, args: &[String], output: &RunOutput) -> RunManifest {
    RunManifest {
        subcommand: subcommand_name(command).to_string(),
        args: args.to_vec(),
        params: output.params.clone(),
        seed: output.seed,
        version: VERSION.to_string(),
        checksum: output.checksum(),
    }
}

/// Parses `args` (without the program name), executes, and writes outputs
/// to files or `stdout`. Returns the messages destined for stderr.
pub fn run<W: std::io::Write>(args: &[String], stdout: &mut W) -> Result<Vec<String>, CliError> {
    let cli = match Cli::try_parse_from(std::iter::once("campus-epi".to_string()).chain(args.iter().cloned()))
    {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            write!(stdout, "{e}")?;
            return Ok(Vec::new());
        }
        Err(e) => {
            let msg = e.render().to_string();
            let msg = msg.strip_prefix("error: ").unwrap_or(&msg).trim_end();
            return Err(CliError::Usage(msg.to_string()));
        }
    };
    if let Command::Replay { manifest } = &cli.command {
        return replay(manifest, stdout);
    }
    let output = execute(&cli.command)?;
    match out_path(&cli.command) {
        Some(base) => {
            for f in &output.files {
                std::fs::write(with_suffix(base, f.suffix), &f.contents)?;
            }
            let manifest = manifest_for(&cli.command, args, &output).render();
            std::fs::write(with_suffix(base, ".manifest"), manifest)?;
        }
        None => {
            for (i, f) in output.files.iter().enumerate() {
                if i > 0 {
                    writeln!(stdout)?;
                }
                stdout.write_all(f.contents.as_bytes())?;
            }
        }
    }
    match output.partial_failure {
        Some(e) => {
            let mut notes = output.notes;
            notes.push(e.to_string());
            // Rows were written; report the failure through the exit code.
            Err(match e {
                CliError::NonConvergence(_) => CliError::NonConvergence(notes.join("\n")),
                other => other,
            })
        }
        None => Ok(output.notes),
    }
}

fn replay<W: std::io::Write>(path: &Path, stdout: &mut W) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let manifest = RunManifest::parse(&text)?;
    let cli =
        Cli::try_parse_from(std::iter::once("campus-epi".to_string()).chain(manifest.args.iter().cloned()))
            .map_err(|e| CliError::Usage(format!("manifest arguments do not parse: {e}")))?;
    let output = execute(&cli.command)?;
    let got = output.checksum();
    if got == manifest.checksum {
        writeln!(stdout, "replay ok: {got}")?;
        Ok(Vec::new())
    } else {
        Err(CliError::Replay(format!(
            "checksum mismatch: manifest {} but replay produced {got}",
            manifest.checksum
        )))
    }
}
