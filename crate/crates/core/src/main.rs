use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use burstfuse::config::PipelineConfig;
use burstfuse::extract::extract_bursts;
use burstfuse::fusion::{
    emit_prv, fuse, select_base, write_column_manifest, write_fused_csv, EmitOptions, FuseOptions,
};
use burstfuse::matchset::{pairwise_recovery, MatchSet, Stage};
use burstfuse::model::ExecutionDataset;
use burstfuse::pcf::{parse_pcf, PcfDictionary};
use burstfuse::pipeline::{match_executions, MatchOptions};
use burstfuse::prv::parse_prv;
use burstfuse::synth::{generate_suite, SynthConfig};
use burstfuse::table::{read_burst_csv, write_burst_csv};
use burstfuse::validation::{render_report, validate, write_score_csv, ValidationOptions};
use burstfuse::Error;

/// Burst-level fusion of MPI traces with complementary counter sets.
#[derive(Debug, Parser)]
#[command(name = "burstfuse", version, about)]
struct Cli {
    /// Configuration file (JSON); flags override file values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Print the effective configuration as JSON and exit.
    #[arg(long, global = true)]
    dump_config: bool,

    /// Stage-2 acceptance threshold.
    #[arg(long, global = true, value_name = "S")]
    threshold: Option<f64>,

    /// Similarity weights as `temporal,size,partner`.
    #[arg(long, global = true, value_name = "T,S,P")]
    weights: Option<String>,

    /// Collective call names (prefixed variants match automatically).
    #[arg(long, global = true, value_name = "NAME,NAME,...")]
    collectives: Option<String>,

    /// MPI event-type ids as `p2p,collective,other`.
    #[arg(long, global = true, value_name = "ID,ID,ID")]
    mpi_types: Option<String>,

    /// Outlier fence for validation metrics.
    #[arg(long, global = true, value_name = "on|off")]
    fence: Option<String>,

    #[arg(long, global = true, value_name = "LEVEL")]
    log_level: Option<String>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a .prv trace and write the burst-level CSV.
    Extract {
        /// Input trace.
        prv: PathBuf,
        /// Companion .pcf (default: the trace path with a .pcf extension).
        #[arg(long)]
        pcf: Option<PathBuf>,
        #[arg(long, short = 'o')]
        out: PathBuf,
        /// Execution label (default: trace file stem).
        #[arg(long)]
        exec_id: Option<String>,
        /// Counter-set label stored in the CSV.
        #[arg(long)]
        counter_set: Option<String>,
    },
    /// Match bursts across two or more burst CSVs.
    Match {
        /// Burst CSVs, one per execution.
        #[arg(num_args = 2.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, short = 'o')]
        out: PathBuf,
        /// Ground-truth match set; prints recovery statistics.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Process ranks sequentially instead of in parallel.
        #[arg(long)]
        sequential: bool,
    },
    /// Fuse matched executions into the merged table.
    Fuse {
        #[arg(num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        /// Match-set JSON produced by `match`.
        #[arg(long)]
        matches: PathBuf,
        #[arg(long, short = 'o')]
        out: PathBuf,
        /// Also emit a synthetic .prv (and .pcf) with the merged counters.
        #[arg(long, value_name = "FILE")]
        emit_prv: Option<PathBuf>,
        /// Base execution's .pcf, for stable event-type ids in the output.
        #[arg(long)]
        base_pcf: Option<PathBuf>,
        /// Base execution's .prv, for the original header span.
        #[arg(long)]
        base_prv: Option<PathBuf>,
    },
    /// Compare executions with identical counter sets over matched bursts.
    Validate {
        #[arg(num_args = 2.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        matches: PathBuf,
        /// Report JSON output path.
        #[arg(long, short = 'o')]
        out: PathBuf,
        /// Directory for per-feature per-burst score CSVs
        /// (default: `<out>.scores/`).
        #[arg(long)]
        scores_dir: Option<PathBuf>,
    },
    /// Generate a synthetic execution suite with ground truth.
    Synth {
        /// Generator configuration (JSON).
        config: PathBuf,
        #[arg(long)]
        outdir: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str, n: usize) -> Result<Vec<T>, Error> {
    let parts: Vec<&str> = text.split(',').map(|s| s.trim()).collect();
    if parts.len() != n {
        return Err(Error::Config(format!(
            "{what} expects {n} comma-separated values"
        )));
    }
    parts
        .into_iter()
        .map(|p| {
            p.parse()
                .map_err(|_| Error::Config(format!("{what}: cannot parse {p:?}")))
        })
        .collect()
}

fn effective_config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(t) = cli.threshold {
        cfg.weights.threshold = t;
    }
    if let Some(w) = &cli.weights {
        let v: Vec<f64> = parse_list(w, "--weights", 3)?;
        cfg.weights.temporal = v[0];
        cfg.weights.size = v[1];
        cfg.weights.partner = v[2];
    }
    if let Some(c) = &cli.collectives {
        cfg.collective_names = c
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
    }
    if let Some(m) = &cli.mpi_types {
        let v: Vec<u64> = parse_list(m, "--mpi-types", 3)?;
        cfg.mpi_event_type_ids.p2p = v[0];
        cfg.mpi_event_type_ids.collective = v[1];
        cfg.mpi_event_type_ids.other = v[2];
    }
    if let Some(f) = &cli.fence {
        cfg.fence = match f.as_str() {
            "on" => true,
            "off" => false,
            other => {
                return Err(Error::Config(format!(
                    "--fence expects on|off, got {other}"
                )))
            }
        };
    }
    if let Some(l) = &cli.log_level {
        cfg.log_level = l.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_file(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_executions(
    inputs: &[PathBuf],
    cfg: &PipelineConfig,
) -> Result<Vec<ExecutionDataset>, Error> {
    let classifier = cfg.classifier();
    inputs
        .iter()
        .map(|p| read_burst_csv(&read_file(p)?, &classifier))
        .collect()
}

fn cmd_extract(
    cfg: &PipelineConfig,
    prv: &Path,
    pcf: Option<&PathBuf>,
    out: &Path,
    exec_id: Option<String>,
    counter_set: Option<String>,
) -> Result<(), Error> {
    let trace = parse_prv(&read_file(prv)?)?;
    let pcf_path = pcf.cloned().unwrap_or_else(|| prv.with_extension("pcf"));
    let dict = if pcf_path.exists() {
        parse_pcf(&read_file(&pcf_path)?)?
    } else {
        if pcf.is_some() {
            return Err(Error::io(
                &pcf_path,
                std::io::Error::from(std::io::ErrorKind::NotFound),
            ));
        }
        log::warn!(
            "no companion .pcf found at {}; counters and call names unavailable",
            pcf_path.display()
        );
        PcfDictionary::default()
    };
    let stem = prv
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_default();
    let exec_id = exec_id.unwrap_or(stem);
    let counter_set = counter_set.unwrap_or_default();
    let (dataset, warnings) = extract_bursts(
        &trace,
        &dict,
        &exec_id,
        &counter_set,
        &cfg.extract_options(),
    )?;
    write_file(out, &write_burst_csv(&dataset)?)?;
    println!(
        "{}",
        json!({
            "exec_id": dataset.exec_id,
            "ranks": dataset.rank_count(),
            "bursts": dataset.total_bursts(),
            "counters": dataset.counter_names,
            "warnings": {
                "truncated_intervals": warnings.truncated_intervals,
                "dropped_counter_events": warnings.dropped_counter_events,
                "replaced_open_intervals": warnings.replaced_open_intervals,
                "orphan_exits": warnings.orphan_exits,
                "unknown_records": trace.warnings.unknown_records,
            },
        })
    );
    Ok(())
}

fn cmd_match(
    cfg: &PipelineConfig,
    inputs: &[PathBuf],
    out: &Path,
    truth: Option<&PathBuf>,
    sequential: bool,
) -> Result<(), Error> {
    let mut executions = load_executions(inputs, cfg)?;
    let opts = MatchOptions {
        weights: cfg.weights,
        parallel: !sequential,
    };
    let set = match_executions(&mut executions, &opts)?;
    write_file(out, &set.to_json())?;
    let mut summary = json!({
        "executions": set.executions,
        "groups": set.groups.len(),
        "stats": set.stats,
    });
    if let Some(truth_path) = truth {
        let truth_set = MatchSet::from_json(&read_file(truth_path)?)?;
        let stage1_groups: Vec<_> = set
            .groups
            .iter()
            .filter(|g| matches!(g.stage, Stage::Direct | Stage::Pattern))
            .cloned()
            .collect();
        summary["recovery"] = json!({
            "stage1": pairwise_recovery(&truth_set.groups, &stage1_groups),
            "combined": pairwise_recovery(&truth_set.groups, &set.groups),
        });
    }
    println!("{summary}");
    Ok(())
}

fn cmd_fuse(
    cfg: &PipelineConfig,
    inputs: &[PathBuf],
    matches: &Path,
    out: &Path,
    emit: Option<&PathBuf>,
    base_pcf: Option<&PathBuf>,
    base_prv: Option<&PathBuf>,
) -> Result<(), Error> {
    let executions = load_executions(inputs, cfg)?;
    let set = MatchSet::from_json(&read_file(matches)?)?;
    let base = select_base(&executions, &set)?;
    let fuse_opts = FuseOptions {
        prefix_scheme: cfg.prefix_scheme.clone(),
    };
    let fused = fuse(&executions, &set, &base, &fuse_opts)?;
    if fused.rows.is_empty() {
        log::warn!("no match group spans all executions; the fused table is empty");
    }
    write_file(out, &write_fused_csv(&fused))?;
    let manifest_path = out.with_extension("manifest.json");
    write_file(&manifest_path, &write_column_manifest(&fused))?;
    if let Some(prv_out) = emit {
        let dict = match base_pcf {
            Some(p) => Some(parse_pcf(&read_file(p)?)?),
            None => None,
        };
        let header = match base_prv {
            Some(p) => Some(parse_prv(&read_file(p)?)?.header),
            None => None,
        };
        let emit_opts = EmitOptions {
            mpi_type_ids: cfg.mpi_event_type_ids,
            classifier: cfg.classifier(),
            new_type_base_id: cfg.new_event_type_base_id,
        };
        let (prv, pcf) = emit_prv(&fused, header.as_ref(), dict.as_ref(), &emit_opts)?;
        write_file(prv_out, &prv)?;
        write_file(&prv_out.with_extension("pcf"), &pcf)?;
    }
    println!(
        "{}",
        json!({
            "base": fused.base_exec,
            "rows": fused.rows.len(),
            "columns": fused.columns.len() + 9,
            "partial_groups": fused.partial_group_ids.len(),
            "manifest": manifest_path.display().to_string(),
        })
    );
    Ok(())
}

fn cmd_validate(
    cfg: &PipelineConfig,
    inputs: &[PathBuf],
    matches: &Path,
    out: &Path,
    scores_dir: Option<&PathBuf>,
) -> Result<(), Error> {
    let executions = load_executions(inputs, cfg)?;
    let set = MatchSet::from_json(&read_file(matches)?)?;
    let opts = ValidationOptions {
        fence: cfg.fence,
        acceptance_cutoff: cfg.acceptance_cutoff,
    };
    let outcome = validate(&executions, &set, &opts)?;
    let mut report_json = serde_json::to_string_pretty(&outcome.report)?;
    report_json.push('\n');
    write_file(out, &report_json)?;
    let scores_dir = scores_dir
        .cloned()
        .unwrap_or_else(|| out.with_extension("scores"));
    for (feature, scores) in &outcome.scores {
        let path = scores_dir.join(format!("{feature}.csv"));
        write_file(&path, &write_score_csv(scores))?;
    }
    print!("{}", render_report(&outcome.report));
    Ok(())
}

fn cmd_synth(config_path: &Path, outdir: &Path, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg = SynthConfig::from_json(&read_file(config_path)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let suite = generate_suite(&cfg)?;
    let mut files = Vec::new();
    for (i, dataset) in suite.executions.iter().enumerate() {
        let (prv, pcf) = suite.emit_as_prv(i)?;
        let prv_path = outdir.join(format!("{}.prv", dataset.exec_id));
        write_file(&prv_path, &prv)?;
        write_file(&outdir.join(format!("{}.pcf", dataset.exec_id)), &pcf)?;
        files.push(prv_path.display().to_string());
    }
    write_file(
        &outdir.join("truth.json"),
        &suite.truth_match_set().to_json(),
    )?;
    println!(
        "{}",
        json!({
            "executions": files,
            "truth": outdir.join("truth.json").display().to_string(),
            "ground_truth_groups": suite.ground_truth.len(),
        })
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = effective_config(cli)?;
    if cli.dump_config {
        print!("{}", cfg.to_json());
        return Ok(());
    }
    match &cli.command {
        None => Err(Error::Config("no command given (see --help)".into())),
        Some(Command::Extract {
            prv,
            pcf,
            out,
            exec_id,
            counter_set,
        }) => cmd_extract(
            &cfg,
            prv,
            pcf.as_ref(),
            out,
            exec_id.clone(),
            counter_set.clone(),
        ),
        Some(Command::Match {
            inputs,
            out,
            truth,
            sequential,
        }) => cmd_match(&cfg, inputs, out, truth.as_ref(), *sequential),
        Some(Command::Fuse {
            inputs,
            matches,
            out,
            emit_prv,
            base_pcf,
            base_prv,
        }) => cmd_fuse(
            &cfg,
            inputs,
            matches,
            out,
            emit_prv.as_ref(),
            base_pcf.as_ref(),
            base_prv.as_ref(),
        ),
        Some(Command::Validate {
            inputs,
            matches,
            out,
            scores_dir,
        }) => cmd_validate(&cfg, inputs, matches, out, scores_dir.as_ref()),
        Some(Command::Synth {
            config,
            outdir,
            seed,
        }) => cmd_synth(config, outdir, *seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = cli.log_level.clone().unwrap_or_else(|| "info".to_string());
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
