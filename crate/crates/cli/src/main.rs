//! Pipeline front-end: feature extraction, speaker statistics, phoneme-level
//! aggregation (with or without transcripts), reference-encoder training and
//! encoding, objective evaluation, and MUSHRA score analysis.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Logging level comes
//! from the PROSOREF_LOG environment variable (error | info | debug).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use prosoref_core::align::{parse_alignment, PhoneAlignment};
use prosoref_core::dsp::{
    compute_cepstra, estimate_f0, CepstralTrack, FrameSpec, PitchTrack, DEFAULT_F0_MAX_HZ,
    DEFAULT_F0_MIN_HZ, DEFAULT_N_CEPS, DEFAULT_N_MELS,
};
use prosoref_core::eval::{
    evaluate_utterance, render_summary_table, summarize_reports, CorpusSummary, EvalReport,
    DEFAULT_GROSS_THRESHOLD,
};
use prosoref_core::manifest::{validate_manifest, Manifest, ManifestEntry};
use prosoref_core::mushra::{analyze_scores, parse_scores_csv, quartiles};
use prosoref_core::prosody::{
    aggregate_utterance_with, collect_speaker_stats_with, format_prosody_csv, normalize,
    parse_prosody_csv, AggOptions, ProsodyVector, SpeakerStats, UtteranceFeatures,
};
use prosoref_core::textless::{
    format_textless_csv, parse_posteriorgram_csv, textless_reference,
    DEFAULT_PAUSE_THRESHOLD_MS,
};
use prosoref_core::vae::{
    encode, format_history_csv, reparam_sample, train, EncoderParams, TrainConfig,
};
use prosoref_core::wav::read_wav;

#[derive(Parser)]
#[command(
    name = "prosoref",
    version,
    about = "Prosody reference-signal pipeline: extract, aggregate, encode, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract F0 and cepstral tracks from audio
    Extract(ExtractArgs),
    /// Collect per-speaker normalization statistics from a manifest
    StatsCollect(StatsCollectArgs),
    /// Aggregate per-phoneme prosody vectors using forced alignments
    Aggregate(AggregateArgs),
    /// Aggregate reference vectors from CTC posteriorgrams (no transcript)
    AggregateTextless(AggregateTextlessArgs),
    /// Train the variational reference encoder
    VaeTrain(VaeTrainArgs),
    /// Encode prosody vectors to Gaussian posteriors
    VaeEncode(VaeEncodeArgs),
    /// Objective evaluation: DTW-aligned F0 RMSE, correlation, FFE
    Evaluate(EvaluateArgs),
    /// MUSHRA medians, pairwise significance tests, Holm correction
    MushraStats(MushraStatsArgs),
}

#[derive(Args)]
struct FrameArgs {
    /// Analysis window in milliseconds
    #[arg(long, default_value_t = 25.0)]
    window_ms: f64,
    /// Hop between frames in milliseconds
    #[arg(long, default_value_t = 10.0)]
    hop_ms: f64,
}

#[derive(Args)]
struct ExtractArgs {
    /// Single audio file to process
    #[arg(long, conflicts_with_all = ["manifest", "features_dir"], requires_all = ["out_f0", "out_ceps"])]
    audio: Option<PathBuf>,
    /// F0 track output (JSON)
    #[arg(long)]
    out_f0: Option<PathBuf>,
    /// Cepstral track output (JSON)
    #[arg(long)]
    out_ceps: Option<PathBuf>,
    /// Manifest for batch extraction
    #[arg(long, requires = "features_dir")]
    manifest: Option<PathBuf>,
    /// Output directory for batch extraction (<id>.f0.json, <id>.ceps.json)
    #[arg(long)]
    features_dir: Option<PathBuf>,
    #[command(flatten)]
    frame: FrameArgs,
    /// Lowest F0 candidate in Hz
    #[arg(long, default_value_t = DEFAULT_F0_MIN_HZ)]
    f0_min: f64,
    /// Highest F0 candidate in Hz
    #[arg(long, default_value_t = DEFAULT_F0_MAX_HZ)]
    f0_max: f64,
    /// Mel filterbank size
    #[arg(long, default_value_t = DEFAULT_N_MELS)]
    n_mels: usize,
    /// Number of cepstral coefficients
    #[arg(long, default_value_t = DEFAULT_N_CEPS)]
    n_ceps: usize,
}

#[derive(Args)]
struct StatsCollectArgs {
    /// Manifest TSV (id, audio, alignment, posteriorgram, speaker)
    #[arg(long)]
    manifest: PathBuf,
    /// Directory with extracted <id>.f0.json / <id>.ceps.json tracks
    #[arg(long)]
    features_dir: PathBuf,
    /// Output JSON mapping speaker to statistics
    #[arg(long)]
    out: PathBuf,
    /// Collect duration moments on a log scale (aggregate follows the
    /// stats file automatically)
    #[arg(long)]
    log_duration: bool,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    features_dir: PathBuf,
    /// Speaker statistics JSON from stats-collect
    #[arg(long)]
    stats: PathBuf,
    /// Output CSV of normalized prosody vectors
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AggregateTextlessArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    features_dir: PathBuf,
    #[arg(long)]
    stats: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Blank runs longer than this become a pause token
    #[arg(long, default_value_t = DEFAULT_PAUSE_THRESHOLD_MS)]
    pause_threshold_ms: f64,
}

#[derive(Args)]
struct VaeTrainArgs {
    /// Training vectors (prosody CSV)
    #[arg(long)]
    data: PathBuf,
    /// Optional TrainConfig JSON; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_params: PathBuf,
    #[arg(long)]
    out_history: PathBuf,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    latent: Option<usize>,
}

#[derive(Args)]
struct VaeEncodeArgs {
    /// Trained parameters JSON
    #[arg(long)]
    params: PathBuf,
    /// Vectors to encode (prosody CSV)
    #[arg(long)]
    data: PathBuf,
    /// Output CSV of per-vector posteriors
    #[arg(long)]
    out: PathBuf,
    /// Also draw one embedding sample per vector
    #[arg(long)]
    sample: bool,
    /// Seed for sampling
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory with reference <id>.f0.json / <id>.ceps.json tracks
    #[arg(long)]
    ref_dir: PathBuf,
    /// Directory with synthesized tracks for the same ids
    #[arg(long)]
    syn_dir: PathBuf,
    /// Output report JSON
    #[arg(long)]
    out: PathBuf,
    /// Optional aligned-column text table
    #[arg(long)]
    table: Option<PathBuf>,
    /// Gross pitch error threshold (relative)
    #[arg(long, default_value_t = DEFAULT_GROSS_THRESHOLD)]
    gross_threshold: f64,
}

#[derive(Args)]
struct MushraStatsArgs {
    /// Score CSV: listener,utterance,system,score
    #[arg(long)]
    scores: PathBuf,
    /// Output report JSON
    #[arg(long)]
    out: PathBuf,
    /// Optional per-system quartile CSV
    #[arg(long)]
    quartiles_out: Option<PathBuf>,
}

enum CmdError {
    Usage(String),
    Data(String),
}

impl CmdError {
    fn data(context: &str, err: impl std::fmt::Display) -> Self {
        CmdError::Data(format!("{context}: {err}"))
    }
}

type CmdResult = Result<(), CmdError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("PROSOREF_LOG", "error"),
    )
    .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Extract(args) => cmd_extract(args),
        Command::StatsCollect(args) => cmd_stats_collect(args),
        Command::Aggregate(args) => cmd_aggregate(args),
        Command::AggregateTextless(args) => cmd_aggregate_textless(args),
        Command::VaeTrain(args) => cmd_vae_train(args),
        Command::VaeEncode(args) => cmd_vae_encode(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::MushraStats(args) => cmd_mushra_stats(args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CmdError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read_text(path: &Path) -> Result<String, CmdError> {
    std::fs::read_to_string(path)
        .map_err(|e| CmdError::data(&path.display().to_string(), e))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| CmdError::data(&path.display().to_string(), e))
}

fn extract_tracks(
    audio: &Path,
    frame: &FrameArgs,
    f0_min: f64,
    f0_max: f64,
    n_mels: usize,
    n_ceps: usize,
) -> Result<(PitchTrack, CepstralTrack), CmdError> {
    let wav = read_wav(audio).map_err(|e| CmdError::data(&audio.display().to_string(), e))?;
    let spec = FrameSpec {
        window_ms: frame.window_ms,
        hop_ms: frame.hop_ms,
    };
    let pitch = estimate_f0(&wav, &spec, f0_min, f0_max)
        .map_err(|e| CmdError::data(&audio.display().to_string(), e))?;
    let ceps = compute_cepstra(&wav, &spec, n_mels, n_ceps)
        .map_err(|e| CmdError::data(&audio.display().to_string(), e))?;
    Ok((pitch, ceps))
}

fn cmd_extract(args: ExtractArgs) -> CmdResult {
    match (&args.audio, &args.manifest) {
        (Some(audio), None) => {
            let (pitch, ceps) = extract_tracks(
                audio,
                &args.frame,
                args.f0_min,
                args.f0_max,
                args.n_mels,
                args.n_ceps,
            )?;
            write_text(args.out_f0.as_ref().unwrap(), &pitch.to_json())?;
            write_text(args.out_ceps.as_ref().unwrap(), &ceps.to_json())?;
            Ok(())
        }
        (None, Some(manifest_path)) => {
            let manifest = load_manifest(manifest_path)?;
            let dir = args.features_dir.as_ref().unwrap();
            std::fs::create_dir_all(dir)
                .map_err(|e| CmdError::data(&dir.display().to_string(), e))?;
            for entry in &manifest.entries {
                let (pitch, ceps) = extract_tracks(
                    &entry.audio,
                    &args.frame,
                    args.f0_min,
                    args.f0_max,
                    args.n_mels,
                    args.n_ceps,
                )?;
                write_text(&dir.join(format!("{}.f0.json", entry.id)), &pitch.to_json())?;
                write_text(&dir.join(format!("{}.ceps.json", entry.id)), &ceps.to_json())?;
                info!("extracted {}", entry.id);
            }
            Ok(())
        }
        _ => Err(CmdError::Usage(
            "extract needs either --audio with --out-f0/--out-ceps, or --manifest with --features-dir".into(),
        )),
    }
}

fn load_manifest(path: &Path) -> Result<Manifest, CmdError> {
    validate_manifest(path).map_err(|e| CmdError::Data(e.to_string()))
}

fn load_tracks(
    features_dir: &Path,
    id: &str,
) -> Result<(PitchTrack, CepstralTrack), CmdError> {
    let f0_path = features_dir.join(format!("{id}.f0.json"));
    let ceps_path = features_dir.join(format!("{id}.ceps.json"));
    let pitch = PitchTrack::from_json(&read_text(&f0_path)?)
        .map_err(|e| CmdError::data(&f0_path.display().to_string(), e))?;
    let ceps = CepstralTrack::from_json(&read_text(&ceps_path)?)
        .map_err(|e| CmdError::data(&ceps_path.display().to_string(), e))?;
    Ok((pitch, ceps))
}

fn load_alignment(entry: &ManifestEntry) -> Result<Option<PhoneAlignment>, CmdError> {
    match &entry.alignment {
        Some(path) => {
            let align = parse_alignment(&read_text(path)?)
                .map_err(|e| CmdError::data(&path.display().to_string(), e))?;
            Ok(Some(align))
        }
        None => Ok(None),
    }
}

fn cmd_stats_collect(args: StatsCollectArgs) -> CmdResult {
    let manifest = load_manifest(&args.manifest)?;
    let mut per_speaker: BTreeMap<String, Vec<(PitchTrack, CepstralTrack, PhoneAlignment)>> =
        BTreeMap::new();
    for entry in &manifest.entries {
        let Some(align) = load_alignment(entry)? else {
            info!("skipping {} (no alignment)", entry.id);
            continue;
        };
        let (pitch, ceps) = load_tracks(&args.features_dir, &entry.id)?;
        per_speaker
            .entry(entry.speaker.clone())
            .or_default()
            .push((pitch, ceps, align));
    }
    if per_speaker.is_empty() {
        return Err(CmdError::Data(
            "no manifest entry has an alignment; cannot collect statistics".into(),
        ));
    }
    let opts = AggOptions {
        log_duration: args.log_duration,
    };
    let mut out: BTreeMap<String, SpeakerStats> = BTreeMap::new();
    for (speaker, utts) in &per_speaker {
        let refs: Vec<UtteranceFeatures> = utts.iter().map(|(p, c, a)| (p, c, a)).collect();
        let stats = collect_speaker_stats_with(&refs, opts)
            .map_err(|e| CmdError::data(&format!("speaker {speaker}"), e))?;
        out.insert(speaker.clone(), stats);
    }
    let json = serde_json::to_string(&out).expect("stats serialize");
    write_text(&args.out, &json)
}

fn load_stats_map(path: &Path) -> Result<BTreeMap<String, SpeakerStats>, CmdError> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| CmdError::data(&path.display().to_string(), e))
}

fn speaker_stats<'a>(
    map: &'a BTreeMap<String, SpeakerStats>,
    entry: &ManifestEntry,
) -> Result<&'a SpeakerStats, CmdError> {
    map.get(&entry.speaker).ok_or_else(|| {
        CmdError::Data(format!(
            "no statistics for speaker {:?} (utterance {})",
            entry.speaker, entry.id
        ))
    })
}

fn cmd_aggregate(args: AggregateArgs) -> CmdResult {
    let manifest = load_manifest(&args.manifest)?;
    let stats_map = load_stats_map(&args.stats)?;
    let mut vectors: Vec<ProsodyVector> = Vec::new();
    for entry in &manifest.entries {
        let Some(align) = load_alignment(entry)? else {
            info!("skipping {} (no alignment)", entry.id);
            continue;
        };
        let (pitch, ceps) = load_tracks(&args.features_dir, &entry.id)?;
        let stats = speaker_stats(&stats_map, entry)?;
        let opts = AggOptions {
            log_duration: stats.log_duration,
        };
        let raw = aggregate_utterance_with(&pitch, &ceps, &align, opts)
            .map_err(|e| CmdError::data(&entry.id, e))?;
        vectors.extend(normalize(&raw, stats));
    }
    write_text(&args.out, &format_prosody_csv(&vectors))
}

fn cmd_aggregate_textless(args: AggregateTextlessArgs) -> CmdResult {
    let manifest = load_manifest(&args.manifest)?;
    let stats_map = load_stats_map(&args.stats)?;
    let mut all = Vec::new();
    for entry in &manifest.entries {
        let Some(pg_path) = &entry.posteriorgram else {
            info!("skipping {} (no posteriorgram)", entry.id);
            continue;
        };
        let sidecar = PathBuf::from(format!("{}.hop.json", pg_path.display()));
        let hop_ms = read_hop_sidecar(&sidecar)?;
        let pg = parse_posteriorgram_csv(&read_text(pg_path)?, hop_ms)
            .map_err(|e| CmdError::data(&pg_path.display().to_string(), e))?;
        let (pitch, ceps) = load_tracks(&args.features_dir, &entry.id)?;
        let stats = speaker_stats(&stats_map, entry)?;
        let vecs = textless_reference(&pitch, &ceps, &pg, stats, args.pause_threshold_ms)
            .map_err(|e| CmdError::data(&entry.id, e))?;
        all.extend(vecs);
    }
    write_text(&args.out, &format_textless_csv(&all))
}

fn read_hop_sidecar(path: &Path) -> Result<f64, CmdError> {
    #[derive(serde::Deserialize)]
    struct Sidecar {
        hop_ms: f64,
    }
    let sidecar: Sidecar = serde_json::from_str(&read_text(path)?)
        .map_err(|e| CmdError::data(&path.display().to_string(), e))?;
    Ok(sidecar.hop_ms)
}

fn load_numeric_vectors(path: &Path) -> Result<Vec<[f64; 7]>, CmdError> {
    let vectors = parse_prosody_csv(&read_text(path)?)
        .map_err(|e| CmdError::data(&path.display().to_string(), e))?;
    Ok(vectors.iter().map(|v| v.numeric()).collect())
}

fn cmd_vae_train(args: VaeTrainArgs) -> CmdResult {
    let mut cfg = match &args.config {
        Some(path) => TrainConfig::from_json(&read_text(path)?)
            .map_err(|e| CmdError::data(&path.display().to_string(), e))?,
        None => TrainConfig::default(),
    };
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.hidden {
        cfg.hidden = v;
    }
    if let Some(v) = args.latent {
        cfg.latent = v;
    }

    let data = load_numeric_vectors(&args.data)?;
    let (params, history) =
        train(&data, &cfg).map_err(|e| CmdError::data("training", e))?;
    info!(
        "trained {} iterations, final recon {:.6}",
        history.len(),
        history.last().map(|r| r.recon).unwrap_or(f64::NAN)
    );
    write_text(&args.out_params, &params.to_json())?;
    write_text(&args.out_history, &format_history_csv(&history))
}

fn cmd_vae_encode(args: VaeEncodeArgs) -> CmdResult {
    let params = EncoderParams::from_json(&read_text(&args.params)?)
        .map_err(|e| CmdError::data(&args.params.display().to_string(), e))?;
    let data = load_numeric_vectors(&args.data)?;
    let d = params.latent;

    let mut header: Vec<String> = (1..=d).map(|i| format!("mu_{i}")).collect();
    header.extend((1..=d).map(|i| format!("logsigma_{i}")));
    if args.sample {
        header.extend((1..=d).map(|i| format!("z_{i}")));
    }
    let mut out = header.join(",");
    out.push('\n');

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    for x in &data {
        let post = encode(&params, x).map_err(|e| CmdError::data("encode", e))?;
        let mut cells: Vec<String> = post.mu.iter().map(f64::to_string).collect();
        cells.extend(post.log_sigma.iter().map(f64::to_string));
        if args.sample {
            let z = reparam_sample(&post, &mut rng);
            cells.extend(z.iter().map(f64::to_string));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_text(&args.out, &out)
}

fn track_ids(dir: &Path) -> Result<Vec<String>, CmdError> {
    let mut ids = Vec::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CmdError::data(&dir.display().to_string(), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CmdError::data(&dir.display().to_string(), e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_suffix(".f0.json") {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    Ok(ids)
}

fn cmd_evaluate(args: EvaluateArgs) -> CmdResult {
    let ids = track_ids(&args.ref_dir)?;
    if ids.is_empty() {
        return Err(CmdError::Data(format!(
            "no <id>.f0.json tracks in {}",
            args.ref_dir.display()
        )));
    }
    let mut reports: BTreeMap<String, EvalReport> = BTreeMap::new();
    for id in &ids {
        let (ref_pitch, ref_ceps) = load_tracks(&args.ref_dir, id)?;
        let (syn_pitch, syn_ceps) = load_tracks(&args.syn_dir, id)?;
        let report = evaluate_utterance(
            &ref_ceps,
            &syn_ceps,
            &ref_pitch,
            &syn_pitch,
            args.gross_threshold,
        )
        .map_err(|e| CmdError::data(id, e))?;
        reports.insert(id.clone(), report);
    }
    let summary = summarize_reports(&reports.values().copied().collect::<Vec<_>>())
        .map_err(|e| CmdError::data("summary", e))?;

    #[derive(serde::Serialize)]
    struct FullReport<'a> {
        utterances: &'a BTreeMap<String, EvalReport>,
        summary: &'a CorpusSummary,
    }
    let json = serde_json::to_string(&FullReport {
        utterances: &reports,
        summary: &summary,
    })
    .expect("report serialize");
    write_text(&args.out, &json)?;

    if let Some(table_path) = &args.table {
        let label = format!("{} vs {}", args.ref_dir.display(), args.syn_dir.display());
        write_text(table_path, &render_summary_table(&[(label, summary)]))?;
    }
    Ok(())
}

fn cmd_mushra_stats(args: MushraStatsArgs) -> CmdResult {
    let scores = parse_scores_csv(&read_text(&args.scores)?)
        .map_err(|e| CmdError::data(&args.scores.display().to_string(), e))?;
    let report = analyze_scores(&scores).map_err(|e| CmdError::data("analysis", e))?;
    write_text(
        &args.out,
        &serde_json::to_string(&report).expect("report serialize"),
    )?;

    if let Some(q_path) = &args.quartiles_out {
        let mut out = String::from("system,min,q1,median,q3,max\n");
        for sys in &scores.systems {
            let vals = scores.system_scores(sys);
            let q = quartiles(&vals).expect("non-empty by construction");
            out.push_str(&format!(
                "{sys},{},{},{},{},{}\n",
                q[0], q[1], q[2], q[3], q[4]
            ));
        }
        write_text(q_path, &out)?;
    }
    Ok(())
}
