//! Python bindings for the prosody reference-signal toolkit.
//!
//! Exposes the pipeline's types and operations with plain-Python data
//! (lists, tuples, floats); heavier artifacts round-trip through the same
//! JSON/CSV formats the CLI uses.

#![allow(clippy::type_complexity)] // binding signatures mirror the Python tuples

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use prosoref_core::{align, dsp, eval, mushra, prosody, textless, vae, wav};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err(err: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(err.to_string())
}

// ---- dsp ----

#[pyclass(name = "PitchTrack", from_py_object)]
#[derive(Clone)]
struct PyPitchTrack {
    inner: dsp::PitchTrack,
}

#[pymethods]
impl PyPitchTrack {
    #[new]
    fn new(f0: Vec<f64>, voiced: Vec<bool>, hop_ms: f64) -> PyResult<Self> {
        let inner = dsp::PitchTrack {
            hop_ms,
            f0_hz: f0,
            voiced,
        };
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn f0(&self) -> Vec<f64> {
        self.inner.f0_hz.clone()
    }

    #[getter]
    fn voiced(&self) -> Vec<bool> {
        self.inner.voiced.clone()
    }

    #[getter]
    fn hop_ms(&self) -> f64 {
        self.inner.hop_ms
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: dsp::PitchTrack::from_json(text).map_err(value_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "CepstralTrack", from_py_object)]
#[derive(Clone)]
struct PyCepstralTrack {
    inner: dsp::CepstralTrack,
}

#[pymethods]
impl PyCepstralTrack {
    #[new]
    fn new(frames: Vec<Vec<f64>>, hop_ms: f64) -> PyResult<Self> {
        let inner = dsp::CepstralTrack { hop_ms, frames };
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn frames(&self) -> Vec<Vec<f64>> {
        self.inner.frames.clone()
    }

    #[getter]
    fn hop_ms(&self) -> f64 {
        self.inner.hop_ms
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: dsp::CepstralTrack::from_json(text).map_err(value_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Read a mono PCM16/float32 WAV file; returns (samples, sample_rate).
#[pyfunction]
fn read_wav(path: &str) -> PyResult<(Vec<f64>, u32)> {
    let wav = wav::read_wav(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok((wav.samples, wav.sample_rate))
}

#[pyfunction]
#[pyo3(signature = (samples, sample_rate, f0_min=dsp::DEFAULT_F0_MIN_HZ, f0_max=dsp::DEFAULT_F0_MAX_HZ, window_ms=25.0, hop_ms=10.0))]
fn estimate_f0(
    samples: Vec<f64>,
    sample_rate: u32,
    f0_min: f64,
    f0_max: f64,
    window_ms: f64,
    hop_ms: f64,
) -> PyResult<PyPitchTrack> {
    let wav = dsp::Waveform::new(samples, sample_rate).map_err(value_err)?;
    let spec = dsp::FrameSpec { window_ms, hop_ms };
    Ok(PyPitchTrack {
        inner: dsp::estimate_f0(&wav, &spec, f0_min, f0_max).map_err(value_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (samples, sample_rate, n_mels=dsp::DEFAULT_N_MELS, n_ceps=dsp::DEFAULT_N_CEPS, window_ms=25.0, hop_ms=10.0))]
fn compute_cepstra(
    samples: Vec<f64>,
    sample_rate: u32,
    n_mels: usize,
    n_ceps: usize,
    window_ms: f64,
    hop_ms: f64,
) -> PyResult<PyCepstralTrack> {
    let wav = dsp::Waveform::new(samples, sample_rate).map_err(value_err)?;
    let spec = dsp::FrameSpec { window_ms, hop_ms };
    Ok(PyCepstralTrack {
        inner: dsp::compute_cepstra(&wav, &spec, n_mels, n_ceps).map_err(value_err)?,
    })
}

// ---- alignment ----

#[pyclass(name = "PhoneAlignment", from_py_object)]
#[derive(Clone)]
struct PyPhoneAlignment {
    inner: align::PhoneAlignment,
}

#[pymethods]
impl PyPhoneAlignment {
    /// Segments as (phone, start_s, end_s, [(s, e); 3]) tuples.
    #[getter]
    fn segments(&self) -> Vec<(String, f64, f64, Vec<(f64, f64)>)> {
        self.inner
            .segments
            .iter()
            .map(|s| (s.phone.clone(), s.start_s, s.end_s, s.states.to_vec()))
            .collect()
    }

    #[getter]
    fn total_s(&self) -> f64 {
        self.inner.total_s
    }

    fn format(&self) -> String {
        align::format_alignment(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.segments.len()
    }
}

#[pyfunction]
fn parse_alignment(text: &str) -> PyResult<PyPhoneAlignment> {
    Ok(PyPhoneAlignment {
        inner: align::parse_alignment(text).map_err(value_err)?,
    })
}

#[pyfunction]
fn tri_partition(start_s: f64, end_s: f64) -> PyResult<Vec<(f64, f64)>> {
    Ok(align::tri_partition(start_s, end_s)
        .map_err(value_err)?
        .to_vec())
}

/// Half-open frame-index range [lo, hi) of frames whose centers lie in
/// [start_s, end_s).
#[pyfunction]
fn frames_in_interval(start_s: f64, end_s: f64, hop_ms: f64, n_frames: usize) -> (usize, usize) {
    let r = align::frames_in_interval((start_s, end_s), hop_ms, n_frames);
    (r.start, r.end)
}

// ---- prosody aggregation ----

#[pyclass(name = "ProsodyVector", from_py_object)]
#[derive(Clone)]
struct PyProsodyVector {
    inner: prosody::ProsodyVector,
}

#[pymethods]
impl PyProsodyVector {
    #[getter]
    fn phone(&self) -> String {
        self.inner.phone.clone()
    }

    #[getter]
    fn f0_state(&self) -> [f64; 3] {
        self.inner.f0_state
    }

    #[getter]
    fn mgc0_state(&self) -> [f64; 3] {
        self.inner.mgc0_state
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration
    }

    #[getter]
    fn f0_missing(&self) -> [bool; 3] {
        self.inner.f0_missing
    }

    #[getter]
    fn dur_global(&self) -> bool {
        self.inner.dur_global
    }

    /// The 7 numeric dimensions in CSV order.
    fn numeric(&self) -> [f64; 7] {
        self.inner.numeric()
    }
}

#[pyclass(name = "SpeakerStats", from_py_object)]
#[derive(Clone)]
struct PySpeakerStats {
    inner: prosody::SpeakerStats,
}

#[pymethods]
impl PySpeakerStats {
    #[getter]
    fn f0_mean(&self) -> f64 {
        self.inner.f0_mean
    }

    #[getter]
    fn f0_var(&self) -> f64 {
        self.inner.f0_var
    }

    #[getter]
    fn mgc0_mean(&self) -> f64 {
        self.inner.mgc0_mean
    }

    #[getter]
    fn mgc0_var(&self) -> f64 {
        self.inner.mgc0_var
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: prosody::SpeakerStats::from_json(text).map_err(value_err)?,
        })
    }
}

#[pyfunction]
fn collect_speaker_stats(
    corpus: Vec<(PyPitchTrack, PyCepstralTrack, PyPhoneAlignment)>,
) -> PyResult<PySpeakerStats> {
    let refs: Vec<prosody::UtteranceFeatures> = corpus
        .iter()
        .map(|(p, c, a)| (&p.inner, &c.inner, &a.inner))
        .collect();
    Ok(PySpeakerStats {
        inner: prosody::collect_speaker_stats(&refs).map_err(value_err)?,
    })
}

#[pyfunction]
fn aggregate_utterance(
    pitch: &PyPitchTrack,
    ceps: &PyCepstralTrack,
    alignment: &PyPhoneAlignment,
) -> PyResult<Vec<PyProsodyVector>> {
    let raw = prosody::aggregate_utterance(&pitch.inner, &ceps.inner, &alignment.inner)
        .map_err(value_err)?;
    Ok(raw
        .into_iter()
        .map(|inner| PyProsodyVector { inner })
        .collect())
}

#[pyfunction]
fn normalize(vectors: Vec<PyProsodyVector>, stats: &PySpeakerStats) -> Vec<PyProsodyVector> {
    let raw: Vec<prosody::ProsodyVector> = vectors.into_iter().map(|v| v.inner).collect();
    prosody::normalize(&raw, &stats.inner)
        .into_iter()
        .map(|inner| PyProsodyVector { inner })
        .collect()
}

#[pyfunction]
fn format_prosody_csv(vectors: Vec<PyProsodyVector>) -> String {
    let raw: Vec<prosody::ProsodyVector> = vectors.into_iter().map(|v| v.inner).collect();
    prosody::format_prosody_csv(&raw)
}

#[pyfunction]
fn parse_prosody_csv(text: &str) -> PyResult<Vec<PyProsodyVector>> {
    Ok(prosody::parse_prosody_csv(text)
        .map_err(value_err)?
        .into_iter()
        .map(|inner| PyProsodyVector { inner })
        .collect())
}

// ---- text-less referencing ----

#[pyclass(name = "Posteriorgram", from_py_object)]
#[derive(Clone)]
struct PyPosteriorgram {
    inner: textless::Posteriorgram,
}

#[pymethods]
impl PyPosteriorgram {
    #[new]
    fn new(phones: Vec<String>, rows: Vec<Vec<f64>>, hop_ms: f64) -> PyResult<Self> {
        Ok(Self {
            inner: textless::Posteriorgram::new(phones, rows, hop_ms).map_err(value_err)?,
        })
    }

    #[getter]
    fn phones(&self) -> Vec<String> {
        self.inner.phones.clone()
    }

    #[getter]
    fn hop_ms(&self) -> f64 {
        self.inner.hop_ms
    }

    fn to_csv(&self) -> String {
        textless::format_posteriorgram_csv(&self.inner)
    }

    #[staticmethod]
    fn from_csv(text: &str, hop_ms: f64) -> PyResult<Self> {
        Ok(Self {
            inner: textless::parse_posteriorgram_csv(text, hop_ms).map_err(value_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "TextlessRefVector", from_py_object)]
#[derive(Clone)]
struct PyTextlessRefVector {
    inner: textless::TextlessRefVector,
}

#[pymethods]
impl PyTextlessRefVector {
    #[getter]
    fn phone(&self) -> String {
        self.inner.phone.clone()
    }

    #[getter]
    fn f0(&self) -> f64 {
        self.inner.f0
    }

    #[getter]
    fn mgc0(&self) -> f64 {
        self.inner.mgc0
    }

    #[getter]
    fn d_prev(&self) -> f64 {
        self.inner.d_prev
    }

    #[getter]
    fn d_next(&self) -> f64 {
        self.inner.d_next
    }

    #[getter]
    fn posterior_row(&self) -> Vec<f64> {
        self.inner.posterior_row.clone()
    }

    #[getter]
    fn is_pau(&self) -> bool {
        self.inner.is_pau
    }

    #[getter]
    fn f0_missing(&self) -> bool {
        self.inner.f0_missing
    }
}

/// Greedy emissions as (phone, run_start, run_end, rep_frame) tuples.
#[pyfunction]
fn greedy_emissions(pg: &PyPosteriorgram) -> Vec<(String, usize, usize, usize)> {
    textless::greedy_emissions(&pg.inner)
        .into_iter()
        .map(|e| (e.phone, e.run_start, e.run_end, e.rep_frame))
        .collect()
}

#[pyfunction]
fn blank_runs(pg: &PyPosteriorgram) -> Vec<(usize, usize)> {
    textless::blank_runs(&pg.inner)
}

#[pyfunction]
#[pyo3(signature = (pitch, ceps, pg, stats, pause_threshold_ms=textless::DEFAULT_PAUSE_THRESHOLD_MS))]
fn textless_reference(
    pitch: &PyPitchTrack,
    ceps: &PyCepstralTrack,
    pg: &PyPosteriorgram,
    stats: &PySpeakerStats,
    pause_threshold_ms: f64,
) -> PyResult<Vec<PyTextlessRefVector>> {
    Ok(textless::textless_reference(
        &pitch.inner,
        &ceps.inner,
        &pg.inner,
        &stats.inner,
        pause_threshold_ms,
    )
    .map_err(value_err)?
    .into_iter()
    .map(|inner| PyTextlessRefVector { inner })
    .collect())
}

// ---- variational reference encoder ----

#[pyclass(name = "TrainConfig", from_py_object)]
#[derive(Clone)]
struct PyTrainConfig {
    inner: vae::TrainConfig,
}

#[pymethods]
impl PyTrainConfig {
    #[new]
    #[pyo3(signature = (iterations=10_000, learning_rate=1e-3, seed=0, batch_size=32, hidden=32, latent=8, kl_start_iter=25_000, kl_end_iter=150_000, kl_period=200))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        iterations: u64,
        learning_rate: f64,
        seed: u64,
        batch_size: usize,
        hidden: usize,
        latent: usize,
        kl_start_iter: u64,
        kl_end_iter: u64,
        kl_period: u64,
    ) -> PyResult<Self> {
        let inner = vae::TrainConfig {
            kl_start_iter,
            kl_end_iter,
            kl_period,
            learning_rate,
            iterations,
            seed,
            batch_size,
            hidden,
            latent,
        };
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: vae::TrainConfig::from_json(text).map_err(value_err)?,
        })
    }
}

#[pyclass(name = "GaussianPosterior", from_py_object)]
#[derive(Clone)]
struct PyGaussianPosterior {
    inner: vae::GaussianPosterior,
}

#[pymethods]
impl PyGaussianPosterior {
    #[new]
    fn new(mu: Vec<f64>, log_sigma: Vec<f64>) -> Self {
        Self {
            inner: vae::GaussianPosterior { mu, log_sigma },
        }
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.inner.mu.clone()
    }

    #[getter]
    fn log_sigma(&self) -> Vec<f64> {
        self.inner.log_sigma.clone()
    }

    fn sigma(&self) -> Vec<f64> {
        self.inner.sigma()
    }
}

#[pyclass(name = "EncoderParams", from_py_object)]
#[derive(Clone)]
struct PyEncoderParams {
    inner: vae::EncoderParams,
}

#[pymethods]
impl PyEncoderParams {
    #[getter]
    fn hidden(&self) -> usize {
        self.inner.hidden
    }

    #[getter]
    fn latent(&self) -> usize {
        self.inner.latent
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: vae::EncoderParams::from_json(text).map_err(value_err)?,
        })
    }
}

#[pyfunction]
fn kl_scale(iteration: u64, cfg: &PyTrainConfig) -> f64 {
    vae::kl_scale(iteration, &cfg.inner)
}

#[pyfunction]
fn kl_active(iteration: u64, cfg: &PyTrainConfig) -> bool {
    vae::kl_active(iteration, &cfg.inner)
}

#[pyfunction]
fn kl_divergence(post: &PyGaussianPosterior) -> f64 {
    vae::kl_divergence(&post.inner)
}

#[pyfunction]
fn encode(params: &PyEncoderParams, x: [f64; 7]) -> PyResult<PyGaussianPosterior> {
    Ok(PyGaussianPosterior {
        inner: vae::encode(&params.inner, &x).map_err(value_err)?,
    })
}

#[pyfunction]
fn reparam_sample(post: &PyGaussianPosterior, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vae::reparam_sample(&post.inner, &mut rng)
}

/// Train the reference encoder; returns (params, history) where history rows
/// are (iteration, recon, kl, scale, active).
#[pyfunction]
fn train(
    dataset: Vec<[f64; 7]>,
    cfg: &PyTrainConfig,
) -> PyResult<(PyEncoderParams, Vec<(u64, f64, f64, f64, bool)>)> {
    let (params, history) = vae::train(&dataset, &cfg.inner).map_err(value_err)?;
    Ok((
        PyEncoderParams { inner: params },
        history
            .into_iter()
            .map(|r| (r.iteration, r.recon, r.kl, r.scale, r.active))
            .collect(),
    ))
}

#[pyfunction]
fn reconstruction_mse(params: &PyEncoderParams, dataset: Vec<[f64; 7]>) -> f64 {
    vae::reconstruction_mse(&params.inner, &dataset)
}

#[pyfunction]
#[pyo3(signature = (params, batch, eps=1e-5, seed=0))]
fn grad_check(params: &PyEncoderParams, batch: Vec<[f64; 7]>, eps: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vae::grad_check(&params.inner, &batch, eps, &mut rng)
}

#[pyfunction]
fn concat_embeddings(
    linguistic: Vec<Vec<f64>>,
    prosody: Vec<Vec<f64>>,
) -> PyResult<Vec<Vec<f64>>> {
    vae::concat_embeddings(&linguistic, &prosody).map_err(value_err)
}

/// Random initialization (seeded) of encoder/decoder parameters.
#[pyfunction]
#[pyo3(signature = (hidden=32, latent=8, seed=0))]
fn init_params(hidden: usize, latent: usize, seed: u64) -> PyEncoderParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PyEncoderParams {
        inner: vae::EncoderParams::init(hidden, latent, &mut rng),
    }
}

// ---- objective evaluation ----

#[pyclass(name = "EvalReport", from_py_object)]
#[derive(Clone)]
struct PyEvalReport {
    inner: eval::EvalReport,
}

#[pymethods]
impl PyEvalReport {
    #[getter]
    fn rmse_hz(&self) -> f64 {
        self.inner.rmse_hz
    }

    #[getter]
    fn corr(&self) -> f64 {
        self.inner.corr
    }

    #[getter]
    fn ffe_pct(&self) -> f64 {
        self.inner.ffe_pct
    }

    #[getter]
    fn n_frames(&self) -> usize {
        self.inner.n_frames
    }
}

/// DTW over vector sequences; returns (steps, cost).
#[pyfunction]
fn dtw(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<(Vec<(usize, usize)>, f64)> {
    let (path, cost) = eval::dtw(&a, &b).map_err(value_err)?;
    Ok((path.steps, cost))
}

/// F0 metrics over (ref_f0, ref_voiced, syn_f0, syn_voiced) pairs.
#[pyfunction]
#[pyo3(signature = (pairs, gross_threshold=eval::DEFAULT_GROSS_THRESHOLD))]
fn f0_metrics(pairs: Vec<(f64, bool, f64, bool)>, gross_threshold: f64) -> PyResult<PyEvalReport> {
    let pairs: Vec<eval::F0Pair> = pairs
        .into_iter()
        .map(|(ref_f0, ref_voiced, syn_f0, syn_voiced)| eval::F0Pair {
            ref_f0,
            ref_voiced,
            syn_f0,
            syn_voiced,
        })
        .collect();
    Ok(PyEvalReport {
        inner: eval::f0_metrics(&pairs, gross_threshold).map_err(value_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (ref_ceps, syn_ceps, ref_pitch, syn_pitch, gross_threshold=eval::DEFAULT_GROSS_THRESHOLD))]
fn evaluate_utterance(
    ref_ceps: &PyCepstralTrack,
    syn_ceps: &PyCepstralTrack,
    ref_pitch: &PyPitchTrack,
    syn_pitch: &PyPitchTrack,
    gross_threshold: f64,
) -> PyResult<PyEvalReport> {
    Ok(PyEvalReport {
        inner: eval::evaluate_utterance(
            &ref_ceps.inner,
            &syn_ceps.inner,
            &ref_pitch.inner,
            &syn_pitch.inner,
            gross_threshold,
        )
        .map_err(value_err)?,
    })
}

/// Corpus aggregation as (metric, mean, population sd) triples.
#[pyfunction]
fn summarize_reports(reports: Vec<PyEvalReport>) -> PyResult<Vec<(String, f64, f64)>> {
    let raw: Vec<eval::EvalReport> = reports.into_iter().map(|r| r.inner).collect();
    let s = eval::summarize_reports(&raw).map_err(value_err)?;
    Ok(vec![
        ("rmse_hz".into(), s.rmse_hz.mean, s.rmse_hz.sd),
        ("corr".into(), s.corr.mean, s.corr.sd),
        ("ffe_pct".into(), s.ffe_pct.mean, s.ffe_pct.sd),
    ])
}

// ---- listening-test statistics ----

#[pyfunction]
fn wilcoxon_signed_rank(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    mushra::wilcoxon_signed_rank(&x, &y).map_err(value_err)
}

#[pyfunction]
fn paired_t(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    mushra::paired_t(&x, &y).map_err(value_err)
}

/// Holm decisions as (p, adjusted_p, rejected), in input order.
#[pyfunction]
#[pyo3(signature = (pvals, alpha=0.05))]
fn holm_correction(pvals: Vec<f64>, alpha: f64) -> PyResult<Vec<(f64, f64, bool)>> {
    Ok(mushra::holm_correction(&pvals, alpha)
        .map_err(value_err)?
        .into_iter()
        .map(|d| (d.p, d.adjusted_p, d.rejected))
        .collect())
}

/// Medians per system from (listener, utterance, system, score) rows.
#[pyfunction]
fn mushra_medians(rows: Vec<(String, String, String, f64)>) -> PyResult<Vec<(String, f64)>> {
    let scores = mushra::MushraScores::new(rows).map_err(value_err)?;
    Ok(mushra::mushra_medians(&scores))
}

#[pymodule]
fn prosoref(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPitchTrack>()?;
    m.add_class::<PyCepstralTrack>()?;
    m.add_class::<PyPhoneAlignment>()?;
    m.add_class::<PyProsodyVector>()?;
    m.add_class::<PySpeakerStats>()?;
    m.add_class::<PyPosteriorgram>()?;
    m.add_class::<PyTextlessRefVector>()?;
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyGaussianPosterior>()?;
    m.add_class::<PyEncoderParams>()?;
    m.add_class::<PyEvalReport>()?;

    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_f0, m)?)?;
    m.add_function(wrap_pyfunction!(compute_cepstra, m)?)?;
    m.add_function(wrap_pyfunction!(parse_alignment, m)?)?;
    m.add_function(wrap_pyfunction!(tri_partition, m)?)?;
    m.add_function(wrap_pyfunction!(frames_in_interval, m)?)?;
    m.add_function(wrap_pyfunction!(collect_speaker_stats, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_utterance, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(format_prosody_csv, m)?)?;
    m.add_function(wrap_pyfunction!(parse_prosody_csv, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_emissions, m)?)?;
    m.add_function(wrap_pyfunction!(blank_runs, m)?)?;
    m.add_function(wrap_pyfunction!(textless_reference, m)?)?;
    m.add_function(wrap_pyfunction!(kl_scale, m)?)?;
    m.add_function(wrap_pyfunction!(kl_active, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(reparam_sample, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruction_mse, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    m.add_function(wrap_pyfunction!(concat_embeddings, m)?)?;
    m.add_function(wrap_pyfunction!(init_params, m)?)?;
    m.add_function(wrap_pyfunction!(dtw, m)?)?;
    m.add_function(wrap_pyfunction!(f0_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_utterance, m)?)?;
    m.add_function(wrap_pyfunction!(summarize_reports, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_signed_rank, m)?)?;
    m.add_function(wrap_pyfunction!(paired_t, m)?)?;
    m.add_function(wrap_pyfunction!(holm_correction, m)?)?;
    m.add_function(wrap_pyfunction!(mushra_medians, m)?)?;
    Ok(())
}
