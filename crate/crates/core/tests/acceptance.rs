//! Acceptance suite: every release criterion with its tolerance and time
//! budget, one pass/fail line each (run with --nocapture to see them all).

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use prosoref_core::align::{
    format_alignment, parse_alignment, PhoneAlignment, PhoneSegment,
};
use prosoref_core::dsp::{estimate_f0, CepstralTrack, FrameSpec, PitchTrack, Waveform};
use prosoref_core::eval::{dtw, f0_metrics, F0Pair, DEFAULT_GROSS_THRESHOLD};
use prosoref_core::mushra::{holm_correction, paired_t, wilcoxon_signed_rank};
use prosoref_core::prosody::{
    aggregate_utterance, collect_speaker_stats, format_prosody_csv, normalize,
    parse_prosody_csv, ProsodyVector, UtteranceFeatures,
};
use prosoref_core::textless::{
    blank_runs, format_posteriorgram_csv, greedy_emissions, insert_pauses,
    parse_posteriorgram_csv, token_distances, Posteriorgram, BLANK_SYMBOL,
};
use prosoref_core::vae::{
    grad_check, kl_active, kl_divergence, kl_scale, reconstruction_mse, train,
    EncoderParams, GaussianPosterior, TrainConfig,
};

fn criterion(name: &str, budget: Duration, body: impl FnOnce() -> Result<(), String>) {
    let start = Instant::now();
    let result = body();
    let elapsed = start.elapsed();
    match &result {
        Ok(()) if elapsed <= budget => {
            println!("[PASS] {name} ({elapsed:.2?})");
        }
        Ok(()) => {
            println!("[FAIL] {name}: exceeded {budget:?} budget ({elapsed:.2?})");
            panic!("{name}: exceeded time budget {budget:?} ({elapsed:.2?})");
        }
        Err(msg) => {
            println!("[FAIL] {name}: {msg}");
            panic!("{name}: {msg}");
        }
    }
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---- shared fixtures ----

fn sine(freq: f64, seconds: f64, sr: u32) -> Waveform {
    let n = (seconds * sr as f64).round() as usize;
    Waveform::new(
        (0..n)
            .map(|i| 0.6 * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin())
            .collect(),
        sr,
    )
    .unwrap()
}

fn synthetic_vectors(n: usize, seed: u64) -> Vec<[f64; 7]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let map: Vec<[f64; 2]> = (0..7)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    (0..n)
        .map(|_| {
            let g = [
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ];
            let mut x = [0.0; 7];
            for (xi, row) in x.iter_mut().zip(&map) {
                let noise: f64 = rng.sample(StandardNormal);
                *xi = row[0] * g[0] + row[1] * g[1] + 0.05 * noise;
            }
            x
        })
        .collect()
}

/// Corpus where every state holds exactly one voiced frame and values cycle
/// with period 4 (coprime to the 3 states), so per-dimension statistics
/// coincide with the frame-level statistics used for normalization.
fn single_frame_state_corpus(
    segments_per_utt: usize,
    n_utts: usize,
    f0_scale: f64,
    f0_shift: f64,
    c0_shift: f64,
) -> Vec<(PitchTrack, CepstralTrack, PhoneAlignment)> {
    assert_eq!(segments_per_utt % 8, 0);
    let base_f0 = [110.0, 130.0, 150.0, 170.0];
    let base_c0 = [-3.0, -2.5, -2.0, -1.5];
    let pat = [0.0, 2.0, -3.0, 1.5, 4.0, -2.0, -1.0, 3.0, 0.5, -4.0, 2.5, -0.5];

    (0..n_utts)
        .map(|u| {
            let s = segments_per_utt;
            let n = 3 * s;
            let pitch = PitchTrack {
                hop_ms: 10.0,
                f0_hz: (0..n)
                    .map(|i| f0_scale * base_f0[(i + u) % 4] + f0_shift)
                    .collect(),
                voiced: vec![true; n],
            };
            let ceps = CepstralTrack {
                hop_ms: 10.0,
                frames: (0..n)
                    .map(|i| vec![base_c0[(i + 3 * u) % 4] + c0_shift])
                    .collect(),
            };
            let boundary = |m: usize| -> f64 {
                if m == 0 || m == n {
                    (m as f64 * 10.0) / 1000.0
                } else {
                    (m as f64 * 10.0 + pat[m % 12]) / 1000.0
                }
            };
            let segments = (0..s)
                .map(|j| {
                    let states = [
                        (boundary(3 * j), boundary(3 * j + 1)),
                        (boundary(3 * j + 1), boundary(3 * j + 2)),
                        (boundary(3 * j + 2), boundary(3 * j + 3)),
                    ];
                    PhoneSegment {
                        phone: if j % 2 == 0 { "A".into() } else { "B".into() },
                        start_s: states[0].0,
                        end_s: states[2].1,
                        states,
                    }
                })
                .collect();
            (pitch, ceps, PhoneAlignment::new(segments))
        })
        .collect()
}

fn labels_posteriorgram(labels: &[usize], n_phones: usize, hop_ms: f64) -> Posteriorgram {
    let width = n_phones + 1;
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| {
            let rest = 0.2 / (width - 1) as f64;
            (0..width)
                .map(|i| if i == l { 0.8 } else { rest })
                .collect()
        })
        .collect();
    let mut phones: Vec<String> = (0..n_phones).map(|i| format!("P{i}")).collect();
    phones.push(BLANK_SYMBOL.to_string());
    Posteriorgram::new(phones, rows, hop_ms).unwrap()
}

// ---- criteria ----

#[test]
fn dtw_oracle_equivalence() {
    criterion(
        "DTW equals exhaustive path enumeration on 200 seeded instances",
        Duration::from_secs(5),
        || {
            fn euclidean(a: &[f64], b: &[f64]) -> f64 {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            }
            fn enumerate_min(a: &[Vec<f64>], b: &[Vec<f64>], i: usize, j: usize, acc: f64) -> f64 {
                let acc = acc + euclidean(&a[i], &b[j]);
                if i == a.len() - 1 && j == b.len() - 1 {
                    return acc;
                }
                let mut best = f64::INFINITY;
                if i + 1 < a.len() {
                    best = best.min(enumerate_min(a, b, i + 1, j, acc));
                }
                if j + 1 < b.len() {
                    best = best.min(enumerate_min(a, b, i, j + 1, acc));
                }
                if i + 1 < a.len() && j + 1 < b.len() {
                    best = best.min(enumerate_min(a, b, i + 1, j + 1, acc));
                }
                best
            }

            let mut rng = ChaCha8Rng::seed_from_u64(20_24);
            for case in 0..200 {
                let n = rng.random_range(1..=6usize);
                let m = rng.random_range(1..=6usize);
                let d = rng.random_range(1..=3usize);
                let mut gen = |len: usize| -> Vec<Vec<f64>> {
                    (0..len)
                        .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
                        .collect()
                };
                let a = gen(n);
                let b = gen(m);
                let (path, cost) = dtw(&a, &b).map_err(|e| e.to_string())?;
                let oracle = enumerate_min(&a, &b, 0, 0, 0.0);
                check(cost == oracle, format!("case {case}: {cost} != {oracle}"))?;
                check(path.validate(n, m), format!("case {case}: invalid path"))?;
            }
            Ok(())
        },
    );
}

#[test]
fn f0_metric_fixtures() {
    criterion(
        "FFE fixtures: 20.0 exact, 100.0 on uniform 25% shift, perfect self-comparison",
        Duration::from_secs(1),
        || {
            let clean = |r: f64, s: f64| F0Pair {
                ref_f0: r,
                ref_voiced: true,
                syn_f0: s,
                syn_voiced: true,
            };

            // 8 clean + 1 voicing mismatch + 1 gross error
            let mut pairs: Vec<F0Pair> = (0..8)
                .map(|i| clean(100.0 + 3.0 * i as f64, 101.0 + 3.0 * i as f64))
                .collect();
            pairs.push(F0Pair {
                ref_f0: 140.0,
                ref_voiced: true,
                syn_f0: 0.0,
                syn_voiced: false,
            });
            pairs.push(clean(100.0, 130.0));
            let r = f0_metrics(&pairs, DEFAULT_GROSS_THRESHOLD).map_err(|e| e.to_string())?;
            check(r.ffe_pct == 20.0, format!("ffe {} != 20.0", r.ffe_pct))?;

            let shifted: Vec<F0Pair> = (0..10)
                .map(|i| {
                    let r = 90.0 + 6.0 * i as f64;
                    clean(r, 1.25 * r)
                })
                .collect();
            let r = f0_metrics(&shifted, DEFAULT_GROSS_THRESHOLD).map_err(|e| e.to_string())?;
            check(r.ffe_pct == 100.0, format!("ffe {} != 100.0", r.ffe_pct))?;

            let identical: Vec<F0Pair> = (0..25)
                .map(|i| clean(100.0 + 4.0 * i as f64, 100.0 + 4.0 * i as f64))
                .collect();
            let r = f0_metrics(&identical, DEFAULT_GROSS_THRESHOLD).map_err(|e| e.to_string())?;
            check(r.rmse_hz.abs() < 1e-9, format!("rmse {}", r.rmse_hz))?;
            check((r.corr - 1.0).abs() < 1e-9, format!("corr {}", r.corr))?;
            check(r.ffe_pct.abs() < 1e-9, format!("ffe {}", r.ffe_pct))
        },
    );
}

#[test]
fn pitch_tracker_sine_and_silence() {
    criterion(
        "pitch tracker: 220 Hz sine within 2 Hz, silence fully unvoiced",
        Duration::from_secs(5),
        || {
            let track = estimate_f0(&sine(220.0, 1.0, 16000), &FrameSpec::default(), 60.0, 400.0)
                .map_err(|e| e.to_string())?;
            let n = track.len();
            let interior = 2..n - 2;
            let voiced = interior.clone().filter(|&i| track.voiced[i]).count();
            check(
                voiced as f64 >= 0.95 * interior.len() as f64,
                format!("only {voiced}/{} interior frames voiced", interior.len()),
            )?;
            let mean_err = interior
                .clone()
                .filter(|&i| track.voiced[i])
                .map(|i| (track.f0_hz[i] - 220.0).abs())
                .sum::<f64>()
                / voiced as f64;
            check(mean_err < 2.0, format!("mean |f0 - 220| = {mean_err}"))?;

            let silence = Waveform::new(vec![0.0; 16000], 16000).unwrap();
            let track = estimate_f0(&silence, &FrameSpec::default(), 60.0, 400.0)
                .map_err(|e| e.to_string())?;
            check(
                track.voiced.iter().all(|&v| !v),
                "silence produced voiced frames",
            )
        },
    );
}

#[test]
fn kl_schedule_exactness() {
    criterion(
        "KL schedule: ramp endpoints/midpoint exact, gating every 200 steps",
        Duration::from_secs(1),
        || {
            let cfg = TrainConfig::default();
            check(kl_scale(25_000, &cfg) == 0.0, "scale at ramp start")?;
            check(kl_scale(150_000, &cfg) == 1.0, "scale at ramp end")?;
            check(kl_scale(87_500, &cfg) == 0.5, "scale at midpoint")?;

            // sample densely (step 7 is coprime to 200) plus every multiple
            for it in (0..=1_000_000u64).step_by(7) {
                check(
                    kl_active(it, &cfg) == (it % 200 == 0),
                    format!("gating wrong at {it}"),
                )?;
            }
            for k in (0..=1_000_000u64).step_by(200) {
                check(kl_active(k, &cfg), format!("multiple {k} not active"))?;
            }
            Ok(())
        },
    );
}

#[test]
fn kl_closed_form_values() {
    criterion(
        "KL closed form at (0,1), (1,1), (0,2)",
        Duration::from_secs(1),
        || {
            let post = |mu: f64, sigma: f64| GaussianPosterior {
                mu: vec![mu],
                log_sigma: vec![sigma.ln()],
            };
            check(
                kl_divergence(&post(0.0, 1.0)).abs() < 1e-12,
                "kl(0,1) != 0",
            )?;
            check(
                (kl_divergence(&post(1.0, 1.0)) - 0.5).abs() < 1e-9,
                "kl(1,1) != 0.5",
            )?;
            let expected = 1.5 - 2.0f64.ln();
            check(
                (kl_divergence(&post(0.0, 2.0)) - expected).abs() < 1e-9,
                "kl(0,2) != 1.5 - ln 2",
            )
        },
    );
}

#[test]
fn gradient_check_over_20_seeds() {
    criterion(
        "analytic vs central-difference gradients < 1e-4 over 20 seeds",
        Duration::from_secs(30),
        || {
            for seed in 0..20u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let params = EncoderParams::init(32, 8, &mut rng);
                let batch = synthetic_vectors(2, seed + 1000);
                let err = grad_check(&params, &batch, 1e-5, &mut rng);
                check(err < 1e-4, format!("seed {seed}: max rel error {err}"))?;
            }
            Ok(())
        },
    );
}

#[test]
fn desk_scale_vae_run() {
    criterion(
        "desk-scale training: 1000 vectors, 5000 iterations, MSE halves, bit-identical rerun",
        Duration::from_secs(60),
        || {
            let data = synthetic_vectors(1000, 206);
            let cfg = TrainConfig {
                iterations: 5000,
                learning_rate: 0.01,
                seed: 13,
                ..TrainConfig::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let initial = EncoderParams::init(cfg.hidden, cfg.latent, &mut rng);
            let mse0 = reconstruction_mse(&initial, &data);

            let (params, history) = train(&data, &cfg).map_err(|e| e.to_string())?;
            check(
                history
                    .iter()
                    .all(|r| r.recon.is_finite() && r.kl.is_finite()),
                "non-finite loss in history",
            )?;
            let mse1 = reconstruction_mse(&params, &data);
            check(
                mse1 <= 0.5 * mse0,
                format!("final mse {mse1} > 50% of initial {mse0}"),
            )?;

            let (params2, history2) = train(&data, &cfg).map_err(|e| e.to_string())?;
            check(params2 == params, "rerun parameters differ")?;
            check(history2 == history, "rerun history differs")
        },
    );
}

#[test]
fn speaker_normalization_invariance() {
    criterion(
        "affine speaker perturbation (f0*1.2+20, c0+const) normalizes away within 1e-3",
        Duration::from_secs(5),
        || {
            let utts_a = single_frame_state_corpus(16, 3, 1.0, 0.0, 0.0);
            let utts_b = single_frame_state_corpus(16, 3, 1.2, 20.0, 0.7);
            let refs_a: Vec<UtteranceFeatures> =
                utts_a.iter().map(|(p, c, a)| (p, c, a)).collect();
            let refs_b: Vec<UtteranceFeatures> =
                utts_b.iter().map(|(p, c, a)| (p, c, a)).collect();
            let stats_a = collect_speaker_stats(&refs_a).map_err(|e| e.to_string())?;
            let stats_b = collect_speaker_stats(&refs_b).map_err(|e| e.to_string())?;

            for ((pa, ca, aa), (pb, cb, ab)) in utts_a.iter().zip(&utts_b) {
                let za = normalize(
                    &aggregate_utterance(pa, ca, aa).map_err(|e| e.to_string())?,
                    &stats_a,
                );
                let zb = normalize(
                    &aggregate_utterance(pb, cb, ab).map_err(|e| e.to_string())?,
                    &stats_b,
                );
                for (va, vb) in za.iter().zip(&zb) {
                    for (dim, (x, y)) in
                        va.numeric().iter().zip(vb.numeric().iter()).enumerate()
                    {
                        check(
                            (x - y).abs() < 1e-3,
                            format!("dim {dim}: {x} vs {y}"),
                        )?;
                    }
                }
            }
            Ok(())
        },
    );
}

#[test]
fn textless_rules() {
    criterion(
        "pause insertion thresholds and neighbor-distance arithmetic",
        Duration::from_secs(1),
        || {
            let count_paus = |blank_frames: usize| -> usize {
                let mut labels = vec![0usize];
                labels.extend(std::iter::repeat_n(1, blank_frames));
                labels.push(0);
                let pg = labels_posteriorgram(&labels, 1, 10.0);
                insert_pauses(&greedy_emissions(&pg), &blank_runs(&pg), 10.0, 200.0)
                    .iter()
                    .filter(|t| t.is_pau)
                    .count()
            };
            check(count_paus(25) == 1, "250 ms blank run must yield one pau")?;
            check(count_paus(15) == 0, "150 ms blank run must yield none")?;

            let d = token_distances(&[5, 12, 20], 10.0, 30);
            check(
                d[1] == (0.07, 0.08),
                format!("middle token distances {:?}", d[1]),
            )
        },
    );
}

#[test]
fn wilcoxon_and_t_exactness() {
    criterion(
        "Wilcoxon exact vs 2^n enumeration (50 instances), Holm fixtures, t fixture",
        Duration::from_secs(10),
        || {
            fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
                let n = abs.len();
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| abs[a].partial_cmp(&abs[b]).unwrap());
                let mut ranks = vec![0u64; n];
                let mut i = 0;
                while i < n {
                    let mut j = i;
                    while j + 1 < n && abs[order[j + 1]] == abs[order[i]] {
                        j += 1;
                    }
                    for &idx in &order[i..=j] {
                        ranks[idx] = (i as u64 + 1) + (j as u64 + 1);
                    }
                    i = j + 1;
                }
                ranks
            }
            fn enumerate_p(ranks2: &[u64], w2_obs: u64) -> f64 {
                let n = ranks2.len();
                let total: u64 = ranks2.iter().sum();
                let dist = (2 * w2_obs).abs_diff(total);
                let mut extreme = 0u64;
                for mask in 0u32..(1u32 << n) {
                    let w2: u64 = (0..n)
                        .filter(|&i| mask & (1 << i) != 0)
                        .map(|i| ranks2[i])
                        .sum();
                    if (2 * w2).abs_diff(total) >= dist {
                        extreme += 1;
                    }
                }
                extreme as f64 / 2f64.powi(n as i32)
            }

            let mut rng = ChaCha8Rng::seed_from_u64(555);
            let mut tested = 0;
            while tested < 50 {
                let n = rng.random_range(5..=12usize);
                let x: Vec<f64> =
                    (0..n).map(|_| rng.random_range(0.0..100.0f64).round()).collect();
                let y: Vec<f64> = x
                    .iter()
                    .map(|v| {
                        let mut w = v + rng.random_range(-25.0..25.0f64).round();
                        if w == *v {
                            w += 1.0;
                        }
                        w.clamp(0.0, 100.0)
                    })
                    .collect();
                let diffs: Vec<f64> = x
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| a - b)
                    .filter(|d| *d != 0.0)
                    .collect();
                if diffs.len() < 5 {
                    continue;
                }
                tested += 1;
                let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
                let ranks2 = doubled_ranks(&abs);
                let w2: u64 = diffs
                    .iter()
                    .zip(&ranks2)
                    .filter(|(d, _)| **d > 0.0)
                    .map(|(_, &r)| r)
                    .sum();
                let oracle = enumerate_p(&ranks2, w2);
                let p = wilcoxon_signed_rank(&x, &y).map_err(|e| e.to_string())?;
                check(p == oracle, format!("instance {tested}: {p} != {oracle}"))?;
            }

            let d = holm_correction(&[0.01, 0.04], 0.05).map_err(|e| e.to_string())?;
            check(d[0].rejected && d[1].rejected, "holm {0.01, 0.04} both reject")?;
            let d = holm_correction(&[0.03, 0.04], 0.05).map_err(|e| e.to_string())?;
            check(
                !d[0].rejected && !d[1].rejected,
                "holm {0.03, 0.04} none reject",
            )?;

            let p = paired_t(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4]).map_err(|e| e.to_string())?;
            check((p - 0.0305).abs() < 1e-3, format!("t-test p {p}"))
        },
    );
}

#[test]
fn normalization_self_consistency() {
    criterion(
        "normalize(collect_speaker_stats(corpus)): per-dim |mean| < 1e-9, |var - 1| < 1e-6",
        Duration::from_secs(5),
        || {
            let utts = single_frame_state_corpus(24, 4, 1.0, 0.0, 0.0);
            let refs: Vec<UtteranceFeatures> =
                utts.iter().map(|(p, c, a)| (p, c, a)).collect();
            let stats = collect_speaker_stats(&refs).map_err(|e| e.to_string())?;

            let mut all_z: Vec<ProsodyVector> = Vec::new();
            for (p, c, a) in &utts {
                let raw = aggregate_utterance(p, c, a).map_err(|e| e.to_string())?;
                check(
                    raw.iter().all(|v| !v.f0_missing.iter().any(|&m| m)),
                    "unexpected fallback flag in fixture",
                )?;
                all_z.extend(normalize(&raw, &stats));
            }
            for dim in 0..7 {
                let values: Vec<f64> = all_z.iter().map(|v| v.numeric()[dim]).collect();
                let m = values.iter().sum::<f64>() / values.len() as f64;
                let var =
                    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
                check(m.abs() < 1e-9, format!("dim {dim} mean {m}"))?;
                check((var - 1.0).abs() < 1e-6, format!("dim {dim} var {var}"))?;
            }
            Ok(())
        },
    );
}

#[test]
fn format_round_trips_are_byte_stable() {
    criterion(
        "alignment TSV, prosody CSV, posteriorgram CSV, params JSON byte-stable",
        Duration::from_secs(5),
        || {
            // alignment: canonical fixture reproduces byte-for-byte
            let fixture = "0\t0.3\tAH\n0.3\t0.55\tT\n\
                           0.55\t0.61\tpau\t1\n0.61\t0.72\tpau\t2\n0.72\t0.9\tpau\t3\n";
            let parsed = parse_alignment(fixture).map_err(|e| e.to_string())?;
            let once = format_alignment(&parsed);
            check(once == fixture, "alignment round trip not byte-stable")?;
            let reparsed = parse_alignment(&once).map_err(|e| e.to_string())?;
            check(reparsed == parsed, "alignment reparse differs")?;

            // prosody CSV with awkward floats
            let vectors = vec![ProsodyVector {
                phone: "AH".into(),
                f0_state: [1.0 / 3.0, -0.1, 2e-17],
                mgc0_state: [0.1 + 0.2, -1.5, 0.0],
                duration: 0.123_456_789_012_345,
                f0_missing: [false, true, false],
                dur_global: true,
            }];
            let csv = format_prosody_csv(&vectors);
            let back = parse_prosody_csv(&csv).map_err(|e| e.to_string())?;
            check(back == vectors, "prosody CSV reparse differs")?;
            check(
                format_prosody_csv(&back) == csv,
                "prosody CSV not byte-stable",
            )?;

            // posteriorgram CSV
            let pg = labels_posteriorgram(&[2, 0, 1, 1, 2, 0], 2, 10.0);
            let text = format_posteriorgram_csv(&pg);
            let back = parse_posteriorgram_csv(&text, 10.0).map_err(|e| e.to_string())?;
            check(back == pg, "posteriorgram reparse differs")?;
            check(
                format_posteriorgram_csv(&back) == text,
                "posteriorgram CSV not byte-stable",
            )?;

            // encoder params JSON
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let params = EncoderParams::init(16, 4, &mut rng);
            let json = params.to_json();
            let back = EncoderParams::from_json(&json).map_err(|e| e.to_string())?;
            check(back == params, "params reparse differs")?;
            check(back.to_json() == json, "params JSON not byte-stable")
        },
    );
}
