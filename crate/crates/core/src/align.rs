//! Forced-alignment label files: parsing, tri-state segmentation, and the
//! mapping from time intervals to frame indices.
//!
//! Label files are tab-separated, one row per phone (`start end phone`) or one
//! row per sub-state (`start end phone state`, states 1..3). Phone-level rows
//! are split into three equal states; state-level rows map directly. Lines
//! starting with `#` are comments. The reserved symbol for silence is `pau`.

use std::fmt::Write as _;
use std::ops::Range;

use thiserror::Error;

/// Reserved phone symbol for silence/pause segments.
pub const PAUSE_SYMBOL: &str = "pau";

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("line {line}: malformed label row: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: segment times not increasing ({start} >= {end})")]
    NonMonotoneTimes { line: usize, start: f64, end: f64 },
    #[error("line {line}: segment overlaps previous segment")]
    OverlappingSegments { line: usize },
    #[error("line {line}: incomplete or inconsistent state triple: {reason}")]
    IncompleteStateTriple { line: usize, reason: String },
    #[error("empty segment: start {0} >= end {1}")]
    EmptySegment(f64, f64),
}

/// A phone occurrence with exactly three contiguous sub-state intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct PhoneSegment {
    pub phone: String,
    pub start_s: f64,
    pub end_s: f64,
    pub states: [(f64, f64); 3],
}

impl PhoneSegment {
    /// Build a segment with equal-length states.
    pub fn from_boundaries(phone: &str, start_s: f64, end_s: f64) -> Result<Self, AlignError> {
        let states = tri_partition(start_s, end_s)?;
        Ok(Self {
            phone: phone.to_string(),
            start_s,
            end_s,
            states,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    fn states_are_equal_split(&self) -> bool {
        match tri_partition(self.start_s, self.end_s) {
            Ok(expected) => self.states == expected,
            Err(_) => false,
        }
    }
}

/// Time-ordered, non-overlapping phone segments for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct PhoneAlignment {
    pub segments: Vec<PhoneSegment>,
    pub total_s: f64,
}

impl PhoneAlignment {
    pub fn new(segments: Vec<PhoneSegment>) -> Self {
        let total_s = segments.last().map(|s| s.end_s).unwrap_or(0.0);
        Self { segments, total_s }
    }
}

/// Split [start, end) into three contiguous equal-duration intervals; the last
/// interval absorbs rounding and always ends exactly at `end`.
pub fn tri_partition(start_s: f64, end_s: f64) -> Result<[(f64, f64); 3], AlignError> {
    if start_s >= end_s {
        return Err(AlignError::EmptySegment(start_s, end_s));
    }
    let third = (end_s - start_s) / 3.0;
    let b1 = start_s + third;
    let b2 = start_s + 2.0 * third;
    Ok([(start_s, b1), (b1, b2), (b2, end_s)])
}

/// Frames whose center time i*hop + hop/2 lies in [start, end), clipped to
/// [0, n_frames). A center exactly on a boundary belongs to the later interval.
pub fn frames_in_interval(
    interval: (f64, f64),
    hop_ms: f64,
    n_frames: usize,
) -> Range<usize> {
    let center_s = |i: usize| ((i as f64 + 0.5) * hop_ms) / 1000.0;
    // binary search for the first frame whose center reaches the bound;
    // centers are strictly increasing in i
    let first_at_or_after = |bound: f64| {
        let (mut lo, mut hi) = (0usize, n_frames);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if center_s(mid) < bound {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    };
    first_at_or_after(interval.0)..first_at_or_after(interval.1)
}

struct PendingTriple {
    phone: String,
    states: Vec<(f64, f64)>,
    first_line: usize,
}

/// Parse a label file into a [`PhoneAlignment`].
pub fn parse_alignment(text: &str) -> Result<PhoneAlignment, AlignError> {
    let mut segments: Vec<PhoneSegment> = Vec::new();
    let mut pending: Option<PendingTriple> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }

        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(AlignError::MalformedLine {
                line: line_no,
                reason: format!("expected 3 or 4 tab-separated fields, got {}", fields.len()),
            });
        }
        let start: f64 = fields[0].parse().map_err(|_| AlignError::MalformedLine {
            line: line_no,
            reason: format!("bad start time {:?}", fields[0]),
        })?;
        let end: f64 = fields[1].parse().map_err(|_| AlignError::MalformedLine {
            line: line_no,
            reason: format!("bad end time {:?}", fields[1]),
        })?;
        let phone = fields[2];
        if phone.is_empty() {
            return Err(AlignError::MalformedLine {
                line: line_no,
                reason: "empty phone symbol".into(),
            });
        }
        if start >= end {
            return Err(AlignError::NonMonotoneTimes {
                line: line_no,
                start,
                end,
            });
        }

        if fields.len() == 3 {
            if pending.is_some() {
                return Err(AlignError::IncompleteStateTriple {
                    line: line_no,
                    reason: "phone-level row interrupts a state triple".into(),
                });
            }
            push_segment(
                &mut segments,
                PhoneSegment::from_boundaries(phone, start, end)?,
                line_no,
            )?;
            continue;
        }

        let state_idx: usize = fields[3].parse().map_err(|_| AlignError::MalformedLine {
            line: line_no,
            reason: format!("bad state index {:?}", fields[3]),
        })?;
        if !(1..=3).contains(&state_idx) {
            return Err(AlignError::MalformedLine {
                line: line_no,
                reason: format!("state index {state_idx} outside 1..3"),
            });
        }

        match (&mut pending, state_idx) {
            (None, 1) => {
                pending = Some(PendingTriple {
                    phone: phone.to_string(),
                    states: vec![(start, end)],
                    first_line: line_no,
                });
            }
            (None, k) => {
                return Err(AlignError::IncompleteStateTriple {
                    line: line_no,
                    reason: format!("state {k} row without preceding state 1"),
                });
            }
            (Some(t), k) => {
                if k != t.states.len() + 1 {
                    return Err(AlignError::IncompleteStateTriple {
                        line: line_no,
                        reason: format!("expected state {}, got {k}", t.states.len() + 1),
                    });
                }
                if phone != t.phone {
                    return Err(AlignError::IncompleteStateTriple {
                        line: line_no,
                        reason: format!("phone changed from {:?} to {phone:?} mid-triple", t.phone),
                    });
                }
                let prev_end = t.states.last().unwrap().1;
                if start != prev_end {
                    return Err(AlignError::IncompleteStateTriple {
                        line: line_no,
                        reason: format!("state {k} starts at {start}, previous ended at {prev_end}"),
                    });
                }
                t.states.push((start, end));
                if k == 3 {
                    let t = pending.take().unwrap();
                    let seg = PhoneSegment {
                        phone: t.phone,
                        start_s: t.states[0].0,
                        end_s: t.states[2].1,
                        states: [t.states[0], t.states[1], t.states[2]],
                    };
                    push_segment(&mut segments, seg, t.first_line)?;
                }
            }
        }
    }

    if let Some(t) = pending {
        return Err(AlignError::IncompleteStateTriple {
            line: t.first_line,
            reason: format!("phone {:?} has only {} state rows", t.phone, t.states.len()),
        });
    }

    Ok(PhoneAlignment::new(segments))
}

fn push_segment(
    segments: &mut Vec<PhoneSegment>,
    seg: PhoneSegment,
    line: usize,
) -> Result<(), AlignError> {
    if let Some(prev) = segments.last() {
        if seg.start_s < prev.end_s {
            return Err(AlignError::OverlappingSegments { line });
        }
    }
    segments.push(seg);
    Ok(())
}

/// Canonical decimal for label files: up to 6 fractional digits, trailing
/// zeros trimmed.
pub fn format_seconds(v: f64) -> String {
    let mut s = format!("{v:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

/// Serialize an alignment in canonical form: phone-level rows where the states
/// are an exact equal split, explicit state rows otherwise.
pub fn format_alignment(align: &PhoneAlignment) -> String {
    let mut out = String::new();
    for seg in &align.segments {
        if seg.states_are_equal_split() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                format_seconds(seg.start_s),
                format_seconds(seg.end_s),
                seg.phone
            );
        } else {
            for (k, (s, e)) in seg.states.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}",
                    format_seconds(*s),
                    format_seconds(*e),
                    seg.phone,
                    k + 1
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn phone_rows_get_equal_thirds() {
        let align = parse_alignment("0.00\t0.30\tAH\n0.30\t0.55\tT\n").unwrap();
        assert_eq!(align.segments.len(), 2);
        let ah = &align.segments[0];
        assert_eq!(ah.phone, "AH");
        let expected = tri_partition(0.0, 0.3).unwrap();
        assert_eq!(ah.states, expected);
        let third = 0.3 / 3.0;
        assert!((ah.states[0].1 - third).abs() < 1e-15);
        assert_eq!(ah.states[2].1, 0.3);
        assert_eq!(align.total_s, 0.55);
    }

    #[test]
    fn state_rows_map_directly() {
        let text = "0.0\t0.1\tAH\t1\n0.1\t0.15\tAH\t2\n0.15\t0.3\tAH\t3\n";
        let align = parse_alignment(text).unwrap();
        assert_eq!(align.segments.len(), 1);
        let seg = &align.segments[0];
        assert_eq!(seg.states, [(0.0, 0.1), (0.1, 0.15), (0.15, 0.3)]);
        assert_eq!(seg.start_s, 0.0);
        assert_eq!(seg.end_s, 0.3);
    }

    #[test]
    fn overlapping_segments_detected() {
        let err = parse_alignment("0.0\t0.4\tAH\n0.3\t0.5\tT\n").unwrap_err();
        assert!(matches!(err, AlignError::OverlappingSegments { line: 2 }));
    }

    #[test]
    fn non_monotone_row_detected() {
        let err = parse_alignment("0.5\t0.4\tAH\n").unwrap_err();
        assert!(matches!(err, AlignError::NonMonotoneTimes { line: 1, .. }));
    }

    #[test]
    fn malformed_line_detected() {
        assert!(matches!(
            parse_alignment("0.0\t0.3\n").unwrap_err(),
            AlignError::MalformedLine { line: 1, .. }
        ));
        assert!(matches!(
            parse_alignment("0.0\tx\tAH\n").unwrap_err(),
            AlignError::MalformedLine { line: 1, .. }
        ));
    }

    #[test]
    fn incomplete_triple_detected() {
        let text = "0.0\t0.1\tAH\t1\n0.1\t0.2\tAH\t2\n";
        assert!(matches!(
            parse_alignment(text).unwrap_err(),
            AlignError::IncompleteStateTriple { .. }
        ));
        let text = "0.0\t0.1\tAH\t1\n0.1\t0.2\tIY\t2\n0.2\t0.3\tIY\t3\n";
        assert!(matches!(
            parse_alignment(text).unwrap_err(),
            AlignError::IncompleteStateTriple { .. }
        ));
        // state 2 not contiguous with state 1
        let text = "0.0\t0.1\tAH\t1\n0.12\t0.2\tAH\t2\n0.2\t0.3\tAH\t3\n";
        assert!(matches!(
            parse_alignment(text).unwrap_err(),
            AlignError::IncompleteStateTriple { .. }
        ));
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let align = parse_alignment("# header\n\n0.0\t0.2\tpau\n").unwrap();
        assert_eq!(align.segments.len(), 1);
        assert_eq!(align.segments[0].phone, PAUSE_SYMBOL);
    }

    #[test]
    fn tri_partition_examples() {
        let parts = tri_partition(0.0, 0.3).unwrap();
        assert!((parts[0].1 - 0.1).abs() < 1e-15);
        assert!((parts[1].1 - 0.2).abs() < 1e-15);
        assert_eq!(parts[2].1, 0.3);

        let parts = tri_partition(0.0, 0.1).unwrap();
        assert!((parts[0].1 - 0.1 / 3.0).abs() < 1e-15);
        assert_eq!(parts[2].1, 0.1);

        assert!(matches!(
            tri_partition(1.0, 1.0),
            Err(AlignError::EmptySegment(_, _))
        ));
    }

    #[test]
    fn frames_in_interval_examples() {
        assert_eq!(frames_in_interval((0.0, 0.1), 10.0, 100), 0..10);
        // interval shorter than a hop containing no center
        assert!(frames_in_interval((0.051, 0.054), 10.0, 100).is_empty());
        // whole track
        assert_eq!(frames_in_interval((0.0, 1.0), 10.0, 100), 0..100);
        // tie at a center goes to the later interval
        assert_eq!(frames_in_interval((0.005, 0.015), 10.0, 100), 0..1);
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let fixtures = [
            "0\t0.3\tAH\n0.3\t0.55\tT\n",
            "0\t0.1\tAH\t1\n0.1\t0.15\tAH\t2\n0.15\t0.3\tAH\t3\n0.3\t0.42\tpau\n",
        ];
        for text in fixtures {
            let parsed = parse_alignment(text).unwrap();
            let once = format_alignment(&parsed);
            assert_eq!(once, *text);
            let reparsed = parse_alignment(&once).unwrap();
            assert_eq!(reparsed, parsed);
            assert_eq!(format_alignment(&reparsed), once);
        }
    }

    proptest! {
        #[test]
        fn states_partition_frames_without_gaps(
            durations in prop::collection::vec(1u32..80, 1..12),
            hop_times_10 in 5u32..40,
        ) {
            // build an alignment of contiguous segments with ms-resolution times
            let hop_ms = hop_times_10 as f64 / 10.0 * 5.0;
            let mut t = 0.0f64;
            let mut segments = Vec::new();
            for (i, d) in durations.iter().enumerate() {
                let end = t + *d as f64 * 0.01;
                segments.push(
                    PhoneSegment::from_boundaries(&format!("P{i}"), t, end).unwrap(),
                );
                t = end;
            }
            let align = PhoneAlignment::new(segments);
            let n_frames = (align.total_s * 1000.0 / hop_ms).ceil() as usize + 2;

            let mut covered = vec![0usize; n_frames];
            for seg in &align.segments {
                for state in &seg.states {
                    for f in frames_in_interval(*state, hop_ms, n_frames) {
                        covered[f] += 1;
                    }
                }
            }
            // every frame whose center lies inside the alignment is covered once
            let whole = frames_in_interval((0.0, align.total_s), hop_ms, n_frames);
            for (f, &c) in covered.iter().enumerate() {
                if whole.contains(&f) {
                    prop_assert_eq!(c, 1, "frame {} covered {} times", f, c);
                } else {
                    prop_assert_eq!(c, 0, "frame {} outside alignment covered", f);
                }
            }
        }

        #[test]
        fn tri_partition_is_contiguous_and_exact(
            start_ms in 0u32..100_000,
            dur_ms in 1u32..60_000,
        ) {
            let start = start_ms as f64 / 1000.0;
            let end = start + dur_ms as f64 / 1000.0;
            let parts = tri_partition(start, end).unwrap();
            prop_assert_eq!(parts[0].0, start);
            prop_assert_eq!(parts[2].1, end);
            prop_assert_eq!(parts[0].1, parts[1].0);
            prop_assert_eq!(parts[1].1, parts[2].0);
            for (s, e) in parts {
                prop_assert!(s < e);
            }
        }

        #[test]
        fn parse_format_fixpoint(
            durations in prop::collection::vec(1u32..500, 1..10),
            use_states in prop::collection::vec(any::<bool>(), 10),
        ) {
            let mut t = 0.0f64;
            let mut text = String::new();
            for (i, d) in durations.iter().enumerate() {
                let end = t + *d as f64 / 1000.0;
                if use_states[i % use_states.len()] {
                    // unequal explicit states at millisecond resolution
                    let third = (*d / 3).max(1);
                    let m1 = t + third as f64 / 1000.0;
                    let m2 = t + (2 * third).min(*d - 1).max(third) as f64 / 1000.0;
                    if m1 < m2 && m2 < end {
                        text.push_str(&format!(
                            "{}\t{}\tP{i}\t1\n{}\t{}\tP{i}\t2\n{}\t{}\tP{i}\t3\n",
                            format_seconds(t), format_seconds(m1),
                            format_seconds(m1), format_seconds(m2),
                            format_seconds(m2), format_seconds(end),
                        ));
                    } else {
                        text.push_str(&format!(
                            "{}\t{}\tP{i}\n",
                            format_seconds(t), format_seconds(end)
                        ));
                    }
                } else {
                    text.push_str(&format!(
                        "{}\t{}\tP{i}\n",
                        format_seconds(t), format_seconds(end)
                    ));
                }
                t = end;
            }
            let parsed = parse_alignment(&text).unwrap();
            let once = format_alignment(&parsed);
            let twice = format_alignment(&parse_alignment(&once).unwrap());
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(parse_alignment(&once).unwrap(), parsed);
        }
    }
}
