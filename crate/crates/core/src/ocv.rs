//! Piecewise-linear SOC-OCV map.
//!
//! The open-circuit voltage of a Li-ion cell maps bijectively onto its state
//! of charge once the cell has rested. This module models that relationship
//! as eight linear segments `soc = a * ocv - b`, each valid over a voltage
//! range, with the default coefficients characterized at 25 °C. Cold cells
//! distort the low-voltage end of the curve, so lookups mask out the first
//! one or two segments below 15 °C and 5 °C respectively.
//!
//! Tables for other cells can be loaded from a plain-text file, one segment
//! per line: `v_lo v_hi a b`, sorted ascending, `#` comments allowed.

use thiserror::Error;

/// One linear piece of the SOC-OCV curve: `soc = a * ocv - b` for
/// `ocv` in `[v_lo, v_hi)`.
///
/// Units: `v_lo`/`v_hi` in volts, `a` in percent per volt, `b` in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcvSegment {
    pub v_lo: f64,
    pub v_hi: f64,
    pub a: f64,
    pub b: f64,
}

impl OcvSegment {
    /// Evaluates the segment line at `ocv`, without clamping.
    pub fn soc_at(&self, ocv: f64) -> f64 {
        self.a * ocv - self.b
    }
}

/// Default 25 °C table: eight segments covering [3.3, 4.132] V.
const DEFAULT_SEGMENTS_25C: [OcvSegment; 8] = [
    OcvSegment { v_lo: 3.300, v_hi: 3.452, a: 26.55, b: 88.6 },
    OcvSegment { v_lo: 3.452, v_hi: 3.508, a: 125.0, b: 431.1 },
    OcvSegment { v_lo: 3.508, v_hi: 3.595, a: 149.0, b: 516.1 },
    OcvSegment { v_lo: 3.595, v_hi: 3.676, a: 344.0, b: 1225.0 },
    OcvSegment { v_lo: 3.676, v_hi: 3.739, a: 229.5, b: 800.9 },
    OcvSegment { v_lo: 3.739, v_hi: 3.967, a: 111.9, b: 359.9 },
    OcvSegment { v_lo: 3.967, v_hi: 4.039, a: 104.8, b: 332.0 },
    OcvSegment { v_lo: 4.039, v_hi: 4.132, a: 90.61, b: 274.7 },
];

/// Lookup failed because the voltage lies outside every segment allowed at
/// the given temperature. The initial SOC cannot be trusted; the caller
/// should wait for a valid rest voltage or fall back to a conventional
/// starting point.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("open-circuit voltage {ocv} V is outside the SOC-OCV table for {temp} °C")]
pub struct OcvOutOfRange {
    pub ocv: f64,
    pub temp: f64,
}

/// Errors from constructing or parsing an [`OcvTable`].
#[derive(Debug, Error)]
pub enum TableError {
    #[error("table has no segments")]
    Empty,
    #[error("segment {index}: v_lo {v_lo} must be below v_hi {v_hi}")]
    EmptyRange { index: usize, v_lo: f64, v_hi: f64 },
    #[error("segment {index} starts at {v_lo} V, before the previous segment")]
    Unsorted { index: usize, v_lo: f64 },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("table rejected: {0}")]
    Invalid(TableDiagnostic),
}

/// Which segments a lookup may use at a given temperature. Index is 1-based;
/// segments below it are treated as nonexistent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentMask {
    pub first_allowed_index: usize,
}

/// Temperature masking of the low-voltage segments.
///
/// At 15 °C and above the whole table applies. Between 5 °C and 15 °C the
/// first segment is dropped; below 5 °C the first two are. Band edges take
/// the milder (higher-temperature) mask.
pub fn allowed_segments(temp: f64) -> SegmentMask {
    let first_allowed_index = if temp >= 15.0 {
        1
    } else if temp >= 5.0 {
        2
    } else {
        3
    };
    SegmentMask { first_allowed_index }
}

/// Findings from [`OcvTable::validate`]. Only the breakpoint value jumps are
/// expected on the default table; the other two indicate a malformed table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TableDiagnostic {
    /// Adjacent segments disagree about the SOC at their shared breakpoint.
    /// `jump_pct` is the higher segment's value minus the lower segment's.
    Discontinuity { boundary_v: f64, jump_pct: f64 },
    /// `v_hi` of a segment does not meet `v_lo` of the next one.
    ContiguityGap { index: usize, v_hi: f64, next_v_lo: f64 },
    /// Segment slope is not strictly positive.
    NonPositiveSlope { index: usize, a: f64 },
}

impl TableDiagnostic {
    /// Discontinuities are informational (the published coefficients have
    /// them); gaps and bad slopes make a table unusable.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, TableDiagnostic::Discontinuity { .. })
    }
}

impl std::fmt::Display for TableDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TableDiagnostic::Discontinuity { boundary_v, jump_pct } => write!(
                f,
                "discontinuity at {boundary_v} V: SOC jumps by {jump_pct:+.4} %"
            ),
            TableDiagnostic::ContiguityGap { index, v_hi, next_v_lo } => write!(
                f,
                "segment {index} ends at {v_hi} V but segment {} starts at {next_v_lo} V",
                index + 1
            ),
            TableDiagnostic::NonPositiveSlope { index, a } => {
                write!(f, "segment {index} has non-positive slope a = {a}")
            }
        }
    }
}

/// Ordered piecewise-linear SOC-OCV table.
#[derive(Debug, Clone, PartialEq)]
pub struct OcvTable {
    segments: Vec<OcvSegment>,
    reference_temperature: f64,
}

/// Breakpoint jumps below this are floating-point noise, not discontinuities.
const JUMP_EPSILON_PCT: f64 = 1e-6;

/// Voltage mismatch below this still counts as contiguous.
const CONTIGUITY_EPSILON_V: f64 = 1e-9;

impl Default for OcvTable {
    fn default() -> Self {
        Self::default_25c()
    }
}

impl OcvTable {
    /// The built-in eight-segment table characterized at 25 °C.
    pub fn default_25c() -> Self {
        OcvTable {
            segments: DEFAULT_SEGMENTS_25C.to_vec(),
            reference_temperature: 25.0,
        }
    }

    /// Builds a table from segments sorted ascending by `v_lo`.
    ///
    /// Only ordering and non-empty ranges are enforced here, so that
    /// [`validate`](Self::validate) can still diagnose tables with slope or
    /// contiguity defects. Use [`load_str`](Self::load_str) when a defective
    /// table must be rejected outright.
    // Negated comparison so NaN endpoints are rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(segments: Vec<OcvSegment>, reference_temperature: f64) -> Result<Self, TableError> {
        if segments.is_empty() {
            return Err(TableError::Empty);
        }
        for (k, seg) in segments.iter().enumerate() {
            if !(seg.v_lo < seg.v_hi) {
                return Err(TableError::EmptyRange {
                    index: k + 1,
                    v_lo: seg.v_lo,
                    v_hi: seg.v_hi,
                });
            }
            if k > 0 && seg.v_lo < segments[k - 1].v_lo {
                return Err(TableError::Unsorted {
                    index: k + 1,
                    v_lo: seg.v_lo,
                });
            }
        }
        Ok(OcvTable {
            segments,
            reference_temperature,
        })
    }

    /// Parses the text table format without rejecting fatal diagnostics.
    /// Intended for the `validate-table` workflow.
    pub fn parse_str(text: &str) -> Result<Self, TableError> {
        let mut segments = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(TableError::Parse {
                    line: n + 1,
                    reason: format!("expected 4 fields `v_lo v_hi a b`, found {}", fields.len()),
                });
            }
            let mut vals = [0.0f64; 4];
            for (slot, field) in vals.iter_mut().zip(&fields) {
                *slot = field.parse().map_err(|e| TableError::Parse {
                    line: n + 1,
                    reason: format!("bad number {field:?}: {e}"),
                })?;
            }
            segments.push(OcvSegment {
                v_lo: vals[0],
                v_hi: vals[1],
                a: vals[2],
                b: vals[3],
            });
        }
        Self::new(segments, 25.0)
    }

    /// Loads a table from its text format, rejecting any table with fatal
    /// diagnostics (gaps, non-positive slopes). Breakpoint discontinuities
    /// are allowed; the default table has them.
    pub fn load_str(text: &str) -> Result<Self, TableError> {
        let table = Self::parse_str(text)?;
        if let Some(fatal) = table.validate().into_iter().find(|d| d.is_fatal()) {
            return Err(TableError::Invalid(fatal));
        }
        Ok(table)
    }

    pub fn segments(&self) -> &[OcvSegment] {
        &self.segments
    }

    pub fn reference_temperature(&self) -> f64 {
        self.reference_temperature
    }

    /// Lowest voltage covered by the table.
    pub fn v_min(&self) -> f64 {
        self.segments[0].v_lo
    }

    /// Highest voltage covered by the table.
    pub fn v_max(&self) -> f64 {
        self.segments[self.segments.len() - 1].v_hi
    }

    /// SOC from a rested terminal voltage.
    ///
    /// Selects the segment whose `[v_lo, v_hi)` interval contains `ocv` (the
    /// final segment is closed on the right so the table maximum resolves),
    /// evaluates its line and clamps the result to [0, 100]. Segments masked
    /// out at `temp` are treated as nonexistent, so a cold cell at a low
    /// voltage reports [`OcvOutOfRange`] rather than an untrustworthy value.
    pub fn soc_from_ocv(&self, ocv: f64, temp: f64) -> Result<f64, OcvOutOfRange> {
        let first = allowed_segments(temp).first_allowed_index - 1;
        let last = self.segments.len() - 1;
        for (k, seg) in self.segments.iter().enumerate().skip(first) {
            let contains = ocv >= seg.v_lo && (ocv < seg.v_hi || (k == last && ocv <= seg.v_hi));
            if contains {
                return Ok(seg.soc_at(ocv).clamp(0.0, 100.0));
            }
        }
        Err(OcvOutOfRange { ocv, temp })
    }

    /// Inverse map: the rest voltage a cell at `soc` percent would show.
    ///
    /// SOC space is partitioned by each segment's own starting value
    /// `a * v_lo - b`; the segment with the largest start at or below `soc`
    /// inverts the line. `soc` is clamped to [0, 100] first and the result is
    /// clamped into the table's voltage span, which makes the map total even
    /// though the printed coefficients leave small gaps and overlaps between
    /// segment images. Round trips through [`soc_from_ocv`](Self::soc_from_ocv)
    /// are exact only inside a segment's own image.
    pub fn ocv_from_soc(&self, soc: f64) -> f64 {
        let s = soc.clamp(0.0, 100.0);
        let mut chosen = &self.segments[0];
        for seg in &self.segments {
            if s >= seg.soc_at(seg.v_lo) {
                chosen = seg;
            }
        }
        let v = (s + chosen.b) / chosen.a;
        v.clamp(self.v_min(), self.v_max())
    }

    /// Reports slope, contiguity and breakpoint-continuity defects.
    /// Diagnostics, not failures: the default table legitimately reports the
    /// value jumps baked into its published coefficients.
    pub fn validate(&self) -> Vec<TableDiagnostic> {
        let mut out = Vec::new();
        for (k, seg) in self.segments.iter().enumerate() {
            if seg.a <= 0.0 {
                out.push(TableDiagnostic::NonPositiveSlope {
                    index: k + 1,
                    a: seg.a,
                });
            }
        }
        for (k, pair) in self.segments.windows(2).enumerate() {
            let (lo, hi) = (&pair[0], &pair[1]);
            if (lo.v_hi - hi.v_lo).abs() > CONTIGUITY_EPSILON_V {
                out.push(TableDiagnostic::ContiguityGap {
                    index: k + 1,
                    v_hi: lo.v_hi,
                    next_v_lo: hi.v_lo,
                });
            } else {
                let jump = hi.soc_at(hi.v_lo) - lo.soc_at(hi.v_lo);
                if jump.abs() > JUMP_EPSILON_PCT {
                    out.push(TableDiagnostic::Discontinuity {
                        boundary_v: hi.v_lo,
                        jump_pct: jump,
                    });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table() -> OcvTable {
        OcvTable::default_25c()
    }

    #[test]
    fn soc_lookup_examples() {
        let t = table();
        assert_relative_eq!(t.soc_from_ocv(3.60, 25.0).unwrap(), 13.40, epsilon = 1e-9);
        assert_relative_eq!(t.soc_from_ocv(4.132, 25.0).unwrap(), 99.70052, epsilon = 1e-9);
        assert_relative_eq!(t.soc_from_ocv(3.40, 25.0).unwrap(), 1.67, epsilon = 1e-9);
        assert_relative_eq!(t.soc_from_ocv(3.47, 10.0).unwrap(), 2.65, epsilon = 1e-9);
    }

    #[test]
    fn masking_rejects_low_segments() {
        let t = table();
        // Segment 1 is masked from 5 °C up to 15 °C, segments 1-2 below 5 °C.
        assert_eq!(t.soc_from_ocv(3.40, 10.0), Err(OcvOutOfRange { ocv: 3.40, temp: 10.0 }));
        assert_eq!(t.soc_from_ocv(3.40, 0.0), Err(OcvOutOfRange { ocv: 3.40, temp: 0.0 }));
        assert_eq!(t.soc_from_ocv(3.47, 0.0), Err(OcvOutOfRange { ocv: 3.47, temp: 0.0 }));
        assert!(t.soc_from_ocv(3.47, 10.0).is_ok());
        assert!(t.soc_from_ocv(3.51, 0.0).is_ok());
    }

    #[test]
    fn allowed_segments_bands() {
        assert_eq!(allowed_segments(25.0).first_allowed_index, 1);
        assert_eq!(allowed_segments(15.0).first_allowed_index, 1);
        assert_eq!(allowed_segments(10.0).first_allowed_index, 2);
        assert_eq!(allowed_segments(5.0).first_allowed_index, 2);
        assert_eq!(allowed_segments(4.9).first_allowed_index, 3);
        assert_eq!(allowed_segments(0.0).first_allowed_index, 3);
        assert_eq!(allowed_segments(-30.0).first_allowed_index, 3);
    }

    #[test]
    fn breakpoints_belong_to_the_higher_segment() {
        let t = table();
        // 3.452 V evaluates on segment 2, not segment 1.
        assert_relative_eq!(t.soc_from_ocv(3.452, 25.0).unwrap(), 0.4, epsilon = 1e-9);
        // Table floor clamps the negative segment-1 value to zero.
        assert_relative_eq!(t.soc_from_ocv(3.300, 25.0).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn out_of_table_voltages_are_rejected() {
        let t = table();
        assert!(t.soc_from_ocv(3.299, 25.0).is_err());
        assert!(t.soc_from_ocv(4.1321, 25.0).is_err());
        assert!(t.soc_from_ocv(f64::NAN, 25.0).is_err());
    }

    #[test]
    fn inverse_examples() {
        let t = table();
        assert_relative_eq!(t.ocv_from_soc(13.40), 3.60, epsilon = 1e-9);
        // (0 + 88.6) / 26.55; within the table span, so no clamping applies.
        assert_relative_eq!(t.ocv_from_soc(0.0), 3.337099811676083, epsilon = 1e-12);
        assert_relative_eq!(t.ocv_from_soc(99.70), 4.132, epsilon = 1e-4);
        assert_relative_eq!(t.ocv_from_soc(99.70052), 4.132, epsilon = 1e-9);
    }

    #[test]
    fn inverse_is_total_and_clamped() {
        let t = table();
        // Inputs outside [0, 100] clamp to the ends.
        assert_eq!(t.ocv_from_soc(-5.0), t.ocv_from_soc(0.0));
        assert_eq!(t.ocv_from_soc(150.0), t.ocv_from_soc(100.0));
        // 100 % inverts past the table top; the output clamps to 4.132 V.
        assert_relative_eq!(t.ocv_from_soc(100.0), 4.132, epsilon = 1e-12);
        // No SOC in [0, 100] escapes the voltage span.
        for k in 0..=1000 {
            let v = t.ocv_from_soc(k as f64 / 10.0);
            assert!((t.v_min()..=t.v_max()).contains(&v), "soc {} -> {}", k as f64 / 10.0, v);
        }
    }

    #[test]
    fn round_trip_inside_segment_images() {
        let t = table();
        // Valid round-trip region per segment: intersection of the segment's
        // SOC image with the partition cell it owns.
        let starts: Vec<f64> = t.segments().iter().map(|s| s.soc_at(s.v_lo)).collect();
        let ends: Vec<f64> = t.segments().iter().map(|s| s.soc_at(s.v_hi)).collect();
        let mut checked = 0;
        for k in 0..t.segments().len() {
            let cell_hi = if k + 1 < starts.len() { starts[k + 1] } else { 100.0 };
            let lo = starts[k].max(0.0);
            let hi = ends[k].min(cell_hi).min(100.0);
            assert!(hi > lo, "segment {k} has an empty round-trip region");
            // 125 interior points per segment, 1000 total.
            for j in 0..125 {
                let s = lo + (hi - lo) * (j as f64 + 0.5) / 125.0;
                let rt = t.soc_from_ocv(t.ocv_from_soc(s), 25.0).unwrap();
                assert!((rt - s).abs() < 0.01, "seg {k}: {s} -> {rt}");
                checked += 1;
            }
        }
        assert_eq!(checked, 1000);
    }

    #[test]
    fn default_table_reports_exactly_the_breakpoint_jumps() {
        let diags = table().validate();
        let expected = [
            (3.452, -2.6506),
            (3.508, -0.808),
            (3.595, -7.875),
            (3.676, 3.198),
            (3.739, 1.2936),
            (3.967, -0.2657),
            (4.039, -0.01341),
        ];
        assert_eq!(diags.len(), expected.len());
        for (diag, (v, jump)) in diags.iter().zip(expected) {
            match diag {
                TableDiagnostic::Discontinuity { boundary_v, jump_pct } => {
                    assert_relative_eq!(*boundary_v, v, epsilon = 1e-12);
                    assert_relative_eq!(*jump_pct, jump, epsilon = 1e-9);
                }
                other => panic!("unexpected diagnostic {other:?}"),
            }
        }
    }

    #[test]
    fn validate_flags_bad_slopes_and_gaps() {
        let mut segs = DEFAULT_SEGMENTS_25C.to_vec();
        segs[2].a = 0.0;
        let t = OcvTable::new(segs, 25.0).unwrap();
        assert!(t
            .validate()
            .iter()
            .any(|d| matches!(d, TableDiagnostic::NonPositiveSlope { index: 3, .. })));

        let gappy = vec![
            OcvSegment { v_lo: 3.3, v_hi: 3.5, a: 50.0, b: 165.0 },
            OcvSegment { v_lo: 3.6, v_hi: 4.2, a: 80.0, b: 270.0 },
        ];
        let t = OcvTable::new(gappy, 25.0).unwrap();
        let diags = t.validate();
        assert!(diags
            .iter()
            .any(|d| matches!(d, TableDiagnostic::ContiguityGap { index: 1, .. })));
        assert!(diags.iter().all(|d| d.is_fatal()));
    }

    #[test]
    fn parse_and_load_table_text() {
        let text = "\
# eight-segment default table
3.300 3.452 26.55 88.6
3.452 3.508 125 431.1    # mid comment
3.508 3.595 149 516.1
3.595 3.676 344 1225
3.676 3.739 229.5 800.9
3.739 3.967 111.9 359.9
3.967 4.039 104.8 332
4.039 4.132 90.61 274.7
";
        let parsed = OcvTable::load_str(text).unwrap();
        assert_eq!(parsed.segments(), OcvTable::default_25c().segments());
    }

    #[test]
    fn load_rejects_fatal_tables() {
        // A gap between segments is fatal for the loader.
        let gap = "3.3 3.5 50 165\n3.6 4.2 80 270\n";
        assert!(matches!(OcvTable::load_str(gap), Err(TableError::Invalid(_))));
        // Zero slope likewise.
        let flat = "3.3 3.5 0 165\n3.5 4.2 80 270\n";
        assert!(matches!(OcvTable::load_str(flat), Err(TableError::Invalid(_))));
        // But the default table's discontinuities are not.
        let text = "3.3 3.452 26.55 88.6\n3.452 3.508 125 431.1\n";
        assert!(OcvTable::load_str(text).is_ok());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = OcvTable::parse_str("3.3 3.452 26.55\n").unwrap_err();
        assert!(matches!(err, TableError::Parse { line: 1, .. }));
        let err = OcvTable::parse_str("3.3 3.452 26.55 abc\n").unwrap_err();
        assert!(matches!(err, TableError::Parse { line: 1, .. }));
        assert!(matches!(OcvTable::parse_str(""), Err(TableError::Empty)));
        let err = OcvTable::parse_str("3.5 3.4 10 5\n").unwrap_err();
        assert!(matches!(err, TableError::EmptyRange { index: 1, .. }));
        let err = OcvTable::parse_str("3.5 3.6 10 5\n3.3 3.5 10 5\n").unwrap_err();
        assert!(matches!(err, TableError::Unsorted { index: 2, .. }));
    }
}
