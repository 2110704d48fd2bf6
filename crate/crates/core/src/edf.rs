//! EDF ingestion: header/record decoding, channel selection and windowing.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// The 16 scalp channels used for forecasting and classification, in image column order.
pub const DEFAULT_CHANNELS: [&str; 16] = [
    "Fp1", "F3", "C3", "P3", "O1", "F7", "T3", "T5", "FC1", "FC5", "CP1", "CP5", "F9", "Fz", "Cz",
    "Pz",
];

const MAIN_HEADER_LEN: usize = 256;
const SIGNAL_HEADER_LEN: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct SignalHeader {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefilter: String,
    pub samples_per_record: usize,
}

impl SignalHeader {
    /// Physical value per digital step.
    pub fn gain(&self) -> f64 {
        (self.physical_max - self.physical_min) / f64::from(self.digital_max - self.digital_min)
    }

    pub fn calibrate(&self, digital: i16) -> f64 {
        (f64::from(digital) - f64::from(self.digital_min)) * self.gain() + self.physical_min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdfHeader {
    pub version: String,
    pub patient_info: String,
    pub recording_info: String,
    pub start_date: String,
    pub start_time: String,
    pub num_records: usize,
    pub record_duration: f64,
    pub signals: Vec<SignalHeader>,
}

impl EdfHeader {
    pub fn num_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn header_bytes(&self) -> usize {
        MAIN_HEADER_LEN + SIGNAL_HEADER_LEN * self.signals.len()
    }

    pub fn record_bytes(&self) -> usize {
        self.signals.iter().map(|s| s.samples_per_record * 2).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub label: String,
    /// Samples per second.
    pub rate: f64,
    /// Calibrated samples in physical units.
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecordingSession {
    pub patient_id: String,
    pub channels: Vec<Channel>,
}

impl RecordingSession {
    pub fn new(patient_id: impl Into<String>, channels: Vec<Channel>) -> Self {
        Self {
            patient_id: patient_id.into(),
            channels,
        }
    }

    /// Builds a session from a `C × N` matrix sharing one sampling rate.
    pub fn from_matrix(patient_id: &str, labels: &[&str], rate: f64, m: &Matrix<f64>) -> Result<Self> {
        if labels.len() != m.rows() {
            return Err(Error::shape(format!("{} labels", m.rows()), labels.len()));
        }
        let channels = labels
            .iter()
            .zip(m.row_iter())
            .map(|(l, row)| Channel {
                label: (*l).to_string(),
                rate,
                samples: row.to_vec(),
            })
            .collect();
        Ok(Self::new(patient_id, channels))
    }
}

/// One labeled window cut from a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    /// `C × T_w`, physical units.
    pub data: Matrix<f64>,
    /// 1 if the window overlaps a seizure interval.
    pub label: u8,
    pub patient_id: String,
    /// Seconds from the start of the recording.
    pub start_time: f64,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn field(&mut self, len: usize) -> Result<&'a str> {
        let end = self.pos + len;
        if end > self.bytes.len() {
            return Err(Error::Parse {
                offset: self.bytes.len(),
                msg: format!("header truncated, need {len} bytes at offset {}", self.pos),
            });
        }
        let raw = &self.bytes[self.pos..end];
        let s = std::str::from_utf8(raw).map_err(|_| Error::Parse {
            offset: self.pos,
            msg: "header field is not ASCII".into(),
        })?;
        self.pos = end;
        Ok(s.trim())
    }

    fn number<N: std::str::FromStr>(&mut self, len: usize, what: &str) -> Result<N> {
        let offset = self.pos;
        let s = self.field(len)?;
        s.parse().map_err(|_| Error::Parse {
            offset,
            msg: format!("cannot parse {what} from `{s}`"),
        })
    }
}

/// Decodes the fixed-size ASCII header (main block plus one block per signal).
pub fn parse_header(bytes: &[u8]) -> Result<EdfHeader> {
    if bytes.len() < MAIN_HEADER_LEN {
        return Err(Error::Parse {
            offset: bytes.len(),
            msg: format!("file is {} bytes, shorter than the 256-byte header", bytes.len()),
        });
    }
    let mut cur = Cursor { bytes, pos: 0 };
    let version = cur.field(8)?.to_string();
    let patient_info = cur.field(80)?.to_string();
    let recording_info = cur.field(80)?.to_string();
    let start_date = cur.field(8)?.to_string();
    let start_time = cur.field(8)?.to_string();
    let declared_header: usize = cur.number(8, "header byte count")?;
    cur.field(44)?;
    let records_offset = cur.pos;
    let num_records: i64 = cur.number(8, "number of data records")?;
    let record_duration: f64 = cur.number(8, "record duration")?;
    let ns_offset = cur.pos;
    let ns: usize = cur.number(4, "number of signals")?;
    if ns == 0 {
        return Err(Error::Parse {
            offset: ns_offset,
            msg: "header declares zero signals".into(),
        });
    }
    let expected = MAIN_HEADER_LEN + SIGNAL_HEADER_LEN * ns;
    if declared_header != expected {
        return Err(Error::Parse {
            offset: 184,
            msg: format!("header byte count {declared_header} disagrees with {ns} signals ({expected})"),
        });
    }
    if bytes.len() < expected {
        return Err(Error::Parse {
            offset: bytes.len(),
            msg: format!("signal headers truncated, need {expected} bytes"),
        });
    }
    if !(record_duration > 0.0) {
        return Err(Error::Parse {
            offset: records_offset + 8,
            msg: format!("record duration must be positive, got {record_duration}"),
        });
    }

    let strings = |cur: &mut Cursor, len: usize| -> Result<Vec<String>> {
        (0..ns).map(|_| cur.field(len).map(str::to_string)).collect()
    };
    let labels = strings(&mut cur, 16)?;
    let transducers = strings(&mut cur, 80)?;
    let dims = strings(&mut cur, 8)?;
    let nums = |cur: &mut Cursor, what: &str| -> Result<Vec<f64>> {
        (0..ns).map(|_| cur.number::<f64>(8, what)).collect()
    };
    let pmin = nums(&mut cur, "physical minimum")?;
    let pmax = nums(&mut cur, "physical maximum")?;
    let dmin = nums(&mut cur, "digital minimum")?;
    let dmax = nums(&mut cur, "digital maximum")?;
    let prefilters = strings(&mut cur, 80)?;
    let spr: Vec<usize> = (0..ns)
        .map(|_| cur.number::<usize>(8, "samples per record"))
        .collect::<Result<_>>()?;

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        if dmax[i] <= dmin[i] {
            return Err(Error::Calibration {
                signal: i,
                msg: format!("digital max {} must exceed digital min {}", dmax[i], dmin[i]),
            });
        }
        if pmax[i] == pmin[i] {
            return Err(Error::Calibration {
                signal: i,
                msg: "physical range is empty".into(),
            });
        }
        signals.push(SignalHeader {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            physical_dimension: dims[i].clone(),
            physical_min: pmin[i],
            physical_max: pmax[i],
            digital_min: dmin[i] as i32,
            digital_max: dmax[i] as i32,
            prefilter: prefilters[i].clone(),
            samples_per_record: spr[i],
        });
    }

    let mut header = EdfHeader {
        version,
        patient_info,
        recording_info,
        start_date,
        start_time,
        num_records: 0,
        record_duration,
        signals,
    };
    let record_bytes = header.record_bytes();
    header.num_records = if num_records < 0 {
        // Unknown count (recording in progress): infer from the payload size.
        if record_bytes == 0 {
            0
        } else {
            (bytes.len() - expected) / record_bytes
        }
    } else {
        num_records as usize
    };
    Ok(header)
}

/// Decodes an EDF byte stream into calibrated per-channel sequences.
pub fn parse_edf(bytes: &[u8]) -> Result<RecordingSession> {
    let header = parse_header(bytes)?;
    let start = header.header_bytes();
    let record_bytes = header.record_bytes();
    let needed = start + header.num_records * record_bytes;
    if bytes.len() < needed {
        let complete = (bytes.len() - start) / record_bytes.max(1);
        return Err(Error::Parse {
            offset: start + complete * record_bytes,
            msg: format!(
                "data truncated: {} records declared, {complete} complete",
                header.num_records
            ),
        });
    }

    let mut channels: Vec<Channel> = header
        .signals
        .iter()
        .map(|s| Channel {
            label: s.label.clone(),
            rate: s.samples_per_record as f64 / header.record_duration,
            samples: Vec::with_capacity(s.samples_per_record * header.num_records),
        })
        .collect();

    let mut pos = start;
    for _ in 0..header.num_records {
        for (sig, ch) in header.signals.iter().zip(channels.iter_mut()) {
            let chunk = &bytes[pos..pos + sig.samples_per_record * 2];
            ch.samples.extend(
                chunk
                    .chunks_exact(2)
                    .map(|b| sig.calibrate(i16::from_le_bytes([b[0], b[1]]))),
            );
            pos += chunk.len();
        }
    }

    Ok(RecordingSession {
        patient_id: patient_code(&header.patient_info),
        channels,
    })
}

fn patient_code(info: &str) -> String {
    info.split_whitespace().next().unwrap_or("").to_string()
}

/// Physical and digital ranges used when encoding a session.
#[derive(Debug, Clone, Copy)]
pub struct EncodeRange {
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i16,
    pub digital_max: i16,
}

impl Default for EncodeRange {
    fn default() -> Self {
        Self {
            physical_min: -1000.0,
            physical_max: 1000.0,
            digital_min: -32767,
            digital_max: 32767,
        }
    }
}

/// Encodes a session as EDF bytes. All channels must share one rate and length.
pub fn encode_edf(session: &RecordingSession, range: EncodeRange) -> Result<Vec<u8>> {
    let first = session
        .channels
        .first()
        .ok_or_else(|| Error::invalid("cannot encode an empty session"))?;
    let n = first.samples.len();
    let rate = first.rate;
    if n == 0 {
        return Err(Error::invalid("cannot encode channels with no samples"));
    }
    if !(rate > 0.0) {
        return Err(Error::invalid(format!("sampling rate must be positive, got {rate}")));
    }
    for ch in &session.channels {
        if ch.samples.len() != n || ch.rate != rate {
            return Err(Error::invalid(format!(
                "channel `{}` differs in rate or length from `{}`",
                ch.label, first.label
            )));
        }
    }
    if range.digital_max <= range.digital_min || range.physical_max <= range.physical_min {
        return Err(Error::invalid("encode range is empty"));
    }

    // One-second records when the rate is integral and divides the length;
    // otherwise a single record holding everything.
    let (spr, num_records, duration) = if rate.fract() == 0.0 && n % (rate as usize) == 0 {
        (rate as usize, n / rate as usize, 1.0)
    } else {
        (n, 1, n as f64 / rate)
    };

    let ns = session.channels.len();
    let header_len = MAIN_HEADER_LEN + SIGNAL_HEADER_LEN * ns;
    let mut out = Vec::with_capacity(header_len + 2 * n * ns);
    push_field(&mut out, "0", 8);
    push_field(&mut out, &session.patient_id, 80);
    push_field(&mut out, "Startdate X X X X", 80);
    push_field(&mut out, "01.01.00", 8);
    push_field(&mut out, "00.00.00", 8);
    push_field(&mut out, &header_len.to_string(), 8);
    push_field(&mut out, "", 44);
    push_field(&mut out, &num_records.to_string(), 8);
    push_field(&mut out, &format_number(duration), 8);
    push_field(&mut out, &ns.to_string(), 4);
    for ch in &session.channels {
        push_field(&mut out, &ch.label, 16);
    }
    for _ in 0..ns {
        push_field(&mut out, "", 80);
    }
    for _ in 0..ns {
        push_field(&mut out, "uV", 8);
    }
    for _ in 0..ns {
        push_field(&mut out, &format_number(range.physical_min), 8);
    }
    for _ in 0..ns {
        push_field(&mut out, &format_number(range.physical_max), 8);
    }
    for _ in 0..ns {
        push_field(&mut out, &range.digital_min.to_string(), 8);
    }
    for _ in 0..ns {
        push_field(&mut out, &range.digital_max.to_string(), 8);
    }
    for _ in 0..ns {
        push_field(&mut out, "", 80);
    }
    for _ in 0..ns {
        push_field(&mut out, &spr.to_string(), 8);
    }
    for _ in 0..ns {
        push_field(&mut out, "", 32);
    }
    debug_assert_eq!(out.len(), header_len);

    let phys_span = range.physical_max - range.physical_min;
    let dig_span = f64::from(range.digital_max) - f64::from(range.digital_min);
    for rec in 0..num_records {
        for (ci, ch) in session.channels.iter().enumerate() {
            for (k, &v) in ch.samples[rec * spr..(rec + 1) * spr].iter().enumerate() {
                if !(v >= range.physical_min && v <= range.physical_max) {
                    return Err(Error::invalid(format!(
                        "channel {ci} sample {} = {v} outside physical range [{}, {}]",
                        rec * spr + k,
                        range.physical_min,
                        range.physical_max
                    )));
                }
                let d = ((v - range.physical_min) / phys_span * dig_span
                    + f64::from(range.digital_min))
                .round() as i16;
                out.extend_from_slice(&d.to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn push_field(out: &mut Vec<u8>, value: &str, len: usize) {
    let bytes: Vec<u8> = value
        .bytes()
        .map(|b| if b.is_ascii_graphic() || b == b' ' { b } else { b'_' })
        .take(len)
        .collect();
    out.extend_from_slice(&bytes);
    out.extend(std::iter::repeat_n(b' ', len - bytes.len()));
}

/// Shortest decimal representation of `v` that fits an 8-character field.
fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e7 {
        return format!("{}", v as i64);
    }
    for prec in (0..=7).rev() {
        let s = format!("{v:.prec$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s.len() <= 8 {
            return s;
        }
    }
    format!("{v:.0}")
}

/// Canonical form of a channel label: trimmed, lower-cased, without a leading `EEG` token.
pub fn normalize_label(label: &str) -> String {
    let lower = label.trim().to_lowercase();
    let stripped = lower
        .strip_prefix("eeg")
        .filter(|rest| rest.starts_with([' ', '-', '_']) || rest.is_empty())
        .map(|rest| rest.trim_start_matches([' ', '-', '_']))
        .unwrap_or(&lower);
    stripped.trim().to_string()
}

/// Picks `wanted` channels (in that order) out of a session as a `C × N` matrix.
///
/// Selected channels must share a sampling rate; unselected ones are ignored.
pub fn select_channels(session: &RecordingSession, wanted: &[&str]) -> Result<(Matrix<f64>, f64)> {
    if wanted.is_empty() {
        return Err(Error::invalid("no channels requested"));
    }
    let normalized: Vec<String> = session.channels.iter().map(|c| normalize_label(&c.label)).collect();
    let mut picked = Vec::with_capacity(wanted.len());
    for w in wanted {
        let key = normalize_label(w);
        let hits: Vec<usize> = normalized
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == key)
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [] => return Err(Error::MissingChannel((*w).to_string())),
            [i] => picked.push(&session.channels[*i]),
            many => {
                return Err(Error::AmbiguousChannel {
                    wanted: (*w).to_string(),
                    candidates: many.iter().map(|&i| session.channels[i].label.clone()).collect(),
                })
            }
        }
    }
    let rate = picked[0].rate;
    let n = picked[0].samples.len();
    for ch in &picked {
        if ch.rate != rate {
            return Err(Error::invalid(format!(
                "selected channels have different rates: `{}` at {} Hz vs `{}` at {rate} Hz",
                ch.label, ch.rate, picked[0].label
            )));
        }
        if ch.samples.len() != n {
            return Err(Error::invalid(format!(
                "selected channel `{}` has {} samples, expected {n}",
                ch.label,
                ch.samples.len()
            )));
        }
    }
    let rows: Vec<Vec<f64>> = picked.iter().map(|c| c.samples.clone()).collect();
    Ok((Matrix::from_rows(&rows)?, rate))
}

/// Cuts `C × window` slices starting at `0, stride, 2·stride, …`.
///
/// A window is labeled 1 iff it overlaps any `[start, end)` seizure interval
/// (in samples).
pub fn window_signals(
    matrix: &Matrix<f64>,
    window: usize,
    stride: usize,
    seizure_intervals: &[(usize, usize)],
    rate: f64,
    patient_id: &str,
) -> Result<Vec<WindowedSample>> {
    if window == 0 || stride == 0 {
        return Err(Error::invalid("window and stride must be at least 1"));
    }
    let n = matrix.cols();
    if n < window {
        return Ok(Vec::new());
    }
    (0..=(n - window) / stride)
        .map(|k| {
            let start = k * stride;
            let end = start + window;
            let label = seizure_intervals.iter().any(|&(s, e)| s < end && start < e) as u8;
            Ok(WindowedSample {
                data: matrix.columns(start, window)?,
                label,
                patient_id: patient_id.to_string(),
                start_time: start as f64 / rate,
            })
        })
        .collect()
}

/// Parses a seizure annotation sidecar: one `start_s end_s` pair per line.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_annotations(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse = |p: Option<&str>| -> Result<f64> {
            p.and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::invalid(format!("annotation line {}: `{line}`", lineno + 1)))
        };
        let (s, e) = (parse(parts.next())?, parse(parts.next())?);
        if parts.next().is_some() || !(e >= s) || s < 0.0 {
            return Err(Error::invalid(format!("annotation line {}: `{line}`", lineno + 1)));
        }
        out.push((s, e));
    }
    Ok(out)
}

pub fn format_annotations(intervals: &[(f64, f64)]) -> String {
    intervals.iter().map(|(s, e)| format!("{s} {e}\n")).collect()
}

/// Converts second-based intervals to `[start, end)` sample ranges.
pub fn intervals_to_samples(intervals: &[(f64, f64)], rate: f64) -> Vec<(usize, usize)> {
    intervals
        .iter()
        .map(|&(s, e)| ((s * rate).floor() as usize, (e * rate).ceil() as usize))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_session(labels: &[&str], rate: f64, n: usize) -> RecordingSession {
        let channels = labels
            .iter()
            .enumerate()
            .map(|(i, l)| Channel {
                label: (*l).to_string(),
                rate,
                samples: (0..n).map(|k| -500.0 + (k as f64) * 0.37 + i as f64 * 11.0).collect(),
            })
            .collect();
        RecordingSession::new("P01", channels)
    }

    #[test]
    fn ramp_roundtrip_within_half_lsb() {
        let s = ramp_session(&["Fp1", "F3", "C3"], 256.0, 512);
        let bytes = encode_edf(&s, EncodeRange::default()).unwrap();
        let parsed = parse_edf(&bytes).unwrap();
        let lsb = 2000.0 / 65534.0;
        assert_eq!(parsed.patient_id, "P01");
        for (a, b) in parsed.channels.iter().zip(&s.channels) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.rate, 256.0);
            assert_eq!(a.samples.len(), b.samples.len());
            for (x, y) in a.samples.iter().zip(&b.samples) {
                assert!((x - y).abs() <= 0.5 * lsb + 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn byte_count_two_channels_one_second() {
        let s = ramp_session(&["A", "B"], 512.0, 512);
        let bytes = encode_edf(&s, EncodeRange::default()).unwrap();
        assert_eq!(bytes.len(), 2 * 256 + 256 + 2 * 512 * 2);
    }

    #[test]
    fn non_integral_length_uses_single_record() {
        let s = ramp_session(&["A"], 100.0, 150);
        let bytes = encode_edf(&s, EncodeRange::default()).unwrap();
        let h = parse_header(&bytes).unwrap();
        assert_eq!(h.num_records, 1);
        assert_eq!(h.record_duration, 1.5);
        assert_eq!(parse_edf(&bytes).unwrap().channels[0].rate, 100.0);
    }

    #[test]
    fn short_file_is_parse_error() {
        assert!(matches!(parse_edf(&[b' '; 100]), Err(Error::Parse { offset: 100, .. })));
    }

    #[test]
    fn zero_signals_is_error() {
        let s = ramp_session(&["A"], 4.0, 4);
        let mut bytes = encode_edf(&s, EncodeRange::default()).unwrap();
        bytes[252..256].copy_from_slice(b"0   ");
        assert!(matches!(parse_edf(&bytes), Err(Error::Parse { offset: 252, .. })));
    }

    #[test]
    fn truncated_records_report_offset() {
        let s = ramp_session(&["A"], 4.0, 8);
        let bytes = encode_edf(&s, EncodeRange::default()).unwrap();
        let cut = &bytes[..bytes.len() - 3];
        match parse_edf(cut) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 512 + 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_digital_range_is_calibration_error() {
        let s = ramp_session(&["A"], 4.0, 4);
        let mut bytes = encode_edf(&s, EncodeRange::default()).unwrap();
        // digital max field of signal 0 sits after label/transducer/dim/pmin/pmax/dmin.
        let off = 256 + 16 + 80 + 8 + 8 + 8 + 8;
        bytes[off..off + 8].copy_from_slice(b"-32767  ");
        assert!(matches!(parse_edf(&bytes), Err(Error::Calibration { signal: 0, .. })));
    }

    #[test]
    fn out_of_range_or_empty_encode_errors() {
        let mut s = ramp_session(&["A"], 4.0, 4);
        s.channels[0].samples[1] = 5000.0;
        assert!(encode_edf(&s, EncodeRange::default()).is_err());
        assert!(encode_edf(&RecordingSession::default(), EncodeRange::default()).is_err());
    }

    #[test]
    fn label_normalization() {
        assert_eq!(normalize_label("EEG Fp1"), "fp1");
        assert_eq!(normalize_label("FZ  "), "fz");
        assert_eq!(normalize_label("EEG"), "");
        assert_eq!(normalize_label("EEGX"), "eegx");
    }

    #[test]
    fn selects_default_channels_in_order() {
        let mut labels: Vec<String> = DEFAULT_CHANNELS.iter().rev().map(|l| format!("EEG {l}")).collect();
        labels.insert(3, "EKG EKG".into());
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let s = ramp_session(&refs, 512.0, 64);
        let (m, rate) = select_channels(&s, &DEFAULT_CHANNELS).unwrap();
        assert_eq!((m.rows(), m.cols(), rate), (16, 64, 512.0));
        for (k, want) in DEFAULT_CHANNELS.iter().enumerate() {
            let src = s
                .channels
                .iter()
                .find(|c| normalize_label(&c.label) == normalize_label(want))
                .unwrap();
            assert_eq!(m.row(k), src.samples.as_slice());
        }
    }

    #[test]
    fn selection_identity_and_normalized_match() {
        let s = ramp_session(&["FZ  ", "Cz"], 128.0, 10);
        let (m, _) = select_channels(&s, &["Fz"]).unwrap();
        assert_eq!(m.rows(), 1);
        assert_eq!(m.row(0), s.channels[0].samples.as_slice());
    }

    #[test]
    fn selection_errors() {
        let s = ramp_session(&["Fz", "EEG FZ", "Cz"], 128.0, 10);
        assert!(matches!(select_channels(&s, &["Pz"]), Err(Error::MissingChannel(c)) if c == "Pz"));
        assert!(matches!(select_channels(&s, &["Fz"]), Err(Error::AmbiguousChannel { .. })));
        let mut mixed = ramp_session(&["A", "B", "C"], 128.0, 10);
        mixed.channels[1].rate = 256.0;
        assert!(select_channels(&mixed, &["A", "B"]).is_err());
        // Unselected channels with another rate are ignored.
        assert!(select_channels(&mixed, &["A", "C"]).is_ok());
    }

    #[test]
    fn window_counts_and_labels() {
        let m = Matrix::from_fn(2, 100, |c, j| (c * 1000 + j) as f64);
        let w = window_signals(&m, 30, 10, &[(45, 50)], 10.0, "p").unwrap();
        assert_eq!(w.len(), 8);
        let starts: Vec<f64> = w.iter().map(|s| s.start_time * 10.0).collect();
        assert_eq!(starts, vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0]);
        let labels: Vec<u8> = w.iter().map(|s| s.label).collect();
        assert_eq!(labels, vec![0, 0, 1, 1, 1, 0, 0, 0]);
        assert_eq!(w[2].data[(1, 0)], 1020.0);
        assert!(window_signals(&m, 101, 1, &[], 1.0, "p").unwrap().is_empty());
        assert!(window_signals(&m, 0, 1, &[], 1.0, "p").is_err());
    }

    #[test]
    fn window_length_at_512_hz() {
        let window = (30.0f64 * 512.0).round() as usize;
        assert_eq!(window, 15_360);
        let m = Matrix::<f64>::zeros(1, window + 5);
        let w = window_signals(&m, window, window, &[], 512.0, "p").unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].data.cols(), 15_360);
    }

    #[test]
    fn annotations() {
        let a = parse_annotations("# comment\n1.5 3\n\n10 12.25\n").unwrap();
        assert_eq!(a, vec![(1.5, 3.0), (10.0, 12.25)]);
        assert_eq!(parse_annotations(&format_annotations(&a)).unwrap(), a);
        assert!(parse_annotations("3 1").is_err());
        assert!(parse_annotations("3").is_err());
        assert_eq!(intervals_to_samples(&a, 4.0), vec![(6, 12), (40, 49)]);
    }
}
