//! Dataset data model: scene labels, 10-second segment records, manifest
//! loading/validation, and media ingestion through an external decoder.
//!
//! Manifest files are CSV with the fixed header
//! `video_id,segment_index,start_s,label,split,audio_path,frames_dir`.
//! The key discipline enforced at load time: segments of one video never
//! appear in both the Train and the Test split.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::CLASS_COUNT;

/// Fixed length of a segment in seconds.
pub const SEGMENT_SECONDS: f64 = 10.0;

pub const MANIFEST_HEADER: [&str; 7] = [
    "video_id",
    "segment_index",
    "start_s",
    "label",
    "split",
    "audio_path",
    "frames_dir",
];

/// The five crowded-scene categories, with stable codes 0-4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneLabel {
    Riot = 0,
    NoiseStreet = 1,
    FireworkEvent = 2,
    MusicEvent = 3,
    SportAtmosphere = 4,
}

impl SceneLabel {
    pub const ALL: [SceneLabel; CLASS_COUNT] = [
        SceneLabel::Riot,
        SceneLabel::NoiseStreet,
        SceneLabel::FireworkEvent,
        SceneLabel::MusicEvent,
        SceneLabel::SportAtmosphere,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<SceneLabel> {
        Self::ALL.get(code).copied()
    }

    /// Serialized form used in CSV files.
    pub fn name(self) -> &'static str {
        match self {
            SceneLabel::Riot => "riot",
            SceneLabel::NoiseStreet => "noise_street",
            SceneLabel::FireworkEvent => "firework_event",
            SceneLabel::MusicEvent => "music_event",
            SceneLabel::SportAtmosphere => "sport_atmosphere",
        }
    }

    pub fn from_name(s: &str) -> Option<SceneLabel> {
        Self::ALL.iter().copied().find(|l| l.name() == s)
    }
}

impl fmt::Display for SceneLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn from_name(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One labeled 10-second segment of a source video.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub video_id: String,
    pub segment_index: u32,
    pub start_s: f64,
    pub duration_s: f64,
    pub label: SceneLabel,
    pub split: Split,
    pub audio_path: PathBuf,
    pub frames_dir: Option<PathBuf>,
}

impl SegmentRecord {
    /// Canonical segment identifier used by probability CSVs and feature files.
    pub fn segment_id(&self) -> String {
        format!("{}#{}", self.video_id, self.segment_index)
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("video {video_id:?} has segments in both train and test splits")]
    SplitViolation { video_id: String },
    #[error("manifest contains no records")]
    EmptyManifest,
    #[error("video {video_id:?} repeats segment_index {segment_index}")]
    DuplicateSegment { video_id: String, segment_index: u32 },
}

/// A validated set of segment records plus per-(label, split) tallies.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    records: Vec<SegmentRecord>,
    counts: BTreeMap<(SceneLabel, Split), u32>,
}

impl DatasetManifest {
    /// Builds a manifest from records, enforcing the split and uniqueness
    /// invariants.
    pub fn new(records: Vec<SegmentRecord>) -> Result<Self, ManifestError> {
        if records.is_empty() {
            return Err(ManifestError::EmptyManifest);
        }
        let mut split_of: HashMap<&str, Split> = HashMap::new();
        let mut seen: BTreeSet<(&str, u32)> = BTreeSet::new();
        for r in &records {
            if !seen.insert((r.video_id.as_str(), r.segment_index)) {
                return Err(ManifestError::DuplicateSegment {
                    video_id: r.video_id.clone(),
                    segment_index: r.segment_index,
                });
            }
            match split_of.insert(r.video_id.as_str(), r.split) {
                Some(prev) if prev != r.split => {
                    return Err(ManifestError::SplitViolation {
                        video_id: r.video_id.clone(),
                    });
                }
                _ => {}
            }
        }
        let counts = tally(&records);
        Ok(Self { records, counts })
    }

    pub fn records(&self) -> &[SegmentRecord] {
        &self.records
    }

    pub fn counts(&self) -> &BTreeMap<(SceneLabel, Split), u32> {
        &self.counts
    }

    pub fn count(&self, label: SceneLabel, split: Split) -> u32 {
        self.counts.get(&(label, split)).copied().unwrap_or(0)
    }

    pub fn split_records(&self, split: Split) -> impl Iterator<Item = &SegmentRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.split_records(split).count()
    }
}

fn tally(records: &[SegmentRecord]) -> BTreeMap<(SceneLabel, Split), u32> {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry((r.label, r.split)).or_insert(0) += 1;
    }
    counts
}

/// Loads and validates a manifest CSV.
pub fn load_manifest<P: AsRef<Path>>(path: P) -> Result<DatasetManifest, ManifestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers = reader
        .headers()
        .map_err(|e| ManifestError::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    if headers.iter().ne(MANIFEST_HEADER.iter().copied()) {
        return Err(ManifestError::Parse {
            line: 1,
            msg: format!(
                "unexpected header {:?}, expected {:?}",
                headers.iter().collect::<Vec<_>>(),
                MANIFEST_HEADER
            ),
        });
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| ManifestError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        records.push(parse_row(&row, line)?);
    }
    DatasetManifest::new(records)
}

fn parse_row(row: &csv::StringRecord, line: u64) -> Result<SegmentRecord, ManifestError> {
    let err = |msg: String| ManifestError::Parse { line, msg };
    if row.len() != MANIFEST_HEADER.len() {
        return Err(err(format!("expected 7 fields, got {}", row.len())));
    }
    let field = |i: usize| row.get(i).unwrap_or("");
    let video_id = field(0).trim();
    if video_id.is_empty() {
        return Err(err("empty video_id".into()));
    }
    let segment_index: u32 = field(1)
        .trim()
        .parse()
        .map_err(|e| err(format!("bad segment_index {:?}: {e}", field(1))))?;
    let start_s: f64 = field(2)
        .trim()
        .parse()
        .map_err(|e| err(format!("bad start_s {:?}: {e}", field(2))))?;
    if !start_s.is_finite() || start_s < 0.0 {
        return Err(err(format!("start_s {start_s} out of range")));
    }
    let label = SceneLabel::from_name(field(3).trim())
        .ok_or_else(|| err(format!("unknown label {:?}", field(3))))?;
    let split = Split::from_name(field(4).trim())
        .ok_or_else(|| err(format!("unknown split {:?}", field(4))))?;
    let audio_path = field(5).trim();
    if audio_path.is_empty() {
        return Err(err("empty audio_path".into()));
    }
    let frames_dir = match field(6).trim() {
        "" => None,
        s => Some(PathBuf::from(s)),
    };
    Ok(SegmentRecord {
        video_id: video_id.to_string(),
        segment_index,
        start_s,
        duration_s: SEGMENT_SECONDS,
        label,
        split,
        audio_path: PathBuf::from(audio_path),
        frames_dir,
    })
}

/// Writes a manifest back to CSV in the canonical column order.
pub fn write_manifest<P: AsRef<Path>>(
    path: P,
    manifest: &DatasetManifest,
) -> Result<(), ManifestError> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(MANIFEST_HEADER)?;
    for r in manifest.records() {
        w.write_record([
            r.video_id.as_str(),
            &r.segment_index.to_string(),
            &format!("{}", r.start_s),
            r.label.name(),
            r.split.name(),
            &r.audio_path.to_string_lossy(),
            &r.frames_dir
                .as_ref()
                .map(|p| p.to_string_lossy().into_owned())
                .unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl From<csv::Error> for ManifestError {
    fn from(e: csv::Error) -> Self {
        ManifestError::Parse {
            line: 0,
            msg: e.to_string(),
        }
    }
}

/// Default split-ratio tolerance in percentage points around the 67:33 target.
pub const DEFAULT_SPLIT_TOLERANCE_PP: f64 = 10.0;
/// Target train share of the 67:33 split.
pub const TARGET_TRAIN_PCT: f64 = 67.0;

#[derive(Debug, Clone, Serialize)]
pub struct ClassSplitStats {
    pub label: SceneLabel,
    pub train: u32,
    pub test: u32,
    /// Train share of the class total, in percent.
    pub train_pct: f64,
    /// Absolute deviation from the 67% target, in percentage points.
    pub deviation_pp: f64,
    pub flagged: bool,
}

/// Report-only check of per-class Train:Test ratios against 67:33.
#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub classes: Vec<ClassSplitStats>,
    pub tolerance_pp: f64,
}

impl SplitReport {
    pub fn all_within_tolerance(&self) -> bool {
        self.classes.iter().all(|c| !c.flagged)
    }
}

pub fn validate_split(manifest: &DatasetManifest, tolerance_pp: f64) -> SplitReport {
    let classes = SceneLabel::ALL
        .iter()
        .map(|&label| {
            let train = manifest.count(label, Split::Train);
            let test = manifest.count(label, Split::Test);
            let total = train + test;
            let train_pct = if total == 0 {
                0.0
            } else {
                100.0 * f64::from(train) / f64::from(total)
            };
            let deviation_pp = (train_pct - TARGET_TRAIN_PCT).abs();
            ClassSplitStats {
                label,
                train,
                test,
                train_pct,
                deviation_pp,
                flagged: deviation_pp > tolerance_pp,
            }
        })
        .collect();
    SplitReport {
        classes,
        tolerance_pp,
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("decoder command failed for segment {segment_index} (exit {status}): {stderr}")]
    DecoderFailure {
        segment_index: u32,
        status: i32,
        stderr: String,
    },
}

/// One segment cut from a video before a label and split are assigned.
#[derive(Debug, Clone)]
pub struct IngestedSegment {
    pub video_id: String,
    pub segment_index: u32,
    pub start_s: f64,
    pub duration_s: f64,
    pub audio_path: PathBuf,
    pub frames_dir: Option<PathBuf>,
}

impl IngestedSegment {
    pub fn into_record(self, label: SceneLabel, split: Split) -> SegmentRecord {
        SegmentRecord {
            video_id: self.video_id,
            segment_index: self.segment_index,
            start_s: self.start_s,
            duration_s: self.duration_s,
            label,
            split,
            audio_path: self.audio_path,
            frames_dir: self.frames_dir,
        }
    }
}

#[derive(Debug)]
pub struct IngestReport {
    pub segments: Vec<IngestedSegment>,
    pub warnings: Vec<String>,
}

/// Cuts a video into consecutive non-overlapping 10-second WAV segments by
/// invoking an external decoder once per segment.
///
/// `decoder_cmd_template` is run through `sh -c` after substituting the
/// `{input}`, `{output}`, `{start}` and `{duration}` placeholders, e.g.
/// `ffmpeg -y -ss {start} -t {duration} -i {input} -ac 1 -ar 32000 {output}`.
/// Decoding stops at the first segment the decoder cannot produce or that
/// comes back shorter than 10 seconds; the trailing remainder is dropped.
/// A source shorter than 10 seconds yields zero segments and a warning.
/// Optional `frame_cmd_template` additionally extracts per-segment frame
/// images into `{outdir}`.
pub fn ingest_media(
    video_path: &Path,
    out_dir: &Path,
    decoder_cmd_template: &str,
    frame_cmd_template: Option<&str>,
) -> Result<IngestReport, IngestError> {
    std::fs::create_dir_all(out_dir)?;
    let video_id = video_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".to_string());

    let mut segments = Vec::new();
    let mut warnings = Vec::new();
    for index in 0.. {
        let start = f64::from(index) * SEGMENT_SECONDS;
        let audio_path = out_dir.join(format!("{video_id}_{index:04}.wav"));
        let cmd = render_template(
            decoder_cmd_template,
            video_path,
            &audio_path,
            start,
            SEGMENT_SECONDS,
        );
        let output = Command::new("sh").arg("-c").arg(&cmd).output()?;
        if !output.status.success() {
            let _ = std::fs::remove_file(&audio_path);
            if index == 0 {
                return Err(IngestError::DecoderFailure {
                    segment_index: index,
                    status: output.status.code().unwrap_or(-1),
                    stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
                });
            }
            break;
        }
        match wav_duration_seconds(&audio_path) {
            // Allow a little decoder slop below the nominal 10 s.
            Some(secs) if secs >= SEGMENT_SECONDS - 0.05 => {}
            Some(_) | None => {
                let _ = std::fs::remove_file(&audio_path);
                if index == 0 {
                    warnings.push(format!(
                        "{}: shorter than {SEGMENT_SECONDS} s, produced no segments",
                        video_path.display()
                    ));
                }
                break;
            }
        }
        let frames_dir = match frame_cmd_template {
            Some(template) => {
                let dir = out_dir.join(format!("{video_id}_{index:04}_frames"));
                std::fs::create_dir_all(&dir)?;
                let cmd = render_template(template, video_path, &dir, start, SEGMENT_SECONDS);
                let output = Command::new("sh").arg("-c").arg(&cmd).output()?;
                if output.status.success() {
                    Some(dir)
                } else {
                    warnings.push(format!(
                        "frame extraction failed for segment {index}: {}",
                        String::from_utf8_lossy(&output.stderr)
                    ));
                    None
                }
            }
            None => None,
        };
        segments.push(IngestedSegment {
            video_id: video_id.clone(),
            segment_index: index,
            start_s: start,
            duration_s: SEGMENT_SECONDS,
            audio_path,
            frames_dir,
        });
    }
    Ok(IngestReport { segments, warnings })
}

fn render_template(template: &str, input: &Path, output: &Path, start: f64, duration: f64) -> String {
    template
        .replace("{input}", &input.to_string_lossy())
        .replace("{output}", &output.to_string_lossy())
        .replace("{outdir}", &output.to_string_lossy())
        .replace("{start}", &format!("{start}"))
        .replace("{duration}", &format!("{duration}"))
}

fn wav_duration_seconds(path: &Path) -> Option<f64> {
    let reader = hound::WavReader::open(path).ok()?;
    let spec = reader.spec();
    let frames = reader.duration();
    Some(f64::from(frames) / f64::from(spec.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn row(video: &str, idx: u32, label: &str, split: &str) -> String {
        format!("{video},{idx},{}.0,{label},{split},audio/{video}_{idx}.wav,\n", idx * 10)
    }

    fn write_manifest_csv(dir: &Path, rows: &[String]) -> PathBuf {
        let path = dir.join("manifest.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "{}", MANIFEST_HEADER.join(",")).unwrap();
        for r in rows {
            f.write_all(r.as_bytes()).unwrap();
        }
        path
    }

    /// Train/Test counts per class as published for the corpus this pipeline
    /// targets: 6997 train + 3463 test = 10460 segments.
    const REFERENCE_COUNTS: [(SceneLabel, u32, u32); 5] = [
        (SceneLabel::Riot, 1429, 757),
        (SceneLabel::NoiseStreet, 1430, 652),
        (SceneLabel::FireworkEvent, 1406, 615),
        (SceneLabel::MusicEvent, 1367, 727),
        (SceneLabel::SportAtmosphere, 1365, 712),
    ];

    fn reference_rows() -> Vec<String> {
        // Group segments into videos of up to 40 segments so video ids are
        // plentiful but splits stay disjoint per video.
        let mut rows = Vec::new();
        for (label, train, test) in REFERENCE_COUNTS {
            for (split, count) in [("train", train), ("test", test)] {
                for i in 0..count {
                    let video = format!("{}_{}_v{}", label.name(), split, i / 40);
                    rows.push(row(&video, i % 40, label.name(), split));
                }
            }
        }
        rows
    }

    #[test]
    fn loads_reference_scale_manifest_and_tallies_match() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest_csv(dir.path(), &reference_rows());
        let manifest = load_manifest(&path).unwrap();
        assert_eq!(manifest.records().len(), 10460);
        assert_eq!(manifest.split_len(Split::Train), 6997);
        assert_eq!(manifest.split_len(Split::Test), 3463);
        for (label, train, test) in REFERENCE_COUNTS {
            assert_eq!(manifest.count(label, Split::Train), train);
            assert_eq!(manifest.count(label, Split::Test), test);
        }
    }

    #[test]
    fn video_in_both_splits_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            row("v1", 0, "riot", "train"),
            row("v1", 1, "riot", "test"),
        ];
        let path = write_manifest_csv(dir.path(), &rows);
        match load_manifest(&path) {
            Err(ManifestError::SplitViolation { video_id }) => assert_eq!(video_id, "v1"),
            other => panic!("expected SplitViolation, got {other:?}"),
        }
    }

    #[test]
    fn header_only_file_is_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest_csv(dir.path(), &[]);
        assert!(matches!(
            load_manifest(&path),
            Err(ManifestError::EmptyManifest)
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            row("v1", 0, "riot", "train"),
            "v2,not_a_number,0.0,riot,train,a.wav,\n".to_string(),
        ];
        let path = write_manifest_csv(dir.path(), &rows);
        match load_manifest(&path) {
            Err(ManifestError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn unknown_label_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row("v1", 0, "picnic", "train")];
        let path = write_manifest_csv(dir.path(), &rows);
        assert!(matches!(
            load_manifest(&path),
            Err(ManifestError::Parse { .. })
        ));
    }

    #[test]
    fn duplicate_segment_index_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row("v1", 0, "riot", "train"), row("v1", 0, "riot", "train")];
        let path = write_manifest_csv(dir.path(), &rows);
        assert!(matches!(
            load_manifest(&path),
            Err(ManifestError::DuplicateSegment { .. })
        ));
    }

    #[test]
    fn label_codes_roundtrip() {
        for (i, label) in SceneLabel::ALL.iter().enumerate() {
            assert_eq!(label.code(), i);
            assert_eq!(SceneLabel::from_code(i), Some(*label));
            assert_eq!(SceneLabel::from_name(label.name()), Some(*label));
        }
        assert_eq!(SceneLabel::from_code(5), None);
    }

    #[test]
    fn split_ratio_reference_class_passes() {
        // Riot 1429/757 -> 65.37% train, deviation 1.63 pp.
        let records: Vec<SegmentRecord> = (0..1429)
            .map(|i| parse_ok(&row(&format!("tr{}", i), 0, "riot", "train")))
            .chain((0..757).map(|i| parse_ok(&row(&format!("te{}", i), 0, "riot", "test"))))
            .collect();
        let manifest = DatasetManifest::new(records).unwrap();
        let report = validate_split(&manifest, DEFAULT_SPLIT_TOLERANCE_PP);
        let riot = &report.classes[SceneLabel::Riot.code()];
        assert!((riot.train_pct - 65.37).abs() < 0.01);
        assert!(!riot.flagged);
    }

    #[test]
    fn all_train_class_is_flagged() {
        let records: Vec<SegmentRecord> = (0..10)
            .map(|i| parse_ok(&row(&format!("v{}", i), 0, "riot", "train")))
            .chain((0..5).map(|i| parse_ok(&row(&format!("w{}", i), 0, "noise_street", "train"))))
            .chain((0..5).map(|i| parse_ok(&row(&format!("x{}", i), 0, "noise_street", "test"))))
            .collect();
        let manifest = DatasetManifest::new(records).unwrap();
        let report = validate_split(&manifest, DEFAULT_SPLIT_TOLERANCE_PP);
        assert!(report.classes[SceneLabel::Riot.code()].flagged);
        assert_eq!(report.classes[SceneLabel::Riot.code()].deviation_pp, 33.0);
    }

    #[test]
    fn exact_ratio_has_zero_deviation() {
        let records: Vec<SegmentRecord> = (0..67)
            .map(|i| parse_ok(&row(&format!("a{}", i), 0, "riot", "train")))
            .chain((0..33).map(|i| parse_ok(&row(&format!("b{}", i), 0, "riot", "test"))))
            .collect();
        let manifest = DatasetManifest::new(records).unwrap();
        let report = validate_split(&manifest, DEFAULT_SPLIT_TOLERANCE_PP);
        let riot = &report.classes[SceneLabel::Riot.code()];
        assert_eq!(riot.deviation_pp, 0.0);
        assert!(!riot.flagged);
    }

    fn parse_ok(line: &str) -> SegmentRecord {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(line.as_bytes());
        let rec = r.records().next().unwrap().unwrap();
        parse_row(&rec, 0).unwrap()
    }

    #[test]
    fn tallies_always_match_recount() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest_csv(dir.path(), &reference_rows());
        let manifest = load_manifest(&path).unwrap();
        let mut recount: BTreeMap<(SceneLabel, Split), u32> = BTreeMap::new();
        for r in manifest.records() {
            *recount.entry((r.label, r.split)).or_insert(0) += 1;
        }
        assert_eq!(&recount, manifest.counts());
    }

    #[test]
    fn manifest_roundtrips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest_csv(
            dir.path(),
            &[row("v1", 0, "riot", "train"), row("v2", 0, "music_event", "test")],
        );
        let manifest = load_manifest(&path).unwrap();
        let out = dir.path().join("copy.csv");
        write_manifest(&out, &manifest).unwrap();
        let back = load_manifest(&out).unwrap();
        assert_eq!(back.records(), manifest.records());
    }
}
