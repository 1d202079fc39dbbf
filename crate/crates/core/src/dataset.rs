//! Line-delimited JSON datasets and estimate files.
//!
//! Every line is one object `{"t": .., "type": .., "payload": ..}`; line 1 is
//! the header. Floats are written in shortest round-trip form, so reading and
//! re-writing a canonical file reproduces it byte for byte.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose3, Vec3};
use crate::scenario::Scenario;
use crate::solver::PositionEstimate;

pub const DATASET_FORMAT: &str = "capsd-dataset";
pub const ESTIMATES_FORMAT: &str = "capsd-estimates";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed dataset: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuRecord {
    pub omega: Vec3,
    pub accel: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlamRecord {
    pub x: f64,
    pub y: f64,
    pub yaw_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthRecord {
    pub z_depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub range_m: f64,
    pub azimuth_rad: f64,
    /// Pixel the detection came from (bounding-box centre).
    pub u: f64,
    pub v: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RovTruth {
    pub p: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum RecordData {
    Header(Box<DatasetHeader>),
    Imu(ImuRecord),
    Slam(SlamRecord),
    Depth(DepthRecord),
    Detection(DetectionRecord),
    GtRov(RovTruth),
    GtAsv(Pose3),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    #[serde(flatten)]
    pub data: RecordData,
}

impl Record {
    pub fn new(t: f64, data: RecordData) -> Self {
        Self { t, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.header.format != DATASET_FORMAT {
            return Err(DatasetError::Malformed(format!(
                "unknown format {:?}",
                self.header.format
            )));
        }
        if self.header.version != FORMAT_VERSION {
            return Err(DatasetError::Malformed(format!(
                "unsupported version {}",
                self.header.version
            )));
        }
        let mut last = f64::NEG_INFINITY;
        for (i, r) in self.records.iter().enumerate() {
            if !r.t.is_finite() || r.t < last {
                return Err(DatasetError::Malformed(format!(
                    "record {} has timestamp {} after {}",
                    i + 2,
                    r.t,
                    last
                )));
            }
            if matches!(r.data, RecordData::Header(_)) {
                return Err(DatasetError::Malformed(format!(
                    "second header at line {}",
                    i + 2
                )));
            }
            last = r.t;
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), DatasetError> {
        let header = Record::new(0.0, RecordData::Header(Box::new(self.header.clone())));
        write_line(&mut w, &header)?;
        for r in &self.records {
            write_line(&mut w, r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write(&mut out).expect("writing to memory cannot fail");
        out
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, DatasetError> {
        let mut header = None;
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record =
                serde_json::from_str(&line).map_err(|source| DatasetError::Parse {
                    line: i + 1,
                    source,
                })?;
            match (rec.data, header.is_some()) {
                (RecordData::Header(h), false) if records.is_empty() => header = Some(*h),
                (RecordData::Header(_), _) => {
                    return Err(DatasetError::Malformed(format!(
                        "unexpected header at line {}",
                        i + 1
                    )))
                }
                (_, false) => {
                    return Err(DatasetError::Malformed(
                        "first line must be the header".into(),
                    ))
                }
                (data, true) => records.push(Record::new(rec.t, data)),
            }
        }
        let header = header.ok_or_else(|| DatasetError::Malformed("empty dataset".into()))?;
        let ds = Dataset { header, records };
        ds.validate()?;
        Ok(ds)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DatasetError> {
        Self::read(bytes)
    }
}

fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<(), DatasetError> {
    serde_json::to_writer(&mut *w, value)
        .map_err(|source| DatasetError::Parse { line: 0, source })?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Failed solve, kept in the estimates file so error counts survive a round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveFailure {
    pub code: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatesHeader {
    pub format: String,
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum EstimateData {
    Header(EstimatesHeader),
    Estimate(PositionEstimate),
    SolverError(SolveFailure),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateLine {
    pub t: f64,
    #[serde(flatten)]
    pub data: EstimateData,
}

/// Solver output stream: successful estimates interleaved with failures.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimatesFile {
    pub lines: Vec<EstimateLine>,
}

impl EstimatesFile {
    pub fn estimates(&self) -> impl Iterator<Item = &PositionEstimate> {
        self.lines.iter().filter_map(|l| match &l.data {
            EstimateData::Estimate(e) => Some(e),
            _ => None,
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = &SolveFailure> {
        self.lines.iter().filter_map(|l| match &l.data {
            EstimateData::SolverError(f) => Some(f),
            _ => None,
        })
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), DatasetError> {
        let header = EstimateLine {
            t: 0.0,
            data: EstimateData::Header(EstimatesHeader {
                format: ESTIMATES_FORMAT.into(),
                version: FORMAT_VERSION,
            }),
        };
        write_line(&mut w, &header)?;
        for l in &self.lines {
            write_line(&mut w, l)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write(&mut out).expect("writing to memory cannot fail");
        out
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, DatasetError> {
        let mut lines = Vec::new();
        let mut saw_header = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let l: EstimateLine =
                serde_json::from_str(&line).map_err(|source| DatasetError::Parse {
                    line: i + 1,
                    source,
                })?;
            match &l.data {
                EstimateData::Header(h) => {
                    if saw_header || h.format != ESTIMATES_FORMAT || h.version != FORMAT_VERSION {
                        return Err(DatasetError::Malformed(format!(
                            "bad estimates header at line {}",
                            i + 1
                        )));
                    }
                    saw_header = true;
                }
                _ if !saw_header => {
                    return Err(DatasetError::Malformed(
                        "first line must be the header".into(),
                    ))
                }
                _ => lines.push(l),
            }
        }
        if !saw_header {
            return Err(DatasetError::Malformed("empty estimates file".into()));
        }
        Ok(Self { lines })
    }
}
