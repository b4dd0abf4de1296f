use std::io::{Read, Write};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::JointReading;
use crate::error::{Error, Result};
use crate::observers::ContactMode;

pub const SCHEMA_VERSION: u32 = 1;

/// One simulation tick: the true state at the start of the tick, the torque and
/// contact force applied over it, and what the sensors reported.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub qdd: Vec<f64>,
    pub tau_m: Vec<f64>,
    pub f_ext: Vector3<f64>,
    pub mode: ContactMode,
    pub foot_pos: Vector3<f64>,
    pub foot_vel: Vector3<f64>,
    pub ref_pos: Vector3<f64>,
    pub ref_vel: Vector3<f64>,
    /// Commanded reference acceleration of the swing controller.
    pub acc_cmd: Vector3<f64>,
    pub swing: bool,
    pub reading: JointReading,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioTrace {
    pub n_dof: usize,
    pub dt: f64,
    pub records: Vec<TraceRecord>,
}

/// Sidecar describing how a trace was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub schema_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub n_dof: usize,
    pub dt: f64,
    pub rows: usize,
    pub columns: Vec<String>,
}

/// SHA-256 of the JSON serialization of `value`, hex encoded.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn axis_names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

fn xyz(prefix: &str) -> [String; 3] {
    ["x", "y", "z"].map(|a| format!("{prefix}_{a}"))
}

impl ScenarioTrace {
    /// Column order of the CSV form.
    pub fn columns(n: usize) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        for prefix in ["q", "qd", "qdd", "tau_m"] {
            cols.extend(axis_names(prefix, n));
        }
        cols.extend(xyz("f"));
        cols.push("mode".into());
        for prefix in ["foot", "foot_v", "ref", "ref_v", "acc_cmd"] {
            cols.extend(xyz(prefix));
        }
        cols.push("swing".into());
        for prefix in ["q_meas", "qd_meas", "tau_meas"] {
            cols.extend(axis_names(prefix, n));
        }
        cols
    }

    pub fn readings(&self) -> impl Iterator<Item = &JointReading> {
        self.records.iter().map(|r| &r.reading)
    }

    pub fn modes(&self) -> Vec<ContactMode> {
        self.records.iter().map(|r| r.mode).collect()
    }

    pub fn forces(&self) -> Vec<Vector3<f64>> {
        self.records.iter().map(|r| r.f_ext).collect()
    }

    pub fn metadata(&self, seed: u64, config_hash: String) -> TraceMetadata {
        TraceMetadata {
            schema_version: SCHEMA_VERSION,
            seed,
            config_hash,
            n_dof: self.n_dof,
            dt: self.dt,
            rows: self.records.len(),
            columns: Self::columns(self.n_dof),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::columns(self.n_dof)).map_err(csv_err)?;
        for r in &self.records {
            let mut row: Vec<String> = vec![r.t.to_string()];
            for v in [&r.q, &r.qd, &r.qdd, &r.tau_m] {
                row.extend(v.iter().map(f64::to_string));
            }
            row.extend(r.f_ext.iter().map(f64::to_string));
            row.push(r.mode.name().to_string());
            for v in [&r.foot_pos, &r.foot_vel, &r.ref_pos, &r.ref_vel, &r.acc_cmd] {
                row.extend(v.iter().map(f64::to_string));
            }
            row.push(u8::from(r.swing).to_string());
            for v in [&r.reading.q, &r.reading.qd, &r.reading.tau_m] {
                row.extend(v.iter().map(f64::to_string));
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header = rd.headers().map_err(csv_err)?.clone();
        let n = (0..).take_while(|i| header.iter().any(|h| h == format!("q{i}"))).count();
        if n == 0 || header.iter().collect::<Vec<_>>() != Self::columns(n) {
            return Err(Error::MalformedRow {
                row: 1,
                message: "header does not match the trace column layout".into(),
            });
        }
        let mut records = Vec::new();
        for (i, row) in rd.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::MalformedRow { row: line, message: e.to_string() })?;
            records.push(parse_row(&row, n).map_err(|message| Error::MalformedRow { row: line, message })?);
        }
        let dt = if records.len() > 1 { records[1].t - records[0].t } else { 0.0 };
        Ok(Self { n_dof: n, dt, records })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

struct Cursor<'a> {
    fields: Vec<&'a str>,
    at: usize,
}

impl<'a> Cursor<'a> {
    fn text(&mut self, name: &str) -> std::result::Result<&'a str, String> {
        let v = self.fields.get(self.at).ok_or_else(|| format!("missing column `{name}`"))?;
        self.at += 1;
        Ok(v)
    }

    fn num(&mut self, name: &str) -> std::result::Result<f64, String> {
        let text = self.text(name)?;
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("column `{name}`: `{text}` is not a finite number")),
        }
    }

    fn vec(&mut self, name: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
        (0..n).map(|i| self.num(&format!("{name}{i}"))).collect()
    }

    fn v3(&mut self, name: &str) -> std::result::Result<Vector3<f64>, String> {
        Ok(Vector3::new(self.num(name)?, self.num(name)?, self.num(name)?))
    }
}

fn parse_row(row: &csv::StringRecord, n: usize) -> std::result::Result<TraceRecord, String> {
    let expected = ScenarioTrace::columns(n).len();
    if row.len() != expected {
        return Err(format!("expected {expected} columns, found {}", row.len()));
    }
    let mut c = Cursor { fields: row.iter().collect(), at: 0 };
    let t = c.num("t")?;
    let q = c.vec("q", n)?;
    let qd = c.vec("qd", n)?;
    let qdd = c.vec("qdd", n)?;
    let tau_m = c.vec("tau_m", n)?;
    let f_ext = c.v3("f")?;
    let mode_text = c.text("mode")?;
    let mode = ContactMode::parse(mode_text).ok_or_else(|| format!("unknown mode `{mode_text}`"))?;
    let foot_pos = c.v3("foot")?;
    let foot_vel = c.v3("foot_v")?;
    let ref_pos = c.v3("ref")?;
    let ref_vel = c.v3("ref_v")?;
    let acc_cmd = c.v3("acc_cmd")?;
    let swing = c.num("swing")? != 0.0;
    let reading = JointReading {
        t,
        q: c.vec("q_meas", n)?,
        qd: c.vec("qd_meas", n)?,
        tau_m: c.vec("tau_meas", n)?,
    };
    Ok(TraceRecord {
        t,
        q,
        qd,
        qdd,
        tau_m,
        f_ext,
        mode,
        foot_pos,
        foot_vel,
        ref_pos,
        ref_vel,
        acc_cmd,
        swing,
        reading,
    })
}
