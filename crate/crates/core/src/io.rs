//! File formats: profile and expansion JSON, density and trajectory CSV,
//! stationary report JSON.
//!
//! CSV outputs start with `#` comment lines carrying the provenance; JSON
//! outputs carry it under a `"provenance"` key. Readers skip both.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::designer::SweepRow;
use crate::elimination::{ExpansionTerm, ModeExpansion, ReductionReport, TermKind};
use crate::error::{Error, Result};
use crate::evolution::{Diagnostics, Trajectory};
use crate::fock::{DensityMatrix, DiagonalBand, LossProfile, TailRule};
use crate::scalar::{Real, C};
use crate::stationary::StationaryReport;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of a canonical configuration string.
pub fn config_hash(config: &str) -> String {
    Sha256::digest(config.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Tool version, config hash and free-form key/value notes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(config: &str) -> Self {
        Self { tool: "ncl".into(), version: TOOL_VERSION.into(), config_hash: config_hash(config), notes: BTreeMap::new() }
    }

    pub fn with_note(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.notes.insert(key.into(), value.into());
        self
    }

    fn write_csv_header(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# {} {}", self.tool, self.version)?;
        writeln!(w, "# config_hash {}", self.config_hash)?;
        for (k, v) in &self.notes {
            writeln!(w, "# {k} {v}")?;
        }
        Ok(())
    }
}

fn csv_writer<W: Write>(mut w: W, provenance: Option<&Provenance>) -> Result<csv::Writer<W>> {
    if let Some(p) = provenance {
        p.write_csv_header(&mut w)?;
    }
    Ok(csv::WriterBuilder::new().from_writer(w))
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Parse(format!("{other:?}")),
    }
}

fn with_provenance(mut value: Value, provenance: Option<&Provenance>) -> Result<Value> {
    if let (Some(p), Value::Object(map)) = (provenance, &mut value) {
        map.insert("provenance".into(), serde_json::to_value(p)?);
    }
    Ok(value)
}

fn write_json(w: &mut impl Write, value: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

// ---- loss profile ----

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TailJson {
    Truncate,
    Hold,
    Periodic(usize),
}

#[derive(Serialize, Deserialize)]
struct ProfileJson {
    n_max: usize,
    f: Vec<f64>,
    tail: TailJson,
}

pub fn profile_to_json<T: Real>(profile: &LossProfile<T>, provenance: Option<&Provenance>) -> Result<Value> {
    let tail = match profile.tail() {
        TailRule::Truncate => TailJson::Truncate,
        TailRule::HoldLast => TailJson::Hold,
        TailRule::Periodic(p) => TailJson::Periodic(p),
    };
    let doc = ProfileJson { n_max: profile.n_max(), f: profile.f_values().iter().map(|x| x.to_f64_lossy()).collect(), tail };
    with_provenance(serde_json::to_value(doc)?, provenance)
}

pub fn write_profile<T: Real>(w: &mut impl Write, profile: &LossProfile<T>, provenance: Option<&Provenance>) -> Result<()> {
    write_json(w, &profile_to_json(profile, provenance)?)
}

pub fn read_profile<T: Real>(r: impl Read) -> Result<LossProfile<T>> {
    let doc: ProfileJson = serde_json::from_reader(r)?;
    if doc.f.len() != doc.n_max + 1 {
        return Err(Error::Parse(format!("profile declares n_max = {} but lists {} values of f", doc.n_max, doc.f.len())));
    }
    let tail = match doc.tail {
        TailJson::Truncate => TailRule::Truncate,
        TailJson::Hold => TailRule::HoldLast,
        TailJson::Periodic(p) => TailRule::Periodic(p),
    };
    LossProfile::new(doc.f.into_iter().map(T::lit).collect(), tail)
}

// ---- density matrix ----

#[derive(Serialize, Deserialize)]
struct ElementRow {
    n: usize,
    m: usize,
    re: f64,
    im: f64,
}

/// `n,m,re,im` rows over the lower triangle and diagonal, row-major.
pub fn write_density_csv<T: Real>(w: impl Write, rho: &DensityMatrix<T>, provenance: Option<&Provenance>) -> Result<()> {
    let mut out = csv_writer(w, provenance)?;
    for n in 0..rho.dim() {
        for m in 0..=n {
            let z = rho[(n, m)];
            out.serialize(ElementRow { n, m, re: z.re.to_f64_lossy(), im: z.im.to_f64_lossy() }).map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Inverse of [`write_density_csv`]; the upper triangle is filled by
/// conjugation. Missing rows are zero.
pub fn read_density_csv<T: Real>(r: impl Read) -> Result<DensityMatrix<T>> {
    let rows: Vec<ElementRow> = csv_reader(r).deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)?;
    let dim = rows.iter().map(|e| e.n.max(e.m) + 1).max().unwrap_or(0);
    if dim == 0 {
        return Err(Error::Parse("density matrix CSV has no rows".into()));
    }
    let mut rho = DensityMatrix::zeros(dim);
    for e in rows {
        if e.m > e.n {
            return Err(Error::Parse(format!("row ({}, {}) lies above the diagonal", e.n, e.m)));
        }
        let z = C::new(T::lit(e.re), T::lit(e.im));
        rho[(e.n, e.m)] = z;
        rho[(e.m, e.n)] = z.conj();
    }
    Ok(rho)
}

// ---- trajectories ----

/// `t,n,m,re,im` for every lower-triangle element at every snapshot.
pub fn write_matrix_trajectory_csv<T: Real>(
    w: impl Write,
    trajectory: &Trajectory<T, DensityMatrix<T>>,
    provenance: Option<&Provenance>,
) -> Result<()> {
    let mut out = csv_writer(w, provenance)?;
    out.write_record(["t", "n", "m", "re", "im"]).map_err(csv_err)?;
    for (t, rho) in trajectory.times.iter().zip(&trajectory.states) {
        for n in 0..rho.dim() {
            for m in 0..=n {
                let z = rho[(n, m)];
                out.write_record([
                    t.to_f64_lossy().to_string(),
                    n.to_string(),
                    m.to_string(),
                    z.re.to_f64_lossy().to_string(),
                    z.im.to_f64_lossy().to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// `t,k,n,xi` with `xi` the real phase-stripped band value.
pub fn write_band_trajectory_csv<T: Real>(
    w: impl Write,
    trajectory: &Trajectory<T, DiagonalBand<T>>,
    provenance: Option<&Provenance>,
) -> Result<()> {
    let mut out = csv_writer(w, provenance)?;
    out.write_record(["t", "k", "n", "xi"]).map_err(csv_err)?;
    for (t, band) in trajectory.times.iter().zip(&trajectory.states) {
        for (n, xi) in band.values.iter().enumerate() {
            out.write_record([t.to_f64_lossy().to_string(), band.offset.to_string(), n.to_string(), xi.re.to_f64_lossy().to_string()])
                .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_diagnostics_csv<T: Real, S>(
    w: impl Write,
    trajectory: &Trajectory<T, S>,
    provenance: Option<&Provenance>,
) -> Result<()> {
    let mut out = csv_writer(w, provenance)?;
    out.write_record(["t", "trace_error", "min_xi", "herm_error"]).map_err(csv_err)?;
    for (t, d) in trajectory.times.iter().zip(&trajectory.diagnostics) {
        let Diagnostics { trace_error, min_band_value, hermiticity_error } = *d;
        out.write_record([t, &trace_error, &min_band_value, &hermiticity_error].map(|x| x.to_f64_lossy().to_string()))
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

// ---- stationary report ----

pub fn stationary_report_to_json<T: Real>(report: &StationaryReport<T>, provenance: Option<&Provenance>) -> Result<Value> {
    let support: Vec<[usize; 2]> = report.support.accumulators.iter().map(|a| [a.n, a.k]).collect();
    let rho = &report.rho;
    let mut lower = Vec::with_capacity(rho.dim() * (rho.dim() + 1) / 2);
    for n in 0..rho.dim() {
        for m in 0..=n {
            let z = rho[(n, m)];
            lower.push(json!([n, m, z.re.to_f64_lossy(), z.im.to_f64_lossy()]));
        }
    }
    let coherences: BTreeMap<String, f64> =
        report.coherences.iter().map(|(&(n, m), c)| (format!("{n},{m}"), c.to_f64_lossy())).collect();
    let doc = json!({
        "n_max": report.support.n_max,
        "support": support,
        "rho": lower,
        "purity": report.purity.to_f64_lossy(),
        "coherences": coherences,
        "warnings": report.warnings,
    });
    with_provenance(doc, provenance)
}

pub fn write_stationary_report<T: Real>(
    w: &mut impl Write,
    report: &StationaryReport<T>,
    provenance: Option<&Provenance>,
) -> Result<()> {
    write_json(w, &stationary_report_to_json(report, provenance)?)
}

// ---- sweeps ----

pub fn write_sweep_csv<T: Real>(w: impl Write, rows: &[SweepRow<T>], provenance: Option<&Provenance>) -> Result<()> {
    let mut out = csv_writer(w, provenance)?;
    out.write_record(["r", "coherence", "fidelity", "purity"]).map_err(csv_err)?;
    for row in rows {
        out.write_record([row.r, row.coherence, row.fidelity, row.purity].map(|x| x.to_f64_lossy().to_string()))
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

// ---- elimination ----

#[derive(Serialize, Deserialize)]
struct TermJson {
    m: usize,
    n: usize,
    op: TermKind,
    coeff: [f64; 2],
    /// Row-major `[re, im]` entries of a kept-space matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct ExpansionJson {
    kept_dim: usize,
    lossy_dim: usize,
    gamma: f64,
    terms: Vec<TermJson>,
}

pub fn read_expansion<T: Real>(r: impl Read) -> Result<ModeExpansion<T>> {
    let doc: ExpansionJson = serde_json::from_reader(r)?;
    let mut expansion = ModeExpansion::new(doc.kept_dim, doc.lossy_dim, T::lit(doc.gamma));
    for t in doc.terms {
        let matrix = t.matrix.map(|m| m.into_iter().map(|[re, im]| C::new(T::lit(re), T::lit(im))).collect::<Vec<_>>());
        if let Some(m) = &matrix {
            if m.len() != doc.kept_dim * doc.kept_dim {
                return Err(Error::Parse(format!(
                    "term ({}, {}) matrix has {} entries, expected {}",
                    t.m,
                    t.n,
                    m.len(),
                    doc.kept_dim * doc.kept_dim
                )));
            }
        }
        expansion.terms.push(ExpansionTerm {
            m: t.m,
            n: t.n,
            kind: t.op,
            coeff: C::new(T::lit(t.coeff[0]), T::lit(t.coeff[1])),
            matrix,
        });
    }
    expansion.validate()?;
    Ok(expansion)
}

pub fn expansion_to_json<T: Real>(expansion: &ModeExpansion<T>, provenance: Option<&Provenance>) -> Result<Value> {
    let pair = |z: &C<T>| [z.re.to_f64_lossy(), z.im.to_f64_lossy()];
    let doc = ExpansionJson {
        kept_dim: expansion.kept_dim,
        lossy_dim: expansion.lossy_dim,
        gamma: expansion.gamma.to_f64_lossy(),
        terms: expansion
            .terms
            .iter()
            .map(|t| TermJson {
                m: t.m,
                n: t.n,
                op: t.kind,
                coeff: pair(&t.coeff),
                matrix: t.matrix.as_ref().map(|m| m.iter().map(pair).collect()),
            })
            .collect(),
    };
    with_provenance(serde_json::to_value(doc)?, provenance)
}

pub fn write_reduction_csv(w: impl Write, report: &ReductionReport, provenance: Option<&Provenance>) -> Result<()> {
    let mut out = csv_writer(w, provenance)?;
    out.write_record(["t", "trace_distance"]).map_err(csv_err)?;
    for (t, d) in report.times.iter().zip(&report.trace_distance) {
        out.write_record([t.to_string(), d.to_string()]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}
