//! On-disk JSON representation. Matrices are row-major arrays of arrays and
//! absent blocks mean zero.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::instance::{Dims, Iterate, LowerLevel, MpecInstance, Objective, UpperSet};
use crate::error::{MpecError, Result};
use crate::linalg::{Mat, Vector};

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveFile {
    #[serde(rename = "Hxx", default, skip_serializing_if = "Option::is_none")]
    pub hxx: Option<Rows>,
    #[serde(rename = "Hxy", default, skip_serializing_if = "Option::is_none")]
    pub hxy: Option<Rows>,
    #[serde(rename = "Hyy", default, skip_serializing_if = "Option::is_none")]
    pub hyy: Option<Rows>,
    #[serde(rename = "Hxw", default, skip_serializing_if = "Option::is_none")]
    pub hxw: Option<Rows>,
    #[serde(rename = "Hww", default, skip_serializing_if = "Option::is_none")]
    pub hww: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cx: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cy: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cw: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cz: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LowerFile {
    Lcp {
        q: Vec<f64>,
        #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
        n: Option<Rows>,
        #[serde(rename = "M")]
        m: Rows,
    },
    Affine {
        #[serde(rename = "Ax", default, skip_serializing_if = "Option::is_none")]
        ax: Option<Rows>,
        #[serde(rename = "Ay", default, skip_serializing_if = "Option::is_none")]
        ay: Option<Rows>,
        #[serde(rename = "Aw", default, skip_serializing_if = "Option::is_none")]
        aw: Option<Rows>,
        #[serde(rename = "Az", default, skip_serializing_if = "Option::is_none")]
        az: Option<Rows>,
        b: Vec<f64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpperFile {
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartFile {
    #[serde(default)]
    pub x: Vec<f64>,
    #[serde(default)]
    pub y: Vec<f64>,
    #[serde(default)]
    pub w: Vec<f64>,
    #[serde(default)]
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub l: usize,
    #[serde(default)]
    pub objective: ObjectiveFile,
    pub lower: LowerFile,
    #[serde(default)]
    pub upper: UpperFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<StartFile>,
}

fn matrix(name: &str, rows: &Option<Rows>, r: usize, c: usize) -> Result<Mat> {
    let Some(data) = rows else {
        return Ok(Mat::zeros(r, c));
    };
    // an empty array stands for a block with no rows
    if data.is_empty() && (r == 0 || c == 0) {
        return Ok(Mat::zeros(r, c));
    }
    if data.len() != r || data.iter().any(|row| row.len() != c) {
        return Err(MpecError::Dimension(format!("{name} must be {r}x{c}")));
    }
    Ok(Mat::from_fn(r, c, |i, j| data[i][j]))
}

fn vector(name: &str, v: &Option<Vec<f64>>, len: usize) -> Result<Vector> {
    match v {
        None => Ok(Vector::zeros(len)),
        Some(v) => exact_vector(name, v, len),
    }
}

fn exact_vector(name: &str, v: &[f64], len: usize) -> Result<Vector> {
    if v.len() != len {
        return Err(MpecError::Dimension(format!("{name} must have length {len}")));
    }
    Ok(Vector::from_column_slice(v))
}

fn rows_of(a: &Mat) -> Option<Rows> {
    if a.iter().all(|&v| v == 0.0) {
        return None;
    }
    Some((0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect())
}

fn vec_of(v: &Vector) -> Option<Vec<f64>> {
    if v.iter().all(|&x| x == 0.0) {
        None
    } else {
        Some(v.iter().copied().collect())
    }
}

impl InstanceFile {
    /// Builds the instance, checking every shape. Semantic checks are left to
    /// [`MpecInstance::validate`].
    pub fn to_instance(&self) -> Result<MpecInstance> {
        let d = Dims { n: self.n, m: self.m, l: self.l };
        let (n, m, l) = (d.n, d.m, d.l);
        let o = &self.objective;
        let objective = Objective {
            hxx: matrix("Hxx", &o.hxx, n, n)?,
            hxy: matrix("Hxy", &o.hxy, n, m)?,
            hyy: matrix("Hyy", &o.hyy, m, m)?,
            hxw: matrix("Hxw", &o.hxw, n, m)?,
            hww: matrix("Hww", &o.hww, m, m)?,
            cx: vector("cx", &o.cx, n)?,
            cy: vector("cy", &o.cy, m)?,
            cw: vector("cw", &o.cw, m)?,
            cz: vector("cz", &o.cz, l)?,
            c0: o.c0.unwrap_or(0.0),
        };
        let lower = match &self.lower {
            LowerFile::Lcp { q, n: nm, m: mm } => {
                if l != 0 {
                    return Err(MpecError::Dimension("LCP lower level requires l = 0".into()));
                }
                LowerLevel::Lcp {
                    q: exact_vector("q", q, m)?,
                    n_mat: matrix("N", nm, m, n)?,
                    m_mat: matrix("M", &Some(mm.clone()), m, m)?,
                }
            }
            LowerFile::Affine { ax, ay, aw, az, b } => LowerLevel::Affine {
                ax: matrix("Ax", ax, m + l, n)?,
                ay: matrix("Ay", ay, m + l, m)?,
                aw: matrix("Aw", aw, m + l, m)?,
                az: matrix("Az", az, m + l, l)?,
                b: exact_vector("b", b, m + l)?,
            },
        };
        let k = self.upper.g.as_ref().map_or(0, |g| g.len());
        let upper = UpperSet { g: matrix("G", &self.upper.g, k, n)?, a: vector("a", &self.upper.a, k)? };
        let start = match &self.start {
            None => None,
            Some(s) => Some(Iterate::new(
                exact_vector("start.x", &s.x, n)?,
                exact_vector("start.y", &s.y, m)?,
                exact_vector("start.w", &s.w, m)?,
                exact_vector("start.z", &s.z, l)?,
            )),
        };
        Ok(MpecInstance { dims: d, objective, lower, upper, start })
    }

    pub fn from_instance(inst: &MpecInstance) -> Self {
        let o = &inst.objective;
        let objective = ObjectiveFile {
            hxx: rows_of(&o.hxx),
            hxy: rows_of(&o.hxy),
            hyy: rows_of(&o.hyy),
            hxw: rows_of(&o.hxw),
            hww: rows_of(&o.hww),
            cx: vec_of(&o.cx),
            cy: vec_of(&o.cy),
            cw: vec_of(&o.cw),
            cz: vec_of(&o.cz),
            c0: (o.c0 != 0.0).then_some(o.c0),
        };
        let full = |a: &Mat| Some((0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect::<Rows>());
        let lower = match &inst.lower {
            LowerLevel::Lcp { q, n_mat, m_mat } => LowerFile::Lcp {
                q: q.iter().copied().collect(),
                n: rows_of(n_mat),
                m: full(m_mat).unwrap_or_default(),
            },
            LowerLevel::Affine { ax, ay, aw, az, b } => LowerFile::Affine {
                ax: rows_of(ax),
                ay: rows_of(ay),
                aw: rows_of(aw),
                az: rows_of(az),
                b: b.iter().copied().collect(),
            },
        };
        let upper = if inst.upper.g.nrows() == 0 {
            UpperFile::default()
        } else {
            UpperFile { g: full(&inst.upper.g), a: Some(inst.upper.a.iter().copied().collect()) }
        };
        let start = inst.start.as_ref().map(|s| StartFile {
            x: s.x.iter().copied().collect(),
            y: s.y.iter().copied().collect(),
            w: s.w.iter().copied().collect(),
            z: s.z.iter().copied().collect(),
        });
        InstanceFile { n: inst.n(), m: inst.m(), l: inst.l(), objective, lower, upper, start }
    }
}

impl MpecInstance {
    /// Parses and shape-checks an instance without semantic validation.
    pub fn parse_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.to_instance()
    }

    /// Parses, shape-checks and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        Self::parse_json(text)?.validated()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceFile::from_instance(self))?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| MpecError::InvalidInstance(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
