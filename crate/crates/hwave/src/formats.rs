//! On-disk formats: space and net files (JSON), ω-sample systems (JSON),
//! spline tables and boundary studies (TSV), matrices as CSV triplets and
//! wavelet bases (JSON).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hwave_core::nets::verify_nets;
use hwave_core::order::build_reference_order;
use hwave_core::randomized::BoundaryEstimate;
use hwave_core::wavelets::Member;
use hwave_core::{FiniteSpace, NetHierarchy, RandomizedSystem, ReferenceOrder, SplineTable, WaveletBasis};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] hwave_core::Error),
    #[error("invalid file: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes `contents`, creating parent directories.
pub fn write(path: &Path, contents: &str) -> Result<()> {
    let io = |source| FormatError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io)?;
        }
    }
    fs::write(path, contents).map_err(io)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Explicit,
    Euclidean,
    /// Euclidean distance of the coordinates raised to the power `r`.
    Power,
}

/// Space file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub metric: MetricKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default = "unit_scale")]
    pub scale: f64,
    pub weights: Vec<f64>,
}

fn unit_scale() -> f64 {
    1.0
}

impl SpaceFile {
    /// Explicit-matrix description of a space.
    pub fn from_space(space: &FiniteSpace) -> Self {
        let n = space.n();
        Self {
            name: Some(space.name().to_string()),
            n,
            metric: MetricKind::Explicit,
            distances: Some((0..n).map(|i| (0..n).map(|j| space.dist(i, j)).collect()).collect()),
            coords: None,
            r: None,
            scale: 1.0,
            weights: space.weights().to_vec(),
        }
    }

    pub fn to_space(&self) -> Result<FiniteSpace> {
        let n = self.n;
        let name = self.name.clone().unwrap_or_else(|| "file".to_string());
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(FormatError::Invalid("scale must be positive".into()));
        }
        let scale = self.scale;
        let coords = |what: &str| -> Result<Vec<Vec<f64>>> {
            let c = self
                .coords
                .clone()
                .ok_or_else(|| FormatError::Invalid(format!("`coords` is required for the {what} metric")))?;
            if c.len() != n {
                return Err(FormatError::Invalid(format!("expected {n} coordinate rows, got {}", c.len())));
            }
            Ok(c)
        };
        let euclid = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let space = match self.metric {
            MetricKind::Explicit => {
                let rows = self
                    .distances
                    .as_ref()
                    .ok_or_else(|| FormatError::Invalid("`distances` is required for the explicit metric".into()))?;
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(FormatError::Invalid(format!("`distances` must be {n} rows of {n} values")));
                }
                let flat = rows.iter().flatten().map(|&d| d * scale).collect();
                FiniteSpace::from_matrix(name, n, flat, self.weights.clone())?
            }
            MetricKind::Euclidean => {
                FiniteSpace::from_coords(name, coords("euclidean")?, self.weights.clone(), |a, b| scale * euclid(a, b))?
            }
            MetricKind::Power => {
                let r = self
                    .r
                    .ok_or_else(|| FormatError::Invalid("`r` is required for the power metric".into()))?;
                if r.is_nan() || r <= 0.0 {
                    return Err(FormatError::Invalid("`r` must be positive".into()));
                }
                FiniteSpace::from_coords(name, coords("power")?, self.weights.clone(), |a, b| {
                    scale * euclid(a, b).powf(r)
                })?
            }
        };
        Ok(space)
    }
}

pub fn parse_space(text: &str) -> Result<FiniteSpace> {
    serde_json::from_str::<SpaceFile>(text)?.to_space()
}

pub fn load_space(path: &Path) -> Result<FiniteSpace> {
    parse_space(&read(path)?)
}

pub fn space_json(space: &FiniteSpace) -> String {
    serde_json::to_string_pretty(&SpaceFile::from_space(space)).expect("space serializes")
}

/// Net hierarchy with its reference order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetFile {
    pub delta: f64,
    pub a0: f64,
    pub n: usize,
    pub k_coarse: i32,
    pub k_fine: i32,
    /// Point ids of `𝒳^k` for `k = k_coarse..=k_fine`.
    pub levels: Vec<Vec<usize>>,
    /// Per step `k`, the parent in `𝒳^k` of every node of `𝒳^{k+1}`.
    pub parents: Vec<Vec<usize>>,
    pub label1: Vec<Vec<usize>>,
    pub label2: Vec<Vec<usize>>,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "M")]
    pub m: usize,
}

impl NetFile {
    pub fn new(h: &NetHierarchy, order: &ReferenceOrder) -> Self {
        let steps: Vec<i32> = h.step_range().collect();
        Self {
            delta: h.delta(),
            a0: h.a0(),
            n: h.n(),
            k_coarse: h.k_coarse(),
            k_fine: h.k_fine(),
            levels: h.levels().to_vec(),
            parents: order.parents().to_vec(),
            label1: steps
                .iter()
                .map(|&k| (0..h.level(k).len()).map(|a| order.label1(k, a)).collect())
                .collect(),
            label2: steps
                .iter()
                .map(|&k| (0..h.level(k + 1).len()).map(|b| order.label2(k, b)).collect())
                .collect(),
            l: order.l(),
            m: order.m(),
        }
    }

    /// Rebuilds the hierarchy and order, rejecting files whose nets fail
    /// their geometric checks or whose order differs from the rebuilt one.
    pub fn load(&self, space: &FiniteSpace) -> Result<(NetHierarchy, ReferenceOrder)> {
        if self.n != space.n() {
            return Err(FormatError::Invalid(format!(
                "net file has {} points, space has {}",
                self.n,
                space.n()
            )));
        }
        if self.k_fine - self.k_coarse + 1 != self.levels.len() as i32 {
            return Err(FormatError::Invalid("level count does not match k range".into()));
        }
        let h = NetHierarchy::from_parts(self.delta, self.a0, self.n, self.k_coarse, self.levels.clone())?;
        let report = verify_nets(space, &h);
        if let Some(c) = report.failures().next() {
            return Err(FormatError::Invalid(format!("net invariant `{}` fails: {}", c.name, c.detail)));
        }
        let order = build_reference_order(space, &h)?;
        if NetFile::new(&h, &order) != *self {
            return Err(FormatError::Invalid(
                "parents or labels differ from the reference order of these nets".into(),
            ));
        }
        Ok((h, order))
    }
}

pub fn load_nets(path: &Path, space: &FiniteSpace) -> Result<(NetHierarchy, ReferenceOrder)> {
    serde_json::from_str::<NetFile>(&read(path)?)?.load(space)
}

pub fn nets_json(h: &NetHierarchy, order: &ReferenceOrder) -> String {
    serde_json::to_string_pretty(&NetFile::new(h, order)).expect("nets serialize")
}

/// One `ω` sample: coordinates, new points, parents and cube maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub seed: u64,
    pub sample: u64,
    pub k_coarse: i32,
    /// `(l, m)` per step.
    pub omega: Vec<(usize, usize)>,
    pub z: Vec<Vec<usize>>,
    pub parents: Vec<Vec<usize>>,
    /// Per level, the cube index of every point.
    pub cubes: Vec<Vec<usize>>,
}

pub fn system_json(h: &NetHierarchy, sys: &RandomizedSystem) -> String {
    let file = SystemFile {
        seed: sys.omega.seed,
        sample: sys.omega.sample,
        k_coarse: h.k_coarse(),
        omega: h.step_range().map(|k| sys.omega.coord(k)).collect(),
        z: h.level_range().map(|k| sys.z_level(k).to_vec()).collect(),
        parents: sys.parents().to_vec(),
        cubes: h.level_range().map(|k| sys.cube_map(k).to_vec()).collect(),
    };
    serde_json::to_string_pretty(&file).expect("system serializes")
}

/// Columns `level, alpha_id, point_id, value`; `alpha_id` is the point id
/// of the net point.
pub fn splines_tsv(h: &NetHierarchy, table: &SplineTable) -> String {
    let mut out = String::from("level\talpha_id\tpoint_id\tvalue\n");
    for k in h.level_range() {
        let s = table.level(k);
        for (a, &id) in h.level(k).iter().enumerate() {
            for x in 0..h.n() {
                writeln!(out, "{k}\t{id}\t{x}\t{:e}", s[(a, x)]).unwrap();
            }
        }
    }
    out
}

/// Parses [`splines_tsv`] output into `(level, alpha_id, point_id, value)`.
pub fn parse_splines_tsv(text: &str) -> Result<Vec<(i32, usize, usize, f64)>> {
    let bad = |line: usize| FormatError::Invalid(format!("spline table line {line} is malformed"));
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(bad(i + 1));
            }
            Ok((
                f[0].parse().map_err(|_| bad(i + 1))?,
                f[1].parse().map_err(|_| bad(i + 1))?,
                f[2].parse().map_err(|_| bad(i + 1))?,
                f[3].parse().map_err(|_| bad(i + 1))?,
            ))
        })
        .collect()
}

/// `row,col,value` for every nonzero entry.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::from("row,col,value\n");
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 {
                writeln!(out, "{i},{j},{v:e}").unwrap();
            }
        }
    }
    out
}

pub fn parse_matrix_csv(text: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(rows, cols);
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || FormatError::Invalid(format!("matrix line {} is malformed", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(bad());
        }
        let r: usize = f[0].trim().parse().map_err(|_| bad())?;
        let c: usize = f[1].trim().parse().map_err(|_| bad())?;
        if r >= rows || c >= cols {
            return Err(bad());
        }
        m[(r, c)] = f[2].trim().parse().map_err(|_| bad())?;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisMember {
    /// `"coarse"` or `"wavelet"`.
    pub kind: String,
    pub level: i32,
    pub center: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisFile {
    pub n: usize,
    pub delta: f64,
    pub k_coarse: i32,
    pub k_fine: i32,
    pub weights: Vec<f64>,
    pub members: Vec<BasisMember>,
}

impl BasisFile {
    pub fn new(basis: &WaveletBasis) -> Self {
        let members = basis
            .members()
            .iter()
            .enumerate()
            .map(|(i, m)| BasisMember {
                kind: match m {
                    Member::Coarse { .. } => "coarse".into(),
                    Member::Wavelet { .. } => "wavelet".into(),
                },
                level: m.level().unwrap_or(basis.k_coarse()),
                center: m.center(),
                values: basis.matrix().row(i).iter().copied().collect(),
            })
            .collect();
        Self {
            n: basis.n(),
            delta: basis.delta(),
            k_coarse: basis.k_coarse(),
            k_fine: basis.k_fine(),
            weights: basis.weights().to_vec(),
            members,
        }
    }

    /// Member matrix, one row per member.
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        if self.members.len() != self.n || self.members.iter().any(|m| m.values.len() != self.n) {
            return Err(FormatError::Invalid(format!("basis must have {0} members of length {0}", self.n)));
        }
        Ok(DMatrix::from_fn(self.n, self.n, |i, x| self.members[i].values[x]))
    }
}

pub fn basis_json(basis: &WaveletBasis) -> String {
    serde_json::to_string_pretty(&BasisFile::new(basis)).expect("basis serializes")
}

/// Columns `x, eps, estimate, stderr, theory_bound`.
pub fn boundary_tsv(rows: &[BoundaryEstimate]) -> String {
    let mut out = String::from("x\teps\testimate\tstderr\ttheory_bound\n");
    for r in rows {
        writeln!(out, "{}\t{}\t{}\t{}\t{}", r.x, r.eps, r.estimate, r.stderr, r.theory_bound).unwrap();
    }
    out
}
