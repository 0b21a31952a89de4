//! Trajectory export: plot-ready CSV and full-bundle JSON.
//!
//! CSV complex columns come in pairs suffixed `_re` / `_im`. The JSON bundle
//! uses the scenario convention (`[re, im]` pairs, matrices as row arrays)
//! and round-trips bit-exactly.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::EvolutionBundle;
use crate::matops::{CMatrix, CVector};
use crate::model::scenario::{ComplexPair, MatrixRows};
use crate::model::Scenario;
use crate::representations::expectation_s;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("bundle JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed bundle: {0}")]
    Malformed(String),
    #[error("observable `{name}`: {message}")]
    Observable { name: String, message: String },
}

/// Extra columns beyond the observable expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// `⟨⟨ψ|ψ⟩⟩ = ψ†Gψ`.
    Norm,
    Psi,
    Metric,
    RightProp,
    LeftProp,
    Vielbein,
}

impl Quantity {
    pub fn parse(name: &str) -> Option<Quantity> {
        Some(match name {
            "norm" => Quantity::Norm,
            "psi" => Quantity::Psi,
            "g" | "G" => Quantity::Metric,
            "u_r" | "U_R" => Quantity::RightProp,
            "u_l" | "U_L" => Quantity::LeftProp,
            "e" | "E" => Quantity::Vielbein,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleFile {
    pub grid: Vec<f64>,
    pub u_r: Vec<MatrixRows>,
    pub u_l: Vec<MatrixRows>,
    pub g: Vec<MatrixRows>,
    pub e: Vec<MatrixRows>,
    pub psi: Vec<Vec<ComplexPair>>,
}

fn rows(m: &CMatrix) -> MatrixRows {
    m.rows().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn matrix(r: &MatrixRows) -> Result<CMatrix, ExportError> {
    let dim = r.len();
    let mut data = Vec::with_capacity(dim * dim);
    for row in r {
        if row.len() != dim {
            return Err(ExportError::Malformed("ragged matrix".into()));
        }
        data.extend(row.iter().map(|&[re, im]| Complex64::new(re, im)));
    }
    CMatrix::new(dim, data).map_err(|e| ExportError::Malformed(e.to_string()))
}

impl EvolutionBundle {
    pub fn to_file(&self) -> BundleFile {
        BundleFile {
            grid: self.grid.clone(),
            u_r: self.u_r.iter().map(rows).collect(),
            u_l: self.u_l.iter().map(rows).collect(),
            g: self.g.iter().map(rows).collect(),
            e: self.e.iter().map(rows).collect(),
            psi: self.psi.iter().map(|v| v.as_slice().iter().map(|z| [z.re, z.im]).collect()).collect(),
        }
    }

    pub fn from_file(f: &BundleFile) -> Result<EvolutionBundle, ExportError> {
        let n = f.grid.len();
        if n == 0 {
            return Err(ExportError::Malformed("empty grid".into()));
        }
        if [f.u_r.len(), f.u_l.len(), f.g.len(), f.e.len(), f.psi.len()].iter().any(|&l| l != n) {
            return Err(ExportError::Malformed("channel lengths differ from grid".into()));
        }
        let conv = |v: &Vec<MatrixRows>| v.iter().map(matrix).collect::<Result<Vec<_>, _>>();
        let bundle = EvolutionBundle {
            grid: f.grid.clone(),
            u_r: conv(&f.u_r)?,
            u_l: conv(&f.u_l)?,
            g: conv(&f.g)?,
            e: conv(&f.e)?,
            psi: f
                .psi
                .iter()
                .map(|v| {
                    CVector::new(v.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
                        .map_err(|e| ExportError::Malformed(e.to_string()))
                })
                .collect::<Result<_, _>>()?,
        };
        let dim = bundle.g[0].dim();
        let consistent = bundle.u_r.iter().chain(&bundle.u_l).chain(&bundle.g).chain(&bundle.e).all(|m| m.dim() == dim)
            && bundle.psi.iter().all(|v| v.dim() == dim);
        if !consistent {
            return Err(ExportError::Malformed("inconsistent dimensions".into()));
        }
        Ok(bundle)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<EvolutionBundle, ExportError> {
        Self::from_file(&serde_json::from_str(text)?)
    }
}

fn push_complex(line: &mut String, z: Complex64) {
    let _ = write!(line, ",{},{}", z.re, z.im);
}

/// CSV with column `t`, then `<observable>_re,<observable>_im` for every
/// scenario observable (Schrödinger-picture expectation), then the requested
/// extra quantities flattened row-major.
pub fn trajectory_csv(
    bundle: &EvolutionBundle,
    scenario: &Scenario,
    extras: &[Quantity],
) -> Result<String, ExportError> {
    let dim = bundle.dim();
    let mut out = String::from("t");
    for name in scenario.observables.keys() {
        let _ = write!(out, ",{name}_re,{name}_im");
    }
    for q in extras {
        let prefix = match q {
            Quantity::Norm => {
                out.push_str(",norm_re,norm_im");
                continue;
            }
            Quantity::Psi => {
                for i in 0..dim {
                    let _ = write!(out, ",psi_{i}_re,psi_{i}_im");
                }
                continue;
            }
            Quantity::Metric => "g",
            Quantity::RightProp => "u_r",
            Quantity::LeftProp => "u_l",
            Quantity::Vielbein => "e",
        };
        for r in 0..dim {
            for c in 0..dim {
                let _ = write!(out, ",{prefix}_{r}{c}_re,{prefix}_{r}{c}_im");
            }
        }
    }
    out.push('\n');

    for (k, &t) in bundle.grid.iter().enumerate() {
        let mut line = format!("{t}");
        for (name, obs) in &scenario.observables {
            let o = obs
                .at(t)
                .map_err(|e| ExportError::Observable { name: name.clone(), message: e.to_string() })?;
            let v = expectation_s(bundle, k, &o)
                .map_err(|e| ExportError::Observable { name: name.clone(), message: e.to_string() })?;
            push_complex(&mut line, v);
        }
        for q in extras {
            let m = match q {
                Quantity::Norm => {
                    let v = expectation_s(bundle, k, &CMatrix::identity(dim))
                        .map_err(|e| ExportError::Malformed(e.to_string()))?;
                    push_complex(&mut line, v);
                    continue;
                }
                Quantity::Psi => {
                    for &z in bundle.psi[k].as_slice() {
                        push_complex(&mut line, z);
                    }
                    continue;
                }
                Quantity::Metric => &bundle.g[k],
                Quantity::RightProp => &bundle.u_r[k],
                Quantity::LeftProp => &bundle.u_l[k],
                Quantity::Vielbein => &bundle.e[k],
            };
            for &z in m.as_slice() {
                push_complex(&mut line, z);
            }
        }
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}
