//! Kinematic dexterity: condition, manipulability, and joint-limit terms per
//! configuration, with min-max normalization into a composite where lower is
//! uniformly better.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::chain::{ChainDesign, JointVector};
use crate::data::PoseCloud;
use crate::design::{solve_cloud, CostSettings};
use crate::error::{Error, Result};
use crate::ik::to_dmatrix;

/// Eigenvalues of `J J^T` below this make the condition term infinite.
pub const SINGULAR_EIGENVALUE: f64 = 1e-12;

/// Raw dexterity terms at one configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointDexterity {
    /// `lambda_max / lambda_min - 1` of `J J^T`; `+inf` when singular.
    pub condition: f64,
    /// `det(J J^T)`.
    pub manipulability: f64,
    /// `sum_j ((q_j - hi_j)^2 + (q_j - lo_j)^2) / (hi_j - lo_j)^2`.
    pub joint_limit: f64,
}

impl PointDexterity {
    /// The unnormalized sum of the three terms.
    pub fn raw_sum(&self) -> f64 {
        self.condition + self.manipulability + self.joint_limit
    }

    /// Terms oriented so that lower is better.
    fn oriented(&self) -> [f64; 3] {
        [self.condition, -self.manipulability, self.joint_limit]
    }

    /// Element-wise mean, used to fold several arms into one sample.
    pub fn mean(points: &[PointDexterity]) -> PointDexterity {
        let n = points.len() as f64;
        PointDexterity {
            condition: points.iter().map(|p| p.condition).sum::<f64>() / n,
            manipulability: points.iter().map(|p| p.manipulability).sum::<f64>() / n,
            joint_limit: points.iter().map(|p| p.joint_limit).sum::<f64>() / n,
        }
    }
}

pub fn joint_limit_term(q: &JointVector, limits: &[(f64, f64)]) -> Result<f64> {
    if q.len() != limits.len() {
        return Err(Error::DimensionMismatch {
            expected: limits.len(),
            actual: q.len(),
        });
    }
    Ok(q.iter()
        .zip(limits)
        .map(|(q, (lo, hi))| ((q - hi).powi(2) + (q - lo).powi(2)) / (hi - lo).powi(2))
        .sum())
}

/// Terms for a `6 x n` Jacobian at configuration `q`.
pub fn evaluate_point(j: &DMatrix<f64>, q: &JointVector, limits: &[(f64, f64)]) -> Result<PointDexterity> {
    if j.nrows() != 6 || j.ncols() < 6 {
        return Err(Error::InvalidInput(format!("expected a 6 x n Jacobian with n >= 6, got {:?}", j.shape())));
    }
    if j.ncols() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: j.ncols(),
            actual: q.len(),
        });
    }
    let jjt = j * j.transpose();
    let jjt = (&jjt + jjt.transpose()) * 0.5;
    let eig = SymmetricEigen::new(jjt);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min < SINGULAR_EIGENVALUE {
        f64::INFINITY
    } else {
        max / min - 1.0
    };
    let manipulability = eig.eigenvalues.iter().map(|l| l.max(0.0)).product();
    Ok(PointDexterity {
        condition,
        manipulability,
        joint_limit: joint_limit_term(q, limits)?,
    })
}

/// Per-term ranges used for min-max normalization. Build them from every
/// trace being compared so the composites share one scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationBounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl NormalizationBounds {
    /// Ranges over the finite values of every point. Terms with no finite
    /// value get an empty range.
    pub fn from_points<'a, I: IntoIterator<Item = &'a PointDexterity>>(points: I) -> Self {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in points {
            for (k, v) in p.oriented().into_iter().enumerate() {
                if v.is_finite() {
                    min[k] = min[k].min(v);
                    max[k] = max[k].max(v);
                }
            }
        }
        for k in 0..3 {
            if min[k] > max[k] {
                min[k] = 0.0;
                max[k] = 0.0;
            }
        }
        NormalizationBounds { min, max }
    }

    /// Normalized oriented terms in `[0, 1]`: `+inf` maps to 1 and a
    /// degenerate range maps to 0.
    pub fn normalize(&self, p: &PointDexterity) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, v) in p.oriented().into_iter().enumerate() {
            let range = self.max[k] - self.min[k];
            out[k] = if v == f64::INFINITY {
                1.0
            } else if range <= f64::EPSILON * self.max[k].abs().max(self.min[k].abs()).max(1e-300) {
                0.0
            } else {
                ((v - self.min[k]) / range).clamp(0.0, 1.0)
            };
        }
        out
    }

    pub fn composite(&self, p: &PointDexterity) -> f64 {
        self.normalize(p).iter().sum::<f64>() / 3.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregates {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregates {
    /// Population statistics; empty input gives NaNs.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Aggregates {
                mean: f64::NAN,
                std: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Aggregates {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DexterityReport {
    pub points: Vec<PointDexterity>,
    pub composite: Vec<f64>,
    pub bounds: NormalizationBounds,
    pub summary: ReportSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub condition: Aggregates,
    pub manipulability: Aggregates,
    pub joint_limit: Aggregates,
    pub composite: Aggregates,
}

impl DexterityReport {
    /// Normalizes over the points themselves.
    pub fn new(points: Vec<PointDexterity>) -> Self {
        let bounds = NormalizationBounds::from_points(&points);
        Self::with_bounds(points, bounds)
    }

    pub fn with_bounds(points: Vec<PointDexterity>, bounds: NormalizationBounds) -> Self {
        let composite: Vec<f64> = points.iter().map(|p| bounds.composite(p)).collect();
        let column = |f: fn(&PointDexterity) -> f64| -> Vec<f64> { points.iter().map(f).collect() };
        let summary = ReportSummary {
            condition: Aggregates::of(&column(|p| p.condition)),
            manipulability: Aggregates::of(&column(|p| p.manipulability)),
            joint_limit: Aggregates::of(&column(|p| p.joint_limit)),
            composite: Aggregates::of(&composite),
        };
        DexterityReport {
            points,
            composite,
            bounds,
            summary,
        }
    }

    /// `index,condition,manipulability,joint_limit,raw_sum,composite`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,condition,manipulability,joint_limit,raw_sum,composite\n");
        for (i, (p, c)) in self.points.iter().zip(&self.composite).enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i,
                p.condition,
                p.manipulability,
                p.joint_limit,
                p.raw_sum(),
                c
            ));
        }
        s
    }
}

/// Reports for several traces normalized on their pooled range.
pub fn jointly_normalized(traces: Vec<Vec<PointDexterity>>) -> Vec<DexterityReport> {
    let bounds = NormalizationBounds::from_points(traces.iter().flatten());
    traces
        .into_iter()
        .map(|t| DexterityReport::with_bounds(t, bounds))
        .collect()
}

/// Raw terms of a chain at each configuration.
pub fn evaluate_configurations(chain: &ChainDesign, qs: &[JointVector]) -> Result<Vec<PointDexterity>> {
    let limits = chain.limits();
    qs.iter()
        .map(|q| evaluate_point(&to_dmatrix(&chain.spatial_jacobian(q)?), q, &limits))
        .collect()
}

/// Raw terms at the IK solutions of a cloud anchored at the chain's home.
pub fn evaluate_cloud(chain: &ChainDesign, cloud: &PoseCloud, settings: &CostSettings) -> Result<Vec<PointDexterity>> {
    let qs: Vec<JointVector> = solve_cloud(chain, cloud, settings)?.into_iter().map(|r| r.q).collect();
    evaluate_configurations(chain, &qs)
}
