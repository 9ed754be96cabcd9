//! Versioned JSON model file. Numeric arrays are stored as base64 of their
//! little-endian IEEE-754 bytes in column-major order, next to their shape.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FittedModel;
use crate::data::ColumnScaling;
use crate::error::{Error, Result};
use crate::optimizer::{FitConfig, ModelState};
use crate::outcome::{ClassLabels, OutcomeMeta};
use crate::randfeatures::RandomFeatureMap;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Array {
    shape: [usize; 2],
    data: String,
}

impl Array {
    fn from_slice(rows: usize, cols: usize, values: &[f64]) -> Self {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self {
            shape: [rows, cols],
            data: STANDARD.encode(bytes),
        }
    }

    fn matrix(m: &DMatrix<f64>) -> Self {
        Self::from_slice(m.nrows(), m.ncols(), m.as_slice())
    }

    fn vector(v: &[f64]) -> Self {
        Self::from_slice(v.len(), 1, v)
    }

    fn decode(&self, name: &str) -> Result<Vec<f64>> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::ModelFormat(format!("{name}: {e}")))?;
        let expected = self.shape[0]
            .checked_mul(self.shape[1])
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::ModelFormat(format!("{name}: shape overflow")))?;
        if bytes.len() != expected {
            return Err(Error::ModelFormat(format!(
                "{name}: {} bytes for shape {:?}",
                bytes.len(),
                self.shape
            )));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }

    fn to_matrix(&self, name: &str) -> Result<DMatrix<f64>> {
        let values = self.decode(name)?;
        Ok(DMatrix::from_vec(self.shape[0], self.shape[1], values))
    }

    fn to_vector(&self, name: &str) -> Result<DVector<f64>> {
        if self.shape[1] != 1 {
            return Err(Error::ModelFormat(format!("{name}: expected a column vector")));
        }
        Ok(DVector::from_vec(self.decode(name)?))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum OutcomeDoc {
    Continuous { means: Array },
    Multi { means: Array },
    Categorical { scores: Array, n_classes: usize, train_labels: Vec<usize> },
}

#[derive(Debug, Serialize, Deserialize)]
struct ViewDoc {
    nu: f64,
    gamma: Array,
    epsilon: Array,
    b: Array,
    #[serde(rename = "A")]
    loadings: Array,
    scaling: Option<ScalingDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScalingDoc {
    means: Array,
    sds: Array,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    config: FitConfig,
    outcome_meta: OutcomeDoc,
    views: Vec<ViewDoc>,
    #[serde(rename = "G")]
    shared: Array,
    #[serde(rename = "Theta")]
    theta: Array,
    #[serde(rename = "U_train")]
    u_train: Array,
    labels: Vec<String>,
    objective_trace: Array,
    orthonormality_trace: Array,
    converged: bool,
}

impl ModelDoc {
    fn from_model(model: &FittedModel) -> Self {
        let s = &model.state;
        let outcome_meta = match &s.outcome {
            OutcomeMeta::Continuous { means, multi: false } => OutcomeDoc::Continuous {
                means: Array::vector(means),
            },
            OutcomeMeta::Continuous { means, multi: true } => OutcomeDoc::Multi {
                means: Array::vector(means),
            },
            OutcomeMeta::Categorical {
                scores,
                train_labels,
            } => OutcomeDoc::Categorical {
                scores: Array::matrix(scores),
                n_classes: train_labels.n_classes(),
                train_labels: train_labels.labels().to_vec(),
            },
        };
        let views = s
            .maps
            .iter()
            .zip(&s.loadings)
            .enumerate()
            .map(|(d, (map, a))| ViewDoc {
                nu: map.bandwidth,
                gamma: Array::vector(map.gamma.as_slice()),
                epsilon: Array::matrix(&map.epsilon),
                b: Array::vector(map.offsets.as_slice()),
                loadings: Array::matrix(a),
                scaling: model.scalings.as_ref().map(|sc| ScalingDoc {
                    means: Array::vector(&sc[d].means),
                    sds: Array::vector(&sc[d].sds),
                }),
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            config: model.config.clone(),
            outcome_meta,
            views,
            shared: Array::matrix(&s.shared),
            theta: Array::matrix(&s.theta),
            u_train: Array::matrix(&model.u_train),
            labels: model.class_names.clone(),
            objective_trace: Array::vector(&s.objective_trace),
            orthonormality_trace: Array::vector(&s.orthonormality_trace),
            converged: s.converged,
        }
    }

    fn into_model(self) -> Result<FittedModel> {
        let outcome = match self.outcome_meta {
            OutcomeDoc::Continuous { means } => OutcomeMeta::Continuous {
                means: means.decode("means")?,
                multi: false,
            },
            OutcomeDoc::Multi { means } => OutcomeMeta::Continuous {
                means: means.decode("means")?,
                multi: true,
            },
            OutcomeDoc::Categorical {
                scores,
                n_classes,
                train_labels,
            } => OutcomeMeta::Categorical {
                scores: scores.to_matrix("scores")?,
                train_labels: ClassLabels::new(train_labels, n_classes)?,
            },
        };
        let shared = self.shared.to_matrix("G")?;
        let theta = self.theta.to_matrix("Theta")?;
        let u_train = self.u_train.to_matrix("U_train")?;
        let (n, r) = shared.shape();
        let q = outcome.response_width();
        if theta.shape() != (r, q) || u_train.shape() != (n, q) {
            return Err(Error::ModelFormat(format!(
                "G {:?}, Theta {:?}, U_train {:?} are inconsistent",
                shared.shape(),
                theta.shape(),
                u_train.shape()
            )));
        }
        if let OutcomeMeta::Categorical { train_labels, .. } = &outcome {
            if train_labels.len() != n {
                return Err(Error::ModelFormat("label count differs from G rows".into()));
            }
        }

        let mut maps = Vec::with_capacity(self.views.len());
        let mut loadings = Vec::with_capacity(self.views.len());
        let mut scalings = Vec::new();
        for (d, v) in self.views.into_iter().enumerate() {
            let epsilon = v.epsilon.to_matrix("epsilon")?;
            let offsets = v.b.to_vector("b")?;
            let gamma = v.gamma.to_vector("gamma")?;
            let a = v.loadings.to_matrix("A")?;
            let (m, p) = epsilon.shape();
            if offsets.len() != m || gamma.len() != p || a.shape() != (m, r) {
                return Err(Error::ModelFormat(format!("view {} arrays are inconsistent", d + 1)));
            }
            if let Some(sc) = v.scaling {
                let means = sc.means.decode("scaling means")?;
                let sds = sc.sds.decode("scaling sds")?;
                if means.len() != p || sds.len() != p {
                    return Err(Error::ModelFormat(format!("view {} scaling has wrong length", d + 1)));
                }
                scalings.push(ColumnScaling { means, sds });
            }
            maps.push(RandomFeatureMap {
                epsilon,
                offsets,
                bandwidth: v.nu,
                gamma,
            });
            loadings.push(a);
        }
        if maps.is_empty() {
            return Err(Error::ModelFormat("model has no views".into()));
        }
        let scalings = match scalings.len() {
            0 => None,
            k if k == maps.len() => Some(scalings),
            _ => return Err(Error::ModelFormat("scaling present for only some views".into())),
        };

        Ok(FittedModel {
            state: ModelState {
                shared,
                loadings,
                theta,
                maps,
                objective_trace: self.objective_trace.decode("objective_trace")?,
                orthonormality_trace: self.orthonormality_trace.decode("orthonormality_trace")?,
                converged: self.converged,
                outcome,
            },
            config: self.config,
            scalings,
            u_train,
            class_names: self.labels,
        })
    }
}

/// Canonical serialized form; saving a loaded model reproduces it byte for byte.
pub fn to_json(model: &FittedModel) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&ModelDoc::from_model(model))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<FittedModel> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::ModelFormat("missing format_version".into()))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(Error::FormatVersionMismatch {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let doc: ModelDoc = serde_json::from_value(value)?;
    doc.into_model()
}

pub fn save_model(model: &FittedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FittedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MultiviewDataset;
    use crate::linalg::standard_normal;
    use crate::outcome::Outcome;
    use crate::seed;

    fn model(categorical: bool) -> (MultiviewDataset, FittedModel) {
        let mut r = seed::rng(3, "persist-test", 0);
        let x1 = standard_normal(24, 3, &mut r);
        let x2 = standard_normal(24, 2, &mut r);
        let outcome = if categorical {
            Outcome::Categorical(ClassLabels::new((0..24).map(|i| i % 3).collect(), 3).unwrap())
        } else {
            Outcome::Continuous(x1.column(0).into_owned())
        };
        let data = MultiviewDataset::new(vec![x1, x2], outcome).unwrap();
        let config = FitConfig {
            n_features: 12,
            n_components: 2,
            max_outer_iter: 4,
            ..FitConfig::default()
        };
        let m = FittedModel::fit_standardized(&data, &config)
            .unwrap()
            .with_class_names(vec!["a".into(), "b".into(), "c".into()]);
        (data, m)
    }

    #[test]
    fn round_trip_is_exact_and_canonical() {
        for categorical in [false, true] {
            let (data, m) = model(categorical);
            let text = to_json(&m).unwrap();
            let back = from_json(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(to_json(&back).unwrap(), text);
            assert_eq!(back.predict(&data.views).unwrap(), m.predict(&data.views).unwrap());
        }
    }

    #[test]
    fn files_round_trip() {
        let (_, m) = model(false);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&m, &path).unwrap();
        let first = fs::read(&path).unwrap();
        save_model(&load_model(&path).unwrap(), &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn corrupted_input_is_rejected() {
        let (_, m) = model(true);
        let text = to_json(&m).unwrap();
        let wrong_version = text.replacen("\"format_version\": 1", "\"format_version\": 7", 1);
        assert!(matches!(
            from_json(&wrong_version),
            Err(Error::FormatVersionMismatch { found: 7, expected: 1 })
        ));
        assert!(from_json(&text[..text.len() / 2]).is_err());
        let idx = text.find("\"data\": \"").unwrap() + 9;
        let mut broken = text.clone();
        broken.replace_range(idx..idx + 4, "!!!!");
        assert!(matches!(from_json(&broken), Err(Error::ModelFormat(_))));
        assert!(matches!(load_model("/nonexistent/model.json"), Err(Error::Io { .. })));
    }
}
