//! JSON form `{"family": ..., "dimension": d, "params": {...}}` of a [`SymbolSpec`].

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Atom, Family, LevyMeasureSpec, LevyTriplet, MeasureDescriptor, Subordinator, SymbolSpec};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolDocument {
    pub family: String,
    pub dimension: usize,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubordinatorDocument {
    Deterministic,
    Stable { kappa: f64 },
    Gamma { shape: f64, rate: f64 },
    InverseGaussian { delta: f64, gamma: f64 },
}

impl SubordinatorDocument {
    pub fn to_subordinator(&self) -> Subordinator {
        match *self {
            SubordinatorDocument::Deterministic => Subordinator::Deterministic,
            SubordinatorDocument::Stable { kappa } => Subordinator::Stable { kappa },
            SubordinatorDocument::Gamma { shape, rate } => Subordinator::Gamma { shape, rate },
            SubordinatorDocument::InverseGaussian { delta, gamma } => Subordinator::InverseGaussian { delta, gamma },
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BrownianParams {
    #[serde(rename = "Q", default)]
    q: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    b: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StableParams {
    alpha: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RelativisticParams {
    m: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TemperedParams {
    alpha: f64,
    lambda: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomParams {
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubordinatedParams {
    subordinator: SubordinatorDocument,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomParams {
    #[serde(default)]
    b: Option<Vec<f64>>,
    #[serde(rename = "Q", default)]
    q: Option<Vec<Vec<f64>>>,
    nu: MeasureDescriptor,
}

fn flatten(d: usize, m: Option<Vec<Vec<f64>>>, default_identity: bool) -> Result<Vec<f64>> {
    match m {
        None => Ok(if default_identity {
            super::identity(d)
        } else {
            vec![0.0; d * d]
        }),
        Some(rows) => {
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return invalid(format!("Q must be {d} × {d}"));
            }
            Ok(rows.into_iter().flatten().collect())
        }
    }
}

fn rows(d: usize, q: &[f64]) -> Vec<Vec<f64>> {
    q.chunks(d).map(|c| c.to_vec()).collect()
}

fn params<T: for<'de> Deserialize<'de>>(v: &Value) -> Result<T> {
    let v = if v.is_null() { json!({}) } else { v.clone() };
    Ok(serde_json::from_value(v)?)
}

impl SymbolDocument {
    pub fn to_spec(&self) -> Result<SymbolSpec> {
        let d = self.dimension;
        let family = match self.family.as_str() {
            "brownian" => {
                let p: BrownianParams = params(&self.params)?;
                Family::Brownian {
                    q: flatten(d, p.q, true)?,
                    b: p.b.unwrap_or_else(|| vec![0.0; d]),
                }
            }
            "isotropic_stable" => Family::IsotropicStable {
                alpha: params::<StableParams>(&self.params)?.alpha,
            },
            "relativistic" => Family::Relativistic {
                mass: params::<RelativisticParams>(&self.params)?.m,
            },
            "tempered_stable" => {
                let p: TemperedParams = params(&self.params)?;
                Family::TemperedStable {
                    alpha: p.alpha,
                    lambda: p.lambda,
                }
            }
            "compound_poisson" => Family::CompoundPoisson {
                atoms: params::<AtomParams>(&self.params)?.atoms,
            },
            "subordinated_bm" => {
                let p: SubordinatedParams = params(&self.params)?;
                Family::SubordinatedBm {
                    subordinator: p.subordinator.to_subordinator(),
                }
            }
            "custom" => {
                let p: CustomParams = params(&self.params)?;
                let nu = LevyMeasureSpec::from_descriptor(d, &p.nu)?;
                Family::Custom(LevyTriplet::new(
                    p.b.unwrap_or_else(|| vec![0.0; d]),
                    flatten(d, p.q, false)?,
                    nu,
                )?)
            }
            other => return invalid(format!("unknown symbol family '{other}'")),
        };
        SymbolSpec::new(family, d)
    }

    pub fn from_spec(spec: &SymbolSpec) -> Result<Self> {
        let d = spec.dimension;
        let params = match &spec.family {
            Family::Brownian { q, b } => json!({"Q": rows(d, q), "b": b}),
            Family::IsotropicStable { alpha } => json!({"alpha": alpha}),
            Family::Relativistic { mass } => json!({"m": mass}),
            Family::TemperedStable { alpha, lambda } => json!({"alpha": alpha, "lambda": lambda}),
            Family::CompoundPoisson { atoms } => json!({"atoms": atoms}),
            Family::SubordinatedBm { subordinator } => {
                let doc = match *subordinator {
                    Subordinator::Deterministic => SubordinatorDocument::Deterministic,
                    Subordinator::Stable { kappa } => SubordinatorDocument::Stable { kappa },
                    Subordinator::Gamma { shape, rate } => SubordinatorDocument::Gamma { shape, rate },
                    Subordinator::InverseGaussian { delta, gamma } => {
                        SubordinatorDocument::InverseGaussian { delta, gamma }
                    }
                };
                json!({"subordinator": doc})
            }
            Family::Custom(t) => {
                let Some(desc) = &t.nu.descriptor else {
                    return invalid("custom measure built from a closure has no JSON form");
                };
                json!({"b": t.b, "Q": rows(d, &t.q), "nu": desc})
            }
        };
        Ok(Self {
            family: spec.name().to_string(),
            dimension: d,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documents_round_trip() {
        let docs = [
            r#"{"family":"brownian","dimension":2}"#,
            r#"{"family":"isotropic_stable","dimension":1,"params":{"alpha":1.5}}"#,
            r#"{"family":"relativistic","dimension":3,"params":{"m":1.0}}"#,
            r#"{"family":"tempered_stable","dimension":1,"params":{"alpha":0.7,"lambda":2.0}}"#,
            r#"{"family":"compound_poisson","dimension":1,"params":{"atoms":[{"location":[1.0],"mass":2.0}]}}"#,
            r#"{"family":"subordinated_bm","dimension":2,"params":{"subordinator":{"kind":"gamma","shape":1.0,"rate":2.0}}}"#,
            r#"{"family":"custom","dimension":1,"params":{"b":[0.5],"Q":[[1.0]],"nu":{"kind":"radial","c":1.0,"alpha":1.0,"lambda":1.0}}}"#,
        ];
        for text in docs {
            let doc: SymbolDocument = serde_json::from_str(text).unwrap();
            let spec = doc.to_spec().unwrap();
            let back = SymbolDocument::from_spec(&spec).unwrap();
            let again = back.to_spec().unwrap();
            let xi = vec![0.7; spec.dimension];
            assert_eq!(spec.eval(&xi).unwrap(), again.eval(&xi).unwrap(), "{text}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = [
            r#"{"family":"isotropic_stable","dimension":1,"params":{"alpha":1.5,"beta":1}}"#,
            r#"{"family":"brownian","dimension":1,"extra":0}"#,
            r#"{"family":"levy","dimension":1}"#,
            r#"{"family":"isotropic_stable","dimension":1,"params":{"alpha":2.5}}"#,
        ];
        for text in bad {
            let parsed: std::result::Result<SymbolDocument, _> = serde_json::from_str(text);
            assert!(parsed.map_err(|_| ()).and_then(|d| d.to_spec().map_err(|_| ())).is_err(), "{text}");
        }
    }
}
