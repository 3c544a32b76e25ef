use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vector;

use super::{
    BallDomain, LogisticObjective, MixtureObjective, NonconvexObjective, Objective,
    QuadraticObjective, SyntheticClassification,
};

/// Config-file description of a quadratic. Give the curvature as `diagonal`
/// or a full `matrix`, and the linear part either directly (`linear`) or via
/// the unconstrained minimizer (`center`, meaning `b = A c`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub noise_stddev: f64,
}

impl QuadraticSpec {
    pub fn build(&self, path: &str) -> Result<QuadraticObjective> {
        let curvature = match (&self.diagonal, &self.matrix) {
            (Some(diag), None) => DMatrix::from_diagonal(&Vector::from_column_slice(diag)),
            (None, Some(rows)) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::config(format!("{path}.matrix"), "must be square"));
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
            _ => {
                return Err(Error::config(
                    path,
                    "exactly one of `diagonal` or `matrix` is required",
                ))
            }
        };
        let d = curvature.nrows();
        let wrap = |e: Error| match e {
            Error::InvalidConfig { field, reason } => {
                Error::config(field.replacen("objective", path, 1), reason)
            }
            other => other,
        };
        match (&self.linear, &self.center) {
            (Some(_), Some(_)) => Err(Error::config(path, "give `linear` or `center`, not both")),
            (None, Some(c)) => {
                QuadraticObjective::centered(curvature, &Vector::from_column_slice(c), self.noise_stddev)
                    .map_err(wrap)
            }
            (Some(b), None) => {
                if b.len() != d {
                    return Err(Error::config(
                        format!("{path}.linear"),
                        format!("expected length {d}, got {}", b.len()),
                    ));
                }
                QuadraticObjective::new(curvature, Vector::from_column_slice(b), self.noise_stddev)
                    .map_err(wrap)
            }
            (None, None) => {
                QuadraticObjective::new(curvature, Vector::zeros(d), self.noise_stddev).map_err(wrap)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponentSpec {
    pub weight: f64,
    #[serde(flatten)]
    pub quadratic: QuadraticSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObjectiveSpec {
    Quadratic(QuadraticSpec),
    Mixture {
        components: Vec<MixtureComponentSpec>,
    },
    Nonconvex {
        base: QuadraticSpec,
        squash_scale: f64,
    },
    Logistic(SyntheticClassification),
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<Objective> {
        Ok(match self {
            ObjectiveSpec::Quadratic(q) => Objective::Quadratic(q.build("objective")?),
            ObjectiveSpec::Mixture { components } => {
                let comps = components
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        Ok((
                            c.quadratic.build(&format!("objective.components[{i}]"))?,
                            c.weight,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Objective::Mixture(MixtureObjective::new(comps)?)
            }
            ObjectiveSpec::Nonconvex { base, squash_scale } => Objective::Nonconvex(
                NonconvexObjective::new(base.build("objective.base")?, *squash_scale)?,
            ),
            ObjectiveSpec::Logistic(s) => Objective::Logistic(LogisticObjective::synthetic(s)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl DomainSpec {
    pub fn build(&self) -> Result<BallDomain> {
        BallDomain::new(Vector::from_column_slice(&self.center), self.radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tagged_toml() {
        let src = r#"
            kind = "mixture"
            [[components]]
            weight = 0.1
            diagonal = [1.0, 1.0]
            center = [1.0, 0.0]
            [[components]]
            weight = 0.9
            diagonal = [1.0, 1.0]
            center = [-1.0, 0.0]
        "#;
        let spec: ObjectiveSpec = toml::from_str(src).unwrap();
        let obj = spec.build().unwrap();
        let c = obj.theory_constants(&Vector::zeros(2)).unwrap();
        let m = c.minimizer.unwrap();
        assert!((m[0] - (-0.8)).abs() < 1e-12);
    }

    #[test]
    fn missing_curvature_names_the_field() {
        let spec = ObjectiveSpec::Quadratic(QuadraticSpec::default());
        match spec.build() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "objective"),
            other => panic!("{other:?}"),
        }
    }
}
