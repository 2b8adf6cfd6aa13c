//! Named parameter groups. Each group gets its own learning-rate memory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupShape {
    pub name: String,
    pub dim: usize,
}

/// An ordered collection of parameter groups. Gradients use the same type.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamSet {
    groups: Vec<ParamGroup>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.groups.push(ParamGroup {
            name: name.into(),
            values,
        });
    }

    pub fn with(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.push(name, values);
        self
    }

    pub fn zeros_like(shapes: &[GroupShape]) -> Self {
        ParamSet {
            groups: shapes
                .iter()
                .map(|s| ParamGroup {
                    name: s.name.clone(),
                    values: vec![0.0; s.dim],
                })
                .collect(),
        }
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn groups_mut(&mut self) -> &mut [ParamGroup] {
        &mut self.groups
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .map(|g| g.values.as_slice())
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Total number of scalar parameters across all groups.
    pub fn total_len(&self) -> usize {
        self.groups.iter().map(|g| g.values.len()).sum()
    }

    pub fn shapes(&self) -> Vec<GroupShape> {
        self.groups
            .iter()
            .map(|g| GroupShape {
                name: g.name.clone(),
                dim: g.values.len(),
            })
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.groups
            .iter()
            .flat_map(|g| g.values.iter().copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.groups
            .iter()
            .all(|g| g.values.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs_diff(&self, other: &ParamSet) -> f64 {
        self.groups
            .iter()
            .zip(&other.groups)
            .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Checks that `other` has the same group names, order and dimensions.
    pub fn check_matches(&self, other: &ParamSet) -> Result<()> {
        if self.groups.len() != other.groups.len() {
            return Err(Error::LengthMismatch {
                context: "parameter group count",
                expected: self.groups.len(),
                actual: other.groups.len(),
            });
        }
        for (a, b) in self.groups.iter().zip(&other.groups) {
            if a.name != b.name {
                return Err(Error::UnknownGroup(b.name.clone()));
            }
            if a.values.len() != b.values.len() {
                return Err(Error::LengthMismatch {
                    context: "parameter group dimension",
                    expected: a.values.len(),
                    actual: b.values.len(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bookkeeping() {
        let p = ParamSet::new().with("a", vec![1.0, 2.0]).with("b", vec![3.0]);
        assert_eq!(p.total_len(), 3);
        assert_eq!(p.flatten(), vec![1.0, 2.0, 3.0]);
        assert_eq!(p.get("b"), Some(&[3.0][..]));
        assert!(p.get("c").is_none());
        let z = ParamSet::zeros_like(&p.shapes());
        assert!(p.check_matches(&z).is_ok());
        let other = ParamSet::new().with("a", vec![1.0, 2.0]).with("c", vec![3.0]);
        assert!(matches!(p.check_matches(&other), Err(Error::UnknownGroup(_))));
    }
}
