use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// 1-based step index.
    pub step: usize,
    /// Loss evaluated before this step's update.
    pub loss: f64,
    /// Mean applied rate per parameter group.
    pub mean_rates: Vec<f64>,
    /// Wall time of the whole step (loss, gradient, update).
    pub step_ms: f64,
}

/// Loss trajectory of one task run. A non-finite loss ends the curve and
/// marks the run as diverged at that step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub groups: Vec<String>,
    pub points: Vec<CurvePoint>,
    pub diverged_at: Option<usize>,
}

impl ConvergenceCurve {
    pub fn new(groups: Vec<String>) -> Self {
        ConvergenceCurve {
            groups,
            points: Vec::new(),
            diverged_at: None,
        }
    }

    pub fn from_losses(losses: &[f64]) -> Self {
        ConvergenceCurve {
            groups: Vec::new(),
            points: losses
                .iter()
                .enumerate()
                .map(|(i, &loss)| CurvePoint {
                    step: i + 1,
                    loss,
                    mean_rates: Vec::new(),
                    step_ms: 0.0,
                })
                .collect(),
            diverged_at: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.loss).collect()
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.points.last().map(|p| p.loss)
    }
}

/// First step whose loss is below `tau`, or `None` if the curve never gets there.
pub fn iterations_to_threshold(curve: &ConvergenceCurve, tau: f64) -> Option<usize> {
    curve.points.iter().find(|p| p.loss < tau).map(|p| p.step)
}

/// Mean of the first `min(n, len)` losses. `None` for an empty curve.
pub fn mean_loss_prefix(curve: &ConvergenceCurve, n: usize) -> Option<f64> {
    let k = n.min(curve.len());
    if k == 0 {
        return None;
    }
    Some(curve.points[..k].iter().map(|p| p.loss).sum::<f64>() / k as f64)
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_first_index_below() {
        let c = ConvergenceCurve::from_losses(&[0.5, 0.2, 0.09]);
        assert_eq!(iterations_to_threshold(&c, 0.1), Some(3));
        let c = ConvergenceCurve::from_losses(&[0.5, 0.2, 0.1]);
        assert_eq!(iterations_to_threshold(&c, 0.1), None);
    }

    #[test]
    fn prefix_means() {
        let c = ConvergenceCurve::from_losses(&[2.0, 4.0]);
        assert_eq!(mean_loss_prefix(&c, 2), Some(3.0));
        assert_eq!(mean_loss_prefix(&c, 50), Some(3.0));
        assert_eq!(mean_loss_prefix(&c, 1), Some(2.0));
        assert_eq!(mean_loss_prefix(&ConvergenceCurve::default(), 3), None);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
