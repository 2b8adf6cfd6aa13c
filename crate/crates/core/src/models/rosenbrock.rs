use crate::error::{Error, Result};
use crate::params::ParamSet;

use super::Objective;

/// `(a - x)^2 + b (y - x^2)^2` with each coordinate as its own group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rosenbrock {
    pub a: f64,
    pub b: f64,
}

impl Default for Rosenbrock {
    fn default() -> Self {
        Rosenbrock { a: 1.0, b: 100.0 }
    }
}

impl Rosenbrock {
    pub const GROUPS: [&'static str; 2] = ["x", "y"];

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let r = y - x * x;
        (self.a - x).powi(2) + self.b * r * r
    }

    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let r = y - x * x;
        [-2.0 * (self.a - x) - 4.0 * self.b * x * r, 2.0 * self.b * r]
    }

    pub fn params(x: f64, y: f64) -> ParamSet {
        ParamSet::new().with("x", vec![x]).with("y", vec![y])
    }

    pub fn point(params: &ParamSet) -> Result<[f64; 2]> {
        let get = |name: &str| {
            params
                .get(name)
                .and_then(|v| v.first().copied())
                .ok_or_else(|| Error::UnknownGroup(name.to_string()))
        };
        Ok([get("x")?, get("y")?])
    }
}

/// Value and per-group gradient of the classical Rosenbrock function.
pub fn rosenbrock_eval(w: [f64; 2]) -> (f64, ParamSet) {
    let f = Rosenbrock::default();
    let [gx, gy] = f.gradient(w[0], w[1]);
    (f.value(w[0], w[1]), Rosenbrock::params(gx, gy))
}

impl Objective for Rosenbrock {
    fn loss_and_grad(&mut self, params: &ParamSet) -> Result<(f64, ParamSet)> {
        let [x, y] = Rosenbrock::point(params)?;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Diverged("parameters"));
        }
        let value = self.value(x, y);
        if !value.is_finite() {
            return Err(Error::Diverged("loss"));
        }
        let [gx, gy] = self.gradient(x, y);
        Ok((value, Rosenbrock::params(gx, gy)))
    }
}
