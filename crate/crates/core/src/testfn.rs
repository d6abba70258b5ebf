//! Bounded test functions `F`, registered by name for the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `F ≡ 1`.
    One,
    /// `exp(−y²)`.
    ExpNegY2,
    /// `exp(−λy²)`; pairs with the squared-Bessel Laplace transform.
    Laplace { lambda: f64 },
    /// `1/(1 + y²)`.
    Cauchy,
    /// Indicator of `[0, a]`.
    Indicator { a: f64 },
    /// `tanh(y)`, used on the whole line by the Ornstein–Uhlenbeck baseline.
    Tanh,
}

/// Names accepted by [`TestFunction::from_name`].
pub const REGISTERED: [&str; 6] = ["one", "exp_neg_y2", "laplace", "cauchy", "indicator_0_a", "tanh"];

impl TestFunction {
    /// Look up a registered function; `param` is `a` for the indicator and `λ` for `laplace`.
    pub fn from_name(name: &str, param: Option<f64>) -> Result<Self> {
        let need = |what: &str| {
            param.ok_or_else(|| Error::Invalid(format!("test function {name} needs parameter {what}")))
        };
        let f = match name {
            "one" => TestFunction::One,
            "exp_neg_y2" => TestFunction::ExpNegY2,
            "cauchy" => TestFunction::Cauchy,
            "tanh" => TestFunction::Tanh,
            "indicator_0_a" => TestFunction::Indicator { a: need("a")? },
            "laplace" => TestFunction::Laplace {
                lambda: need("lambda")?,
            },
            other => {
                return Err(Error::Invalid(format!(
                    "unknown test function {other:?} (expected one of {})",
                    REGISTERED.join(", ")
                )))
            }
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TestFunction::Indicator { a } if !(a > 0.0 && a.is_finite()) => {
                Err(Error::Invalid(format!("indicator endpoint a = {a} must be positive")))
            }
            TestFunction::Laplace { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                Err(Error::Invalid(format!("laplace lambda = {lambda} must be >= 0")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::One => "one".into(),
            TestFunction::ExpNegY2 => "exp_neg_y2".into(),
            TestFunction::Laplace { lambda } => format!("laplace({lambda})"),
            TestFunction::Cauchy => "cauchy".into(),
            TestFunction::Indicator { a } => format!("indicator_0_a({a})"),
            TestFunction::Tanh => "tanh".into(),
        }
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            TestFunction::One => 1.0,
            TestFunction::ExpNegY2 => (-y * y).exp(),
            TestFunction::Laplace { lambda } => (-lambda * y * y).exp(),
            TestFunction::Cauchy => 1.0 / (1.0 + y * y),
            TestFunction::Indicator { a } => {
                if (0.0..=a).contains(&y) {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Tanh => y.tanh(),
        }
    }

    /// Declared bound on `sup |F|`.
    pub fn sup_norm(&self) -> f64 {
        1.0
    }

    /// Discontinuities on `[0, ∞)`; quadrature splits there.
    pub fn jumps(&self) -> Vec<f64> {
        match *self {
            TestFunction::Indicator { a } => vec![a],
            _ => Vec::new(),
        }
    }

    /// The standard family used by sweeps and the derivative grid.
    pub fn standard_family() -> Vec<TestFunction> {
        vec![
            TestFunction::ExpNegY2,
            TestFunction::Cauchy,
            TestFunction::Indicator { a: 1.0 },
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_round_trip() {
        assert_eq!(TestFunction::from_name("one", None).unwrap(), TestFunction::One);
        assert_eq!(
            TestFunction::from_name("indicator_0_a", Some(2.0)).unwrap(),
            TestFunction::Indicator { a: 2.0 }
        );
        assert!(TestFunction::from_name("indicator_0_a", None).is_err());
        assert!(TestFunction::from_name("indicator_0_a", Some(-1.0)).is_err());
        assert!(TestFunction::from_name("sin", None).is_err());
    }

    #[test]
    fn values_within_declared_bound() {
        let fs = [
            TestFunction::One,
            TestFunction::ExpNegY2,
            TestFunction::Laplace { lambda: 2.0 },
            TestFunction::Cauchy,
            TestFunction::Indicator { a: 1.0 },
            TestFunction::Tanh,
        ];
        for f in fs {
            for i in 0..200 {
                let y = -5.0 + 0.05 * i as f64;
                assert!(f.eval(y).abs() <= f.sup_norm());
            }
        }
        let ind = TestFunction::Indicator { a: 1.0 };
        assert_eq!(ind.eval(1.0), 1.0);
        assert_eq!(ind.eval(1.0 + 1e-15), 0.0);
    }
}
