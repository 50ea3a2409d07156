//! Builtin target functions with analytic smoothness metadata.

use std::f64::consts::PI;

use crate::encoders::{haar_mother, hat_mother, sawtooth_value};
use crate::error::{Error, Result};
use crate::poly::BasisKind;

/// Sawtooth depth used when the target name carries none.
pub const DEFAULT_SAWTOOTH_DEPTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetKind {
    Sin2Pi,
    InvXPlus2,
    XPow(f64),
    Exp,
    Haar,
    Hat,
    Sawtooth(usize),
}

/// A registered target: `f`, its derivatives where they exist, and the
/// smoothness parameters the studies use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub kind: TargetKind,
}

impl Target {
    /// Parses `sin2pi`, `inv_xplus2`, `x_pow:ALPHA`, `sqrt`, `exp`, `haar`,
    /// `hat` or `sawtooth[:D]`.
    pub fn parse(name: &str) -> Result<Self> {
        let unknown = || Error::UnknownTarget(name.to_string());
        let kind = match name {
            "sin2pi" => TargetKind::Sin2Pi,
            "inv_xplus2" => TargetKind::InvXPlus2,
            "sqrt" => TargetKind::XPow(0.5),
            "exp" => TargetKind::Exp,
            "haar" => TargetKind::Haar,
            "hat" => TargetKind::Hat,
            "sawtooth" => TargetKind::Sawtooth(DEFAULT_SAWTOOTH_DEPTH),
            _ => {
                if let Some(a) = name.strip_prefix("x_pow:") {
                    let alpha: f64 = a.parse().map_err(|_| unknown())?;
                    if !(alpha.is_finite() && alpha > 0.0) {
                        return Err(unknown());
                    }
                    TargetKind::XPow(alpha)
                } else if let Some(d) = name.strip_prefix("sawtooth:") {
                    let d: usize = d.parse().map_err(|_| unknown())?;
                    if d == 0 {
                        return Err(unknown());
                    }
                    TargetKind::Sawtooth(d)
                } else {
                    return Err(unknown());
                }
            }
        };
        Ok(Target { kind })
    }

    pub fn name(&self) -> String {
        match self.kind {
            TargetKind::Sin2Pi => "sin2pi".into(),
            TargetKind::InvXPlus2 => "inv_xplus2".into(),
            TargetKind::XPow(a) => format!("x_pow:{a}"),
            TargetKind::Exp => "exp".into(),
            TargetKind::Haar => "haar".into(),
            TargetKind::Hat => "hat".into(),
            TargetKind::Sawtooth(d) => format!("sawtooth:{d}"),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            TargetKind::Sin2Pi => (2.0 * PI * x).sin(),
            TargetKind::InvXPlus2 => 1.0 / (x + 2.0),
            TargetKind::XPow(a) => x.powf(a),
            TargetKind::Exp => x.exp(),
            TargetKind::Haar => {
                if x < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
            TargetKind::Hat => 1.0 - (2.0 * x - 1.0).abs(),
            TargetKind::Sawtooth(d) => sawtooth_value(d, x),
        }
    }

    /// `f^{(k)}(x)` for the smooth targets; `None` where the target is only
    /// piecewise smooth.
    pub fn derivative(&self, k: u32, x: f64) -> Option<f64> {
        match self.kind {
            TargetKind::Sin2Pi => {
                let w = 2.0 * PI;
                Some(w.powi(k as i32) * (w * x + k as f64 * PI / 2.0).sin())
            }
            TargetKind::InvXPlus2 => {
                let fact: f64 = (1..=k).map(f64::from).product();
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                Some(sign * fact / (x + 2.0).powi(k as i32 + 1))
            }
            TargetKind::XPow(a) => {
                let c: f64 = (0..k).map(|j| a - j as f64).product();
                Some(c * x.powf(a - k as f64))
            }
            TargetKind::Exp => Some(x.exp()),
            _ if k == 0 => Some(self.eval(x)),
            _ => None,
        }
    }

    /// Sobolev smoothness: largest `r` with `f` in `W^{r,inf}`, when finite.
    pub fn sobolev_order(&self) -> Option<u32> {
        match self.kind {
            TargetKind::Sin2Pi | TargetKind::InvXPlus2 | TargetKind::Exp => None,
            TargetKind::XPow(a) if a.fract() == 0.0 => None,
            TargetKind::XPow(a) => Some(a.floor() as u32),
            TargetKind::Haar => Some(0),
            TargetKind::Hat | TargetKind::Sawtooth(_) => Some(1),
        }
    }

    /// Whether `f` is analytic on a neighbourhood of `[0,1]`.
    pub fn is_analytic(&self) -> bool {
        match self.kind {
            TargetKind::Sin2Pi | TargetKind::InvXPlus2 | TargetKind::Exp => true,
            TargetKind::XPow(a) => a.fract() == 0.0,
            _ => false,
        }
    }

    /// Bernstein ellipse parameter of `[0,1]` inside which `f` is analytic;
    /// infinite for entire functions.
    pub fn analytic_rho(&self) -> Option<f64> {
        match self.kind {
            // pole at x = -2, i.e. t = -5 on [-1,1]
            TargetKind::InvXPlus2 => Some(5.0 + 24f64.sqrt()),
            TargetKind::Sin2Pi | TargetKind::Exp => Some(f64::INFINITY),
            TargetKind::XPow(a) if a.fract() == 0.0 => Some(f64::INFINITY),
            _ => None,
        }
    }

    /// Exponent of the point singularity at 0 for `x^alpha`.
    pub fn singularity_exponent(&self) -> Option<f64> {
        match self.kind {
            TargetKind::XPow(a) if a.fract() != 0.0 => Some(a),
            _ => None,
        }
    }

    /// Exact train of the target when it is one of the encoded mothers.
    pub fn mother(&self, kind: BasisKind) -> Option<crate::tensor_train::TensorTrain> {
        match self.kind {
            TargetKind::Haar => Some(haar_mother(kind)),
            TargetKind::Hat => Some(hat_mother(kind)),
            _ => None,
        }
    }
}

pub const TARGET_NAMES: [&str; 8] = [
    "sin2pi",
    "inv_xplus2",
    "x_pow:ALPHA",
    "sqrt",
    "exp",
    "haar",
    "hat",
    "sawtooth[:D]",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        assert_eq!(Target::parse("sqrt").unwrap().kind, TargetKind::XPow(0.5));
        assert_eq!(Target::parse("x_pow:0.6").unwrap().kind, TargetKind::XPow(0.6));
        assert_eq!(Target::parse("sawtooth:7").unwrap().kind, TargetKind::Sawtooth(7));
        assert!(matches!(Target::parse("cosh"), Err(Error::UnknownTarget(_))));
        assert!(Target::parse("x_pow:-1").is_err());
    }

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-5;
        for name in ["sin2pi", "inv_xplus2", "x_pow:0.6", "exp"] {
            let t = Target::parse(name).unwrap();
            for k in 0..3 {
                let x = 0.4;
                let fd = (t.derivative(k, x + h).unwrap() - t.derivative(k, x - h).unwrap()) / (2.0 * h);
                let d = t.derivative(k + 1, x).unwrap();
                assert!((fd - d).abs() < 1e-5 * d.abs().max(1.0), "{name} {k}");
            }
        }
    }
}
