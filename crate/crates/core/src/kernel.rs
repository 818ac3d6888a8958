//! Compactly supported smoothing kernels.
//!
//! | Kind          | Formula                          | Support      | K_max |
//! |---------------|----------------------------------|--------------|-------|
//! | Epanechnikov  | `0.75 (1 - u²)`                  | `[-1, 1]`    | 0.75  |
//! | Uniform       | `1/2`                            | `[-1, 1]`    | 0.5   |
//! | Triangular    | `1 - |u|`                        | `[-1, 1]`    | 1     |
//! | SmoothBump    | `exp(1 - 1/(1 - 4u²))`           | `(-1/2, 1/2)`| 1     |
//!
//! `SmoothBump` is the C-infinity mollifier used for the two-point
//! lower-bound construction; it is scaled so that `K(0) = 1`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    #[default]
    Epanechnikov,
    Uniform,
    Triangular,
    SmoothBump,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] = [
        KernelKind::Epanechnikov,
        KernelKind::Uniform,
        KernelKind::Triangular,
        KernelKind::SmoothBump,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Epanechnikov => "epanechnikov",
            KernelKind::Uniform => "uniform",
            KernelKind::Triangular => "triangular",
            KernelKind::SmoothBump => "smooth-bump",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown kernel `{s}`"))
    }
}

/// A kernel together with its declared sup norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub k_max: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::new(KernelKind::Epanechnikov)
    }
}

impl From<KernelKind> for KernelSpec {
    fn from(kind: KernelKind) -> Self {
        Self::new(kind)
    }
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        let k_max = match kind {
            KernelKind::Epanechnikov => 0.75,
            KernelKind::Uniform => 0.5,
            KernelKind::Triangular | KernelKind::SmoothBump => 1.0,
        };
        Self { kind, k_max }
    }

    pub fn epanechnikov() -> Self {
        Self::new(KernelKind::Epanechnikov)
    }

    pub fn smooth_bump() -> Self {
        Self::new(KernelKind::SmoothBump)
    }

    /// Half-width of the closed support.
    pub fn radius(&self) -> f64 {
        match self.kind {
            KernelKind::SmoothBump => 0.5,
            _ => 1.0,
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let a = u.abs();
        match self.kind {
            KernelKind::Epanechnikov => {
                if a <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            KernelKind::Uniform => {
                if a <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            KernelKind::Triangular => {
                if a <= 1.0 {
                    1.0 - a
                } else {
                    0.0
                }
            }
            KernelKind::SmoothBump => {
                if a < 0.5 {
                    (1.0 - 1.0 / (1.0 - 4.0 * u * u)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// First derivative where it exists (kinks report the one-sided value
    /// from the right).
    pub fn derivative(&self, u: f64) -> f64 {
        let a = u.abs();
        match self.kind {
            KernelKind::Epanechnikov => {
                if a < 1.0 {
                    -1.5 * u
                } else {
                    0.0
                }
            }
            KernelKind::Uniform => 0.0,
            KernelKind::Triangular => {
                if a < 1.0 {
                    if u >= 0.0 {
                        -1.0
                    } else {
                        1.0
                    }
                } else {
                    0.0
                }
            }
            KernelKind::SmoothBump => {
                if a < 0.5 {
                    let g = 1.0 - 4.0 * u * u;
                    self.eval(u) * (-8.0 * u) / (g * g)
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫ K(u)² du` by composite Simpson on the support.
    pub fn l2_norm_sq(&self) -> f64 {
        integrate(|u| self.eval(u).powi(2), -self.radius(), self.radius(), 20_000)
    }
}

/// Composite Simpson rule with `2 * half_panels` sub-intervals.
pub(crate) fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, half_panels: usize) -> f64 {
    let n = 2 * half_panels;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_outside_support_and_nonnegative() {
        for kind in KernelKind::ALL {
            let k = KernelSpec::new(kind);
            for i in -3000..=3000 {
                let u = i as f64 * 1e-3;
                let v = k.eval(u);
                assert!(v >= 0.0);
                if u.abs() > 1.0 {
                    assert_eq!(v, 0.0, "{kind} at {u}");
                }
            }
        }
    }

    #[test]
    fn declared_k_max_matches_grid() {
        for kind in KernelKind::ALL {
            let k = KernelSpec::new(kind);
            let m = (-10_000..=10_000)
                .map(|i| k.eval(i as f64 * 1e-4))
                .fold(0.0, f64::max);
            assert!((m - k.k_max).abs() < 1e-6, "{kind}: {m}");
        }
    }

    #[test]
    fn smooth_bump_formula_and_support() {
        let k = KernelSpec::smooth_bump();
        assert_eq!(k.eval(0.0), 1.0);
        for i in -10_000..=10_000 {
            let u = i as f64 * 1e-4;
            let expected = if u.abs() < 0.5 {
                (-1.0 / (1.0 - (2.0 * u).powi(2))).exp() / (-1.0f64).exp()
            } else {
                0.0
            };
            assert!((k.eval(u) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn epanechnikov_integrates_to_one() {
        let k = KernelSpec::epanechnikov();
        let mass = integrate(|u| k.eval(u), -1.0, 1.0, 1000);
        assert!((mass - 1.0).abs() < 1e-12);
        assert!((k.l2_norm_sq() - 0.6).abs() < 1e-10);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for kind in [KernelKind::Epanechnikov, KernelKind::SmoothBump] {
            let k = KernelSpec::new(kind);
            for i in -40..40 {
                let u = i as f64 * 0.0123 + 0.001;
                let fd = (k.eval(u + 1e-6) - k.eval(u - 1e-6)) / 2e-6;
                assert!((fd - k.derivative(u)).abs() < 1e-5, "{kind} {u}");
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        for kind in KernelKind::ALL {
            assert_eq!(kind.name().parse::<KernelKind>().unwrap(), kind);
        }
        assert!("gaussian".parse::<KernelKind>().is_err());
    }
}
