//! Laplace-transform algebra for mean-one frailty distributions.
//!
//! Every family is parametrised by its variance `sigma2`; the generalized
//! stable family adds an index `alpha` in `[0, 1)`. With `nu = -log L`, the
//! mean frailty of a cohort whose integrated baseline intensity is `s` equals
//! `nu'(s)`, and the same quantity expressed through the integrated cohort
//! intensity `h` is `nu'(nu^{-1}(h))`. All closed forms below are written with
//! `ln_1p`/`exp_m1` so that small arguments keep full precision.

use crate::error::{Error, Result};

/// Below this index the stable family is evaluated through its Gamma limit.
pub const STABLE_GAMMA_CUTOFF: f64 = 1e-8;

/// Largest exponent accepted before `exp` overflows a double.
const EXP_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrailtyFamily {
    Degenerate,
    Gamma,
    InverseGaussian,
    Stable,
}

impl FrailtyFamily {
    /// Builds a spec from raw parameters; `sigma2 == 0` yields [`FrailtySpec::Degenerate`].
    pub fn with_params(self, sigma2: f64, alpha: f64) -> Result<FrailtySpec> {
        if sigma2 == 0.0 {
            return Ok(FrailtySpec::Degenerate);
        }
        match self {
            FrailtyFamily::Degenerate => Err(Error::ParameterDomain("degenerate frailty takes no variance".into())),
            FrailtyFamily::Gamma => FrailtySpec::gamma(sigma2),
            FrailtyFamily::InverseGaussian => FrailtySpec::inverse_gaussian(sigma2),
            FrailtyFamily::Stable => FrailtySpec::stable(alpha, sigma2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrailtyFamily::Degenerate => "none",
            FrailtyFamily::Gamma => "gamma",
            FrailtyFamily::InverseGaussian => "inverse-gaussian",
            FrailtyFamily::Stable => "stable",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "none" | "degenerate" => Some(FrailtyFamily::Degenerate),
            "gamma" => Some(FrailtyFamily::Gamma),
            "ig" | "inverse-gaussian" | "inverse_gaussian" | "invgauss" => Some(FrailtyFamily::InverseGaussian),
            "stable" => Some(FrailtyFamily::Stable),
            _ => None,
        }
    }
}

/// Frailty distribution at birth, normalised to mean one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrailtySpec {
    /// No heterogeneity, `Z = 1`.
    Degenerate,
    Gamma {
        sigma2: f64,
    },
    InverseGaussian {
        sigma2: f64,
    },
    /// Exponentially tilted positive stable law with index `alpha`.
    Stable {
        alpha: f64,
        sigma2: f64,
    },
}

/// Internal evaluation form once validation and limit dispatch are done.
#[derive(Clone, Copy)]
enum Form {
    Identity,
    Gamma(f64),
    InvGauss(f64),
    Stable(f64, f64),
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2.is_finite() && sigma2 > 0.0 {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("frailty variance must be positive and finite, got {sigma2}")))
    }
}

fn check_arg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite and non-negative, got {v}")))
    }
}

impl FrailtySpec {
    pub fn gamma(sigma2: f64) -> Result<Self> {
        check_sigma2(sigma2)?;
        Ok(FrailtySpec::Gamma { sigma2 })
    }

    pub fn inverse_gaussian(sigma2: f64) -> Result<Self> {
        check_sigma2(sigma2)?;
        Ok(FrailtySpec::InverseGaussian { sigma2 })
    }

    pub fn stable(alpha: f64, sigma2: f64) -> Result<Self> {
        let spec = FrailtySpec::Stable { alpha, sigma2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn family(&self) -> FrailtyFamily {
        match self {
            FrailtySpec::Degenerate => FrailtyFamily::Degenerate,
            FrailtySpec::Gamma { .. } => FrailtyFamily::Gamma,
            FrailtySpec::InverseGaussian { .. } => FrailtyFamily::InverseGaussian,
            FrailtySpec::Stable { .. } => FrailtyFamily::Stable,
        }
    }

    /// Frailty variance; zero for the degenerate case.
    pub fn sigma2(&self) -> f64 {
        match *self {
            FrailtySpec::Degenerate => 0.0,
            FrailtySpec::Gamma { sigma2 }
            | FrailtySpec::InverseGaussian { sigma2 }
            | FrailtySpec::Stable { sigma2, .. } => sigma2,
        }
    }

    /// Stable index; Gamma reports 0 and inverse Gaussian 0.5, their positions in the stable family.
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            FrailtySpec::Stable { alpha, .. } => Some(alpha),
            FrailtySpec::Gamma { .. } => Some(0.0),
            FrailtySpec::InverseGaussian { .. } => Some(0.5),
            FrailtySpec::Degenerate => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FrailtySpec::Degenerate => Ok(()),
            FrailtySpec::Gamma { sigma2 } | FrailtySpec::InverseGaussian { sigma2 } => check_sigma2(sigma2),
            FrailtySpec::Stable { alpha, sigma2 } => {
                check_sigma2(sigma2)?;
                if (0.0..1.0).contains(&alpha) {
                    Ok(())
                } else {
                    Err(Error::ParameterDomain(format!("stable index must lie in [0, 1), got {alpha}")))
                }
            }
        }
    }

    fn form(&self) -> Result<Form> {
        self.validate()?;
        Ok(match *self {
            FrailtySpec::Degenerate => Form::Identity,
            FrailtySpec::Gamma { sigma2 } => Form::Gamma(sigma2),
            FrailtySpec::InverseGaussian { sigma2 } => Form::InvGauss(sigma2),
            FrailtySpec::Stable { alpha, sigma2 } if alpha < STABLE_GAMMA_CUTOFF => Form::Gamma(sigma2),
            FrailtySpec::Stable { alpha, sigma2 } => Form::Stable(alpha, sigma2),
        })
    }

    /// Laplace transform `L(s) = E[exp(-sZ)]`.
    pub fn laplace(&self, s: f64) -> Result<f64> {
        Ok((-self.nu(s)?).exp())
    }

    /// `nu(s) = -log L(s)`.
    pub fn nu(&self, s: f64) -> Result<f64> {
        check_arg("s", s)?;
        Ok(match self.form()? {
            Form::Identity => s,
            Form::Gamma(v) => (v * s).ln_1p() / v,
            // (sqrt(1 + 2vs) - 1)/v, rationalised
            Form::InvGauss(v) => 2.0 * s / (1.0 + (1.0 + 2.0 * v * s).sqrt()),
            Form::Stable(a, v) => {
                let u = (v * s / (1.0 - a)).ln_1p();
                (1.0 - a) / (a * v) * (a * u).exp_m1()
            }
        })
    }

    /// `nu'(s)`, the mean frailty among survivors at integrated baseline intensity `s`.
    pub fn nu_prime(&self, s: f64) -> Result<f64> {
        check_arg("s", s)?;
        Ok(match self.form()? {
            Form::Identity => 1.0,
            Form::Gamma(v) => 1.0 / (1.0 + v * s),
            Form::InvGauss(v) => 1.0 / (1.0 + 2.0 * v * s).sqrt(),
            Form::Stable(a, v) => ((a - 1.0) * (v * s / (1.0 - a)).ln_1p()).exp(),
        })
    }

    /// Inverse of [`nu`](Self::nu): the integrated baseline intensity that produces cohort hazard `h`.
    pub fn nu_inverse(&self, h: f64) -> Result<f64> {
        check_arg("h", h)?;
        let value = match self.form()? {
            Form::Identity => h,
            Form::Gamma(v) => {
                if v * h > EXP_LIMIT {
                    return Err(Error::Overflow(format!(
                        "gamma nu_inverse with sigma2*h = {} exceeds {EXP_LIMIT}",
                        v * h
                    )));
                }
                (v * h).exp_m1() / v
            }
            // ((1 + vh)^2 - 1)/(2v)
            Form::InvGauss(v) => h * (1.0 + 0.5 * v * h),
            Form::Stable(a, v) => {
                let expo = (a * v * h / (1.0 - a)).ln_1p() / a;
                if expo > EXP_LIMIT {
                    return Err(Error::Overflow(format!("stable nu_inverse exponent {expo} exceeds {EXP_LIMIT}")));
                }
                (1.0 - a) / v * expo.exp_m1()
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Overflow(format!("nu_inverse({h}) is not finite")))
        }
    }

    /// Mean frailty expressed through the integrated cohort intensity, `nu'(nu^{-1}(h))`.
    pub fn mean_frailty_from_h(&self, h: f64) -> Result<f64> {
        check_arg("H", h)?;
        Ok(match self.form()? {
            Form::Identity => 1.0,
            Form::Gamma(v) => (-v * h).exp(),
            Form::InvGauss(v) => 1.0 / (1.0 + v * h),
            Form::Stable(a, v) => ((a - 1.0) / a * (a * v * h / (1.0 - a)).ln_1p()).exp(),
        })
    }
}

impl std::fmt::Display for FrailtySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FrailtySpec::Degenerate => write!(f, "none"),
            FrailtySpec::Gamma { sigma2 } => write!(f, "gamma(sigma2={sigma2})"),
            FrailtySpec::InverseGaussian { sigma2 } => {
                write!(f, "inverse-gaussian(sigma2={sigma2})")
            }
            FrailtySpec::Stable { alpha, sigma2 } => {
                write!(f, "stable(alpha={alpha}, sigma2={sigma2})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    /// Composite Simpson quadrature of E[exp(-sZ)] under a Gamma(mean 1, var v) density.
    fn gamma_laplace_by_quadrature(v: f64, s: f64) -> f64 {
        let shape = 1.0 / v;
        let rate = 1.0 / v;
        let ln_norm = shape * rate.ln() - ln_gamma(shape);
        let density = |z: f64| {
            if z <= 0.0 {
                return 0.0;
            }
            (ln_norm + (shape - 1.0) * z.ln() - rate * z - s * z).exp()
        };
        let (a, b, n) = (0.0, 60.0, 600_000usize);
        let h = (b - a) / n as f64;
        let mut acc = density(a) + density(b);
        for i in 1..n {
            let z = a + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * density(z);
        }
        acc * h / 3.0
    }

    // Lanczos approximation, g = 7
    fn ln_gamma(x: f64) -> f64 {
        const C: [f64; 9] = [
            0.999_999_999_999_809_9,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_1,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        let x = x - 1.0;
        let mut a = C[0];
        let t = x + 7.5;
        for (i, c) in C.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }

    #[test]
    fn gamma_laplace_closed_form() {
        let g = FrailtySpec::gamma(1.0).unwrap();
        assert!(close(g.laplace(1.0).unwrap(), 0.5, 1e-15));
    }

    #[test]
    fn laplace_at_zero_is_one() {
        for spec in [
            FrailtySpec::Degenerate,
            FrailtySpec::gamma(0.3).unwrap(),
            FrailtySpec::inverse_gaussian(2.0).unwrap(),
            FrailtySpec::stable(0.3, 1.5).unwrap(),
        ] {
            assert_eq!(spec.laplace(0.0).unwrap(), 1.0);
            assert_eq!(spec.nu(0.0).unwrap(), 0.0);
            assert_eq!(spec.nu_prime(0.0).unwrap(), 1.0);
            assert_eq!(spec.nu_inverse(0.0).unwrap(), 0.0);
            assert_eq!(spec.mean_frailty_from_h(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn gamma_laplace_matches_quadrature() {
        let v = 0.5;
        let q = gamma_laplace_by_quadrature(v, 2.0);
        let got = FrailtySpec::gamma(v).unwrap().laplace(2.0).unwrap();
        assert!((got - q).abs() / q < 1e-6, "{got} vs quadrature {q}");
    }

    #[test]
    fn nu_examples() {
        let g = FrailtySpec::gamma(1.0).unwrap();
        assert!(close(g.nu(1.0).unwrap(), std::f64::consts::LN_2, 1e-15));
        assert_eq!(FrailtySpec::Degenerate.nu(3.7).unwrap(), 3.7);
        let st = FrailtySpec::stable(0.5, 0.3).unwrap();
        let ig = FrailtySpec::inverse_gaussian(0.3).unwrap();
        assert!(close(st.nu(2.0).unwrap(), ig.nu(2.0).unwrap(), 1e-14));
    }

    #[test]
    fn nu_prime_examples() {
        let g = FrailtySpec::gamma(0.113).unwrap();
        assert!(close(g.nu_prime(1.0).unwrap(), 1.0 / 1.113, 1e-15));
        assert!((g.nu_prime(1.0).unwrap() - 0.898473).abs() < 1e-6);
        let st = FrailtySpec::stable(1e-6, 0.2).unwrap();
        assert!((st.nu_prime(5.0).unwrap() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn nu_inverse_examples() {
        let g = FrailtySpec::gamma(1.0).unwrap();
        assert!(close(g.nu_inverse(std::f64::consts::LN_2).unwrap(), 1.0, 1e-15));
        let ig = FrailtySpec::inverse_gaussian(0.4).unwrap();
        let back = ig.nu(ig.nu_inverse(2.0).unwrap()).unwrap();
        assert!((back - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mean_frailty_examples() {
        let g = FrailtySpec::gamma(0.113).unwrap();
        let mf = g.mean_frailty_from_h(1.0).unwrap();
        assert!((mf - (-0.113f64).exp()).abs() < 1e-15);
        assert!((mf - 0.8931507).abs() < 1e-7);
        let composed = g.nu_prime(g.nu_inverse(1.0).unwrap()).unwrap();
        assert!((mf - composed).abs() < 1e-12);

        let st = FrailtySpec::stable(0.434, 11.770).unwrap();
        let mf = st.mean_frailty_from_h(0.5).unwrap();
        let composed = st.nu_prime(st.nu_inverse(0.5).unwrap()).unwrap();
        assert!((mf - composed).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(matches!(FrailtySpec::gamma(0.0), Err(Error::ParameterDomain(_))));
        assert!(matches!(FrailtySpec::gamma(-1.0), Err(Error::ParameterDomain(_))));
        assert!(matches!(FrailtySpec::stable(1.0, 1.0), Err(Error::ParameterDomain(_))));
        assert!(matches!(FrailtySpec::stable(-0.1, 1.0), Err(Error::ParameterDomain(_))));
        let bad = FrailtySpec::Gamma { sigma2: -0.5 };
        assert!(matches!(bad.nu(1.0), Err(Error::ParameterDomain(_))));
        let g = FrailtySpec::gamma(1.0).unwrap();
        assert!(matches!(g.nu_inverse(-1.0), Err(Error::Domain(_))));
        assert!(matches!(g.nu(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn gamma_inverse_overflow_is_an_error() {
        let g = FrailtySpec::gamma(10.0).unwrap();
        assert!(matches!(g.nu_inverse(71.0), Err(Error::Overflow(_))));
        assert!(g.nu_inverse(69.0).is_ok());
    }

    #[test]
    fn stable_zero_index_is_gamma() {
        let st = FrailtySpec::stable(0.0, 0.7).unwrap();
        let g = FrailtySpec::gamma(0.7).unwrap();
        for s in [0.0, 0.1, 1.0, 10.0] {
            assert_eq!(st.nu(s).unwrap(), g.nu(s).unwrap());
            assert_eq!(st.nu_inverse(s).unwrap(), g.nu_inverse(s).unwrap());
        }
    }

    #[test]
    fn family_with_zero_variance_is_degenerate() {
        for fam in [FrailtyFamily::Gamma, FrailtyFamily::InverseGaussian, FrailtyFamily::Stable] {
            assert_eq!(fam.with_params(0.0, 0.3).unwrap(), FrailtySpec::Degenerate);
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn spec() -> impl Strategy<Value = FrailtySpec> {
            prop_oneof![
                Just(FrailtySpec::Degenerate),
                (0.01f64..10.0).prop_map(|v| FrailtySpec::gamma(v).unwrap()),
                (0.01f64..10.0).prop_map(|v| FrailtySpec::inverse_gaussian(v).unwrap()),
                (0.0f64..0.95, 0.01f64..10.0).prop_map(|(a, v)| FrailtySpec::stable(a, v).unwrap()),
            ]
        }

        proptest! {
            #[test]
            fn monotone_in_argument(spec in spec(), s in 0.0f64..50.0, ds in 1e-3f64..5.0) {
                let t = s + ds;
                prop_assert!(spec.nu(t).unwrap() > spec.nu(s).unwrap());
                prop_assert!(spec.nu_inverse(t).unwrap() > spec.nu_inverse(s).unwrap());
                prop_assert!(spec.laplace(t).unwrap() < spec.laplace(s).unwrap());
                if spec != FrailtySpec::Degenerate {
                    prop_assert!(spec.nu_prime(t).unwrap() < spec.nu_prime(s).unwrap());
                }
            }

            #[test]
            fn mean_frailty_is_composition(spec in spec(), h in 0.0f64..50.0) {
                let direct = spec.mean_frailty_from_h(h).unwrap();
                if let Ok(i) = spec.nu_inverse(h) {
                    let composed = spec.nu_prime(i).unwrap();
                    prop_assert!((direct - composed).abs() <= 1e-12 * direct.max(1e-300).max(1.0));
                }
                prop_assert!(direct > 0.0 && direct <= 1.0);
            }
        }
    }
}
