//! Scalar constants, weight dictionaries, and regime classifiers derived
//! from kappa.
//!
//! For kappa in (0,4) the derived triple is
//! `lambda = pi/sqrt(kappa)`, `lambda' = pi*sqrt(kappa)/4`,
//! `chi = 2/sqrt(kappa) - sqrt(kappa)/2`, tied together by
//! `2*pi*chi = 4*(lambda - lambda') = (4-kappa)*lambda = (kappa'-4)*lambda'`.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Absolute tolerance for the algebraic identities among the constants.
pub const IDENTITY_TOL: f64 = 1e-12;

/// The derived constant triple for a fixed kappa in (0,4).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub kappa: f64,
    pub kappa_prime: f64,
    pub lambda: f64,
    pub lambda_prime: f64,
    pub chi: f64,
}

/// Field parameters for a conical singularity `h - alpha*arg - beta*log`
/// together with a flow-line angle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ImaginaryParams {
    pub constants: Constants,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
}

/// Which SLE variant a weight is being derived for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Flow,
    CounterflowFromOrigin,
    CounterflowFromInfinity,
}

/// Simple vs self-intersecting phase of a whole-plane/radial SLE_kappa(rho).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Simple,
    SelfIntersecting,
}

/// Derive the constant triple from kappa in (0,4).
pub fn derive_constants(kappa: f64) -> Result<Constants> {
    if !(kappa > 0.0 && kappa < 4.0) || !kappa.is_finite() {
        return Err(Error::Domain {
            name: "kappa",
            reason: format!("{kappa} not in (0,4)"),
        });
    }
    let sk = kappa.sqrt();
    Ok(Constants {
        kappa,
        kappa_prime: 16.0 / kappa,
        lambda: PI / sk,
        lambda_prime: PI * sk / 4.0,
        chi: 2.0 / sk - sk / 2.0,
    })
}

impl Constants {
    /// Largest deviation among the three defining identities; zero up to
    /// rounding for any valid kappa.
    pub fn identity_residual(&self) -> f64 {
        let a = 2.0 * PI * self.chi - 4.0 * (self.lambda - self.lambda_prime);
        let b = 2.0 * PI * self.chi - (4.0 - self.kappa) * self.lambda;
        let c = 2.0 * PI * self.chi - (self.kappa_prime - 4.0) * self.lambda_prime;
        let d = self.lambda_prime - (self.lambda - 0.5 * PI * self.chi);
        a.abs().max(b.abs()).max(c.abs()).max(d.abs())
    }
}

impl ImaginaryParams {
    pub fn new(constants: Constants, alpha: f64, beta: f64, theta: f64) -> Result<Self> {
        if alpha <= -constants.chi {
            return Err(Error::Domain {
                name: "alpha",
                reason: format!("{alpha} <= -chi = {}", -constants.chi),
            });
        }
        Ok(Self {
            constants,
            alpha,
            beta,
            theta,
        })
    }

    /// Range of available flow-line angles from the singularity:
    /// `[0, 2*pi*(1 + alpha/chi))`.
    pub fn angle_range(&self) -> f64 {
        2.0 * PI * (1.0 + self.alpha / self.constants.chi)
    }
}

/// Critical angle `theta_c = 2*lambda'/chi = pi*kappa/(4-kappa)`.
pub fn critical_angle(kappa: f64) -> Result<f64> {
    let c = derive_constants(kappa)?;
    Ok(2.0 * c.lambda_prime / c.chi)
}

/// The kappa below which n non-intersecting rays fit at one point: `8/(n+2)`.
pub fn critical_kappa_for_n(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain {
            name: "n",
            reason: "must be >= 1".into(),
        });
    }
    Ok(8.0 / (n as f64 + 2.0))
}

/// The weight of the SLE variant coupled with the singular field.
///
/// Flow lines use `rho = 2 - kappa + 2*pi*alpha/lambda`; counterflow lines
/// from the singularity use `rho = 2 - kappa' - 2*pi*alpha/lambda'` and from
/// infinity `rho = kappa' - 6 + 2*pi*alpha/lambda'`.
pub fn rho_from_alpha(params: &ImaginaryParams, kind: WeightKind) -> Result<f64> {
    let c = &params.constants;
    let rho = match kind {
        WeightKind::Flow => 2.0 - c.kappa + 2.0 * PI * params.alpha / c.lambda,
        WeightKind::CounterflowFromOrigin => {
            2.0 - c.kappa_prime - 2.0 * PI * params.alpha / c.lambda_prime
        }
        WeightKind::CounterflowFromInfinity => {
            c.kappa_prime - 6.0 + 2.0 * PI * params.alpha / c.lambda_prime
        }
    };
    if rho <= -2.0 {
        return Err(Error::InadmissibleWeight { rho });
    }
    Ok(rho)
}

/// Almost-sure maximal point multiplicity of whole-plane/radial
/// SLE_kappa(rho): `ceil(kappa / (2*(2+rho)))`.
pub fn max_self_hits(kappa: f64, rho: f64) -> Result<u32> {
    derive_constants(kappa)?;
    if rho <= -2.0 {
        return Err(Error::InadmissibleWeight { rho });
    }
    Ok((kappa / (2.0 * (2.0 + rho))).ceil() as u32)
}

/// Simple iff `rho >= kappa/2 - 2` (Bessel dimension `1 + 2(rho+2)/kappa >= 2`).
pub fn regime(kappa: f64, rho: f64) -> Result<Regime> {
    derive_constants(kappa)?;
    if rho <= -2.0 {
        return Err(Error::InadmissibleWeight { rho });
    }
    Ok(if rho >= kappa / 2.0 - 2.0 {
        Regime::Simple
    } else {
        Regime::SelfIntersecting
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_at_four_thirds() {
        // chi = sqrt(4/3) at kappa = 4/3
        let c = derive_constants(4.0 / 3.0).unwrap();
        assert!((c.chi - (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constants_at_two() {
        let c = derive_constants(2.0).unwrap();
        assert!((c.lambda - PI / 2.0f64.sqrt()).abs() < 1e-12);
        assert!((c.lambda_prime - PI * 2.0f64.sqrt() / 4.0).abs() < 1e-12);
        assert!((c.chi - 2.0f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn chi_vanishes_at_boundary() {
        let c = derive_constants(4.0 - 1e-12).unwrap();
        assert!(c.chi.abs() < 1e-9);
        assert!(derive_constants(4.0).is_err());
        assert!(derive_constants(0.0).is_err());
        assert!(derive_constants(-1.0).is_err());
    }

    #[test]
    fn identities_on_dense_grid() {
        for i in 0..1000 {
            let kappa = 0.1 + 3.8 * (i as f64 + 0.5) / 1000.0;
            let c = derive_constants(kappa).unwrap();
            assert!(c.identity_residual() < IDENTITY_TOL, "kappa = {kappa}");
            assert!(c.chi > 0.0);
        }
    }

    #[test]
    fn critical_angle_values() {
        assert!((critical_angle(2.0).unwrap() - PI).abs() < 1e-12);
        assert!((critical_angle(8.0 / 3.0).unwrap() - 2.0 * PI).abs() < 1e-12);
        for n in 1..=4u32 {
            let kappa = 4.0 * n as f64 / (n as f64 + 1.0);
            assert!((critical_angle(kappa).unwrap() - n as f64 * PI).abs() < 1e-12);
        }
        assert!(critical_angle(4.0).is_err());
    }

    #[test]
    fn critical_kappa_values() {
        assert!((critical_kappa_for_n(1).unwrap() - 8.0 / 3.0).abs() < 1e-15);
        assert!((critical_kappa_for_n(2).unwrap() - 2.0).abs() < 1e-15);
        assert!(critical_kappa_for_n(0).is_err());
        assert!(critical_kappa_for_n(1_000_000).unwrap() < 1e-5);
    }

    #[test]
    fn critical_angle_and_kappa_consistent() {
        // theta_c(8/(n+2)) * n = 2*pi
        for n in 1..=8u32 {
            let kappa = critical_kappa_for_n(n).unwrap();
            let tc = critical_angle(kappa).unwrap();
            assert!((tc * n as f64 - 2.0 * PI).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn rho_dictionary() {
        let c = derive_constants(2.0).unwrap();
        let p = ImaginaryParams::new(c, 0.0, 0.0, 0.0).unwrap();
        let rho = rho_from_alpha(&p, WeightKind::Flow).unwrap();
        assert!((rho - (2.0 - 2.0)).abs() < 1e-12);

        // alpha below -chi forces rho <= -2, rejected
        let p2 = ImaginaryParams {
            constants: c,
            alpha: -c.chi - 0.05,
            beta: 0.0,
            theta: 0.0,
        };
        assert!(rho_from_alpha(&p2, WeightKind::Flow).is_err());

        // counterflow from infinity at kappa' = 6, alpha = 0 -> rho = 0
        let c6 = derive_constants(16.0 / 6.0).unwrap();
        let p3 = ImaginaryParams::new(c6, 0.0, 0.0, 0.0).unwrap();
        let rho = rho_from_alpha(&p3, WeightKind::CounterflowFromInfinity).unwrap();
        assert!(rho.abs() < 1e-12);
    }

    #[test]
    fn rho_increasing_in_alpha_with_known_threshold() {
        // flow-line rho equals kappa/2 - 2 exactly at alpha = 3*sqrt(k)/4 - 2/sqrt(k)
        for kappa in [0.5, 1.0, 2.0, 3.0, 3.9] {
            let c = derive_constants(kappa).unwrap();
            let sk = kappa.sqrt();
            let alpha_star = 3.0 * sk / 4.0 - 2.0 / sk;
            if alpha_star > -c.chi {
                let p = ImaginaryParams::new(c, alpha_star, 0.0, 0.0).unwrap();
                let rho = rho_from_alpha(&p, WeightKind::Flow).unwrap();
                assert!((rho - (kappa / 2.0 - 2.0)).abs() < 1e-12, "kappa = {kappa}");
            }
            let mut last = f64::NEG_INFINITY;
            for i in 0..20 {
                let alpha = -c.chi + 0.05 + 0.1 * i as f64;
                let p = ImaginaryParams::new(c, alpha, 0.0, 0.0).unwrap();
                if let Ok(rho) = rho_from_alpha(&p, WeightKind::Flow) {
                    assert!(rho > last);
                    last = rho;
                }
            }
        }
    }

    #[test]
    fn self_hit_counts() {
        assert_eq!(max_self_hits(2.0, 0.0).unwrap(), 1);
        assert_eq!(max_self_hits(3.0, -1.0).unwrap(), 2);
        assert_eq!(max_self_hits(3.0, -0.5).unwrap(), 1);
        assert!(max_self_hits(2.0, -2.0).is_err());
    }

    #[test]
    fn regime_classification() {
        assert_eq!(regime(8.0 / 3.0, 2.0 - 8.0 / 3.0).unwrap(), Regime::Simple);
        assert_eq!(regime(3.0, -1.0).unwrap(), Regime::SelfIntersecting);
        // boundary case rho = kappa/2 - 2 is simple
        assert_eq!(regime(2.0, -1.0).unwrap(), Regime::Simple);
    }

    #[test]
    fn multiplicity_one_iff_simple() {
        for i in 0..40 {
            let kappa = 0.2 + 3.7 * i as f64 / 40.0;
            for j in 0..40 {
                let rho = -1.95 + 4.0 * j as f64 / 40.0;
                let hits = max_self_hits(kappa, rho).unwrap();
                let reg = regime(kappa, rho).unwrap();
                assert_eq!(hits == 1, reg == Regime::Simple, "({kappa},{rho})");
            }
        }
    }

    #[test]
    fn angle_range_formula() {
        let c = derive_constants(2.0).unwrap();
        let p = ImaginaryParams::new(c, 0.0, 0.0, 0.0).unwrap();
        assert!((p.angle_range() - 2.0 * PI).abs() < 1e-12);
        let p = ImaginaryParams::new(c, c.chi, 0.0, 0.0).unwrap();
        assert!((p.angle_range() - 4.0 * PI).abs() < 1e-12);
        assert!(ImaginaryParams::new(c, -c.chi - 0.1, 0.0, 0.0).is_err());
    }
}
