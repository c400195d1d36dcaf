//! Constitutive maps of the bounded auxiliary variable `u`.
//!
//! `theta(u)` is the effective saturation; `K(u)` and `Kbar(u)` are the
//! diffusive and advective conductivities. All three are extended to the whole
//! real line: `theta(u) = u` below zero and point-symmetric about `(u*, 1)`
//! above saturation, while `K` and `Kbar` are even in `u` and constant beyond
//! `u*`.

use thiserror::Error;

/// Below this value of `u` the advective ratio `Kbar(u)/u` is replaced by its
/// analytic limit at the dry end.
pub const EPS_DEGENERATE: f64 = 1e-12;

/// Saturations below this use the leading-order expansion of the
/// van Genuchten-Mualem relative conductivity.
pub const VGM_TAYLOR_SWITCH: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum ConstitutiveError {
    #[error("invalid soil parameter {name} = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("Peclet ratio is ill-posed at u = {u:e}: K(u) = {k:e} vanishes while beta(u) = {beta:e} does not")]
    IllPosedPeclet { u: f64, k: f64, beta: f64 },
}

/// Soil families. Brooks-Corey and Haverkamp are carried for the dry-limit
/// analysis of the advective ratio; the solvers default to van Genuchten-Mualem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SoilKind {
    VanGenuchtenMualem,
    Gardner,
    /// relative conductivity `S^b`
    BrooksCorey { b: f64 },
    /// `S = 1/(1 + |alpha psi|^beta)`, `K_r = 1/(1 + |a psi|^gamma)`
    Haverkamp { a: f64, beta: f64, gamma: f64 },
}

/// Map from `u` to saturation on the core interval `[0, u*]`, with `u* = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SaturationCore {
    #[default]
    Identity,
    /// `theta = u^p` with `p >= 1`
    Power { exponent: f64 },
}

impl SaturationCore {
    /// Saturation point `u*` where `theta(u*) = 1`.
    pub const fn saturation_point(&self) -> f64 {
        1.0
    }

    fn value(&self, u: f64) -> f64 {
        match *self {
            SaturationCore::Identity => u,
            SaturationCore::Power { exponent } => u.powf(exponent),
        }
    }

    fn derivative(&self, u: f64) -> f64 {
        match *self {
            SaturationCore::Identity => 1.0,
            SaturationCore::Power { exponent } => {
                if exponent == 1.0 {
                    1.0
                } else {
                    exponent * u.powf(exponent - 1.0)
                }
            }
        }
    }

    fn inverse(&self, s: f64) -> f64 {
        match *self {
            SaturationCore::Identity => s,
            SaturationCore::Power { exponent } => s.powf(1.0 / exponent),
        }
    }

    /// Right derivative at `u = 0`, i.e. the constant in `theta ~ c u`.
    fn slope_at_zero(&self) -> f64 {
        self.derivative(0.0)
    }
}

/// Homogeneous soil parameter bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoilModel {
    kind: SoilKind,
    ks: f64,
    alpha: f64,
    n: f64,
    theta_s: f64,
    theta_r: f64,
    core: SaturationCore,
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> ConstitutiveError {
    ConstitutiveError::InvalidParameter { name, value, reason }
}

impl SoilModel {
    pub fn new(
        kind: SoilKind,
        ks: f64,
        alpha: f64,
        n: f64,
        theta_s: f64,
        theta_r: f64,
    ) -> Result<SoilModel, ConstitutiveError> {
        if !(ks > 0.0) || !ks.is_finite() {
            return Err(invalid("Ks", ks, "must be positive"));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(invalid("alpha", alpha, "must be positive"));
        }
        if !(n > 1.0) || !n.is_finite() {
            return Err(invalid("n", n, "must exceed 1"));
        }
        if !(theta_s > theta_r) {
            return Err(invalid("theta_s", theta_s, "must exceed theta_r"));
        }
        degenerate_beta_limit(kind, ks, SaturationCore::Identity)?;
        Ok(SoilModel {
            kind,
            ks,
            alpha,
            n,
            theta_s,
            theta_r,
            core: SaturationCore::Identity,
        })
    }

    pub fn van_genuchten(ks: f64, alpha: f64, n: f64, theta_s: f64, theta_r: f64) -> Result<SoilModel, ConstitutiveError> {
        SoilModel::new(SoilKind::VanGenuchtenMualem, ks, alpha, n, theta_s, theta_r)
    }

    pub fn with_core(mut self, core: SaturationCore) -> Result<SoilModel, ConstitutiveError> {
        if let SaturationCore::Power { exponent } = core {
            if !(exponent >= 1.0) || !exponent.is_finite() {
                return Err(invalid("core exponent", exponent, "must be at least 1"));
            }
        }
        self.core = core;
        Ok(self)
    }

    pub fn kind(&self) -> SoilKind {
        self.kind
    }
    pub fn ks(&self) -> f64 {
        self.ks
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn n(&self) -> f64 {
        self.n
    }
    pub fn m(&self) -> f64 {
        1.0 - 1.0 / self.n
    }
    pub fn h_cap(&self) -> f64 {
        1.0 / self.alpha
    }
    pub fn theta_s(&self) -> f64 {
        self.theta_s
    }
    pub fn theta_r(&self) -> f64 {
        self.theta_r
    }
    pub fn porosity(&self) -> f64 {
        self.theta_s - self.theta_r
    }
    pub fn core(&self) -> SaturationCore {
        self.core
    }

    /// Effective saturation `theta(u)` on the whole real line.
    pub fn theta(&self, u: f64) -> f64 {
        let us = self.core.saturation_point();
        if u < 0.0 {
            u
        } else if u <= us {
            self.core.value(u)
        } else {
            2.0 - self.theta(2.0 * us - u)
        }
    }

    /// Derivative of [`SoilModel::theta`]; right derivative at kinks.
    pub fn theta_prime(&self, u: f64) -> f64 {
        let us = self.core.saturation_point();
        if u < 0.0 {
            1.0
        } else if u < us {
            self.core.derivative(u)
        } else if u == us {
            // right derivative: reflected left derivative of the core
            self.core.derivative(us)
        } else {
            self.theta_prime(2.0 * us - u)
        }
    }

    /// Inverse of [`SoilModel::theta`]; used to turn saturation data into `u`.
    pub fn theta_inverse(&self, theta: f64) -> f64 {
        let us = self.core.saturation_point();
        if theta < 0.0 {
            theta
        } else if theta <= 1.0 {
            self.core.inverse(theta)
        } else {
            2.0 * us - self.theta_inverse(2.0 - theta)
        }
    }

    /// Saturation that feeds the conductivities: `theta` of `|u|` capped at `u*`.
    fn folded_saturation(&self, u: f64) -> f64 {
        let us = self.core.saturation_point();
        self.core.value(u.abs().min(us)).clamp(0.0, 1.0)
    }

    /// Relative conductivity `K_rel(s)` for a saturation `s` in `[0, 1]`,
    /// including the factor `Ks`.
    pub fn relative_conductivity(&self, s: f64) -> f64 {
        let ks = self.ks;
        match self.kind {
            SoilKind::VanGenuchtenMualem => vgm_krel(ks, self.m(), s),
            SoilKind::Gardner => ks * s,
            SoilKind::BrooksCorey { b } => ks * s.powf(b),
            SoilKind::Haverkamp { a, beta, gamma } => {
                if s <= 0.0 {
                    0.0
                } else if s >= 1.0 {
                    ks
                } else {
                    let psi = (1.0 / s - 1.0).powf(1.0 / beta) / self.alpha;
                    ks / (1.0 + (a * psi).powf(gamma))
                }
            }
        }
    }

    /// `K_rel(s)/s` with its limit at `s = 0`.
    fn krel_over_s(&self, s: f64) -> f64 {
        if s > 0.0 {
            return self.relative_conductivity(s) / s;
        }
        match self.kind {
            SoilKind::Gardner => self.ks,
            _ => 0.0,
        }
    }

    fn diffusive_of_saturation(&self, s: f64) -> f64 {
        match self.kind {
            SoilKind::VanGenuchtenMualem => {
                let m = self.m();
                let pre = self.h_cap() / (self.n - 1.0);
                if s <= 0.0 {
                    0.0
                } else if s < VGM_TAYLOR_SWITCH {
                    // Krel * s^(-1/m) ~ Ks m^2 s^(1/2 + 1/m)
                    pre * self.ks * m * m * s.powf(0.5 + 1.0 / m)
                } else {
                    pre * vgm_krel(self.ks, m, s) * s.powf(-1.0 / m)
                }
            }
            // exponential-soil diffusivity h_cap * Krel / s, exact for Gardner
            _ => self.h_cap() * self.krel_over_s(s),
        }
    }

    /// Diffusive conductivity `K(u)`.
    pub fn k_diffusive(&self, u: f64) -> f64 {
        self.diffusive_of_saturation(self.folded_saturation(u))
    }

    /// Advective conductivity `Kbar(u) = K_rel(theta(u))`.
    pub fn k_advective(&self, u: f64) -> f64 {
        self.relative_conductivity(self.folded_saturation(u))
    }

    /// Analytic value of `Kbar(u)/u` as `u -> 0+`.
    pub fn beta_limit(&self) -> f64 {
        // validated at construction
        degenerate_beta_limit(self.kind, self.ks, self.core).unwrap_or(0.0)
    }

    /// Advective ratio `Kbar(u)/u`, replaced by its dry limit for
    /// `u <= EPS_DEGENERATE`.
    pub fn beta(&self, u: f64) -> f64 {
        if u <= EPS_DEGENERATE {
            self.beta_limit()
        } else {
            self.k_advective(u) / u
        }
    }

    /// Peclet ratio `rho(u) = beta(u)/K(u)`.
    pub fn peclet_ratio(&self, u: f64) -> Result<f64, ConstitutiveError> {
        let beta = self.beta(u);
        let k = self.k_diffusive(u);
        if k <= 0.0 {
            if beta <= 0.0 {
                return Ok(0.0);
            }
            return Err(ConstitutiveError::IllPosedPeclet { u, k, beta });
        }
        Ok(beta / k)
    }
}

/// Limit of `Kbar(u)/u` at the dry end. Errors when that limit is not finite
/// (Brooks-Corey with `b <= 1`, Haverkamp with `gamma <= beta`).
pub fn degenerate_beta_limit(kind: SoilKind, ks: f64, core: SaturationCore) -> Result<f64, ConstitutiveError> {
    match kind {
        SoilKind::VanGenuchtenMualem => Ok(0.0),
        SoilKind::Gardner => Ok(ks * core.slope_at_zero()),
        SoilKind::BrooksCorey { b } => {
            if b > 1.0 && b.is_finite() {
                Ok(0.0)
            } else {
                Err(invalid("B", b, "Brooks-Corey dry limit requires B > 1"))
            }
        }
        SoilKind::Haverkamp { a, beta, gamma } => {
            if !(a > 0.0) {
                return Err(invalid("A", a, "must be positive"));
            }
            if !(beta > 0.0) {
                return Err(invalid("beta", beta, "must be positive"));
            }
            if gamma > beta && gamma.is_finite() {
                Ok(0.0)
            } else {
                Err(invalid("gamma", gamma, "Haverkamp dry limit requires gamma > beta"))
            }
        }
    }
}

/// Van Genuchten-Mualem relative conductivity `Ks sqrt(s) (1 - (1 - s^(1/m))^m)^2`.
///
/// Small saturations use the expansion `Ks m^2 s^(1/2 + 2/m)`; elsewhere the
/// bracket is evaluated as `-expm1(m ln(1 - s^(1/m)))`, which avoids the
/// cancellation in `1 - (1 - x)^m` for small `x`.
pub fn vgm_krel(ks: f64, m: f64, s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        ks
    } else if s < VGM_TAYLOR_SWITCH {
        vgm_krel_taylor(ks, m, s)
    } else {
        let x = s.powf(1.0 / m);
        let bracket = -(m * (-x).ln_1p()).exp_m1();
        ks * s.sqrt() * bracket * bracket
    }
}

/// Leading-order expansion of [`vgm_krel`] at the dry end.
pub fn vgm_krel_taylor(ks: f64, m: f64, s: f64) -> f64 {
    ks * m * m * s.powf(0.5 + 2.0 / m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vgm(ks: f64, alpha: f64, n: f64) -> SoilModel {
        SoilModel::van_genuchten(ks, alpha, n, 0.45, 0.05).unwrap()
    }

    fn naive_krel(ks: f64, m: f64, s: f64) -> f64 {
        ks * s.sqrt() * (1.0 - (1.0 - s.powf(1.0 / m)).powf(m)).powi(2)
    }

    #[test]
    fn saturation_extension() {
        let soil = vgm(5.0, 0.05, 2.0);
        assert_eq!(soil.theta(-0.1), -0.1);
        assert_eq!(soil.theta(0.0), 0.0);
        assert_eq!(soil.theta(1.0), 1.0);
        assert_eq!(soil.theta(1.5), 2.0 - soil.theta(0.5));
        assert_eq!(soil.theta(1.5), 1.5);
        assert_eq!(soil.theta_inverse(0.2), 0.2);
    }

    #[test]
    fn theta_prime_matches_central_differences() {
        let h = 1e-6;
        for core in [SaturationCore::Identity, SaturationCore::Power { exponent: 3.0 }] {
            let soil = vgm(1.0, 1.0, 2.0).with_core(core).unwrap();
            for u in [-0.5, 0.3, 1.2] {
                let fd = (soil.theta(u + h) - soil.theta(u - h)) / (2.0 * h);
                assert!((soil.theta_prime(u) - fd).abs() <= 1e-6, "{core:?} u={u}");
            }
        }
        assert_eq!(vgm(1.0, 1.0, 2.0).theta_prime(0.7), 1.0);
    }

    #[test]
    fn theta_strictly_increasing() {
        for core in [SaturationCore::Identity, SaturationCore::Power { exponent: 2.0 }] {
            let soil = vgm(1.0, 1.0, 2.0).with_core(core).unwrap();
            let n = 10_000;
            let mut prev = soil.theta(-2.0);
            for k in 1..=n {
                let u = -2.0 + 5.0 * k as f64 / n as f64;
                let t = soil.theta(u);
                assert!(t > prev, "u = {u}");
                prev = t;
            }
        }
    }

    #[test]
    fn power_core_inverse() {
        let soil = vgm(1.0, 1.0, 2.0).with_core(SaturationCore::Power { exponent: 2.0 }).unwrap();
        for th in [-0.3, 0.0, 0.25, 1.0, 1.6] {
            assert!((soil.theta(soil.theta_inverse(th)) - th).abs() < 1e-14);
        }
        assert!(vgm(1.0, 1.0, 2.0).with_core(SaturationCore::Power { exponent: 0.5 }).is_err());
    }

    #[test]
    fn vgm_diffusive_values() {
        let soil = vgm(5.0, 0.05, 2.0);
        // theta = 1: Krel = Ks, so K = h_cap Ks / (n - 1)
        assert!((soil.k_diffusive(1.0) - 20.0 * 5.0).abs() < 1e-12);
        assert_eq!(soil.k_diffusive(0.0), 0.0);
        for u in [0.1, 0.5] {
            assert_eq!(soil.k_diffusive(-u), soil.k_diffusive(u));
        }
        assert_eq!(soil.k_diffusive(1.7), soil.k_diffusive(1.0));
        // continuity at both ends of the core interval
        assert!(soil.k_diffusive(1e-9) < 1e-20);
        assert!((soil.k_diffusive(1.0 - 1e-12) - soil.k_diffusive(1.0)).abs() < 1e-3);
    }

    #[test]
    fn vgm_advective_values() {
        let soil = vgm(5.0, 0.05, 2.0);
        assert_eq!(soil.k_advective(1.0), 5.0);
        assert_eq!(soil.k_advective(0.0), 0.0);
        let expected = 5.0 * 0.5f64.sqrt() * (1.0 - 0.75f64.sqrt()).powi(2);
        assert!((soil.k_advective(0.5) - expected).abs() < 1e-15);
        assert_eq!(soil.k_advective(-0.3), soil.k_advective(0.3));
        assert_eq!(soil.k_advective(2.5), 5.0);
    }

    #[test]
    fn beta_values() {
        let soil = vgm(10.0, 1.0, 2.0);
        assert_eq!(soil.beta(0.0), 0.0);
        assert_eq!(soil.beta(1e-13), 0.0);
        let direct = soil.k_advective(0.5) / 0.5;
        assert!((soil.beta(0.5) - direct).abs() < 1e-15);
        // small-saturation asymptote Ks m^2 S^(2/m - 1/2)
        let s: f64 = 1e-3;
        let asym = 10.0 * 0.25 * s.powf(3.5);
        assert!((soil.beta(s) / asym - 1.0).abs() < 1e-3);

        let gardner = SoilModel::new(SoilKind::Gardner, 3.0, 0.1, 2.0, 0.4, 0.1).unwrap();
        assert_eq!(gardner.beta(0.0), 3.0);
        assert!((gardner.beta(1e-6) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_regimes_are_rejected() {
        assert!(SoilModel::new(SoilKind::BrooksCorey { b: 1.0 }, 1.0, 1.0, 2.0, 0.4, 0.1).is_err());
        assert!(SoilModel::new(SoilKind::Haverkamp { a: 1.0, beta: 2.0, gamma: 2.0 }, 1.0, 1.0, 2.0, 0.4, 0.1).is_err());
        assert!(SoilModel::van_genuchten(1.0, 1.0, 1.0, 0.4, 0.1).is_err());
        assert!(SoilModel::van_genuchten(0.0, 1.0, 2.0, 0.4, 0.1).is_err());
        assert!(SoilModel::van_genuchten(1.0, -1.0, 2.0, 0.4, 0.1).is_err());
        assert!(SoilModel::van_genuchten(1.0, 1.0, 2.0, 0.1, 0.4).is_err());
        assert!(degenerate_beta_limit(SoilKind::BrooksCorey { b: 0.5 }, 1.0, SaturationCore::Identity).is_err());
    }

    #[test]
    fn peclet_ratio_behaviour() {
        let soil = vgm(10.0, 1.0, 2.0);
        assert_eq!(soil.peclet_ratio(0.0).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let r = soil.peclet_ratio(10f64.powi(-k)).unwrap();
            assert!(r >= 0.0 && r < prev, "k = {k}: {r} vs {prev}");
            prev = r;
        }
        let lo = vgm(1.0, 0.01, 2.0).peclet_ratio(0.5).unwrap();
        let hi = vgm(1.0, 1.0, 2.0).peclet_ratio(0.5).unwrap();
        assert!((hi / lo - 100.0).abs() < 1e-9);
        // direct quotient for n = 2 under the identity core: alpha (n - 1) u
        assert!((hi - 0.5).abs() < 1e-12);

        let gardner = SoilModel::new(SoilKind::Gardner, 2.0, 0.5, 2.0, 0.4, 0.1).unwrap();
        let r = gardner.peclet_ratio(1e-9).unwrap();
        assert!((r - 2.0 / gardner.k_diffusive(1e-9)).abs() < 1e-12);
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn taylor_branch_against_full_formula() {
        for m in [0.5, 0.3, 0.8] {
            let s = 1e-7;
            let full = vgm_krel(2.0, m, s);
            let taylor = vgm_krel_taylor(2.0, m, s);
            assert!((taylor / full - 1.0).abs() < 1e-9);
        }
        // away from the dry end the stable and naive forms agree
        for s in [0.01, 0.3, 0.9] {
            assert!((vgm_krel(1.0, 0.5, s) - naive_krel(1.0, 0.5, s)).abs() < 1e-13);
        }
    }
}
