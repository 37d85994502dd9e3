//! Bivariate copula families: CDF, density, h-function and its inverse,
//! sampling and Kendall-τ conversions.
//!
//! Arguments `(u, v)` follow the convention C(u, v), with the h-function
//! conditioning on the second argument: h(u | v) = ∂C(u, v)/∂v.

mod data;
mod diagnostics;

pub use data::PseudoObs;
pub use diagnostics::{empirical_kendall_tau, empirical_pearson_rho, kendall_tau_brute_force};

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::rng::open_unit;
use crate::special::{norm_cdf, norm_ppf, StudentT};

/// Boundary clamp applied before density and h-function evaluation.
pub const EPS: f64 = 1e-12;

#[inline]
pub fn clamp_unit(u: f64) -> f64 {
    u.clamp(EPS, 1.0 - EPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CopulaFamily {
    Independence,
    Gaussian,
    StudentT,
    Clayton,
    Frank,
    Gumbel,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 6] = [
        CopulaFamily::Independence,
        CopulaFamily::Gaussian,
        CopulaFamily::StudentT,
        CopulaFamily::Clayton,
        CopulaFamily::Frank,
        CopulaFamily::Gumbel,
    ];

    pub fn arity(self) -> usize {
        match self {
            CopulaFamily::Independence => 0,
            CopulaFamily::StudentT => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Independence => "Independence",
            CopulaFamily::Gaussian => "Gaussian",
            CopulaFamily::StudentT => "StudentT",
            CopulaFamily::Clayton => "Clayton",
            CopulaFamily::Frank => "Frank",
            CopulaFamily::Gumbel => "Gumbel",
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Serialized form of a copula: family tag plus parameter array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCopula {
    family: CopulaFamily,
    params: Vec<f64>,
}

/// A validated copula family with concrete parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCopula", into = "RawCopula")]
pub enum CopulaSpec {
    Independence,
    Gaussian { rho: f64 },
    StudentT { rho: f64, nu: f64 },
    Clayton { theta: f64 },
    Frank { theta: f64 },
    Gumbel { theta: f64 },
}

impl TryFrom<RawCopula> for CopulaSpec {
    type Error = Error;
    fn try_from(raw: RawCopula) -> Result<Self> {
        CopulaSpec::new(raw.family, &raw.params)
    }
}

impl From<CopulaSpec> for RawCopula {
    fn from(spec: CopulaSpec) -> Self {
        RawCopula {
            family: spec.family(),
            params: spec.params(),
        }
    }
}

impl fmt::Display for CopulaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.family(), self.params())
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("correlation {rho} outside (-1, 1)")))
    }
}

impl CopulaSpec {
    /// Build a spec from a family tag and parameter vector, validating ranges.
    pub fn new(family: CopulaFamily, params: &[f64]) -> Result<Self> {
        if params.len() != family.arity() {
            return Err(Error::domain(format!(
                "{family} takes {} parameter(s), got {}",
                family.arity(),
                params.len()
            )));
        }
        let spec = match family {
            CopulaFamily::Independence => CopulaSpec::Independence,
            CopulaFamily::Gaussian => CopulaSpec::Gaussian { rho: params[0] },
            CopulaFamily::StudentT => CopulaSpec::StudentT {
                rho: params[0],
                nu: params[1],
            },
            CopulaFamily::Clayton => CopulaSpec::Clayton { theta: params[0] },
            CopulaFamily::Frank => CopulaSpec::Frank { theta: params[0] },
            CopulaFamily::Gumbel => CopulaSpec::Gumbel { theta: params[0] },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CopulaSpec::Independence => Ok(()),
            CopulaSpec::Gaussian { rho } => check_rho(rho),
            CopulaSpec::StudentT { rho, nu } => {
                check_rho(rho)?;
                if nu > 2.0 && nu.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain(format!("t degrees of freedom {nu} must exceed 2")))
                }
            }
            CopulaSpec::Clayton { theta } => {
                if theta > 0.0 && theta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain(format!("Clayton theta {theta} must be positive")))
                }
            }
            CopulaSpec::Frank { theta } => {
                if theta != 0.0 && theta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain(format!("Frank theta {theta} must be finite and nonzero")))
                }
            }
            CopulaSpec::Gumbel { theta } => {
                if theta >= 1.0 && theta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain(format!("Gumbel theta {theta} must be at least 1")))
                }
            }
        }
    }

    pub fn family(&self) -> CopulaFamily {
        match self {
            CopulaSpec::Independence => CopulaFamily::Independence,
            CopulaSpec::Gaussian { .. } => CopulaFamily::Gaussian,
            CopulaSpec::StudentT { .. } => CopulaFamily::StudentT,
            CopulaSpec::Clayton { .. } => CopulaFamily::Clayton,
            CopulaSpec::Frank { .. } => CopulaFamily::Frank,
            CopulaSpec::Gumbel { .. } => CopulaFamily::Gumbel,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            CopulaSpec::Independence => vec![],
            CopulaSpec::Gaussian { rho } => vec![rho],
            CopulaSpec::StudentT { rho, nu } => vec![rho, nu],
            CopulaSpec::Clayton { theta } | CopulaSpec::Frank { theta } | CopulaSpec::Gumbel { theta } => {
                vec![theta]
            }
        }
    }

    /// C(u, v).
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        if u == 0.0 || v == 0.0 {
            return 0.0;
        }
        if u == 1.0 {
            return v;
        }
        if v == 1.0 {
            return u;
        }
        let c = match *self {
            CopulaSpec::Independence => u * v,
            CopulaSpec::Gaussian { rho } => crate::special::bvn_cdf(norm_ppf(u), norm_ppf(v), rho),
            CopulaSpec::StudentT { .. } => {
                // C(u, v) = ∫_0^v h(u | w) dw
                let val = quad::integrate(|w| self.h(u, w), 0.0, v, 1e-14, 1e-13);
                val.unwrap_or(f64::NAN)
            }
            CopulaSpec::Clayton { theta } => {
                let ls = clayton_ln_s(theta, u.ln(), v.ln());
                (-ls / theta).exp()
            }
            CopulaSpec::Frank { theta } => {
                let a = (-theta * u).exp_m1();
                let b = (-theta * v).exp_m1();
                let g = (-theta).exp_m1();
                -(a * b / g).ln_1p() / theta
            }
            CopulaSpec::Gumbel { theta } => {
                let l = gumbel_ln_sum(theta, (-u.ln()).ln(), (-v.ln()).ln());
                (-(l / theta).exp()).exp()
            }
        };
        c.clamp((u + v - 1.0).max(0.0), u.min(v))
    }

    /// ln c(u, v); errors when an argument lies outside the open unit interval.
    pub fn ln_pdf(&self, u: f64, v: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
            return Err(Error::Boundary(format!("({u}, {v})")));
        }
        Ok(self.ln_pdf_clamped(u, v))
    }

    /// ln c(u, v) with arguments clamped to [ε, 1−ε].
    pub fn ln_pdf_clamped(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        match *self {
            CopulaSpec::Independence => 0.0,
            CopulaSpec::Gaussian { rho } => gaussian_ln_pdf(rho, norm_ppf(u), norm_ppf(v)),
            CopulaSpec::StudentT { rho, nu } => {
                let t = StudentT::new(nu);
                student_ln_pdf(rho, nu, t.ppf(u), t.ppf(v))
            }
            CopulaSpec::Clayton { theta } => clayton_ln_pdf(theta, u.ln(), v.ln()),
            CopulaSpec::Frank { theta } => frank_ln_pdf(theta, u, v),
            CopulaSpec::Gumbel { theta } => gumbel_ln_pdf(theta, u.ln(), v.ln()),
        }
    }

    pub fn pdf(&self, u: f64, v: f64) -> f64 {
        self.ln_pdf_clamped(u, v).exp()
    }

    /// h(u | v) = ∂C(u, v)/∂v, arguments clamped to [ε, 1−ε].
    pub fn h(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let h = match *self {
            CopulaSpec::Independence => u,
            CopulaSpec::Gaussian { rho } => {
                norm_cdf((norm_ppf(u) - rho * norm_ppf(v)) / (1.0 - rho * rho).sqrt())
            }
            CopulaSpec::StudentT { rho, nu } => {
                let t = StudentT::new(nu);
                let (x, y) = (t.ppf(u), t.ppf(v));
                let scale = ((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
                StudentT::new(nu + 1.0).cdf((x - rho * y) / scale)
            }
            CopulaSpec::Clayton { theta } => {
                let (lu, lv) = (u.ln(), v.ln());
                let ls = clayton_ln_s(theta, lu, lv);
                ((-theta - 1.0) * lv - (1.0 + 1.0 / theta) * ls).exp()
            }
            CopulaSpec::Frank { theta } => {
                let a = (-theta * u).exp_m1();
                let b = (-theta * v).exp_m1();
                let g = (-theta).exp_m1();
                (b + 1.0) * a / (g + a * b)
            }
            CopulaSpec::Gumbel { theta } => {
                let (lu, lv) = (u.ln(), v.ln());
                let (lx, ly) = ((-lu).ln(), (-lv).ln());
                let l = gumbel_ln_sum(theta, lx, ly);
                let a = (l / theta).exp();
                (-a + (1.0 / theta - 1.0) * l + (theta - 1.0) * ly - lv).exp()
            }
        };
        h.clamp(0.0, 1.0)
    }

    /// Solve h(u | v) = p for u.
    pub fn h_inverse(&self, p: f64, v: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("probability {p} outside [0, 1]")));
        }
        let (p, v) = (clamp_unit(p), clamp_unit(v));
        let u = match *self {
            CopulaSpec::Independence => p,
            CopulaSpec::Gaussian { rho } => {
                norm_cdf(norm_ppf(p) * (1.0 - rho * rho).sqrt() + rho * norm_ppf(v))
            }
            CopulaSpec::StudentT { rho, nu } => {
                let t = StudentT::new(nu);
                let y = t.ppf(v);
                let scale = ((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
                t.cdf(StudentT::new(nu + 1.0).ppf(p) * scale + rho * y)
            }
            CopulaSpec::Clayton { theta } => {
                let lv = v.ln();
                let beta = -theta * lv;
                let alpha = -theta / (1.0 + theta) * p.ln() + beta;
                let ln1 = if beta < 1.0 {
                    (alpha.exp_m1() - beta.exp_m1()).ln_1p()
                } else {
                    beta + ((alpha - beta).exp_m1() + (-beta).exp()).ln()
                };
                (-ln1 / theta).exp()
            }
            CopulaSpec::Frank { theta } => {
                let b = (-theta * v).exp_m1();
                let g = (-theta).exp_m1();
                -(p * g / (1.0 + (1.0 - p) * b)).ln_1p() / theta
            }
            CopulaSpec::Gumbel { .. } => return self.h_inverse_newton(p, v),
        };
        Ok(u.clamp(0.0, 1.0))
    }

    /// Safeguarded Newton iteration on s = ln u with bisection fallback.
    fn h_inverse_newton(&self, p: f64, v: f64) -> Result<f64> {
        const MAX_ITER: usize = 200;
        const TOL: f64 = 1e-10;
        let mut lo = EPS.ln();
        let mut hi = (1.0 - EPS).ln();
        if self.h(lo.exp(), v) >= p {
            return Ok(EPS);
        }
        if self.h(hi.exp(), v) <= p {
            return Ok(1.0 - EPS);
        }
        let mut s = p.ln().clamp(lo, hi);
        let mut resid = f64::INFINITY;
        for _ in 0..MAX_ITER {
            let u = s.exp();
            let f = self.h(u, v) - p;
            resid = f.abs();
            if resid <= 1e-3 * TOL {
                return Ok(u);
            }
            if f < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let slope = self.pdf(u, v) * u;
            let step = s - f / slope;
            s = if step.is_finite() && step > lo && step < hi {
                step
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 {
                break;
            }
        }
        let u = s.exp();
        resid = resid.min((self.h(u, v) - p).abs());
        if resid <= TOL {
            Ok(u)
        } else {
            Err(Error::Numeric {
                what: "h-function inversion",
                iterations: MAX_ITER,
                residual: resid,
            })
        }
    }

    /// One draw (u, v) in the open unit square.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        let (u, v) = match *self {
            CopulaSpec::Gaussian { rho } => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                (norm_cdf(z1), norm_cdf(rho * z1 + (1.0 - rho * rho).sqrt() * z2))
            }
            CopulaSpec::StudentT { rho, nu } => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let w = ChiSquared::new(nu).expect("validated nu").sample(rng);
                let s = (nu / w).sqrt();
                let t = StudentT::new(nu);
                (t.cdf(s * z1), t.cdf(s * (rho * z1 + (1.0 - rho * rho).sqrt() * z2)))
            }
            _ => {
                let v = open_unit(rng);
                let p = open_unit(rng);
                (self.h_inverse(p, v)?, v)
            }
        };
        Ok((clamp_unit(u), clamp_unit(v)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<(f64, f64)>> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    /// Kendall's τ of the family at these parameters.
    pub fn kendall_tau(&self) -> f64 {
        match *self {
            CopulaSpec::Independence => 0.0,
            CopulaSpec::Gaussian { rho } | CopulaSpec::StudentT { rho, .. } => 2.0 / PI * rho.asin(),
            CopulaSpec::Clayton { theta } => theta / (theta + 2.0),
            CopulaSpec::Gumbel { theta } => 1.0 - 1.0 / theta,
            CopulaSpec::Frank { theta } => frank_tau(theta),
        }
    }

    /// Lower tail dependence coefficient λ_L.
    pub fn lower_tail_dependence(&self) -> f64 {
        match *self {
            CopulaSpec::StudentT { rho, nu } => {
                let arg = -((nu + 1.0) * (1.0 - rho) / (1.0 + rho)).sqrt();
                2.0 * StudentT::new(nu + 1.0).cdf(arg)
            }
            CopulaSpec::Clayton { theta } => 2f64.powf(-1.0 / theta),
            _ => 0.0,
        }
    }

    /// Upper tail dependence coefficient λ_U.
    pub fn upper_tail_dependence(&self) -> f64 {
        match *self {
            CopulaSpec::StudentT { .. } => self.lower_tail_dependence(),
            CopulaSpec::Gumbel { theta } => 2.0 - 2f64.powf(1.0 / theta),
            _ => 0.0,
        }
    }
}

/// Default ν used when converting τ to Student-t parameters.
pub const DEFAULT_T_NU: f64 = 10.0;

/// Parameters of `family` reproducing Kendall's τ.
pub fn tau_to_param(family: CopulaFamily, tau: f64) -> Result<Vec<f64>> {
    if !(tau > -1.0 && tau < 1.0) {
        return Err(Error::domain(format!("tau {tau} outside (-1, 1)")));
    }
    let out = match family {
        CopulaFamily::Independence => {
            if tau != 0.0 {
                return Err(Error::domain("independence copula only attains tau = 0"));
            }
            vec![]
        }
        CopulaFamily::Gaussian => vec![(0.5 * PI * tau).sin()],
        CopulaFamily::StudentT => vec![(0.5 * PI * tau).sin(), DEFAULT_T_NU],
        CopulaFamily::Clayton => {
            if tau <= 0.0 {
                return Err(Error::domain("Clayton attains only tau > 0"));
            }
            vec![2.0 * tau / (1.0 - tau)]
        }
        CopulaFamily::Gumbel => {
            if tau < 0.0 {
                return Err(Error::domain("Gumbel attains only tau >= 0"));
            }
            vec![1.0 / (1.0 - tau)]
        }
        CopulaFamily::Frank => {
            if tau == 0.0 {
                return Err(Error::domain("Frank requires tau != 0"));
            }
            vec![frank_theta_from_tau(tau)?]
        }
    };
    Ok(out)
}

fn frank_theta_from_tau(tau: f64) -> Result<f64> {
    let sign = tau.signum();
    let target = tau.abs();
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while frank_tau(hi) < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::domain(format!("Frank cannot reach tau {tau}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let val = if mid == 0.0 { 0.0 } else { frank_tau(mid) };
        if val < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(sign * 0.5 * (lo + hi))
}

/// Debye function D₁(x) = (1/x) ∫₀ˣ t/(eᵗ−1) dt.
pub fn debye1(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x.abs() < 1e-4 {
        return 1.0 - x / 4.0 + x * x / 36.0;
    }
    let integrand = |t: f64| if t.abs() < 1e-10 { 1.0 - 0.5 * t } else { t / t.exp_m1() };
    let val = quad::integrate(integrand, 0.0, x, 1e-14, 1e-14).expect("smooth integrand");
    val / x
}

fn frank_tau(theta: f64) -> f64 {
    if theta.abs() < 1e-2 {
        let t3 = theta * theta * theta;
        return theta / 9.0 - t3 / 900.0 + t3 * theta * theta / 52_920.0;
    }
    1.0 - 4.0 / theta + 4.0 * debye1(theta) / theta
}

/// ln(u^{-θ} + v^{-θ} − 1) for Clayton, overflow-safe.
#[inline]
pub(crate) fn clayton_ln_s(theta: f64, lu: f64, lv: f64) -> f64 {
    let a = -theta * lu;
    let b = -theta * lv;
    let m = a.max(b);
    if m < 1.0 {
        (a.exp_m1() + b.exp_m1()).ln_1p()
    } else {
        m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
    }
}

/// ln(x^θ + y^θ) from ln x, ln y.
#[inline]
pub(crate) fn gumbel_ln_sum(theta: f64, lx: f64, ly: f64) -> f64 {
    let a = theta * lx;
    let b = theta * ly;
    let (m, d) = if a > b { (a, b - a) } else { (b, a - b) };
    m + d.exp().ln_1p()
}

#[inline]
pub(crate) fn gaussian_ln_pdf(rho: f64, x: f64, y: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    -0.5 * r2.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)
}

/// Student-t copula log density at t-scores (x, y).
#[inline]
pub(crate) fn student_ln_pdf(rho: f64, nu: f64, x: f64, y: f64) -> f64 {
    student_ln_const(rho, nu) + student_ln_kernel(rho, nu, x, y)
}

pub(crate) fn student_ln_const(rho: f64, nu: f64) -> f64 {
    use crate::special::ln_gamma;
    ln_gamma(0.5 * (nu + 2.0)) + ln_gamma(0.5 * nu)
        - 2.0 * ln_gamma(0.5 * (nu + 1.0))
        - 0.5 * (1.0 - rho * rho).ln()
}

#[inline]
pub(crate) fn student_ln_kernel(rho: f64, nu: f64, x: f64, y: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    let q = (x * x + y * y - 2.0 * rho * x * y) / (nu * r2);
    -0.5 * (nu + 2.0) * q.ln_1p() + 0.5 * (nu + 1.0) * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p())
}

#[inline]
pub(crate) fn clayton_ln_pdf(theta: f64, lu: f64, lv: f64) -> f64 {
    theta.ln_1p() + (-theta - 1.0) * (lu + lv) - (2.0 + 1.0 / theta) * clayton_ln_s(theta, lu, lv)
}

#[inline]
pub(crate) fn frank_ln_pdf(theta: f64, u: f64, v: f64) -> f64 {
    let a = (-theta * u).exp_m1();
    let b = (-theta * v).exp_m1();
    let g = (-theta).exp_m1();
    (-theta * g).ln() - theta * (u + v) - 2.0 * (g + a * b).abs().ln()
}

#[inline]
pub(crate) fn gumbel_ln_pdf(theta: f64, lu: f64, lv: f64) -> f64 {
    let (lx, ly) = ((-lu).ln(), (-lv).ln());
    gumbel_ln_pdf_scores(theta, lu, lv, lx, ly)
}

/// Gumbel log density given ln u, ln v and ln(−ln u), ln(−ln v).
#[inline]
pub(crate) fn gumbel_ln_pdf_scores(theta: f64, lu: f64, lv: f64, lx: f64, ly: f64) -> f64 {
    let l = gumbel_ln_sum(theta, lx, ly);
    let a = (l / theta).exp();
    -a - lu - lv + (theta - 1.0) * (lx + ly) + (-2.0 + 1.0 / theta) * l + (a + theta - 1.0).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn specs() -> Vec<CopulaSpec> {
        vec![
            CopulaSpec::Independence,
            CopulaSpec::Gaussian { rho: 0.5 },
            CopulaSpec::Gaussian { rho: -0.8 },
            CopulaSpec::StudentT { rho: 0.5, nu: 4.0 },
            CopulaSpec::StudentT { rho: -0.3, nu: 12.0 },
            CopulaSpec::Clayton { theta: 2.0 },
            CopulaSpec::Clayton { theta: 0.3 },
            CopulaSpec::Frank { theta: 3.0 },
            CopulaSpec::Frank { theta: -10.0 },
            CopulaSpec::Gumbel { theta: 2.0 },
            CopulaSpec::Gumbel { theta: 1.0 },
        ]
    }

    #[test]
    fn reference_cdf_values() {
        assert!((CopulaSpec::Gumbel { theta: 1.0 }.cdf(0.3, 0.7) - 0.21).abs() < 1e-14);
        assert!((CopulaSpec::Clayton { theta: 2.0 }.cdf(0.5, 0.5) - 7f64.powf(-0.5)).abs() < 1e-14);
        let frank = -(1.0 + ((-1.5f64).exp() - 1.0).powi(2) / ((-3f64).exp() - 1.0)).ln() / 3.0;
        assert!((CopulaSpec::Frank { theta: 3.0 }.cdf(0.5, 0.5) - frank).abs() < 1e-14);
        assert!((frank - 0.33608).abs() < 1e-5);
    }

    #[test]
    fn clayton_h_reference() {
        let h = CopulaSpec::Clayton { theta: 2.0 }.h(0.5, 0.5);
        assert!((h - 8.0 * 7f64.powf(-1.5)).abs() < 1e-14);
    }

    #[test]
    fn margins_and_frechet_bounds() {
        for spec in specs() {
            for i in 0..=10 {
                let u = i as f64 / 10.0;
                assert!((spec.cdf(u, 1.0) - u).abs() < 1e-12);
                assert!((spec.cdf(1.0, u) - u).abs() < 1e-12);
                assert_eq!(spec.cdf(u, 0.0), 0.0);
                for j in 0..=10 {
                    let v = j as f64 / 10.0;
                    let c = spec.cdf(u, v);
                    assert!(c >= (u + v - 1.0).max(0.0) - 1e-15 && c <= u.min(v) + 1e-15);
                }
            }
        }
    }

    #[test]
    fn h_matches_finite_difference_of_cdf() {
        for spec in specs() {
            for &(u, v) in &[(0.2, 0.3), (0.5, 0.5), (0.9, 0.15), (0.7, 0.8)] {
                let d = 1e-5;
                let fd = (spec.cdf(u, v + d) - spec.cdf(u, v - d)) / (2.0 * d);
                assert!((spec.h(u, v) - fd).abs() < 1e-5, "{spec} ({u},{v})");
            }
        }
    }

    #[test]
    fn h_inverse_round_trip() {
        for spec in specs() {
            for &p in &[1e-6, 0.01, 0.3, 0.5, 0.77, 0.999] {
                for &v in &[1e-4, 0.2, 0.5, 0.95] {
                    let u = spec.h_inverse(p, v).unwrap();
                    assert!((spec.h(u, v) - p).abs() < 1e-10, "{spec} p={p} v={v}");
                }
            }
        }
    }

    #[test]
    fn frank_inverse_matches_bisection() {
        let spec = CopulaSpec::Frank { theta: 3.0 };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if spec.h(mid, 0.5) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((spec.h_inverse(0.5, 0.5).unwrap() - 0.5 * (lo + hi)).abs() < 1e-8);
    }

    #[test]
    fn frank_density_closed_form() {
        let (t, u, v) = (3.0f64, 0.5f64, 0.5f64);
        let e = |x: f64| (-t * x).exp();
        let num = t * (1.0 - e(1.0)) * e(u + v);
        let den = ((1.0 - e(1.0)) - (1.0 - e(u)) * (1.0 - e(v))).powi(2);
        let got = CopulaSpec::Frank { theta: t }.ln_pdf(u, v).unwrap();
        assert!((got - (num / den).ln()).abs() < 1e-13);
    }

    #[test]
    fn boundary_is_rejected_by_checked_density() {
        assert!(matches!(
            CopulaSpec::Frank { theta: 3.0 }.ln_pdf(0.0, 0.5),
            Err(Error::Boundary(_))
        ));
    }

    #[test]
    fn kendall_tau_closed_forms() {
        assert!((CopulaSpec::Clayton { theta: 2.0 }.kendall_tau() - 0.5).abs() < 1e-15);
        assert!((CopulaSpec::Gumbel { theta: 2.0 }.kendall_tau() - 0.5).abs() < 1e-15);
        assert!((CopulaSpec::Gaussian { rho: 0.5 }.kendall_tau() - 1.0 / 3.0).abs() < 1e-15);
        // continuity across the small-theta series switch
        let a = frank_tau(0.01 - 1e-13);
        let b = frank_tau(0.01 + 1e-13);
        assert!((a - b).abs() < 1e-13);
        assert!((frank_tau(-3.0) + frank_tau(3.0)).abs() < 1e-12);
    }

    #[test]
    fn tau_round_trips() {
        assert_eq!(tau_to_param(CopulaFamily::Clayton, 0.5).unwrap(), vec![2.0]);
        assert!((tau_to_param(CopulaFamily::Gaussian, 1.0 / 3.0).unwrap()[0] - 0.5).abs() < 1e-15);
        for &tau in &[-0.7, -0.2, 0.001, 0.2, 0.6, 0.9] {
            let theta = tau_to_param(CopulaFamily::Frank, tau).unwrap()[0];
            let back = CopulaSpec::Frank { theta }.kendall_tau();
            assert!((back - tau).abs() < 1e-8, "tau={tau}");
        }
        assert!(tau_to_param(CopulaFamily::Clayton, -0.1).is_err());
        assert!(tau_to_param(CopulaFamily::Gumbel, 1.0).is_err());
    }

    #[test]
    fn near_independence_limits() {
        for spec in [
            CopulaSpec::Frank { theta: 1e-6 },
            CopulaSpec::Clayton { theta: 1e-6 },
            CopulaSpec::Gumbel { theta: 1.0 },
        ] {
            for &(u, v) in &[(0.1, 0.9), (0.5, 0.5), (0.99, 0.02)] {
                assert!((spec.pdf(u, v) - 1.0).abs() < 1e-3, "{spec}");
            }
        }
    }

    #[test]
    fn student_tail_dependence_self_consistent() {
        let spec = CopulaSpec::StudentT { rho: 0.5, nu: 4.0 };
        let lambda = spec.lower_tail_dependence();
        // λ_L = lim_{u→0} C(u, u)/u = lim 2 h(u | u) for exchangeable copulas
        let approx = 2.0 * spec.h(1e-9, 1e-9);
        assert!((approx - lambda).abs() < 2e-3, "{approx} vs {lambda}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = CopulaSpec::Gumbel { theta: 1.7 };
        let a = spec.sample(50, &mut rng_from_seed(3)).unwrap();
        let b = spec.sample(50, &mut rng_from_seed(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&(u, v)| u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0));
    }

    #[test]
    fn serde_round_trip_and_validation() {
        let spec = CopulaSpec::StudentT { rho: 0.123_456_789_012_345_67, nu: 7.5 };
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"family":"StudentT","params":[0.12345678901234566,7.5]}"#);
        let back: CopulaSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<CopulaSpec>(r#"{"family":"Clayton","params":[-0.5]}"#).is_err());
        assert!(CopulaSpec::new(CopulaFamily::Gaussian, &[0.1, 0.2]).is_err());
    }
}
