use crate::error::{Error, Result};
use crate::special::{norm_ppf, StudentT};

use super::{
    clamp_unit, clayton_ln_pdf, frank_ln_pdf, gumbel_ln_pdf_scores, student_ln_const, student_ln_kernel,
    CopulaSpec,
};

/// Pseudo-observations on the unit square with cached transforms, so that
/// copula log-likelihoods avoid recomputing logs and normal scores.
#[derive(Debug, Clone)]
pub struct PseudoObs {
    u: Vec<f64>,
    v: Vec<f64>,
    ln_u: Vec<f64>,
    ln_v: Vec<f64>,
    lnln_u: Vec<f64>,
    lnln_v: Vec<f64>,
    z_u: Vec<f64>,
    z_v: Vec<f64>,
    sum_sq: f64,
    sum_xy: f64,
}

impl PseudoObs {
    /// Clamps each coordinate to [ε, 1−ε].
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::input("no pseudo-observations"));
        }
        if pairs.iter().any(|(a, b)| !(a.is_finite() && b.is_finite())) {
            return Err(Error::input("non-finite pseudo-observation"));
        }
        let u: Vec<f64> = pairs.iter().map(|p| clamp_unit(p.0)).collect();
        let v: Vec<f64> = pairs.iter().map(|p| clamp_unit(p.1)).collect();
        let ln_u: Vec<f64> = u.iter().map(|x| x.ln()).collect();
        let ln_v: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        let lnln_u = ln_u.iter().map(|x| (-x).ln()).collect();
        let lnln_v = ln_v.iter().map(|x| (-x).ln()).collect();
        let z_u: Vec<f64> = u.iter().map(|&a| norm_ppf(a)).collect();
        let z_v: Vec<f64> = v.iter().map(|&b| norm_ppf(b)).collect();
        let (mut sum_sq, mut sum_xy) = (0.0, 0.0);
        for (&x, &y) in z_u.iter().zip(&z_v) {
            sum_sq += x * x + y * y;
            sum_xy += x * y;
        }
        Ok(Self {
            u,
            v,
            ln_u,
            ln_v,
            lnln_u,
            lnln_v,
            z_u,
            z_v,
            sum_sq,
            sum_xy,
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.u.iter().copied().zip(self.v.iter().copied()).collect()
    }

    /// Σ ln c(u_i, v_i).
    pub fn log_likelihood(&self, spec: &CopulaSpec) -> f64 {
        let n = self.len() as f64;
        match *spec {
            CopulaSpec::Independence => 0.0,
            CopulaSpec::Gaussian { rho } => {
                let r2 = 1.0 - rho * rho;
                -0.5 * n * r2.ln() - (rho * rho * self.sum_sq - 2.0 * rho * self.sum_xy) / (2.0 * r2)
            }
            CopulaSpec::StudentT { rho, nu } => {
                let scores = self.student_scores(nu);
                self.student_log_likelihood(rho, nu, &scores)
            }
            CopulaSpec::Clayton { theta } => self
                .ln_u
                .iter()
                .zip(&self.ln_v)
                .map(|(&a, &b)| clayton_ln_pdf(theta, a, b))
                .sum(),
            CopulaSpec::Frank { theta } => self
                .u
                .iter()
                .zip(&self.v)
                .map(|(&a, &b)| frank_ln_pdf(theta, a, b))
                .sum(),
            CopulaSpec::Gumbel { theta } => (0..self.len())
                .map(|i| {
                    gumbel_ln_pdf_scores(theta, self.ln_u[i], self.ln_v[i], self.lnln_u[i], self.lnln_v[i])
                })
                .sum(),
        }
    }

    /// Adds ln c(u_i, v_i) to `out[i]` for every observation.
    pub fn add_ln_pdf(&self, spec: &CopulaSpec, out: &mut [f64]) {
        assert_eq!(out.len(), self.len(), "output length");
        match *spec {
            CopulaSpec::Independence => {}
            CopulaSpec::Gaussian { rho } => {
                let r2 = 1.0 - rho * rho;
                let c = -0.5 * r2.ln();
                for (o, (&x, &y)) in out.iter_mut().zip(self.z_u.iter().zip(&self.z_v)) {
                    *o += c - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2);
                }
            }
            CopulaSpec::StudentT { rho, nu } => {
                let c = student_ln_const(rho, nu);
                for (o, (x, y)) in out.iter_mut().zip(self.student_scores(nu)) {
                    *o += c + student_ln_kernel(rho, nu, x, y);
                }
            }
            CopulaSpec::Clayton { theta } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o += clayton_ln_pdf(theta, self.ln_u[i], self.ln_v[i]);
                }
            }
            CopulaSpec::Frank { theta } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o += frank_ln_pdf(theta, self.u[i], self.v[i]);
                }
            }
            CopulaSpec::Gumbel { theta } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o += gumbel_ln_pdf_scores(theta, self.ln_u[i], self.ln_v[i], self.lnln_u[i], self.lnln_v[i]);
                }
            }
        }
    }

    /// t-scores (t_ν⁻¹(u_i), t_ν⁻¹(v_i)); reusable across correlations.
    pub fn student_scores(&self, nu: f64) -> Vec<(f64, f64)> {
        let t = StudentT::new(nu);
        self.u.iter().zip(&self.v).map(|(&a, &b)| (t.ppf(a), t.ppf(b))).collect()
    }

    /// Student-t copula log-likelihood from precomputed t-scores.
    pub fn student_log_likelihood(&self, rho: f64, nu: f64, scores: &[(f64, f64)]) -> f64 {
        let c = student_ln_const(rho, nu);
        scores
            .iter()
            .map(|&(x, y)| student_ln_kernel(rho, nu, x, y))
            .sum::<f64>()
            + c * scores.len() as f64
    }
}
