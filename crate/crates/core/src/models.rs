//! Performance functions g(x) for propagation.

use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar model of an input vector.
pub trait PerformanceFunction: Send + Sync {
    fn dimension(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> Result<f64>;
}

impl<P: PerformanceFunction + ?Sized> PerformanceFunction for &P {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        (**self).evaluate(x)
    }
}

impl<P: PerformanceFunction + ?Sized> PerformanceFunction for Box<P> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        (**self).evaluate(x)
    }
}

/// Counts evaluations of the wrapped function.
pub struct CallCounter<P> {
    inner: P,
    calls: AtomicUsize,
}

impl<P: PerformanceFunction> CallCounter<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn into_inner(self) -> P {
        self.inner
    }
}

impl<P: PerformanceFunction> PerformanceFunction for CallCounter<P> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.evaluate(x)
    }
}

/// Constituent properties of a unidirectional fiber composite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstituentInputs {
    /// Fiber volume fraction.
    pub v_f: f64,
    /// Matrix Young's modulus (GPa).
    pub e_m: f64,
    /// Matrix Poisson ratio.
    pub nu_m: f64,
    /// Fiber longitudinal modulus (GPa).
    pub e_1f: f64,
    /// Fiber Poisson ratio.
    pub nu_12f: f64,
}

/// Nominal E-glass/polyester constituent means in input order.
pub const CONSTITUENT_MEANS: [f64; 5] = [0.6, 3.375, 0.35, 73.01, 0.228];
/// Coefficient of variation of every constituent property.
pub const CONSTITUENT_COV: f64 = 0.05;
pub const CONSTITUENT_NAMES: [&str; 5] = ["V_f", "E_m", "nu_m", "E_1f", "nu_12f"];

impl ConstituentInputs {
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != 5 {
            return Err(Error::input(format!("expected 5 constituent inputs, got {}", x.len())));
        }
        let c = Self {
            v_f: x[0],
            e_m: x[1],
            nu_m: x[2],
            e_1f: x[3],
            nu_12f: x[4],
        };
        c.validate()?;
        Ok(c)
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.v_f, self.e_m, self.nu_m, self.e_1f, self.nu_12f]
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.v_f > 0.0
            && self.v_f < 1.0
            && self.e_m > 0.0
            && self.e_m.is_finite()
            && self.nu_m > 0.0
            && self.nu_m < 0.5
            && self.e_1f > 0.0
            && self.e_1f.is_finite()
            && self.nu_12f > 0.0
            && self.nu_12f < 0.5;
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("constituent inputs out of range: {self:?}")))
        }
    }
}

/// E(1−ν)/((1+ν)(1−2ν)).
pub fn constrained_modulus(e: f64, nu: f64) -> f64 {
    e * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu))
}

fn constrained_log_slope(nu: f64) -> f64 {
    -1.0 / (1.0 - nu) - 1.0 / (1.0 + nu) + 2.0 / (1.0 - 2.0 * nu)
}

/// Halpin–Tsai transverse modulus with its partial derivatives in
/// (V_f, E_m, E_f).
pub fn halpin_tsai(v_f: f64, e_m: f64, e_f: f64, xi: f64) -> Result<(f64, [f64; 3])> {
    let r = e_f / e_m;
    let eta = (r - 1.0) / (r + xi);
    let d = 1.0 - eta * v_f;
    if d <= 0.0 {
        return Err(Error::Model(format!("Halpin-Tsai singularity: eta*V_f = {}", eta * v_f)));
    }
    let e22 = e_m * (1.0 + xi * eta * v_f) / d;
    let de_deta = e_m * v_f * (1.0 + xi) / (d * d);
    let deta_dr = (1.0 + xi) / ((r + xi) * (r + xi));
    let de_dv = e_m * eta * (1.0 + xi) / (d * d);
    let de_def = de_deta * deta_dr / e_m;
    let de_dem = e22 / e_m - de_deta * deta_dr * e_f / (e_m * e_m);
    Ok((e22, [de_dv, de_dem, de_def]))
}

/// Closed-form transverse modulus E_22 of a unidirectional composite.
///
/// With `poisson_correction` the matrix and fiber moduli are replaced by
/// their constrained moduli, which makes E_22 depend on both Poisson
/// ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransverseModulus {
    pub xi: f64,
    pub poisson_correction: bool,
}

impl Default for TransverseModulus {
    fn default() -> Self {
        Self {
            xi: 2.0,
            poisson_correction: false,
        }
    }
}

impl TransverseModulus {
    /// E_22 and its gradient in input order (V_f, E_m, ν_m, E_1f, ν_12f).
    pub fn value_and_gradient(&self, c: &ConstituentInputs) -> Result<(f64, [f64; 5])> {
        c.validate()?;
        if self.poisson_correction {
            let mm = constrained_modulus(c.e_m, c.nu_m);
            let mf = constrained_modulus(c.e_1f, c.nu_12f);
            let (e, g) = halpin_tsai(c.v_f, mm, mf, self.xi)?;
            Ok((
                e,
                [
                    g[0],
                    g[1] * mm / c.e_m,
                    g[1] * mm * constrained_log_slope(c.nu_m),
                    g[2] * mf / c.e_1f,
                    g[2] * mf * constrained_log_slope(c.nu_12f),
                ],
            ))
        } else {
            let (e, g) = halpin_tsai(c.v_f, c.e_m, c.e_1f, self.xi)?;
            Ok((e, [g[0], g[1], 0.0, g[2], 0.0]))
        }
    }
}

impl PerformanceFunction for TransverseModulus {
    fn dimension(&self) -> usize {
        5
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value_and_gradient(&ConstituentInputs::from_slice(x)?)?.0)
    }
}

/// a·x₁ + b·x₂. Under a bivariate normal with means (μ₁, μ₂) the mean is
/// a·μ₁ + b·μ₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub a: f64,
    pub b: f64,
}

impl PerformanceFunction for Linear {
    fn dimension(&self) -> usize {
        2
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(x, 2)?;
        Ok(self.a * x[0] + self.b * x[1])
    }
}

/// x₁² + x₂². Under a bivariate normal the mean is μ₁² + σ₁² + μ₂² + σ₂²
/// for any correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadratic;

impl PerformanceFunction for Quadratic {
    fn dimension(&self) -> usize {
        2
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(x, 2)?;
        Ok(x[0] * x[0] + x[1] * x[1])
    }
}

fn check_dim(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::input(format!("expected {d} inputs, got {}", x.len())));
    }
    Ok(())
}

/// An external model run once per point: one CSV row of inputs on stdin,
/// one number on stdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subprocess {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
    pub dimension: usize,
}

impl PerformanceFunction for Subprocess {
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(x, self.dimension)?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Model(format!("cannot start `{}`: {e}", self.program)))?;
        let row = x.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",");
        let written = child.stdin.take().expect("piped stdin").write_all(format!("{row}\n").as_bytes());
        // a model that exits without reading its input is judged by its output
        match written {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                return Err(Error::Model(format!("cannot write to `{}`: {e}", self.program)))
            }
            _ => {}
        }
        let out = child.wait_with_output()?;
        if !out.status.success() {
            return Err(Error::Model(format!(
                "`{}` exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let v: f64 = text
            .trim()
            .parse()
            .map_err(|_| Error::Model(format!("`{}` printed `{}`, not a number", self.program, text.trim())))?;
        if !v.is_finite() {
            return Err(Error::Model(format!("`{}` returned {v}", self.program)));
        }
        Ok(v)
    }
}

/// A performance function selectable by name in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    TransverseModulus {
        #[serde(default = "default_xi")]
        xi: f64,
        #[serde(default)]
        poisson_correction: bool,
    },
    Linear {
        a: f64,
        b: f64,
    },
    Quadratic {},
    Subprocess {
        program: String,
        #[serde(default)]
        args: Vec<String>,
        dimension: usize,
    },
}

fn default_xi() -> f64 {
    2.0
}

impl ModelConfig {
    pub fn build(&self) -> Box<dyn PerformanceFunction> {
        match self.clone() {
            ModelConfig::TransverseModulus { xi, poisson_correction } => {
                Box::new(TransverseModulus { xi, poisson_correction })
            }
            ModelConfig::Linear { a, b } => Box::new(Linear { a, b }),
            ModelConfig::Quadratic {} => Box::new(Quadratic),
            ModelConfig::Subprocess { program, args, dimension } => Box::new(Subprocess {
                program,
                args,
                dimension,
            }),
        }
    }
}
