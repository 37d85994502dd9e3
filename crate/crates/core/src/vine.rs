//! C-vine and D-vine pair-copula constructions on a fixed structure.
//!
//! Variables are indexed 0..d in the given order. Tree j (0-based) holds
//! d−1−j edges:
//! - C-vine edge (j, i) couples x_j and x_{j+i+1} given x_0..x_{j−1};
//! - D-vine edge (j, i) couples x_i and x_{i+j+1} given x_{i+1}..x_{i+j}.
//!
//! Each pair copula takes the lower-indexed variable as its first argument.
//! All supported families are exchangeable, so the h-function of either
//! argument is `CopulaSpec::h` with the arguments ordered accordingly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::copula::{clamp_unit, CopulaSpec};
use crate::error::{Error, Result};
use crate::marginal::MarginalSpec;
use crate::rng::{open_unit, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VineKind {
    CVine,
    DVine,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVine {
    kind: VineKind,
    dimension: usize,
    pair_copulas: Vec<Vec<CopulaSpec>>,
    marginals: Vec<MarginalSpec>,
}

/// A vine with its marginals; `pair_copulas[j][i]` is edge i of tree j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVine")]
pub struct VineSpec {
    kind: VineKind,
    dimension: usize,
    pair_copulas: Vec<Vec<CopulaSpec>>,
    marginals: Vec<MarginalSpec>,
}

impl TryFrom<RawVine> for VineSpec {
    type Error = Error;
    fn try_from(r: RawVine) -> Result<Self> {
        let spec = VineSpec::new(r.kind, r.pair_copulas, r.marginals)?;
        if spec.dimension != r.dimension {
            return Err(Error::input(format!(
                "dimension {} does not match {} marginals",
                r.dimension, spec.dimension
            )));
        }
        Ok(spec)
    }
}

impl VineSpec {
    pub fn new(kind: VineKind, pair_copulas: Vec<Vec<CopulaSpec>>, marginals: Vec<MarginalSpec>) -> Result<Self> {
        let d = marginals.len();
        if d < 2 {
            return Err(Error::input("a vine needs at least two variables"));
        }
        if pair_copulas.len() != d - 1 {
            return Err(Error::input(format!("expected {} trees, got {}", d - 1, pair_copulas.len())));
        }
        for (j, tree) in pair_copulas.iter().enumerate() {
            if tree.len() != d - 1 - j {
                return Err(Error::input(format!(
                    "tree {j} needs {} pair copulas, got {}",
                    d - 1 - j,
                    tree.len()
                )));
            }
            for c in tree {
                c.validate()?;
            }
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self {
            kind,
            dimension: d,
            pair_copulas,
            marginals,
        })
    }

    /// Same pair copula on every edge.
    pub fn uniform(kind: VineKind, copula: CopulaSpec, marginals: Vec<MarginalSpec>) -> Result<Self> {
        let d = marginals.len();
        let trees = (0..d.saturating_sub(1)).map(|j| vec![copula; d - 1 - j]).collect();
        Self::new(kind, trees, marginals)
    }

    pub fn kind(&self) -> VineKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn pair_copulas(&self) -> &[Vec<CopulaSpec>] {
        &self.pair_copulas
    }

    pub fn marginals(&self) -> &[MarginalSpec] {
        &self.marginals
    }

    /// Copula log-density on the unit cube.
    pub fn copula_log_pdf(&self, u: &[f64]) -> f64 {
        self.walk(u).0
    }

    /// Conditional CDFs F(x_k | x_0..x_{k−1}) on the unit cube, the
    /// Rosenblatt transform of `u`.
    pub fn rosenblatt(&self, u: &[f64]) -> Vec<f64> {
        self.walk(u).1
    }

    fn walk(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dimension;
        assert_eq!(u.len(), d, "point dimension");
        let u: Vec<f64> = u.iter().map(|&x| clamp_unit(x)).collect();
        let pc = &self.pair_copulas;
        let mut ll = 0.0;
        match self.kind {
            VineKind::CVine => {
                // w[j][k] = F(x_k | x_0..x_{j−1}) for k ≥ j.
                let mut w = vec![vec![0.0; d]; d];
                w[0] = u;
                for j in 0..d - 1 {
                    for i in 0..d - 1 - j {
                        let (a, b) = (w[j][j], w[j][j + i + 1]);
                        let c = &pc[j][i];
                        ll += c.ln_pdf_clamped(a, b);
                        w[j + 1][j + i + 1] = clamp_unit(c.h(b, a));
                    }
                }
                (ll, (0..d).map(|k| w[k][k]).collect())
            }
            VineKind::DVine => {
                // fa[j][i] = F(x_i | x_{i+1}..x_{i+j}), fb[j][i] = F(x_{i+j} | x_i..x_{i+j−1}).
                let mut fa = vec![vec![0.0; d]; d];
                let mut fb = vec![vec![0.0; d]; d];
                fa[0] = u.clone();
                fb[0] = u;
                for j in 0..d - 1 {
                    for i in 0..d - 1 - j {
                        let (a, b) = (fa[j][i], fb[j][i + 1]);
                        let c = &pc[j][i];
                        ll += c.ln_pdf_clamped(a, b);
                        fa[j + 1][i] = clamp_unit(c.h(a, b));
                        fb[j + 1][i] = clamp_unit(c.h(b, a));
                    }
                }
                (ll, (0..d).map(|k| fb[k][0]).collect())
            }
        }
    }

    /// Inverse Rosenblatt transform: independent uniforms to a point on the
    /// unit cube with this vine copula.
    pub fn inverse_rosenblatt(&self, w: &[f64]) -> Result<Vec<f64>> {
        let d = self.dimension;
        if w.len() != d {
            return Err(Error::input(format!("expected {d} uniforms, got {}", w.len())));
        }
        let pc = &self.pair_copulas;
        match self.kind {
            VineKind::CVine => {
                let mut t = vec![vec![0.0; d]; d];
                t[0][0] = clamp_unit(w[0]);
                for k in 1..d {
                    t[k][k] = clamp_unit(w[k]);
                    for j in (0..k).rev() {
                        t[j][k] = clamp_unit(pc[j][k - j - 1].h_inverse(t[j + 1][k], t[j][j])?);
                    }
                }
                Ok(t[0].clone())
            }
            VineKind::DVine => {
                let mut fa = vec![vec![0.0; d]; d];
                let mut fb = vec![vec![0.0; d]; d];
                fa[0][0] = clamp_unit(w[0]);
                fb[0][0] = fa[0][0];
                for k in 1..d {
                    fb[k][0] = clamp_unit(w[k]);
                    for j in (0..k).rev() {
                        let i = k - j - 1;
                        fb[j][i + 1] = clamp_unit(pc[j][i].h_inverse(fb[j + 1][i], fa[j][i])?);
                    }
                    fa[0][k] = fb[0][k];
                    for j in 0..k {
                        let i = k - j - 1;
                        fa[j + 1][i] = clamp_unit(pc[j][i].h(fa[j][i], fb[j][i + 1]));
                    }
                }
                Ok(fb[0].clone())
            }
        }
    }
}

/// Joint log-density; −∞ outside the marginal support.
pub fn vine_log_pdf(spec: &VineSpec, x: &[f64]) -> f64 {
    assert_eq!(x.len(), spec.dimension, "point dimension");
    let mut ll = 0.0;
    let mut u = Vec::with_capacity(x.len());
    for (m, &xi) in spec.marginals.iter().zip(x) {
        let l = m.ln_pdf(xi);
        if !(l > f64::NEG_INFINITY) {
            return f64::NEG_INFINITY;
        }
        ll += l;
        u.push(m.cdf(xi));
    }
    ll + spec.copula_log_pdf(&u)
}

/// `n` draws by sequential inverse h-functions.
pub fn vine_sample(spec: &VineSpec, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n < 1 {
        return Err(Error::input("at least one sample is required"));
    }
    let mut rng = rng_from_seed(seed);
    vine_sample_with(spec, n, &mut rng)
}

pub fn vine_sample_with<R: Rng + ?Sized>(spec: &VineSpec, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let d = spec.dimension;
    (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..d).map(|_| open_unit(rng)).collect();
            let u = spec.inverse_rosenblatt(&w)?;
            Ok(u.iter().zip(&spec.marginals).map(|(&p, m)| m.quantile(p)).collect())
        })
        .collect()
}
