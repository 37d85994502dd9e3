//! Special functions: normal, Student-t and gamma distribution functions,
//! and the bivariate normal orthant probability.
//!
//! The complementary error function comes from `libm`; its inverse, ln Γ and
//! the regularized incomplete gamma functions come from `statrs`. Everything
//! built on top of them (quantiles, the t family, bivariate normal CDF) lives
//! here.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;
pub use statrs::function::gamma::ln_gamma;
use statrs::function::gamma::{gamma_lr, gamma_ur};

/// ln(1/√(2π))
pub const LN_FRAC_1_SQRT_2PI: f64 = -0.918_938_533_204_672_7;

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (LN_FRAC_1_SQRT_2PI - 0.5 * x * x).exp()
}

#[inline]
pub fn norm_ln_pdf(x: f64) -> f64 {
    LN_FRAC_1_SQRT_2PI - 0.5 * x * x
}

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal quantile. Returns ±∞ at 0 and 1.
#[inline]
pub fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    // one Halley step on the lower tail probability of min(p, 1 − p)
    let (xl, q) = if x <= 0.0 { (x, p) } else { (-x, 1.0 - p) };
    let e = (norm_cdf(xl) - q) / norm_pdf(xl);
    let xl = xl - e / (1.0 + 0.5 * xl * e);
    if x <= 0.0 {
        xl
    } else {
        -xl
    }
}

/// Regularized incomplete beta I_x(a, b), given y = 1 − x and ln B(a, b).
fn beta_reg(a: f64, b: f64, x: f64, y: f64, ln_beta: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let front = (a * x.ln() + b * y.ln() - ln_beta).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, y) / b
    }
}

/// Continued fraction of the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Student-t distribution with continuous degrees of freedom `nu > 0`.
#[derive(Debug, Clone, Copy)]
pub struct StudentT {
    nu: f64,
    ln_norm: f64,
    /// ln B(ν/2, 1/2)
    ln_beta: f64,
}

impl StudentT {
    pub fn new(nu: f64) -> Self {
        let ln_beta = ln_gamma(0.5 * nu) + 0.5 * PI.ln() - ln_gamma(0.5 * (nu + 1.0));
        let ln_norm = -ln_beta - 0.5 * nu.ln();
        Self { nu, ln_norm, ln_beta }
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    #[inline]
    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.ln_norm - 0.5 * (self.nu + 1.0) * (x * x / self.nu).ln_1p()
    }

    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// P(T > |x|), computed without cancellation in the far tail.
    fn upper_tail(&self, x: f64) -> f64 {
        let x2 = x * x;
        let (w, w_c) = (x2 / (self.nu + x2), self.nu / (self.nu + x2));
        if x2 < self.nu {
            0.5 - 0.5 * beta_reg(0.5, 0.5 * self.nu, w, w_c, self.ln_beta)
        } else {
            0.5 * beta_reg(0.5 * self.nu, 0.5, w_c, w, self.ln_beta)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        let tail = self.upper_tail(x);
        if x < 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }

    /// Quantile by safeguarded Newton iteration on the tail probability.
    pub fn ppf(&self, p: f64) -> f64 {
        if p.is_nan() {
            return f64::NAN;
        }
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        if p == 0.5 {
            return 0.0;
        }
        let (q, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
        sign * self.upper_tail_inverse(q)
    }

    /// Solve P(T > x) = q for x > 0, q in (0, 0.5).
    fn upper_tail_inverse(&self, q: f64) -> f64 {
        let nu = self.nu;
        let z = -norm_ppf(q);
        let z2 = z * z;
        // Cornish-Fisher expansion around the normal quantile
        let cf = z
            + (z2 + 1.0) * z / (4.0 * nu)
            + ((5.0 * z2 + 16.0) * z2 + 3.0) * z / (96.0 * nu * nu)
            + (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) * z / (384.0 * nu * nu * nu);
        // power-law tail: P(T > x) ≈ K x^{-nu} / nu
        let ln_k = self.ln_norm + 0.5 * (nu + 1.0) * nu.ln();
        let asym = ((ln_k - nu.ln() - q.ln()) / nu).exp();

        let ln_q = q.ln();
        let usable = |x: f64| x.is_finite() && x > 0.0;
        let mut x = if usable(cf) { cf } else { z.max(1e-3) };
        let mut tail = self.upper_tail(x);
        if usable(asym) && (tail.ln() - ln_q).abs() > 0.1 {
            let t2 = self.upper_tail(asym);
            if (t2.ln() - ln_q).abs() < (tail.ln() - ln_q).abs() {
                x = asym;
                tail = t2;
            }
        }

        let mut lo = 0.0_f64;
        let mut hi = f64::INFINITY;
        for _ in 0..100 {
            if tail > q {
                lo = lo.max(x);
            } else {
                hi = hi.min(x);
            }
            let dens = self.pdf(x);
            // f'/f of the density
            let dlog = -(nu + 1.0) * x / (nu + x * x);
            let next = if q > 0.25 {
                // Halley on P(T > x) − q
                let h = tail - q;
                let (d1, d2) = (-dens, -dens * dlog);
                x - 2.0 * h * d1 / (2.0 * d1 * d1 - h * d2)
            } else {
                // Halley on ln P(T > x) − ln q against ln x
                let g = tail.ln() - ln_q;
                let r = x * dens / tail;
                let (g1, g2) = (-r, -r * (1.0 + x * dlog) - r * r);
                (x.ln() - 2.0 * g * g1 / (2.0 * g1 * g1 - g * g2)).exp()
            };
            let next = if next.is_finite() && next >= lo && next <= hi {
                next
            } else if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * x.max(lo)
            };
            let step = (next - x).abs() / x.abs().max(1e-300);
            // cubic convergence: a step this small leaves an error below rounding
            if step <= 1e-6 {
                return next;
            }
            x = next;
            tail = self.upper_tail(x);
        }
        x
    }
}

/// Gamma(shape, scale) distribution functions.
#[derive(Debug, Clone, Copy)]
pub struct GammaDist {
    shape: f64,
    scale: f64,
    ln_norm: f64,
}

impl GammaDist {
    pub fn new(shape: f64, scale: f64) -> Self {
        Self {
            shape,
            scale,
            ln_norm: -ln_gamma(shape) - shape * scale.ln(),
        }
    }

    #[inline]
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            if x == 0.0 && self.shape == 1.0 {
                return -self.scale.ln();
            }
            return f64::NEG_INFINITY;
        }
        self.ln_norm + (self.shape - 1.0) * x.ln() - x / self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        gamma_lr(self.shape, x / self.scale)
    }

    fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        gamma_ur(self.shape, x / self.scale)
    }

    /// Quantile by Newton iteration in log-space, bracketed.
    pub fn ppf(&self, p: f64) -> f64 {
        if p.is_nan() {
            return f64::NAN;
        }
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        let k = self.shape;
        // Wilson-Hilferty start
        let z = norm_ppf(p);
        let wh = 1.0 - 1.0 / (9.0 * k) + z / (3.0 * k.sqrt());
        let mut x = if wh > 0.0 {
            k * self.scale * wh.powi(3)
        } else {
            // small-x series P ≈ (x/scale)^k / Γ(k+1)
            self.scale * ((p.ln() + ln_gamma(k + 1.0)) / k).exp()
        };
        if !(x.is_finite() && x > 0.0) {
            x = k * self.scale;
        }
        let lower = p < 0.5;
        let target = if lower { p.ln() } else { (1.0 - p).ln() };
        let mut lo = 0.0_f64;
        let mut hi = f64::INFINITY;
        for _ in 0..100 {
            let cdf = self.cdf(x);
            if cdf < p {
                lo = lo.max(x);
            } else {
                hi = hi.min(x);
            }
            let dens = self.ln_pdf(x).exp();
            let next = if lower {
                let slope = x * dens / cdf;
                (x.ln() - (cdf.ln() - target) / slope).exp()
            } else {
                let sf = self.sf(x);
                let slope = -x * dens / sf;
                (x.ln() - (sf.ln() - target) / slope).exp()
            };
            let next = if next.is_finite() && next >= lo && next <= hi {
                next
            } else if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * x.max(lo)
            };
            if (next - x).abs() <= 1e-15 * x {
                return next;
            }
            x = next;
        }
        x
    }
}

/// Trigamma function ψ′(x) for x > 0.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    acc + r + 0.5 * r2 + r * r2 * (1.0 / 6.0 - r2 * (1.0 / 30.0 - r2 * (1.0 / 42.0 - r2 * (1.0 / 30.0 - r2 * 5.0 / 66.0))))
}

const GL6: [(f64, f64); 3] = [
    (0.171_324_492_379_170_5, -0.932_469_514_203_152_2),
    (0.360_761_573_048_138_4, -0.661_209_386_466_264_7),
    (0.467_913_934_572_690_4, -0.238_619_186_083_197),
];

const GL12: [(f64, f64); 6] = [
    (0.047_175_336_386_511_77, -0.981_560_634_246_719_1),
    (0.106_939_325_995_318_3, -0.904_117_256_370_475),
    (0.160_078_328_543_346_4, -0.769_902_674_194_305),
    (0.203_167_426_723_065_9, -0.587_317_954_286_617_1),
    (0.233_492_536_538_354_7, -0.367_831_498_998_180_2),
    (0.249_147_045_813_402_9, -0.125_233_408_511_469_2),
];

const GL20: [(f64, f64); 10] = [
    (0.017_614_007_139_152_12, -0.993_128_599_185_094_9),
    (0.040_601_429_800_386_94, -0.963_971_927_277_913_8),
    (0.062_672_048_334_109_06, -0.912_234_428_251_325_9),
    (0.083_276_741_576_704_75, -0.839_116_971_822_218_8),
    (0.101_930_119_817_240_4, -0.746_331_906_460_150_8),
    (0.118_194_531_961_518_4, -0.636_053_680_726_515),
    (0.131_688_638_449_176_6, -0.510_867_001_950_827_1),
    (0.142_096_109_318_382_1, -0.373_706_088_715_419_6),
    (0.149_172_986_472_603_7, -0.227_785_851_141_645_1),
    (0.152_753_387_130_725_9, -0.076_526_521_133_497_33),
];

/// P(X < x, Y < y) for a standard bivariate normal with correlation `rho`.
///
/// Drezner–Wesolowsky integration with Genz's double-precision refinements.
/// Negative correlations are reflected onto the positive branch.
pub fn bvn_cdf(x: f64, y: f64, rho: f64) -> f64 {
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return norm_cdf(y);
    }
    if y == f64::INFINITY {
        return norm_cdf(x);
    }
    if rho < -0.925 {
        // P(X<x, Y<y) = Φ(x) − P(X<x, −Y<−y)
        return (norm_cdf(x) - bvn_upper(-x, y, -rho)).max(0.0);
    }
    bvn_upper(-x, -y, rho).clamp(0.0, 1.0)
}

/// P(X > h, Y > k); requires rho >= -0.925.
fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    let quad: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let hk = h * k;
    if r.abs() < 0.925 {
        let mut bvn = 0.0;
        if r != 0.0 {
            let hs = 0.5 * (h * h + k * k);
            let asr = r.asin();
            for &(w, x) in quad {
                for s in [-1.0, 1.0] {
                    let sn = (asr * (s * x + 1.0) * 0.5).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn *= asr / (4.0 * PI);
        }
        return bvn + norm_cdf(-h) * norm_cdf(-k);
    }
    // r >= 0.925
    let mut bvn = 0.0;
    if r < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let ex = -0.5 * (b_s / a_s + hk);
        if ex > -100.0 {
            bvn = a
                * ex.exp()
                * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        }
        if -hk < 100.0 {
            let b = b_s.sqrt();
            bvn -= (-0.5 * hk).exp()
                * (2.0 * PI).sqrt()
                * norm_cdf(-b / a)
                * b
                * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a *= 0.5;
        for &(w, x) in quad {
            for s in [-1.0, 1.0] {
                let xs = (a * (s * x + 1.0)).powi(2);
                let rs = (1.0 - xs).sqrt();
                let ex = -0.5 * (b_s / xs + hk);
                if ex > -100.0 {
                    bvn += a
                        * w
                        * ex.exp()
                        * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                            - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / (2.0 * PI);
    }
    bvn + norm_cdf(-h.max(k))
}
