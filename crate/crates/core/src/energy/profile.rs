use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Saturating profile `f: [0, inf) -> [0, inf)` with `f(t)/t -> alpha` at
/// zero and `f(t) -> beta` at infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FProfile {
    /// `f(t) = min(alpha t, beta)`.
    TruncatedAffine { alpha: f64, beta: f64 },
    /// `f(t) = beta (1 - exp(-alpha t / beta))`.
    Exponential { alpha: f64, beta: f64 },
    /// Piecewise-linear interpolation of monotone samples starting at `(0, 0)`,
    /// constant after the last knot. Evaluation only.
    Tabulated { t: Vec<f64>, f: Vec<f64> },
}

impl FProfile {
    pub fn truncated_affine(alpha: f64, beta: f64) -> Result<Self> {
        let f = FProfile::TruncatedAffine { alpha, beta };
        f.validate()?;
        Ok(f)
    }

    pub fn exponential(alpha: f64, beta: f64) -> Result<Self> {
        let f = FProfile::Exponential { alpha, beta };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FProfile::TruncatedAffine { alpha, beta } | FProfile::Exponential { alpha, beta } => {
                if !(*alpha > 0.0 && *beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
                    return Err(invalid("f profile needs alpha > 0 and beta > 0"));
                }
            }
            FProfile::Tabulated { t, f } => {
                if t.len() < 2 || t.len() != f.len() {
                    return Err(invalid("tabulated profile needs at least two (t, f) pairs of equal length"));
                }
                if t[0] != 0.0 || f[0] != 0.0 {
                    return Err(invalid("tabulated profile must start at (0, 0)"));
                }
                if t.windows(2).any(|w| !(w[1] > w[0])) || f.windows(2).any(|w| w[1] < w[0]) {
                    return Err(invalid("tabulated profile needs increasing t and nondecreasing f"));
                }
                if t.iter().chain(f).any(|v| !v.is_finite()) || !(f[1] > 0.0) {
                    return Err(invalid("tabulated profile must be finite with positive initial slope"));
                }
            }
        }
        Ok(())
    }

    /// `lim f(t)/t` at zero.
    pub fn alpha(&self) -> f64 {
        match self {
            FProfile::TruncatedAffine { alpha, .. } | FProfile::Exponential { alpha, .. } => *alpha,
            FProfile::Tabulated { t, f } => f[1] / t[1],
        }
    }

    /// `lim f(t)` at infinity.
    pub fn beta(&self) -> f64 {
        match self {
            FProfile::TruncatedAffine { beta, .. } | FProfile::Exponential { beta, .. } => *beta,
            FProfile::Tabulated { f, .. } => *f.last().unwrap(),
        }
    }

    /// `f(t)`, error for `t < 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::NegativeArgument(t));
        }
        Ok(self.value(t))
    }

    /// Element of the sub/super-differential used by the descent chain rule.
    /// At the kink of the truncated affine profile the left derivative `alpha`
    /// is returned.
    pub fn slope(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::NegativeArgument(t));
        }
        Ok(self.derivative(t))
    }

    // Unchecked versions for the hot loops; callers guarantee t >= 0.
    pub(crate) fn value(&self, t: f64) -> f64 {
        match self {
            FProfile::TruncatedAffine { alpha, beta } => (alpha * t).min(*beta),
            FProfile::Exponential { alpha, beta } => -beta * (-alpha * t / beta).exp_m1(),
            FProfile::Tabulated { t: ts, f } => {
                let k = ts.partition_point(|&s| s < t);
                if k == 0 {
                    0.0
                } else if k == ts.len() {
                    *f.last().unwrap()
                } else {
                    let w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
                    f[k - 1] + w * (f[k] - f[k - 1])
                }
            }
        }
    }

    pub(crate) fn derivative(&self, t: f64) -> f64 {
        match self {
            FProfile::TruncatedAffine { alpha, beta } => {
                if alpha * t <= *beta {
                    *alpha
                } else {
                    0.0
                }
            }
            FProfile::Exponential { alpha, beta } => alpha * (-alpha * t / beta).exp(),
            FProfile::Tabulated { t: ts, f } => {
                // left derivative; right derivative at t = 0
                let k = ts.partition_point(|&s| s < t).max(1);
                if k == ts.len() {
                    0.0
                } else {
                    (f[k] - f[k - 1]) / (ts[k] - ts[k - 1])
                }
            }
        }
    }
}

/// `f(t)`.
pub fn f_eval(f: &FProfile, t: f64) -> Result<f64> {
    f.eval(t)
}

/// Chosen element of the differential of `f` at `t`.
pub fn f_slope(f: &FProfile, t: f64) -> Result<f64> {
    f.slope(t)
}

/// Minorants `f >= min(alpha_i t, beta_i)` with `sup alpha_i = alpha` and
/// `sup beta_i = beta`. `i` starts at 1.
///
/// For the truncated affine profile both parameters increase together. For
/// the exponential profile no minorant family can approach `(alpha, beta)`
/// jointly (a pair `(a, b)` is admissible iff `a f^-1(b) <= b`, which forces
/// `a -> 0` as `b -> beta`), so odd indices sweep the slope and even indices
/// sweep the ceiling:
///
/// * `i = 2k - 1`: `alpha_i = alpha (1 - 1/(k+1))`, `beta_i = f(t_i)` where
///   `t_i > 0` solves `f(t) = alpha_i t` (bisection);
/// * `i = 2k`: `beta_i = beta (1 - 1/(k+1))`, `alpha_i = beta_i / f^-1(beta_i)`.
pub fn truncation_family(f: &FProfile, i: u32) -> Result<(f64, f64)> {
    if i == 0 {
        return Err(invalid("truncation index starts at 1"));
    }
    match f {
        FProfile::TruncatedAffine { alpha, beta } => {
            let shrink = 1.0 - 1.0 / (i as f64 + 1.0);
            Ok((alpha * shrink, beta * shrink))
        }
        FProfile::Exponential { alpha, beta } => {
            let k = i.div_ceil(2) as f64;
            let shrink = 1.0 - 1.0 / (k + 1.0);
            if i.is_multiple_of(2) {
                let b = beta * shrink;
                let t = -(beta / alpha) * (-b / beta).ln_1p();
                return Ok((b / t, b));
            }
            let a_i = alpha * shrink;
            // f is strictly concave, so f(t) - a_i t has one positive zero,
            // bracketed by beta / a_i where the chord already exceeds beta.
            let g = |t: f64| f.value(t) - a_i * t;
            let (mut lo, mut hi) = (0.0f64, beta / a_i);
            lo = lo.max(hi * 1e-12);
            while g(lo) <= 0.0 && lo > 1e-300 {
                lo *= 0.5;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-12 * hi.max(1.0) {
                    break;
                }
            }
            // Lower end of the bracket, so f(t_i) >= a_i t_i holds exactly.
            Ok((a_i, f.value(lo)))
        }
        FProfile::Tabulated { .. } => Err(invalid("tabulated profiles have no truncation family")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_examples() {
        let ta = FProfile::truncated_affine(2.0, 3.0).unwrap();
        assert_eq!(ta.eval(1.0).unwrap(), 2.0);
        assert_eq!(ta.eval(10.0).unwrap(), 3.0);
        assert_eq!(ta.slope(1.5).unwrap(), 2.0);
        assert_eq!(ta.slope(1.5 + 1e-12).unwrap(), 0.0);
        let ex = FProfile::exponential(2.0, 3.0).unwrap();
        assert_eq!(ex.eval(0.0).unwrap(), 0.0);
        assert_eq!(ex.slope(0.0).unwrap(), 2.0);
        assert!(matches!(ex.eval(-1.0), Err(Error::NegativeArgument(_))));
        assert!(ta.slope(-0.1).is_err());
    }

    #[test]
    fn profile_hypotheses() {
        for f in [FProfile::truncated_affine(2.0, 3.0).unwrap(), FProfile::exponential(2.0, 3.0).unwrap()] {
            let (alpha, beta) = (f.alpha(), f.beta());
            let mut prev = 0.0;
            for k in 0..20000 {
                let t = k as f64 * 1e-3;
                let v = f.eval(t).unwrap();
                assert!(v >= prev);
                assert!(v <= 1.01 * alpha * t + 1e-15);
                prev = v;
            }
            assert!((f.eval(1e-9).unwrap() / 1e-9 - alpha).abs() < 1e-6);
            assert!((f.eval(1e4).unwrap() - beta).abs() < 1e-9);
        }
    }

    #[test]
    fn truncation_family_examples() {
        let ta = FProfile::truncated_affine(2.0, 3.0).unwrap();
        assert_eq!(truncation_family(&ta, 1).unwrap(), (1.0, 1.5));

        let ex = FProfile::exponential(2.0, 3.0).unwrap();
        let (a1, b1) = truncation_family(&ex, 1).unwrap();
        assert_eq!(a1, 1.0);
        // Independent oracle: scan f(t) - min(a1 t, b1) on [0, 100].
        for k in 0..=100_000 {
            let t = k as f64 * 1e-3;
            assert!(ex.eval(t).unwrap() - (a1 * t).min(b1) >= -1e-12, "t = {t}");
        }
        // b1 is tight: the crossing t1 = b1 / a1 satisfies 3(1 - e^{-2 t1/3}) = t1.
        let t1 = b1 / a1;
        assert!((3.0 * (1.0 - (-2.0 * t1 / 3.0f64).exp()) - t1).abs() < 1e-9);

        let (a, _) = truncation_family(&ex, 200_001).unwrap();
        let (_, b) = truncation_family(&ex, 200_000).unwrap();
        assert!((a - 2.0).abs() < 1e-4 && (b - 3.0).abs() < 1e-4);
        // Every member is a minorant; each parameter increases along its sweep.
        let mut last = [(0.0, 0.0); 2];
        for i in 1..60 {
            let cur = truncation_family(&ex, i).unwrap();
            for k in 0..=2000 {
                let t = k as f64 * 0.05;
                assert!(ex.eval(t).unwrap() - (cur.0 * t).min(cur.1) >= -1e-12, "i = {i}, t = {t}");
            }
            let side = (i % 2) as usize;
            if side == 1 {
                assert!(cur.0 > last[side].0);
            } else {
                assert!(cur.1 > last[side].1);
            }
            last[side] = cur;
        }
    }

    #[test]
    fn tabulated_profile() {
        let f = FProfile::Tabulated { t: vec![0.0, 1.0, 3.0], f: vec![0.0, 2.0, 3.0] };
        f.validate().unwrap();
        assert_eq!(f.alpha(), 2.0);
        assert_eq!(f.beta(), 3.0);
        assert_eq!(f.eval(2.0).unwrap(), 2.5);
        assert_eq!(f.eval(5.0).unwrap(), 3.0);
        assert_eq!(f.slope(0.0).unwrap(), 2.0);
        assert_eq!(f.slope(1.0).unwrap(), 2.0);
        assert_eq!(f.slope(2.0).unwrap(), 0.5);
        assert!(truncation_family(&f, 1).is_err());
        assert!(FProfile::Tabulated { t: vec![0.0, 1.0], f: vec![0.0, -1.0] }.validate().is_err());
    }
}
