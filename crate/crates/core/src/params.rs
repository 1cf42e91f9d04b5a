//! Parameters of the two-family frequency-cuboid construction.
//!
//! One integer N >= 3 steers everything:
//!
//! ```text
//! lambda = 1 / ln ln N          (cuboid anisotropy; > 1 below N = 16)
//! T      = 2^{-2N} / ln N       (observation horizon)
//! window = ceil(N/2) ..= floor(4N/5)   (magnetic atom scales)
//! ```
//!
//! together with the Lebesgue/summation exponents (p, q) of the norms under
//! study and the amplitude decay exponent alpha, constrained to
//! 1/q < alpha < 1 so that the scale-window l^q aggregate grows like
//! N^{1/q - alpha} while each individual block stays bounded.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ConstructionParams {
    /// Spatial dimension (>= 2).
    pub dims: usize,
    /// The dyadic size parameter N.
    pub n: u32,
    /// Amplitude decay exponent alpha in (1/q, 1).
    pub alpha: f64,
    /// Lebesgue exponent of the norms under study.
    #[serde(with = "crate::besov::ext_exponent")]
    pub p: f64,
    /// Summation exponent of the norms under study.
    #[serde(with = "crate::besov::ext_exponent")]
    pub q: f64,
}

impl ConstructionParams {
    pub fn new(dims: usize, n: u32, alpha: f64, p: f64, q: f64) -> Result<Self> {
        let s = ConstructionParams { dims, n, alpha, p, q };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims < 2 {
            return Err(Error::InvalidParams(format!(
                "construction needs dims >= 2, got {}",
                self.dims
            )));
        }
        if self.n < 3 {
            return Err(Error::InvalidParams(format!(
                "N = {} < 3 leaves ln ln N <= 0",
                self.n
            )));
        }
        if !(1.0..).contains(&self.p) {
            return Err(Error::InvalidParams(format!("p = {} outside [1, inf]", self.p)));
        }
        if !(self.q > 1.0) {
            return Err(Error::InvalidParams(format!(
                "q = {} must exceed 1 (alpha must fit in (1/q, 1))",
                self.q
            )));
        }
        let qinv = if self.q.is_infinite() { 0.0 } else { 1.0 / self.q };
        if !(self.alpha > qinv && self.alpha < 1.0) {
            return Err(Error::InvalidParams(format!(
                "alpha = {} outside (1/q, 1) = ({qinv}, 1)",
                self.alpha
            )));
        }
        let w = self.scale_window();
        if w.is_empty() {
            return Err(Error::InvalidParams(format!("empty scale window for N = {}", self.n)));
        }
        Ok(())
    }

    /// Anisotropy lambda = 1 / ln ln N of the frequency cuboids.
    pub fn lambda(&self) -> f64 {
        1.0 / (self.n as f64).ln().ln()
    }

    /// Observation horizon T = 2^{-2N} / ln N (underflows to 0 for large N;
    /// use the log2 form there).
    pub fn time_horizon(&self) -> f64 {
        self.log2_time_horizon().exp2()
    }

    pub fn log2_time_horizon(&self) -> f64 {
        -2.0 * self.n as f64 - (self.n as f64).ln().log2()
    }

    /// Scale exponents of the magnetic family: ceil(N/2) ..= floor(4N/5).
    pub fn scale_window(&self) -> std::ops::RangeInclusive<i64> {
        ((self.n as i64 + 1) / 2)..=(4 * self.n as i64 / 5)
    }

    /// Whether N is large enough for asymptotic-regime assertions (slopes,
    /// windows of constants); the small-N regime is for dense cross-checks.
    pub fn is_asymptotic(&self) -> bool {
        self.n >= 256
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(ConstructionParams::new(1, 8, 0.75, 2.0, 2.0).is_err());
        assert!(ConstructionParams::new(2, 2, 0.75, 2.0, 2.0).is_err());
        assert!(ConstructionParams::new(2, 8, 0.75, 0.5, 2.0).is_err());
        assert!(ConstructionParams::new(2, 8, 0.75, 2.0, 1.0).is_err());
        // alpha outside (1/q, 1)
        assert!(ConstructionParams::new(2, 8, 0.4, 2.0, 2.0).is_err());
        assert!(ConstructionParams::new(2, 8, 1.0, 2.0, 2.0).is_err());
        // q = inf admits any alpha in (0, 1)
        assert!(ConstructionParams::new(2, 8, 0.1, 2.0, f64::INFINITY).is_ok());
        assert!(ConstructionParams::new(2, 8, 0.75, 2.0, 2.0).is_ok());
    }

    #[test]
    fn lambda_reference_values() {
        // frozen: lambda = 1 / ln ln N
        let cases = [
            (3u32, 10.632887811886484),
            (4, 3.0615282060935475),
            (5, 2.1013480353853702),
            (6, 1.7146832833502936),
            (256, 0.5837954878463601),
            (65536, 0.41561450362904717),
        ];
        for (n, want) in cases {
            let p = ConstructionParams::new(2, n, 0.75, 2.0, 2.0).unwrap();
            assert!((p.lambda() - want).abs() < 1e-14, "N={n}: {} vs {want}", p.lambda());
        }
    }

    #[test]
    fn horizon_reference_values() {
        let p = ConstructionParams::new(2, 6, 0.75, 2.0, 2.0).unwrap();
        assert!((p.time_horizon() - 1.362574771853631e-4).abs() < 1e-18);
        assert!((p.log2_time_horizon() - (-12.841376979001104)).abs() < 1e-12);
        let big = ConstructionParams::new(2, 65536, 0.75, 2.0, 2.0).unwrap();
        assert_eq!(big.time_horizon(), 0.0); // honest underflow
        assert!((big.log2_time_horizon() - (-131075.47123362706)).abs() < 1e-9);
    }

    #[test]
    fn scale_windows() {
        let cases: [(u32, i64, i64); 5] =
            [(3, 2, 2), (4, 2, 3), (5, 3, 4), (6, 3, 4), (256, 128, 204)];
        for (n, lo, hi) in cases {
            let p = ConstructionParams::new(2, n, 0.75, 2.0, 2.0).unwrap();
            assert_eq!(p.scale_window(), lo..=hi, "N={n}");
        }
    }

    #[test]
    fn asymptotic_flag() {
        assert!(!ConstructionParams::new(2, 6, 0.75, 2.0, 2.0).unwrap().is_asymptotic());
        assert!(ConstructionParams::new(2, 256, 0.75, 2.0, 2.0).unwrap().is_asymptotic());
    }
}
