//! Dyadic Littlewood-Paley filter bank.
//!
//! The bank is the classical pair (chi, phi) of radial frequency cutoffs:
//!
//! * `chi` is a low-pass profile with chi(r) = 1 for r <= 3/4 and
//!   chi(r) = 0 for r >= 4/3, monotone in between;
//! * `phi(r) = chi(r/2) - chi(r)` is the induced annulus profile, supported
//!   on 3/4 <= r <= 8/3 and identically 1 on 4/3 <= r <= 3/2.
//!
//! Writing phi_j(xi) = phi(2^-j |xi|), the telescoping identity
//!
//! ```text
//! sum_{j=a}^{b} phi_j(xi) = chi(2^-(b+1) |xi|) - chi(2^-a |xi|)
//! ```
//!
//! makes the homogeneous partition of unity sum_j phi_j = 1 (xi != 0) exact
//! up to floating-point rounding, for any profile shape. The nonhomogeneous
//! decomposition replaces all blocks with j <= -1 by the single low-pass
//! chi(|xi|).
//!
//! Two transition profiles are provided: a degree-7 smoothstep (C^3 across
//! the seams, cheap, the default) and an exponential mollifier (C-infinity,
//! for experiments where the polynomial tails of the smoothstep kernel
//! matter).

use serde::{Deserialize, Serialize};

/// Inner plateau radius of the low-pass cutoff: chi = 1 on [0, 3/4].
pub const CHI_PLATEAU_RADIUS: f64 = 0.75;
/// Support radius of the low-pass cutoff: chi = 0 outside [0, 4/3].
pub const CHI_SUPPORT_RADIUS: f64 = 4.0 / 3.0;
/// Lower support radius of the annulus profile phi.
pub const PHI_SUPPORT_LO: f64 = 0.75;
/// Upper support radius of the annulus profile phi (= 2 * 4/3).
pub const PHI_SUPPORT_HI: f64 = 8.0 / 3.0;

/// Shape of the rising edge used by every cutoff in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash, Default)]
pub enum Transition {
    /// 35 t^4 - 84 t^5 + 70 t^6 - 20 t^7: three continuous derivatives at
    /// both seams, exactly 1/2 at the midpoint.
    #[default]
    Smoothstep7,
    /// exp(-1/t) / (exp(-1/t) + exp(-1/(1-t))): infinitely smooth seams.
    ExpMollified,
}

impl Transition {
    /// Monotone rise from 0 (t <= 0) to 1 (t >= 1).
    pub fn rise(self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        match self {
            Transition::Smoothstep7 => {
                let t2 = t * t;
                let t4 = t2 * t2;
                t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
            }
            Transition::ExpMollified => {
                let a = (-1.0 / t).exp();
                let b = (-1.0 / (1.0 - t)).exp();
                a / (a + b)
            }
        }
    }
}

/// Radial cutoff pair (chi, phi) with fixed support radii.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash, Default)]
pub struct DyadicFilterBank {
    pub transition: Transition,
}

impl DyadicFilterBank {
    pub fn new(transition: Transition) -> Self {
        Self { transition }
    }

    /// Low-pass profile chi(r), r = |xi| >= 0.
    pub fn chi(&self, r: f64) -> f64 {
        if r <= CHI_PLATEAU_RADIUS {
            1.0
        } else if r >= CHI_SUPPORT_RADIUS {
            0.0
        } else {
            self.transition
                .rise((CHI_SUPPORT_RADIUS - r) / (CHI_SUPPORT_RADIUS - CHI_PLATEAU_RADIUS))
        }
    }

    /// Annulus profile phi(r) = chi(r/2) - chi(r).
    pub fn phi(&self, r: f64) -> f64 {
        self.chi(0.5 * r) - self.chi(r)
    }

    /// phi(2^-j r): multiplier of the homogeneous block j at radius r.
    pub fn phi_at(&self, j: i64, r: f64) -> f64 {
        // exp2 of a large negative argument underflows to zero, which gives
        // phi(0) = 0 -- the correct limit -- so huge |j| are safe.
        self.phi(r * exp2_i64(-j))
    }

    /// Block multiplier of the nonhomogeneous decomposition: block -1 is the
    /// low-pass chi, blocks j >= 0 are annuli, blocks j <= -2 vanish.
    pub fn nonhomogeneous_at(&self, j: i64, r: f64) -> f64 {
        if j <= -2 {
            0.0
        } else if j == -1 {
            self.chi(r)
        } else {
            self.phi_at(j, r)
        }
    }

    /// Inclusive range of block indices whose annulus support intersects the
    /// radius interval [rmin, rmax] (0 < rmin <= rmax). Blocks outside the
    /// range have identically zero multiplier on the interval.
    pub fn active_blocks(&self, rmin: f64, rmax: f64) -> std::ops::RangeInclusive<i64> {
        debug_assert!(rmin > 0.0 && rmax >= rmin);
        // phi(2^-j r) != 0 requires 3/4 < 2^-j r < 8/3.
        let lo = (rmin.log2() - PHI_SUPPORT_HI.log2()).ceil() as i64;
        let hi = (rmax.log2() - PHI_SUPPORT_LO.log2()).floor() as i64;
        lo..=hi
    }

    /// |sum_j phi(2^-j r) - 1| with the sum running over every block whose
    /// support can reach r (plus one spare on each side).
    pub fn partition_residual(&self, r: f64) -> f64 {
        let range = self.active_blocks(r, r);
        let mut s = 0.0;
        for j in (range.start() - 1)..=(range.end() + 1) {
            s += self.phi_at(j, r);
        }
        (s - 1.0).abs()
    }
}

/// 2^k as f64 for possibly huge |k| (saturates to 0 / +inf gracefully).
pub fn exp2_i64(k: i64) -> f64 {
    (k as f64).exp2()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn banks() -> [DyadicFilterBank; 2] {
        [
            DyadicFilterBank::new(Transition::Smoothstep7),
            DyadicFilterBank::new(Transition::ExpMollified),
        ]
    }

    #[test]
    fn chi_plateau_and_support() {
        for bank in banks() {
            assert_eq!(bank.chi(0.0), 1.0);
            assert_eq!(bank.chi(0.75), 1.0);
            assert_eq!(bank.chi(4.0 / 3.0), 0.0);
            assert_eq!(bank.chi(10.0), 0.0);
            // monotone non-increasing across the transition (near the seams
            // the profiles are flat to f64 precision, so only the interior
            // is strictly decreasing)
            let mut prev = 1.0;
            for i in 1..100 {
                let r = 0.75 + (4.0 / 3.0 - 0.75) * (i as f64) / 100.0;
                let v = bank.chi(r);
                assert!(v <= prev, "chi increased at r={r}");
                prev = v;
            }
            let mut prev = bank.chi(0.85);
            for i in 1..=8 {
                let r = 0.85 + 0.05 * i as f64;
                let v = bank.chi(r);
                assert!(v < prev, "chi not strictly decreasing at r={r}");
                prev = v;
            }
        }
    }

    #[test]
    fn phi_support_and_plateau() {
        for bank in banks() {
            // supported in [3/4, 8/3]
            assert_eq!(bank.phi(0.74), 0.0);
            assert_eq!(bank.phi(8.0 / 3.0), 0.0);
            assert_eq!(bank.phi(3.0), 0.0);
            // identically 1 on [4/3, 3/2]
            assert_eq!(bank.phi(4.0 / 3.0), 1.0);
            assert_eq!(bank.phi(1.4), 1.0);
            assert_eq!(bank.phi(1.5), 1.0);
            // interior positivity
            assert!(bank.phi(1.0) > 0.0);
            assert!(bank.phi(2.0) > 0.0);
        }
    }

    #[test]
    fn phi_at_two_reference_value() {
        // phi(2) = chi(1) - chi(2) = chi(1); for the degree-7 smoothstep the
        // transition argument is (4/3 - 1)/(4/3 - 3/4) = 4/7, and
        // S(4/7) = 537856/823543 exactly (7^7 denominator).
        let bank = DyadicFilterBank::new(Transition::Smoothstep7);
        let expect = 537856.0 / 823543.0;
        assert!((bank.phi(2.0) - expect).abs() < 1e-15);
    }

    #[test]
    fn partition_of_unity_dense_radii() {
        // 10^4 log-spaced radii across twelve decades: the telescoping sum
        // must reproduce 1 to near machine precision.
        for bank in banks() {
            let m = 10_000;
            for i in 0..m {
                let r = 10f64.powf(-6.0 + 12.0 * (i as f64 + 0.5) / m as f64);
                assert!(
                    bank.partition_residual(r) < 1e-12,
                    "partition residual too large at r={r}"
                );
            }
        }
    }

    #[test]
    fn partition_example_point() {
        // r = 5.3 touches blocks j in {1, 2} (2^-3 * 5.3 < 3/4 makes the
        // j = 3 term vanish); summing j in {1, 2, 3} gives exactly 1.
        let bank = DyadicFilterBank::default();
        let r: f64 = 5.3;
        assert_eq!(bank.phi_at(3, r), 0.0);
        let s: f64 = (1..=3).map(|j| bank.phi_at(j, r)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn active_blocks_match_support() {
        let bank = DyadicFilterBank::default();
        let range = bank.active_blocks(5.3, 5.3);
        assert!(range.contains(&1) && range.contains(&2));
        // blocks beyond the computed range really are zero
        assert_eq!(bank.phi_at(range.start() - 1, 5.3), 0.0);
        assert_eq!(bank.phi_at(range.end() + 1, 5.3), 0.0);
    }

    #[test]
    fn adjacent_annuli_only_overlap() {
        // phi_j * phi_j' == 0 whenever |j - j'| >= 2 (support ratio 8/3 < 3).
        let bank = DyadicFilterBank::default();
        for i in 0..2000 {
            let r = 10f64.powf(-2.0 + 6.0 * (i as f64) / 2000.0);
            for j in bank.active_blocks(r, r) {
                assert_eq!(bank.phi_at(j, r) * bank.phi_at(j + 2, r), 0.0);
                assert_eq!(bank.phi_at(j, r) * bank.phi_at(j - 2, r), 0.0);
            }
        }
    }

    #[test]
    fn rise_midpoint_symmetry() {
        for t in [Transition::Smoothstep7, Transition::ExpMollified] {
            assert!((t.rise(0.5) - 0.5).abs() < 1e-15);
            for i in 1..50 {
                let x = i as f64 / 50.0;
                assert!((t.rise(x) + t.rise(1.0 - x) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn smoothstep_c3_seams() {
        // First three one-sided finite-difference derivatives vanish at the
        // seams for the degree-7 profile.
        let t = Transition::Smoothstep7;
        let h = 1e-3;
        // near t=0: rise(h) ~ 35 h^4
        assert!(t.rise(h) < 40.0 * h.powi(4));
        assert!(1.0 - t.rise(1.0 - h) < 40.0 * h.powi(4));
    }
}
