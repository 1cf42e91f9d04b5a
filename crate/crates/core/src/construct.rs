//! The two-family initial data and the scalar pair for product lower bounds.
//!
//! Family one is a single divergence-free velocity atom at the top scale N,
//! built on the long-axis-1 cuboid (thin in axis 0, so the -xi_1/xi_0
//! component is amplified by 1/lambda there). Family two is a window of
//! magnetic atoms at scales ceil(N/2) ..= floor(4N/5) on the long-axis-0
//! cuboid, where the same multiplier stays order lambda. Amplitudes (log2):
//!
//! ```text
//! velocity atom:   N(1-d) - (3+d) log2 ln ln N          at scale N
//! magnetic atom:   -jd - alpha log2 j                   at scale j
//! product seed:    -Nd - log2 ln ln N                   at scale N (scalar)
//! ```
//!
//! The two families live on per-axis disjoint frequency cuboids (checked at
//! build time), so sums, products and block projections never mix them
//! within one dyadic annulus.

use crate::besov::{BesovParams, NormReport};
use crate::error::{Error, Result};
use crate::params::ConstructionParams;
use crate::sparse::{
    BumpAtom, BumpProfile, ComponentMultiplier, CuboidBump, SparseBumpField, SparseNormEngine,
};
use serde::{Deserialize, Serialize};

/// (-xi_1/xi_0, 1, 0, ..., 0): annihilates xi in the divergence sense for
/// any profile it multiplies.
fn solenoidal_multipliers(ncomp: usize) -> Vec<ComponentMultiplier> {
    (0..ncomp)
        .map(|c| match c {
            0 => ComponentMultiplier::NegRatio { num: 1, den: 0 },
            1 => ComponentMultiplier::One,
            _ => ComponentMultiplier::Zero,
        })
        .collect()
}

/// Velocity-family profile: cuboid long in axis 1, thin (width lambda) in
/// every other axis; the NegRatio component is of size 1/lambda on it.
pub fn velocity_profile(dims: usize, lambda: f64) -> Result<BumpProfile> {
    Ok(BumpProfile {
        bump: CuboidBump::standard(dims, 1, lambda)?,
        multipliers: solenoidal_multipliers(dims),
    })
}

/// Magnetic-family profile: cuboid long in axis 0; the NegRatio component
/// is of size lambda on it.
pub fn magnetic_profile(dims: usize, lambda: f64) -> Result<BumpProfile> {
    Ok(BumpProfile {
        bump: CuboidBump::standard(dims, 0, lambda)?,
        multipliers: solenoidal_multipliers(dims),
    })
}

pub fn log2_velocity_amplitude(params: &ConstructionParams) -> f64 {
    let n = params.n as f64;
    let d = params.dims as f64;
    n * (1.0 - d) - (3.0 + d) * n.ln().ln().log2()
}

pub fn log2_magnetic_amplitude(params: &ConstructionParams, j: i64) -> f64 {
    let d = params.dims as f64;
    -(j as f64) * d - params.alpha * (j as f64).log2()
}

pub fn log2_product_seed_amplitude(params: &ConstructionParams) -> f64 {
    let n = params.n as f64;
    let d = params.dims as f64;
    -n * d - n.ln().ln().log2()
}

/// The built initial data pair.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InitialData {
    pub params: ConstructionParams,
    pub u0: SparseBumpField,
    pub b0: SparseBumpField,
}

/// Per-axis support interval of an atom's scaled cuboid, axis `a`.
fn atom_axis_interval(field: &SparseBumpField, atom: &BumpAtom, a: usize) -> (f64, f64) {
    let seg = field.profiles[atom.profile].bump.axes[a];
    let s = (atom.scale_exponent as f64).exp2();
    (seg[0] * s, seg[3] * s)
}

/// Two atoms' cuboids are disjoint when some axis separates them (touching
/// boundaries count: supports are open).
fn atoms_disjoint(
    fa: &SparseBumpField,
    a: &BumpAtom,
    fb: &SparseBumpField,
    b: &BumpAtom,
) -> bool {
    (0..fa.dims).any(|ax| {
        let (lo1, hi1) = atom_axis_interval(fa, a, ax);
        let (lo2, hi2) = atom_axis_interval(fb, b, ax);
        hi1 <= lo2 || hi2 <= lo1
    })
}

/// Build u0 (one velocity atom at scale N) and b0 (the magnetic window),
/// verifying cross-family support disjointness.
pub fn build_initial_data(params: &ConstructionParams) -> Result<InitialData> {
    params.validate()?;
    let lambda = params.lambda();
    let u0 = SparseBumpField {
        dims: params.dims,
        ncomp: params.dims,
        profiles: vec![velocity_profile(params.dims, lambda)?],
        atoms: vec![BumpAtom {
            scale_exponent: params.n as i64,
            log2_amplitude: log2_velocity_amplitude(params),
            profile: 0,
        }],
    };
    let b0 = SparseBumpField {
        dims: params.dims,
        ncomp: params.dims,
        profiles: vec![magnetic_profile(params.dims, lambda)?],
        atoms: params
            .scale_window()
            .map(|j| BumpAtom {
                scale_exponent: j,
                log2_amplitude: log2_magnetic_amplitude(params, j),
                profile: 0,
            })
            .collect(),
    };
    u0.validate()?;
    b0.validate()?;
    for ba in &b0.atoms {
        if !atoms_disjoint(&u0, &u0.atoms[0], &b0, ba) {
            return Err(Error::InvalidParams(format!(
                "velocity atom (scale 2^{}) and magnetic atom (scale 2^{}) overlap in frequency",
                params.n, ba.scale_exponent
            )));
        }
    }
    Ok(InitialData { params: *params, u0, b0 })
}

/// The scalar pair (f, g) for product lower bounds: f is the magnetic window
/// with bare bumps, g a single bare bump at scale N with the product-seed
/// amplitude.
pub fn build_algebra_pair(params: &ConstructionParams) -> Result<(SparseBumpField, SparseBumpField)> {
    params.validate()?;
    let lambda = params.lambda();
    let f = SparseBumpField {
        dims: params.dims,
        ncomp: 1,
        profiles: vec![BumpProfile {
            bump: CuboidBump::standard(params.dims, 0, lambda)?,
            multipliers: vec![ComponentMultiplier::One],
        }],
        atoms: params
            .scale_window()
            .map(|j| BumpAtom {
                scale_exponent: j,
                log2_amplitude: log2_magnetic_amplitude(params, j),
                profile: 0,
            })
            .collect(),
    };
    let g = SparseBumpField {
        dims: params.dims,
        ncomp: 1,
        profiles: vec![BumpProfile {
            bump: CuboidBump::standard(params.dims, 1, lambda)?,
            multipliers: vec![ComponentMultiplier::One],
        }],
        atoms: vec![BumpAtom {
            scale_exponent: params.n as i64,
            log2_amplitude: log2_product_seed_amplitude(params),
            profile: 0,
        }],
    };
    Ok((f, g))
}

/// The six data norms: velocity at regularity d/p - 1, d/p, d/p + 1 and
/// magnetic at d/p, d/p + 1, d/p + 2 (homogeneous, exponents from `params`).
#[derive(Debug, Clone, Serialize)]
pub struct InitialNormReport {
    pub params: ConstructionParams,
    pub velocity: Vec<(f64, NormReport)>,
    pub magnetic: Vec<(f64, NormReport)>,
}

pub fn initial_norm_report(
    engine: &SparseNormEngine,
    data: &InitialData,
) -> Result<InitialNormReport> {
    let d = data.params.dims as f64;
    let p = data.params.p;
    let q = data.params.q;
    let mut velocity = Vec::new();
    for ds in [-1.0, 0.0, 1.0] {
        let s = d / p + ds;
        let bp = BesovParams::new(s, p, q, true)?;
        velocity.push((s, engine.besov_norm(&data.u0, &bp)?));
    }
    let mut magnetic = Vec::new();
    for ds in [0.0, 1.0, 2.0] {
        let s = d / p + ds;
        let bp = BesovParams::new(s, p, q, true)?;
        magnetic.push((s, engine.besov_norm(&data.b0, &bp)?));
    }
    Ok(InitialNormReport { params: data.params, velocity, magnetic })
}
