//! Dense spectral fields on a d-dimensional torus.
//!
//! A `SpectralField` stores, per component, the complex mode amplitudes c_k of
//!
//! ```text
//! u(x) = sum_k c_k exp(i xi_k . x),      xi_k = 2 pi k / L  (per axis),
//! ```
//!
//! in standard FFT layout (axis index i in 0..n maps to the signed wavenumber
//! k = i for i < n/2 and k = i - n otherwise; the unpaired bin i = n/2 of an
//! even axis is the Nyquist mode k = -n/2). With this convention a single
//! unit-amplitude mode has L^2 norm L^{d/2} over one period, physical samples
//! are the plain unnormalized inverse DFT of the amplitude array, and the
//! forward map divides by the sample count.
//!
//! Array layout is component-major, row-major over axes within a component.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Cached FFT plans, keyed by (length, direction). rustfft plans are cheap to
/// build but the norm sweeps request the same handful of sizes thousands of
/// times.
fn plan(len: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (len, matches!(dir, FftDirection::Forward));
    if let Some(p) = cache.lock().unwrap().get(&key) {
        return p.clone();
    }
    let p = FftPlanner::new().plan_fft(len, dir);
    cache.lock().unwrap().insert(key, p.clone());
    p
}

/// In-place FFT along one axis of a row-major array of the given shape.
pub fn fft_along_axis(data: &mut [Complex64], shape: &[usize], axis: usize, dir: FftDirection) {
    let n = shape[axis];
    if n <= 1 {
        return;
    }
    let stride: usize = shape[axis + 1..].iter().product();
    let fft = plan(n, dir);
    if stride == 1 {
        data.par_chunks_exact_mut(n).for_each_init(
            || vec![Complex64::default(); fft.get_inplace_scratch_len()],
            |scratch, row| fft.process_with_scratch(row, scratch),
        );
    } else {
        let block = n * stride;
        let nlines: usize = data.len() / n;
        // Gather strided lines into scratch, transform, scatter back. Lines
        // are disjoint, so the unsafe shared-slice access is race-free.
        let ptr = SendPtr(data.as_mut_ptr());
        (0..nlines).into_par_iter().for_each_init(
            || {
                (
                    vec![Complex64::default(); n],
                    vec![Complex64::default(); fft.get_inplace_scratch_len()],
                )
            },
            |(line, scratch), l| {
                let outer = l / stride;
                let inner = l % stride;
                let base = outer * block + inner;
                let data = ptr;
                unsafe {
                    for i in 0..n {
                        line[i] = *data.0.add(base + i * stride);
                    }
                    fft.process_with_scratch(line, scratch);
                    for i in 0..n {
                        *data.0.add(base + i * stride) = line[i];
                    }
                }
            },
        );
    }
}

#[derive(Clone, Copy)]
struct SendPtr(*mut Complex64);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

/// Signed wavenumber of FFT-layout index `i` on an axis of `n` points.
#[inline]
pub fn index_to_wavenumber(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// FFT-layout index of signed wavenumber `k` on an axis of `n` points.
#[inline]
pub fn wavenumber_to_index(k: i64, n: usize) -> usize {
    if k >= 0 {
        k as usize
    } else {
        (k + n as i64) as usize
    }
}

#[derive(Debug, Clone)]
pub struct SpectralField {
    shape: Vec<usize>,
    period: Vec<f64>,
    ncomp: usize,
    /// `real_space_is_real`: the field is meant to be Hermitian-symmetric
    /// (real physical samples). Informational; enforced by the symmetrizer.
    pub hermitian: bool,
    data: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(shape: &[usize], period: &[f64], ncomp: usize) -> Self {
        assert_eq!(shape.len(), period.len());
        assert!(!shape.is_empty() && ncomp > 0);
        let vol: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            period: period.to_vec(),
            ncomp,
            hermitian: false,
            data: vec![Complex64::default(); vol * ncomp],
        }
    }

    pub fn dims(&self) -> usize {
        self.shape.len()
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }
    pub fn period(&self) -> &[f64] {
        &self.period
    }
    pub fn ncomp(&self) -> usize {
        self.ncomp
    }
    pub fn nsites(&self) -> usize {
        self.shape.iter().product()
    }
    /// Torus volume L_1 * ... * L_d.
    pub fn volume(&self) -> f64 {
        self.period.iter().product()
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        let v = self.nsites();
        &self.data[c * v..(c + 1) * v]
    }
    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex64] {
        let v = self.nsites();
        &mut self.data[c * v..(c + 1) * v]
    }

    /// Row-major site of the given per-axis indices.
    pub fn site(&self, idx: &[usize]) -> usize {
        let mut s = 0;
        for (a, &i) in idx.iter().enumerate() {
            s = s * self.shape[a] + i;
        }
        s
    }

    pub fn wavenumber(&self, axis: usize, i: usize) -> i64 {
        index_to_wavenumber(i, self.shape[axis])
    }

    /// Continuous frequency 2 pi k / L of index `i` on `axis`.
    pub fn xi(&self, axis: usize, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.wavenumber(axis, i) as f64 / self.period[axis]
    }

    /// Walk all sites in row-major order with their per-axis indices.
    pub fn for_each_site(&self, mut f: impl FnMut(usize, &[usize])) {
        let d = self.dims();
        let mut idx = vec![0usize; d];
        for s in 0..self.nsites() {
            f(s, &idx);
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < self.shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    /// Multiply every component's mode (c_k) by w(|xi_k|).
    pub fn scale_radial(&mut self, w: impl Fn(f64) -> f64 + Sync) {
        let radii = self.mode_radii();
        for c in 0..self.ncomp {
            let comp = self.comp_mut(c);
            comp.par_iter_mut().zip(radii.par_iter()).for_each(|(z, &r)| {
                *z *= w(r);
            });
        }
    }

    /// |xi_k| for every site, row-major.
    pub fn mode_radii(&self) -> Vec<f64> {
        let d = self.dims();
        let mut radii = vec![0.0f64; self.nsites()];
        let mut idx = vec![0usize; d];
        for r in radii.iter_mut() {
            let mut s2 = 0.0;
            for a in 0..d {
                let xi = self.xi(a, idx[a]);
                s2 += xi * xi;
            }
            *r = s2.sqrt();
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < self.shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        radii
    }

    /// Physical samples of one component on its own grid (unnormalized
    /// inverse DFT of the amplitudes).
    pub fn physical(&self, c: usize) -> Vec<Complex64> {
        let mut buf = self.comp(c).to_vec();
        for a in 0..self.dims() {
            fft_along_axis(&mut buf, &self.shape, a, FftDirection::Inverse);
        }
        buf
    }

    /// Physical samples of one component on a different grid: nonzero modes
    /// are re-binned by signed wavenumber, so `shape_os` may be finer
    /// (zero-padded oversampling) or coarser, as long as every nonzero mode
    /// still fits strictly below the target Nyquist index.
    pub fn physical_oversampled(&self, c: usize, shape_os: &[usize]) -> Vec<Complex64> {
        assert_eq!(shape_os.len(), self.dims());
        let vol_os: usize = shape_os.iter().product();
        let mut buf = vec![Complex64::default(); vol_os];
        let comp = self.comp(c);
        self.for_each_site(|s, idx| {
            let z = comp[s];
            if z != Complex64::default() {
                let mut t = 0usize;
                for (a, &i) in idx.iter().enumerate() {
                    let k = index_to_wavenumber(i, self.shape[a]);
                    assert!(
                        2 * k.unsigned_abs() as usize + 2 <= shape_os[a],
                        "target grid {} too small for mode k={k}",
                        shape_os[a]
                    );
                    t = t * shape_os[a] + wavenumber_to_index(k, shape_os[a]);
                }
                buf[t] = z;
            }
        });
        for a in 0..self.dims() {
            fft_along_axis(&mut buf, shape_os, a, FftDirection::Inverse);
        }
        buf
    }

    /// Replace amplitudes with the forward transform of physical samples
    /// stored in `samples` (inverse of `physical`).
    pub fn set_from_physical(&mut self, c: usize, samples: &[Complex64]) {
        assert_eq!(samples.len(), self.nsites());
        let shape = self.shape.clone();
        let dims = self.dims();
        let scale = 1.0 / self.nsites() as f64;
        let comp = self.comp_mut(c);
        comp.copy_from_slice(samples);
        for a in 0..dims {
            fft_along_axis(comp, &shape, a, FftDirection::Forward);
        }
        comp.par_iter_mut().for_each(|z| *z *= scale);
    }

    /// L^2 norm over one period via Parseval (all components).
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.data.par_iter().map(|z| z.norm_sqr()).sum();
        (self.volume() * s).sqrt()
    }

    /// Largest |k| per axis over nonzero amplitudes, None if the field is 0.
    pub fn support_extent(&self) -> Option<Vec<i64>> {
        let d = self.dims();
        let mut max_abs = vec![0i64; d];
        let mut any = false;
        for c in 0..self.ncomp {
            let comp = self.comp(c);
            self.for_each_site(|s, idx| {
                if comp[s] != Complex64::default() {
                    any = true;
                    for a in 0..d {
                        max_abs[a] = max_abs[a].max(index_to_wavenumber(idx[a], self.shape[a]).abs());
                    }
                }
            });
        }
        any.then_some(max_abs)
    }

    /// Min and max |xi| over nonzero amplitudes (None for the zero field).
    pub fn support_radius_range(&self) -> Option<(f64, f64)> {
        let radii = self.mode_radii();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut any = false;
        for c in 0..self.ncomp {
            let comp = self.comp(c);
            for (s, &r) in radii.iter().enumerate() {
                if comp[s] != Complex64::default() {
                    any = true;
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
        }
        any.then_some((lo, hi))
    }

    /// Error if any nonzero amplitude sits on or next to the Nyquist ring of
    /// some axis (no guard bin left: aliasing-prone).
    pub fn check_nyquist_guard(&self) -> Result<()> {
        if let Some(ext) = self.support_extent() {
            for a in 0..self.dims() {
                let guard = (self.shape[a] as i64) / 2 - 1;
                if ext[a] >= guard {
                    return Err(Error::ResolutionInsufficient(format!(
                        "spectral support reaches |k|={} on axis {} with only {} points (guard at {})",
                        ext[a], a, self.shape[a], guard
                    )));
                }
            }
        }
        Ok(())
    }

    /// Project amplitudes onto Hermitian symmetry c_{-k} = conj(c_k), making
    /// the physical samples real.
    pub fn hermitian_symmetrize(&mut self) {
        let shape = self.shape.clone();
        let d = shape.len();
        for c in 0..self.ncomp {
            let comp = self.comp_mut(c);
            let mut idx = vec![0usize; d];
            for s in 0..comp.len() {
                // partner site of -k
                let mut t = 0usize;
                for a in 0..d {
                    let k = index_to_wavenumber(idx[a], shape[a]);
                    // -(-n/2) has no partner bin; it maps onto itself
                    let nk = if k == -(shape[a] as i64) / 2 && shape[a] % 2 == 0 {
                        k
                    } else {
                        -k
                    };
                    t = t * shape[a] + wavenumber_to_index(nk, shape[a]);
                }
                if t == s {
                    comp[s] = Complex64::new(comp[s].re, 0.0);
                } else if t > s {
                    let avg = 0.5 * (comp[s] + comp[t].conj());
                    comp[s] = avg;
                    comp[t] = avg.conj();
                }
                for a in (0..d).rev() {
                    idx[a] += 1;
                    if idx[a] < shape[a] {
                        break;
                    }
                    idx[a] = 0;
                }
            }
        }
        self.hermitian = true;
    }

    /// max_k |c_k - conj(c_{-k})| over all components.
    pub fn hermitian_residual(&self) -> f64 {
        let shape = self.shape.clone();
        let d = shape.len();
        let mut worst = 0.0f64;
        for c in 0..self.ncomp {
            let comp = self.comp(c);
            self.for_each_site(|s, idx| {
                let mut t = 0usize;
                for a in 0..d {
                    let k = index_to_wavenumber(idx[a], shape[a]);
                    let nk = if k == -(shape[a] as i64) / 2 && shape[a] % 2 == 0 {
                        k
                    } else {
                        -k
                    };
                    t = t * shape[a] + wavenumber_to_index(nk, shape[a]);
                }
                worst = worst.max((comp[s] - comp[t].conj()).norm());
            });
        }
        worst
    }

    /// self += other (matching layout).
    pub fn add_assign_field(&mut self, other: &Self) {
        assert_eq!(self.shape, other.shape);
        assert_eq!(self.ncomp, other.ncomp);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
    }

    /// self -= other (matching layout).
    pub fn sub_assign_field(&mut self, other: &Self) {
        assert_eq!(self.shape, other.shape);
        assert_eq!(self.ncomp, other.ncomp);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a -= *b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for z in self.data.iter_mut() {
            *z *= s;
        }
    }

    pub fn max_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub(crate) fn raw_data(&self) -> &[Complex64] {
        &self.data
    }
    pub(crate) fn raw_data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_field(shape: &[usize], ncomp: usize, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let period: Vec<f64> = shape.iter().map(|_| 2.0 * std::f64::consts::PI).collect();
        let mut f = SpectralField::zeros(shape, &period, ncomp);
        for c in 0..ncomp {
            for z in f.comp_mut(c) {
                *z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        f
    }

    #[test]
    fn forward_inverse_roundtrip() {
        for shape in [vec![8usize, 8], vec![4, 8, 16]] {
            let f = random_field(&shape, 2, 7);
            let mut g = f.clone();
            for c in 0..f.ncomp() {
                let phys = f.physical(c);
                g.set_from_physical(c, &phys);
            }
            let err = f
                .raw_data()
                .iter()
                .zip(g.raw_data())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            assert!(err < 1e-12, "roundtrip error {err}");
        }
    }

    #[test]
    fn single_mode_physical_values() {
        // one unit mode at k = (3, -2): samples are exactly exp(i xi.x)
        let n = 16;
        let mut f = SpectralField::zeros(&[n, n], &[2.0 * std::f64::consts::PI; 2], 1);
        let site = f.site(&[3, wavenumber_to_index(-2, n)]);
        f.comp_mut(0)[site] = Complex64::new(1.0, 0.0);
        let phys = f.physical(0);
        let h = 2.0 * std::f64::consts::PI / n as f64;
        for i in 0..n {
            for j in 0..n {
                let x = (i as f64 * h, j as f64 * h);
                let want = Complex64::from_polar(1.0, 3.0 * x.0 - 2.0 * x.1);
                let got = phys[i * n + j];
                assert!((want - got).norm() < 1e-12);
            }
        }
        // Parseval: L^2 norm of a unit mode is L^{d/2} = 2 pi
        assert!((f.l2_norm() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn oversampled_interpolates_exactly() {
        // zero-padding a band-limited field evaluates the same trigonometric
        // polynomial on the finer lattice
        let f = random_field(&[8, 8], 1, 3);
        let os = f.physical_oversampled(0, &[16, 16]);
        let base = f.physical(0);
        for i in 0..8 {
            for j in 0..8 {
                let a = base[i * 8 + j];
                let b = os[(2 * i) * 16 + 2 * j];
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_symmetrization_makes_real() {
        let mut f = random_field(&[8, 6], 2, 11);
        f.hermitian_symmetrize();
        assert!(f.hermitian_residual() < 1e-15);
        for c in 0..2 {
            let phys = f.physical(c);
            let max_im = phys.iter().map(|z| z.im.abs()).fold(0.0f64, f64::max);
            assert!(max_im < 1e-13, "imaginary residue {max_im}");
        }
    }

    #[test]
    fn nyquist_guard_flags_edge_modes() {
        let n = 16;
        let mut f = SpectralField::zeros(&[n, n], &[2.0 * std::f64::consts::PI; 2], 1);
        let site = f.site(&[1, 2]);
        f.comp_mut(0)[site] = Complex64::new(1.0, 0.0);
        assert!(f.check_nyquist_guard().is_ok());
        let site = f.site(&[n / 2 - 1, 2]);
        f.comp_mut(0)[site] = Complex64::new(1.0, 0.0);
        assert!(f.check_nyquist_guard().is_err());
    }

    #[test]
    fn support_extent_and_radius() {
        let n = 32;
        let mut f = SpectralField::zeros(&[n, n], &[2.0 * std::f64::consts::PI; 2], 1);
        let site = f.site(&[wavenumber_to_index(-5, n), 3]);
        f.comp_mut(0)[site] = Complex64::new(0.5, 0.0);
        assert_eq!(f.support_extent().unwrap(), vec![5, 3]);
        let (lo, hi) = f.support_radius_range().unwrap();
        let r = (25.0f64 + 9.0).sqrt();
        assert!((lo - r).abs() < 1e-12 && (hi - r).abs() < 1e-12);
    }
}
