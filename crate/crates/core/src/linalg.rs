//! Dense complex linear algebra kernels for the truncated-Fock-basis hot loops.
//!
//! Almost every operator in this crate is banded in the Fock basis (ladder
//! operators are bidiagonal, q̂ is tridiagonal, the Duffing Hamiltonian has
//! half-bandwidth 4), so the conditional-state update spends its time in a
//! handful of `banded × dense` products plus one genuinely dense sandwich
//! `M ρ M†`. The kernels here are written as column-major axpy loops over
//! `nalgebra` storage, which the compiler vectorizes well enough that the
//! integrator stays usable at dim ≈ 60–100 on a laptop-class machine.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{QcError, Result};

/// Shorthand used across the crate.
pub type C64 = Complex64;
/// Dense complex matrix, column-major.
pub type CMatrix = DMatrix<C64>;

pub const C_ZERO: C64 = C64::new(0.0, 0.0);
pub const C_ONE: C64 = C64::new(1.0, 0.0);
pub const C_I: C64 = C64::new(0.0, 1.0);

/// Half-bandwidth of `m`: smallest `b` such that `m[(i, j)] == 0` whenever
/// `|i - j| > b`.
pub fn half_bandwidth(m: &CMatrix) -> usize {
    let n = m.nrows();
    let mut band = 0;
    for j in 0..n {
        for i in 0..n {
            if m[(i, j)] != C_ZERO {
                band = band.max(i.abs_diff(j));
            }
        }
    }
    band
}

/// In-place Hermitization `m ← (m + m†)/2`.
pub fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..=j {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Largest absolute entry of `m - m†`.
pub fn hermiticity_residue(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut res: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            res = res.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    res
}

/// `Tr(a · b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C_ZERO;
    for j in 0..n {
        for i in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `Tr(a · b)` when `a` has half-bandwidth `band`; O(band · n).
pub fn trace_product_banded(a: &CMatrix, band: usize, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C_ZERO;
    for j in 0..n {
        let lo = j.saturating_sub(band);
        let hi = (j + band).min(n - 1);
        for i in lo..=hi {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

#[inline(always)]
fn axpy_range(out: &mut [C64], a: &[C64], coef: C64, lo: usize, hi: usize) {
    // out[lo..=hi] += coef * a[lo..=hi]
    for i in lo..=hi {
        out[i] += coef * a[i];
    }
}

/// `out = a · b` for dense square matrices of equal dimension.
pub fn gemm_into(a: &CMatrix, b: &CMatrix, out: &mut CMatrix) {
    let n = a.nrows();
    debug_assert!(b.nrows() == n && b.ncols() == n && out.nrows() == n && out.ncols() == n);
    out.fill(C_ZERO);
    let a_s = a.as_slice();
    let b_s = b.as_slice();
    let o_s = out.as_mut_slice();
    for j in 0..n {
        let bcol = &b_s[j * n..(j + 1) * n];
        let ocol = &mut o_s[j * n..(j + 1) * n];
        for k in 0..n {
            let coef = bcol[k];
            let acol = &a_s[k * n..(k + 1) * n];
            axpy_range(ocol, acol, coef, 0, n - 1);
        }
    }
}

/// `out = a · b†` for dense square matrices of equal dimension.
pub fn gemm_adjoint_into(a: &CMatrix, b: &CMatrix, out: &mut CMatrix) {
    let n = a.nrows();
    out.fill(C_ZERO);
    let a_s = a.as_slice();
    let o_s = out.as_mut_slice();
    for j in 0..n {
        let ocol = &mut o_s[j * n..(j + 1) * n];
        for k in 0..n {
            // (b†)[k, j] = conj(b[j, k])
            let coef = b[(j, k)].conj();
            if coef == C_ZERO {
                continue;
            }
            let acol = &a_s[k * n..(k + 1) * n];
            axpy_range(ocol, acol, coef, 0, n - 1);
        }
    }
}

/// `out = a · b` where `a` has half-bandwidth `band`.
pub fn band_mul_dense_into(a: &CMatrix, band: usize, b: &CMatrix, out: &mut CMatrix) {
    let n = a.nrows();
    out.fill(C_ZERO);
    let a_s = a.as_slice();
    let b_s = b.as_slice();
    let o_s = out.as_mut_slice();
    for j in 0..n {
        let bcol = &b_s[j * n..(j + 1) * n];
        let ocol = &mut o_s[j * n..(j + 1) * n];
        for k in 0..n {
            let coef = bcol[k];
            if coef == C_ZERO {
                continue;
            }
            let lo = k.saturating_sub(band);
            let hi = (k + band).min(n - 1);
            let acol = &a_s[k * n..(k + 1) * n];
            axpy_range(ocol, acol, coef, lo, hi);
        }
    }
}

/// `out = b · a†` where `a` has half-bandwidth `band`.
pub fn dense_mul_band_adjoint_into(b: &CMatrix, a: &CMatrix, band: usize, out: &mut CMatrix) {
    let n = a.nrows();
    out.fill(C_ZERO);
    let b_s = b.as_slice();
    let o_s = out.as_mut_slice();
    for j in 0..n {
        let ocol = &mut o_s[j * n..(j + 1) * n];
        let lo = j.saturating_sub(band);
        let hi = (j + band).min(n - 1);
        for k in lo..=hi {
            // (a†)[k, j] = conj(a[j, k])
            let coef = a[(j, k)].conj();
            if coef == C_ZERO {
                continue;
            }
            let bcol = &b_s[k * n..(k + 1) * n];
            axpy_range(ocol, bcol, coef, 0, n - 1);
        }
    }
}

/// `out = b · a` where `a` has half-bandwidth `band`.
pub fn dense_mul_band_into(b: &CMatrix, a: &CMatrix, band: usize, out: &mut CMatrix) {
    let n = a.nrows();
    out.fill(C_ZERO);
    let b_s = b.as_slice();
    let o_s = out.as_mut_slice();
    for j in 0..n {
        let ocol = &mut o_s[j * n..(j + 1) * n];
        let lo = j.saturating_sub(band);
        let hi = (j + band).min(n - 1);
        for k in lo..=hi {
            let coef = a[(k, j)];
            if coef == C_ZERO {
                continue;
            }
            let bcol = &b_s[k * n..(k + 1) * n];
            axpy_range(ocol, bcol, coef, 0, n - 1);
        }
    }
}

/// `out += scale · l · rho · l†` where `l` has half-bandwidth `band`;
/// `scratch` must match the shared dimension.
pub fn accumulate_sandwich_banded(
    l: &CMatrix,
    band: usize,
    rho: &CMatrix,
    scale: f64,
    scratch: &mut CMatrix,
    out: &mut CMatrix,
) {
    let n = l.nrows();
    band_mul_dense_into(l, band, rho, scratch);
    // out += scale * scratch * l†
    let s_s = scratch.as_slice();
    let o_s = out.as_mut_slice();
    let sc = C64::new(scale, 0.0);
    for j in 0..n {
        let ocol = &mut o_s[j * n..(j + 1) * n];
        let lo = j.saturating_sub(band);
        let hi = (j + band).min(n - 1);
        for k in lo..=hi {
            let coef = sc * l[(j, k)].conj();
            if coef == C_ZERO {
                continue;
            }
            let scol = &s_s[k * n..(k + 1) * n];
            axpy_range(ocol, scol, coef, 0, n - 1);
        }
    }
}

/// A complex matrix split into real and imaginary planes (column-major),
/// the layout the dense inner loops run on: plane-wise products map onto
/// tuned real `dgemm` calls and plane-wise band loops vectorize cleanly,
/// neither of which holds for interleaved `Complex64` storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMatrix {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub n: usize,
}

impl SplitMatrix {
    pub fn zeros(n: usize) -> Self {
        SplitMatrix { re: vec![0.0; n * n], im: vec![0.0; n * n], n }
    }

    pub fn from_cmatrix(m: &CMatrix) -> Self {
        let n = m.nrows();
        let mut out = SplitMatrix::zeros(n);
        out.load(m);
        out
    }

    pub fn load(&mut self, m: &CMatrix) {
        let s = m.as_slice();
        for (i, c) in s.iter().enumerate() {
            self.re[i] = c.re;
            self.im[i] = c.im;
        }
    }

    pub fn store(&self, m: &mut CMatrix) {
        let s = m.as_mut_slice();
        for (i, c) in s.iter_mut().enumerate() {
            c.re = self.re[i];
            c.im = self.im[i];
        }
    }

    pub fn copy_from(&mut self, other: &SplitMatrix) {
        self.re.copy_from_slice(&other.re);
        self.im.copy_from_slice(&other.im);
    }

    pub fn trace_re(&self) -> f64 {
        let n = self.n;
        (0..n).map(|i| self.re[i * n + i]).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        self.re.iter_mut().for_each(|v| *v *= factor);
        self.im.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self ← (self + self†)/2`.
    pub fn hermitize(&mut self) {
        let n = self.n;
        for j in 0..n {
            for i in 0..j {
                let r = 0.5 * (self.re[j * n + i] + self.re[i * n + j]);
                self.re[j * n + i] = r;
                self.re[i * n + j] = r;
                let im = 0.5 * (self.im[j * n + i] - self.im[i * n + j]);
                self.im[j * n + i] = im;
                self.im[i * n + j] = -im;
            }
            self.im[j * n + j] = 0.0;
        }
    }
}

/// Real gemm on column-major square buffers: `c = alpha·op(a)·op(b) + beta·c`.
#[inline]
fn mm(
    n: usize,
    alpha: f64,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    let (rsa, csa) = if trans_a { (n as isize, 1) } else { (1, n as isize) };
    let (rsb, csb) = if trans_b { (n as isize, 1) } else { (1, n as isize) };
    debug_assert!(a.len() == n * n && b.len() == n * n && c.len() == n * n);
    unsafe {
        matrixmultiply::dgemm(
            n,
            n,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            1,
            n as isize,
        );
    }
}

/// `c = a · b` on split planes (4 real gemms).
pub fn split_gemm(a: &SplitMatrix, b: &SplitMatrix, c: &mut SplitMatrix) {
    let n = a.n;
    mm(n, 1.0, &a.re, false, &b.re, false, 0.0, &mut c.re);
    mm(n, -1.0, &a.im, false, &b.im, false, 1.0, &mut c.re);
    mm(n, 1.0, &a.re, false, &b.im, false, 0.0, &mut c.im);
    mm(n, 1.0, &a.im, false, &b.re, false, 1.0, &mut c.im);
}

/// `c = a · b†` on split planes.
pub fn split_gemm_adjoint(a: &SplitMatrix, b: &SplitMatrix, c: &mut SplitMatrix) {
    let n = a.n;
    mm(n, 1.0, &a.re, false, &b.re, true, 0.0, &mut c.re);
    mm(n, 1.0, &a.im, false, &b.im, true, 1.0, &mut c.re);
    mm(n, 1.0, &a.im, false, &b.re, true, 0.0, &mut c.im);
    mm(n, -1.0, &a.re, false, &b.im, true, 1.0, &mut c.im);
}

/// `out = a · b` where `a` has half-bandwidth `band`, on split planes.
pub fn split_band_mul(a: &SplitMatrix, band: usize, b: &SplitMatrix, out: &mut SplitMatrix) {
    let n = a.n;
    out.re.fill(0.0);
    out.im.fill(0.0);
    for j in 0..n {
        let (bcol_r, bcol_i) = (&b.re[j * n..(j + 1) * n], &b.im[j * n..(j + 1) * n]);
        let (ocol_r, ocol_i) = (
            &mut out.re[j * n..(j + 1) * n],
            &mut out.im[j * n..(j + 1) * n],
        );
        for k in 0..n {
            let br = bcol_r[k];
            let bi = bcol_i[k];
            if br == 0.0 && bi == 0.0 {
                continue;
            }
            let lo = k.saturating_sub(band);
            let hi = (k + band).min(n - 1);
            let acol_r = &a.re[k * n..(k + 1) * n];
            let acol_i = &a.im[k * n..(k + 1) * n];
            for i in lo..=hi {
                ocol_r[i] += acol_r[i] * br - acol_i[i] * bi;
                ocol_i[i] += acol_r[i] * bi + acol_i[i] * br;
            }
        }
    }
}

/// `out = b · a` where `a` has half-bandwidth `band`, on split planes.
pub fn split_mul_band(b: &SplitMatrix, a: &SplitMatrix, band: usize, out: &mut SplitMatrix) {
    let n = a.n;
    out.re.fill(0.0);
    out.im.fill(0.0);
    for j in 0..n {
        let (ocol_r, ocol_i) = (
            &mut out.re[j * n..(j + 1) * n],
            &mut out.im[j * n..(j + 1) * n],
        );
        let lo = j.saturating_sub(band);
        let hi = (j + band).min(n - 1);
        for k in lo..=hi {
            let ar = a.re[j * n + k];
            let ai = a.im[j * n + k];
            if ar == 0.0 && ai == 0.0 {
                continue;
            }
            let bcol_r = &b.re[k * n..(k + 1) * n];
            let bcol_i = &b.im[k * n..(k + 1) * n];
            for i in 0..n {
                ocol_r[i] += bcol_r[i] * ar - bcol_i[i] * ai;
                ocol_i[i] += bcol_r[i] * ai + bcol_i[i] * ar;
            }
        }
    }
}

/// `out += scale · y · l†` where `l` has half-bandwidth `band`, split planes.
pub fn split_acc_mul_band_adjoint(
    y: &SplitMatrix,
    l: &SplitMatrix,
    band: usize,
    scale: f64,
    out: &mut SplitMatrix,
) {
    let n = l.n;
    for j in 0..n {
        let (ocol_r, ocol_i) = (
            &mut out.re[j * n..(j + 1) * n],
            &mut out.im[j * n..(j + 1) * n],
        );
        let lo = j.saturating_sub(band);
        let hi = (j + band).min(n - 1);
        for k in lo..=hi {
            // (l†)[k, j] = conj(l[j, k]); column-major: l[j, k] sits at k·n + j
            let cr = scale * l.re[k * n + j];
            let ci = -scale * l.im[k * n + j];
            if cr == 0.0 && ci == 0.0 {
                continue;
            }
            let ycol_r = &y.re[k * n..(k + 1) * n];
            let ycol_i = &y.im[k * n..(k + 1) * n];
            for i in 0..n {
                ocol_r[i] += ycol_r[i] * cr - ycol_i[i] * ci;
                ocol_i[i] += ycol_r[i] * ci + ycol_i[i] * cr;
            }
        }
    }
}

/// `m += coef · banded` touching only the band, split planes.
pub fn split_add_banded_scaled(m: &mut SplitMatrix, banded: &SplitMatrix, band: usize, coef: C64) {
    let n = m.n;
    for j in 0..n {
        let lo = j.saturating_sub(band);
        let hi = (j + band).min(n - 1);
        for i in lo..=hi {
            let br = banded.re[j * n + i];
            let bi = banded.im[j * n + i];
            m.re[j * n + i] += coef.re * br - coef.im * bi;
            m.im[j * n + i] += coef.re * bi + coef.im * br;
        }
    }
}

/// Eigenvalues and eigenvectors of a Hermitian matrix, ascending.
///
/// Fails if the input is not Hermitian within `tol`.
pub fn hermitian_eigen(m: &CMatrix, tol: f64) -> Result<(DVector<f64>, CMatrix)> {
    let res = hermiticity_residue(m);
    if res > tol {
        return Err(QcError::NotHermitian { residue: res });
    }
    let mut h = m.clone();
    hermitize(&mut h);
    let eig = h.symmetric_eigen();
    let n = m.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix, tol: f64) -> Result<DVector<f64>> {
    let res = hermiticity_residue(m);
    if res > tol {
        return Err(QcError::NotHermitian { residue: res });
    }
    let mut h = m.clone();
    hermitize(&mut h);
    let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(DVector::from_vec(vals))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let mut h = m.clone();
    hermitize(&mut h);
    h.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Dense matrix exponential (nalgebra's Padé scaling-and-squaring).
pub fn expm(m: &CMatrix) -> CMatrix {
    m.exp()
}

/// Matrix exponential by scaling-and-squaring with a Taylor core, run on the
/// split-plane gemms. Matches [`expm`] to near machine precision at the
/// operator norms this crate produces (‖A‖ ≲ 100) while being an order of
/// magnitude faster, which matters because the moving basis re-exponentiates
/// the deterministic propagator at every frame shift.
pub fn expm_fast(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    // 1-norm of the complex matrix
    let mut norm: f64 = 0.0;
    for j in 0..n {
        let col: f64 = (0..n).map(|i| m[(i, j)].norm()).sum();
        norm = norm.max(col);
    }
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = 0.5_f64.powi(squarings as i32);

    let mut b = SplitMatrix::from_cmatrix(m);
    b.scale(scale);

    // Taylor series: with ‖B‖ ≤ 0.5 sixteen terms reach ~1e-19
    let mut sum = SplitMatrix::zeros(n);
    let mut term = SplitMatrix::zeros(n);
    for i in 0..n {
        sum.re[i * n + i] = 1.0;
        term.re[i * n + i] = 1.0;
    }
    let mut next = SplitMatrix::zeros(n);
    for k in 1..=16u32 {
        split_gemm(&term, &b, &mut next);
        next.scale(1.0 / k as f64);
        std::mem::swap(&mut term, &mut next);
        for (s, t) in sum.re.iter_mut().zip(&term.re) {
            *s += t;
        }
        for (s, t) in sum.im.iter_mut().zip(&term.im) {
            *s += t;
        }
    }
    for _ in 0..squarings {
        split_gemm(&sum, &sum.clone(), &mut next);
        std::mem::swap(&mut sum, &mut next);
    }
    let mut out = CMatrix::zeros(n, n);
    sum.store(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn random_banded(n: usize, band: usize, seed: u64) -> CMatrix {
        let mut m = random_matrix(n, seed);
        for j in 0..n {
            for i in 0..n {
                if i.abs_diff(j) > band {
                    m[(i, j)] = C_ZERO;
                }
            }
        }
        m
    }

    fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn gemm_matches_nalgebra() {
        let a = random_matrix(17, 1);
        let b = random_matrix(17, 2);
        let mut out = CMatrix::zeros(17, 17);
        gemm_into(&a, &b, &mut out);
        assert!(max_abs_diff(&out, &(&a * &b)) < 1e-12);
    }

    #[test]
    fn gemm_adjoint_matches_nalgebra() {
        let a = random_matrix(14, 30);
        let b = random_matrix(14, 31);
        let mut out = CMatrix::zeros(14, 14);
        gemm_adjoint_into(&a, &b, &mut out);
        assert!(max_abs_diff(&out, &(&a * b.adjoint())) < 1e-12);
    }

    #[test]
    fn banded_kernels_match_dense() {
        let n = 23;
        for band in [0, 1, 4] {
            let a = random_banded(n, band, 3 + band as u64);
            let b = random_matrix(n, 7);
            let mut out = CMatrix::zeros(n, n);

            band_mul_dense_into(&a, band, &b, &mut out);
            assert!(max_abs_diff(&out, &(&a * &b)) < 1e-12);

            dense_mul_band_adjoint_into(&b, &a, band, &mut out);
            assert!(max_abs_diff(&out, &(&b * a.adjoint())) < 1e-12);

            dense_mul_band_into(&b, &a, band, &mut out);
            assert!(max_abs_diff(&out, &(&b * &a)) < 1e-12);

            let mut acc = random_matrix(n, 11);
            let expected = &acc + (&a * &b * a.adjoint()) * C64::new(0.25, 0.0);
            let mut scratch = CMatrix::zeros(n, n);
            accumulate_sandwich_banded(&a, band, &b, 0.25, &mut scratch, &mut acc);
            assert!(max_abs_diff(&acc, &expected) < 1e-12);
        }
    }

    #[test]
    fn bandwidth_detection() {
        let a = random_banded(12, 3, 5);
        assert_eq!(half_bandwidth(&a), 3);
        assert_eq!(half_bandwidth(&CMatrix::identity(5, 5)), 0);
    }

    #[test]
    fn trace_helpers_agree() {
        let a = random_banded(15, 2, 9);
        let b = random_matrix(15, 10);
        let t_dense = trace_product(&a, &b);
        let t_band = trace_product_banded(&a, 2, &b);
        let t_ref = (&a * &b).trace();
        assert_abs_diff_eq!(t_dense.re, t_ref.re, epsilon = 1e-12);
        assert_abs_diff_eq!(t_band.im, t_ref.im, epsilon = 1e-12);
    }

    #[test]
    fn split_kernels_match_complex_reference() {
        let n = 19;
        let a_c = random_matrix(n, 40);
        let b_c = random_matrix(n, 41);
        let a = SplitMatrix::from_cmatrix(&a_c);
        let b = SplitMatrix::from_cmatrix(&b_c);
        let mut c = SplitMatrix::zeros(n);
        let mut back = CMatrix::zeros(n, n);

        split_gemm(&a, &b, &mut c);
        c.store(&mut back);
        assert!(max_abs_diff(&back, &(&a_c * &b_c)) < 1e-12);

        split_gemm_adjoint(&a, &b, &mut c);
        c.store(&mut back);
        assert!(max_abs_diff(&back, &(&a_c * b_c.adjoint())) < 1e-12);

        for band in [0usize, 1, 3] {
            let l_c = random_banded(n, band, 42 + band as u64);
            let l = SplitMatrix::from_cmatrix(&l_c);

            split_band_mul(&l, band, &b, &mut c);
            c.store(&mut back);
            assert!(max_abs_diff(&back, &(&l_c * &b_c)) < 1e-12);

            split_mul_band(&b, &l, band, &mut c);
            c.store(&mut back);
            assert!(max_abs_diff(&back, &(&b_c * &l_c)) < 1e-12);

            let mut acc = SplitMatrix::from_cmatrix(&a_c);
            split_acc_mul_band_adjoint(&b, &l, band, 0.3, &mut acc);
            acc.store(&mut back);
            let want = &a_c + (&b_c * l_c.adjoint()) * C64::new(0.3, 0.0);
            assert!(max_abs_diff(&back, &want) < 1e-12);

            let mut m = SplitMatrix::from_cmatrix(&a_c);
            split_add_banded_scaled(&mut m, &l, band, C64::new(0.4, -0.2));
            m.store(&mut back);
            let want = &a_c + &l_c * C64::new(0.4, -0.2);
            assert!(max_abs_diff(&back, &want) < 1e-12);
        }
    }

    #[test]
    fn split_hermitize_matches_complex() {
        let a_c = random_matrix(11, 50);
        let mut a = SplitMatrix::from_cmatrix(&a_c);
        a.hermitize();
        let mut back = CMatrix::zeros(11, 11);
        a.store(&mut back);
        let mut want = a_c.clone();
        hermitize(&mut want);
        assert!(max_abs_diff(&back, &want) < 1e-15);
        assert_abs_diff_eq!(a.trace_re(), want.trace().re, epsilon = 1e-12);
    }

    #[test]
    fn hermitize_produces_hermitian() {
        let mut a = random_matrix(9, 12);
        hermitize(&mut a);
        assert!(hermiticity_residue(&a) < 1e-15);
    }

    #[test]
    fn hermitian_eigen_recomposes() {
        let mut a = random_matrix(10, 13);
        hermitize(&mut a);
        let (vals, vecs) = hermitian_eigen(&a, 1e-10).unwrap();
        for i in 1..vals.len() {
            assert!(vals[i] >= vals[i - 1]);
        }
        let lambda = CMatrix::from_fn(10, 10, |i, j| {
            if i == j {
                C64::new(vals[i], 0.0)
            } else {
                C_ZERO
            }
        });
        let recomposed = &vecs * lambda * vecs.adjoint();
        assert!(max_abs_diff(&recomposed, &a) < 1e-9);
    }

    #[test]
    fn hermitian_eigen_rejects_non_hermitian() {
        let a = random_matrix(6, 20);
        assert!(hermitian_eigen(&a, 1e-10).is_err());
    }

    #[test]
    fn expm_matches_series_for_small_norm() {
        let a = random_matrix(8, 21) * C64::new(0.05, 0.0);
        let e = expm(&a);
        // 4-term Taylor is plenty at this norm for a 1e-8 check
        let mut series = CMatrix::identity(8, 8);
        let mut term = CMatrix::identity(8, 8);
        for k in 1..=6 {
            term = &term * &a / C64::new(k as f64, 0.0);
            series += &term;
        }
        assert!(max_abs_diff(&e, &series) < 1e-8);
    }

    #[test]
    fn expm_fast_matches_reference() {
        // small norm
        let a = random_matrix(20, 60) * C64::new(0.3, 0.0);
        let diff = max_abs_diff(&expm_fast(&a), &expm(&a));
        assert!(diff < 1e-12, "small-norm diff {diff}");
        // large norm typical of the frame generator (‖A‖ ~ 10–100)
        let mut h = random_matrix(30, 61);
        hermitize(&mut h);
        let a = (h * C_I) * C64::new(25.0, 0.0);
        let e_fast = expm_fast(&a);
        let e_ref = expm(&a);
        let scale = e_ref.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let diff = max_abs_diff(&e_fast, &e_ref) / scale;
        assert!(diff < 1e-11, "large-norm relative diff {diff}");
    }

    #[test]
    fn expm_of_antihermitian_is_unitary() {
        let mut g = random_matrix(12, 22);
        hermitize(&mut g);
        let u = expm(&(g * C_I));
        let residue = max_abs_diff(&(&u * u.adjoint()), &CMatrix::identity(12, 12));
        assert!(residue < 1e-10, "unitarity residue {residue}");
    }
}
