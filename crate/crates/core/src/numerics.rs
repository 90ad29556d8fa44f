//! Dense complex matrix kernels, the zeroth-order Bessel function and seeded
//! complex Gaussian sampling.

use faer::{Mat, MatRef, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense complex matrix. Column vectors are the `cols == 1` case.
pub type CMatrix = DMatrix<Complex64>;

/// Random stream used throughout the simulator.
pub type SimRng = ChaCha8Rng;

/// Builds a matrix from row-major entries, rejecting empty shapes and
/// non-finite values.
pub fn cmatrix(rows: usize, cols: usize, entries: &[Complex64]) -> Result<CMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::domain(format!("empty shape {rows}x{cols}")));
    }
    if entries.len() != rows * cols {
        return Err(Error::domain(format!(
            "{} entries for a {rows}x{cols} matrix",
            entries.len()
        )));
    }
    let m = CMatrix::from_row_slice(rows, cols, entries);
    ensure_finite(&m)?;
    Ok(m)
}

/// Column vector from its entries.
pub fn column(entries: &[Complex64]) -> Result<CMatrix> {
    cmatrix(entries.len(), 1, entries)
}

/// Column `k` of `m` as an `M x 1` matrix.
pub fn col(m: &CMatrix, k: usize) -> CMatrix {
    m.columns(k, 1).into_owned()
}

pub fn ensure_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::domain("matrix has non-finite entries"))
    }
}

/// Squared Euclidean norm of each row.
pub fn row_powers(m: &CMatrix) -> Vec<f64> {
    m.row_iter()
        .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
        .collect()
}

/// Zeroth-order Bessel function of the first kind.
///
/// Power series below |x| = 8, Abramowitz & Stegun 9.4.3 above. Absolute error
/// stays under 3e-8 everywhere.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("bessel_j0 of non-finite {x}")));
    }
    let ax = x.abs();
    if ax < 8.0 {
        let q = -0.25 * ax * ax;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=60 {
            let kf = k as f64;
            term *= q / (kf * kf);
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        return Ok(sum);
    }
    let y = 3.0 / ax;
    let f0 = 0.797_884_56
        + y * (-0.000_000_77
            + y * (-0.005_527_40
                + y * (-0.000_095_12
                    + y * (0.001_372_37 + y * (-0.000_728_05 + y * 0.000_144_76)))));
    let theta0 = ax - 0.785_398_16
        + y * (-0.041_663_97
            + y * (-0.000_039_54
                + y * (0.002_625_73
                    + y * (-0.000_541_25 + y * (-0.000_293_33 + y * 0.000_135_58)))));
    Ok(f0 * theta0.cos() / ax.sqrt())
}

fn max_asymmetry(r: &CMatrix) -> f64 {
    let n = r.nrows();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in a..n {
            worst = worst.max((r[(a, b)] - r[(b, a)].conj()).norm());
        }
    }
    worst
}

/// Hermitian square root `S` of a Hermitian PSD matrix, with `S * S^H = R`.
///
/// Eigenvalues down to -1e-10 (relative to the spectral radius) are clipped to
/// zero before the square root.
pub fn hermitian_sqrt(r: &CMatrix) -> Result<CMatrix> {
    if r.nrows() != r.ncols() {
        return Err(Error::domain(format!(
            "hermitian_sqrt of non-square {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    ensure_finite(r)?;
    let scale = r.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    let asym = max_asymmetry(r);
    if asym > 1e-10 * scale {
        return Err(Error::NotHermitian(asym));
    }
    // Symmetrize so the eigen solver sees an exactly Hermitian input.
    let sym = (r + r.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = to_faer(&sym)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Degenerate(format!("eigendecomposition failed: {e:?}")))?;
    let lambdas: Vec<f64> = eig.S().column_vector().iter().map(|z| z.re).collect();
    let min_eig = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < -1e-10 * scale {
        return Err(Error::NotPsd(min_eig));
    }
    let u = from_faer(eig.U());
    let mut scaled = u.clone();
    for (j, &lambda) in lambdas.iter().enumerate() {
        scaled.column_mut(j).scale_mut(lambda.max(0.0).sqrt());
    }
    let s = &scaled * u.adjoint();
    // Remove rounding asymmetry from the product.
    Ok((&s + s.adjoint()) * Complex64::new(0.5, 0.0))
}

fn to_faer(a: &CMatrix) -> Mat<Complex64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(m: MatRef<'_, Complex64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Moore-Penrose pseudo-inverse together with the singular values of the
/// input, largest first.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub matrix: CMatrix,
    pub singular_values: Vec<f64>,
}

impl PseudoInverse {
    /// `sigma_min / sigma_max`, zero for an all-zero input.
    pub fn conditioning(&self) -> f64 {
        let max = self.singular_values.first().copied().unwrap_or(0.0);
        let min = self.singular_values.last().copied().unwrap_or(0.0);
        if max > 0.0 {
            min / max
        } else {
            0.0
        }
    }
}

/// SVD based pseudo-inverse. Singular values below
/// `max(rows, cols) * eps * sigma_max` are treated as zero.
pub fn pseudo_inverse_with_spectrum(a: &CMatrix) -> Result<PseudoInverse> {
    let (rows, cols) = a.shape();
    let svd = to_faer(a)
        .thin_svd()
        .map_err(|e| Error::Degenerate(format!("SVD failed: {e:?}")))?;
    let sv: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let tau = rows.max(cols) as f64 * f64::EPSILON * sigma_max;

    // A^+ = V diag(1/sigma) U^H
    let mut v_scaled = from_faer(svd.V());
    for (j, &s) in sv.iter().enumerate() {
        let inv = if s > tau && s > 0.0 { 1.0 / s } else { 0.0 };
        v_scaled.column_mut(j).scale_mut(inv);
    }
    let matrix = v_scaled * from_faer(svd.U()).adjoint();
    Ok(PseudoInverse {
        matrix,
        singular_values: sv,
    })
}

pub fn pseudo_inverse(a: &CMatrix) -> Result<CMatrix> {
    Ok(pseudo_inverse_with_spectrum(a)?.matrix)
}

/// Independent stream for `(seed, stream)`. Distinct stream ids never share
/// keystream blocks.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One circularly-symmetric complex normal sample with unit variance
/// (Box-Muller).
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    // u1 in (0, 1] keeps the logarithm finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let radius = (-u1.ln()).sqrt(); // sqrt(-2 ln u1) * sqrt(1/2)
    let angle = std::f64::consts::TAU * u2;
    Complex64::new(radius * angle.cos(), radius * angle.sin())
}

/// Column of `n` i.i.d. CN(0, variance) entries.
pub fn complex_gaussian<R: Rng + ?Sized>(n: usize, variance: f64, rng: &mut R) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::domain("complex_gaussian with n = 0"));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::domain(format!("variance must be positive, got {variance}")));
    }
    let scale = variance.sqrt();
    Ok(CMatrix::from_fn(n, 1, |_, _| standard_complex_normal(rng) * scale))
}

/// Standard real normal draw from the same Box-Muller transform.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    standard_complex_normal(rng).re * std::f64::consts::SQRT_2
}
