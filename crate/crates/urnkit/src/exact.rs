//! Exact-arithmetic cross-check of the floating-point spectral path for
//! integer matrices: characteristic polynomial over the integers, integer
//! eigenvalues with exact multiplicities, and exact Jordan indices from
//! rational rank computations.

use nalgebra::{Complex, DMatrix};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Result, UrnError};
use crate::spectral::Spectrum;

/// Converts a float matrix to exact integers, or fails if any entry is not
/// an integer within 1e-9.
pub fn to_integer_matrix(a: &DMatrix<f64>) -> Result<Vec<Vec<i64>>> {
    let mut rows = Vec::with_capacity(a.nrows());
    for i in 0..a.nrows() {
        let mut row = Vec::with_capacity(a.ncols());
        for j in 0..a.ncols() {
            let x = a[(i, j)];
            let r = x.round();
            if (x - r).abs() > 1e-9 || r.abs() >= 9e15 {
                return Err(UrnError::InvalidArgument(format!(
                    "entry ({i},{j}) = {x} is not an integer"
                )));
            }
            row.push(r as i64);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Monic characteristic polynomial det(xI - A) of an integer matrix, via
/// Faddeev-LeVerrier in exact rational arithmetic. `coeffs[k]` is the
/// coefficient of `x^k`; `coeffs[q] = 1`.
pub fn char_poly(a: &[Vec<i64>]) -> Vec<BigInt> {
    let q = a.len();
    let rat = |x: i64| BigRational::from_integer(BigInt::from(x));
    let zero = BigRational::zero();
    // m holds M_k; starts as A.
    let mut m: Vec<Vec<BigRational>> = a
        .iter()
        .map(|row| row.iter().map(|&x| rat(x)).collect())
        .collect();
    let a_rat = m.clone();
    let mut coeffs = vec![BigInt::zero(); q + 1];
    coeffs[q] = BigInt::one();
    for k in 1..=q {
        let trace: BigRational = (0..q).map(|i| m[i][i].clone()).fold(zero.clone(), |s, x| s + x);
        let c = -trace / BigRational::from_integer(BigInt::from(k as i64));
        debug_assert!(c.denom().is_one(), "Faddeev-LeVerrier coefficient not integral");
        coeffs[q - k] = c.numer().clone();
        if k < q {
            // M_{k+1} = A (M_k + c I)
            for (i, row) in m.iter_mut().enumerate() {
                row[i] += c.clone();
            }
            let mut next = vec![vec![zero.clone(); q]; q];
            for i in 0..q {
                for j in 0..q {
                    let mut acc = zero.clone();
                    for (l, m_row) in m.iter().enumerate() {
                        acc += &a_rat[i][l] * &m_row[j];
                    }
                    next[i][j] = acc;
                }
            }
            m = next;
        }
    }
    coeffs
}

/// Evaluates the characteristic polynomial at a complex point.
pub fn char_poly_value(coeffs: &[BigInt], x: Complex<f64>) -> Complex<f64> {
    let mut acc = Complex::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        let cf = bigint_to_f64(c);
        acc = acc * x + Complex::new(cf, 0.0);
    }
    acc
}

fn bigint_to_f64(x: &BigInt) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

/// Integer roots of a monic integer polynomial, with multiplicities, found
/// by trying divisors of the constant term and deflating.
pub fn integer_roots(coeffs: &[BigInt]) -> Vec<(i64, usize)> {
    let mut poly: Vec<BigInt> = coeffs.to_vec();
    let mut roots: Vec<(i64, usize)> = Vec::new();

    loop {
        // Strip factors of x (root 0) first.
        if poly.len() > 1 && poly[0].is_zero() {
            add_root(&mut roots, 0);
            poly.remove(0);
            continue;
        }
        if poly.len() <= 1 {
            break;
        }
        let constant = poly[0].clone();
        let mut found = None;
        for d in divisors(&constant) {
            for r in [d, -d] {
                if synthetic_remainder(&poly, r).is_zero() {
                    found = Some(r);
                    break;
                }
            }
            if found.is_some() {
                break;
            }
        }
        match found {
            Some(r) => {
                poly = synthetic_quotient(&poly, r);
                add_root(&mut roots, r);
            }
            None => break,
        }
    }
    roots.sort();
    roots
}

fn add_root(roots: &mut Vec<(i64, usize)>, r: i64) {
    if let Some(entry) = roots.iter_mut().find(|(x, _)| *x == r) {
        entry.1 += 1;
    } else {
        roots.push((r, 1));
    }
}

fn divisors(x: &BigInt) -> Vec<i64> {
    use num_traits::ToPrimitive;
    let x = x.abs();
    let Some(x) = x.to_i64() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut d = 1;
    while d * d <= x {
        if x % d == 0 {
            out.push(d);
            if d != x / d {
                out.push(x / d);
            }
        }
        d += 1;
    }
    out.sort();
    out
}

fn synthetic_remainder(poly: &[BigInt], r: i64) -> BigInt {
    let r = BigInt::from(r);
    let mut acc = BigInt::zero();
    for c in poly.iter().rev() {
        acc = acc * &r + c;
    }
    acc
}

fn synthetic_quotient(poly: &[BigInt], r: i64) -> Vec<BigInt> {
    let r = BigInt::from(r);
    let mut quotient = vec![BigInt::zero(); poly.len() - 1];
    let mut carry = BigInt::zero();
    for k in (0..poly.len() - 1).rev() {
        let coeff = &poly[k + 1] + &carry;
        carry = &coeff * &r;
        quotient[k] = coeff;
    }
    quotient
}

/// Exact rank of an integer matrix over the rationals, by Gaussian
/// elimination with exact pivots.
pub fn exact_rank(m: &[Vec<BigRational>]) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut m: Vec<Vec<BigRational>> = m.to_vec();
    let mut rank = 0;
    let mut row = 0;
    for col in 0..cols {
        let Some(pivot_row) = (row..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(row, pivot_row);
        let pivot = m[row][col].clone();
        for r in (row + 1)..rows {
            if m[r][col].is_zero() {
                continue;
            }
            let factor = &m[r][col] / &pivot;
            for c in col..cols {
                let sub = &factor * &m[row][c];
                m[r][c] -= sub;
            }
        }
        rank += 1;
        row += 1;
        if row == rows {
            break;
        }
    }
    rank
}

fn int_matrix_to_rational(a: &[Vec<i64>]) -> Vec<Vec<BigRational>> {
    a.iter()
        .map(|row| {
            row.iter()
                .map(|&x| BigRational::from_integer(BigInt::from(x)))
                .collect()
        })
        .collect()
}

fn rational_matmul(
    x: &[Vec<BigRational>],
    y: &[Vec<BigRational>],
) -> Vec<Vec<BigRational>> {
    let n = x.len();
    let mut out = vec![vec![BigRational::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = BigRational::zero();
            for (l, y_row) in y.iter().enumerate() {
                acc += &x[i][l] * &y_row[j];
            }
            out[i][j] = acc;
        }
    }
    out
}

/// Exact spectral facts about an integer matrix.
#[derive(Debug, Clone)]
pub struct ExactSpectrum {
    /// Monic characteristic polynomial, `coeffs[k]` the coefficient of x^k.
    pub char_poly: Vec<BigInt>,
    /// Integer eigenvalues with (algebraic multiplicity, Jordan index).
    pub integer_eigenvalues: Vec<(i64, usize, usize)>,
    /// True when the integer eigenvalues exhaust the whole spectrum.
    pub fully_integer: bool,
}

/// Computes the exact spectrum data of an integer matrix.
pub fn exact_spectrum(a: &DMatrix<f64>) -> Result<ExactSpectrum> {
    let a_int = to_integer_matrix(a)?;
    let q = a_int.len();
    let coeffs = char_poly(&a_int);
    let roots = integer_roots(&coeffs);
    let total: usize = roots.iter().map(|(_, m)| m).sum();

    let mut integer_eigenvalues = Vec::with_capacity(roots.len());
    for (root, mult) in roots {
        // Exact Jordan index: smallest k with nullity((A - rI)^k) = mult.
        let mut shifted = int_matrix_to_rational(&a_int);
        for (i, row) in shifted.iter_mut().enumerate() {
            row[i] -= BigRational::from_integer(BigInt::from(root));
        }
        let mut power = shifted.clone();
        let mut nu = 0;
        for k in 1..=mult {
            let nullity = q - exact_rank(&power);
            if nullity >= mult {
                nu = k - 1;
                break;
            }
            if k == mult {
                return Err(UrnError::Spectral(format!(
                    "exact nullity of ({root})-eigenspace never reaches multiplicity {mult}"
                )));
            }
            power = rational_matmul(&power, &shifted);
        }
        integer_eigenvalues.push((root, mult, nu));
    }

    Ok(ExactSpectrum {
        char_poly: coeffs,
        integer_eigenvalues,
        fully_integer: total == q,
    })
}

/// Result of validating a floating-point spectrum against the exact path.
#[derive(Debug, Clone)]
pub struct ExactValidation {
    /// Worst |p(lambda)| / scale over the computed eigenvalues, where p is
    /// the exact characteristic polynomial.
    pub worst_char_poly_residual: f64,
    /// Integer eigenvalues whose (multiplicity, nu) agree with the float
    /// path / total integer eigenvalues.
    pub matched: usize,
    pub total_integer: usize,
}

impl ExactValidation {
    pub fn all_matched(&self) -> bool {
        self.matched == self.total_integer
    }
}

/// Validates a floating-point spectrum of an integer matrix: every computed
/// eigenvalue must be a root of the exact characteristic polynomial (small
/// scaled residual), and every exact integer eigenvalue must appear with the
/// same multiplicity and Jordan index.
pub fn validate_spectrum(a: &DMatrix<f64>, spectrum: &Spectrum) -> Result<ExactValidation> {
    let exact = exact_spectrum(a)?;
    let q = a.nrows() as i32;
    // Scale for p(lambda): |lambda| and the matrix norm bound the root size;
    // p has degree q, so compare against (1 + ||A||)^q.
    let scale = (1.0 + spectrum.matrix_norm).powi(q);
    let mut worst = 0.0_f64;
    for lambda in &spectrum.ordered_eigenvalues {
        let value = char_poly_value(&exact.char_poly, *lambda);
        worst = worst.max(value.norm() / scale);
    }
    let mut matched = 0;
    for &(root, mult, nu) in &exact.integer_eigenvalues {
        let target = Complex::new(root as f64, 0.0);
        let hit = spectrum.components.iter().any(|c| {
            (c.lambda - target).norm() <= 1e-6 * (1.0 + spectrum.matrix_norm)
                && c.alg_mult == mult
                && c.nu == nu
        });
        if hit {
            matched += 1;
        }
    }
    Ok(ExactValidation {
        worst_char_poly_residual: worst,
        matched,
        total_integer: exact.integer_eigenvalues.len(),
    })
}
