//! Dense complex linear algebra helpers: matrix exponential, norms,
//! orthonormalization, and a split-real matrix product for larger
//! dimensions.

use ndarray::{Array1, Array2, Zip};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CVec = Array1<C64>;
pub type CMat = Array2<C64>;

pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const MINUS_I: C64 = C64::new(0.0, -1.0);

/// `e^{i phi}`, exact for multiples of `pi/2` so that analytic-mode phases
/// stay free of rounding dust.
pub fn unit_phase(phi: f64) -> C64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let reduced = phi.rem_euclid(2.0 * PI);
    if reduced == 0.0 {
        ONE
    } else if reduced == FRAC_PI_2 {
        C64::new(0.0, 1.0)
    } else if reduced == PI {
        C64::new(-1.0, 0.0)
    } else if reduced == 3.0 * FRAC_PI_2 {
        MINUS_I
    } else {
        C64::from_polar(1.0, phi)
    }
}

/// Identity matrix.
pub fn eye(n: usize) -> CMat {
    Array2::from_diag_elem(n, ONE)
}

/// Max-abs-entry norm.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Max-abs-entry norm of the difference.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    Zip::from(a).and(b).fold(0.0, |m, x, y| m.max((x - y).norm()))
}

/// Frobenius norm.
pub fn fro_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// 1-norm (max column sum of absolute values), used for expm scaling.
fn one_norm(a: &CMat) -> f64 {
    let mut max = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|z| z.norm()).sum();
        max = max.max(s);
    }
    max
}

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

/// `<a|b>` with conjugation on the left argument.
pub fn inner(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Euclidean norm of a state vector.
pub fn vec_norm(a: &CVec) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Normalize a state vector in place; errors on (near-)zero input.
pub fn normalized(a: &CVec) -> crate::Result<CVec> {
    let n = vec_norm(a);
    if n < 1e-14 {
        return Err(crate::Error::InvalidInput("cannot normalize zero vector".into()));
    }
    Ok(a.mapv(|z| z / n))
}

/// Deviation from unitarity, `max|U^dag U - I|`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let p = matmul(&dagger(u), u);
    let n = p.nrows();
    let mut m = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            m = m.max((p[[i, j]] - target).norm());
        }
    }
    m
}

/// Dimension above which complex products are split into four real
/// products (which hit the optimized f64 kernel) instead of the generic
/// complex path.
const SPLIT_MATMUL_DIM: usize = 48;

/// Complex matrix product; splits into real products for larger matrices.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    let n = a.nrows().max(b.ncols()).max(a.ncols());
    if n < SPLIT_MATMUL_DIM {
        return a.dot(b);
    }
    let ar = a.mapv(|z| z.re);
    let ai = a.mapv(|z| z.im);
    let br = b.mapv(|z| z.re);
    let bi = b.mapv(|z| z.im);
    let re = ar.dot(&br) - ai.dot(&bi);
    let im = ar.dot(&bi) + ai.dot(&br);
    let mut out = CMat::zeros((a.nrows(), b.ncols()));
    Zip::from(&mut out).and(&re).and(&im).for_each(|o, &r, &i| {
        *o = C64::new(r, i);
    });
    out
}

/// Apply a matrix to a vector.
pub fn matvec(a: &CMat, x: &CVec) -> CVec {
    a.dot(x)
}

// Pade coefficients for orders 3, 5, 7, 9, 13 (Higham 2005).
const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0, 8_648_640.0, 1_995_840.0, 277_200.0, 25_200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

const THETA3: f64 = 1.495_585_217_958_292e-2;
const THETA5: f64 = 2.539_398_330_063_23e-1;
const THETA7: f64 = 9.504_178_996_162_932e-1;
const THETA9: f64 = 2.097_847_961_257_068;
const THETA13: f64 = 5.371_920_351_148_152;

/// Matrix exponential via scaling-and-squaring with Pade approximation,
/// order selected from the 1-norm (Higham 2005).
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return CMat::zeros((0, 0));
    }
    if n == 1 {
        let mut out = CMat::zeros((1, 1));
        out[[0, 0]] = a[[0, 0]].exp();
        return out;
    }
    let norm = one_norm(a);
    if norm <= THETA3 {
        return pade_low(a, &B3);
    }
    if norm <= THETA5 {
        return pade_low(a, &B5);
    }
    if norm <= THETA7 {
        return pade_low(a, &B7);
    }
    if norm <= THETA9 {
        return pade_low(a, &B9);
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.mapv(|z| z / (1u64 << s) as f64);
    let mut out = pade13(&scaled);
    for _ in 0..s {
        out = matmul(&out, &out);
    }
    out
}

/// Evaluate a Pade approximant of order <= 9 (even/odd split form).
fn pade_low(a: &CMat, b: &[f64]) -> CMat {
    let n = a.nrows();
    let id = eye(n);
    let a2 = matmul(a, a);
    // even = sum b[2k] A^{2k}; odd_core = sum b[2k+1] A^{2k}; odd = A * odd_core
    let mut even = &id * b[0];
    let mut odd_core = &id * b[1];
    let mut pow = id.clone();
    let mut k = 2;
    while k < b.len() {
        pow = matmul(&pow, &a2);
        even = even + &pow * b[k];
        if k + 1 < b.len() {
            odd_core = odd_core + &pow * b[k + 1];
        }
        k += 2;
    }
    let odd = matmul(a, &odd_core);
    let num = &even + &odd;
    let den = &even - &odd;
    solve(den, num)
}

/// Pade(13) with the factored evaluation scheme.
fn pade13(a: &CMat) -> CMat {
    let n = a.nrows();
    let id = eye(n);
    let a2 = matmul(a, a);
    let a4 = matmul(&a2, &a2);
    let a6 = matmul(&a2, &a4);
    let w1 = &a6 * B13[13] + &a4 * B13[11] + &a2 * B13[9];
    let w2 = matmul(&w1, &a6) + &a6 * B13[7] + &a4 * B13[5] + &a2 * B13[3] + &id * B13[1];
    let u = matmul(a, &w2);
    let v1 = &a6 * B13[12] + &a4 * B13[10] + &a2 * B13[8];
    let v = matmul(&v1, &a6) + &a6 * B13[6] + &a4 * B13[4] + &a2 * B13[2] + &id * B13[0];
    let num = &v + &u;
    let den = &v - &u;
    solve(den, num)
}

/// Solve `A X = B` by Gaussian elimination with partial pivoting.
pub fn solve(a: CMat, b: CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.nrows());
    let m = b.ncols();
    let mut lu = a;
    let mut x = b;
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = lu[[col, col]].norm();
        for row in (col + 1)..n {
            let mag = lu[[row, col]].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        assert!(pivot_mag > 0.0, "singular matrix in solve");
        if pivot_row != col {
            perm.swap(pivot_row, col);
            for j in 0..n {
                let tmp = lu[[col, j]];
                lu[[col, j]] = lu[[pivot_row, j]];
                lu[[pivot_row, j]] = tmp;
            }
            for j in 0..m {
                let tmp = x[[col, j]];
                x[[col, j]] = x[[pivot_row, j]];
                x[[pivot_row, j]] = tmp;
            }
        }
        let pivot = lu[[col, col]];
        for row in (col + 1)..n {
            let factor = lu[[row, col]] / pivot;
            if factor == ZERO {
                continue;
            }
            lu[[row, col]] = ZERO;
            for j in (col + 1)..n {
                let v = lu[[col, j]];
                lu[[row, j]] -= factor * v;
            }
            for j in 0..m {
                let v = x[[col, j]];
                x[[row, j]] -= factor * v;
            }
        }
    }
    for col in (0..n).rev() {
        let pivot = lu[[col, col]];
        for j in 0..m {
            let mut sum = x[[col, j]];
            for k in (col + 1)..n {
                sum -= lu[[col, k]] * x[[k, j]];
            }
            x[[col, j]] = sum / pivot;
        }
    }
    x
}

/// Project a near-unitary matrix onto its unitary polar factor by Newton
/// iteration `X <- (X + X^{-dag}) / 2`. Converges quadratically; intended
/// for propagators whose defect is pure rounding accumulation.
pub fn unitarize(u: &CMat) -> CMat {
    let mut x = u.clone();
    for _ in 0..3 {
        let defect = unitarity_defect(&x);
        if defect < 1e-15 {
            break;
        }
        let inv_dag = dagger(&solve(x.clone(), eye(x.nrows())));
        x = (&x + &inv_dag) * 0.5;
    }
    x
}

/// Gram-Schmidt orthonormalization of the given vectors; errors if they are
/// linearly dependent beyond tolerance.
pub fn gram_schmidt(vectors: &[CVec]) -> crate::Result<Vec<CVec>> {
    let mut out: Vec<CVec> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for u in &out {
            let c = inner(u, &w);
            w = &w - &u.mapv(|z| z * c);
        }
        let n = vec_norm(&w);
        if n < 1e-10 {
            return Err(crate::Error::InvalidInput(
                "vectors are linearly dependent".into(),
            ));
        }
        out.push(w.mapv(|z| z / n));
    }
    Ok(out)
}
