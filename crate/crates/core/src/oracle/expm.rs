//! Dense matrix exponential by Pade approximation with scaling and squaring.
//! Deliberately a separate code path from the sparse truncated-Taylor action
//! so the two can cross-validate each other.

use nalgebra::DMatrix;

// Approximation radii for the [m/m] Pade approximant at double precision.
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

/// Pade numerator coefficients normalized to b_0 = 1:
/// b_{j+1} = b_j (m - j) / ((2m - j)(j + 1)).
fn pade_coefficients(m: usize) -> Vec<f64> {
    let mut b = vec![1.0_f64];
    for j in 0..m {
        let prev = b[j];
        b.push(prev * (m - j) as f64 / (((2 * m - j) * (j + 1)) as f64));
    }
    b
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Evaluate the [m/m] Pade approximant of exp at `a` for m in {3,5,7,9,13}.
fn pade(a: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let b = pade_coefficients(m);
    let identity = DMatrix::identity(n, n);
    let a2 = a * a;

    let (u, v) = if m == 13 {
        let a4 = &a2 * &a2;
        let a6 = &a2 * &a4;
        let u_inner = &a6 * (b[13] * &a6 + b[11] * &a4 + b[9] * &a2)
            + b[7] * &a6
            + b[5] * &a4
            + b[3] * &a2
            + b[1] * &identity;
        let u = a * u_inner;
        let v = &a6 * (b[12] * &a6 + b[10] * &a4 + b[8] * &a2)
            + b[6] * &a6
            + b[4] * &a4
            + b[2] * &a2
            + b[0] * &identity;
        (u, v)
    } else {
        // powers a^0, a^2, a^4, ...
        let mut even_powers = vec![identity.clone()];
        while even_powers.len() <= m / 2 {
            even_powers.push(even_powers.last().unwrap() * &a2);
        }
        let mut u_inner = DMatrix::zeros(n, n);
        let mut v = DMatrix::zeros(n, n);
        for j in 0..=m {
            if j % 2 == 1 {
                u_inner += b[j] * &even_powers[(j - 1) / 2];
            } else {
                v += b[j] * &even_powers[j / 2];
            }
        }
        (a * u_inner, v)
    };

    let denom = &v - &u;
    let numer = &v + &u;
    denom
        .lu()
        .solve(&numer)
        .expect("Pade denominator is singular")
}

/// exp(A) for a square matrix.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eta = one_norm(a);
    if eta <= THETA_3 {
        return pade(a, 3);
    }
    if eta <= THETA_5 {
        return pade(a, 5);
    }
    if eta <= THETA_7 {
        return pade(a, 7);
    }
    if eta <= THETA_9 {
        return pade(a, 9);
    }
    let s = ((eta / THETA_13).log2().ceil()).max(0.0) as u32;
    let scaled = a / 2f64.powi(s as i32);
    let mut r = pade(&scaled, 13);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}
