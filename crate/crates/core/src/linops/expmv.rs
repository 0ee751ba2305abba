//! Action of the matrix exponential, y = exp(t A) b, by scaling with a
//! truncated Taylor polynomial.
//!
//! The number of scaling substeps s and the polynomial degree m are chosen
//! from a table of radii theta_m such that the backward error of the degree-m
//! Taylor polynomial is below unit roundoff whenever the (shifted) operator
//! norm per substep stays below theta_m. The table is derived at first use
//! from the majorant series of log(e^{-x} T_m(x)); this is slightly
//! conservative compared with the published values but needs no stored
//! constants. Within each substep the series is cut off early once two
//! consecutive terms are negligible relative to the accumulated sum, which
//! gives per-substep control at the requested tolerance.

use std::sync::OnceLock;

use super::sparse::SparseMat;
use crate::error::{Error, Result};

pub const DEGREE_CAP: usize = 55;
pub const SUBSTEP_CAP: usize = 10_000;

/// Matrix-free handle: everything `expmv` needs from an operator.
pub trait LinOp {
    fn dim(&self) -> usize;
    /// y = A x
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Exact value or upper bound of the matrix 1-norm.
    fn one_norm(&self) -> f64;
    fn trace(&self) -> f64;
}

impl LinOp for SparseMat {
    fn dim(&self) -> usize {
        self.n_rows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y);
    }
    fn one_norm(&self) -> f64 {
        SparseMat::one_norm(self)
    }
    fn trace(&self) -> f64 {
        SparseMat::trace(self)
    }
}

/// Largest radius theta such that the degree-m truncated Taylor polynomial of
/// exp has backward error <= tol for arguments of norm <= theta.
///
/// Uses the majorant g(theta) = sum_{n>m} C(n-1,m)/n! theta^n of the series of
/// e^{-x} T_m(x) - 1 and bounds the log series by -log(1 - g).
fn theta_for_degree(m: usize, tol: f64) -> f64 {
    let admissible = |theta: f64| -> bool {
        if theta <= 0.0 {
            return true;
        }
        let log_theta = theta.ln();
        // running logs of C(n-1, m) and n!
        let mut log_binom = 0.0_f64;
        let mut log_fact: f64 = (2..=(m as u64 + 1)).map(|i| (i as f64).ln()).sum();
        let mut g = 0.0_f64;
        let mut n = m + 1;
        loop {
            let term = (log_binom - log_fact + n as f64 * log_theta).exp();
            g += term;
            if g >= 1.0 {
                return false;
            }
            if n > m + 8 && term < g * 1e-18 {
                break;
            }
            if n > m + 600 {
                break;
            }
            // advance n -> n+1: C(n,m) = C(n-1,m) * n/(n-m), (n+1)!
            log_binom += (n as f64).ln() - ((n - m) as f64).ln();
            log_fact += ((n + 1) as f64).ln();
            n += 1;
        }
        // ln_1p keeps -log(1 - g) accurate for g far below unit roundoff
        -(-g).ln_1p() <= tol * theta
    };
    let (mut lo, mut hi) = (0.0_f64, 100.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if admissible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn theta_table() -> &'static [f64; DEGREE_CAP] {
    static TABLE: OnceLock<[f64; DEGREE_CAP]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; DEGREE_CAP];
        for (i, slot) in t.iter_mut().enumerate() {
            *slot = theta_for_degree(i + 1, f64::EPSILON / 2.0);
        }
        t
    })
}

/// Pick (degree m, substeps s) minimizing the matvec count m*s subject to
/// s * theta_m >= norm_t.
fn select_degree_and_substeps(norm_t: f64) -> Result<(usize, usize)> {
    let table = theta_table();
    let mut best: Option<(usize, usize, usize)> = None; // (cost, m, s)
    for (i, &theta) in table.iter().enumerate() {
        let m = i + 1;
        let s = if norm_t == 0.0 {
            1
        } else {
            (norm_t / theta).ceil() as usize
        }
        .max(1);
        let cost = m * s;
        let better = match best {
            None => true,
            Some((c, _, bs)) => cost < c || (cost == c && s < bs),
        };
        if better {
            best = Some((cost, m, s));
        }
    }
    let (_, m, s) = best.unwrap();
    if s > SUBSTEP_CAP {
        return Err(Error::ExpmvDidNotConverge {
            estimate: s as f64,
            tol: SUBSTEP_CAP as f64,
        });
    }
    Ok((m, s))
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// y = exp(t A) b for t >= 0.
///
/// The operator is shifted by its mean eigenvalue mu = trace/n; the factor
/// e^{mu t/s} is reapplied once per substep so intermediates stay bounded for
/// strongly dissipative operators.
pub fn expmv(t: f64, op: &dyn LinOp, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if !(t >= 0.0) {
        return Err(Error::Config(format!("expmv requires t >= 0, got {t}")));
    }
    if n == 0 || t == 0.0 {
        return Ok(b.to_vec());
    }

    let mu = op.trace() / n as f64;
    // upper bound for the 1-norm of the shifted operator A - mu I
    let shifted_norm = op.one_norm() + mu.abs();
    let (m, s) = select_degree_and_substeps(t * shifted_norm)?;

    let eta = (mu * t / s as f64).exp();
    let mut b_vec = b.to_vec();
    let mut f = b_vec.clone();
    let mut tmp = vec![0.0; n];
    for _ in 0..s {
        let mut c1 = inf_norm(&b_vec);
        for j in 1..=m {
            let factor = t / (s as f64 * j as f64);
            op.apply(&b_vec, &mut tmp);
            for k in 0..n {
                b_vec[k] = factor * (tmp[k] - mu * b_vec[k]);
            }
            for k in 0..n {
                f[k] += b_vec[k];
            }
            let c2 = inf_norm(&b_vec);
            if c1 + c2 <= tol * inf_norm(&f) {
                break;
            }
            c1 = c2;
        }
        for k in 0..n {
            f[k] *= eta;
        }
        b_vec.copy_from_slice(&f);
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Dense reference: exp(M) b by scaling and a Taylor series summed to
    /// machine precision. Independent of the production path.
    fn dense_exp_apply(m: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
        let n = m.nrows();
        let norm = m.amax() * n as f64;
        let k = norm.log2().ceil().max(0.0) as i32 + 1;
        let scaled = m / 2f64.powi(k);
        let mut acc = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for j in 1..300 {
            term = (&term * &scaled) / j as f64;
            acc += &term;
            if term.amax() < 1e-20 {
                break;
            }
        }
        for _ in 0..k {
            acc = &acc * &acc;
        }
        let bv = nalgebra::DVector::from_column_slice(b);
        (acc * bv).iter().copied().collect()
    }

    fn sparse_from_dense(m: &DMatrix<f64>) -> SparseMat {
        let mut trip = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    trip.push((i, j, m[(i, j)]));
                }
            }
        }
        SparseMat::from_triplets(m.nrows(), m.ncols(), &trip).unwrap()
    }

    fn random_stable_matrix(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> DMatrix<f64> {
        // Q \Lambda Q^T with spectrum in [-spread, 0] plus a mild skew part.
        let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = raw.qr().q();
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
            -rng.gen_range(0.0..spread)
        }));
        let sym = &q * lambda * q.transpose();
        let skew_raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.05..0.05));
        let skew = &skew_raw - skew_raw.transpose();
        sym + skew
    }

    #[test]
    fn theta_table_is_monotone_and_sane() {
        let t = theta_table();
        for i in 1..t.len() {
            assert!(t[i] > t[i - 1], "theta must grow with the degree");
        }
        // degree-1 radius is at unit-roundoff scale, large-degree radius is O(10)
        assert!(t[0] < 1e-12);
        assert!(t[54] > 5.0 && t[54] < 20.0);
    }

    #[test]
    fn t_zero_is_identity() {
        let a = SparseMat::identity(3).scaled(-4.0);
        let b = vec![1.0, -2.0, 7.0];
        assert_eq!(expmv(0.0, &a, &b, 1e-10).unwrap(), b);
    }

    #[test]
    fn diagonal_case() {
        let a = SparseMat::from_triplets(2, 2, &[(0, 0, -1.0), (1, 1, -2.0)]).unwrap();
        let y = expmv(1.0, &a, &[1.0, 1.0], 1e-12).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-12);
        assert!((y[1] - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn random_operator_matches_dense_series_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
        let tol = 1e-10;
        for _ in 0..5 {
            let m = random_stable_matrix(&mut rng, 6, 5.0);
            let a = sparse_from_dense(&m);
            let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = expmv(0.7, &a, &b, tol).unwrap();
            let reference = dense_exp_apply(&(0.7 * &m), &b);
            let err: f64 = y
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let scale: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(err <= 10.0 * tol * scale, "err {err:.3e}");
        }
    }

    #[test]
    fn large_norm_dissipative_operator() {
        // strongly stiff diagonal block, checks the shift + substepping path
        let n = 20;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, -(500.0 + 40.0 * i as f64)));
            if i + 1 < n {
                trip.push((i, i + 1, 30.0));
                trip.push((i + 1, i, 30.0));
            }
        }
        let a = SparseMat::from_triplets(n, n, &trip).unwrap();
        let b = vec![1.0; n];
        let y = expmv(0.5, &a, &b, 1e-10).unwrap();
        let reference = dense_exp_apply(&a.to_dense().scale(0.5), &b);
        for (u, v) in y.iter().zip(&reference) {
            assert!((u - v).abs() < 1e-11, "{u} vs {v}");
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]

        #[test]
        fn semigroup_property(seed in 0u64..1000, s in 0.05f64..1.0, t in 0.05f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_stable_matrix(&mut rng, 5, 3.0);
            let a = sparse_from_dense(&m);
            let b: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let tol = 1e-10;
            let one_shot = expmv(s + t, &a, &b, tol).unwrap();
            let two_step = expmv(s, &a, &expmv(t, &a, &b, tol).unwrap(), tol).unwrap();
            let diff: f64 = one_shot.iter().zip(&two_step).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let scale: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            proptest::prop_assert!(diff <= 10.0 * tol * scale.max(1.0));
        }

        #[test]
        fn contraction_for_negative_semidefinite(seed in 0u64..1000, t in 0.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
            let q = raw.qr().q();
            let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(5, |_, _| -rng.gen_range(0.0..8.0)));
            let sym = &q * lambda * q.transpose();
            let a = sparse_from_dense(&sym);
            let b: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let tol = 1e-10;
            let y = expmv(t, &a, &b, tol).unwrap();
            let ny: f64 = y.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            proptest::prop_assert!(ny <= (1.0 + 10.0 * tol) * nb);
        }

        #[test]
        fn linearity(seed in 0u64..1000, alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_stable_matrix(&mut rng, 4, 4.0);
            let a = sparse_from_dense(&m);
            let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let tol = 1e-10;
            let combo: Vec<f64> = b.iter().zip(&c).map(|(x, y)| alpha * x + beta * y).collect();
            let lhs = expmv(0.6, &a, &combo, tol).unwrap();
            let yb = expmv(0.6, &a, &b, tol).unwrap();
            let yc = expmv(0.6, &a, &c, tol).unwrap();
            let diff: f64 = lhs.iter().zip(yb.iter().zip(&yc))
                .map(|(l, (x, y))| (l - (alpha * x + beta * y)).abs())
                .fold(0.0, f64::max);
            proptest::prop_assert!(diff <= 10.0 * tol * (alpha.abs() + beta.abs() + 1.0));
        }
    }
}
