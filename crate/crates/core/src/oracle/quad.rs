//! Adaptive Gauss-Kronrod 15-point quadrature for matrix-valued integrands.
//! The embedded 7-point Gauss rule supplies the error estimate; intervals are
//! bisected until the estimate meets the requested absolute tolerance.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Kronrod abscissae on [-1, 1]; entries at odd indices are the Gauss-7 nodes.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];

const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

pub const MAX_DEPTH: usize = 30;

struct Panel {
    kronrod: DMatrix<f64>,
    error: f64,
}

fn rule<F: Fn(f64) -> DMatrix<f64>>(f: &F, a: f64, b: f64) -> Panel {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let center = f(mid);
    let mut kronrod = WGK[7] * &center;
    let mut gauss = WG[3] * &center;
    for i in 0..7 {
        let x = half * XGK[i];
        let pair = f(mid - x) + f(mid + x);
        kronrod += WGK[i] * &pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * &pair;
        }
    }
    kronrod *= half;
    gauss *= half;
    let error = (&kronrod - &gauss).amax();
    Panel { kronrod, error }
}

/// Integrate a matrix-valued function over [a, b] to absolute tolerance `tol`
/// (entrywise). Returns the value and the accumulated error estimate.
pub fn integrate_matrix<F: Fn(f64) -> DMatrix<f64>>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<(DMatrix<f64>, f64)> {
    fn recurse<F: Fn(f64) -> DMatrix<f64>>(
        f: &F,
        a: f64,
        b: f64,
        tol: f64,
        depth: usize,
    ) -> Result<(DMatrix<f64>, f64)> {
        let panel = rule(f, a, b);
        if panel.error <= tol || panel.error == 0.0 {
            return Ok((panel.kronrod, panel.error));
        }
        if depth >= MAX_DEPTH {
            return Err(Error::QuadratureDidNotConverge {
                estimate: panel.error,
                tol,
            });
        }
        let mid = 0.5 * (a + b);
        let (left, el) = recurse(f, a, mid, 0.5 * tol, depth + 1)?;
        let (right, er) = recurse(f, mid, b, 0.5 * tol, depth + 1)?;
        Ok((left + right, el + er))
    }
    if a == b {
        let probe = f(a);
        return Ok((DMatrix::zeros(probe.nrows(), probe.ncols()), 0.0));
    }
    recurse(f, a, b, tol, 0)
}
