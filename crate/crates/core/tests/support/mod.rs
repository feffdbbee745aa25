//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Adaptive Dormand–Prince 5(4) integration of `ẏ = f(t, y)` from `t0` to `t1`.
pub fn dopri5(
    f: &dyn Fn(f64, &DVector<f64>) -> DVector<f64>,
    t0: f64,
    t1: f64,
    y0: &DVector<f64>,
    rtol: f64,
    atol: f64,
) -> DVector<f64> {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut t = t0;
    let mut y = y0.clone();
    let mut h = (t1 - t0) / 100.0;
    let mut guard = 0usize;
    while t < t1 {
        guard += 1;
        assert!(guard < 10_000_000, "dopri5 did not converge");
        if t + h > t1 {
            h = t1 - t;
        }
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        for s in 0..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                ys += kj * (h * A[s][j]);
            }
            k.push(f(t + C[s] * h, &ys));
        }
        let mut y5 = y.clone();
        let mut y4 = y.clone();
        for s in 0..7 {
            y5 += &k[s] * (h * B5[s]);
            y4 += &k[s] * (h * B4[s]);
        }
        let err = (&y5 - &y4)
            .iter()
            .zip(y.iter().zip(y5.iter()))
            .map(|(e, (a, b))| (e / (atol + rtol * a.abs().max(b.abs()))).powi(2))
            .sum::<f64>()
            / y.len() as f64;
        let err = err.sqrt();
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
    }
    y
}

/// Pack a symmetric matrix and a vector into one state.
pub fn pack(q: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let d = b.len();
    DVector::from_iterator(d * d + d, q.iter().copied().chain(b.iter().copied()))
}

pub fn unpack(y: &DVector<f64>, d: usize) -> (DMatrix<f64>, DVector<f64>) {
    let q = DMatrix::from_column_slice(d, d, &y.as_slice()[..d * d]);
    let b = DVector::from_column_slice(&y.as_slice()[d * d..]);
    (q, b)
}

/// Right-hand side of the dense tilt ODE: OU `Q̇ = 2(I+Q)Q, ḃ = (I+2Q)b`,
/// heat `Q̇ = 2Q², ḃ = 2Qb`.
pub fn tilt_rhs(ou: bool, d: usize) -> impl Fn(f64, &DVector<f64>) -> DVector<f64> {
    move |_t, y| {
        let (q, b) = unpack(y, d);
        let eye = DMatrix::<f64>::identity(d, d);
        let (dq, db) = if ou {
            ((&eye + &q) * &q * 2.0, (&eye + &q * 2.0) * &b)
        } else {
            (&q * &q * 2.0, &q * &b * 2.0)
        };
        pack(&dq, &db)
    }
}

/// Posterior of `N(m, s I)` under the tilt `exp(−½xᵀQx + xᵀb)`: `(mean, cov)`.
pub fn gaussian_posterior(m: &DVector<f64>, s: f64, q: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let d = m.len();
    let prec = DMatrix::<f64>::identity(d, d) / s + q;
    let cov = prec.clone().try_inverse().expect("positive definite precision");
    let mean = &cov * (m / s + b);
    (mean, cov)
}

/// `½(A + Aᵀ)`.
pub fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}
