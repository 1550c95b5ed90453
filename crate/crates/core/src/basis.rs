//! One-dimensional building blocks: Gauss–Legendre rules, cubic Hermite and
//! linear Lagrange shape functions.

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration on P_n from the Chebyshev-like initial guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss rule mapped to `[0, 1]`.
pub fn gauss_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|v| 0.5 * (v + 1.0)).collect(),
        w.iter().map(|v| 0.5 * v).collect(),
    )
}

/// Cubic Hermite basis on an interval of length `h`, evaluated at the unit
/// coordinate `s` in `[0, 1]`. Ordering: value at 0, derivative at 0, value
/// at 1, derivative at 1. Derivative DOFs are physical (`d/dx`), and the
/// returned first and second derivatives are with respect to `x = h s`.
#[derive(Debug, Clone, Copy)]
pub struct Hermite {
    pub value: [f64; 4],
    pub d1: [f64; 4],
    pub d2: [f64; 4],
}

impl Hermite {
    pub fn eval(s: f64, h: f64) -> Self {
        let s2 = s * s;
        let s3 = s2 * s;
        let value = [
            1.0 - 3.0 * s2 + 2.0 * s3,
            h * (s - 2.0 * s2 + s3),
            3.0 * s2 - 2.0 * s3,
            h * (s3 - s2),
        ];
        let d1 = [
            (-6.0 * s + 6.0 * s2) / h,
            1.0 - 4.0 * s + 3.0 * s2,
            (6.0 * s - 6.0 * s2) / h,
            3.0 * s2 - 2.0 * s,
        ];
        let d2 = [
            (-6.0 + 12.0 * s) / (h * h),
            (-4.0 + 6.0 * s) / h,
            (6.0 - 12.0 * s) / (h * h),
            (6.0 * s - 2.0) / h,
        ];
        Hermite { value, d1, d2 }
    }
}

/// Exact integral over an interval of length `h` of the Hermite interpolant
/// with end values `v0, v1` and end slopes `d0, d1`.
pub fn hermite_integral(h: f64, v0: f64, d0: f64, v1: f64, d1: f64) -> f64 {
    h * (v0 + v1) / 2.0 + h * h * (d0 - d1) / 12.0
}

/// Linear Lagrange basis on `[-1, 1]`: `(1 - xi)/2, (1 + xi)/2`.
pub fn linear(xi: f64) -> [f64; 2] {
    [0.5 * (1.0 - xi), 0.5 * (1.0 + xi)]
}
