//! Universal regularization levels.

/// `lambda_0(t) = sigma sqrt((2 log(2n) + 2t) / n)`.
pub fn lambda0(sigma: f64, n: usize, t: f64) -> f64 {
    let n = n as f64;
    sigma * ((2.0 * (2.0 * n).ln() + 2.0 * t) / n).sqrt()
}

/// The universal choice `lambda_0(log 2n)`.
pub fn universal_lambda(sigma: f64, n: usize) -> f64 {
    lambda0(sigma, n, (2.0 * n as f64).ln())
}
