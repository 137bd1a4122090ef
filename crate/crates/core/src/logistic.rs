//! Numerically stable logistic helpers.

/// σ(x) = 1 / (1 + e^{-x}), branching on the sign of `x` so neither branch overflows.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// σ'(x) = σ(x)·σ(−x) = e^x / (1 + e^x)^2.
#[inline]
pub fn sigmoid_prime(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// log(1 + e^x).
#[inline]
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_identity_on_grid() {
        for k in 0..=8000 {
            let x = -40.0 + k as f64 * 0.01;
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() <= 1e-15, "x = {x}");
            assert!(sigmoid(x) > 0.0);
            // Above ~36.7 the upper tail rounds to exactly 1.
            if x.abs() < 36.0 {
                assert!(sigmoid(x) < 1.0);
            }
        }
    }

    #[test]
    fn derivative_matches_product_form() {
        for &x in &[-30.0, -3.0, -0.5, 0.0, 0.7, 4.0, 30.0] {
            let direct = sigmoid(x) * sigmoid(-x);
            assert!((sigmoid_prime(x) - direct).abs() <= 1e-16 + 1e-14 * direct);
        }
        assert_eq!(sigmoid_prime(0.0), 0.25);
        assert!((sigmoid_prime(3f64.ln()) - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn log1p_exp_is_stable() {
        assert!((log1p_exp(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((log1p_exp(800.0) - 800.0).abs() < 1e-12);
        assert!(log1p_exp(-800.0) >= 0.0 && log1p_exp(-800.0) < 1e-300);
        for &x in &[-5.0, -1.0, 0.3, 2.0, 10.0] {
            let naive = (1.0 + f64::exp(x)).ln();
            assert!((log1p_exp(x) - naive).abs() < 1e-13);
        }
    }
}
