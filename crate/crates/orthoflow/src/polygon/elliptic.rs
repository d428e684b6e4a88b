//! Complete elliptic integrals via the arithmetic-geometric mean.

use std::f64::consts::PI;

const MAX_ITER: usize = 60;
const EPSILON: f64 = 1e-15;

/// Arithmetic-geometric mean of two nonnegative reals.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..MAX_ITER {
        if (a - b).abs() <= EPSILON * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    0.5 * (a + b)
}

/// K(k) given the complementary modulus k' = sqrt(1 - k^2).
///
/// Passing k' directly avoids the cancellation in 1 - k^2 when k is near 1.
pub fn k_from_complement(kp: f64) -> f64 {
    PI / (2.0 * agm(1.0, kp))
}

/// Complete elliptic integral of the first kind, K(k), by modulus.
pub fn ellip_k(k: f64) -> f64 {
    k_from_complement(((1.0 - k) * (1.0 + k)).sqrt())
}

/// Ratio K(k')/K(k) where k^2 = s and k'^2 = sc; the caller supplies both
/// so that neither is formed by subtraction.
pub fn modulus_ratio(s: f64, sc: f64) -> f64 {
    agm(1.0, sc.sqrt()) / agm(1.0, s.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_at_zero_is_half_pi() {
        assert!((ellip_k(0.0) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn k_lemniscatic_value() {
        // K(1/sqrt 2) = Gamma(1/4)^2 / (4 sqrt(pi))
        let g = 3.625_609_908_221_908_3_f64;
        let expected = g * g / (4.0 * PI.sqrt());
        assert!((ellip_k(0.5f64.sqrt()) - expected).abs() < 1e-14);
    }

    #[test]
    fn ratio_is_one_at_half() {
        assert!((modulus_ratio(0.5, 0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn landen_doubling() {
        // K(2 sqrt k / (1 + k)) = (1 + k) K(k)
        for &k in &[0.1, 0.3, 0.7, 0.95] {
            let lhs = ellip_k(2.0 * f64::sqrt(k) / (1.0 + k));
            assert!((lhs - (1.0 + k) * ellip_k(k)).abs() < 1e-13 * lhs);
        }
    }
}
