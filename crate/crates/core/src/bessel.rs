//! Bessel functions of the first kind of integer order.
//!
//! All orders `0..=n` at one argument are produced together by Miller's
//! backward recurrence, normalised with `J₀² + 2 Σ J_k² = 1`.

/// `J_0(z), …, J_max_order(z)` for `z ≥ 0`.
pub fn bessel_j_sequence(max_order: usize, z: f64) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    fill_bessel_j(z, &mut out);
    out
}

/// Fill `out[k] = J_k(z)` for `k < out.len()`, `z ≥ 0`.
pub fn fill_bessel_j(z: f64, out: &mut [f64]) {
    assert!(z >= 0.0 && z.is_finite(), "bessel argument must be finite and >= 0");
    if out.is_empty() {
        return;
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    if z == 0.0 {
        out[0] = 1.0;
        return;
    }
    let top = (out.len() - 1).max(z.ceil() as usize) as f64;
    let mut start = (top + 30.0 + 12.0 * top.cbrt()).ceil() as usize;
    start += start % 2;

    const BIG: f64 = 1e120;
    let two_over_z = 2.0 / z;
    let mut above = 0.0; // J_{k+1}
    let mut cur = 1.0; // J_k
    let mut sum_sq = 0.0;
    let mut sum_even = 0.0;
    for k in (0..=start).rev() {
        if k < out.len() {
            out[k] = cur;
        }
        let weight = if k == 0 { 1.0 } else { 2.0 };
        sum_sq += weight * cur * cur;
        if k % 2 == 0 {
            sum_even += weight * cur;
        }
        if k == 0 {
            break;
        }
        let below = k as f64 * two_over_z * cur - above;
        above = cur;
        cur = below;
        if cur.abs() > BIG {
            let s = 1.0 / BIG;
            cur *= s;
            above *= s;
            sum_sq *= s * s;
            sum_even *= s;
            let from = k.min(out.len());
            out[from..].iter_mut().for_each(|v| *v *= s);
        }
    }
    let norm = sum_sq.sqrt().copysign(sum_even);
    out.iter_mut().for_each(|v| *v /= norm);
}

/// `J_n(z)` for any integer order and `z ≥ 0`.
pub fn bessel_j(n: i64, z: f64) -> f64 {
    let k = n.unsigned_abs() as usize;
    let v = bessel_j_sequence(k, z)[k];
    if n < 0 && k % 2 == 1 {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Trapezoidal rule on the integral representation
    /// `J_n(z) = (1/2π) ∫ cos(nτ − z sin τ) dτ` over a full period.
    fn integral_oracle(n: i64, z: f64) -> f64 {
        let m = 4 * (z.ceil() as usize + n.unsigned_abs() as usize) + 256;
        let h = 2.0 * PI / m as f64;
        (0..m)
            .map(|j| {
                let t = j as f64 * h;
                (n as f64 * t - z * t.sin()).cos()
            })
            .sum::<f64>()
            / m as f64
    }

    #[test]
    fn reference_values() {
        let cases = [
            (0, 1.0, 0.765_197_686_557_966_6),
            (1, 1.0, 0.440_050_585_744_933_5),
            (5, 10.0, -0.234_061_528_186_793_6),
            (0, 100.0, 0.019_985_850_304_223_122),
        ];
        for (n, z, want) in cases {
            let got = bessel_j(n, z);
            assert!((got - want).abs() < 1e-14, "J_{n}({z}) = {got}, want {want}");
        }
    }

    #[test]
    fn agrees_with_integral_representation() {
        for &z in &[1e-3, 0.5, 3.7, 12.0, 36.0, 61.3, 140.0] {
            let seq = bessel_j_sequence(48, z);
            for n in 0..=48 {
                let want = integral_oracle(n as i64, z);
                assert!(
                    (seq[n] - want).abs() < 1e-13,
                    "J_{n}({z}): {} vs {want}",
                    seq[n]
                );
            }
        }
    }

    #[test]
    fn negative_orders_and_zero() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(3, 0.0), 0.0);
        assert!((bessel_j(-3, 2.0) + bessel_j(3, 2.0)).abs() < 1e-16);
        assert!((bessel_j(-4, 2.0) - bessel_j(4, 2.0)).abs() < 1e-16);
    }

    #[test]
    fn tiny_values_do_not_underflow_badly() {
        let seq = bessel_j_sequence(60, 0.1);
        assert!(seq[60] >= 0.0 && seq[60] < 1e-100);
        assert!((seq[0] - integral_oracle(0, 0.1)).abs() < 1e-15);
    }
}
