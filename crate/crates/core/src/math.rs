//! Scalar math and small-vector helpers.
//!
//! Transcendentals route through `libm` unconditionally so that std and
//! no_std builds produce bit-identical results. `sqrt` and `fma` switch
//! to the std intrinsics when available because those are IEEE-exact
//! and therefore agree with the libm fallbacks to the last bit.

#[inline]
pub fn sqrt(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.sqrt()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::sqrt(x)
    }
}

/// Fused multiply-add: `a * b + c` with a single rounding.
#[inline]
pub fn fma(a: f64, b: f64, c: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        a.mul_add(b, c)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::fma(a, b, c)
    }
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.floor()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::floor(x)
    }
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

/// Dot product with four fixed-order partial sums. The lane structure
/// lets LLVM vectorize the loop without reassociating floating-point
/// addition, so results stay deterministic.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        lanes[0] = fma(a[j], b[j], lanes[0]);
        lanes[1] = fma(a[j + 1], b[j + 1], lanes[1]);
        lanes[2] = fma(a[j + 2], b[j + 2], lanes[2]);
        lanes[3] = fma(a[j + 3], b[j + 3], lanes[3]);
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail = fma(a[j], b[j], tail);
    }
    (lanes[0] + lanes[2]) + (lanes[1] + lanes[3]) + tail
}

/// `y += alpha * x`, the usual axpy kernel.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = fma(alpha, *xi, *yi);
    }
}

pub type Vec3 = [f64; 3];

#[inline]
pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale3(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn norm3(a: Vec3) -> f64 {
    sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
}

#[inline]
pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Euclidean distance in the table plane (x, y only).
#[inline]
pub fn planar_dist(a: Vec3, b: Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    sqrt(dx * dx + dy * dy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..23).map(|i| 0.1 * i as f64 - 1.0).collect();
        let b: Vec<f64> = (0..23).map(|i| 0.3 - 0.05 * i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn planar_distance_ignores_height() {
        let d = planar_dist([0.43, 0.02, 0.9], [0.40, 0.0, 0.0]);
        assert!((d - 0.036055512754639892).abs() < 1e-15);
        assert!(d < 0.05);
    }
}
