//! Small dense kernels shared by the quantizers and the index.

// The kernels below are written once as `#[inline(always)]` bodies and
// instantiated twice: a baseline build and an AVX2 build selected at runtime.
// FMA is deliberately not enabled, so both builds round identically and the
// results do not depend on the host CPU.

/// Squared Euclidean distance with eight independent accumulators, so the
/// compiler can vectorize without reassociating a single running sum.
#[inline(always)]
fn l2_sq_body(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            let d = x[i] - y[i];
            acc[i] += d * d;
        }
    }
    finish(&acc, ra, rb)
}

#[inline(always)]
fn finish(acc: &[f32; 8], ra: &[f32], rb: &[f32]) -> f32 {
    let mut tail = 0.0f32;
    for (x, y) in ra.iter().zip(rb) {
        let d = x - y;
        tail += d * d;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline(always)]
fn nearest_body(v: &[f32], centroids: &[f32], dim: usize) -> (usize, f32) {
    let mut best = (0usize, f32::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = l2_sq_body(v, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn l2_sq(a: &[f32], b: &[f32]) -> f32 {
        super::l2_sq_body(a, b)
    }

    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn nearest(v: &[f32], centroids: &[f32], dim: usize) -> (usize, f32) {
        super::nearest_body(v, centroids, dim)
    }
}

#[inline]
fn has_avx2() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::is_x86_feature_detected!("avx2")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

/// Squared Euclidean distance.
#[inline]
pub(crate) fn l2_sq(a: &[f32], b: &[f32]) -> f32 {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { avx2::l2_sq(a, b) };
    }
    l2_sq_body(a, b)
}

/// Index and distance of the nearest row of `centroids` (row width `dim`).
/// Ties resolve to the lowest index.
#[inline]
pub(crate) fn nearest(v: &[f32], centroids: &[f32], dim: usize) -> (usize, f32) {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { avx2::nearest(v, centroids, dim) };
    }
    nearest_body(v, centroids, dim)
}
