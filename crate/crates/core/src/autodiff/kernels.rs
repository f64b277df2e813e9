use crate::Real;

const LANES: usize = 8;

/// Dot product with a fixed lane layout so results are reproducible and the
/// loop vectorizes.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    let mut total = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        total += *x * *y;
    }
    for a in acc {
        total += a;
    }
    total
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// `y += a[0] * x[0] + ... + a[3] * x[3]`, one pass over `y`.
#[inline]
pub fn axpy4<T: Real>(a: [T; 4], x: [&[T]; 4], y: &mut [T]) {
    let [x0, x1, x2, x3] = x;
    for ((((yi, &p), &q), &r), &s) in y.iter_mut().zip(x0).zip(x1).zip(x2).zip(x3) {
        *yi += a[0] * p + a[1] * q + a[2] * r + a[3] * s;
    }
}

/// Accumulates `y += sum_j a[j] * x[j]`, four terms per pass.
pub fn axpy_many<T: Real>(a: &[T], x: &[&[T]], y: &mut [T]) {
    debug_assert_eq!(a.len(), x.len());
    let blocks = a.len() / 4;
    for b in 0..blocks {
        let j = 4 * b;
        axpy4([a[j], a[j + 1], a[j + 2], a[j + 3]], [x[j], x[j + 1], x[j + 2], x[j + 3]], y);
    }
    for j in 4 * blocks..a.len() {
        axpy(a[j], x[j], y);
    }
}

#[inline]
pub fn add_into<T: Real>(x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += *xi;
    }
}

pub fn sum<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |a, &b| a + b)
}
