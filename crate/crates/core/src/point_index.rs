use std::collections::HashMap;

use num_complex::Complex;

use crate::scalar::Scalar;

/// Deduplicates complex points that agree to within a tolerance.
///
/// Points are bucketed on a square grid of side `tol`; a query inspects the
/// 3×3 block of buckets around it. Representatives are the first point seen.
#[derive(Debug, Clone)]
pub(crate) struct PointIndex<T: Scalar> {
    tol: T,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    reps: Vec<Complex<T>>,
}

impl<T: Scalar> PointIndex<T> {
    pub(crate) fn new(tol: T) -> Self {
        Self { tol, buckets: HashMap::new(), reps: Vec::new() }
    }

    fn key(&self, p: Complex<T>) -> (i64, i64) {
        let kx = (p.re / self.tol).floor().to_i64().unwrap_or(i64::MAX);
        let ky = (p.im / self.tol).floor().to_i64().unwrap_or(i64::MAX);
        (kx, ky)
    }

    pub(crate) fn find(&self, p: Complex<T>) -> Option<usize> {
        let (kx, ky) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.buckets.get(&(kx + dx, ky + dy)) {
                    if let Some(&i) = ids.iter().find(|&&i| (self.reps[i] - p).norm() <= self.tol) {
                        return Some(i);
                    }
                }
            }
        }
        None
    }

    /// Index of the representative matching `p`, inserting `p` if new.
    /// The flag is true when `p` was inserted.
    pub(crate) fn insert(&mut self, p: Complex<T>) -> (usize, bool) {
        if let Some(i) = self.find(p) {
            return (i, false);
        }
        let i = self.reps.len();
        self.reps.push(p);
        let k = self.key(p);
        self.buckets.entry(k).or_default().push(i);
        (i, true)
    }

    #[cfg(test)]
    pub(crate) fn len(&self) -> usize {
        self.reps.len()
    }

    pub(crate) fn into_points(self) -> Vec<Complex<T>> {
        self.reps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_nearby_points_only() {
        let mut idx = PointIndex::<f64>::new(1e-9);
        let a = idx.insert(Complex::new(0.5, 0.5)).0;
        assert_eq!(idx.insert(Complex::new(0.5 + 3e-10, 0.5 - 3e-10)), (a, false));
        let (b, fresh) = idx.insert(Complex::new(0.5 + 1e-6, 0.5));
        assert!(fresh && b != a);
        // straddling a bucket edge
        let c = idx.insert(Complex::new(-1e-10, 0.0)).0;
        assert_eq!(idx.insert(Complex::new(1e-10, 0.0)).0, c);
        assert_eq!(idx.len(), 3);
    }
}
