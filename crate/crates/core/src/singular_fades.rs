//! The singular fade states `H` of a constellation: fade states
//! `z = (x_A − x_A') / (x_B' − x_B)` at which two label pairs land on the
//! same point of the relay constellation. Exhaustive enumeration is the
//! ground truth; the closed-form counts are cross-checks.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::constellation::{Constellation, ConstellationKind};
use crate::error::{Error, Result};
use crate::gaussian::{euler_phi, is_coprime, GaussianInt, GaussianRational};
use crate::latin::{Cell, ConstraintSet};
use crate::point_index::PointIndex;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FadeClass {
    /// `|z| = 1`
    Unit,
    /// `|z| > 1`
    Exterior,
    /// `|z| < 1`
    Interior,
}

/// One element of `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularFade<T: Scalar> {
    value: Complex<T>,
    exact: Option<GaussianRational>,
    rep_num: Complex<T>,
    rep_den: Complex<T>,
}

impl<T: Scalar> SingularFade<T> {
    pub fn value(&self) -> Complex<T> {
        self.value
    }

    /// Exact value for PAM/QAM, `None` for PSK.
    pub fn exact(&self) -> Option<&GaussianRational> {
        self.exact.as_ref()
    }

    /// Representative difference pair `(ď_k, ď_l)` with `−ď_k/ď_l = z` and
    /// `|ď_l|` minimal, in the constellation's own units.
    pub fn representative(&self) -> (Complex<T>, Complex<T>) {
        (self.rep_num, self.rep_den)
    }

    /// `|ď_l|`: the smallest `|d_l|` among difference pairs realizing `z`.
    pub fn weight(&self) -> T {
        self.rep_den.norm()
    }

    /// `min |d_k + w·d_l|` over difference pairs realizing this state,
    /// which equals `|ď_l|·|w − z|`.
    pub fn pair_distance(&self, w: Complex<T>) -> T {
        self.weight() * (w - self.value).norm()
    }

    pub fn class(&self) -> FadeClass {
        let ord = match &self.exact {
            Some(q) => q.cmp_unit_circle(),
            None => {
                let r = self.value.norm();
                if (r - T::one()).abs() <= T::merge_tolerance() {
                    Ordering::Equal
                } else if r > T::one() {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
        };
        match ord {
            Ordering::Equal => FadeClass::Unit,
            Ordering::Greater => FadeClass::Exterior,
            Ordering::Less => FadeClass::Interior,
        }
    }

    /// `a+bi/c+di` for exact states, `re+imi` with 12 decimals otherwise.
    pub fn label(&self) -> String {
        match &self.exact {
            Some(q) => q.to_string(),
            None => format_complex(self.value),
        }
    }
}

pub(crate) fn format_complex<T: Scalar>(v: Complex<T>) -> String {
    let (re, im) = (v.re.to_f64_lossy(), v.im.to_f64_lossy());
    // avoid "-0.000000000000"
    let clean = |x: f64| if x.abs() < 5e-13 { 0.0 } else { x };
    let (re, im) = (clean(re), clean(im));
    if im < 0.0 {
        format!("{re:.12}-{:.12}i", -im)
    } else {
        format!("{re:.12}+{im:.12}i")
    }
}

impl<T: Scalar> fmt::Display for SingularFade<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The set `H` for one constellation, in a deterministic order: canonical
/// [`GaussianRational`] order for lattice sets, `(|z|², re, im)` for PSK.
#[derive(Clone, Debug)]
pub struct SingularFadeSet<T: Scalar> {
    kind: ConstellationKind,
    size: usize,
    states: Vec<SingularFade<T>>,
    exact_index: HashMap<GaussianRational, usize>,
    value_index: PointIndex<T>,
}

impl<T: Scalar> SingularFadeSet<T> {
    /// All ratios `−d_k/d_l` over nonzero `d_k, d_l ∈ ΔS`, deduplicated.
    pub fn enumerate(c: &Constellation<T>) -> Self {
        let diff = c.difference_constellation();
        let states = match diff.lattice() {
            Some(lattice) => enumerate_exact(lattice, c.scale()),
            None => enumerate_approx(diff.deltas()),
        };
        Self::from_states(c.kind(), c.size(), states)
    }

    fn from_states(kind: ConstellationKind, size: usize, states: Vec<SingularFade<T>>) -> Self {
        let exact_index = states.iter().enumerate().filter_map(|(i, s)| s.exact.map(|q| (q, i))).collect();
        let mut value_index = PointIndex::new(T::merge_tolerance());
        for s in &states {
            value_index.insert(s.value);
        }
        Self { kind, size, states, exact_index, value_index }
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn constellation_size(&self) -> usize {
        self.size
    }

    pub fn states(&self) -> &[SingularFade<T>] {
        &self.states
    }

    pub fn get(&self, index: usize) -> &SingularFade<T> {
        &self.states[index]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of_exact(&self, q: &GaussianRational) -> Option<usize> {
        self.exact_index.get(q).copied()
    }

    /// Index of the state equal to `z` up to rounding.
    pub fn index_of_value(&self, z: Complex<T>) -> Option<usize> {
        self.value_index.find(z)
    }

    pub fn contains_value(&self, z: Complex<T>) -> bool {
        self.index_of_value(z).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SingularFade<T>> {
        self.states.iter()
    }
}

fn enumerate_exact<T: Scalar>(lattice: &[GaussianInt], scale: T) -> Vec<SingularFade<T>> {
    let nonzero: Vec<GaussianInt> = lattice.iter().copied().filter(|d| !d.is_zero()).collect();
    let better = |cand: GaussianInt, cur: GaussianInt| (cand.norm(), cand) < (cur.norm(), cur);
    let best: HashMap<GaussianRational, GaussianInt> = nonzero
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<GaussianRational, GaussianInt>, &dk| {
            for &dl in &nonzero {
                let h = GaussianRational::new(-dk, dl).expect("nonzero denominator");
                acc.entry(h)
                    .and_modify(|cur| {
                        if better(dl, *cur) {
                            *cur = dl
                        }
                    })
                    .or_insert(dl);
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (h, dl) in b {
                a.entry(h)
                    .and_modify(|cur| {
                        if better(dl, *cur) {
                            *cur = dl
                        }
                    })
                    .or_insert(dl);
            }
            a
        });
    let mut entries: Vec<(GaussianRational, GaussianInt)> = best.into_iter().collect();
    entries.sort_by_key(|a| a.0);
    entries
        .into_iter()
        .map(|(h, dl)| {
            // −d_k/d_l = h  =>  d_k = −h·d_l, exact by construction
            let dk = (-(h.num() * dl)).div_exact(h.den()).expect("representative is exact");
            SingularFade {
                value: h.to_complex(),
                exact: Some(h),
                rep_num: dk.to_complex::<T>() * scale,
                rep_den: dl.to_complex::<T>() * scale,
            }
        })
        .collect()
}

fn enumerate_approx<T: Scalar>(deltas: &[Complex<T>]) -> Vec<SingularFade<T>> {
    let tol = T::merge_tolerance();
    let nonzero: Vec<Complex<T>> = deltas.iter().copied().filter(|d| d.norm() > tol).collect();
    let mut index = PointIndex::new(tol);
    let mut reps: Vec<(Complex<T>, Complex<T>)> = Vec::new();
    for &dk in &nonzero {
        for &dl in &nonzero {
            let h = -dk / dl;
            let (i, fresh) = index.insert(h);
            if fresh {
                reps.push((dk, dl));
            } else if dl.norm() < reps[i].1.norm() - tol {
                reps[i] = (dk, dl);
            }
        }
    }
    let values = index.into_points();
    let mut states: Vec<SingularFade<T>> = values
        .into_iter()
        .zip(reps)
        .map(|(value, (dk, dl))| SingularFade { value, exact: None, rep_num: dk, rep_den: dl })
        .collect();
    states.sort_by(|a, b| {
        let ka = (a.value.norm_sqr(), a.value.re, a.value.im);
        let kb = (b.value.norm_sqr(), b.value.re, b.value.im);
        ka.partial_cmp(&kb).unwrap_or(Ordering::Equal)
    });
    states
}

/// Closed-form count for √M-PAM: `2 + 4·Σ_{n=2}^{√M−1} φ(n)`.
///
/// The sum starts at 2: the `n = 1` term would count `z = ±1` a second time
/// on top of the constant 2, and the enumerated sets (14 states for 4-PAM,
/// 70 for 8-PAM) agree with this form.
pub fn count_pam(points: usize) -> Result<u64> {
    if points < 2 {
        return Err(Error::InvalidSize { kind: "PAM", size: points });
    }
    let sum: u64 = (2..points as u64).map(|n| euler_phi(n).expect("n >= 2")).sum();
    Ok(2 + 4 * sum)
}

fn qam_side(m: usize) -> Result<usize> {
    let s = (m as f64).sqrt().round() as usize;
    if m < 4 || s * s != m || !m.is_power_of_two() {
        return Err(Error::InvalidSize { kind: "QAM", size: m });
    }
    Ok(s)
}

/// Number of unordered pairs of distinct, relatively prime elements of the
/// reduced first-quadrant difference set `{n + jm : 1 <= n < √M, 0 <= m < √M}`.
pub fn coprime_pairs_qam(m: usize) -> Result<u64> {
    let s = qam_side(m)? as i64;
    let plus: Vec<GaussianInt> = (1..s).flat_map(|n| (0..s).map(move |k| GaussianInt::new(n, k))).collect();
    let count = plus
        .par_iter()
        .enumerate()
        .map(|(i, &a)| plus[i + 1..].iter().filter(|&&b| is_coprime(a, b)).count() as u64)
        .sum();
    Ok(count)
}

/// Closed-form count for square M-QAM: `4 + 8·(coprime pairs in ΔS⁺)`.
pub fn count_qam(m: usize) -> Result<u64> {
    Ok(4 + 8 * coprime_pairs_qam(m)?)
}

/// Count for M-PSK: `M(M²/4 − M/2 + 1)`.
pub fn count_psk(m: usize) -> Result<u64> {
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::InvalidSize { kind: "PSK", size: m });
    }
    let m = m as u64;
    Ok(m * (m * m / 4 - m / 2 + 1))
}

/// Upper bound `4(n² − n + 1)` with `n = ((2√M − 1)² − 1)/4 = |ΔS⁺|`.
///
/// Note: the expression `4M² − (2M − 1)√M + 1` is sometimes given as an
/// equivalent form; it is not (51 vs 12 at M = 4) and is not used.
pub fn upper_bound_qam(m: usize) -> Result<u64> {
    let s = qam_side(m)? as u64;
    let n = ((2 * s - 1).pow(2) - 1) / 4;
    Ok(4 * (n * n - n + 1))
}

/// Singularity-removal classes of `fade`: label pairs `(k, l)` grouped by
/// the relay point `x_k + z·x_l`. Exact for lattice sets.
pub fn constraints_for<T: Scalar>(c: &Constellation<T>, fade: &SingularFade<T>) -> Result<ConstraintSet> {
    match (fade.exact(), c.lattice()) {
        (Some(q), Some(_)) => constraints_for_exact(c, q),
        _ => constraints_for_value(c, fade.value()),
    }
}

/// Exact grouping by `den·x_k + num·x_l`.
pub fn constraints_for_exact<T: Scalar>(c: &Constellation<T>, z: &GaussianRational) -> Result<ConstraintSet> {
    let lattice = c.lattice().ok_or(Error::NeedsLattice)?;
    let mut groups: HashMap<GaussianInt, usize> = HashMap::new();
    let mut classes: Vec<Vec<Cell>> = Vec::new();
    for (k, &xk) in lattice.iter().enumerate() {
        for (l, &xl) in lattice.iter().enumerate() {
            let key = z.den() * xk + z.num() * xl;
            let next = classes.len();
            let id = *groups.entry(key).or_insert(next);
            if id == next {
                classes.push(Vec::new());
            }
            classes[id].push((k, l));
        }
    }
    finish_constraints(c.size(), classes, || z.to_string())
}

/// Floating-point grouping of `x_k + z·x_l` (PSK, or any `z` given as a value).
pub fn constraints_for_value<T: Scalar>(c: &Constellation<T>, z: Complex<T>) -> Result<ConstraintSet> {
    let pts = c.points();
    let scale = pts.iter().map(|p| p.norm()).fold(T::zero(), T::max) * (T::one() + z.norm());
    let mut index = PointIndex::new(T::merge_tolerance() * scale.max(T::one()));
    let mut classes: Vec<Vec<Cell>> = Vec::new();
    for (k, &xk) in pts.iter().enumerate() {
        for (l, &xl) in pts.iter().enumerate() {
            let (id, fresh) = index.insert(xk + z * xl);
            if fresh {
                classes.push(Vec::new());
            }
            classes[id].push((k, l));
        }
    }
    finish_constraints(c.size(), classes, || format_complex(z))
}

fn finish_constraints(order: usize, classes: Vec<Vec<Cell>>, name: impl Fn() -> String) -> Result<ConstraintSet> {
    if classes.iter().all(|c| c.len() < 2) {
        return Err(Error::NotSingular(name()));
    }
    ConstraintSet::new(order, classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::Normalization;
    use std::collections::BTreeSet;

    type C = Constellation<f64>;

    fn q(a: i64, b: i64, c: i64, d: i64) -> GaussianRational {
        GaussianRational::new(GaussianInt::new(a, b), GaussianInt::new(c, d)).unwrap()
    }

    #[test]
    fn qam4_states() {
        let c = C::qam(4, Normalization::Lattice).unwrap();
        let h = SingularFadeSet::enumerate(&c);
        let got: BTreeSet<GaussianRational> = h.iter().map(|s| *s.exact().unwrap()).collect();
        let mut want = BTreeSet::new();
        for u in GaussianInt::UNITS {
            want.insert(GaussianRational::from_int(u));
            let one_plus_j = GaussianInt::new(1, 1) * u;
            want.insert(GaussianRational::from_int(one_plus_j));
            want.insert(GaussianRational::new(GaussianInt::ONE, one_plus_j).unwrap());
        }
        assert_eq!(got, want);
    }

    #[test]
    fn pam_states() {
        let two = SingularFadeSet::enumerate(&C::pam(2, Normalization::Lattice).unwrap());
        let v: Vec<_> = two.iter().map(|s| s.value()).collect();
        assert_eq!(v.len(), 2);
        assert!(v.contains(&Complex::new(1.0, 0.0)) && v.contains(&Complex::new(-1.0, 0.0)));

        let four = SingularFadeSet::enumerate(&C::pam(4, Normalization::Lattice).unwrap());
        let mut got: Vec<f64> = four.iter().map(|s| s.value().re).collect();
        got.sort_by(f64::total_cmp);
        let mut want = vec![1.0, 0.5, 1.0 / 3.0, 2.0 / 3.0, 2.0, 3.0, 1.5];
        want.extend(want.clone().iter().map(|x| -x));
        want.sort_by(f64::total_cmp);
        assert_eq!(got.len(), 14);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_forms() {
        assert_eq!(count_pam(4).unwrap(), 14);
        assert_eq!(count_pam(8).unwrap(), 70);
        assert_eq!(count_pam(2).unwrap(), 2);
        assert!(count_pam(1).is_err());
        assert_eq!(count_qam(4).unwrap(), 12);
        assert_eq!(count_qam(16).unwrap(), 388);
        assert_eq!(coprime_pairs_qam(16).unwrap(), 48);
        assert!(count_qam(8).is_err());
        assert_eq!(count_psk(4).unwrap(), 12);
        assert_eq!(count_psk(16).unwrap(), 912);
        assert_eq!(count_psk(64).unwrap(), 63552);
        assert!(count_psk(6).is_err());
        assert_eq!(upper_bound_qam(4).unwrap(), 12);
        assert_eq!(upper_bound_qam(16).unwrap(), 532);
        assert_eq!(upper_bound_qam(64).unwrap(), 12324);
    }

    #[test]
    fn restated_bound_disagrees() {
        // 4M² − (2M − 1)√M + 1 at M = 4
        let m = 4u64;
        let restated = 4 * m * m - (2 * m - 1) * 2 + 1;
        assert_ne!(restated, upper_bound_qam(4).unwrap());
    }

    #[test]
    fn enumeration_matches_closed_forms() {
        for p in 2..=8 {
            let h = SingularFadeSet::enumerate(&C::pam(p, Normalization::Lattice).unwrap());
            assert_eq!(h.len() as u64, count_pam(p).unwrap(), "{p}-PAM");
        }
        for m in [4, 16, 64] {
            let h = SingularFadeSet::enumerate(&C::qam(m, Normalization::Lattice).unwrap());
            assert_eq!(h.len() as u64, count_qam(m).unwrap(), "{m}-QAM");
        }
        for m in [2, 4, 8, 16] {
            let h = SingularFadeSet::enumerate(&C::psk(m).unwrap());
            assert_eq!(h.len() as u64, count_psk(m).unwrap(), "{m}-PSK");
        }
    }

    #[test]
    fn closure_and_singularity() {
        for c in [C::qam(16, Normalization::Lattice).unwrap(), C::pam(6, Normalization::Lattice).unwrap()] {
            let h = SingularFadeSet::enumerate(&c);
            for s in h.iter() {
                let e = s.exact().unwrap();
                assert!(h.index_of_exact(&e.recip().unwrap()).is_some());
                if c.kind() == ConstellationKind::Qam {
                    assert!(h.index_of_exact(&e.mul_int(GaussianInt::J)).is_some());
                }
                assert_eq!(c.effective_min_distance_exact(e).unwrap(), 0.0);
                assert!(c.effective_min_distance(s.value()) < 1e-9);
                let (dk, dl) = s.representative();
                assert!((dk + s.value() * dl).norm() < 1e-9);
            }
        }
        let psk = SingularFadeSet::enumerate(&C::psk(8).unwrap());
        for s in psk.iter() {
            assert!(psk.contains_value(s.value().inv()));
        }
    }

    #[test]
    fn representative_is_minimal() {
        let c = C::qam(16, Normalization::Lattice).unwrap();
        let h = SingularFadeSet::enumerate(&c);
        let d = c.difference_constellation();
        for s in h.iter().step_by(7) {
            let brute = d
                .deltas()
                .iter()
                .flat_map(|&dk| d.deltas().iter().map(move |&dl| (dk, dl)))
                .filter(|(_, dl)| dl.norm() > 0.0)
                .filter(|(dk, dl)| (-*dk / *dl - s.value()).norm() < 1e-12)
                .map(|(_, dl)| dl.norm())
                .fold(f64::INFINITY, f64::min);
            assert!((brute - s.weight()).abs() < 1e-12);
        }
    }

    #[test]
    fn pam4_constraints_at_one() {
        let c = C::pam(4, Normalization::Lattice).unwrap();
        let cs = constraints_for_exact(&c, &GaussianRational::one()).unwrap();
        let multi: Vec<Vec<Cell>> = cs.multi_classes().cloned().collect();
        assert_eq!(
            multi,
            vec![
                vec![(0, 1), (1, 0)],
                vec![(0, 2), (1, 1), (2, 0)],
                vec![(0, 3), (1, 2), (2, 1), (3, 0)],
                vec![(1, 3), (2, 2), (3, 1)],
                vec![(2, 3), (3, 2)],
            ]
        );
    }

    #[test]
    fn bpsk_constraints_at_one() {
        let c = C::pam(2, Normalization::Lattice).unwrap();
        let cs = constraints_for_exact(&c, &GaussianRational::one()).unwrap();
        let multi: Vec<Vec<Cell>> = cs.multi_classes().cloned().collect();
        assert_eq!(multi, vec![vec![(0, 1), (1, 0)]]);
    }

    #[test]
    fn qam4_constraints_at_j_match_brute_force() {
        let c = C::qam(4, Normalization::Lattice).unwrap();
        let cs = constraints_for_exact(&c, &q(0, 1, 1, 0)).unwrap();
        let pts = c.points();
        let j = Complex::new(0.0, 1.0);
        for class in cs.classes() {
            for &(k, l) in class {
                for k2 in 0..4 {
                    for l2 in 0..4 {
                        let same = (pts[k] + j * pts[l] - pts[k2] - j * pts[l2]).norm() < 1e-12;
                        assert_eq!(same, class.contains(&(k2, l2)));
                    }
                }
            }
        }
        assert!(cs.multi_classes().count() > 0);
    }

    #[test]
    fn constraints_reject_regular_state() {
        let c = C::qam(16, Normalization::Lattice).unwrap();
        let err = constraints_for_exact(&c, &q(7, 3, 11, 0)).unwrap_err();
        assert!(matches!(err, Error::NotSingular(_)));
        let psk = C::psk(8).unwrap();
        assert!(constraints_for_value(&psk, Complex::new(0.37, 0.21)).is_err());
    }

    #[test]
    fn psk_constraints_at_one_pair_antipodes() {
        let c = C::psk(8).unwrap();
        let cs = constraints_for_value(&c, Complex::new(1.0, 0.0)).unwrap();
        let zero_class = cs.classes().iter().find(|cl| cl.contains(&(0, 4))).unwrap();
        assert_eq!(zero_class.len(), 8);
    }

    #[test]
    fn classes_by_magnitude() {
        let h = SingularFadeSet::enumerate(&C::qam(16, Normalization::Lattice).unwrap());
        let count = |k| h.iter().filter(|s| s.class() == k).count();
        assert_eq!(count(FadeClass::Exterior), count(FadeClass::Interior));
        assert_eq!(count(FadeClass::Unit) + 2 * count(FadeClass::Exterior), 388);
    }
}
