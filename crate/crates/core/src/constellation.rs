//! PAM, square-QAM and PSK signal sets with their bit-label map, difference
//! constellations and distance functionals on the relay's effective
//! constellation `{x_A + z·x_B}`.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianInt, GaussianRational};
use crate::point_index::PointIndex;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    Pam,
    Qam,
    Psk,
}

impl ConstellationKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pam => "PAM",
            Self::Qam => "QAM",
            Self::Psk => "PSK",
        }
    }
}

impl fmt::Display for ConstellationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `Lattice` keeps the integer coordinates (odd integers for PAM/QAM);
/// `Unit` rescales to unit average energy. PSK is unit energy in both.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Lattice,
    Unit,
}

/// An indexed signal set. The index of a point is its label `μ(x)`.
///
/// For PAM the size is the number of points (the "√M" of √M-PAM). For QAM,
/// label `l = i·√M + q` sits at `(2i − √M + 1) + j(2q − √M + 1)` before
/// scaling, which is the map `½[(√M − 1 + A_I)√M + (√M − 1 + A_Q)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation<T: Scalar> {
    kind: ConstellationKind,
    size: usize,
    normalization: Normalization,
    lattice: Option<Vec<GaussianInt>>,
    points: Vec<Complex<T>>,
    scale: T,
}

fn is_power_of_four(m: usize) -> bool {
    m >= 4 && m.is_power_of_two() && m.trailing_zeros().is_multiple_of(2)
}

impl<T: Scalar> Constellation<T> {
    pub fn build(kind: ConstellationKind, size: usize, normalization: Normalization) -> Result<Self> {
        let invalid = Err(Error::InvalidSize { kind: kind.name(), size });
        let lattice: Option<Vec<GaussianInt>> = match kind {
            ConstellationKind::Pam => {
                if size < 2 {
                    return invalid;
                }
                let p = size as i64;
                Some((0..p).map(|n| GaussianInt::new(-(p - 1) + 2 * n, 0)).collect())
            }
            ConstellationKind::Qam => {
                if !is_power_of_four(size) {
                    return invalid;
                }
                let s = (size as f64).sqrt().round() as i64;
                Some(
                    (0..s)
                        .flat_map(|i| (0..s).map(move |q| GaussianInt::new(-(s - 1) + 2 * i, -(s - 1) + 2 * q)))
                        .collect(),
                )
            }
            ConstellationKind::Psk => {
                if size < 2 || !size.is_power_of_two() {
                    return invalid;
                }
                None
            }
        };
        let scale = match (kind, normalization) {
            (ConstellationKind::Psk, _) | (_, Normalization::Lattice) => T::one(),
            (ConstellationKind::Pam, Normalization::Unit) => {
                let p = size as f64;
                T::of((3.0 / (p * p - 1.0)).sqrt())
            }
            (ConstellationKind::Qam, Normalization::Unit) => T::of((3.0 / (2.0 * (size as f64 - 1.0))).sqrt()),
        };
        let points = match &lattice {
            Some(l) => l.iter().map(|g| g.to_complex::<T>() * scale).collect(),
            None => (0..size)
                .map(|k| Complex::from_polar(T::one(), T::TAU() * T::of(k as f64) / T::of(size as f64)))
                .collect(),
        };
        Ok(Self { kind, size, normalization, lattice, points, scale })
    }

    pub fn qam(size: usize, normalization: Normalization) -> Result<Self> {
        Self::build(ConstellationKind::Qam, size, normalization)
    }

    pub fn pam(points: usize, normalization: Normalization) -> Result<Self> {
        Self::build(ConstellationKind::Pam, points, normalization)
    }

    pub fn psk(size: usize) -> Result<Self> {
        Self::build(ConstellationKind::Psk, size, Normalization::Unit)
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex<T> {
        self.points[label]
    }

    /// Integer coordinates for PAM/QAM, `None` for PSK.
    pub fn lattice(&self) -> Option<&[GaussianInt]> {
        self.lattice.as_deref()
    }

    /// Factor mapping lattice coordinates to `points`.
    pub fn scale(&self) -> T {
        self.scale
    }

    /// √M for QAM, the point count for PAM and PSK.
    pub fn side(&self) -> usize {
        match self.kind {
            ConstellationKind::Qam => (self.size as f64).sqrt().round() as usize,
            _ => self.size,
        }
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.size.next_power_of_two().trailing_zeros()
    }

    pub fn label_of_lattice(&self, g: GaussianInt) -> Option<usize> {
        let s = self.side() as i64;
        let coord = |v: i64| {
            let t = v + s - 1;
            (t >= 0 && t % 2 == 0 && t / 2 < s).then_some((t / 2) as usize)
        };
        match self.kind {
            ConstellationKind::Pam => (g.im == 0).then(|| coord(g.re)).flatten(),
            ConstellationKind::Qam => Some(coord(g.re)? * self.side() + coord(g.im)?),
            ConstellationKind::Psk => None,
        }
    }

    /// Label of the point within tolerance of `p`, if any.
    pub fn label_of_point(&self, p: Complex<T>) -> Option<usize> {
        let tol = T::merge_tolerance() * (T::one() + p.norm());
        self.points.iter().position(|&x| (x - p).norm() <= tol)
    }

    /// Permutation `l -> label(f(x_l))`, or `None` if `f` leaves the set.
    pub fn label_permutation<F: Fn(Complex<T>) -> Complex<T>>(&self, f: F) -> Option<Vec<usize>> {
        let perm: Vec<usize> = self.points.iter().map(|&x| self.label_of_point(f(x))).collect::<Option<_>>()?;
        let mut seen = vec![false; self.size];
        for &p in &perm {
            if std::mem::replace(&mut seen[p], true) {
                return None;
            }
        }
        Some(perm)
    }

    /// Smallest distance between two distinct points.
    pub fn d_min(&self) -> T {
        let mut best = T::infinity();
        for (i, &a) in self.points.iter().enumerate() {
            for &b in &self.points[i + 1..] {
                best = best.min((a - b).norm());
            }
        }
        best
    }

    pub fn average_energy(&self) -> T {
        self.points.iter().map(|p| p.norm_sqr()).sum::<T>() / T::of(self.size as f64)
    }

    pub fn difference_constellation(&self) -> DifferenceConstellation<T> {
        match &self.lattice {
            Some(l) => {
                let set: BTreeSet<GaussianInt> = l.iter().flat_map(|&a| l.iter().map(move |&b| a - b)).collect();
                let lattice: Vec<GaussianInt> = set.into_iter().collect();
                let deltas = lattice.iter().map(|g| g.to_complex::<T>() * self.scale).collect();
                DifferenceConstellation { deltas, lattice: Some(lattice) }
            }
            None => {
                let mut idx = PointIndex::new(T::merge_tolerance());
                for &a in &self.points {
                    for &b in &self.points {
                        idx.insert(a - b);
                    }
                }
                DifferenceConstellation { deltas: idx.into_points(), lattice: None }
            }
        }
    }

    /// `min |(x_A − x_A') + z(x_B − x_B')|` over distinct pairs of pairs.
    /// Zero exactly at the singular fade states (and at `z = 0`).
    pub fn effective_min_distance(&self, z: Complex<T>) -> T {
        let diff = self.difference_constellation();
        diff.effective_min_distance(z)
    }

    /// Same as [`Self::effective_min_distance`] with an exact zero test for
    /// lattice constellations.
    pub fn effective_min_distance_exact(&self, z: &GaussianRational) -> Result<T> {
        if self.is_singular(z)? {
            return Ok(T::zero());
        }
        Ok(self.effective_min_distance(z.to_complex()))
    }

    /// Exact membership test for the singular fade states of a PAM/QAM set.
    pub fn is_singular(&self, z: &GaussianRational) -> Result<bool> {
        let diff = self.difference_constellation();
        let lattice = diff.lattice.as_ref().ok_or(Error::NeedsLattice)?;
        if z.is_zero() {
            return Ok(false);
        }
        let set: BTreeSet<GaussianInt> = lattice.iter().copied().collect();
        // d_k + z·d_l = 0  <=>  d_k = −num·d_l / den
        Ok(lattice
            .iter()
            .filter(|d| !d.is_zero())
            .any(|&dl| (-(z.num() * dl)).div_exact(z.den()).is_some_and(|dk| set.contains(&dk))))
    }

    pub fn describe(&self) -> ConstellationDesc {
        ConstellationDesc {
            kind: self.kind,
            size: self.size,
            normalization: self.normalization,
            labels: self.points.iter().map(|p| [p.re.to_f64_lossy(), p.im.to_f64_lossy()]).collect(),
        }
    }
}

impl<T: Scalar> fmt::Display for Constellation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.size, self.kind)
    }
}

/// Serialized form: kind, size and the label → point table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstellationDesc {
    pub kind: ConstellationKind,
    #[serde(rename = "M")]
    pub size: usize,
    pub normalization: Normalization,
    pub labels: Vec<[f64; 2]>,
}

impl ConstellationDesc {
    pub fn build<T: Scalar>(&self) -> Result<Constellation<T>> {
        let c = Constellation::build(self.kind, self.size, self.normalization)?;
        let same = c
            .describe()
            .labels
            .iter()
            .zip(&self.labels)
            .all(|(a, b)| (a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
        if !same || self.labels.len() != c.size() {
            return Err(Error::Config("label table does not match the constellation".into()));
        }
        Ok(c)
    }
}

/// `ΔS = {x − x'}`, including 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceConstellation<T: Scalar> {
    deltas: Vec<Complex<T>>,
    lattice: Option<Vec<GaussianInt>>,
}

impl<T: Scalar> DifferenceConstellation<T> {
    pub fn deltas(&self) -> &[Complex<T>] {
        &self.deltas
    }

    pub fn lattice(&self) -> Option<&[GaussianInt]> {
        self.lattice.as_deref()
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// `ΔS⁺`: the elements with `re > 0, im >= 0`.
    pub fn quadrant_plus(&self) -> Vec<Complex<T>> {
        let tol = T::merge_tolerance();
        self.deltas.iter().copied().filter(|d| d.re > tol && d.im >= -tol).collect()
    }

    /// `ΔS⁺` on the integer lattice with the common factor 2 removed.
    pub fn quadrant_plus_reduced(&self) -> Option<Vec<GaussianInt>> {
        let l = self.lattice.as_ref()?;
        Some(l.iter().filter(|d| d.re > 0 && d.im >= 0).map(|d| GaussianInt::new(d.re / 2, d.im / 2)).collect())
    }

    pub fn effective_min_distance(&self, z: Complex<T>) -> T {
        let mut best = T::infinity();
        let tol = T::merge_tolerance();
        for &dk in &self.deltas {
            for &dl in &self.deltas {
                if dk.norm() <= tol && dl.norm() <= tol {
                    continue;
                }
                best = best.min((dk + z * dl).norm());
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Constellation<f64>;

    #[test]
    fn qam4_labels() {
        let c = C::qam(4, Normalization::Lattice).unwrap();
        let l = c.lattice().unwrap();
        assert_eq!(l[0], GaussianInt::new(-1, -1));
        assert_eq!(l[1], GaussianInt::new(-1, 1));
        assert_eq!(l[2], GaussianInt::new(1, -1));
        assert_eq!(l[3], GaussianInt::new(1, 1));
    }

    #[test]
    fn qam_label_map_formula() {
        for m in [4usize, 16, 64] {
            let c = C::qam(m, Normalization::Lattice).unwrap();
            let s = c.side() as i64;
            for (label, g) in c.lattice().unwrap().iter().enumerate() {
                let mu = ((s - 1 + g.re) * s + (s - 1 + g.im)) / 2;
                assert_eq!(mu as usize, label);
                assert_eq!(c.label_of_lattice(*g), Some(label));
            }
        }
    }

    #[test]
    fn pam4_points() {
        let c = C::pam(4, Normalization::Lattice).unwrap();
        let re: Vec<i64> = c.lattice().unwrap().iter().map(|g| g.re).collect();
        assert_eq!(re, vec![-3, -1, 1, 3]);
    }

    #[test]
    fn unit_energy_and_dmin() {
        let c = C::qam(16, Normalization::Unit).unwrap();
        assert!((c.average_energy() - 1.0).abs() < 1e-12);
        assert!((c.d_min() - (2.0f64 / 5.0).sqrt()).abs() < 1e-12);
        for m in [4, 64, 256] {
            let c = C::qam(m, Normalization::Unit).unwrap();
            assert!((c.d_min() - (6.0 / (m as f64 - 1.0)).sqrt()).abs() < 1e-12);
        }
        let p = C::pam(8, Normalization::Unit).unwrap();
        assert!((p.average_energy() - 1.0).abs() < 1e-12);
        let k = C::psk(16).unwrap();
        assert!((k.d_min() - 2.0 * (std::f64::consts::PI / 16.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn invalid_sizes() {
        assert!(C::qam(8, Normalization::Unit).is_err());
        assert!(C::qam(2, Normalization::Unit).is_err());
        assert!(C::pam(1, Normalization::Unit).is_err());
        assert!(C::psk(12).is_err());
    }

    #[test]
    fn difference_constellations() {
        let pam = C::pam(4, Normalization::Lattice).unwrap().difference_constellation();
        let re: Vec<i64> = pam.lattice().unwrap().iter().map(|g| g.re).collect();
        assert_eq!(re, vec![-6, -4, -2, 0, 2, 4, 6]);

        let q4 = C::qam(4, Normalization::Lattice).unwrap().difference_constellation();
        assert_eq!(q4.len(), 9);
        assert_eq!(q4.quadrant_plus().len(), 2);

        for (m, plus) in [(16usize, 12usize), (64, 56)] {
            let d = C::qam(m, Normalization::Lattice).unwrap().difference_constellation();
            let s = (m as f64).sqrt() as usize;
            assert_eq!(d.len(), (2 * s - 1).pow(2));
            assert_eq!(d.quadrant_plus().len(), plus);
            assert_eq!(plus, ((2 * s - 1).pow(2) - 1) / 4);
            for g in d.lattice().unwrap() {
                assert!(d.lattice().unwrap().contains(&-*g));
            }
        }
        let psk = C::psk(8).unwrap().difference_constellation();
        // 8·7 nonzero differences collapse onto 7 magnitudes × 8 phases ... check symmetry
        for d in psk.deltas() {
            assert!(psk.deltas().iter().any(|e| (*e + *d).norm() < 1e-9));
        }
    }

    #[test]
    fn effective_distance_examples() {
        let c = C::qam(4, Normalization::Lattice).unwrap();
        assert_eq!(c.effective_min_distance(Complex::new(0.5, 0.5)), 0.0);
        for c in [C::qam(16, Normalization::Unit).unwrap(), C::pam(4, Normalization::Unit).unwrap(), C::psk(8).unwrap()]
        {
            assert!(c.effective_min_distance(Complex::new(1.0, 0.0)) < 1e-12);
        }
        // far from every singular state, the pair with x_B fixed dominates
        let u = C::qam(4, Normalization::Unit).unwrap();
        let d = u.effective_min_distance(Complex::new(10.0, 0.0));
        assert!((d - u.d_min()).abs() < 1e-12);
    }

    #[test]
    fn effective_distance_matches_pairwise_scan() {
        let c = C::qam(4, Normalization::Unit).unwrap();
        let pts = c.points();
        for z in [Complex::new(10.0, 0.0), Complex::new(0.3, 0.7), Complex::new(-1.2, 2.1)] {
            let mut brute = f64::INFINITY;
            for a in 0..4 {
                for b in 0..4 {
                    for a2 in 0..4 {
                        for b2 in 0..4 {
                            if (a, b) != (a2, b2) {
                                brute = brute.min(((pts[a] - pts[a2]) + z * (pts[b] - pts[b2])).norm());
                            }
                        }
                    }
                }
            }
            assert!((brute - c.effective_min_distance(z)).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_singularity() {
        let c = C::qam(4, Normalization::Lattice).unwrap();
        let half = GaussianRational::new(GaussianInt::new(1, 1), GaussianInt::new(2, 0)).unwrap();
        assert!(c.is_singular(&half).unwrap());
        assert_eq!(c.effective_min_distance_exact(&half).unwrap(), 0.0);
        let not = GaussianRational::new(GaussianInt::new(3, 1), GaussianInt::new(7, 0)).unwrap();
        assert!(!c.is_singular(&not).unwrap());
        assert!(c.effective_min_distance_exact(&not).unwrap() > 0.0);
        assert_eq!(C::psk(4).unwrap().is_singular(&half), Err(Error::NeedsLattice));
    }

    #[test]
    fn desc_round_trip() {
        let c = C::qam(16, Normalization::Unit).unwrap();
        let desc = c.describe();
        let json = serde_json::to_string(&desc).unwrap();
        let back: ConstellationDesc = serde_json::from_str(&json).unwrap();
        assert_eq!(back.build::<f64>().unwrap(), c);
    }
}
