//! Relay maps as Latin squares: row = label of A's point, column = label of
//! B's point, symbol = cluster sent in the broadcast phase.

mod bank;
mod complete;
mod constraints;

pub use bank::{parse_complex, BankEntry, BankFile, LatinSquareBank};
pub use complete::{complete, complete_with, CompletionOptions};
pub use constraints::{Cell, ConstraintSet};

use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, ConstellationKind};
use crate::error::{Error, Result};
use crate::gaussian::GaussianRational;
use crate::scalar::Scalar;
use crate::singular_fades::format_complex;

/// Threshold on the minimum cluster distance above which a square is said
/// to remove a fade state.
pub const REMOVAL_THRESHOLD: f64 = 1e-9;

/// An `M×M` array over `t` symbols with no symbol repeated in a row or a
/// column.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSquare", into = "RawSquare")]
pub struct LatinSquare {
    order: usize,
    symbols: usize,
    cells: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawSquare {
    #[serde(rename = "M")]
    order: usize,
    t: usize,
    cells: Vec<usize>,
}

impl TryFrom<RawSquare> for LatinSquare {
    type Error = Error;

    fn try_from(raw: RawSquare) -> Result<Self> {
        let sq = Self::from_cells(raw.order, raw.cells)?;
        if sq.symbols != raw.t {
            return Err(Error::MalformedSquare(format!("t = {} but {} symbols used", raw.t, sq.symbols)));
        }
        Ok(sq)
    }
}

impl From<LatinSquare> for RawSquare {
    fn from(sq: LatinSquare) -> Self {
        Self { order: sq.order, t: sq.symbols, cells: sq.cells }
    }
}

/// True iff no symbol repeats within a row or a column of the row-major
/// `order×order` array.
pub fn verify(order: usize, cells: &[usize]) -> bool {
    if cells.len() != order * order {
        return false;
    }
    let mut seen = std::collections::HashSet::new();
    for r in 0..order {
        seen.clear();
        if !(0..order).all(|c| seen.insert(cells[r * order + c])) {
            return false;
        }
    }
    for c in 0..order {
        seen.clear();
        if !(0..order).all(|r| seen.insert(cells[r * order + c])) {
            return false;
        }
    }
    true
}

impl LatinSquare {
    /// Checks the Latin property and relabels nothing; `t` is the number of
    /// distinct symbols, which must be exactly `0..t`.
    pub fn from_cells(order: usize, cells: Vec<usize>) -> Result<Self> {
        if order == 0 || cells.len() != order * order {
            return Err(Error::MalformedSquare(format!("{} cells for order {order}", cells.len())));
        }
        if !verify(order, &cells) {
            return Err(Error::MalformedSquare("a symbol repeats in a row or column".into()));
        }
        let max = cells.iter().copied().max().unwrap_or(0);
        let mut used = vec![false; max + 1];
        for &s in &cells {
            used[s] = true;
        }
        if used.iter().any(|u| !u) {
            return Err(Error::MalformedSquare("symbols are not contiguous from 0".into()));
        }
        Ok(Self { order, symbols: max + 1, cells })
    }

    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let order = rows.len();
        if rows.iter().any(|r| r.len() != order) {
            return Err(Error::MalformedSquare("rows of unequal length".into()));
        }
        Self::from_cells(order, rows.concat())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of symbols `t`.
    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> usize {
        self.cells[row * self.order + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks(self.order)
    }

    /// Column `l` holding `symbol` in `row`, if any.
    pub fn column_of(&self, row: usize, symbol: usize) -> Option<usize> {
        self.rows().nth(row)?.iter().position(|&s| s == symbol)
    }

    /// Row `k` holding `symbol` in `col`, if any.
    pub fn row_of(&self, col: usize, symbol: usize) -> Option<usize> {
        (0..self.order).find(|&r| self.get(r, col) == symbol)
    }

    pub fn transpose(&self) -> Self {
        let n = self.order;
        let cells = (0..n * n).map(|i| self.get(i % n, i / n)).collect();
        Self { order: n, symbols: self.symbols, cells }
    }

    /// `L'[r][c] = L[row_perm[r]][col_perm[c]]`.
    pub fn permute(&self, row_perm: &[usize], col_perm: &[usize]) -> Result<Self> {
        let n = self.order;
        let is_perm = |p: &[usize]| {
            let mut seen = vec![false; n];
            p.len() == n && p.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
        };
        if !is_perm(row_perm) || !is_perm(col_perm) {
            return Err(Error::MalformedSquare("not a permutation of the labels".into()));
        }
        let cells = (0..n * n).map(|i| self.get(row_perm[i / n], col_perm[i % n])).collect();
        Ok(Self { order: n, symbols: self.symbols, cells })
    }

    /// `min |(x_A − x_A') + z(x_B − x_B')|` over cell pairs carrying
    /// different symbols.
    pub fn min_cluster_distance<T: Scalar>(&self, c: &Constellation<T>, z: Complex<T>) -> T {
        let pts = c.points();
        let sums: Vec<Complex<T>> =
            (0..self.order * self.order).map(|i| pts[i / self.order] + z * pts[i % self.order]).collect();
        let mut best = T::infinity();
        for (i, &a) in sums.iter().enumerate() {
            let si = self.cells[i];
            for (j, &b) in sums.iter().enumerate().skip(i + 1) {
                if self.cells[j] != si {
                    best = best.min((a - b).norm_sqr());
                }
            }
        }
        best.sqrt()
    }

    /// Exact-zero variant for lattice constellations: collisions of
    /// `den·x_k + num·x_l` are detected in integers before any rounding.
    pub fn min_cluster_distance_exact<T: Scalar>(&self, c: &Constellation<T>, z: &GaussianRational) -> Result<T> {
        let lattice = c.lattice().ok_or(Error::NeedsLattice)?;
        let n = self.order;
        let sums: Vec<_> = (0..n * n).map(|i| z.den() * lattice[i / n] + z.num() * lattice[i % n]).collect();
        let mut best = i64::MAX;
        for (i, &a) in sums.iter().enumerate() {
            for (j, &b) in sums.iter().enumerate().skip(i + 1) {
                if self.cells[i] != self.cells[j] {
                    best = best.min((a - b).norm());
                }
            }
        }
        let dist = T::of(best as f64).sqrt() / T::of(z.den().norm() as f64).sqrt();
        Ok(dist * c.scale())
    }

    /// Whether the square keeps every pair of distinct relay points apart at `z`.
    pub fn removes<T: Scalar>(&self, c: &Constellation<T>, z: Complex<T>) -> bool {
        self.min_cluster_distance(c, z).to_f64_lossy() > REMOVAL_THRESHOLD
    }

    fn require_removal<T: Scalar>(&self, c: &Constellation<T>, z: Complex<T>) -> Result<()> {
        if self.order != c.size() {
            return Err(Error::MalformedSquare(format!("order {} for a {}-point set", self.order, c.size())));
        }
        if !self.removes(c, z) {
            return Err(Error::NotRemoved(format_complex(z)));
        }
        Ok(())
    }

    /// Column permutation `l -> label(ω·x_l)`: if the square removes `z`
    /// the result removes `ω·z`. `ω` must map the constellation onto itself.
    pub fn rotate<T: Scalar>(&self, c: &Constellation<T>, omega: Complex<T>) -> Result<Self> {
        let cols = c
            .label_permutation(|x| omega * x)
            .ok_or_else(|| Error::Config(format!("{} is not a symmetry of {c}", format_complex(omega))))?;
        let rows: Vec<usize> = (0..self.order).collect();
        self.permute(&rows, &cols)
    }

    /// Quarter-turn for QAM: from a square removing `z`, one removing `j·z`.
    pub fn rotate_quarter<T: Scalar>(&self, c: &Constellation<T>, z: Complex<T>) -> Result<Self> {
        if c.kind() != ConstellationKind::Qam {
            return Err(Error::Config("quarter-turn symmetry needs a QAM constellation".into()));
        }
        self.require_removal(c, z)?;
        self.rotate(c, Complex::new(T::zero(), T::one()))
    }

    /// Mirror: from a square removing `γe^{jθ}`, one removing
    /// `γe^{j(π/2−θ)}` for QAM (rows by `a+jb -> b+ja`, columns by
    /// conjugation) and `γe^{−jθ}` for PSK/PAM (conjugation on both).
    pub fn reflect<T: Scalar>(&self, c: &Constellation<T>, z: Complex<T>) -> Result<Self> {
        self.require_removal(c, z)?;
        Ok(self.reflect_unchecked(c))
    }

    pub(crate) fn reflect_unchecked<T: Scalar>(&self, c: &Constellation<T>) -> Self {
        let cols = c.label_permutation(|x| x.conj()).expect("constellations are closed under conjugation");
        let rows = match c.kind() {
            ConstellationKind::Qam => {
                c.label_permutation(|x| Complex::new(x.im, x.re)).expect("QAM is symmetric about the diagonal")
            }
            _ => cols.clone(),
        };
        self.permute(&rows, &cols).expect("label permutations")
    }

    /// Fade state removed by [`Self::reflect`] given the one removed before.
    pub fn reflected_fade<T: Scalar>(kind: ConstellationKind, z: Complex<T>) -> Complex<T> {
        match kind {
            ConstellationKind::Qam => Complex::new(z.im, z.re),
            _ => z.conj(),
        }
    }
}

impl fmt::Display for LatinSquare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = (self.symbols.max(2) - 1).to_string().len();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|s| format!("{s:>width$}")).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Left-cyclic square `L[r][c] = (r + c) mod p`.
pub fn standard_pam(points: usize) -> Result<LatinSquare> {
    if points < 2 {
        return Err(Error::InvalidSize { kind: "PAM", size: points });
    }
    let cells = (0..points * points).map(|i| (i / points + i % points) % points).collect();
    LatinSquare::from_cells(points, cells)
}

/// Block left-cyclic arrangement of left-cyclic `√M×√M` blocks: with
/// `k = a√M + b` and `l = c√M + d`, the cell holds
/// `((a + c) mod √M)·√M + (b + d) mod √M`.
pub fn standard_qam(m: usize) -> Result<LatinSquare> {
    let s = (m as f64).sqrt().round() as usize;
    if m < 4 || s * s != m || !m.is_power_of_two() {
        return Err(Error::InvalidSize { kind: "QAM", size: m });
    }
    let cells = (0..m * m)
        .map(|i| {
            let (k, l) = (i / m, i % m);
            let (a, b, c, d) = (k / s, k % s, l / s, l % s);
            ((a + c) % s) * s + (b + d) % s
        })
        .collect();
    LatinSquare::from_cells(m, cells)
}

/// `L[k][l] = k XOR l`.
pub fn xor_square(m: usize) -> Result<LatinSquare> {
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::InvalidSize { kind: "XOR", size: m });
    }
    LatinSquare::from_cells(m, (0..m * m).map(|i| (i / m) ^ (i % m)).collect())
}

/// The `z = 1` remover used as the default map: the cyclic constructions
/// for PAM and QAM, XOR for PSK (natural labels make `k ⊕ l` and
/// `k + l mod M` both valid there; XOR is tried first).
pub fn standard_square<T: Scalar>(c: &Constellation<T>) -> Result<LatinSquare> {
    match c.kind() {
        ConstellationKind::Pam => standard_pam(c.size()),
        ConstellationKind::Qam => standard_qam(c.size()),
        ConstellationKind::Psk => {
            let one = Complex::new(T::one(), T::zero());
            let xor = xor_square(c.size())?;
            if xor.removes(c, one) {
                Ok(xor)
            } else {
                standard_pam(c.size())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::Normalization;
    use crate::gaussian::GaussianInt;

    fn qam(m: usize) -> Constellation<f64> {
        Constellation::qam(m, Normalization::Lattice).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn verify_examples() {
        assert!(verify(4, standard_pam(4).unwrap().cells()));
        assert!(!verify(2, &[0, 0, 1, 1]));
        assert!(!verify(2, &[0, 1, 0, 1]));
        assert!(!verify(2, &[0, 1, 1]));
        assert!(LatinSquare::from_cells(2, vec![0, 0, 1, 1]).is_err());
        assert!(LatinSquare::from_cells(2, vec![0, 2, 2, 0]).is_err());
    }

    #[test]
    fn small_standard_squares() {
        assert_eq!(standard_pam(2).unwrap().cells(), &[0, 1, 1, 0]);
        assert_eq!(
            standard_pam(4).unwrap(),
            LatinSquare::from_rows(&[vec![0, 1, 2, 3], vec![1, 2, 3, 0], vec![2, 3, 0, 1], vec![3, 0, 1, 2]]).unwrap()
        );
        assert_eq!(standard_qam(4).unwrap().cells(), &[0, 1, 2, 3, 1, 0, 3, 2, 2, 3, 0, 1, 3, 2, 1, 0]);
        assert_eq!(xor_square(2).unwrap().cells(), &[0, 1, 1, 0]);
        assert!(standard_qam(8).is_err());
        assert!(xor_square(6).is_err());
    }

    #[test]
    fn standard_squares_remove_one() {
        let one = c(1.0, 0.0);
        for p in 2..=8 {
            let pam = Constellation::<f64>::pam(p, Normalization::Lattice).unwrap();
            let l = standard_pam(p).unwrap();
            assert!(l.removes(&pam, one), "{p}-PAM");
            assert_eq!(l, l.transpose());
        }
        for m in [4, 16, 64] {
            assert!(
                standard_qam(m).unwrap().min_cluster_distance_exact(&qam(m), &GaussianRational::one()).unwrap() > 0.0
            );
        }
        for m in [2, 4, 8, 16] {
            let psk = Constellation::<f64>::psk(m).unwrap();
            assert!(standard_square(&psk).unwrap().removes(&psk, one), "{m}-PSK");
        }
    }

    #[test]
    fn pam_diagonal_structure() {
        let l = standard_pam(6).unwrap();
        for k in 0..5 {
            for col in 1..6 {
                assert_eq!(l.get(k + 1, col - 1), l.get(k, col));
            }
        }
    }

    #[test]
    fn xor_behaviour_at_one() {
        let one = GaussianRational::one();
        assert_eq!(xor_square(16).unwrap().min_cluster_distance_exact(&qam(16), &one).unwrap(), 0.0);
        assert!(xor_square(4).unwrap().min_cluster_distance_exact(&qam(4), &one).unwrap() > 0.0);
    }

    #[test]
    fn bpsk_cluster_distance() {
        let pam = Constellation::<f64>::pam(2, Normalization::Lattice).unwrap();
        // {(0,1),(1,0)} and {(0,0),(1,1)}
        let l = LatinSquare::from_cells(2, vec![0, 1, 1, 0]).unwrap();
        assert!((l.min_cluster_distance(&pam, c(1.0, 0.0)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn symmetries_move_the_removed_state() {
        let m = qam(16);
        let z = c(2.0, 1.0);
        let h = crate::singular_fades::SingularFadeSet::enumerate(&m);
        let q = GaussianRational::from_int(GaussianInt::new(2, 1));
        let fade = h.get(h.index_of_exact(&q).unwrap());
        let cs = crate::singular_fades::constraints_for(&m, fade).unwrap();
        let l = complete(&cs, 32).unwrap();
        assert!(l.removes(&m, z));
        assert!(l.transpose().removes(&m, z.inv()));
        assert!(l.rotate_quarter(&m, z).unwrap().removes(&m, c(-1.0, 2.0)));
        assert!(l.reflect(&m, z).unwrap().removes(&m, c(1.0, 2.0)));
        assert!(standard_qam(16).unwrap().transpose().removes(&m, c(1.0, 0.0)));
        assert!(matches!(xor_square(16).unwrap().rotate_quarter(&m, c(1.0, 0.0)), Err(Error::NotRemoved(_))));
    }

    #[test]
    fn permutation_group_laws() {
        let m = qam(16);
        let l = standard_qam(16).unwrap();
        let one = c(1.0, 0.0);
        let mut r = l.clone();
        let mut z = one;
        for _ in 0..4 {
            r = r.rotate_quarter(&m, z).unwrap();
            z *= c(0.0, 1.0);
        }
        assert_eq!(r, l);
        assert_eq!(l.transpose().transpose(), l);
        let twice = l.reflect(&m, one).unwrap().reflect(&m, c(0.0, 1.0)).unwrap();
        assert_eq!(twice, l);
        assert_eq!(LatinSquare::reflected_fade(ConstellationKind::Qam, c(1.0, 1.0)), c(1.0, 1.0));
    }

    #[test]
    fn inversion_lookup() {
        let l = standard_qam(16).unwrap();
        for k in 0..16 {
            for s in 0..16 {
                let col = l.column_of(k, s).unwrap();
                assert_eq!(l.get(k, col), s);
                assert_eq!(l.row_of(col, s), Some(k));
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let l = standard_qam(4).unwrap();
        let json = serde_json::to_string(&l).unwrap();
        assert_eq!(serde_json::from_str::<LatinSquare>(&json).unwrap(), l);
        assert!(serde_json::from_str::<LatinSquare>(r#"{"M":2,"t":2,"cells":[0,0,1,1]}"#).is_err());
        assert!(serde_json::from_str::<LatinSquare>(r#"{"M":2,"t":3,"cells":[0,1,1,0]}"#).is_err());
    }
}
