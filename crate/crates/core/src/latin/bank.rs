//! One verified Latin square per singular fade state.
//!
//! Fade states are grouped into orbits under `z -> 1/z`, the rotation of
//! the constellation and its mirror. The first state of each orbit is
//! completed (or seeded with the standard square when it is `z = 1`); the
//! rest of the orbit is obtained by transposing and permuting rows and
//! columns of that square.

use std::collections::{HashMap, VecDeque};

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::complete::{complete_with, CompletionOptions};
use super::{standard_square, LatinSquare, REMOVAL_THRESHOLD};
use crate::constellation::{Constellation, ConstellationDesc, ConstellationKind};
use crate::error::{Error, Result};
use crate::gaussian::{GaussianInt, GaussianRational};
use crate::scalar::Scalar;
use crate::singular_fades::{constraints_for, SingularFadeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Generator {
    Invert,
    Rotate,
    Reflect,
}

const GENERATORS: [Generator; 3] = [Generator::Invert, Generator::Rotate, Generator::Reflect];

#[derive(Clone, Debug)]
pub struct LatinSquareBank<T: Scalar> {
    constellation: Constellation<T>,
    fades: SingularFadeSet<T>,
    squares: Vec<LatinSquare>,
}

/// Serialized bank entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankEntry {
    pub fade_state: String,
    pub t: usize,
    #[serde(rename = "M")]
    pub order: usize,
    pub cells: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankFile {
    pub constellation: ConstellationDesc,
    pub entries: Vec<BankEntry>,
}

impl<T: Scalar> LatinSquareBank<T> {
    pub fn build(c: &Constellation<T>, t_max: usize) -> Result<Self> {
        Self::build_with(c, &CompletionOptions::new(t_max))
    }

    pub fn build_with(c: &Constellation<T>, opts: &CompletionOptions) -> Result<Self> {
        let fades = SingularFadeSet::enumerate(c);
        let images = image_tables(c, &fades)?;
        let reps = orbit_representatives(&images, fades.len());

        let one = fades.index_of_value(Complex::new(T::one(), T::zero()));
        let seeded: Vec<(usize, LatinSquare)> = reps
            .par_iter()
            .map(|&rep| {
                if Some(rep) == one {
                    let sq = standard_square(c)?;
                    if sq.removes(c, fades.get(rep).value()) {
                        return Ok((rep, sq));
                    }
                }
                let cs = constraints_for(c, fades.get(rep))?;
                Ok((rep, complete_with(&cs, opts)?))
            })
            .collect::<Result<_>>()?;

        let mut squares: Vec<Option<LatinSquare>> = vec![None; fades.len()];
        for (rep, sq) in seeded {
            let mut queue = VecDeque::from([rep]);
            squares[rep] = Some(sq);
            while let Some(i) = queue.pop_front() {
                for (g, table) in GENERATORS.iter().zip(&images) {
                    let j = table[i];
                    if squares[j].is_none() {
                        let sq = apply(c, *g, squares[i].as_ref().expect("assigned"));
                        squares[j] = Some(sq);
                        queue.push_back(j);
                    }
                }
            }
        }
        let squares = squares.into_iter().collect::<Option<Vec<_>>>().expect("orbits cover the set");
        let bank = Self { constellation: c.clone(), fades, squares };
        bank.verify()?;
        Ok(bank)
    }

    pub fn constellation(&self) -> &Constellation<T> {
        &self.constellation
    }

    pub fn fades(&self) -> &SingularFadeSet<T> {
        &self.fades
    }

    pub fn len(&self) -> usize {
        self.squares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.squares.is_empty()
    }

    /// Square for the fade state with this index in [`Self::fades`].
    pub fn square(&self, index: usize) -> &LatinSquare {
        &self.squares[index]
    }

    pub fn squares(&self) -> &[LatinSquare] {
        &self.squares
    }

    pub fn square_for_exact(&self, z: &GaussianRational) -> Option<&LatinSquare> {
        self.fades.index_of_exact(z).map(|i| &self.squares[i])
    }

    pub fn square_for_value(&self, z: Complex<T>) -> Option<&LatinSquare> {
        self.fades.index_of_value(z).map(|i| &self.squares[i])
    }

    /// Minimum cluster distance of entry `index` at its own fade state,
    /// computed exactly for lattice constellations.
    pub fn margin(&self, index: usize) -> T {
        let fade = self.fades.get(index);
        let sq = &self.squares[index];
        match fade.exact() {
            Some(q) if self.constellation.lattice().is_some() => {
                sq.min_cluster_distance_exact(&self.constellation, q).expect("lattice constellation")
            }
            _ => sq.min_cluster_distance(&self.constellation, fade.value()),
        }
    }

    /// Checks every entry: order, Latin property (by construction) and removal.
    pub fn verify(&self) -> Result<()> {
        let n = self.constellation.size();
        (0..self.len()).into_par_iter().try_for_each(|i| {
            let sq = &self.squares[i];
            if sq.order() != n {
                return Err(Error::MalformedSquare(format!("entry {} has order {}", self.fades.get(i), sq.order())));
            }
            if self.margin(i).to_f64_lossy() <= REMOVAL_THRESHOLD {
                return Err(Error::NotRemoved(self.fades.get(i).label()));
            }
            Ok(())
        })
    }

    /// Number of entries using more than `M` symbols.
    pub fn entries_above_order(&self) -> usize {
        self.squares.iter().filter(|s| s.symbols() > s.order()).count()
    }

    pub fn max_symbols(&self) -> usize {
        self.squares.iter().map(LatinSquare::symbols).max().unwrap_or(0)
    }

    pub fn to_file(&self) -> BankFile {
        let entries = self
            .fades
            .iter()
            .zip(&self.squares)
            .map(|(f, sq)| BankEntry {
                fade_state: f.label(),
                t: sq.symbols(),
                order: sq.order(),
                cells: sq.cells().to_vec(),
            })
            .collect();
        BankFile { constellation: self.constellation.describe(), entries }
    }

    /// Rebuilds a bank from its serialized form; every fade state must
    /// appear exactly once and every square must verify.
    pub fn from_file(file: &BankFile) -> Result<Self> {
        let c: Constellation<T> = file.constellation.build()?;
        let fades = SingularFadeSet::enumerate(&c);
        let by_label: HashMap<String, usize> = fades.iter().enumerate().map(|(i, f)| (f.label(), i)).collect();
        let mut squares: Vec<Option<LatinSquare>> = vec![None; fades.len()];
        for e in &file.entries {
            let i = match by_label.get(&e.fade_state) {
                Some(&i) => i,
                None => lookup_parsed(&fades, &e.fade_state)?,
            };
            let sq = LatinSquare::from_cells(e.order, e.cells.clone())?;
            if sq.symbols() != e.t {
                return Err(Error::MalformedSquare(format!("entry {} declares t = {}", e.fade_state, e.t)));
            }
            if squares[i].replace(sq).is_some() {
                return Err(Error::MalformedSquare(format!("fade state {} listed twice", e.fade_state)));
            }
        }
        if let Some(missing) = squares.iter().position(Option::is_none) {
            return Err(Error::MalformedSquare(format!("no entry for fade state {}", fades.get(missing))));
        }
        let squares = squares.into_iter().map(Option::unwrap).collect();
        let bank = Self { constellation: c, fades, squares };
        bank.verify()?;
        Ok(bank)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("bank serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: BankFile = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_file(&file)
    }
}

fn lookup_parsed<T: Scalar>(fades: &SingularFadeSet<T>, label: &str) -> Result<usize> {
    let not_singular = || Error::NotSingular(label.to_string());
    if let Ok(q) = label.parse::<GaussianRational>() {
        return fades.index_of_exact(&q).ok_or_else(not_singular);
    }
    let z = parse_complex::<T>(label).ok_or_else(|| Error::Parse(label.to_string()))?;
    fades.index_of_value(z).ok_or_else(not_singular)
}

/// Parses `a+bi` / `a-bi` with decimal parts.
/// Parses `a+bi`, `a-bi`, `bi` or a plain real `a`.
pub fn parse_complex<T: Scalar>(s: &str) -> Option<Complex<T>> {
    let s = s.trim();
    let Some(s) = s.strip_suffix('i') else {
        return s.parse::<f64>().ok().map(|re| Complex::new(T::of(re), T::zero()));
    };
    let split = s.char_indices().skip(1).filter(|&(i, ch)| (ch == '+' || ch == '-') && !s[..i].ends_with('e')).last();
    let (re, im): (f64, f64) = match split {
        Some((k, _)) => (s[..k].parse().ok()?, s[k..].parse().ok()?),
        None => (
            0.0,
            if matches!(s, "" | "+") {
                1.0
            } else if s == "-" {
                -1.0
            } else {
                s.parse().ok()?
            },
        ),
    };
    Some(Complex::new(T::of(re), T::of(im)))
}

/// The unit `ω` with `ω·S = S` used by [`Generator::Rotate`].
fn rotation<T: Scalar>(c: &Constellation<T>) -> Complex<T> {
    match c.kind() {
        ConstellationKind::Qam => Complex::new(T::zero(), T::one()),
        ConstellationKind::Pam => Complex::new(-T::one(), T::zero()),
        ConstellationKind::Psk => Complex::from_polar(T::one(), T::TAU() / T::of(c.size() as f64)),
    }
}

fn apply<T: Scalar>(c: &Constellation<T>, g: Generator, sq: &LatinSquare) -> LatinSquare {
    match g {
        Generator::Invert => sq.transpose(),
        Generator::Rotate => sq.rotate(c, rotation(c)).expect("rotation is a symmetry"),
        Generator::Reflect => sq.reflect_unchecked(c),
    }
}

fn image_exact(kind: ConstellationKind, g: Generator, q: &GaussianRational) -> Result<GaussianRational> {
    let unit = match kind {
        ConstellationKind::Qam => GaussianInt::J,
        _ => GaussianInt::new(-1, 0),
    };
    Ok(match (g, kind) {
        (Generator::Invert, _) => q.recip()?,
        (Generator::Rotate, _) => q.mul_int(unit),
        (Generator::Reflect, ConstellationKind::Qam) => q.conj().mul_int(GaussianInt::J),
        (Generator::Reflect, _) => q.conj(),
    })
}

fn image_value<T: Scalar>(c: &Constellation<T>, g: Generator, z: Complex<T>) -> Complex<T> {
    match g {
        Generator::Invert => z.inv(),
        Generator::Rotate => rotation(c) * z,
        Generator::Reflect => LatinSquare::reflected_fade(c.kind(), z),
    }
}

/// `images[g][i]` = index of the image of state `i` under generator `g`.
fn image_tables<T: Scalar>(c: &Constellation<T>, fades: &SingularFadeSet<T>) -> Result<Vec<Vec<usize>>> {
    GENERATORS
        .iter()
        .map(|&g| {
            fades
                .iter()
                .map(|f| {
                    let idx = match f.exact() {
                        Some(q) => fades.index_of_exact(&image_exact(c.kind(), g, q)?),
                        None => fades.index_of_value(image_value(c, g, f.value())),
                    };
                    idx.ok_or_else(|| Error::NotSingular(format!("image of {f} under {g:?}")))
                })
                .collect()
        })
        .collect()
}

/// Smallest index of each orbit, in increasing order.
fn orbit_representatives(images: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut seen = vec![false; n];
    let mut reps = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        reps.push(start);
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for table in images {
                let j = table[i];
                if !std::mem::replace(&mut seen[j], true) {
                    stack.push(j);
                }
            }
        }
    }
    reps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::Normalization;

    #[test]
    fn qam4_bank() {
        let c = Constellation::<f64>::qam(4, Normalization::Lattice).unwrap();
        let bank = LatinSquareBank::build(&c, 8).unwrap();
        assert_eq!(bank.len(), 12);
        assert_eq!(bank.entries_above_order(), 8);
        assert_eq!(bank.max_symbols(), 5);
    }

    #[test]
    fn pam_and_psk_banks() {
        for p in [2, 4, 8] {
            let c = Constellation::<f64>::pam(p, Normalization::Unit).unwrap();
            let bank = LatinSquareBank::build(&c, 2 * p).unwrap();
            assert_eq!(bank.len(), bank.fades().len());
        }
        for m in [4, 8] {
            let c = Constellation::<f64>::psk(m).unwrap();
            let bank = LatinSquareBank::build(&c, 2 * m).unwrap();
            assert_eq!(bank.len() as u64, crate::singular_fades::count_psk(m).unwrap());
        }
    }

    #[test]
    fn inversion_is_transpose() {
        let c = Constellation::<f64>::qam(4, Normalization::Lattice).unwrap();
        let bank = LatinSquareBank::build(&c, 8).unwrap();
        for (i, f) in bank.fades().iter().enumerate() {
            let j = bank.fades().index_of_exact(&f.exact().unwrap().recip().unwrap()).unwrap();
            assert!(bank.square(i).transpose().removes(&c, bank.fades().get(j).value()));
        }
    }

    #[test]
    fn json_round_trip() {
        let c = Constellation::<f64>::psk(4).unwrap();
        let bank = LatinSquareBank::build(&c, 8).unwrap();
        let json = bank.to_json();
        let back = LatinSquareBank::<f64>::from_json(&json).unwrap();
        assert_eq!(back.squares(), bank.squares());
        assert_eq!(back.to_json(), json);

        let mut file = bank.to_file();
        file.entries.pop();
        assert!(LatinSquareBank::<f64>::from_file(&file).is_err());
        let mut file = bank.to_file();
        file.entries[0].cells = file.entries[1].cells.clone();
        file.entries[0].t = file.entries[1].t;
        assert!(LatinSquareBank::<f64>::from_file(&file).is_err());
    }

    #[test]
    fn parse_complex_forms() {
        let z = parse_complex::<f64>("1.5-0.25i").unwrap();
        assert_eq!(z, Complex::new(1.5, -0.25));
        assert_eq!(parse_complex::<f64>("-1e-3+2i").unwrap(), Complex::new(-1e-3, 2.0));
        assert!(parse_complex::<f64>("abc").is_none());
        assert_eq!(parse_complex::<f64>("-2").unwrap(), Complex::new(-2.0, 0.0));
        assert_eq!(parse_complex::<f64>("0.5i").unwrap(), Complex::new(0.0, 0.5));
        assert_eq!(parse_complex::<f64>("-i").unwrap(), Complex::new(0.0, -1.0));
    }
}
