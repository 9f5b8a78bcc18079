//! Completion of a constrained partially-filled Latin square.
//!
//! Every constraint class and every unconstrained cell is a vertex of a
//! conflict graph (two vertices conflict when they share a row or a
//! column); a filling with `t` symbols is a proper `t`-colouring. The search
//! is DSATUR-style backtracking with forward checking, a Hall-type pruning
//! rule per row and column, and iterative deepening on `t`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::constraints::ConstraintSet;
use super::LatinSquare;
use crate::error::{Error, Result};

type Mask = u128;

/// Largest symbol count the bit-set search supports.
pub const MAX_SYMBOLS: usize = Mask::BITS as usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompletionOptions {
    pub t_max: usize,
    /// Search nodes allowed per attempt before giving up on that attempt.
    pub node_budget: u64,
    /// Attempts per symbol count; attempts after the first shuffle the
    /// vertex tie-break order with a fixed seed.
    pub attempts: u32,
}

impl CompletionOptions {
    pub fn new(t_max: usize) -> Self {
        Self { t_max, node_budget: 200_000, attempts: 6 }
    }
}

/// Fills `constraints` with the fewest symbols found, up to `t_max`.
pub fn complete(constraints: &ConstraintSet, t_max: usize) -> Result<LatinSquare> {
    complete_with(constraints, &CompletionOptions::new(t_max))
}

pub fn complete_with(constraints: &ConstraintSet, opts: &CompletionOptions) -> Result<LatinSquare> {
    let n = constraints.order();
    let t_max = opts.t_max.min(MAX_SYMBOLS).min(n * n);
    if t_max < n {
        return Err(Error::Infeasible { t_max: opts.t_max, attempted: opts.t_max });
    }
    let graph = Graph::new(constraints);
    for t in n..=t_max {
        for attempt in 0..opts.attempts.max(1) {
            let mut search = Search::new(&graph, t, attempt, opts.node_budget);
            match search.run() {
                Outcome::Found => {
                    let sq = LatinSquare::from_cells(n, search.cells())?;
                    debug_assert!(graph.respects(constraints, &sq));
                    return Ok(sq);
                }
                // the whole tree was explored, more attempts cannot help
                Outcome::Exhausted => break,
                Outcome::OutOfBudget => {}
            }
        }
    }
    Err(Error::Infeasible { t_max: opts.t_max, attempted: t_max })
}

struct Graph {
    order: usize,
    vertices: Vec<Vec<(usize, usize)>>,
    /// Vertex ids present in each row / column.
    row_members: Vec<Vec<usize>>,
    col_members: Vec<Vec<usize>>,
}

impl Graph {
    fn new(cs: &ConstraintSet) -> Self {
        let n = cs.order();
        let mut covered = vec![false; n * n];
        let mut vertices: Vec<Vec<(usize, usize)>> = Vec::new();
        for class in cs.multi_classes() {
            for &(r, c) in class {
                covered[r * n + c] = true;
            }
            vertices.push(class.clone());
        }
        for (i, _) in covered.iter().enumerate().filter(|(_, c)| !**c) {
            vertices.push(vec![(i / n, i % n)]);
        }
        let mut row_members = vec![Vec::new(); n];
        let mut col_members = vec![Vec::new(); n];
        for (v, cells) in vertices.iter().enumerate() {
            for &(r, c) in cells {
                row_members[r].push(v);
                col_members[c].push(v);
            }
        }
        Self { order: n, vertices, row_members, col_members }
    }

    fn respects(&self, cs: &ConstraintSet, sq: &LatinSquare) -> bool {
        cs.classes().iter().all(|class| class.iter().all(|&(r, c)| sq.get(r, c) == sq.get(class[0].0, class[0].1)))
    }
}

enum Outcome {
    Found,
    Exhausted,
    OutOfBudget,
}

struct Search<'g> {
    g: &'g Graph,
    full: Mask,
    row_used: Vec<Mask>,
    col_used: Vec<Mask>,
    color: Vec<Option<usize>>,
    /// Tie-break rank of each vertex.
    rank: Vec<usize>,
    nodes: u64,
    budget: u64,
    max_used: usize,
}

impl<'g> Search<'g> {
    fn new(g: &'g Graph, t: usize, attempt: u32, budget: u64) -> Self {
        let nv = g.vertices.len();
        let mut rank: Vec<usize> = (0..nv).collect();
        if attempt > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + attempt as u64);
            rank.shuffle(&mut rng);
        }
        let full = if t == MAX_SYMBOLS { Mask::MAX } else { (1 << t) - 1 };
        Self {
            g,
            full,
            row_used: vec![0; g.order],
            col_used: vec![0; g.order],
            color: vec![None; nv],
            rank,
            nodes: 0,
            budget,
            max_used: 0,
        }
    }

    fn forbidden(&self, v: usize) -> Mask {
        self.g.vertices[v].iter().fold(0, |m, &(r, c)| m | self.row_used[r] | self.col_used[c])
    }

    fn domain(&self, v: usize) -> Mask {
        self.full & !self.forbidden(v)
    }

    fn set(&mut self, v: usize, col: Option<usize>) {
        let bit = match col.or(self.color[v]) {
            Some(k) => 1 << k,
            None => return,
        };
        for &(r, c) in &self.g.vertices[v] {
            self.row_used[r] ^= bit;
            self.col_used[c] ^= bit;
        }
        self.color[v] = col;
    }

    /// Hall-type check: the uncoloured cells of a line need distinct
    /// symbols, so the union of their domains must be large enough.
    fn lines_feasible(&self) -> bool {
        let check = |members: &Vec<usize>| {
            let mut union: Mask = 0;
            let mut open = 0u32;
            for &v in members {
                if self.color[v].is_none() {
                    union |= self.domain(v);
                    open += 1;
                }
            }
            union.count_ones() >= open
        };
        self.g.row_members.iter().all(check) && self.g.col_members.iter().all(check)
    }

    /// Most constrained uncoloured vertex, or `Err(())` on a wipe-out.
    fn select(&self) -> std::result::Result<Option<usize>, ()> {
        let mut best: Option<(u32, usize, usize, usize)> = None;
        for v in 0..self.g.vertices.len() {
            if self.color[v].is_some() {
                continue;
            }
            let size = self.domain(v).count_ones();
            if size == 0 {
                return Err(());
            }
            let key = (size, usize::MAX - self.g.vertices[v].len(), self.rank[v], v);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
        Ok(best.map(|b| b.3))
    }

    fn run(&mut self) -> Outcome {
        match self.descend() {
            Some(true) => Outcome::Found,
            Some(false) => Outcome::Exhausted,
            None => Outcome::OutOfBudget,
        }
    }

    /// `Some(true)` found, `Some(false)` subtree exhausted, `None` budget hit.
    fn descend(&mut self) -> Option<bool> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return None;
        }
        let v = match self.select() {
            Err(()) => return Some(false),
            Ok(None) => return Some(true),
            Ok(Some(v)) => v,
        };
        if !self.lines_feasible() {
            return Some(false);
        }
        let domain = self.domain(v);
        // symbols are interchangeable: never open more than one new symbol
        let limit = (self.max_used + 1).min(Mask::BITS as usize);
        let saved_max = self.max_used;
        for k in 0..limit {
            if domain & (1 << k) == 0 {
                continue;
            }
            self.set(v, Some(k));
            self.max_used = saved_max.max(k + 1);
            let res = self.descend();
            if res != Some(false) {
                return res;
            }
            self.set(v, None);
            self.max_used = saved_max;
        }
        Some(false)
    }

    fn cells(&self) -> Vec<usize> {
        let n = self.g.order;
        let mut out = vec![0; n * n];
        for (v, cells) in self.g.vertices.iter().enumerate() {
            let k = self.color[v].expect("complete colouring");
            for &(r, c) in cells {
                out[r * n + c] = k;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{Constellation, Normalization};
    use crate::gaussian::GaussianRational;
    use crate::singular_fades::{constraints_for_exact, SingularFadeSet};

    #[test]
    fn pam4_at_one_needs_four_symbols() {
        let c = Constellation::<f64>::pam(4, Normalization::Lattice).unwrap();
        let cs = constraints_for_exact(&c, &GaussianRational::one()).unwrap();
        let sq = complete(&cs, 4).unwrap();
        assert_eq!(sq.symbols(), 4);
        assert!(sq.removes(&c, num_complex::Complex::new(1.0, 0.0)));
    }

    #[test]
    fn qam16_at_one_needs_sixteen() {
        let c = Constellation::<f64>::qam(16, Normalization::Lattice).unwrap();
        let cs = constraints_for_exact(&c, &GaussianRational::one()).unwrap();
        let sq = complete(&cs, 16).unwrap();
        assert_eq!(sq.symbols(), 16);
        assert!(sq.min_cluster_distance_exact(&c, &GaussianRational::one()).unwrap() > 0.0);
    }

    // Of the 576 Latin squares of order 4, none removes ±1±j or 1/(±1±j)
    // for 4-QAM (exhaustive check), so those states need a fifth symbol.
    #[test]
    fn qam4_states_need_four_or_five() {
        let c = Constellation::<f64>::qam(4, Normalization::Lattice).unwrap();
        for s in SingularFadeSet::enumerate(&c).iter() {
            let cs = constraints_for_exact(&c, s.exact().unwrap()).unwrap();
            let sq = complete(&cs, 8).unwrap();
            let want = if (s.value().norm() - 1.0).abs() < 1e-12 { 4 } else { 5 };
            assert_eq!(sq.symbols(), want, "{s}");
            assert!(sq.removes(&c, s.value()));
        }
    }

    #[test]
    fn no_order_four_square_removes_one_plus_j() {
        let c = Constellation::<f64>::qam(4, Normalization::Lattice).unwrap();
        let z = num_complex::Complex::new(1.0, 1.0);
        let perms = permutations(4);
        let mut latin = 0;
        for a in &perms {
            for b in &perms {
                for d in &perms {
                    for e in &perms {
                        let cells: Vec<usize> = [a, b, d, e].iter().flat_map(|r| r.iter().copied()).collect();
                        if let Ok(sq) = LatinSquare::from_cells(4, cells) {
                            latin += 1;
                            assert!(!sq.removes(&c, z));
                        }
                    }
                }
            }
        }
        assert_eq!(latin, 576);
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..n {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn empty_constraints_give_a_latin_square() {
        let cs = ConstraintSet::new(5, vec![]).unwrap();
        assert_eq!(complete(&cs, 5).unwrap().symbols(), 5);
    }

    #[test]
    fn infeasible_budget_is_reported() {
        let cs = ConstraintSet::new(3, vec![vec![(0, 0), (1, 1)]]).unwrap();
        assert!(matches!(complete(&cs, 2), Err(Error::Infeasible { .. })));
        assert_eq!(complete(&cs, 3).unwrap().symbols(), 3);
    }
}
