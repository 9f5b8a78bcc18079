//! Partition of the fade-state plane.
//!
//! Near a singular fade state `h` the pair distance that collapses is
//! `|ď_l|·|z − h|`, so the relay uses the square of the state minimizing that
//! quantity. Boundaries between two states are Apollonius circles (or lines
//! when the weights agree). Far from the origin, and near it, every
//! exclusive-law map does equally well: that is the clustering-independent
//! (CI) region, where the standard square is used.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::constellation::ConstellationKind;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::singular_fades::{SingularFade, SingularFadeSet};

/// Membership in the clustering-independent region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CiRegion {
    Exterior,
    Interior,
    No,
}

fn qam_side(m: usize) -> Result<usize> {
    let s = (m as f64).sqrt().round() as usize;
    if m < 4 || s * s != m || !m.is_power_of_two() {
        return Err(Error::InvalidSize { kind: "QAM", size: m });
    }
    Ok(s)
}

/// Centres of the unit circles bounding the exterior CI region: the points
/// `±(√M−1) + jx` and `x ± j(√M−1)` for integer `|x| <= √M − 1`.
pub fn ci_ext_centers<T: Scalar>(m: usize) -> Result<Vec<Complex<T>>> {
    let s = qam_side(m)? as i64 - 1;
    let mut out = Vec::with_capacity(8 * s as usize);
    for x in -s..=s {
        out.push((s, x));
        out.push((-s, x));
    }
    for x in -(s - 1)..=(s - 1) {
        out.push((x, s));
        out.push((x, -s));
    }
    Ok(out.into_iter().map(|(a, b)| Complex::new(T::of(a as f64), T::of(b as f64))).collect())
}

fn inf_norm<T: Scalar>(z: Complex<T>) -> T {
    z.re.abs().max(z.im.abs())
}

/// Outside the outer envelope of the unit circles: beyond the outer
/// square and clear of every circle.
fn outside_envelope<T: Scalar>(w: Complex<T>, side: usize, centers: &[Complex<T>]) -> bool {
    let r = inf_norm(w);
    if r >= T::of(side as f64) {
        return true;
    }
    r > T::of(side as f64 - 1.0) && centers.iter().all(|&c| (w - c).norm_sqr() >= T::one())
}

/// Classifies `z` for square `M`-QAM. Circle boundaries count as inside
/// the CI region; `|z| = 1` belongs to the interior branch and `z = 0` is
/// interior by convention.
pub fn in_ci_region<T: Scalar>(z: Complex<T>, m: usize) -> Result<CiRegion> {
    let side = qam_side(m)?;
    let centers = ci_ext_centers::<T>(m)?;
    Ok(ci_region_with(z, side, &centers))
}

fn ci_region_with<T: Scalar>(z: Complex<T>, side: usize, centers: &[Complex<T>]) -> CiRegion {
    let r2 = z.norm_sqr();
    if r2 > T::one() {
        return if outside_envelope(z, side, centers) { CiRegion::Exterior } else { CiRegion::No };
    }
    let m = T::of((side * side) as f64);
    let inner = T::one() / ((T::of(2.0) * m).sqrt() + T::one() - T::SQRT_2());
    if r2 == T::zero() || r2.sqrt() <= inner || outside_envelope(z.inv(), side, centers) {
        CiRegion::Interior
    } else {
        CiRegion::No
    }
}

/// The analytic boundary between the regions of two fade states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CurveKind<T> {
    Circle {
        center: Complex<T>,
        radius: T,
    },
    /// `a·x + b·y = c`
    Line {
        a: T,
        b: T,
        c: T,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionCurve<T: Scalar> {
    pub z1: Complex<T>,
    pub z2: Complex<T>,
    /// `|ď_l|` of each endpoint.
    pub w1: T,
    pub w2: T,
    pub kind: CurveKind<T>,
}

impl<T: Scalar> TransitionCurve<T> {
    /// Locus of `w1·|z − z1| = w2·|z − z2|`.
    pub fn new(z1: Complex<T>, w1: T, z2: Complex<T>, w2: T) -> Result<Self> {
        if (z1 - z2).norm() <= T::merge_tolerance() {
            return Err(Error::SameFadeState(crate::singular_fades::format_complex(z1)));
        }
        if w1 <= T::zero() || w2 <= T::zero() {
            return Err(Error::Config("representative difference must be nonzero".into()));
        }
        let (a, b) = (w1 * w1, w2 * w2);
        let two = T::of(2.0);
        let kind = if (a - b).abs() <= T::merge_tolerance() * a.max(b) {
            let d = z1 - z2;
            CurveKind::Line { a: d.re, b: d.im, c: (z1.norm_sqr() - z2.norm_sqr()) / two }
        } else {
            let center = (z1 * a - z2 * b) / (a - b);
            let radius = ((a * b).sqrt() * (z1 - z2).norm()) / (a - b).abs();
            CurveKind::Circle { center, radius }
        };
        Ok(Self { z1, z2, w1, w2, kind })
    }

    /// Curve between two singular fade states, using each one's
    /// representative pair with the smallest `|d_l|`.
    pub fn between(f1: &SingularFade<T>, f2: &SingularFade<T>) -> Result<Self> {
        Self::new(f1.value(), f1.weight(), f2.value(), f2.weight())
    }

    /// `w1·|z − z1| − w2·|z − z2|`: negative on the side of `z1`.
    pub fn gap(&self, z: Complex<T>) -> T {
        self.w1 * (z - self.z1).norm() - self.w2 * (z - self.z2).norm()
    }

    /// Euclidean distance from `z` to the curve.
    pub fn distance_to(&self, z: Complex<T>) -> T {
        match self.kind {
            CurveKind::Circle { center, radius } => ((z - center).norm() - radius).abs(),
            CurveKind::Line { a, b, c } => (a * z.re + b * z.im - c).abs() / a.hypot(b),
        }
    }

    /// Point of the curve at parameter `s`: the angle for circles, the
    /// signed arc length from the foot of the origin for lines.
    pub fn point_at(&self, s: T) -> Complex<T> {
        match self.kind {
            CurveKind::Circle { center, radius } => center + Complex::from_polar(radius, s),
            CurveKind::Line { a, b, c } => {
                let n2 = a * a + b * b;
                let foot = Complex::new(a * c / n2, b * c / n2);
                let dir = Complex::new(-b, a) / n2.sqrt();
                foot + dir * s
            }
        }
    }

    /// Parameter of the point of the curve closest to `z`.
    pub fn parameter_of(&self, z: Complex<T>) -> T {
        match self.kind {
            CurveKind::Circle { center, .. } => (z - center).arg(),
            CurveKind::Line { a, b, .. } => {
                let dir = Complex::new(-b, a) / a.hypot(b);
                z.re * dir.re + z.im * dir.im
            }
        }
    }

    /// `n` points spread over the whole circle, or over `[-span, span]`
    /// around the foot point of a line.
    pub fn sample(&self, n: usize, span: T) -> Vec<Complex<T>> {
        let n = n.max(1);
        (0..n)
            .map(|i| {
                let u = T::of(i as f64 / n as f64);
                match self.kind {
                    CurveKind::Circle { .. } => self.point_at(T::TAU() * u),
                    CurveKind::Line { .. } => self.point_at(span * (T::of(2.0) * u - T::one())),
                }
            })
            .collect()
    }
}

/// Index of the state minimizing `|ď_l|·|z − h|`; exact ties go to the
/// earlier state in canonical order.
pub fn classify<T: Scalar>(z: Complex<T>, fades: &SingularFadeSet<T>) -> usize {
    let mut best = (T::infinity(), 0);
    for (i, f) in fades.iter().enumerate() {
        let w = f.weight();
        let d = w * w * (z - f.value()).norm_sqr();
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// What the relay does at a given fade state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// Inside the CI region: any exclusive-law map, the standard square is used.
    Ci(CiRegion),
    /// Use the square of this singular fade state.
    Fade(usize),
}

/// Runtime quantizer: CI test (square QAM only) followed by [`classify`].
#[derive(Clone, Debug)]
pub struct Quantizer<T: Scalar> {
    fades: SingularFadeSet<T>,
    ci: Option<(usize, Vec<Complex<T>>)>,
}

impl<T: Scalar> Quantizer<T> {
    pub fn new(fades: SingularFadeSet<T>) -> Self {
        let ci = (fades.kind() == ConstellationKind::Qam).then(|| {
            let m = fades.constellation_size();
            (qam_side(m).expect("QAM size"), ci_ext_centers(m).expect("QAM size"))
        });
        Self { fades, ci }
    }

    pub fn fades(&self) -> &SingularFadeSet<T> {
        &self.fades
    }

    pub fn ci_region(&self, z: Complex<T>) -> CiRegion {
        match &self.ci {
            Some((side, centers)) => ci_region_with(z, *side, centers),
            None => CiRegion::No,
        }
    }

    pub fn classify(&self, z: Complex<T>) -> usize {
        classify(z, &self.fades)
    }

    pub fn select(&self, z: Complex<T>) -> Selection {
        match self.ci_region(z) {
            CiRegion::No => Selection::Fade(self.classify(z)),
            r => Selection::Ci(r),
        }
    }
}

/// A rectangular sampling of the plane at cell centres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec<T> {
    pub re: (T, T),
    pub im: (T, T),
    pub nx: usize,
    pub ny: usize,
}

impl<T: Scalar> GridSpec<T> {
    pub fn square(lo: T, hi: T, n: usize) -> Self {
        Self { re: (lo, hi), im: (lo, hi), nx: n, ny: n }
    }

    pub fn cell_width(&self) -> T {
        (self.re.1 - self.re.0) / T::of(self.nx as f64)
    }

    pub fn cell_height(&self) -> T {
        (self.im.1 - self.im.0) / T::of(self.ny as f64)
    }

    /// Centre of cell `(ix, iy)`; `iy` grows with the imaginary part.
    pub fn point(&self, ix: usize, iy: usize) -> Complex<T> {
        let half = T::of(0.5);
        Complex::new(
            self.re.0 + (T::of(ix as f64) + half) * self.cell_width(),
            self.im.0 + (T::of(iy as f64) + half) * self.cell_height(),
        )
    }
}

/// Grid classification: the chosen fade state and the CI flag per cell,
/// stored row by row with `iy` major.
#[derive(Clone, Debug)]
pub struct RegionGrid<T: Scalar> {
    pub spec: GridSpec<T>,
    pub labels: Vec<usize>,
    pub ci: Vec<CiRegion>,
}

impl<T: Scalar> RegionGrid<T> {
    pub fn classify(q: &Quantizer<T>, spec: GridSpec<T>) -> Self {
        let rows: Vec<(Vec<usize>, Vec<CiRegion>)> = (0..spec.ny)
            .into_par_iter()
            .map(|iy| {
                (0..spec.nx)
                    .map(|ix| {
                        let z = spec.point(ix, iy);
                        (q.classify(z), q.ci_region(z))
                    })
                    .unzip()
            })
            .collect();
        let (labels, ci): (Vec<Vec<usize>>, Vec<Vec<CiRegion>>) = rows.into_iter().unzip();
        Self { spec, labels: labels.concat(), ci: ci.concat() }
    }

    pub fn label(&self, ix: usize, iy: usize) -> usize {
        self.labels[iy * self.spec.nx + ix]
    }

    /// Pairs of 4-adjacent cells with different labels, as
    /// `((ix, iy), (ix', iy'))`.
    pub fn boundary_pairs(&self) -> Vec<((usize, usize), (usize, usize))> {
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let mut out = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let here = self.label(ix, iy);
                if ix + 1 < nx && self.label(ix + 1, iy) != here {
                    out.push(((ix, iy), (ix + 1, iy)));
                }
                if iy + 1 < ny && self.label(ix, iy + 1) != here {
                    out.push(((ix, iy), (ix, iy + 1)));
                }
            }
        }
        out
    }

    /// Labels of regions 4-adjacent to the region of `h`.
    pub fn neighbors(&self, h: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for ((ax, ay), (bx, by)) in self.boundary_pairs() {
            let (a, b) = (self.label(ax, ay), self.label(bx, by));
            if a == h {
                out.insert(b);
            } else if b == h {
                out.insert(a);
            }
        }
        out
    }

    /// Distinct adjacent label pairs `(min, max)` with the cell pairs that
    /// witness them.
    pub fn adjacencies(&self) -> HashMap<(usize, usize), Vec<Complex<T>>> {
        let mut out: HashMap<(usize, usize), Vec<Complex<T>>> = HashMap::new();
        let half = T::of(0.5);
        for ((ax, ay), (bx, by)) in self.boundary_pairs() {
            let (a, b) = (self.label(ax, ay), self.label(bx, by));
            let mid = (self.spec.point(ax, ay) + self.spec.point(bx, by)) * half;
            out.entry((a.min(b), a.max(b))).or_default().push(mid);
        }
        out
    }
}

/// States whose regions touch the region of `h` on the given grid.
pub fn region_neighbors<T: Scalar>(h: usize, fades: &SingularFadeSet<T>, spec: GridSpec<T>) -> BTreeSet<usize> {
    let q = Quantizer::new(fades.clone());
    RegionGrid::classify(&q, spec).neighbors(h)
}

/// Number of states with `|h| > 1` and `0 <= arg h <= π/4`; exact for
/// lattice sets.
pub fn count_sector<T: Scalar>(fades: &SingularFadeSet<T>) -> usize {
    fades
        .iter()
        .filter(|f| match f.exact() {
            Some(q) => {
                let v = q.scaled_value();
                q.cmp_unit_circle().is_gt() && v.im >= 0 && v.re >= v.im
            }
            None => {
                let z = f.value();
                let tol = T::merge_tolerance();
                z.norm() > T::one() + tol && z.im >= -tol && z.re - z.im >= -tol
            }
        })
        .count()
}

/// SVG of region boundaries over the grid's window: one arc or segment per
/// adjacent pair, spanning the grid cells that witness the adjacency, plus
/// the CI envelope circles for QAM.
pub fn region_svg<T: Scalar>(q: &Quantizer<T>, grid: &RegionGrid<T>, pixels: usize) -> String {
    let spec = grid.spec;
    let (x0, x1) = (spec.re.0.to_f64_lossy(), spec.re.1.to_f64_lossy());
    let (y0, y1) = (spec.im.0.to_f64_lossy(), spec.im.1.to_f64_lossy());
    let scale = pixels as f64 / (x1 - x0).max(y1 - y0);
    let px = |z: Complex<f64>| ((z.re - x0) * scale, (y1 - z.im) * scale);
    let (w, h) = ((x1 - x0) * scale, (y1 - y0) * scale);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#
    );
    let _ = writeln!(svg, r#"<defs><clipPath id="view"><rect width="{w:.3}" height="{h:.3}"/></clipPath></defs>"#);
    let _ = writeln!(svg, r##"<rect width="{w:.3}" height="{h:.3}" fill="#ffffff"/>"##);
    let _ = writeln!(svg, r#"<g clip-path="url(#view)" fill="none" stroke-width="1">"#);

    let mut pairs: Vec<_> = grid.adjacencies().into_iter().collect();
    pairs.sort_by_key(|(k, _)| *k);
    let fades = q.fades();
    for ((a, b), mids) in pairs {
        let Ok(curve) = TransitionCurve::between(fades.get(a), fades.get(b)) else { continue };
        let ts: Vec<f64> = mids.iter().map(|&m| curve.parameter_of(m).to_f64_lossy()).collect();
        let path = match curve.kind {
            CurveKind::Circle { center, radius } => {
                let (lo, hi) = angular_span(&ts);
                let c = Complex::new(center.re.to_f64_lossy(), center.im.to_f64_lossy());
                let r = radius.to_f64_lossy();
                let p0 = px(c + Complex::from_polar(r, lo));
                let p1 = px(c + Complex::from_polar(r, hi));
                let large = u8::from(hi - lo > std::f64::consts::PI);
                // y flips, so counter-clockwise in the plane is sweep 0
                format!(
                    "M {:.3} {:.3} A {:.3} {:.3} 0 {large} 0 {:.3} {:.3}",
                    p0.0,
                    p0.1,
                    r * scale,
                    r * scale,
                    p1.0,
                    p1.1
                )
            }
            CurveKind::Line { .. } => {
                let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let to64 = |z: Complex<T>| Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy());
                let p0 = px(to64(curve.point_at(T::of(lo))));
                let p1 = px(to64(curve.point_at(T::of(hi))));
                format!("M {:.3} {:.3} L {:.3} {:.3}", p0.0, p0.1, p1.0, p1.1)
            }
        };
        let _ = writeln!(
            svg,
            r##"<path d="{path}" stroke="#1f4e79" data-states="{} {}"/>"##,
            fades.get(a).label(),
            fades.get(b).label()
        );
    }

    if let Some((_, centers)) = &q.ci {
        for c in centers {
            let c = Complex::new(c.re.to_f64_lossy(), c.im.to_f64_lossy());
            let p = px(c);
            let _ = writeln!(
                svg,
                r##"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" stroke="#b22222" stroke-dasharray="4 3"/>"##,
                p.0, p.1, scale
            );
            // image of |z − c| = 1 under z -> 1/z
            let d = c.norm_sqr() - 1.0;
            if d > 1e-12 {
                let ic = px(c.conj() / d);
                let _ = writeln!(
                    svg,
                    r##"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" stroke="#b22222" stroke-dasharray="2 2"/>"##,
                    ic.0,
                    ic.1,
                    scale / d
                );
            }
        }
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}

/// Smallest arc `[lo, hi]` (hi − lo < 2π) covering all angles.
fn angular_span(ts: &[f64]) -> (f64, f64) {
    use std::f64::consts::TAU;
    let mut a: Vec<f64> = ts.iter().map(|t| t.rem_euclid(TAU)).collect();
    a.sort_by(f64::total_cmp);
    if a.len() < 2 {
        let t = a.first().copied().unwrap_or(0.0);
        return (t, t);
    }
    let mut gap = (a[0] + TAU - a[a.len() - 1], a.len() - 1);
    for i in 0..a.len() - 1 {
        let g = a[i + 1] - a[i];
        if g > gap.0 {
            gap = (g, i);
        }
    }
    let lo = a[(gap.1 + 1) % a.len()];
    let hi = a[gap.1];
    (lo, if hi < lo { hi + TAU } else { hi })
}
