//! Monte-Carlo simulation of the two-phase protocol.
//!
//! Multiple access: the relay sees `h_A·x_A + h_B·x_B + n`, jointly
//! ML-decodes the pair and maps it to a cluster symbol through a Latin
//! square. Broadcast: the symbol is sent on a `t`-point constellation; each
//! end node ML-decodes it and recovers the other node's label from its own
//! row or column of the square.
//!
//! All constellations have unit average energy and the SNR is `1/σ²` per
//! complex symbol in both phases.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, ConstellationKind, Normalization};
use crate::error::{Error, Result};
use crate::latin::{standard_square, verify, xor_square, LatinSquare, LatinSquareBank};
use crate::quantization::{Quantizer, Selection};
use crate::scalar::Scalar;

/// Small-scale fading of one link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Fading {
    Rayleigh,
    /// Rician with linear K factor (line-of-sight power over scattered power).
    Rician {
        k: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub fading: Fading,
    /// `E|h|²`.
    #[serde(default = "one")]
    pub variance: f64,
}

fn one() -> f64 {
    1.0
}

impl ChannelModel {
    pub fn rayleigh() -> Self {
        Self { fading: Fading::Rayleigh, variance: 1.0 }
    }

    pub fn rician(k: f64) -> Self {
        Self { fading: Fading::Rician { k }, variance: 1.0 }
    }

    pub fn rician_db(k_db: f64) -> Self {
        Self::rician(10f64.powf(k_db / 10.0))
    }

    pub fn validate(&self) -> Result<()> {
        let ok_var = self.variance.is_finite() && self.variance > 0.0;
        let ok_k = match self.fading {
            Fading::Rayleigh => true,
            Fading::Rician { k } => k >= 0.0 && !k.is_nan(),
        };
        if ok_var && ok_k {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid channel model {self:?}")))
        }
    }

    pub fn name(&self) -> String {
        match self.fading {
            Fading::Rayleigh => "rayleigh".into(),
            Fading::Rician { k } => format!("rician(K={:.2}dB)", 10.0 * k.log10()),
        }
    }
}

fn complex_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R, variance: T) -> Complex<T>
where
    StandardNormal: Distribution<T>,
{
    let s = (variance / T::of(2.0)).sqrt();
    Complex::new(rng.sample::<T, _>(StandardNormal) * s, rng.sample::<T, _>(StandardNormal) * s)
}

/// One fading coefficient. The line-of-sight component of a Rician link
/// has phase 0 and carries `K/(K+1)` of the power.
pub fn draw_fade<T: Scalar, R: Rng + ?Sized>(model: &ChannelModel, rng: &mut R) -> Complex<T>
where
    StandardNormal: Distribution<T>,
{
    let var = T::of(model.variance);
    match model.fading {
        Fading::Rayleigh => complex_normal(rng, var),
        Fading::Rician { k } if k.is_infinite() => Complex::new(var.sqrt(), T::zero()),
        Fading::Rician { k } => {
            let k = T::of(k);
            let los = (var * k / (k + T::one())).sqrt();
            Complex::new(los, T::zero()) + complex_normal(rng, var / (k + T::one()))
        }
    }
}

/// `argmin_{k,l} |y − h_A·x_k − h_B·x_l|`; ties go to the smaller `(k, l)`.
pub fn relay_ml_decode<T: Scalar>(
    y: Complex<T>,
    h_a: Complex<T>,
    h_b: Complex<T>,
    points: &[Complex<T>],
) -> (usize, usize) {
    let rb: Vec<Complex<T>> = points.iter().map(|&x| h_b * x).collect();
    let mut best = (T::infinity(), 0, 0);
    for (k, &xa) in points.iter().enumerate() {
        let r = y - h_a * xa;
        for (l, &b) in rb.iter().enumerate() {
            let d = (r - b).norm_sqr();
            if d < best.0 {
                best = (d, k, l);
            }
        }
    }
    (best.1, best.2)
}

fn nearest<T: Scalar>(
    y: Complex<T>,
    h: Complex<T>,
    points: &[Complex<T>],
    allowed: impl Fn(usize) -> bool,
) -> Option<usize> {
    let mut best: Option<(T, usize)> = None;
    for (i, &p) in points.iter().enumerate() {
        if !allowed(i) {
            continue;
        }
        let d = (y - h * p).norm_sqr();
        if best.is_none_or(|b| d < b.0) {
            best = Some((d, i));
        }
    }
    best.map(|b| b.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Latin square chosen per fade state.
    Adaptive,
    /// `k XOR l` at every fade state.
    Xor,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Adaptive => "adaptive-ls",
            Self::Xor => "xor",
        }
    }
}

/// Broadcast constellation used for a square with `t` symbols.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcPolicy {
    /// The end-node constellation when `t = M`, otherwise the `t` points of
    /// the odd-integer lattice closest to the origin.
    #[default]
    Lattice,
    /// `t`-PSK.
    Psk,
}

/// `t` points of `(2Z+1) + j(2Z+1)` with smallest norm (ties by angle from
/// the positive real axis), scaled to unit average energy.
pub fn lattice_points<T: Scalar>(t: usize) -> Vec<Complex<T>> {
    let r = ((t as f64).sqrt().ceil() as i64) + 1;
    let mut pts: Vec<(i64, f64, i64, i64)> = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            let (x, y) = (2 * a + 1, 2 * b + 1);
            let ang = (y as f64).atan2(x as f64).rem_euclid(std::f64::consts::TAU);
            pts.push((x * x + y * y, ang, x, y));
        }
    }
    pts.sort_by(|p, q| (p.0, p.1).partial_cmp(&(q.0, q.1)).expect("finite"));
    pts.truncate(t);
    let energy = pts.iter().map(|p| p.0 as f64).sum::<f64>() / t as f64;
    let s = 1.0 / energy.sqrt();
    pts.iter().map(|p| Complex::new(T::of(p.2 as f64 * s), T::of(p.3 as f64 * s))).collect()
}

fn psk_points<T: Scalar>(t: usize) -> Vec<Complex<T>> {
    (0..t).map(|k| Complex::from_polar(T::one(), T::TAU() * T::of(k as f64) / T::of(t as f64))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub kind: ConstellationKind,
    #[serde(rename = "M")]
    pub size: usize,
    pub scheme: Scheme,
    pub channel: ChannelModel,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bc: BcPolicy,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let Some(s) = self.snr_db.iter().find(|s| s.is_nan() || **s == f64::NEG_INFINITY) {
            return Err(Error::Config(format!("invalid SNR {s} dB")));
        }
        self.channel.validate()
    }

    pub fn constellation_name(&self) -> String {
        format!("{}-{}", self.size, self.kind)
    }
}

/// Bit errors of one protocol round in each direction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrialErrors {
    /// Bits of A's message wrongly decoded at B.
    pub a_to_b: u32,
    /// Bits of B's message wrongly decoded at A.
    pub b_to_a: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BerPoint {
    pub fn ci_halfwidth(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// 95% Wilson score interval for `errors` out of `n`.
pub fn wilson_interval(errors: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = errors as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let center = (p + z * z / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

enum Mapping<T: Scalar> {
    Adaptive { bank: Box<LatinSquareBank<T>>, quantizer: Quantizer<T>, fallback: LatinSquare },
    Fixed(LatinSquare),
}

/// A configured end-to-end link.
pub struct Simulator<T: Scalar> {
    cfg: SimConfig,
    points: Vec<Complex<T>>,
    mapping: Mapping<T>,
    /// Broadcast constellation indexed by symbol count.
    bc: Vec<Option<Vec<Complex<T>>>>,
    bits: u32,
}

const CHUNK: u64 = 2048;

impl<T: Scalar> Simulator<T>
where
    StandardNormal: Distribution<T>,
{
    /// `bank` is required for the adaptive scheme and must belong to the
    /// same constellation kind and size (any normalization).
    pub fn new(cfg: SimConfig, bank: Option<LatinSquareBank<T>>) -> Result<Self> {
        cfg.validate()?;
        let c = Constellation::<T>::build(cfg.kind, cfg.size, Normalization::Unit)?;
        let mapping = match cfg.scheme {
            Scheme::Xor => Mapping::Fixed(xor_square(cfg.size)?),
            Scheme::Adaptive => {
                let bank = bank.ok_or_else(|| Error::Config("the adaptive scheme needs a Latin square bank".into()))?;
                let bc = bank.constellation();
                if bc.kind() != cfg.kind || bc.size() != cfg.size {
                    return Err(Error::Config(format!(
                        "bank is for {bc}, configuration is {}",
                        cfg.constellation_name()
                    )));
                }
                // exclusive law: (row, symbol) and (column, symbol) invert uniquely
                if bank.squares().iter().any(|s| !verify(s.order(), s.cells())) {
                    return Err(Error::MalformedSquare("bank square violates the exclusive law".into()));
                }
                let quantizer = Quantizer::new(bank.fades().clone());
                Mapping::Adaptive { bank: Box::new(bank), quantizer, fallback: standard_square(&c)? }
            }
        };
        let mut ts: Vec<usize> = match &mapping {
            Mapping::Fixed(sq) => vec![sq.symbols()],
            Mapping::Adaptive { bank, fallback, .. } => {
                bank.squares().iter().map(LatinSquare::symbols).chain([fallback.symbols()]).collect()
            }
        };
        ts.sort_unstable();
        ts.dedup();
        let mut bc = vec![None; ts.last().copied().unwrap_or(0) + 1];
        for t in ts {
            bc[t] = Some(match cfg.bc {
                BcPolicy::Lattice if t == cfg.size => c.points().to_vec(),
                BcPolicy::Lattice => lattice_points(t),
                BcPolicy::Psk => psk_points(t),
            });
        }
        let bits = c.bits_per_symbol();
        Ok(Self { cfg, points: c.points().to_vec(), mapping, bc, bits })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    /// Square the relay uses at fade state `z = h_B/h_A`.
    pub fn square_for(&self, z: Complex<T>) -> &LatinSquare {
        match &self.mapping {
            Mapping::Fixed(sq) => sq,
            Mapping::Adaptive { bank, quantizer, fallback } => match quantizer.select(z) {
                Selection::Ci(_) => fallback,
                Selection::Fade(i) => bank.square(i),
            },
        }
    }

    /// One round with the given fades `[h_A, h_B, h'_A, h'_B]`, messages and
    /// noise variance (0 for a noiseless run).
    pub fn trial_with<R: Rng + ?Sized>(
        &self,
        fades: [Complex<T>; 4],
        msgs: (usize, usize),
        sigma2: T,
        rng: &mut R,
    ) -> TrialErrors {
        let [h_a, h_b, g_a, g_b] = fades;
        let (k, l) = msgs;
        let mut noise =
            || if sigma2 > T::zero() { complex_normal(rng, sigma2) } else { Complex::new(T::zero(), T::zero()) };

        let y_r = h_a * self.points[k] + h_b * self.points[l] + noise();
        let sq = if h_a.norm_sqr() > T::zero() { self.square_for(h_b / h_a) } else { self.square_for_degenerate() };
        let (k_hat, l_hat) = relay_ml_decode(y_r, h_a, h_b, &self.points);
        let symbol = sq.get(k_hat, l_hat);
        let s_points = self.bc[sq.symbols()].as_ref().expect("broadcast set for every t in use");
        let x_r = s_points[symbol];

        let y_a = g_a * x_r + noise();
        let y_b = g_b * x_r + noise();

        // A knows row k and looks for B's column; B knows column l.
        let at_a = nearest(y_a, g_a, s_points, |_| true)
            .and_then(|s| sq.column_of(k, s))
            .or_else(|| {
                let s = nearest(y_a, g_a, s_points, |s| sq.column_of(k, s).is_some())?;
                sq.column_of(k, s)
            })
            .expect("row holds M symbols");
        let at_b = nearest(y_b, g_b, s_points, |_| true)
            .and_then(|s| sq.row_of(l, s))
            .or_else(|| {
                let s = nearest(y_b, g_b, s_points, |s| sq.row_of(l, s).is_some())?;
                sq.row_of(l, s)
            })
            .expect("column holds M symbols");
        TrialErrors { a_to_b: (k ^ at_b).count_ones(), b_to_a: (l ^ at_a).count_ones() }
    }

    fn square_for_degenerate(&self) -> &LatinSquare {
        match &self.mapping {
            Mapping::Fixed(sq) => sq,
            Mapping::Adaptive { fallback, .. } => fallback,
        }
    }

    /// One round with random messages and fades.
    pub fn trial<R: Rng + ?Sized>(&self, sigma2: T, rng: &mut R) -> TrialErrors {
        let ch = &self.cfg.channel;
        let fades = [draw_fade(ch, rng), draw_fade(ch, rng), draw_fade(ch, rng), draw_fade(ch, rng)];
        let n = self.points.len();
        let msgs = (rng.random_range(0..n), rng.random_range(0..n));
        self.trial_with(fades, msgs, sigma2, rng)
    }

    /// Runs `trials` rounds at one SNR; chunks run in parallel with their
    /// own RNG stream derived from `(seed, stream, chunk)`.
    pub fn run_point(&self, snr_db: f64, trials: u64, stream: u64) -> BerPoint {
        let sigma2 = T::of(10f64.powf(-snr_db / 10.0));
        let chunks = trials.div_ceil(CHUNK);
        let errors: u64 = (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(self.cfg.seed, stream, chunk));
                let n = CHUNK.min(trials - chunk * CHUNK);
                (0..n)
                    .map(|_| {
                        let e = self.trial(sigma2, &mut rng);
                        u64::from(e.a_to_b) + u64::from(e.b_to_a)
                    })
                    .sum::<u64>()
            })
            .sum();
        let bits = 2 * trials * u64::from(self.bits);
        let (ci_low, ci_high) = wilson_interval(errors, bits);
        BerPoint { snr_db, trials, bits, errors, ber: errors as f64 / bits as f64, ci_low, ci_high }
    }

    /// One [`BerPoint`] per configured SNR.
    pub fn sweep(&self) -> Vec<BerPoint> {
        self.cfg.snr_db.iter().enumerate().map(|(i, &s)| self.run_point(s, self.cfg.trials, i as u64)).collect()
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn stream_seed(seed: u64, stream: u64, chunk: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ stream) ^ chunk)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: ConstellationKind, size: usize, scheme: Scheme) -> SimConfig {
        SimConfig {
            kind,
            size,
            scheme,
            channel: ChannelModel::rayleigh(),
            snr_db: vec![10.0],
            trials: 100,
            seed: 7,
            bc: BcPolicy::Lattice,
        }
    }

    #[test]
    fn rayleigh_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let p: f64 =
            (0..n).map(|_| draw_fade::<f64, _>(&ChannelModel::rayleigh(), &mut rng).norm_sqr()).sum::<f64>() / n as f64;
        assert!((p - 1.0).abs() < 0.01, "{p}");
    }

    #[test]
    fn rician_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = ChannelModel::rician_db(5.0);
        let k = 10f64.powf(0.5);
        let n = 400_000;
        let draws: Vec<Complex<f64>> = (0..n).map(|_| draw_fade(&model, &mut rng)).collect();
        let mean = draws.iter().sum::<Complex<f64>>() / n as f64;
        let power = draws.iter().map(|h| h.norm_sqr()).sum::<f64>() / n as f64;
        assert!((mean.norm_sqr() - k / (k + 1.0)).abs() < 0.01);
        assert!((power - 1.0).abs() < 0.01);
        let h: Complex<f64> = draw_fade(&ChannelModel::rician(f64::INFINITY), &mut rng);
        assert_eq!(h, Complex::new(1.0, 0.0));
        assert!(ChannelModel::rician(-1.0).validate().is_err());
    }

    #[test]
    fn relay_ml_ties_and_recovery() {
        let c = Constellation::<f64>::qam(16, Normalization::Unit).unwrap();
        let (ha, hb) = (Complex::new(0.8, 0.3), Complex::new(-0.2, 1.1));
        for k in 0..16 {
            for l in 0..16 {
                let y = ha * c.point(k) + hb * c.point(l);
                assert_eq!(relay_ml_decode(y, ha, hb, c.points()), (k, l));
            }
        }
        // z = 1: x_0 + x_15 = x_15 + x_0, the smaller pair wins
        let one = Complex::new(1.0, 0.0);
        let y = c.point(15) + c.point(0);
        assert_eq!(relay_ml_decode(y, one, one, c.points()), (0, 15));
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(0, 8);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.2 && hi < 0.4);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn lattice_sets() {
        let p: Vec<Complex<f64>> = lattice_points(4);
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        for t in [17, 18, 20, 32] {
            let p: Vec<Complex<f64>> = lattice_points(t);
            let e = p.iter().map(|z| z.norm_sqr()).sum::<f64>() / t as f64;
            assert!((e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn xor_noiseless_floor_at_one() {
        let sim = Simulator::<f64>::new(cfg(ConstellationKind::Qam, 16, Scheme::Xor), None).unwrap();
        let one = Complex::new(1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut errors = 0;
        for k in 0..16 {
            for l in 0..16 {
                let e = sim.trial_with([one; 4], (k, l), 0.0, &mut rng);
                errors += e.a_to_b + e.b_to_a;
            }
        }
        assert!(errors > 0);
    }

    #[test]
    fn adaptive_requires_bank() {
        assert!(Simulator::<f64>::new(cfg(ConstellationKind::Qam, 4, Scheme::Adaptive), None).is_err());
        let mut bad = cfg(ConstellationKind::Qam, 4, Scheme::Xor);
        bad.trials = 0;
        assert!(Simulator::<f64>::new(bad, None).is_err());
    }

    #[test]
    fn seeds_are_reproducible() {
        let c = Constellation::<f64>::qam(4, Normalization::Lattice).unwrap();
        let bank = LatinSquareBank::build(&c, 8).unwrap();
        let sim = Simulator::new(cfg(ConstellationKind::Qam, 4, Scheme::Adaptive), Some(bank)).unwrap();
        assert_eq!(sim.run_point(5.0, 5000, 0), sim.run_point(5.0, 5000, 0));
        assert_ne!(sim.run_point(5.0, 5000, 0).errors, sim.run_point(5.0, 5000, 1).errors);
        let one = sim.run_point(5.0, 1, 0);
        assert!(one.ci_halfwidth() > 0.1 && one.ci_halfwidth() <= 0.5);
    }
}
