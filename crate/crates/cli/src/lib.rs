//! `pnc`: enumerate singular fade states, build Latin-square banks, map
//! fade-state regions and run BER sweeps.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use pnc::latin::{complete_with, CompletionOptions};
use pnc::quantization::{region_svg, GridSpec, RegionGrid};
use pnc::simulator::{BcPolicy, ChannelModel, Scheme, SimConfig};
use pnc::singular_fades::{self, constraints_for};
use pnc::{Constellation, ConstellationKind, LatinSquareBank, Normalization, Quantizer, SingularFadeSet};

/// Exit status for domain errors (bad sizes, unreadable files, failed checks).
pub const EXIT_DOMAIN: u8 = 1;
/// Exit status for command-line usage errors.
pub const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "pnc", version, about = "Adaptive network coding maps for the two-way relay channel")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true, env = "PNC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the singular fade states of a constellation as JSON.
    Sfs(SfsArgs),
    /// Build, check and inspect Latin-square banks.
    Latin {
        #[command(subcommand)]
        command: LatinCommand,
    },
    /// Classify a grid of fade states (CSV) and draw region boundaries (SVG).
    Regions(RegionsArgs),
    /// Monte-Carlo bit error rate sweep (CSV).
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
struct ConstellationArg {
    /// Square M-QAM.
    #[arg(long, value_name = "M")]
    qam: Option<usize>,
    /// PAM with this many points.
    #[arg(long, value_name = "N")]
    pam: Option<usize>,
    /// M-PSK.
    #[arg(long, value_name = "M")]
    psk: Option<usize>,
}

impl ConstellationArg {
    fn kind_size(&self) -> (ConstellationKind, usize) {
        match (self.qam, self.pam, self.psk) {
            (Some(m), _, _) => (ConstellationKind::Qam, m),
            (_, Some(m), _) => (ConstellationKind::Pam, m),
            (_, _, Some(m)) => (ConstellationKind::Psk, m),
            _ => unreachable!("clap enforces one constellation flag"),
        }
    }

    fn build(&self) -> Result<Constellation> {
        let (kind, size) = self.kind_size();
        Ok(Constellation::build(kind, size, Normalization::Lattice)?)
    }
}

#[derive(Args, Debug)]
struct SfsArgs {
    #[command(flatten)]
    constellation: ConstellationArg,
    /// Print the enumerated and closed-form counts only.
    #[arg(long)]
    count_only: bool,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum LatinCommand {
    /// Build the bank for every singular fade state and write it as JSON.
    BuildBank(BuildBankArgs),
    /// Reload a bank and check every entry.
    Verify {
        #[arg(long)]
        bank: PathBuf,
    },
    /// Print the square for one fade state, e.g. `2+1i/1+0i` or `2+1i`.
    Show(ShowArgs),
}

#[derive(Args, Debug)]
struct BuildBankArgs {
    #[command(flatten)]
    constellation: ConstellationArg,
    /// Largest symbol count allowed (default 2M).
    #[arg(long)]
    tmax: Option<usize>,
    /// Search nodes per completion attempt.
    #[arg(long, default_value_t = CompletionOptions::new(0).node_budget)]
    budget: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ShowArgs {
    /// Fade state.
    state: String,
    /// Read the square from this bank.
    #[arg(long, conflicts_with_all = ["qam", "pam", "psk"])]
    bank: Option<PathBuf>,
    #[arg(long, value_name = "M", group = "c")]
    qam: Option<usize>,
    #[arg(long, value_name = "N", group = "c")]
    pam: Option<usize>,
    #[arg(long, value_name = "M", group = "c")]
    psk: Option<usize>,
    #[arg(long)]
    tmax: Option<usize>,
}

#[derive(Args, Debug)]
struct RegionsArgs {
    #[command(flatten)]
    constellation: ConstellationArg,
    /// Samples per axis, `NxM`.
    #[arg(long, default_value = "400x400", value_parser = parse_grid)]
    grid: (usize, usize),
    /// Window on both axes, `a..b`.
    #[arg(long, default_value = "-4..4", value_parser = parse_range, allow_hyphen_values = true)]
    range: (f64, f64),
    /// CSV output (stdout when neither --out nor --svg is given).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ChannelArg {
    Rayleigh,
    Rician,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// TOML file with the sweep; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_name = "M", group = "c")]
    qam: Option<usize>,
    #[arg(long, value_name = "N", group = "c")]
    pam: Option<usize>,
    #[arg(long, value_name = "M", group = "c")]
    psk: Option<usize>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    channel: Option<ChannelArg>,
    /// Rician K factor in dB.
    #[arg(long, default_value_t = 5.0)]
    k_db: f64,
    /// SNR points in dB: `a:step:b` or a comma list.
    #[arg(long, value_parser = parse_snr, allow_hyphen_values = true)]
    snr: Option<SnrList>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Latin-square bank (JSON); built on the fly when absent.
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    tmax: Option<usize>,
    #[arg(long, value_enum)]
    bc: Option<BcArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeArg {
    Adaptive,
    Xor,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BcArg {
    Lattice,
    Psk,
}

/// Contents of a `simulate --config` file.
#[derive(Debug, Deserialize, Serialize)]
struct SimFile {
    #[serde(flatten)]
    sim: SimConfig,
    bank: Option<PathBuf>,
    tmax: Option<usize>,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or("expected NxM")?;
    let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a == 0 || b == 0 {
        return Err("grid sizes must be positive".into());
    }
    Ok((a, b))
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !a.is_finite() || !b.is_finite() || a >= b {
        return Err("range must be finite with a < b".into());
    }
    Ok((a, b))
}

#[derive(Clone, Debug, PartialEq)]
struct SnrList(Vec<f64>);

fn parse_snr(s: &str) -> std::result::Result<SnrList, String> {
    parse_snr_values(s).map(SnrList)
}

fn parse_snr_values(s: &str) -> std::result::Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let (a, step, b) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step <= 0.0 || b < a {
            return Err("expected a:step:b with step > 0 and a <= b".into());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + step * i as f64).collect());
    }
    s.split(',').map(num).collect()
}

fn write_output(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, contents).with_context(|| format!("cannot write {}", p.display())),
        None => match std::io::stdout().write_all(contents.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, S>(argv: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        // a pool may already exist when embedded; the default is fine then
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_DOMAIN
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Sfs(a) => sfs(a),
        Command::Latin { command } => match command {
            LatinCommand::BuildBank(a) => build_bank(a),
            LatinCommand::Verify { bank } => verify_bank(&bank),
            LatinCommand::Show(a) => show(a),
        },
        Command::Regions(a) => regions(a),
        Command::Simulate(a) => simulate(a),
    }
}

#[derive(Serialize)]
struct StateRecord {
    state: String,
    re: f64,
    im: f64,
    magnitude: f64,
    argument: f64,
    class: pnc::FadeClass,
}

fn closed_form(kind: ConstellationKind, size: usize) -> Result<u64> {
    Ok(match kind {
        ConstellationKind::Pam => singular_fades::count_pam(size)?,
        ConstellationKind::Qam => singular_fades::count_qam(size)?,
        ConstellationKind::Psk => singular_fades::count_psk(size)?,
    })
}

fn sfs(a: SfsArgs) -> Result<()> {
    let c = a.constellation.build()?;
    let h = SingularFadeSet::enumerate(&c);
    if a.count_only {
        let formula = closed_form(c.kind(), c.size())?;
        return write_output(a.out.as_deref(), &format!("enumerated={} formula={}\n", h.len(), formula));
    }
    let records: Vec<StateRecord> = h
        .iter()
        .map(|f| {
            let z = f.value();
            StateRecord {
                state: f.label(),
                re: z.re,
                im: z.im,
                magnitude: z.norm(),
                argument: z.arg(),
                class: f.class(),
            }
        })
        .collect();
    write_output(a.out.as_deref(), &(serde_json::to_string_pretty(&records)? + "\n"))
}

fn build_bank(a: BuildBankArgs) -> Result<()> {
    let c = a.constellation.build()?;
    let mut opts = CompletionOptions::new(a.tmax.unwrap_or(2 * c.size()));
    opts.node_budget = a.budget;
    let bank = LatinSquareBank::build_with(&c, &opts)?;
    fs::write(&a.out, bank.to_json() + "\n").with_context(|| format!("cannot write {}", a.out.display()))?;
    eprintln!(
        "{} entries for {c}, all verified; {} use more than {} symbols (max {})",
        bank.len(),
        bank.entries_above_order(),
        c.size(),
        bank.max_symbols()
    );
    Ok(())
}

fn load_bank(path: &Path) -> Result<LatinSquareBank> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    LatinSquareBank::from_json(&text).with_context(|| format!("invalid bank {}", path.display()))
}

fn verify_bank(path: &Path) -> Result<()> {
    let bank = load_bank(path)?;
    let text = format!(
        "ok: {} entries for {}, max t = {}, {} above M\n",
        bank.len(),
        bank.constellation(),
        bank.max_symbols(),
        bank.entries_above_order()
    );
    write_output(None, &text)
}

fn show(a: ShowArgs) -> Result<()> {
    let (square, c, label) = if let Some(path) = &a.bank {
        let bank = load_bank(path)?;
        let i = find_state(bank.fades(), &a.state)?;
        (bank.square(i).clone(), bank.constellation().clone(), bank.fades().get(i).label())
    } else {
        let arg = ConstellationArg { qam: a.qam, pam: a.pam, psk: a.psk };
        if arg.qam.is_none() && arg.pam.is_none() && arg.psk.is_none() {
            bail!("give --bank or one of --qam/--pam/--psk");
        }
        let c = arg.build()?;
        let h = SingularFadeSet::enumerate(&c);
        let i = find_state(&h, &a.state)?;
        let cs = constraints_for(&c, h.get(i))?;
        let sq = complete_with(&cs, &CompletionOptions::new(a.tmax.unwrap_or(2 * c.size())))?;
        (sq, c, h.get(i).label())
    };
    let z =
        SingularFadeSet::enumerate(&c).iter().find(|f| f.label() == label).map(|f| f.value()).expect("state present");
    let text = format!(
        "fade state {label} on {c}: t = {}, min cluster distance {:.6}\n{square}",
        square.symbols(),
        square.min_cluster_distance(&c, z)
    );
    write_output(None, &text)
}

fn find_state(h: &SingularFadeSet, s: &str) -> Result<usize> {
    if let Ok(q) = s.parse::<pnc::GaussianRational>() {
        if let Some(i) = h.index_of_exact(&q) {
            return Ok(i);
        }
    }
    if let Ok(g) = s.parse::<pnc::GaussianInt>() {
        if let Some(i) = h.index_of_exact(&pnc::GaussianRational::from_int(g)) {
            return Ok(i);
        }
    }
    let z = pnc::parse_complex::<f64>(s).ok_or_else(|| anyhow!("cannot parse fade state `{s}`"))?;
    h.index_of_value(z).ok_or_else(|| anyhow!("{s} is not a singular fade state of this constellation"))
}

fn regions(a: RegionsArgs) -> Result<()> {
    let c = a.constellation.build()?;
    let q = Quantizer::new(SingularFadeSet::enumerate(&c));
    let spec = GridSpec { re: a.range, im: a.range, nx: a.grid.0, ny: a.grid.1 };
    let grid = RegionGrid::classify(&q, spec);
    if a.out.is_some() || a.svg.is_none() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["re", "im", "state", "ci"])?;
        for iy in 0..spec.ny {
            for ix in 0..spec.nx {
                let z = spec.point(ix, iy);
                let i = iy * spec.nx + ix;
                let ci = match grid.ci[i] {
                    pnc::quantization::CiRegion::Exterior => "exterior",
                    pnc::quantization::CiRegion::Interior => "interior",
                    pnc::quantization::CiRegion::No => "no",
                };
                w.write_record([
                    format!("{:.6}", z.re),
                    format!("{:.6}", z.im),
                    q.fades().get(grid.labels[i]).label(),
                    ci.into(),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| anyhow!("{e}"))?;
        write_output(a.out.as_deref(), &String::from_utf8(bytes)?)?;
    }
    if let Some(path) = &a.svg {
        fs::write(path, region_svg(&q, &grid, 800)).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let file: Option<SimFile> = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            Some(toml::from_str(&text).with_context(|| format!("invalid config {}", p.display()))?)
        }
        None => None,
    };
    let flag_const = match (a.qam, a.pam, a.psk) {
        (Some(m), _, _) => Some((ConstellationKind::Qam, m)),
        (_, Some(m), _) => Some((ConstellationKind::Pam, m)),
        (_, _, Some(m)) => Some((ConstellationKind::Psk, m)),
        _ => None,
    };
    let base = file.as_ref().map(|f| &f.sim);
    let (kind, size) = flag_const
        .or(base.map(|s| (s.kind, s.size)))
        .ok_or_else(|| anyhow!("no constellation: give --qam/--pam/--psk or --config"))?;
    let scheme = match a.scheme {
        Some(SchemeArg::Adaptive) => Scheme::Adaptive,
        Some(SchemeArg::Xor) => Scheme::Xor,
        None => base.map_or(Scheme::Adaptive, |s| s.scheme),
    };
    let channel = match a.channel {
        Some(ChannelArg::Rayleigh) => ChannelModel::rayleigh(),
        Some(ChannelArg::Rician) => ChannelModel::rician_db(a.k_db),
        None => base.map_or(ChannelModel::rayleigh(), |s| s.channel),
    };
    let bc = match a.bc {
        Some(BcArg::Lattice) => BcPolicy::Lattice,
        Some(BcArg::Psk) => BcPolicy::Psk,
        None => base.map_or(BcPolicy::Lattice, |s| s.bc),
    };
    let cfg = SimConfig {
        kind,
        size,
        scheme,
        channel,
        snr_db: a
            .snr
            .clone()
            .map(|s| s.0)
            .or(base.map(|s| s.snr_db.clone()))
            .unwrap_or_else(|| (0..=8).map(|i| 5.0 * i as f64).collect()),
        trials: a.trials.or(base.map(|s| s.trials)).unwrap_or(10_000),
        seed: a.seed.or(base.map(|s| s.seed)).unwrap_or(0),
        bc,
    };
    let bank = match scheme {
        Scheme::Xor => None,
        Scheme::Adaptive => Some(match a.bank.clone().or(file.as_ref().and_then(|f| f.bank.clone())) {
            Some(p) => load_bank(&p)?,
            None => {
                let c = Constellation::build(kind, size, Normalization::Lattice)?;
                let t_max = a.tmax.or(file.as_ref().and_then(|f| f.tmax)).unwrap_or(2 * size);
                LatinSquareBank::build(&c, t_max)?
            }
        }),
    };
    let name = cfg.constellation_name();
    let channel_name = cfg.channel.name();
    let sim = pnc::Simulator::new(cfg, bank)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scheme", "constellation", "channel", "snr_db", "trials", "ber", "ci_halfwidth"])?;
    for p in sim.sweep() {
        w.write_record([
            scheme.name().to_string(),
            name.clone(),
            channel_name.clone(),
            format!("{}", p.snr_db),
            p.trials.to_string(),
            format!("{:.6e}", p.ber),
            format!("{:.6e}", p.ci_halfwidth()),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("{e}"))?;
    write_output(a.out.as_deref(), &String::from_utf8(bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_parsers() {
        assert_eq!(parse_grid("800x600").unwrap(), (800, 600));
        assert!(parse_grid("0x3").is_err());
        assert_eq!(parse_range("-4..4").unwrap(), (-4.0, 4.0));
        assert!(parse_range("4..-4").is_err());
        assert_eq!(parse_snr("0:10:30").unwrap().0, vec![0.0, 10.0, 20.0, 30.0]);
        assert_eq!(parse_snr("5,7.5").unwrap().0, vec![5.0, 7.5]);
        assert!(parse_snr("0:-1:5").is_err());
    }

    #[test]
    fn config_file_shape() {
        let text = r#"
            kind = "qam"
            M = 16
            scheme = "xor"
            snr_db = [10.0, 20.0]
            trials = 100
            seed = 3
            [channel]
            fading = { kind = "rician", k = 3.1623 }
        "#;
        let f: SimFile = toml::from_str(text).unwrap();
        assert_eq!(f.sim.size, 16);
        assert_eq!(f.sim.channel.variance, 1.0);
        assert!(f.bank.is_none());
    }
}
