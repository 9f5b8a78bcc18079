use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid constellation size {size} for {kind}")]
    InvalidSize { kind: &'static str, size: usize },

    #[error("gcd(0, 0) is undefined")]
    GcdOfZeros,

    #[error("zero denominator")]
    ZeroDenominator,

    #[error("euler_phi requires n >= 1")]
    NonPositivePhi,

    #[error("cannot parse `{0}` as a fade state")]
    Parse(String),

    #[error("fade state {0} is not singular for this constellation")]
    NotSingular(String),

    #[error("Latin square does not remove fade state {0}")]
    NotRemoved(String),

    #[error("malformed constraint set: {0}")]
    MalformedConstraints(String),

    #[error("no completion found with at most {t_max} symbols (largest t attempted: {attempted})")]
    Infeasible { t_max: usize, attempted: usize },

    #[error("malformed Latin square: {0}")]
    MalformedSquare(String),

    #[error("operation needs an exact lattice constellation (PAM or QAM)")]
    NeedsLattice,

    #[error("identical fade states {0} have no transition curve")]
    SameFadeState(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
