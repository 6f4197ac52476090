use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value for `{0}`")]
    NonFinite(&'static str),

    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("Fock cutoff n_max = {n_max} exceeds the supported limit of {limit}")]
    DimensionTooLarge { n_max: usize, limit: usize },

    #[error("steady state is not unique: null space of the generator has dimension {0}")]
    DegenerateSteadyState(usize),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("conditioning undefined: {0}")]
    Conditioning(String),

    #[error("bad input data: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}
