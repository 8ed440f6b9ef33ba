use thiserror::Error;

/// Grid node address `(i, j)`: `i` runs along `u`, `j` along `v`.
pub type Node = (usize, usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is singular (|det| = {det:e})")]
    SingularMatrix { det: f64 },
    #[error("matrix is not trace-free (|tr| = {trace:e})")]
    NonTraceFree { trace: f64 },
    #[error("pole must be nonzero")]
    ZeroPole,
    #[error("line {line} lies in the degeneracy cone")]
    ConeLine { line: String },
    #[error("spectral value {lambda} sits on a pole (|lambda^3 -+ alpha^3| too small)")]
    AtPole { lambda: String },
    #[error("poles collide: {0}")]
    PoleCollision(String),
    #[error("bad argument: {0}")]
    BadArgument(String),
    #[error("conformal factor h <= 0 at node {node:?} (h = {h})")]
    NonPositiveH { node: Node, h: f64 },
    #[error("spectral parameter must be nonzero")]
    ZeroLambda,
    #[error("gamma = -gamma1: classical transform denominator vanishes")]
    GammaCollision,
    #[error("every node is masked")]
    AllMasked,
    #[error("h vanishes at every usable node")]
    ZeroH,
    #[error("moving frame (X_u, X_v, X) degenerate at every usable node")]
    FrameDegenerate,
    #[error("open condition violated at {} node(s), first {:?}", nodes.len(), nodes.first())]
    OpenConditionViolated { nodes: Vec<Node> },
    #[error("kernel of A F(alpha) P is not one-dimensional at node {node:?}")]
    DegenerateKernel { node: Node },
    #[error("output is not real: max imaginary part {max_imag:e}")]
    NonRealOutput { max_imag: f64 },
    #[error("grid has fewer than 4 unmasked nodes")]
    EmptyGrid,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
