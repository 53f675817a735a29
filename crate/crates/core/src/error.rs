use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh is not conforming: {0}")]
    NonConforming(String),
    #[error("triangle {0} is degenerate (zero area)")]
    DegenerateTriangle(usize),
    #[error("boundary edge ({0}, {1}) carries no boundary tag")]
    UntaggedBoundary(usize, usize),
    #[error("invalid mesh input: {0}")]
    InvalidMesh(String),
    #[error("edge id {0} is out of range")]
    InvalidEdge(usize),
    #[error("triangle id {0} is out of range")]
    InvalidTriangle(usize),
    #[error("no triangles marked for refinement")]
    EmptyMarking,
    #[error("conformity closure exceeded depth limit {0}")]
    ClosureDepth(usize),
    #[error("Dirichlet boundary has zero measure; the system is singular")]
    NoDirichlet,
    #[error("coefficient of region {0} is not symmetric positive definite")]
    NotSpd(u32),
    #[error("no coefficient registered for region {0}")]
    MissingRegion(u32),
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("quadrature order {0} is not supported")]
    UnsupportedQuadOrder(usize),
    #[error("point ({0}, {1}) lies outside triangle {2}")]
    PointOutside(f64, f64, usize),
    #[error("flux-weighted ZZ requires a scalar coefficient, region {0} is anisotropic")]
    NonScalarCoefficient(u32),
    #[error("singular local BDM system on edge {0}")]
    SingularGram(usize),
    #[error("edge {0} is not an interior edge")]
    NotInterior(usize),
    #[error("interface condition check failed: residual {0:e}")]
    InterfaceCheck(f64),
    #[error("mesh is not aligned with the coefficient interfaces (triangle {0})")]
    NotAligned(usize),
    #[error("empty category: {0}")]
    EmptyCategory(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
