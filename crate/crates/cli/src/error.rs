use skewmix_core::cohomology::CohomologyError;
use skewmix_core::cones::ConeError;
use skewmix_core::correlation::CorrelationError;
use skewmix_core::dynamics::DynamicsError;
use skewmix_core::growth::GrowthError;
use skewmix_core::oscillatory::OscillatoryError;
use skewmix_core::suite::SuiteError;
use skewmix_core::transfer::TransferError;
use skewmix_core::MapError;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad arguments, config or map.
    Validation(String),
    /// NotConverged, CapExceeded and their relatives.
    Numerical(String),
    /// `suite` ran and some criteria failed.
    SuiteFailed(usize),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::SuiteFailed(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::SuiteFailed(n) => write!(f, "{n} acceptance criteria failed"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Whether an error comes from a solver or cap rather than from the input.
pub trait Numerical {
    fn numerical(&self) -> bool;
}

impl Numerical for MapError {
    fn numerical(&self) -> bool {
        false
    }
}

impl Numerical for DynamicsError {
    fn numerical(&self) -> bool {
        matches!(self, DynamicsError::CapExceeded { .. } | DynamicsError::NoConvergence(_))
    }
}

impl Numerical for TransferError {
    fn numerical(&self) -> bool {
        match self {
            TransferError::NotConverged { .. } => true,
            TransferError::Dynamics(e) => e.numerical(),
            _ => false,
        }
    }
}

impl Numerical for ConeError {
    fn numerical(&self) -> bool {
        match self {
            ConeError::Dynamics(e) => e.numerical(),
            _ => false,
        }
    }
}

impl Numerical for CohomologyError {
    fn numerical(&self) -> bool {
        match self {
            CohomologyError::Dynamics(e) => e.numerical(),
            CohomologyError::Transfer(e) => e.numerical(),
            CohomologyError::NoPreimage { .. } => false,
        }
    }
}

impl Numerical for GrowthError {
    fn numerical(&self) -> bool {
        match self {
            GrowthError::Dynamics(e) => e.numerical(),
            GrowthError::BadOmega { .. } => false,
        }
    }
}

impl Numerical for OscillatoryError {
    fn numerical(&self) -> bool {
        match self {
            OscillatoryError::PanelCapExceeded { .. } => true,
            OscillatoryError::Dynamics(e) => e.numerical(),
            _ => false,
        }
    }
}

impl Numerical for CorrelationError {
    fn numerical(&self) -> bool {
        match self {
            CorrelationError::ConventionMismatch { .. } | CorrelationError::InsufficientData { .. } => true,
            CorrelationError::Transfer(e) => e.numerical(),
            _ => false,
        }
    }
}

impl Numerical for SuiteError {
    fn numerical(&self) -> bool {
        match self {
            SuiteError::Dynamics(e) => e.numerical(),
            SuiteError::Cone(e) => e.numerical(),
            SuiteError::Cohomology(e) => e.numerical(),
            SuiteError::Transfer(e) => e.numerical(),
            SuiteError::Growth(e) => e.numerical(),
            SuiteError::Oscillatory(e) => e.numerical(),
            SuiteError::Correlation(e) => e.numerical(),
            SuiteError::Eval(_) => false,
        }
    }
}

macro_rules! classify {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                if e.numerical() {
                    CliError::Numerical(e.to_string())
                } else {
                    CliError::Validation(e.to_string())
                }
            }
        }
    )*};
}

classify!(MapError, DynamicsError, TransferError, ConeError, CohomologyError, GrowthError, OscillatoryError, CorrelationError, SuiteError);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let cap: CliError = DynamicsError::CapExceeded { n: 20, cap: 14 }.into();
        assert_eq!(cap.exit_code(), 2);
        let nested: CliError = TransferError::Dynamics(DynamicsError::CapExceeded { n: 20, cap: 14 }).into();
        assert_eq!(nested.exit_code(), 2);
        let slow: CliError = TransferError::NotConverged { iterations: 5, residual: 1.0 }.into();
        assert_eq!(slow.exit_code(), 2);
        let grid: CliError = TransferError::NotPowerOfTwo(3).into();
        assert_eq!(grid.exit_code(), 1);
        let map: CliError = MapError::NotExpanding { lambda_tilde: 2.0 }.into();
        assert_eq!(map.exit_code(), 1);
        assert_eq!(CliError::SuiteFailed(1).exit_code(), 3);
    }
}
