use super::{ConditionalEdge, DVineSpec, EdgeId, FunctionalKind, ParamFunctional};
use crate::bivcop::{BivCopula, FamilyTag};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Simulation designs with a varying Frank copula on the top edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Example {
    /// Four-dimensional Clayton D-vine.
    FourDim,
    /// `d`-dimensional Clayton D-vine, `d >= 4`.
    Dim(usize),
}

impl Example {
    pub fn dim(&self) -> usize {
        match self {
            Example::FourDim => 4,
            Example::Dim(d) => *d,
        }
    }
}

/// Clayton copulas in trees `1..d-1` with parameters `t1 / (1 + (j-1) t1)`,
/// `t1` the Clayton parameter for Kendall's tau `tau`, and a Frank copula on
/// the single top edge whose parameter is `functional` of the first two
/// conditioning values. `tau = 0` puts independence copulas in the lower
/// trees.
pub fn build_example_spec(
    which: Example,
    tau: f64,
    lambda: f64,
    functional: FunctionalKind,
) -> Result<DVineSpec> {
    let d = which.dim();
    if d < 4 {
        return Err(Error::Domain(format!("example needs d >= 4, got {d}")));
    }
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::Domain(format!("tau={tau} outside [0, 1)")));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda={lambda} outside [0, 1]")));
    }
    let mut trees = Vec::with_capacity(d - 1);
    for j in 1..d - 1 {
        let cop = if tau == 0.0 {
            BivCopula::independence()
        } else {
            let t1 = crate::bivcop::tau_to_param(FamilyTag::CLAYTON, tau)?;
            BivCopula::new(FamilyTag::CLAYTON, t1 / (1.0 + (j as f64 - 1.0) * t1))?
        };
        trees.push(vec![cop; d - j]);
    }
    // static placeholder for the varying edge: its value at lambda = 0
    trees.push(vec![BivCopula::new(FamilyTag::FRANK, 1.0)?]);
    let conditional = ConditionalEdge {
        edge: EdgeId::new(d - 1, 0),
        family: FamilyTag::FRANK,
        param_fn: ParamFunctional {
            kind: functional,
            lambda,
        },
    };
    DVineSpec::new(d, trees, Some(conditional))
}
