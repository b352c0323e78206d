//! TOML study configuration. A file holds an optional `[solver]` table and
//! one section per study; unknown keys are rejected and errors carry the
//! dotted path of the offending field.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::energy::{FProfile, Facet};
use crate::error::{invalid, Error, Result};
use crate::kernel::{BoundaryPolicy, KernelSpec, SupportBody};
use crate::media::MediumSpec;
use crate::solve::SolveOptions;
use crate::stoch::StochStudy;
use crate::tensor::Mat2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub solver: SolveOptions,
    pub phi: Option<PhiStudy>,
    pub tube: Option<TubeStudy>,
    pub gamma1d: Option<Gamma1dStudy>,
    pub elastic2d: Option<Elastic2dStudy>,
    pub cell: Option<CellStudy>,
    pub homdet: Option<HomDetStudy>,
    pub homstoch: Option<StochStudy>,
}

fn default_directions() -> usize {
    16
}

fn default_slicing() -> usize {
    720
}

/// `phi_rho` and its slicing approximation on equally spaced normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiStudy {
    pub support: SupportBody,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_slicing")]
    pub slicing_directions: usize,
}

/// `tube_volume(J, h) / h` against `sum phi_rho(nu) |facet|` over `hs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeStudy {
    pub support: SupportBody,
    pub interface: Vec<Facet>,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub hs: Vec<f64>,
}

/// One-dimensional crossover sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gamma1dStudy {
    pub f: FProfile,
    pub p: f64,
    pub epsilon: f64,
    /// Grid cells on `(0, 1)`; defaults to `32 / epsilon`.
    pub cells: Option<usize>,
    pub lambdas: Vec<f64>,
}

fn default_h_over_eps() -> f64 {
    0.125
}

/// Minimized non-local energy of an affine datum as `eps` decreases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Elastic2dStudy {
    pub kernel: KernelSpec,
    pub f: FProfile,
    pub medium: MediumSpec,
    pub m: Mat2,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub epsilons: Vec<f64>,
    #[serde(default = "default_h_over_eps")]
    pub h_over_eps: f64,
    #[serde(default)]
    pub policy: BoundaryPolicy,
}

/// `W'` / `W''` table over `(r, delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellStudy {
    pub medium: MediumSpec,
    pub m: Mat2,
    #[serde(default)]
    pub x: [f64; 2],
    pub deltas: Vec<f64>,
    pub rs: Vec<f64>,
    pub cells_per_period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RescalingSpec {
    pub r: f64,
    pub delta: f64,
    pub cells: usize,
    #[serde(default)]
    pub x: [f64; 2],
}

/// Large-cube cell values of a periodic medium, optionally with the
/// rescaling identity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomDetStudy {
    pub medium: MediumSpec,
    pub m: Mat2,
    #[serde(default)]
    pub x: [f64; 2],
    pub ts: Vec<f64>,
    pub cells_per_period: usize,
    pub rescaling: Option<RescalingSpec>,
}

/// Study names accepted on the command line, in documentation order.
pub const STUDIES: [&str; 7] = ["phi", "tube", "gamma1d", "elastic2d", "cell", "homdet", "homstoch"];

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            // Some syntax errors only carry their text in `Display`.
            let message = match inner.message().trim() {
                "" => inner.to_string().trim().to_string(),
                m => m.to_string(),
            };
            Error::Config { path, message }
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text =
            std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Ok((Self::parse(&text)?, text))
    }

    /// Fails with a config error naming the section when `study` is absent.
    pub fn require(&self, study: &str) -> Result<()> {
        let present = match study {
            "phi" => self.phi.is_some(),
            "tube" => self.tube.is_some(),
            "gamma1d" => self.gamma1d.is_some(),
            "elastic2d" => self.elastic2d.is_some(),
            "cell" => self.cell.is_some(),
            "homdet" => self.homdet.is_some(),
            "homstoch" => self.homstoch.is_some(),
            other => return Err(invalid(format!("unknown study `{other}`; expected one of {STUDIES:?}"))),
        };
        if present {
            Ok(())
        } else {
            Err(Error::Config { path: study.to_string(), message: format!("missing section `[{study}]`") })
        }
    }
}

/// Lower-case hex SHA-256 of the raw config bytes.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAMMA: &str = r#"
[solver]
tolerance = 1e-9

[gamma1d]
f = { kind = "truncated-affine", alpha = 1.0, beta = 1.0 }
p = 2.0
epsilon = 0.005
lambdas = [0.5, 1.0, 1.5]
"#;

    #[test]
    fn parses_a_study_and_defaults() {
        let c = Config::parse(GAMMA).unwrap();
        assert_eq!(c.solver.tolerance, 1e-9);
        assert_eq!(c.solver.window, 25);
        let g = c.gamma1d.as_ref().unwrap();
        assert_eq!(g.f, FProfile::truncated_affine(1.0, 1.0).unwrap());
        assert_eq!(g.cells, None);
        assert!(c.require("gamma1d").is_ok());
        assert!(matches!(c.require("phi"), Err(Error::Config { .. })));
        assert!(matches!(c.require("nope"), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn missing_field_is_named() {
        let text = GAMMA.replace("epsilon = 0.005\n", "");
        let err = Config::parse(&text).unwrap_err();
        assert!(err.to_string().contains("epsilon"), "{err}");
        let Error::Config { path, .. } = err else { panic!() };
        assert_eq!(path, "gamma1d");
    }

    #[test]
    fn wrong_types_and_unknown_keys_carry_paths() {
        let err = Config::parse(&GAMMA.replace("p = 2.0", "p = \"two\"")).unwrap_err();
        let Error::Config { path, .. } = err else { panic!() };
        assert_eq!(path, "gamma1d.p");
        let err = Config::parse(&GAMMA.replace("p = 2.0", "p = 2.0\nq = 1")).unwrap_err();
        assert!(err.to_string().contains('q'), "{err}");
        let err = Config::parse("[phi]\nsupport = { shape = \"ball\", radius = -1.0, dim = 2 }\n").unwrap_err();
        assert!(err.to_string().contains("phi.support"), "{err}");
        assert!(Config::parse("[[[").is_err());
    }

    #[test]
    fn nested_studies_parse() {
        let text = r#"
[homstoch]
m = [[1.0, 0.0], [0.0, 0.0]]
ts = [8, 16]
samples = 8
base_seed = 7
cells_per_unit = 8
medium = { dim = 1, p = 2.0, bounds = [1.0, 4.0], mode = "full", field = { kind = "random-checkerboard", values = [1.0, 4.0], probability = 0.5 } }

[elastic2d]
kernel = { support = { shape = "ball", radius = 1.0, dim = 2 } }
f = { kind = "exponential", alpha = 1.0, beta = 1.0 }
medium = { dim = 2, p = 2.0, bounds = [1.0, 1.0], field = { kind = "constant", a = 1.0 } }
m = [[0.1, 0.0], [0.0, 0.05]]
lo = [0.0, 0.0]
hi = [0.5, 0.5]
epsilons = [0.0625]
"#;
        let c = Config::parse(text).unwrap();
        assert_eq!(c.homstoch.unwrap().ts, vec![8, 16]);
        let e = c.elastic2d.unwrap();
        assert_eq!(e.h_over_eps, 0.125);
        assert_eq!(e.policy, BoundaryPolicy::RestrictRenormalize);
    }

    #[test]
    fn hash_is_stable_hex() {
        let h = config_hash("");
        assert_eq!(h, "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_ne!(config_hash(GAMMA), config_hash(&GAMMA.replace("0.5", "0.6")));
    }
}
