use std::path::PathBuf;
use std::sync::Arc;

use nikishin_core::{MultiIndexPair, NikishinSystem, Shift, SystemPair, WeightSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Mop,
    Diagnostics,
    Equilibrium,
    NthRoot,
    Ratio,
    HermitePade,
    Biortho,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Mop,
        ExperimentKind::Diagnostics,
        ExperimentKind::Equilibrium,
        ExperimentKind::NthRoot,
        ExperimentKind::Ratio,
        ExperimentKind::HermitePade,
        ExperimentKind::Biortho,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Mop => "mop",
            ExperimentKind::Diagnostics => "diagnostics",
            ExperimentKind::Equilibrium => "equilibrium",
            ExperimentKind::NthRoot => "nth_root",
            ExperimentKind::Ratio => "ratio",
            ExperimentKind::HermitePade => "hermite_pade",
            ExperimentKind::Biortho => "biortho",
        }
    }

    pub fn checks(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Mop => &[
                "normality",
                "zero_counts",
                "orthogonality",
                "integral_representation",
            ],
            ExperimentKind::Diagnostics => &[
                "zero_counts",
                "zero_counts_shifted",
                "interlacing",
                "epsilon_law",
                "attraction",
            ],
            ExperimentKind::Equilibrium => {
                &["interaction_cholesky", "variational_residual", "uniqueness"]
            }
            ExperimentKind::NthRoot => &["error_decreases"],
            ExperimentKind::Ratio => &[
                "cauchy_stabilization",
                "closed_form_limit",
                "boundary_product",
                "epsilon_law",
                "telescoping",
                "nth_root_trend",
            ],
            ExperimentKind::HermitePade => &[
                "order_conditions",
                "r0_identity",
                "defining_identity",
                "d_polynomial",
                "far_field_slope",
            ],
            ExperimentKind::Biortho => &["offdiag_over_diag", "nonzero_diagonal"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "tol_residual")]
    pub residual: f64,
    #[serde(default = "tol_order")]
    pub order: f64,
    #[serde(default = "tol_identity")]
    pub identity: f64,
    #[serde(default = "tol_equilibrium")]
    pub equilibrium: f64,
    #[serde(default = "tol_uniqueness")]
    pub uniqueness: f64,
    #[serde(default = "tol_cauchy")]
    pub cauchy_fraction: f64,
    #[serde(default = "tol_ratio")]
    pub ratio_error: f64,
    #[serde(default = "tol_cv")]
    pub boundary_cv: f64,
    #[serde(default = "tol_biortho")]
    pub biortho: f64,
}

fn tol_residual() -> f64 {
    1e-20
}
fn tol_order() -> f64 {
    1e-18
}
fn tol_identity() -> f64 {
    1e-30
}
fn tol_equilibrium() -> f64 {
    1e-4
}
fn tol_uniqueness() -> f64 {
    1e-3
}
fn tol_cauchy() -> f64 {
    0.1
}
fn tol_ratio() -> f64 {
    1e-3
}
fn tol_cv() -> f64 {
    0.02
}
fn tol_biortho() -> f64 {
    1e-12
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: tol_residual(),
            order: tol_order(),
            identity: tol_identity(),
            equilibrium: tol_equilibrium(),
            uniqueness: tol_uniqueness(),
            cauchy_fraction: tol_cauchy(),
            ratio_error: tol_ratio(),
            boundary_cv: tol_cv(),
            biortho: tol_biortho(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumConfig {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    #[serde(default = "default_panels")]
    pub panels_per_set: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_panels() -> usize {
    256
}
fn default_max_iter() -> usize {
    50_000
}

/// One experiment. S1 and S2 both start from `base`; `s1`/`s2` list σ¹_1.. and σ²_1...
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_precision")]
    pub precision_bits: u32,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    pub base: WeightSpec,
    #[serde(default)]
    pub s1: Vec<WeightSpec>,
    #[serde(default)]
    pub s2: Vec<WeightSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<MultiIndexPair>,
    /// |n1| of the samples along the ray.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Shift>,
    #[serde(default)]
    pub j: i32,
    /// Test points as [re, im]; defaults to five points around the supports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_precision() -> u32 {
    256
}
fn default_nodes() -> usize {
    64
}

pub struct ParseError {
    pub message: String,
    pub byte_offset: usize,
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (start + column.saturating_sub(1)).min(text.len())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        serde_json::from_str(text).map_err(|e| ParseError {
            message: e.to_string(),
            byte_offset: byte_offset(text, e.line(), e.column()),
        })
    }

    /// SHA-256 of the compact serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn systems(&self) -> nikishin_core::Result<Arc<SystemPair>> {
        let build = |rest: &[WeightSpec]| {
            let mut specs = vec![self.base.clone()];
            specs.extend(rest.iter().cloned());
            NikishinSystem::from_specs(&specs, self.quadrature_nodes, self.precision_bits)
        };
        Ok(Arc::new(SystemPair::new(
            build(&self.s1)?,
            build(&self.s2)?,
        )?))
    }

    pub fn m1(&self) -> usize {
        self.s1.len()
    }

    pub fn m2(&self) -> usize {
        self.s2.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets() {
        let t = "{\n  \"a\": x\n}";
        assert_eq!(byte_offset(t, 2, 8), 9);
        assert_eq!(&t[9..10], "x");
        assert_eq!(byte_offset(t, 1, 1), 0);
    }

    #[test]
    fn round_trip() {
        for f in std::fs::read_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs")).unwrap() {
            let text = std::fs::read_to_string(f.unwrap().path()).unwrap();
            let c = ExperimentConfig::parse(&text).ok().unwrap();
            let back = ExperimentConfig::parse(&serde_json::to_string(&c).unwrap())
                .ok()
                .unwrap();
            assert_eq!(c, back);
            assert_eq!(c.hash(), back.hash());
        }
    }
}
