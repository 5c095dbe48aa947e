//! Scenario file schema and resolution.
//!
//! A scenario is a single JSON document declaring level systems, pulses,
//! gate requests, raw Hamiltonian declarations, step-plan requests, and
//! effective-model sweeps. Parsing is strict: unknown fields are rejected
//! and every reference by name must resolve.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use num_complex::Complex64 as C64;
use serde::Deserialize;

use holoq::effective::Mechanism;
use holoq::levelspace::{product_space, uniform_chain, LevelGraph, ProductBasis};
use holoq::linalg::CVec;
use holoq::pulses::{Envelope, Segment, SegmentedPulse, Shape};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub systems: Vec<SystemDecl>,
    #[serde(default)]
    pub pulses: Vec<PulseDecl>,
    #[serde(default)]
    pub gates: Vec<GateDecl>,
    #[serde(default)]
    pub hamiltonians: Vec<HamiltonianDecl>,
    #[serde(default)]
    pub plans: Vec<PlanDecl>,
    #[serde(default)]
    pub effective: Vec<EffectiveDecl>,
    #[serde(default)]
    pub output: OutputDecl,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDecl {
    pub name: String,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub v1: Option<Vec<String>>,
    #[serde(default)]
    pub v2: Option<Vec<String>>,
    #[serde(default)]
    pub edges: Option<Vec<(String, String)>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeDecl {
    Constant,
    SineSquared,
}

impl From<ShapeDecl> for Shape {
    fn from(s: ShapeDecl) -> Shape {
        match s {
            ShapeDecl::Constant => Shape::Constant,
            ShapeDecl::SineSquared => Shape::SineSquared,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseDecl {
    pub name: String,
    pub shape: ShapeDecl,
    pub segments: Vec<SegmentDecl>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentDecl {
    pub peak_amplitude: f64,
    pub duration: f64,
    pub phase: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateDecl {
    pub name: String,
    /// One of `u2`, `u3`, `u4`, `u5`.
    pub kind: String,
    pub system: String,
    /// Eigenstate coefficients over the gate's span basis, one list per
    /// state, entries as `[re, im]`.
    pub states: Vec<Vec<[f64; 2]>>,
    /// Requested eigenphases, one per state.
    pub phases: Vec<f64>,
    #[serde(default)]
    pub shape: Option<ShapeDecl>,
    #[serde(default)]
    pub fidelity_tolerance: Option<f64>,
    #[serde(default)]
    pub leakage_tolerance: Option<f64>,
    #[serde(default)]
    pub transport_tolerance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianDecl {
    pub name: String,
    /// One of `h1` .. `h5`.
    pub kind: String,
    pub system: String,
    #[serde(default)]
    pub states: Vec<Vec<[f64; 2]>>,
    /// Pulse names, resolved against the scenario's pulse declarations.
    pub pulses: Vec<String>,
    #[serde(default)]
    pub transport_tolerance: Option<f64>,
    #[serde(default)]
    pub leakage_tolerance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDecl {
    pub name: String,
    pub blocks: usize,
    #[serde(default = "default_d")]
    pub d: u8,
    #[serde(default)]
    pub ion_counts: Option<Vec<usize>>,
    #[serde(default)]
    pub allow_extension: bool,
    #[serde(default)]
    pub sample_size: Option<usize>,
}

fn default_d() -> u8 {
    2
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveDecl {
    pub name: String,
    pub eta: f64,
    pub nu: f64,
    pub omega: [f64; 4],
    /// Sweep points: detuning as a multiple of `max |eta omega_j|`.
    pub delta_over_eta_omega: Vec<f64>,
    pub n_max: usize,
    /// `first` or `second`.
    pub mechanism: String,
    #[serde(default)]
    pub total_time: Option<f64>,
    /// Transfer-frequency tolerance per sweep point (single value applies
    /// to all points).
    #[serde(default)]
    pub frequency_tolerance: Option<Vec<f64>>,
    #[serde(default)]
    pub refine_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDecl {
    #[serde(default)]
    pub format: Option<String>,
}

impl Scenario {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read scenario file {}", path.display()))?;
        let scenario: Scenario =
            serde_json::from_str(&text).context("scenario file does not match the schema")?;
        if scenario.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (expected {})",
                scenario.schema_version,
                SCHEMA_VERSION
            );
        }
        scenario.validate_names()?;
        Ok(scenario)
    }

    /// Resolve every by-name reference, failing with the unresolved name.
    fn validate_names(&self) -> anyhow::Result<()> {
        let mut seen = std::collections::HashSet::new();
        for s in &self.systems {
            if !seen.insert(&s.name) {
                bail!("duplicate system name `{}`", s.name);
            }
        }
        let pulse_names: std::collections::HashSet<_> =
            self.pulses.iter().map(|p| &p.name).collect();
        for g in &self.gates {
            if !self.systems.iter().any(|s| s.name == g.system) {
                bail!("gate `{}` references unknown system `{}`", g.name, g.system);
            }
        }
        for h in &self.hamiltonians {
            if !self.systems.iter().any(|s| s.name == h.system) {
                bail!(
                    "hamiltonian `{}` references unknown system `{}`",
                    h.name,
                    h.system
                );
            }
            for p in &h.pulses {
                if !pulse_names.contains(p) {
                    bail!("hamiltonian `{}` references unknown pulse `{}`", h.name, p);
                }
            }
        }
        Ok(())
    }

    pub fn system_graph(&self, name: &str) -> anyhow::Result<LevelGraph> {
        let decl = self
            .systems
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| anyhow!("unknown system `{name}`"))?;
        match (&decl.preset, &decl.v1, &decl.v2) {
            (Some(p), None, None) => match p.as_str() {
                "qubit4" => Ok(LevelGraph::qubit4()),
                "qutrit5" => Ok(LevelGraph::qutrit5()),
                other => bail!("unknown system preset `{other}`"),
            },
            (None, Some(v1), Some(v2)) => {
                let edges = decl.edges.clone().unwrap_or_default();
                let edge_refs: Vec<(&str, &str)> =
                    edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
                let v1_refs: Vec<&str> = v1.iter().map(String::as_str).collect();
                let v2_refs: Vec<&str> = v2.iter().map(String::as_str).collect();
                Ok(LevelGraph::new(&v1_refs, &v2_refs, &edge_refs)?)
            }
            _ => bail!(
                "system `{name}` must declare either a preset or explicit v1/v2 label lists"
            ),
        }
    }

    pub fn pulse(&self, name: &str) -> anyhow::Result<SegmentedPulse> {
        let decl = self
            .pulses
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| anyhow!("unknown pulse `{name}`"))?;
        let segments = decl
            .segments
            .iter()
            .map(|s| {
                Ok(Segment {
                    envelope: Envelope::new(decl.shape.into(), s.peak_amplitude, s.duration)?,
                    phase: s.phase,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(SegmentedPulse::new(segments)?)
    }

    pub fn mechanism(name: &str) -> anyhow::Result<Mechanism> {
        match name {
            "first" => Ok(Mechanism::First),
            "second" => Ok(Mechanism::Second),
            other => bail!("unknown coupling mechanism `{other}` (use first|second)"),
        }
    }
}

/// Span basis (per-site label tuples) of each gate/Hamiltonian kind, plus
/// the number of sites and the number of declared states it expects.
pub fn kind_layout(kind: &str) -> anyhow::Result<(usize, Vec<Vec<&'static str>>, usize)> {
    Ok(match kind {
        "u2" | "h2" => (2, vec![vec!["1", "0"], vec!["1", "1"]], 2),
        "u3" | "h3" => (
            2,
            vec![vec!["0", "0"], vec!["0", "1"], vec!["1", "0"], vec!["1", "1"]],
            3,
        ),
        "u4" | "h4" => (1, vec![vec!["0"], vec!["1"], vec!["2"]], 2),
        "u5" | "h5" => (2, vec![vec!["2", "0"], vec!["2", "1"], vec!["2", "2"]], 3),
        "h1" => (1, vec![], 0),
        other => bail!("unknown kind `{other}`"),
    })
}

/// Build the chain basis for a kind over the named system graph.
pub fn kind_basis(graph: &LevelGraph, kind: &str) -> anyhow::Result<ProductBasis> {
    let (sites, _, _) = kind_layout(kind)?;
    Ok(if sites == 1 {
        product_space(vec![graph.clone()], None)?
    } else {
        uniform_chain(graph, sites)?
    })
}

/// Lift declared span coefficients to full-basis state vectors.
pub fn lift_states(
    basis: &ProductBasis,
    kind: &str,
    states: &[Vec<[f64; 2]>],
) -> anyhow::Result<Vec<CVec>> {
    let (_, span, expected) = kind_layout(kind)?;
    if expected > 0 && states.len() != expected {
        bail!("kind `{kind}` expects {expected} states, got {}", states.len());
    }
    let dim = basis.dense_dim(holoq::DEFAULT_DENSE_CAP)?;
    let mut out = Vec::with_capacity(states.len());
    for coeffs in states {
        if coeffs.len() != span.len() {
            bail!(
                "state coefficient list has {} entries; the `{kind}` span has {}",
                coeffs.len(),
                span.len()
            );
        }
        let mut v = CVec::zeros(dim);
        for (labels, c) in span.iter().zip(coeffs) {
            let refs: Vec<&str> = labels.clone();
            let idx = basis.index_of_site_labels(&refs)? as usize;
            v[idx] = C64::new(c[0], c[1]);
        }
        out.push(v);
    }
    Ok(out)
}

/// Named-lookup helper for per-point tolerances.
pub fn tolerance_for(list: &Option<Vec<f64>>, index: usize, default: f64) -> f64 {
    match list {
        Some(v) if v.len() == 1 => v[0],
        Some(v) => v.get(index).copied().unwrap_or(default),
        None => default,
    }
}

/// Classify a core error for the exit code: input-shaped errors are usage
/// problems (exit 2), computational failures are check failures (exit 1).
pub fn error_exit_code(err: &holoq::Error) -> i32 {
    use holoq::Error::*;
    match err {
        NoConvergence { .. } | CalibrationFailed { .. } => 1,
        _ => 2,
    }
}
