//! Target unitaries on the computational subspace and calibration of the
//! two-interval phase-jump schedules that realize them.
//!
//! Every target here is diagonal in a declared eigenbasis: a set of
//! mutually orthogonal states picking up controllable phases, identity on
//! the orthogonal complement. The phase-jump-to-eigenphase map is obtained
//! by numerical calibration against the simulator (the two-segment
//! propagator is linear in the jump, so a short secant refinement lands on
//! the requested phase).

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Mutex;

use once_cell::sync::Lazy;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{
    basis_state, h2_spec, h3_spec, h4_spec, h5_spec, HamiltonianSpec, ORTHOGONALITY_TOL,
};
use crate::levelspace::{product_space, LevelGraph, ProductBasis};
use crate::linalg::{eye, inner, normalized, unitarity_defect, CMat, CVec, C64};
use crate::propagate::{evolve_dense_with, EvolveOptions};
use crate::pulses::{two_interval_schedule, SegmentedPulse, Shape};
use crate::DEFAULT_DENSE_CAP;

/// A target gate on the computational subspace.
#[derive(Debug, Clone)]
pub enum TargetKind {
    /// Dense matrix over the computational indices (ascending order).
    Matrix(CMat),
    /// Diagonal controlled-phase gate on `d^n` states: `-1` on
    /// `|flip...flip>`, `+1` elsewhere.
    ControlledPhase { n_sites: usize, d: u8, flip_level: u8 },
}

/// A target unitary with its declared eigenbasis parameters.
#[derive(Debug, Clone)]
pub struct TargetGate {
    kind: TargetKind,
    basis_labels: Vec<String>,
    params: Vec<(String, f64)>,
}

impl TargetGate {
    pub fn dim(&self) -> u128 {
        match &self.kind {
            TargetKind::Matrix(m) => m.nrows() as u128,
            TargetKind::ControlledPhase { n_sites, d, .. } => (*d as u128).pow(*n_sites as u32),
        }
    }

    pub fn kind(&self) -> &TargetKind {
        &self.kind
    }

    pub fn basis_labels(&self) -> &[String] {
        &self.basis_labels
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    /// Dense matrix over the computational subspace (cap-checked for the
    /// controlled-phase form).
    pub fn matrix(&self) -> Result<CMat> {
        match &self.kind {
            TargetKind::Matrix(m) => Ok(m.clone()),
            TargetKind::ControlledPhase { n_sites, d, flip_level } => {
                let dim_u = (*d as u128).pow(*n_sites as u32);
                if dim_u > DEFAULT_DENSE_CAP as u128 {
                    return Err(Error::DimensionOverflow { dim: dim_u, cap: DEFAULT_DENSE_CAP });
                }
                let dim = dim_u as usize;
                let mut m = eye(dim);
                let mut flip_idx = 0usize;
                for _ in 0..*n_sites {
                    flip_idx = flip_idx * *d as usize + *flip_level as usize;
                }
                m[[flip_idx, flip_idx]] = C64::new(-1.0, 0.0);
                Ok(m)
            }
        }
    }

    /// Expected phase on a computational basis state given per-site `V1`
    /// level indices (controlled-phase form only).
    pub fn expected_phase(&self, levels: &[u8]) -> Result<C64> {
        match &self.kind {
            TargetKind::ControlledPhase { n_sites, d, flip_level } => {
                if levels.len() != *n_sites {
                    return Err(Error::DimensionMismatch(levels.len(), *n_sites));
                }
                if levels.iter().any(|&lv| lv >= *d) {
                    return Err(Error::InvalidLabel(format!("level outside 0..{d}")));
                }
                Ok(if levels.iter().all(|&lv| lv == *flip_level) {
                    C64::new(-1.0, 0.0)
                } else {
                    C64::new(1.0, 0.0)
                })
            }
            TargetKind::Matrix(_) => Err(Error::InvalidInput(
                "expected_phase applies to controlled-phase targets".into(),
            )),
        }
    }
}

/// Coordinates of a full-basis state restricted to the computational
/// subspace, with support validation.
fn comp_coords(state: &CVec, comp: &[usize]) -> Result<CVec> {
    let mut out = CVec::zeros(comp.len());
    let mut captured = 0.0;
    for (k, &idx) in comp.iter().enumerate() {
        out[k] = state[idx];
        captured += state[idx].norm_sqr();
    }
    let total: f64 = state.iter().map(|z| z.norm_sqr()).sum();
    let resid = (total - captured).max(0.0).sqrt();
    if resid > ORTHOGONALITY_TOL {
        return Err(Error::SupportOutsideSpan(resid));
    }
    Ok(out)
}

fn check_span(basis: &ProductBasis, state: &CVec, span_labels: &[&[&str]]) -> Result<()> {
    let span: Vec<usize> = span_labels
        .iter()
        .map(|l| basis.index_of_site_labels(l).map(|i| i as usize))
        .collect::<Result<_>>()?;
    let captured: f64 = span.iter().map(|&i| state[i].norm_sqr()).sum();
    let total: f64 = state.iter().map(|z| z.norm_sqr()).sum();
    let resid = (total - captured).max(0.0).sqrt();
    if resid > ORTHOGONALITY_TOL {
        return Err(Error::SupportOutsideSpan(resid));
    }
    Ok(())
}

fn check_orthogonal(states: &[&CVec]) -> Result<Vec<CVec>> {
    let normed: Vec<CVec> = states.iter().map(|s| normalized(s)).collect::<Result<_>>()?;
    for i in 0..normed.len() {
        for j in (i + 1)..normed.len() {
            let ov = inner(&normed[i], &normed[j]).norm();
            if ov > ORTHOGONALITY_TOL {
                return Err(Error::NonOrthogonalStates(ov));
            }
        }
    }
    Ok(normed)
}

/// `I + sum_k (e^{i phase_k} - 1) |state_k><state_k|` over the
/// computational coordinates.
fn phase_gate_matrix(states: &[CVec], phases: &[f64], comp: &[usize]) -> Result<CMat> {
    let d = comp.len();
    let mut m = eye(d);
    for (state, &phase) in states.iter().zip(phases) {
        let coords = comp_coords(state, comp)?;
        let w = C64::from_polar(1.0, phase) - C64::new(1.0, 0.0);
        for a in 0..d {
            for b in 0..d {
                m[[a, b]] += w * coords[a] * coords[b].conj();
            }
        }
    }
    debug_assert!(unitarity_defect(&m) <= 1e-12);
    Ok(m)
}

fn comp_labels(basis: &ProductBasis, comp: &[usize]) -> Vec<String> {
    comp.iter()
        .map(|&i| basis.labels_of(i as u128).sites.join(" "))
        .collect()
}

/// Two-qubit controlled gate `U2`: phases `gamma0, gamma1` on two
/// orthogonal states of `Span{|10>, |11>}`, identity on `|00>, |01>`.
pub fn u2_target(
    basis: &ProductBasis,
    phi0: &CVec,
    phi1: &CVec,
    gamma0: f64,
    gamma1: f64,
) -> Result<TargetGate> {
    for s in [phi0, phi1] {
        check_span(basis, s, &[&["1", "0"], &["1", "1"]])?;
    }
    let normed = check_orthogonal(&[phi0, phi1])?;
    let comp = basis.computational_indices(DEFAULT_DENSE_CAP)?;
    let m = phase_gate_matrix(&normed, &[gamma0, gamma1], &comp)?;
    Ok(TargetGate {
        kind: TargetKind::Matrix(m),
        basis_labels: comp_labels(basis, &comp),
        params: vec![("gamma0".into(), gamma0), ("gamma1".into(), gamma1)],
    })
}

/// General two-qubit gate `U3`: phases on three mutually orthogonal states
/// of the two-qubit computational space, identity on the complement.
pub fn u3_target(basis: &ProductBasis, phis: [&CVec; 3], gammas: [f64; 3]) -> Result<TargetGate> {
    for s in phis {
        check_span(basis, s, &[&["0", "0"], &["0", "1"], &["1", "0"], &["1", "1"]])?;
    }
    let normed = check_orthogonal(&phis)?;
    let comp = basis.computational_indices(DEFAULT_DENSE_CAP)?;
    let m = phase_gate_matrix(&normed, &gammas, &comp)?;
    Ok(TargetGate {
        kind: TargetKind::Matrix(m),
        basis_labels: comp_labels(basis, &comp),
        params: vec![
            ("gamma_a".into(), gammas[0]),
            ("gamma_b".into(), gammas[1]),
            ("gamma_c".into(), gammas[2]),
        ],
    })
}

/// One-qutrit gate `U4`: phases on two orthogonal states of
/// `Span{|0>, |1>, |2>}`, identity on the computed complement.
pub fn u4_target(
    basis: &ProductBasis,
    psi0: &CVec,
    psi1: &CVec,
    xi0: f64,
    xi1: f64,
) -> Result<TargetGate> {
    for s in [psi0, psi1] {
        check_span(basis, s, &[&["0"], &["1"], &["2"]])?;
    }
    let normed = check_orthogonal(&[psi0, psi1])?;
    let comp = basis.computational_indices(DEFAULT_DENSE_CAP)?;
    let m = phase_gate_matrix(&normed, &[xi0, xi1], &comp)?;
    Ok(TargetGate {
        kind: TargetKind::Matrix(m),
        basis_labels: comp_labels(basis, &comp),
        params: vec![("xi0".into(), xi0), ("xi1".into(), xi1)],
    })
}

/// Two-qutrit controlled gate `U5`: phases on three mutually orthogonal
/// states of `Span{|20>, |21>, |22>}`, identity elsewhere.
pub fn u5_target(basis: &ProductBasis, psis: [&CVec; 3], xis: [f64; 3]) -> Result<TargetGate> {
    for s in psis {
        check_span(basis, s, &[&["2", "0"], &["2", "1"], &["2", "2"]])?;
    }
    let normed = check_orthogonal(&psis)?;
    let comp = basis.computational_indices(DEFAULT_DENSE_CAP)?;
    let m = phase_gate_matrix(&normed, &xis, &comp)?;
    Ok(TargetGate {
        kind: TargetKind::Matrix(m),
        basis_labels: comp_labels(basis, &comp),
        params: vec![
            ("xi_a".into(), xis[0]),
            ("xi_b".into(), xis[1]),
            ("xi_c".into(), xis[2]),
        ],
    })
}

/// Multi-qudit controlled phase: `-1` on `|flip...flip>` over `d^n`
/// computational states, `+1` on all others.
pub fn controlled_phase_target(n_sites: usize, d: u8, flip_label: &str) -> Result<TargetGate> {
    if n_sites < 2 {
        return Err(Error::InvalidInput("controlled phase needs >= 2 sites".into()));
    }
    let graph = match d {
        2 => LevelGraph::qubit4(),
        3 => LevelGraph::qutrit5(),
        _ => return Err(Error::InvalidInput(format!("unsupported qudit dimension {d}"))),
    };
    let flip_level = graph.level_index(flip_label)?;
    if !graph.is_computational(flip_level) {
        return Err(Error::InvalidLabel(flip_label.to_owned()));
    }
    let dim = (d as u128).pow(n_sites as u32);
    let basis_labels = if dim <= DEFAULT_DENSE_CAP as u128 {
        let mut labels = Vec::with_capacity(dim as usize);
        for i in 0..dim as usize {
            let mut digits = Vec::with_capacity(n_sites);
            let mut rem = i;
            for _ in 0..n_sites {
                digits.push(rem % d as usize);
                rem /= d as usize;
            }
            digits.reverse();
            labels.push(
                digits
                    .iter()
                    .map(|&lv| graph.label(lv as u8).to_owned())
                    .collect::<Vec<_>>()
                    .join(" "),
            );
        }
        labels
    } else {
        Vec::new()
    };
    Ok(TargetGate {
        kind: TargetKind::ControlledPhase { n_sites, d, flip_level },
        basis_labels,
        params: vec![("flip_phase".into(), PI)],
    })
}

/// Result of calibrating a two-interval schedule for a requested
/// eigenphase.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhaseJumpCalibration {
    pub phase1: f64,
    pub phase2: f64,
    /// Eigenphase realized by simulation at the calibrated jump.
    pub realized: f64,
}

fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Simulate the two-segment schedule on a two-level pair and return the
/// eigenphase acquired by the coupled state.
fn simulated_eigenphase(jump: f64, shape: Shape, area: f64) -> Result<f64> {
    let g = LevelGraph::new(&["g"], &["e"], &[("g", "e")])?;
    let basis = product_space(vec![g], None)?;
    let pulse = two_interval_schedule(area, 0.0, jump, shape)?;
    let aux = basis_state(&basis, &["e"])?;
    let comp = basis_state(&basis, &["g"])?;
    let coupling = crate::hamiltonian::Coupling::bipartite(&basis, &[0], &aux, &comp, pulse)?;
    let spec = HamiltonianSpec::new(basis, vec![coupling], "calibration");
    let prop = evolve_dense_with(
        &spec,
        &EvolveOptions { start_substeps: 16, checkpoints_per_segment: 0, ..Default::default() },
    )?;
    let amp = prop.unitary[[0, 0]];
    if (amp.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::CalibrationFailed { requested: f64::NAN, realized: amp.norm() });
    }
    Ok(amp.arg())
}

static CALIBRATION_CURVES: Lazy<Mutex<HashMap<(Shape, u64), (f64, f64, f64)>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Find segment phases `(phase1, phase2)` of a `pi/2 + pi/2` two-interval
/// schedule whose realized eigenphase on the coupled state equals `gamma`
/// within `1e-8`. The jump-to-phase map is measured against the simulator
/// and cached per `(shape, area)`.
pub fn calibrate_phase_jump(gamma: f64, shape: Shape) -> Result<PhaseJumpCalibration> {
    let area = FRAC_PI_2;
    let gamma = wrap_angle(gamma);
    let key = (shape, area.to_bits());
    let curve = {
        let cache = CALIBRATION_CURVES.lock().unwrap();
        cache.get(&key).copied()
    };
    let (d0, r0, slope) = match curve {
        Some(c) => c,
        None => {
            let d0 = 0.5f64;
            let d1 = 1.25f64;
            let r0 = simulated_eigenphase(d0, shape, area)?;
            let r1 = simulated_eigenphase(d1, shape, area)?;
            let slope = wrap_angle(r1 - r0) / (d1 - d0);
            let entry = (d0, r0, slope);
            CALIBRATION_CURVES.lock().unwrap().insert(key, entry);
            entry
        }
    };
    let mut jump = d0 + wrap_angle(gamma - r0) / slope;
    let mut realized = simulated_eigenphase(jump, shape, area)?;
    for _ in 0..8 {
        let err = wrap_angle(realized - gamma);
        if err.abs() <= 1e-8 {
            return Ok(PhaseJumpCalibration { phase1: 0.0, phase2: wrap_angle(jump), realized });
        }
        jump -= err / slope;
        realized = simulated_eigenphase(jump, shape, area)?;
    }
    Err(Error::CalibrationFailed { requested: gamma, realized })
}

/// A Hamiltonian spec with calibrated schedules plus the target it should
/// realize.
#[derive(Debug, Clone)]
pub struct GateDrive {
    pub spec: HamiltonianSpec,
    pub target: TargetGate,
    pub calibrations: Vec<PhaseJumpCalibration>,
}

fn calibrated_pulses(
    phases: &[f64],
    shape: Shape,
) -> Result<(Vec<SegmentedPulse>, Vec<PhaseJumpCalibration>)> {
    let mut pulses = Vec::with_capacity(phases.len());
    let mut cals = Vec::with_capacity(phases.len());
    for &g in phases {
        let cal = calibrate_phase_jump(g, shape)?;
        pulses.push(two_interval_schedule(FRAC_PI_2, cal.phase1, cal.phase2, shape)?);
        cals.push(cal);
    }
    Ok((pulses, cals))
}

/// Build the `U2` drive: calibrated schedules plus target.
pub fn u2_drive(
    basis: &ProductBasis,
    phi0: &CVec,
    phi1: &CVec,
    gamma0: f64,
    gamma1: f64,
    shape: Shape,
) -> Result<GateDrive> {
    let (pulses, cals) = calibrated_pulses(&[gamma0, gamma1], shape)?;
    let spec = h2_spec(basis, phi0, phi1, pulses[0].clone(), pulses[1].clone())?;
    let target = u2_target(basis, phi0, phi1, gamma0, gamma1)?;
    Ok(GateDrive { spec, target, calibrations: cals })
}

/// Build the `U3` drive.
pub fn u3_drive(
    basis: &ProductBasis,
    phis: [&CVec; 3],
    gammas: [f64; 3],
    shape: Shape,
) -> Result<GateDrive> {
    let (pulses, cals) = calibrated_pulses(&gammas, shape)?;
    let (spec, _perp) =
        h3_spec(basis, phis, [pulses[0].clone(), pulses[1].clone(), pulses[2].clone()])?;
    let target = u3_target(basis, phis, gammas)?;
    Ok(GateDrive { spec, target, calibrations: cals })
}

/// Build the `U4` drive on a single qutrit site.
pub fn u4_drive(
    basis: &ProductBasis,
    psi0: &CVec,
    psi1: &CVec,
    xi0: f64,
    xi1: f64,
    shape: Shape,
) -> Result<GateDrive> {
    let (pulses, cals) = calibrated_pulses(&[xi0, xi1], shape)?;
    let (spec, _perp) = h4_spec(basis, 0, psi0, psi1, pulses[0].clone(), pulses[1].clone())?;
    let target = u4_target(basis, psi0, psi1, xi0, xi1)?;
    Ok(GateDrive { spec, target, calibrations: cals })
}

/// Build the `U5` drive.
pub fn u5_drive(
    basis: &ProductBasis,
    psis: [&CVec; 3],
    xis: [f64; 3],
    shape: Shape,
) -> Result<GateDrive> {
    let (pulses, cals) = calibrated_pulses(&xis, shape)?;
    let spec = h5_spec(basis, psis, [pulses[0].clone(), pulses[1].clone(), pulses[2].clone()])?;
    let target = u5_target(basis, psis, xis)?;
    Ok(GateDrive { spec, target, calibrations: cals })
}

/// Seeded orthonormal vectors supported on the given span labels, lifted to
/// the full basis. Used for randomized gate parameter sets.
pub fn seeded_span_states(
    basis: &ProductBasis,
    span_labels: &[&[&str]],
    count: usize,
    rng: &mut impl rand::Rng,
) -> Result<Vec<CVec>> {
    let dim = basis.dense_dim(DEFAULT_DENSE_CAP)?;
    let span: Vec<usize> = span_labels
        .iter()
        .map(|l| basis.index_of_site_labels(l).map(|i| i as usize))
        .collect::<Result<_>>()?;
    let raw: Vec<CVec> = (0..count)
        .map(|_| {
            let mut v = CVec::zeros(dim);
            for &idx in &span {
                v[idx] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            v
        })
        .collect();
    crate::linalg::gram_schmidt(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelspace::uniform_chain;
    use crate::linalg::max_abs_diff;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_qubit_basis() -> ProductBasis {
        uniform_chain(&LevelGraph::qubit4(), 2).unwrap()
    }

    #[test]
    fn u2_zero_phases_is_identity() {
        let basis = two_qubit_basis();
        let phi0 = basis_state(&basis, &["1", "0"]).unwrap();
        let phi1 = basis_state(&basis, &["1", "1"]).unwrap();
        let t = u2_target(&basis, &phi0, &phi1, 0.0, 0.0).unwrap();
        assert_eq!(max_abs_diff(&t.matrix().unwrap(), &eye(4)), 0.0);
    }

    #[test]
    fn u2_computational_choice_gives_cz() {
        let basis = two_qubit_basis();
        let phi0 = basis_state(&basis, &["1", "0"]).unwrap();
        let phi1 = basis_state(&basis, &["1", "1"]).unwrap();
        let t = u2_target(&basis, &phi0, &phi1, 0.0, PI).unwrap();
        let mut cz = eye(4);
        cz[[3, 3]] = C64::new(-1.0, 0.0);
        assert!(max_abs_diff(&t.matrix().unwrap(), &cz) < 1e-15);
    }

    #[test]
    fn u2_projector_formula_on_rotated_pair() {
        // phi0 = (|10> + |11>)/sqrt2 with gamma0 = pi/2, phi1 orthogonal
        // with gamma1 = 0: block I + (i - 1) P0 on {10, 11}.
        let basis = two_qubit_basis();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi0 = crate::hamiltonian::superposition(
            &basis,
            &[(&["1", "0"], C64::new(s, 0.0)), (&["1", "1"], C64::new(s, 0.0))],
        )
        .unwrap();
        let phi1 = crate::hamiltonian::superposition(
            &basis,
            &[(&["1", "0"], C64::new(s, 0.0)), (&["1", "1"], C64::new(-s, 0.0))],
        )
        .unwrap();
        let t = u2_target(&basis, &phi0, &phi1, FRAC_PI_2, 0.0).unwrap();
        let m = t.matrix().unwrap();
        assert!(unitarity_defect(&m) <= 1e-12);
        let half = C64::new(-0.5, 0.5); // (e^{i pi/2} - 1)/2
        let one = C64::new(1.0, 0.0);
        assert!((m[[2, 2]] - (one + half)).norm() < 1e-14);
        assert!((m[[3, 3]] - (one + half)).norm() < 1e-14);
        assert!((m[[2, 3]] - half).norm() < 1e-14);
        assert!((m[[3, 2]] - half).norm() < 1e-14);
        assert!((m[[0, 0]] - one).norm() < 1e-15);
    }

    #[test]
    fn u3_eigenstructure_of_seeded_triple() {
        let basis = two_qubit_basis();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let span: &[&[&str]] = &[&["0", "0"], &["0", "1"], &["1", "0"], &["1", "1"]];
        let phis = seeded_span_states(&basis, span, 3, &mut rng).unwrap();
        let gammas = [0.7, -1.9, 2.4];
        let t = u3_target(&basis, [&phis[0], &phis[1], &phis[2]], gammas).unwrap();
        let m = t.matrix().unwrap();
        assert!(unitarity_defect(&m) <= 1e-12);
        let comp = basis.computational_indices(DEFAULT_DENSE_CAP).unwrap();
        for (phi, &g) in phis.iter().zip(&gammas) {
            let coords = comp_coords(phi, &comp).unwrap();
            let out = m.dot(&coords);
            let expect = coords.mapv(|z| z * C64::from_polar(1.0, g));
            let diff: f64 = out
                .iter()
                .zip(expect.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12);
        }
        // Trace pins the remaining eigenvalue at +1.
        let tr: C64 = (0..4).map(|i| m[[i, i]]).sum();
        let expected_tr: C64 = C64::new(1.0, 0.0)
            + gammas.iter().map(|&g| C64::from_polar(1.0, g)).sum::<C64>();
        assert!((tr - expected_tr).norm() < 1e-12);
    }

    #[test]
    fn u3_all_pi_on_computational_triple() {
        let basis = two_qubit_basis();
        let a = basis_state(&basis, &["0", "1"]).unwrap();
        let b = basis_state(&basis, &["1", "0"]).unwrap();
        let c = basis_state(&basis, &["1", "1"]).unwrap();
        let t = u3_target(&basis, [&a, &b, &c], [PI, PI, PI]).unwrap();
        let m = t.matrix().unwrap();
        let mut expect = eye(4);
        for i in 1..4 {
            expect[[i, i]] = C64::new(-1.0, 0.0);
        }
        assert!(max_abs_diff(&m, &expect) < 1e-15);
    }

    #[test]
    fn u4_and_u5_targets() {
        let basis3 = product_space(vec![LevelGraph::qutrit5()], None).unwrap();
        let psi0 = basis_state(&basis3, &["0"]).unwrap();
        let psi1 = basis_state(&basis3, &["1"]).unwrap();
        let t = u4_target(&basis3, &psi0, &psi1, 0.0, 0.0).unwrap();
        assert_eq!(max_abs_diff(&t.matrix().unwrap(), &eye(3)), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psis = seeded_span_states(&basis3, &[&["0"], &["1"], &["2"]], 2, &mut rng).unwrap();
        let t = u4_target(&basis3, &psis[0], &psis[1], 1.2, -0.4).unwrap();
        let m = t.matrix().unwrap();
        assert!(unitarity_defect(&m) <= 1e-12);
        let tr: C64 = (0..3).map(|i| m[[i, i]]).sum();
        let expect = C64::new(1.0, 0.0) + C64::from_polar(1.0, 1.2) + C64::from_polar(1.0, -0.4);
        assert!((tr - expect).norm() < 1e-12);

        let basis5 = uniform_chain(&LevelGraph::qutrit5(), 2).unwrap();
        let pa = basis_state(&basis5, &["2", "0"]).unwrap();
        let pb = basis_state(&basis5, &["2", "1"]).unwrap();
        let pc = basis_state(&basis5, &["2", "2"]).unwrap();
        let t5 = u5_target(&basis5, [&pa, &pb, &pc], [PI, PI, PI]).unwrap();
        let m5 = t5.matrix().unwrap();
        assert_eq!(m5.nrows(), 9);
        // -1 exactly on the |2 x> block (comp indices 6, 7, 8).
        for i in 0..9 {
            let expect = if i >= 6 { -1.0 } else { 1.0 };
            assert!((m5[[i, i]] - C64::new(expect, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn controlled_phase_targets() {
        let cz = controlled_phase_target(2, 2, "1").unwrap();
        let m = cz.matrix().unwrap();
        let mut expect = eye(4);
        expect[[3, 3]] = C64::new(-1.0, 0.0);
        assert_eq!(max_abs_diff(&m, &expect), 0.0);

        let big = controlled_phase_target(12, 2, "1").unwrap();
        let mb = big.matrix().unwrap();
        let minus_count = (0..4096)
            .filter(|&i| (mb[[i, i]] - C64::new(-1.0, 0.0)).norm() < 1e-15)
            .count();
        assert_eq!(minus_count, 1);

        let q = controlled_phase_target(2, 3, "2").unwrap();
        let mq = q.matrix().unwrap();
        for i in 0..9 {
            let expect = if i == 8 { -1.0 } else { 1.0 };
            assert!((mq[[i, i]] - C64::new(expect, 0.0)).norm() < 1e-15);
        }

        assert!(matches!(controlled_phase_target(2, 2, "a0"), Err(Error::InvalidLabel(_))));
    }

    #[test]
    fn calibration_pi_means_no_jump() {
        let cal = calibrate_phase_jump(PI, Shape::Constant).unwrap();
        assert!(wrap_angle(cal.phase2 - cal.phase1).abs() < 1e-8);
        assert!(wrap_angle(cal.realized - PI).abs() < 1e-8);
    }

    #[test]
    fn calibration_matches_brute_force_sweep_oracle() {
        // Independent oracle: closed two-segment propagator on the pair,
        // U = (-i sigma_{phi2})(-i sigma_{phi1}); sweep the jump on a grid.
        let eigenphase_oracle = |jump: f64| -> f64 {
            let s1 = [
                [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
                [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            ];
            let e = C64::from_polar(1.0, jump);
            let s2 = [[C64::new(0.0, 0.0), e.conj()], [e, C64::new(0.0, 0.0)]];
            // U = (-i s2)(-i s1) = -(s2 s1); take element [0][0].
            let u00 = -(s2[0][0] * s1[0][0] + s2[0][1] * s1[1][0]);
            u00.arg()
        };
        for gamma in [0.0f64, FRAC_PI_2, -2.2, 1.0] {
            let cal = calibrate_phase_jump(gamma, Shape::Constant).unwrap();
            let grid_best = (0..4096)
                .map(|k| k as f64 / 4096.0 * 2.0 * PI)
                .min_by(|&a, &b| {
                    wrap_angle(eigenphase_oracle(a) - gamma)
                        .abs()
                        .partial_cmp(&wrap_angle(eigenphase_oracle(b) - gamma).abs())
                        .unwrap()
                })
                .unwrap();
            assert!(
                wrap_angle(grid_best - cal.phase2).abs() < 2.0 * PI / 4096.0 + 1e-6,
                "gamma {gamma}: grid {grid_best} vs calibrated {}",
                cal.phase2
            );
            assert!(wrap_angle(cal.realized - gamma).abs() <= 1e-8);
            assert!(wrap_angle(eigenphase_oracle(cal.phase2) - gamma).abs() <= 1e-7);
        }
    }

    #[test]
    fn calibration_consistency_sixteen_phases() {
        for k in 0..16 {
            let gamma = wrap_angle(-PI + (k as f64 + 0.5) / 16.0 * 2.0 * PI);
            for shape in [Shape::Constant, Shape::SineSquared] {
                let cal = calibrate_phase_jump(gamma, shape).unwrap();
                let realized = simulated_eigenphase(cal.phase2, shape, FRAC_PI_2).unwrap();
                assert!(
                    wrap_angle(realized - gamma).abs() <= 1e-8,
                    "gamma {gamma} shape {shape:?}: realized {realized}"
                );
            }
        }
    }

    #[test]
    fn u2_drive_end_to_end_smoke() {
        let basis = two_qubit_basis();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phis = seeded_span_states(&basis, &[&["1", "0"], &["1", "1"]], 2, &mut rng).unwrap();
        let drive = u2_drive(&basis, &phis[0], &phis[1], 1.3, -0.8, Shape::Constant).unwrap();
        let prop = evolve_dense_with(
            &drive.spec,
            &EvolveOptions { start_substeps: 4, checkpoints_per_segment: 4, ..Default::default() },
        )
        .unwrap();
        let sub = crate::holonomy::computational_subspace(&basis).unwrap();
        let (leak, gate) = crate::holonomy::cyclicity_and_holonomy(&prop.unitary, &sub);
        assert!(leak <= 1e-9);
        let f = crate::holonomy::gate_fidelity(&gate, &drive.target.matrix().unwrap()).unwrap();
        assert!(f >= 1.0 - 1e-8, "fidelity {f}");
    }
}
