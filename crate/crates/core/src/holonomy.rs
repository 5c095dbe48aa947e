//! Verification of the defining conditions of nonadiabatic holonomic
//! evolution: vanishing dynamical-phase matrix elements between
//! computational states (parallel transport), cyclicity of the
//! computational subspace at the final time, and extraction of the realized
//! holonomy gate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::levelspace::ProductBasis;
use crate::linalg::{fro_norm, matmul, unitarity_defect, CMat, C64};
use crate::propagate::Propagation;
use crate::DEFAULT_DENSE_CAP;

/// Dense projector support: the basis indices spanning a subspace.
#[derive(Debug, Clone)]
pub struct Subspace {
    indices: Vec<usize>,
    full_dim: usize,
}

impl Subspace {
    pub fn new(indices: Vec<usize>, full_dim: usize) -> Self {
        Self { indices, full_dim }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }
}

/// The computational subspace of a product basis: every site in `V1` (and
/// the phonon mode, when present, in its ground state).
pub fn computational_subspace(basis: &ProductBasis) -> Result<Subspace> {
    let dim = basis.dense_dim(DEFAULT_DENSE_CAP)?;
    Ok(Subspace::new(basis.computational_indices(DEFAULT_DENSE_CAP)?, dim))
}

/// Result of scanning `<k| U^dag(t) H(t) U(t) |l>` over checkpoints.
#[derive(Debug, Clone, Serialize)]
pub struct DynamicalPhaseScan {
    /// Max over checkpoints and over computational pairs `(k, l)`,
    /// normalized by the peak Frobenius norm of `H`.
    pub max_computational: f64,
    /// Same scan over auxiliary-auxiliary pairs (reported for diagnostics;
    /// acceptance gates only on computational pairs).
    pub max_auxiliary: f64,
    /// Peak `||H(t)||_F` over the checkpoints (the normalization scale).
    pub peak_h_norm: f64,
    /// Time-integrated dynamical-phase matrix over computational pairs
    /// (trapezoidal over checkpoints), flattened row-major as `(re, im)`.
    pub integrated: Vec<(f64, f64)>,
}

/// Scan the dynamical-phase matrix elements at the propagation checkpoints.
///
/// Parallel transport demands every computational element vanish at all
/// times; the returned maximum is scale-free (normalized by the peak
/// `||H||_F`).
pub fn dynamical_phase_scan(
    spec: &HamiltonianSpec,
    propagation: &Propagation,
    subspace: &Subspace,
) -> Result<DynamicalPhaseScan> {
    if propagation.checkpoints.is_empty() {
        return Err(Error::InvalidInput("propagation has no checkpoints".into()));
    }
    let comp = subspace.indices();
    let d = comp.len();
    let aux: Vec<usize> =
        (0..subspace.full_dim()).filter(|i| !comp.contains(i)).collect();
    let mut peak_h = 0.0f64;
    let mut max_comp = 0.0f64;
    let mut max_aux = 0.0f64;
    let mut integrated = vec![C64::new(0.0, 0.0); d * d];
    let mut prev: Option<(f64, Vec<C64>)> = None;
    for cp in &propagation.checkpoints {
        let h = spec.assemble_matrix(cp.time)?;
        peak_h = peak_h.max(fro_norm(&h));
        // M(t) = U^dag H U
        let hu = matmul(&h, &cp.unitary);
        let m = matmul(&crate::linalg::dagger(&cp.unitary), &hu);
        let mut comp_elems = vec![C64::new(0.0, 0.0); d * d];
        for (a, &k) in comp.iter().enumerate() {
            for (b, &l) in comp.iter().enumerate() {
                let z = m[[k, l]];
                comp_elems[a * d + b] = z;
                max_comp = max_comp.max(z.norm());
            }
        }
        for &k in &aux {
            for &l in &aux {
                max_aux = max_aux.max(m[[k, l]].norm());
            }
        }
        if let Some((t_prev, prev_elems)) = &prev {
            let dt = cp.time - t_prev;
            for (acc, (a, b)) in integrated
                .iter_mut()
                .zip(prev_elems.iter().zip(comp_elems.iter()))
            {
                *acc += (*a + *b) * 0.5 * dt;
            }
        }
        prev = Some((cp.time, comp_elems));
    }
    let scale = if peak_h > 0.0 { peak_h } else { 1.0 };
    Ok(DynamicalPhaseScan {
        max_computational: max_comp / scale,
        max_auxiliary: max_aux / scale,
        peak_h_norm: peak_h,
        integrated: integrated.iter().map(|z| (z.re, z.im)).collect(),
    })
}

/// Cyclicity leakage and the realized holonomy gate.
///
/// Leakage is `max |(I - P) U(T, 0) P|` entrywise; the holonomy matrix is
/// `P U(T, 0) P` restricted to the subspace basis (ascending index order).
pub fn cyclicity_and_holonomy(unitary: &CMat, subspace: &Subspace) -> (f64, CMat) {
    let comp = subspace.indices();
    let d = comp.len();
    let mut leakage = 0.0f64;
    for &c in comp {
        for r in 0..unitary.nrows() {
            if !comp.contains(&r) {
                leakage = leakage.max(unitary[[r, c]].norm());
            }
        }
    }
    let mut gate = CMat::zeros((d, d));
    for (a, &r) in comp.iter().enumerate() {
        for (b, &c) in comp.iter().enumerate() {
            gate[[a, b]] = unitary[[r, c]];
        }
    }
    (leakage, gate)
}

/// Global-phase-insensitive gate fidelity `|Tr(U^dag V)| / d`; equals 1 iff
/// `U = e^{i alpha} V`.
pub fn gate_fidelity(u: &CMat, v: &CMat) -> Result<f64> {
    if u.nrows() != v.nrows() || u.ncols() != v.ncols() {
        return Err(Error::DimensionMismatch(u.nrows(), v.nrows()));
    }
    let d = u.nrows();
    let mut tr = C64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            tr += u[[k, i]].conj() * v[[k, i]];
        }
    }
    Ok(tr.norm() / d as f64)
}

/// Quantified holonomy verification of one propagation.
#[derive(Debug, Clone, Serialize)]
pub struct HolonomyReport {
    /// Normalized max dynamical-phase element over computational pairs.
    pub max_dynamical_element: f64,
    /// Same over auxiliary pairs (diagnostic).
    pub max_auxiliary_element: f64,
    /// `max |(I - P) U(T, 0) P|`.
    pub cyclicity_leakage: f64,
    /// Realized holonomy gate on the computational subspace, row-major
    /// `(re, im)` entries.
    pub holonomy_matrix: Vec<(f64, f64)>,
    /// Unitarity defect of the holonomy matrix.
    pub holonomy_unitarity_defect: f64,
    /// `|Tr(U^dag V)| / d` against the supplied target, if any.
    pub fidelity_vs_target: Option<f64>,
}

/// Run the full holonomy verification: parallel transport, cyclicity, gate
/// extraction, and optional fidelity against a target on the subspace.
pub fn holonomy_report(
    spec: &HamiltonianSpec,
    propagation: &Propagation,
    subspace: &Subspace,
    target: Option<&CMat>,
) -> Result<(HolonomyReport, CMat)> {
    let scan = dynamical_phase_scan(spec, propagation, subspace)?;
    let (leakage, gate) = cyclicity_and_holonomy(&propagation.unitary, subspace);
    let fidelity = match target {
        Some(v) => Some(gate_fidelity(&gate, v)?),
        None => None,
    };
    let report = HolonomyReport {
        max_dynamical_element: scan.max_computational,
        max_auxiliary_element: scan.max_auxiliary,
        cyclicity_leakage: leakage,
        holonomy_matrix: gate.iter().map(|z| (z.re, z.im)).collect(),
        holonomy_unitarity_defect: unitarity_defect(&gate),
        fidelity_vs_target: fidelity,
    };
    Ok((report, gate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{basis_state, h1_spec, h2_spec, Coupling, HamiltonianSpec};
    use crate::levelspace::{product_space, uniform_chain, LevelGraph};
    use crate::linalg::{eye, gram_schmidt, CVec, ONE};
    use crate::propagate::{evolve_dense, evolve_dense_with, EvolveOptions};
    use crate::pulses::{two_interval_schedule, Envelope, SegmentedPulse, Shape};
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn parallel_transport_holds_for_constant_ratio_h1() {
        let basis = product_space(vec![LevelGraph::qubit4()], None).unwrap();
        let amp0 = SegmentedPulse::single(Envelope::constant(0.9, 1.0).unwrap(), 0.4);
        let amp1 = SegmentedPulse::single(Envelope::constant(0.5, 1.0).unwrap(), 1.3);
        let spec = h1_spec(&basis, 0, &amp0, &amp1).unwrap();
        let prop = evolve_dense(&spec, 16).unwrap();
        let sub = computational_subspace(&basis).unwrap();
        let scan = dynamical_phase_scan(&spec, &prop, &sub).unwrap();
        assert!(scan.max_computational <= 1e-9, "pt = {:.3e}", scan.max_computational);
    }

    #[test]
    fn parallel_transport_violated_by_varying_ratio() {
        // Raw-constructed h1-like spec with mismatched envelope shapes.
        let basis = product_space(vec![LevelGraph::qubit4()], None).unwrap();
        let aux = basis_state(&basis, &["a0"]).unwrap();
        let c0 = Coupling::bipartite(
            &basis,
            &[0],
            &aux,
            &basis_state(&basis, &["0"]).unwrap(),
            SegmentedPulse::single(Envelope::constant(1.0, 1.0).unwrap(), 0.0),
        )
        .unwrap();
        let c1 = Coupling::bipartite(
            &basis,
            &[0],
            &aux,
            &basis_state(&basis, &["1"]).unwrap(),
            SegmentedPulse::single(Envelope::sine_squared(2.0, 1.0).unwrap(), 0.0),
        )
        .unwrap();
        let spec = HamiltonianSpec::new(basis.clone(), vec![c0, c1], "h1-varying-ratio");
        let prop = evolve_dense(&spec, 64).unwrap();
        let sub = computational_subspace(&basis).unwrap();
        let scan = dynamical_phase_scan(&spec, &prop, &sub).unwrap();
        assert!(scan.max_computational > 1e-2, "pt = {:.3e}", scan.max_computational);
    }

    #[test]
    fn zero_hamiltonian_scans_to_zero() {
        let basis = product_space(vec![LevelGraph::qubit4()], None).unwrap();
        let amp = SegmentedPulse::single(Envelope::constant(0.0, 1.0).unwrap(), 0.0);
        let spec = h1_spec(&basis, 0, &amp, &amp).unwrap();
        let prop = evolve_dense(&spec, 4).unwrap();
        let sub = computational_subspace(&basis).unwrap();
        let scan = dynamical_phase_scan(&spec, &prop, &sub).unwrap();
        assert_eq!(scan.max_computational, 0.0);
    }

    #[test]
    fn u2_schedule_is_cyclic_with_diagonal_holonomy() {
        let basis = uniform_chain(&LevelGraph::qubit4(), 2).unwrap();
        let phi0 = basis_state(&basis, &["1", "0"]).unwrap();
        let phi1 = basis_state(&basis, &["1", "1"]).unwrap();
        let spec = h2_spec(
            &basis,
            &phi0,
            &phi1,
            two_interval_schedule(FRAC_PI_2, 0.0, 0.6, Shape::Constant).unwrap(),
            two_interval_schedule(FRAC_PI_2, 0.0, 1.9, Shape::Constant).unwrap(),
        )
        .unwrap();
        let prop = evolve_dense(&spec, 8).unwrap();
        let sub = computational_subspace(&basis).unwrap();
        let (leakage, gate) = cyclicity_and_holonomy(&prop.unitary, &sub);
        assert!(leakage <= 1e-9, "leakage = {leakage:.3e}");
        // Diagonal in the computational-basis choice phi0 = |10>, phi1 = |11>.
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert!(gate[[a, b]].norm() < 1e-9);
                }
            }
        }
        assert!(unitarity_defect(&gate) < 1e-8);
    }

    #[test]
    fn half_finished_schedule_leaks() {
        let basis = uniform_chain(&LevelGraph::qubit4(), 2).unwrap();
        let phi0 = basis_state(&basis, &["1", "0"]).unwrap();
        let phi1 = basis_state(&basis, &["1", "1"]).unwrap();
        let single = SegmentedPulse::single(Envelope::constant(FRAC_PI_2, 1.0).unwrap(), 0.0);
        let spec = h2_spec(&basis, &phi0, &phi1, single.clone(), single).unwrap();
        let prop = evolve_dense(&spec, 8).unwrap();
        let sub = computational_subspace(&basis).unwrap();
        let (leakage, _) = cyclicity_and_holonomy(&prop.unitary, &sub);
        assert!(leakage > 0.99, "leakage = {leakage}");
    }

    #[test]
    fn identity_propagation_reports_identity_holonomy() {
        let basis = uniform_chain(&LevelGraph::qubit4(), 2).unwrap();
        let sub = computational_subspace(&basis).unwrap();
        let (leakage, gate) = cyclicity_and_holonomy(&eye(16), &sub);
        assert_eq!(leakage, 0.0);
        assert_eq!(crate::linalg::max_abs_diff(&gate, &eye(4)), 0.0);
    }

    #[test]
    fn fidelity_of_global_phase_and_partial_flip() {
        let u = eye(4);
        assert!((gate_fidelity(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        let v = u.mapv(|z| z * C64::from_polar(1.0, 1.234));
        assert!((gate_fidelity(&u, &v).unwrap() - 1.0).abs() < 1e-12);
        let mut w = eye(4);
        w[[3, 3]] = C64::new(-1.0, 0.0);
        assert!((gate_fidelity(&w, &u).unwrap() - 0.5).abs() < 1e-15);
        assert!(gate_fidelity(&u, &eye(3)).is_err());
    }

    #[test]
    fn fidelity_symmetric_and_left_invariant() {
        // Random-ish unitaries from Gram-Schmidt on fixed vectors.
        let raw1: Vec<CVec> = (0..3)
            .map(|k| {
                CVec::from_iter((0..3).map(|j| C64::new(((k * 3 + j) as f64).sin(), ((k + 2 * j) as f64).cos())))
            })
            .collect();
        let raw2: Vec<CVec> = (0..3)
            .map(|k| {
                CVec::from_iter((0..3).map(|j| C64::new(((k as f64) * 1.7 + j as f64).cos(), ((k * j) as f64 + 0.3).sin())))
            })
            .collect();
        let mk = |vs: Vec<CVec>| {
            let on = gram_schmidt(&vs).unwrap();
            let mut m = CMat::zeros((3, 3));
            for (j, v) in on.iter().enumerate() {
                for i in 0..3 {
                    m[[i, j]] = v[i];
                }
            }
            m
        };
        let u = mk(raw1);
        let v = mk(raw2);
        let f_uv = gate_fidelity(&u, &v).unwrap();
        let f_vu = gate_fidelity(&v, &u).unwrap();
        assert!((f_uv - f_vu).abs() < 1e-12);
        let w = matmul(&u, &v); // some third unitary
        let f_wu_wv = gate_fidelity(&matmul(&w, &u), &matmul(&w, &v)).unwrap();
        assert!((f_uv - f_wu_wv).abs() < 1e-12);
    }

    #[test]
    fn doubling_checkpoint_density_does_not_change_the_scan() {
        let basis = product_space(vec![LevelGraph::qubit4()], None).unwrap();
        let amp0 = SegmentedPulse::single(Envelope::sine_squared(1.2, 1.0).unwrap(), 0.0);
        let amp1 = SegmentedPulse::single(Envelope::sine_squared(0.7, 1.0).unwrap(), 0.8);
        let spec = h1_spec(&basis, 0, &amp0, &amp1).unwrap();
        let sub = computational_subspace(&basis).unwrap();
        let scan_m = |m: usize| {
            let prop = evolve_dense_with(
                &spec,
                &EvolveOptions { start_substeps: 64, checkpoints_per_segment: m, ..Default::default() },
            )
            .unwrap();
            dynamical_phase_scan(&spec, &prop, &sub).unwrap().max_computational
        };
        let a = scan_m(64);
        let b = scan_m(128);
        assert!(a <= 1e-9 && b <= 1e-9, "{a:.3e} {b:.3e}");
    }

    #[test]
    fn report_includes_tolerant_unitary_holonomy() {
        let basis = uniform_chain(&LevelGraph::qubit4(), 2).unwrap();
        let phi0 = basis_state(&basis, &["1", "0"]).unwrap();
        let phi1 = basis_state(&basis, &["1", "1"]).unwrap();
        let spec = h2_spec(
            &basis,
            &phi0,
            &phi1,
            two_interval_schedule(FRAC_PI_2, 0.0, PI, Shape::Constant).unwrap(),
            two_interval_schedule(FRAC_PI_2, 0.0, PI, Shape::Constant).unwrap(),
        )
        .unwrap();
        let prop = evolve_dense(&spec, 8).unwrap();
        let sub = computational_subspace(&basis).unwrap();
        let (report, gate) = holonomy_report(&spec, &prop, &sub, Some(&eye(4))).unwrap();
        assert!(report.cyclicity_leakage <= 1e-9);
        // Leakage small implies near-unitary holonomy (10x tolerance rule).
        assert!(report.holonomy_unitarity_defect <= 10.0 * 1e-9);
        assert!(report.fidelity_vs_target.unwrap() <= 1.0 + 1e-12);
        assert_eq!(gate.nrows(), 4);
        let _ = ONE;
    }
}
