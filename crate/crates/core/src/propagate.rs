//! Time-ordered evolution operators.
//!
//! Dense mode integrates `U(T, 0) = prod_k exp(-i H(t_k) dt)` over
//! midpoint-sampled sub-intervals, refined by doubling the substep count
//! until successive refinements agree. Analytic mode executes pulse-area
//! transfers exactly as a permutation-with-phase over product basis states;
//! it has no dimension cap and is the only mode that reaches full ion
//! chains.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::levelspace::ProductBasis;
use crate::linalg::{expm, eye, matmul, max_abs_diff, unit_phase, unitarity_defect, CMat, CVec, C64, MINUS_I};

/// Options for dense propagation.
#[derive(Debug, Clone)]
pub struct EvolveOptions {
    /// Substeps per segment for the first refinement pass (rounded up to a
    /// multiple of `checkpoints_per_segment` when checkpoints are on).
    pub start_substeps: usize,
    /// Refinement stops when `max|U_2n - U_n| < refine_tol`.
    pub refine_tol: f64,
    /// Hard refinement cap; exceeding it is a `NoConvergence` error.
    pub max_substeps: usize,
    /// Uniform checkpoint samples per segment (0 = segment boundaries only).
    pub checkpoints_per_segment: usize,
    /// Dense-mode dimension cap.
    pub dense_cap: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            start_substeps: 64,
            refine_tol: 1e-10,
            max_substeps: 1 << 20,
            checkpoints_per_segment: 64,
            dense_cap: crate::DEFAULT_DENSE_CAP,
        }
    }
}

/// A recorded intermediate propagator `U(t, 0)`.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub time: f64,
    pub unitary: CMat,
}

/// Result of a dense propagation.
#[derive(Debug, Clone)]
pub struct Propagation {
    /// `U(T, 0)` over the full window.
    pub unitary: CMat,
    /// `U(t, 0)` at segment boundaries and uniform sample times.
    pub checkpoints: Vec<Checkpoint>,
    /// Final `max|U_2n - U_n|` reached by the refinement.
    pub achieved_refinement: f64,
    /// Converged substep count per segment.
    pub substeps_per_segment: usize,
    /// `max|U^dag U - I|` of the final propagator.
    pub unitarity_defect: f64,
}

impl Propagation {
    /// Apply the propagator to a state vector.
    pub fn apply_to_state(&self, psi: &CVec) -> Result<CVec> {
        if psi.len() != self.unitary.ncols() {
            return Err(Error::DimensionMismatch(psi.len(), self.unitary.ncols()));
        }
        Ok(self.unitary.dot(psi))
    }
}

fn product_pass<F>(
    h_at: &F,
    boundaries: &[f64],
    dim: usize,
    substeps: usize,
    checkpoints_per_segment: usize,
    record: bool,
) -> Result<(CMat, Vec<Checkpoint>)>
where
    F: Fn(f64) -> Result<CMat>,
{
    let mut u = eye(dim);
    let mut checkpoints = Vec::new();
    if record {
        checkpoints.push(Checkpoint { time: boundaries[0], unitary: u.clone() });
    }
    let stride = if checkpoints_per_segment > 0 {
        (substeps / checkpoints_per_segment).max(1)
    } else {
        0
    };
    for w in boundaries.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 - t0 < 1e-15 {
            continue;
        }
        let dt = (t1 - t0) / substeps as f64;
        for k in 0..substeps {
            let tm = t0 + (k as f64 + 0.5) * dt;
            let h = h_at(tm)?;
            let a = h.mapv(|z| z * MINUS_I * dt);
            let step = expm(&a);
            u = matmul(&step, &u);
            if record {
                let at_boundary = k + 1 == substeps;
                let at_sample = stride > 0 && (k + 1) % stride == 0;
                if at_boundary || at_sample {
                    checkpoints.push(Checkpoint {
                        time: t0 + (k as f64 + 1.0) * dt,
                        unitary: u.clone(),
                    });
                }
            }
        }
    }
    Ok((u, checkpoints))
}

/// Integrate a matrix-valued Hamiltonian function over the window spanned
/// by `boundaries` (sorted segment edges). This is the engine behind
/// [`evolve_dense`]; it is public so that models outside the pulse
/// machinery (e.g. ion-phonon Hamiltonians) can reuse the same contract.
pub fn evolve_matrix_fn<F>(
    h_at: F,
    boundaries: &[f64],
    dim: usize,
    options: &EvolveOptions,
) -> Result<Propagation>
where
    F: Fn(f64) -> Result<CMat>,
{
    if boundaries.len() < 2 {
        let u = eye(dim);
        return Ok(Propagation {
            unitarity_defect: unitarity_defect(&u),
            unitary: u.clone(),
            checkpoints: vec![Checkpoint { time: 0.0, unitary: u }],
            achieved_refinement: 0.0,
            substeps_per_segment: 0,
        });
    }
    let m = options.checkpoints_per_segment;
    let mut n = options.start_substeps.max(1);
    if m > 0 {
        n = n.div_ceil(m) * m;
    }
    let (mut u_prev, _) = product_pass(&h_at, boundaries, dim, n, m, false)?;
    loop {
        let n2 = n * 2;
        if n2 > options.max_substeps {
            return Err(Error::NoConvergence { residual: f64::NAN, substeps: n });
        }
        let (u_next, checkpoints) = product_pass(&h_at, boundaries, dim, n2, m, true)?;
        let diff = max_abs_diff(&u_next, &u_prev);
        if diff < options.refine_tol {
            let defect = unitarity_defect(&u_next);
            return Ok(Propagation {
                unitary: u_next,
                checkpoints,
                achieved_refinement: diff,
                substeps_per_segment: n2,
                unitarity_defect: defect,
            });
        }
        u_prev = u_next;
        n = n2;
    }
}

/// Dense propagation of a Hamiltonian spec over `[0, max pulse duration]`.
pub fn evolve_dense(spec: &HamiltonianSpec, substeps_per_segment: usize) -> Result<Propagation> {
    evolve_dense_with(
        spec,
        &EvolveOptions { start_substeps: substeps_per_segment, ..EvolveOptions::default() },
    )
}

/// Dense propagation with explicit options.
pub fn evolve_dense_with(spec: &HamiltonianSpec, options: &EvolveOptions) -> Result<Propagation> {
    let dim = spec.basis().dense_dim(options.dense_cap)?;
    let boundaries = spec.segment_boundaries();
    evolve_matrix_fn(|t| spec.assemble_matrix(t), &boundaries, dim, options)
}

/// Apply a dense propagation to a state vector.
pub fn apply_to_state(propagation: &Propagation, psi: &CVec) -> Result<CVec> {
    propagation.apply_to_state(psi)
}

/// Pulse area of a transfer: the two values with closed-form action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferArea {
    /// Full population transfer: `|x> -> -i e^{i phi} |y>`.
    HalfPi,
    /// Round trip with a sign: both coupled states pick up `-1`.
    Pi,
}

impl TransferArea {
    pub fn radians(self) -> f64 {
        match self {
            TransferArea::HalfPi => std::f64::consts::FRAC_PI_2,
            TransferArea::Pi => std::f64::consts::PI,
        }
    }
}

/// A two-state transfer between product-basis patterns on a set of sites.
///
/// `x` and `y` are per-site level patterns over the same sites; the drive
/// couples `Omega |y><x| + h.c.` with `Omega = |Omega| e^{i phase}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    sites: Vec<usize>,
    x_levels: Vec<u8>,
    y_levels: Vec<u8>,
    area: TransferArea,
    phase: f64,
}

impl Transfer {
    /// Build a transfer from `(site, x label, y label)` moves.
    pub fn new(
        basis: &ProductBasis,
        moves: &[(usize, &str, &str)],
        area: TransferArea,
        phase: f64,
    ) -> Result<Self> {
        if moves.is_empty() {
            return Err(Error::InvalidInput("transfer needs at least one site".into()));
        }
        let mut sorted = moves.to_vec();
        sorted.sort_by_key(|m| m.0);
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("transfer sites must be distinct".into()));
        }
        let mut sites = Vec::with_capacity(sorted.len());
        let mut x_levels = Vec::with_capacity(sorted.len());
        let mut y_levels = Vec::with_capacity(sorted.len());
        for (site, x, y) in sorted {
            if site >= basis.n_sites() {
                return Err(Error::InvalidInput(format!("site {site} out of range")));
            }
            let g = basis.site(site);
            sites.push(site);
            x_levels.push(g.level_index(x)?);
            y_levels.push(g.level_index(y)?);
        }
        if x_levels == y_levels {
            return Err(Error::InvalidInput("transfer patterns x and y must differ".into()));
        }
        Ok(Self { sites, x_levels, y_levels, area, phase })
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn x_levels(&self) -> &[u8] {
        &self.x_levels
    }

    pub fn y_levels(&self) -> &[u8] {
        &self.y_levels
    }

    pub fn area(&self) -> TransferArea {
        self.area
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Same transfer with drive direction and phase reversed for the
    /// palindromic unwind: `x <-> y`, phase `phi + pi`, so a forward/reverse
    /// round trip composes to `+1` on restored states.
    pub fn reversed(&self) -> Self {
        Self {
            sites: self.sites.clone(),
            x_levels: self.y_levels.clone(),
            y_levels: self.x_levels.clone(),
            area: self.area,
            phase: self.phase + std::f64::consts::PI,
        }
    }

    /// Per-site labels of the two patterns.
    pub fn patterns<'a>(&self, basis: &'a ProductBasis) -> (Vec<&'a str>, Vec<&'a str>) {
        let x = self
            .sites
            .iter()
            .zip(&self.x_levels)
            .map(|(&s, &lv)| basis.site(s).label(lv))
            .collect();
        let y = self
            .sites
            .iter()
            .zip(&self.y_levels)
            .map(|(&s, &lv)| basis.site(s).label(lv))
            .collect();
        (x, y)
    }

    fn matches(&self, levels: &[u8], pattern: &[u8]) -> bool {
        self.sites
            .iter()
            .zip(pattern)
            .all(|(&s, &lv)| levels[s] == lv)
    }

    fn write(&self, levels: &mut [u8], pattern: &[u8]) {
        for (&s, &lv) in self.sites.iter().zip(pattern) {
            levels[s] = lv;
        }
    }

    /// Whether the state (full-chain levels) matches the `y` pattern.
    pub fn matches_y(&self, levels: &[u8]) -> bool {
        self.matches(levels, &self.y_levels)
    }

    /// Whether two transfers may run in the same step: their 2-state blocks
    /// must act on orthogonal subspaces so the step Hamiltonian terms
    /// commute and the transfers execute in parallel.
    fn parallel_compatible(&self, other: &Self) -> bool {
        let shared: Vec<usize> = self
            .sites
            .iter()
            .copied()
            .filter(|s| other.sites.contains(s))
            .collect();
        if shared.is_empty() {
            return true;
        }
        if self.sites == other.sites {
            // Same register: all four patterns must be pairwise distinct.
            let pats = [
                (&self.x_levels, &self.y_levels),
                (&other.x_levels, &other.y_levels),
            ];
            return pats[0].0 != pats[1].0
                && pats[0].0 != pats[1].1
                && pats[0].1 != pats[1].0
                && pats[0].1 != pats[1].1;
        }
        // Partial overlap: require disjoint level sets at every shared site,
        // which kills every cross product of the two couplings.
        for s in shared {
            let i = self.sites.iter().position(|&x| x == s).unwrap();
            let j = other.sites.iter().position(|&x| x == s).unwrap();
            let mine = [self.x_levels[i], self.y_levels[i]];
            let theirs = [other.x_levels[j], other.y_levels[j]];
            if mine.iter().any(|lv| theirs.contains(lv)) {
                return false;
            }
        }
        true
    }
}

/// One analytically-executable step: a set of parallel transfers.
#[derive(Debug, Clone)]
pub struct AnalyticStep {
    transfers: Vec<Transfer>,
}

/// Validate parallel executability and build the exact step unitary.
pub fn evolve_analytic(transfers: Vec<Transfer>) -> Result<AnalyticStep> {
    for i in 0..transfers.len() {
        for j in (i + 1)..transfers.len() {
            if !transfers[i].parallel_compatible(&transfers[j]) {
                return Err(Error::OverlappingTransfers(format!(
                    "transfers {i} and {j} act on non-orthogonal state pairs"
                )));
            }
        }
    }
    Ok(AnalyticStep { transfers })
}

impl AnalyticStep {
    pub fn transfers(&self) -> &[Transfer] {
        &self.transfers
    }

    /// Act on a product basis state given as per-site levels; the state is
    /// updated in place and the accumulated phase multiplied into `phase`.
    ///
    /// Each basis state meets at most one side of each transfer's 2-state
    /// block, and blocks of one step are orthogonal, so this is `O(1)` per
    /// transfer regardless of chain length.
    pub fn apply_levels(&self, levels: &mut [u8], phase: &mut C64) {
        for t in &self.transfers {
            match t.area {
                TransferArea::HalfPi => {
                    if t.matches(levels, &t.x_levels) {
                        t.write(levels, &t.y_levels);
                        *phase *= MINUS_I * unit_phase(t.phase);
                    } else if t.matches(levels, &t.y_levels) {
                        t.write(levels, &t.x_levels);
                        *phase *= MINUS_I * unit_phase(-t.phase);
                    }
                }
                TransferArea::Pi => {
                    if t.matches(levels, &t.x_levels) || t.matches(levels, &t.y_levels) {
                        *phase *= C64::new(-1.0, 0.0);
                    }
                }
            }
        }
    }

    /// Apply the step to a dense state vector.
    pub fn apply_to_state(&self, basis: &ProductBasis, psi: &CVec) -> Result<CVec> {
        let dim = basis.dense_dim(crate::DEFAULT_DENSE_CAP)?;
        if psi.len() != dim {
            return Err(Error::DimensionMismatch(psi.len(), dim));
        }
        let mut out = CVec::zeros(dim);
        for (idx, amp) in psi.iter().enumerate() {
            if amp.norm() == 0.0 {
                continue;
            }
            let (mut levels, phonon) = basis.levels_of(idx as u128);
            let mut phase = C64::new(1.0, 0.0);
            self.apply_levels(&mut levels, &mut phase);
            let new_idx = basis
                .index_of_levels(&levels, phonon)
                .expect("transfer stays within the basis") as usize;
            out[new_idx] += amp * phase;
        }
        Ok(out)
    }

    /// Materialize the step as a dense matrix (dimension-capped).
    pub fn to_dense(&self, basis: &ProductBasis, cap: usize) -> Result<CMat> {
        let dim = basis.dense_dim(cap)?;
        let mut u = CMat::zeros((dim, dim));
        for col in 0..dim {
            let (mut levels, phonon) = basis.levels_of(col as u128);
            let mut phase = C64::new(1.0, 0.0);
            self.apply_levels(&mut levels, &mut phase);
            let row = basis
                .index_of_levels(&levels, phonon)
                .expect("transfer stays within the basis") as usize;
            u[[row, col]] = phase;
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{basis_state, h1_spec, Coupling, HamiltonianSpec};
    use crate::levelspace::{product_space, uniform_chain, LevelGraph};
    use crate::linalg::{vec_norm, ONE, ZERO};
    use crate::pulses::{Envelope, SegmentedPulse, Shape};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn two_level_basis() -> ProductBasis {
        let g = LevelGraph::new(&["g"], &["e"], &[("g", "e")]).unwrap();
        product_space(vec![g], None).unwrap()
    }

    fn two_level_spec(area: f64, phase: f64) -> HamiltonianSpec {
        let basis = two_level_basis();
        let aux = basis_state(&basis, &["e"]).unwrap();
        let comp = basis_state(&basis, &["g"]).unwrap();
        let pulse = SegmentedPulse::single(Envelope::constant(area, 1.0).unwrap(), phase);
        let c = Coupling::bipartite(&basis, &[0], &aux, &comp, pulse).unwrap();
        HamiltonianSpec::new(basis, vec![c], "two-level")
    }

    #[test]
    fn rabi_half_pi_swaps_with_minus_i() {
        let spec = two_level_spec(FRAC_PI_2, 0.0);
        let prop = evolve_dense(&spec, 4).unwrap();
        // |g> -> -i|e>, |e> -> -i|g>
        assert!((prop.unitary[[1, 0]] - MINUS_I).norm() < 1e-12);
        assert!((prop.unitary[[0, 1]] - MINUS_I).norm() < 1e-12);
        assert!(prop.unitary[[0, 0]].norm() < 1e-12);
        assert!(prop.unitarity_defect < 1e-10);
    }

    #[test]
    fn rabi_pi_gives_minus_identity_on_pair() {
        let spec = two_level_spec(PI, 0.7);
        let prop = evolve_dense(&spec, 4).unwrap();
        assert!((prop.unitary[[0, 0]] + ONE).norm() < 1e-12);
        assert!((prop.unitary[[1, 1]] + ONE).norm() < 1e-12);
        assert!(prop.unitary[[1, 0]].norm() < 1e-12);
    }

    #[test]
    fn envelope_shape_does_not_change_the_gate() {
        // Equal areas and phases, sine^2 vs constant: identical U(T,0).
        let basis = product_space(vec![LevelGraph::qubit4()], None).unwrap();
        let amp_c0 = SegmentedPulse::single(Envelope::constant(0.9, 2.0).unwrap(), 0.3);
        let amp_c1 = SegmentedPulse::single(Envelope::constant(0.4, 2.0).unwrap(), 1.2);
        let spec_c = h1_spec(&basis, 0, &amp_c0, &amp_c1).unwrap();
        let amp_s0 = SegmentedPulse::single(Envelope::sine_squared(1.8, 2.0).unwrap(), 0.3);
        let amp_s1 = SegmentedPulse::single(Envelope::sine_squared(0.8, 2.0).unwrap(), 1.2);
        let spec_s = h1_spec(&basis, 0, &amp_s0, &amp_s1).unwrap();
        let u_c = evolve_dense(&spec_c, 16).unwrap();
        let u_s = evolve_dense(&spec_s, 16).unwrap();
        assert!(max_abs_diff(&u_c.unitary, &u_s.unitary) < 1e-9);
    }

    #[test]
    fn composition_over_subwindows_matches_full_run() {
        let basis = product_space(vec![LevelGraph::qubit4()], None).unwrap();
        let amp0 = SegmentedPulse::single(Envelope::sine_squared(1.1, 2.0).unwrap(), 0.2);
        let amp1 = SegmentedPulse::single(Envelope::sine_squared(0.6, 2.0).unwrap(), 0.9);
        let spec = h1_spec(&basis, 0, &amp0, &amp1).unwrap();
        let opts = EvolveOptions { start_substeps: 64, checkpoints_per_segment: 0, ..Default::default() };
        let full = evolve_matrix_fn(|t| spec.assemble_matrix(t), &[0.0, 2.0], 4, &opts).unwrap();
        let first = evolve_matrix_fn(|t| spec.assemble_matrix(t), &[0.0, 0.8], 4, &opts).unwrap();
        let second = evolve_matrix_fn(|t| spec.assemble_matrix(t), &[0.8, 2.0], 4, &opts).unwrap();
        let composed = matmul(&second.unitary, &first.unitary);
        assert!(max_abs_diff(&composed, &full.unitary) < 1e-9);
    }

    #[test]
    fn checkpoints_cover_boundaries_and_samples() {
        let spec = two_level_spec(FRAC_PI_2, 0.0);
        let prop = evolve_dense_with(
            &spec,
            &EvolveOptions { start_substeps: 8, checkpoints_per_segment: 8, ..Default::default() },
        )
        .unwrap();
        assert_eq!(prop.checkpoints.first().unwrap().time, 0.0);
        assert!((prop.checkpoints.last().unwrap().time - 1.0).abs() < 1e-12);
        assert!(prop.checkpoints.len() >= 9);
    }

    #[test]
    fn analytic_half_pi_transfer_phase() {
        let basis = uniform_chain(&LevelGraph::qubit4(), 2).unwrap();
        let t = Transfer::new(
            &basis,
            &[(0, "1", "a0"), (1, "1", "a0")],
            TransferArea::HalfPi,
            0.0,
        )
        .unwrap();
        let step = evolve_analytic(vec![t]).unwrap();
        let mut levels = vec![1u8, 1u8];
        let mut phase = ONE;
        step.apply_levels(&mut levels, &mut phase);
        assert_eq!(levels, vec![2u8, 2u8]); // a0 has level index 2
        assert_eq!(phase, MINUS_I);
        // Applying twice returns with an exact -1.
        step.apply_levels(&mut levels, &mut phase);
        assert_eq!(levels, vec![1u8, 1u8]);
        assert_eq!(phase, C64::new(-1.0, 0.0));
    }

    #[test]
    fn analytic_pi_flips_both_patterns_in_place() {
        let basis = uniform_chain(&LevelGraph::qubit4(), 2).unwrap();
        let t = Transfer::new(
            &basis,
            &[(0, "a0", "0"), (1, "a0", "0")],
            TransferArea::Pi,
            0.9,
        )
        .unwrap();
        let step = evolve_analytic(vec![t]).unwrap();
        for pattern in [vec![2u8, 2u8], vec![0u8, 0u8]] {
            let mut levels = pattern.clone();
            let mut phase = ONE;
            step.apply_levels(&mut levels, &mut phase);
            assert_eq!(levels, pattern);
            assert_eq!(phase, C64::new(-1.0, 0.0));
        }
        let mut levels = vec![1u8, 0u8];
        let mut phase = ONE;
        step.apply_levels(&mut levels, &mut phase);
        assert_eq!(phase, ONE);
    }

    #[test]
    fn overlapping_transfers_rejected() {
        let basis = uniform_chain(&LevelGraph::qubit4(), 3).unwrap();
        // Both touch site 1 with intersecting level sets {1, a0}.
        let t1 = Transfer::new(&basis, &[(0, "a0", "1"), (1, "1", "a0")], TransferArea::HalfPi, 0.0)
            .unwrap();
        let t2 = Transfer::new(&basis, &[(1, "a0", "1"), (2, "1", "a0")], TransferArea::HalfPi, 0.0)
            .unwrap();
        assert!(matches!(
            evolve_analytic(vec![t1, t2]),
            Err(Error::OverlappingTransfers(_))
        ));
        // Same register, pairwise-distinct patterns: allowed (qutrit guards).
        let basis3 = uniform_chain(&LevelGraph::qutrit5(), 2).unwrap();
        let g1 = Transfer::new(&basis3, &[(0, "0", "a1"), (1, "2", "a1")], TransferArea::HalfPi, 0.0)
            .unwrap();
        let g2 = Transfer::new(&basis3, &[(0, "1", "a0"), (1, "2", "a1")], TransferArea::HalfPi, 0.0)
            .unwrap();
        assert!(evolve_analytic(vec![g1, g2]).is_ok());
    }

    #[test]
    fn analytic_matches_dense_on_toy_step() {
        // Three disjoint single-site transfers on a 3-site, 8-dim basis.
        let g = LevelGraph::new(&["g"], &["e"], &[("g", "e")]).unwrap();
        let basis = uniform_chain(&g, 3).unwrap();
        let phases = [0.0, 1.1, -0.7];
        let mut transfers = Vec::new();
        let mut couplings = Vec::new();
        for (site, &ph) in phases.iter().enumerate() {
            transfers.push(
                Transfer::new(&basis, &[(site, "g", "e")], TransferArea::HalfPi, ph).unwrap(),
            );
            let single = product_space(vec![g.clone()], None).unwrap();
            let mut aux = CVec::zeros(2);
            aux[1] = ONE;
            let mut comp = CVec::zeros(2);
            comp[0] = ONE;
            let _ = single;
            couplings.push(
                Coupling::bipartite(
                    &basis,
                    &[site],
                    &aux,
                    &comp,
                    SegmentedPulse::single(Envelope::constant(FRAC_PI_2, 1.0).unwrap(), ph),
                )
                .unwrap(),
            );
        }
        let step = evolve_analytic(transfers).unwrap();
        let sparse = step.to_dense(&basis, 4096).unwrap();
        let spec = HamiltonianSpec::new(basis.clone(), couplings, "toy-step");
        let dense = evolve_dense_with(
            &spec,
            &EvolveOptions { start_substeps: 1, checkpoints_per_segment: 0, ..Default::default() },
        )
        .unwrap();
        assert!(max_abs_diff(&sparse, &dense.unitary) < 1e-9);
    }

    #[test]
    fn apply_to_state_preserves_norm_and_dimension_checked() {
        let spec = two_level_spec(FRAC_PI_2, 0.0);
        let prop = evolve_dense(&spec, 4).unwrap();
        let mut psi = CVec::zeros(2);
        psi[0] = C64::new(0.6, 0.0);
        psi[1] = C64::new(0.0, 0.8);
        let out = prop.apply_to_state(&psi).unwrap();
        assert!((vec_norm(&out) - 1.0).abs() < 1e-12);
        let bad = CVec::zeros(3);
        assert!(matches!(
            prop.apply_to_state(&bad),
            Err(Error::DimensionMismatch(3, 2))
        ));
    }

    #[test]
    fn identity_on_untouched_states() {
        let basis = uniform_chain(&LevelGraph::qubit4(), 2).unwrap();
        let t = Transfer::new(
            &basis,
            &[(0, "1", "a0"), (1, "1", "a0")],
            TransferArea::HalfPi,
            0.0,
        )
        .unwrap();
        let step = evolve_analytic(vec![t]).unwrap();
        let u = step.to_dense(&basis, 4096).unwrap();
        let idx01 = basis.index_of_site_labels(&["0", "1"]).unwrap() as usize;
        assert_eq!(u[[idx01, idx01]], ONE);
        for row in 0..16 {
            if row != idx01 {
                assert_eq!(u[[row, idx01]], ZERO);
            }
        }
    }
}
