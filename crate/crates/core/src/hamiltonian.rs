//! Time-dependent Hamiltonians as pulsed couplings over a product basis.
//!
//! Every Hamiltonian here has the form
//! `H(t) = sum_c Omega_c(t) |aux_c><comp_c| + h.c.`
//! with each coupling driving a pair of orthogonal states, so the assembled
//! matrix is Hermitian by construction. Couplings built through the checked
//! constructors respect the bipartite structure: the source state lives in
//! the computational sector and the target state involves auxiliary levels,
//! so no transitions act within the computational subspace.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::levelspace::ProductBasis;
use crate::linalg::{inner, normalized, vec_norm, CMat, CVec, C64, ZERO};
use crate::pulses::SegmentedPulse;
use crate::DEFAULT_DENSE_CAP;

/// Tolerance on inner products for orthogonality and span-support checks.
/// Constructions use exact arithmetic-level states, so near-misses indicate
/// user error.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

/// Dense unit vector for a product basis state given per-site labels.
pub fn basis_state(basis: &ProductBasis, labels: &[&str]) -> Result<CVec> {
    let dim = basis.dense_dim(DEFAULT_DENSE_CAP)?;
    let idx = basis.index_of_site_labels(labels)? as usize;
    let mut v = CVec::zeros(dim);
    v[idx] = C64::new(1.0, 0.0);
    Ok(v)
}

/// Dense superposition `sum_k c_k |labels_k>` (not normalized).
pub fn superposition(basis: &ProductBasis, terms: &[(&[&str], C64)]) -> Result<CVec> {
    let dim = basis.dense_dim(DEFAULT_DENSE_CAP)?;
    let mut v = CVec::zeros(dim);
    for (labels, c) in terms {
        let idx = basis.index_of_site_labels(labels)? as usize;
        v[idx] += *c;
    }
    Ok(v)
}

/// One pulsed coupling `Omega(t) |aux><comp|` acting on a set of sites, with
/// identity on all spectator sites.
#[derive(Debug, Clone)]
pub struct Coupling {
    /// Sites the coupling acts on, strictly increasing. States below are
    /// vectors over the product space of these sites only.
    active_sites: Vec<usize>,
    aux_state: CVec,
    comp_state: CVec,
    pulse: SegmentedPulse,
}

impl Coupling {
    /// Checked constructor: `comp` must be supported on all-`V1` product
    /// states of the active sites and `aux` on states with at least one
    /// `V2` label. Orthogonality then holds by disjoint support and is
    /// verified numerically.
    pub fn bipartite(
        basis: &ProductBasis,
        active_sites: &[usize],
        aux: &CVec,
        comp: &CVec,
        pulse: SegmentedPulse,
    ) -> Result<Self> {
        let c = Self::raw(basis, active_sites, aux, comp, pulse)?;
        let dims = active_dims(basis, &c.active_sites)?;
        for (k, amp) in c.comp_state.iter().enumerate() {
            if amp.norm() > ORTHOGONALITY_TOL {
                let levels = decode_mixed_radix(k, &dims);
                for (pos, &site) in c.active_sites.iter().enumerate() {
                    if !basis.site(site).is_computational(levels[pos]) {
                        return Err(Error::SupportOutsideSpan(amp.norm()));
                    }
                }
            }
        }
        for (k, amp) in c.aux_state.iter().enumerate() {
            if amp.norm() > ORTHOGONALITY_TOL {
                let levels = decode_mixed_radix(k, &dims);
                let any_aux = c
                    .active_sites
                    .iter()
                    .enumerate()
                    .any(|(pos, &site)| !basis.site(site).is_computational(levels[pos]));
                if !any_aux {
                    return Err(Error::InvalidInput(
                        "aux state of a bipartite coupling has no auxiliary label".into(),
                    ));
                }
            }
        }
        Ok(c)
    }

    /// Unchecked pairing of two orthogonal states. This bypasses the
    /// bipartite validation and exists for counterexamples, effective-model
    /// bridges, and dense oracles of transfer steps; gate constructions go
    /// through [`Coupling::bipartite`].
    pub fn raw(
        basis: &ProductBasis,
        active_sites: &[usize],
        target: &CVec,
        source: &CVec,
        pulse: SegmentedPulse,
    ) -> Result<Self> {
        if active_sites.is_empty() {
            return Err(Error::InvalidInput("coupling needs at least one active site".into()));
        }
        if !active_sites.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("active sites must be strictly increasing".into()));
        }
        if *active_sites.last().unwrap() >= basis.n_sites() {
            return Err(Error::InvalidInput(format!(
                "active site {} out of range",
                active_sites.last().unwrap()
            )));
        }
        let dims = active_dims(basis, active_sites)?;
        let adim: usize = dims.iter().product();
        if target.len() != adim || source.len() != adim {
            return Err(Error::DimensionMismatch(target.len(), adim));
        }
        let aux_state = normalized(target)?;
        let comp_state = normalized(source)?;
        let ov = inner(&aux_state, &comp_state).norm();
        if ov > ORTHOGONALITY_TOL {
            return Err(Error::NonOrthogonalStates(ov));
        }
        Ok(Self {
            active_sites: active_sites.to_vec(),
            aux_state,
            comp_state,
            pulse,
        })
    }

    pub fn active_sites(&self) -> &[usize] {
        &self.active_sites
    }

    pub fn aux_state(&self) -> &CVec {
        &self.aux_state
    }

    pub fn comp_state(&self) -> &CVec {
        &self.comp_state
    }

    pub fn pulse(&self) -> &SegmentedPulse {
        &self.pulse
    }
}

fn active_dims(basis: &ProductBasis, active_sites: &[usize]) -> Result<Vec<usize>> {
    Ok(active_sites.iter().map(|&s| basis.site(s).dim()).collect())
}

fn decode_mixed_radix(mut idx: usize, dims: &[usize]) -> Vec<u8> {
    let mut out = vec![0u8; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = (idx % d) as u8;
        idx /= d;
    }
    out
}

/// A time-dependent Hermitian operator given as a list of pulsed couplings.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    basis: ProductBasis,
    couplings: Vec<Coupling>,
    label: String,
}

impl HamiltonianSpec {
    pub fn new(basis: ProductBasis, couplings: Vec<Coupling>, label: impl Into<String>) -> Self {
        Self { basis, couplings, label: label.into() }
    }

    pub fn basis(&self) -> &ProductBasis {
        &self.basis
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Longest pulse duration across couplings: the evolution window is
    /// `[0, max_duration]`.
    pub fn max_duration(&self) -> f64 {
        self.couplings
            .iter()
            .map(|c| c.pulse.total_duration())
            .fold(0.0, f64::max)
    }

    /// Merged, sorted, deduplicated segment boundaries of all pulses,
    /// including 0 and the final time.
    pub fn segment_boundaries(&self) -> Vec<f64> {
        let mut ts = vec![0.0, self.max_duration()];
        for c in &self.couplings {
            ts.extend(c.pulse.boundaries());
        }
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        ts
    }

    /// Assemble the dense Hermitian matrix at time `t`, built exactly as
    /// `A(t) + A(t)^dag`.
    pub fn assemble_matrix(&self, t: f64) -> Result<CMat> {
        let dim = self.basis.dense_dim(DEFAULT_DENSE_CAP)?;
        let mut a = CMat::zeros((dim, dim));
        let strides = self.basis.site_strides();
        for c in &self.couplings {
            let omega = c.pulse.value(t);
            if omega == ZERO {
                continue;
            }
            let dims = active_dims(&self.basis, &c.active_sites)?;
            // Offset of each active-space index into the global index.
            let active_offsets: Vec<usize> = (0..c.aux_state.len())
                .map(|k| {
                    let levels = decode_mixed_radix(k, &dims);
                    c.active_sites
                        .iter()
                        .zip(&levels)
                        .map(|(&s, &lv)| strides[s] as usize * lv as usize)
                        .sum()
                })
                .collect();
            // Offsets of every spectator configuration (incl. phonon).
            let spectator_offsets = spectator_offsets(&self.basis, &c.active_sites);
            for (row_a, za) in c.aux_state.iter().enumerate() {
                if za.norm() == 0.0 {
                    continue;
                }
                for (col_a, zc) in c.comp_state.iter().enumerate() {
                    if zc.norm() == 0.0 {
                        continue;
                    }
                    let val = omega * za * zc.conj();
                    for &sp in &spectator_offsets {
                        let r = active_offsets[row_a] + sp;
                        let cidx = active_offsets[col_a] + sp;
                        a[[r, cidx]] += val;
                    }
                }
            }
        }
        let mut h = CMat::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                h[[i, j]] = a[[i, j]] + a[[j, i]].conj();
            }
        }
        Ok(h)
    }
}

/// Global-index offsets of all spectator configurations for the given
/// active sites (identity lift over the rest of the chain and the phonon
/// factor).
fn spectator_offsets(basis: &ProductBasis, active_sites: &[usize]) -> Vec<usize> {
    let strides = basis.site_strides();
    let mut offsets = vec![0usize];
    for s in 0..basis.n_sites() {
        if active_sites.contains(&s) {
            continue;
        }
        let d = basis.site(s).dim();
        let stride = strides[s] as usize;
        offsets = offsets
            .iter()
            .cartesian_product(0..d)
            .map(|(&base, lv)| base + lv * stride)
            .collect();
    }
    let ph = basis.phonon_dim();
    if ph > 1 {
        offsets = offsets
            .iter()
            .cartesian_product(0..ph)
            .map(|(&base, n)| base + n)
            .collect();
    }
    offsets.sort_unstable();
    offsets
}

/// Assemble the dense Hermitian matrix of a spec at time `t`.
pub fn assemble_matrix(spec: &HamiltonianSpec, t: f64) -> Result<CMat> {
    spec.assemble_matrix(t)
}

fn check_pulse_ratio_constant(p0: &SegmentedPulse, p1: &SegmentedPulse) -> Result<()> {
    let s0 = p0.segments();
    let s1 = p1.segments();
    if s0.len() != s1.len() {
        return Err(Error::RatioNotConstant(format!(
            "segment counts differ: {} vs {}",
            s0.len(),
            s1.len()
        )));
    }
    let all0_zero = s0.iter().all(|s| s.envelope.peak_amplitude == 0.0);
    let all1_zero = s1.iter().all(|s| s.envelope.peak_amplitude == 0.0);
    let mut phase_diff: Option<f64> = None;
    for (a, b) in s0.iter().zip(s1) {
        if a.envelope.shape != b.envelope.shape {
            return Err(Error::RatioNotConstant("envelope shapes differ".into()));
        }
        let dd = (a.envelope.duration - b.envelope.duration).abs();
        if dd > 1e-12 * a.envelope.duration.max(b.envelope.duration) {
            return Err(Error::RatioNotConstant("segment durations differ".into()));
        }
        // Cross-multiplied amplitude-ratio constancy (zero-safe).
        let lhs = a.envelope.peak_amplitude * s1[0].envelope.peak_amplitude;
        let rhs = b.envelope.peak_amplitude * s0[0].envelope.peak_amplitude;
        let scale = lhs.abs().max(rhs.abs()).max(1e-300);
        if !(all0_zero || all1_zero) && (lhs - rhs).abs() / scale > 1e-12 {
            return Err(Error::RatioNotConstant(
                "amplitude ratio varies across segments".into(),
            ));
        }
        if a.envelope.peak_amplitude > 0.0 && b.envelope.peak_amplitude > 0.0 {
            let d = wrap_angle(a.phase - b.phase);
            match phase_diff {
                None => phase_diff = Some(d),
                Some(d0) => {
                    if wrap_angle(d - d0).abs() > 1e-12 {
                        return Err(Error::RatioNotConstant(
                            "relative phase varies across segments".into(),
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * std::f64::consts::PI);
    if y > std::f64::consts::PI {
        y -= 2.0 * std::f64::consts::PI;
    }
    y
}

/// Check that `state` is supported on `span` (a set of basis indices) and
/// return its coordinates in that span's index order.
fn restrict_to_span(state: &CVec, span: &[usize]) -> Result<CVec> {
    let mut coords = CVec::zeros(span.len());
    let mut captured = 0.0;
    for (k, &idx) in span.iter().enumerate() {
        coords[k] = state[idx];
        captured += state[idx].norm_sqr();
    }
    let total = state.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let residual = (total - captured).max(0.0).sqrt();
    if residual > ORTHOGONALITY_TOL {
        return Err(Error::SupportOutsideSpan(residual));
    }
    Ok(coords)
}

fn check_mutually_orthogonal(states: &[&CVec]) -> Result<()> {
    for i in 0..states.len() {
        for j in (i + 1)..states.len() {
            let ov = inner(states[i], states[j]).norm();
            if ov > ORTHOGONALITY_TOL {
                return Err(Error::NonOrthogonalStates(ov));
            }
        }
    }
    Ok(())
}

/// Deterministic orthogonal complement of `states` within the span given by
/// basis indices: scans span basis vectors in index order and returns the
/// first residual with norm^2 >= 1/4, normalized.
fn orthogonal_complement(basis_dim: usize, span: &[usize], states: &[&CVec]) -> CVec {
    for &idx in span {
        let mut resid = CVec::zeros(basis_dim);
        resid[idx] = C64::new(1.0, 0.0);
        for s in states {
            let c = inner(s, &resid);
            resid = &resid - &s.mapv(|z| z * c);
        }
        let n = vec_norm(&resid);
        if n * n >= 0.25 {
            return resid.mapv(|z| z / n);
        }
    }
    unreachable!("span larger than state count always leaves a complement");
}

/// One-qubit drive: couplings `|a0><0|` and `|a0><1|` on the designated
/// site with a time-independent amplitude ratio.
pub fn h1_spec(
    basis: &ProductBasis,
    site: usize,
    amp0: &SegmentedPulse,
    amp1: &SegmentedPulse,
) -> Result<HamiltonianSpec> {
    check_pulse_ratio_constant(amp0, amp1)?;
    let g = basis.site(site);
    let dim = g.dim();
    let mut couplings = Vec::new();
    for (label, pulse) in [("0", amp0), ("1", amp1)] {
        if pulse.segments().iter().all(|s| s.envelope.peak_amplitude == 0.0) {
            continue;
        }
        let mut aux = CVec::zeros(dim);
        aux[g.level_index("a0")? as usize] = C64::new(1.0, 0.0);
        let mut comp = CVec::zeros(dim);
        comp[g.level_index(label)? as usize] = C64::new(1.0, 0.0);
        couplings.push(Coupling::bipartite(basis, &[site], &aux, &comp, pulse.clone())?);
    }
    Ok(HamiltonianSpec::new(basis.clone(), couplings, "h1"))
}

/// Two-qubit drive toward `|a0 a0>` and `|a1 a1>` from two orthogonal
/// states in `Span{|10>, |11>}`.
pub fn h2_spec(
    basis: &ProductBasis,
    phi0: &CVec,
    phi1: &CVec,
    pulse0: SegmentedPulse,
    pulse1: SegmentedPulse,
) -> Result<HamiltonianSpec> {
    expect_two_sites(basis)?;
    let span = [
        basis.index_of_site_labels(&["1", "0"])? as usize,
        basis.index_of_site_labels(&["1", "1"])? as usize,
    ];
    let phi0 = normalized(phi0)?;
    let phi1 = normalized(phi1)?;
    restrict_to_span(&phi0, &span)?;
    restrict_to_span(&phi1, &span)?;
    check_mutually_orthogonal(&[&phi0, &phi1])?;
    let couplings = vec![
        Coupling::bipartite(basis, &[0, 1], &basis_state(basis, &["a0", "a0"])?, &phi0, pulse0)?,
        Coupling::bipartite(basis, &[0, 1], &basis_state(basis, &["a1", "a1"])?, &phi1, pulse1)?,
    ];
    Ok(HamiltonianSpec::new(basis.clone(), couplings, "h2"))
}

/// General two-qubit drive: three mutually orthogonal states of the full
/// two-qubit computational space toward `|a0 a0>`, `|a1 a1>`, `|a0 a1>`.
/// Also returns the computed orthogonal complement `|phi_perp>`.
pub fn h3_spec(
    basis: &ProductBasis,
    phis: [&CVec; 3],
    pulses: [SegmentedPulse; 3],
) -> Result<(HamiltonianSpec, CVec)> {
    expect_two_sites(basis)?;
    let span: Vec<usize> = [["0", "0"], ["0", "1"], ["1", "0"], ["1", "1"]]
        .iter()
        .map(|l| basis.index_of_site_labels(&l[..]).map(|i| i as usize))
        .collect::<Result<_>>()?;
    let normed: Vec<CVec> = phis
        .iter()
        .map(|p| normalized(p))
        .collect::<Result<_>>()?;
    for p in &normed {
        restrict_to_span(p, &span)?;
    }
    check_mutually_orthogonal(&normed.iter().collect::<Vec<_>>())?;
    let aux_labels = [["a0", "a0"], ["a1", "a1"], ["a0", "a1"]];
    let mut couplings = Vec::new();
    for ((phi, pulse), aux) in normed.iter().zip(pulses).zip(aux_labels) {
        couplings.push(Coupling::bipartite(
            basis,
            &[0, 1],
            &basis_state(basis, &aux[..])?,
            phi,
            pulse,
        )?);
    }
    let dim = basis.dense_dim(DEFAULT_DENSE_CAP)?;
    let perp = orthogonal_complement(dim, &span, &normed.iter().collect::<Vec<_>>());
    Ok((HamiltonianSpec::new(basis.clone(), couplings, "h3"), perp))
}

/// One-qutrit drive: couplings `|a0><psi0|` and `|a1><psi1|` on a
/// five-level site, `psi` states in `Span{|0>, |1>, |2>}`. Also returns the
/// computed `|psi_perp>`.
pub fn h4_spec(
    basis: &ProductBasis,
    site: usize,
    psi0: &CVec,
    psi1: &CVec,
    pulse0: SegmentedPulse,
    pulse1: SegmentedPulse,
) -> Result<(HamiltonianSpec, CVec)> {
    let g = basis.site(site);
    if g.v1_len() != 3 {
        return Err(Error::InvalidInput(
            "h4 needs a qutrit site with V1 = {0, 1, 2}".into(),
        ));
    }
    if basis.n_sites() != 1 {
        return Err(Error::InvalidInput(
            "h4 states are site-local; use a single-site basis".into(),
        ));
    }
    let span: Vec<usize> = ["0", "1", "2"]
        .iter()
        .map(|l| g.level_index(l).map(|i| i as usize))
        .collect::<Result<_>>()?;
    let psi0 = normalized(psi0)?;
    let psi1 = normalized(psi1)?;
    restrict_to_span(&psi0, &span)?;
    restrict_to_span(&psi1, &span)?;
    check_mutually_orthogonal(&[&psi0, &psi1])?;
    let dim = g.dim();
    let mut aux0 = CVec::zeros(dim);
    aux0[g.level_index("a0")? as usize] = C64::new(1.0, 0.0);
    let mut aux1 = CVec::zeros(dim);
    aux1[g.level_index("a1")? as usize] = C64::new(1.0, 0.0);
    let couplings = vec![
        Coupling::bipartite(basis, &[site], &aux0, &psi0, pulse0)?,
        Coupling::bipartite(basis, &[site], &aux1, &psi1, pulse1)?,
    ];
    let perp = orthogonal_complement(dim, &span, &[&psi0, &psi1]);
    Ok((HamiltonianSpec::new(basis.clone(), couplings, "h4"), perp))
}

/// Two-qutrit drive: three mutually orthogonal states in
/// `Span{|20>, |21>, |22>}` toward `|a0 a0>`, `|a1 a1>`, `|a0 a1>`.
pub fn h5_spec(
    basis: &ProductBasis,
    psis: [&CVec; 3],
    pulses: [SegmentedPulse; 3],
) -> Result<HamiltonianSpec> {
    expect_two_sites(basis)?;
    let span: Vec<usize> = [["2", "0"], ["2", "1"], ["2", "2"]]
        .iter()
        .map(|l| basis.index_of_site_labels(&l[..]).map(|i| i as usize))
        .collect::<Result<_>>()?;
    let normed: Vec<CVec> = psis
        .iter()
        .map(|p| normalized(p))
        .collect::<Result<_>>()?;
    for p in &normed {
        restrict_to_span(p, &span)?;
    }
    check_mutually_orthogonal(&normed.iter().collect::<Vec<_>>())?;
    let aux_labels = [["a0", "a0"], ["a1", "a1"], ["a0", "a1"]];
    let mut couplings = Vec::new();
    for ((psi, pulse), aux) in normed.iter().zip(pulses).zip(aux_labels) {
        couplings.push(Coupling::bipartite(
            basis,
            &[0, 1],
            &basis_state(basis, &aux[..])?,
            psi,
            pulse,
        )?);
    }
    Ok(HamiltonianSpec::new(basis.clone(), couplings, "h5"))
}

fn expect_two_sites(basis: &ProductBasis) -> Result<()> {
    if basis.n_sites() != 2 {
        return Err(Error::InvalidInput(format!(
            "expected a two-site basis, got {} sites",
            basis.n_sites()
        )));
    }
    Ok(())
}
