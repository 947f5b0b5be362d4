//! Full-CI exact diagonalization and propagation, the ground truth the pair
//! density machinery is measured against.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{binomial, enumerate_configurations, Configuration};
use crate::error::{CoreError, Result};
use crate::gdm::{gdm_from_ci, CiVector};
use crate::linalg::{eigh_real, CVec};
use crate::model::Model;

/// Hard cap on the configuration space handled by the oracle.
pub const MAX_FCI_DIM: usize = 50_000;
/// Above this dimension the solver switches from dense to Lanczos.
pub const DENSE_CUTOFF: usize = 2_000;

pub struct FciSpace {
    n_orbitals: usize,
    n_electrons: usize,
    configs: Vec<Configuration>,
    masks: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl FciSpace {
    pub fn new(n_orbitals: usize, n_electrons: usize) -> Result<Self> {
        if n_electrons < 1 || n_electrons > n_orbitals {
            return Err(CoreError::InvalidInput(format!(
                "cannot place {n_electrons} electrons in {n_orbitals} orbitals"
            )));
        }
        let dim = binomial(n_orbitals, n_electrons);
        if dim > MAX_FCI_DIM as u128 {
            return Err(CoreError::ResourceLimit(format!(
                "configuration space C({n_orbitals},{n_electrons}) = {dim} exceeds {MAX_FCI_DIM}"
            )));
        }
        let configs = enumerate_configurations(n_orbitals, n_electrons)?;
        let masks: Vec<u64> = configs.iter().map(|c| c.bitmask()).collect();
        let index = masks.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        Ok(Self {
            n_orbitals,
            n_electrons,
            configs,
            masks,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn configurations(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn index_of(&self, config: &Configuration) -> Option<usize> {
        self.index.get(&config.bitmask()).copied()
    }
}

/// N-electron Hamiltonian in the configuration basis, kept as a diagonal
/// plus one-body hops (the interactions here are position-diagonal, so
/// doubles never appear).
pub struct FciOperator<'a> {
    space: &'a FciSpace,
    diag: Vec<f64>,
    /// (p, q, h_pq) with p != q, both directions listed.
    hops: Vec<(usize, usize, f64)>,
}

/// Builds H(eps, lambda) with nuclei at explicit positions.
pub fn many_body_operator_at<'a>(
    space: &'a FciSpace,
    model: &Model,
    epsilon: f64,
    lambda: f64,
    nuclear_positions: &[f64],
) -> Result<FciOperator<'a>> {
    if space.n_orbitals != model.n_orbitals() {
        return Err(CoreError::InvalidInput(format!(
            "configuration space is over {} orbitals, model has {}",
            space.n_orbitals,
            model.n_orbitals()
        )));
    }
    let k = space.n_orbitals;
    let ht = model.one_body_at(epsilon, nuclear_positions);
    let mut hops = Vec::new();
    for p in 1..=k {
        for q in 1..=k {
            if p != q && ht[(p - 1, q - 1)] != 0.0 {
                hops.push((p, q, ht[(p - 1, q - 1)]));
            }
        }
    }
    let mut diag = Vec::with_capacity(space.dim());
    for config in &space.configs {
        let mut e: f64 = config.orbitals().iter().map(|&a| ht[(a - 1, a - 1)]).sum();
        for (i, j) in config.pairs() {
            e += lambda * model.pair_interaction(i, j);
        }
        diag.push(e);
    }
    Ok(FciOperator { space, diag, hops })
}

pub fn many_body_operator<'a>(
    space: &'a FciSpace,
    model: &Model,
    epsilon: f64,
    lambda: f64,
) -> Result<FciOperator<'a>> {
    many_body_operator_at(space, model, epsilon, lambda, &model.nuclear_positions())
}

/// Parity of occupied orbitals strictly between p and q.
fn hop_sign(mask: u64, p: usize, q: usize) -> f64 {
    let (lo, hi) = if p < q { (p, q) } else { (q, p) };
    let between = if hi - lo <= 1 {
        0u64
    } else {
        ((1u64 << (hi - 1)) - 1) & !((1u64 << lo) - 1)
    };
    if (mask & between).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl FciOperator<'_> {
    pub fn space(&self) -> &FciSpace {
        self.space
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn apply(&self, x: &CVec) -> CVec {
        assert_eq!(x.len(), self.space.dim());
        let mut y = CVec::zeros(x.len());
        for (a, &xa) in x.iter().enumerate() {
            if xa == Complex64::new(0.0, 0.0) {
                y[a] += self.diag[a] * xa;
                continue;
            }
            y[a] += self.diag[a] * xa;
            let mask = self.space.masks[a];
            for &(p, q, val) in &self.hops {
                let pb = 1u64 << (p - 1);
                let qb = 1u64 << (q - 1);
                // moves an electron from p to q
                if mask & pb != 0 && mask & qb == 0 {
                    let target = (mask & !pb) | qb;
                    let b = self.space.index[&target];
                    y[b] += hop_sign(mask, p, q) * val * xa;
                }
            }
        }
        y
    }

    /// Dense real-symmetric matrix; guarded by the dense cutoff.
    pub fn dense(&self) -> Result<Array2<f64>> {
        let dim = self.space.dim();
        if dim > DENSE_CUTOFF {
            return Err(CoreError::ResourceLimit(format!(
                "dense Hamiltonian of dimension {dim} exceeds cutoff {DENSE_CUTOFF}"
            )));
        }
        let mut h = Array2::zeros((dim, dim));
        for a in 0..dim {
            h[(a, a)] = self.diag[a];
            let mask = self.space.masks[a];
            for &(p, q, val) in &self.hops {
                let pb = 1u64 << (p - 1);
                let qb = 1u64 << (q - 1);
                if mask & pb != 0 && mask & qb == 0 {
                    let target = (mask & !pb) | qb;
                    let b = self.space.index[&target];
                    h[(b, a)] += hop_sign(mask, p, q) * val;
                }
            }
        }
        Ok(h)
    }

    pub fn expectation(&self, x: &CVec) -> f64 {
        let hx = self.apply(x);
        x.iter()
            .zip(hx.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }
}

pub struct FciSolution {
    pub energies: Vec<f64>,
    pub vectors: Vec<CVec>,
    pub residuals: Vec<f64>,
}

impl FciSolution {
    pub fn to_ci_vector(&self, space: &FciSpace, i: usize) -> Result<CiVector> {
        CiVector::new(space.n_orbitals, space.n_electrons, self.vectors[i].clone())
    }
}

/// Lowest k eigenpairs of H(eps, lambda), dense below the cutoff and
/// restarted Lanczos with full reorthogonalization above it.
pub fn fci_solve(
    model: &Model,
    n_electrons: usize,
    epsilon: f64,
    lambda: f64,
    k_states: usize,
) -> Result<FciSolution> {
    let space = FciSpace::new(model.n_orbitals(), n_electrons)?;
    let op = many_body_operator(&space, model, epsilon, lambda)?;
    solve_operator(&op, k_states)
}

pub fn solve_operator(op: &FciOperator, k_states: usize) -> Result<FciSolution> {
    let dim = op.space.dim();
    if k_states == 0 || k_states > dim {
        return Err(CoreError::InvalidInput(format!(
            "requested {k_states} states from a dimension-{dim} space"
        )));
    }
    let (energies, vectors) = if dim <= DENSE_CUTOFF {
        let h = op.dense()?;
        let (w, v) = eigh_real(&h)?;
        let energies: Vec<f64> = w.iter().take(k_states).copied().collect();
        let vectors: Vec<CVec> = (0..k_states)
            .map(|j| v.column(j).mapv(|x| Complex64::new(x, 0.0)))
            .collect();
        (energies, vectors)
    } else {
        lanczos_lowest(|x| op.apply(x), dim, k_states, 1e-10, 60)?
    };
    let mut residuals = Vec::with_capacity(k_states);
    for (e, v) in energies.iter().zip(vectors.iter()) {
        let hv = op.apply(v);
        let r = hv
            .iter()
            .zip(v.iter())
            .map(|(h, x)| (h - e * x).norm_sqr())
            .sum::<f64>()
            .sqrt();
        residuals.push(r);
    }
    if residuals.iter().any(|&r| r > 1e-9) {
        return Err(CoreError::Convergence(format!(
            "eigenpair residuals {residuals:?} exceed 1e-9"
        )));
    }
    Ok(FciSolution {
        energies,
        vectors,
        residuals,
    })
}

/// Restarted Lanczos with full reorthogonalization and locking of converged
/// Ritz pairs.
pub(crate) fn lanczos_lowest(
    apply: impl Fn(&CVec) -> CVec,
    dim: usize,
    k: usize,
    tol: f64,
    max_restarts: usize,
) -> Result<(Vec<f64>, Vec<CVec>)> {
    let m = (3 * k + 30).min(dim);
    let mut locked: Vec<(f64, CVec)> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut start: CVec = CVec::from_iter(
        (0..dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
    );

    for _restart in 0..max_restarts {
        // orthogonalize the start vector against locked pairs
        for (_, v) in &locked {
            let ov = crate::linalg::dot(v, &start);
            start = &start - &v.mapv(|z| z * ov);
        }
        let norm = start.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            start = CVec::from_iter((0..dim).map(|_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }));
            continue;
        }
        start.mapv_inplace(|z| z / norm);

        let mut basis: Vec<CVec> = vec![start.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        for t in 0..m {
            let mut w = apply(&basis[t]);
            // project out locked pairs and the whole Krylov basis, twice
            for _ in 0..2 {
                for (_, v) in &locked {
                    let ov = crate::linalg::dot(v, &w);
                    w = &w - &v.mapv(|z| z * ov);
                }
                for v in &basis {
                    let ov = crate::linalg::dot(v, &w);
                    w = &w - &v.mapv(|z| z * ov);
                }
            }
            let alpha = {
                // diagonal recurrence element recovered after projection
                let hv = apply(&basis[t]);
                basis[t]
                    .iter()
                    .zip(hv.iter())
                    .map(|(a, b)| (a.conj() * b).re)
                    .sum::<f64>()
            };
            alphas.push(alpha);
            let beta = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if t + 1 == m || beta < 1e-13 {
                break;
            }
            betas.push(beta);
            basis.push(w.mapv(|z| z / beta));
        }

        let steps = alphas.len();
        let mut tri = Array2::zeros((steps, steps));
        for (i, &a) in alphas.iter().enumerate() {
            tri[(i, i)] = a;
        }
        for (i, &b) in betas.iter().take(steps.saturating_sub(1)).enumerate() {
            tri[(i, i + 1)] = b;
            tri[(i + 1, i)] = b;
        }
        let (theta, y) = eigh_real(&tri)?;

        let want = k - locked.len();
        let mut candidates: Vec<(f64, CVec)> = Vec::new();
        for j in 0..steps.min(want + 2) {
            let mut x = CVec::zeros(dim);
            for (t, vb) in basis.iter().enumerate() {
                let w = y[(t, j)];
                if w != 0.0 {
                    x = &x + &vb.mapv(|z| z * w);
                }
            }
            let nx = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nx > 1e-12 {
                x.mapv_inplace(|z| z / nx);
                candidates.push((theta[j], x));
            }
        }

        let mut next_start: Option<CVec> = None;
        for (th, x) in candidates {
            let hx = apply(&x);
            let resid = hx
                .iter()
                .zip(x.iter())
                .map(|(h, v)| (h - th * v).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if resid <= tol {
                if locked.len() < k {
                    locked.push((th, x));
                }
            } else if next_start.is_none() {
                next_start = Some(x);
            }
        }
        locked.sort_by(|a, b| a.0.total_cmp(&b.0));
        if locked.len() >= k {
            let energies = locked.iter().take(k).map(|(e, _)| *e).collect();
            let vectors = locked.iter().take(k).map(|(_, v)| v.clone()).collect();
            return Ok((energies, vectors));
        }
        start = next_start.unwrap_or_else(|| {
            CVec::from_iter((0..dim).map(|_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }))
        });
    }
    Err(CoreError::Convergence(format!(
        "Lanczos locked only {}/{k} eigenpairs",
        locked.len()
    )))
}

/// Slater determinant of orthonormal one-particle orbitals expanded over
/// site-spin configurations: coefficients are minors of the orbital matrix.
pub fn ci_from_orbitals(orbital_columns: &Array2<f64>, occupied: &[usize]) -> Result<CiVector> {
    let k = orbital_columns.nrows();
    let n = occupied.len();
    if n < 1 || n > k {
        return Err(CoreError::InvalidInput(format!(
            "cannot occupy {n} orbitals out of {k}"
        )));
    }
    if occupied.iter().any(|&c| c == 0 || c > orbital_columns.ncols()) {
        return Err(CoreError::InvalidInput(format!(
            "occupied orbital list {occupied:?} outside 1..={}",
            orbital_columns.ncols()
        )));
    }
    let configs = enumerate_configurations(k, n)?;
    let mut coeffs = CVec::zeros(configs.len());
    let mut minor = Array2::<f64>::zeros((n, n));
    for (ci, config) in configs.iter().enumerate() {
        for (r, &row) in config.orbitals().iter().enumerate() {
            for (c, &col) in occupied.iter().enumerate() {
                minor[(r, c)] = orbital_columns[(row - 1, col - 1)];
            }
        }
        coeffs[ci] = Complex64::new(det_small(&minor), 0.0);
    }
    let norm = coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    coeffs.mapv_inplace(|z| z / norm);
    CiVector::new(k, n, coeffs)
}

/// Determinant by partial-pivot elimination; sizes here are tiny.
fn det_small(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut m = a.clone();
    let mut det = 1.0_f64;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[(r, col)].abs() > m[(piv, col)].abs() {
                piv = r;
            }
        }
        if m[(piv, col)].abs() < 1e-300 {
            return 0.0;
        }
        if piv != col {
            for c in 0..n {
                let tmp = m[(col, c)];
                m[(col, c)] = m[(piv, c)];
                m[(piv, c)] = tmp;
            }
            det = -det;
        }
        det *= m[(col, col)];
        for r in col + 1..n {
            let f = m[(r, col)] / m[(col, col)];
            for c in col..n {
                m[(r, c)] -= f * m[(col, c)];
            }
        }
    }
    det
}

/// Per-orbital occupation density of a CI state; sums to N.
pub fn ci_density(psi: &CiVector) -> Vec<f64> {
    let mut rho = vec![0.0; psi.n_orbitals()];
    for (config, coeff) in psi.configurations().iter().zip(psi.coefficients().iter()) {
        let w = coeff.norm_sqr();
        for &orb in config.orbitals() {
            rho[orb - 1] += w;
        }
    }
    rho
}

pub struct FciTrajectory {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub norms: Vec<f64>,
    pub densities: Vec<Vec<f64>>,
    pub final_state: CiVector,
}

/// Midpoint-exponential propagation of a CI state under H(eps(t), lambda(t)).
///
/// Each step applies exp(-i H(t_mid) dt) built from the dense eigensystem;
/// the decomposition is reused while the midpoint parameters stay constant.
pub fn fci_propagate(
    model: &Model,
    psi0: &CiVector,
    params: impl Fn(f64) -> (f64, f64),
    dt: f64,
    t_final: f64,
    sample_every: usize,
) -> Result<FciTrajectory> {
    if !(dt > 0.0) {
        return Err(CoreError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    if t_final < 0.0 {
        return Err(CoreError::InvalidInput(format!(
            "t_final must be nonnegative, got {t_final}"
        )));
    }
    let space = FciSpace::new(psi0.n_orbitals(), psi0.n_electrons())?;
    if space.dim() > DENSE_CUTOFF {
        return Err(CoreError::ResourceLimit(format!(
            "propagation needs the dense path; dimension {} exceeds {DENSE_CUTOFF}",
            space.dim()
        )));
    }
    let n_steps = (t_final / dt).round() as usize;
    let sample_every = sample_every.max(1);

    let mut psi: CVec = psi0.coefficients().clone();
    let mut times = Vec::new();
    let mut energies = Vec::new();
    let mut norms = Vec::new();
    let mut densities = Vec::new();

    let mut cached: Option<((f64, f64), Array1<f64>, Array2<f64>)> = None;
    let mut sample = |t: f64, psi: &CVec, op: &FciOperator| {
        times.push(t);
        energies.push(op.expectation(psi));
        norms.push(psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        let snapshot = CiVector::new(space.n_orbitals, space.n_electrons, psi.clone());
        densities.push(match snapshot {
            Ok(s) => ci_density(&s),
            Err(_) => vec![f64::NAN; space.n_orbitals],
        });
    };

    let (e0, l0) = params(0.0);
    let op0 = many_body_operator(&space, model, e0, l0)?;
    sample(0.0, &psi, &op0);

    for step in 0..n_steps {
        let t_mid = (step as f64 + 0.5) * dt;
        let (eps, lam) = params(t_mid);
        let refresh = match &cached {
            Some((key, _, _)) => *key != (eps, lam),
            None => true,
        };
        if refresh {
            let op = many_body_operator(&space, model, eps, lam)?;
            let h = op.dense()?;
            let (w, v) = eigh_real(&h)?;
            cached = Some(((eps, lam), w, v));
        }
        let (_, w, v) = cached.as_ref().unwrap();
        // psi <- V e^{-i w dt} V^T psi with real V
        let dimn = space.dim();
        let mut proj = CVec::zeros(dimn);
        for j in 0..dimn {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..dimn {
                acc += v[(i, j)] * psi[i];
            }
            proj[j] = acc * Complex64::from_polar(1.0, -w[j] * dt);
        }
        let mut next = CVec::zeros(dimn);
        for i in 0..dimn {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..dimn {
                acc += v[(i, j)] * proj[j];
            }
            next[i] = acc;
        }
        psi = next;

        let t_now = (step + 1) as f64 * dt;
        if (step + 1) % sample_every == 0 || step + 1 == n_steps {
            let (ec, lc) = params(t_now);
            let opc = many_body_operator(&space, model, ec, lc)?;
            sample(t_now, &psi, &opc);
        }
    }

    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let final_state = CiVector::new(
        space.n_orbitals,
        space.n_electrons,
        psi.mapv(|z| z / norm),
    )?;
    Ok(FciTrajectory {
        times,
        energies,
        norms,
        densities,
        final_state,
    })
}

/// Worst-case deviations between a pair-matrix run and the exact CI run
/// of the same driven protocol. No threshold is applied; for interacting
/// schedules the numbers quantify how far the reduced propagation strays.
#[derive(Debug, Clone)]
pub struct FidelityReport {
    pub max_density_deviation: f64,
    pub max_energy_deviation: f64,
    pub final_density_deviation: f64,
    pub n_compared: usize,
}

pub fn compare_with_fci(
    model: &Model,
    psi0: &CiVector,
    schedule: &crate::dynamics::Schedule,
    sample_every: usize,
) -> Result<FidelityReport> {
    schedule.validate()?;
    let d0 = gdm_from_ci(psi0)?;
    let traj = crate::dynamics::propagate_gdm(&d0, model, schedule, sample_every)?;
    let exact = fci_propagate(
        model,
        psi0,
        |t| schedule.params_at(t),
        schedule.dt,
        schedule.t_final,
        sample_every,
    )?;
    if traj.samples.len() != exact.times.len() {
        return Err(CoreError::InvalidInput(format!(
            "sample grids disagree: {} vs {}",
            traj.samples.len(),
            exact.times.len()
        )));
    }
    let mut max_density = 0.0f64;
    let mut max_energy = 0.0f64;
    let mut final_density = 0.0f64;
    for (i, s) in traj.samples.iter().enumerate() {
        let dens_dev = s
            .density
            .iter()
            .zip(&exact.densities[i])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        max_density = max_density.max(dens_dev);
        max_energy = max_energy.max((s.energy - exact.energies[i]).abs());
        final_density = dens_dev;
    }
    Ok(FidelityReport {
        max_density_deviation: max_density,
        max_energy_deviation: max_energy,
        final_density_deviation: final_density,
        n_compared: traj.samples.len(),
    })
}

/// |<a|b>| for CI states over the same space.
pub fn ci_overlap(a: &CiVector, b: &CiVector) -> f64 {
    assert_eq!(a.n_orbitals(), b.n_orbitals());
    assert_eq!(a.n_electrons(), b.n_electrons());
    a.coefficients()
        .iter()
        .zip(b.coefficients().iter())
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        .norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::GeminalBasis;
    
    use crate::model::{build_model, geminal_hamiltonian, Interaction, ModelConfig};

    fn hubbard(n_sites: usize, u: f64, seed: u64) -> Model {
        build_model(ModelConfig {
            n_sites,
            spacing: 1.0,
            softening: 1.0,
            nuclei: vec![],
            interaction: Interaction::Hubbard { strength: u },
            perturbation_seed: seed,
        })
        .unwrap()
    }

    fn soft_chain(n_sites: usize, seed: u64) -> Model {
        build_model(ModelConfig {
            n_sites,
            spacing: 1.0,
            softening: 1.0,
            nuclei: vec![crate::model::Nucleus {
                charge: 2.0,
                position: 1.0,
                mobile: false,
                mass: 1.0,
            }],
            interaction: Interaction::SoftCoulomb { strength: 1.0 },
            perturbation_seed: seed,
        })
        .unwrap()
    }

    #[test]
    fn two_electron_hamiltonian_matches_pair_matrix() {
        // for N=2 the configuration basis and the pair basis coincide up to
        // the flat-index permutation
        let m = soft_chain(3, 5);
        let space = FciSpace::new(6, 2).unwrap();
        let op = many_body_operator(&space, &m, 0.3, 0.8).unwrap();
        let dense = op.dense().unwrap();
        let gem = geminal_hamiltonian(&m, 2, 0.3, 0.8).unwrap();
        let gb = GeminalBasis::new(6).unwrap();
        for (a, ca) in space.configurations().iter().enumerate() {
            for (b, cb) in space.configurations().iter().enumerate() {
                let fa = gb.pair_index(ca.orbitals()[0], ca.orbitals()[1]).unwrap() - 1;
                let fb = gb.pair_index(cb.orbitals()[0], cb.orbitals()[1]).unwrap() - 1;
                assert!(
                    (dense[(a, b)] - gem[(fa, fb)].re).abs() < 1e-13,
                    "configs {a},{b}"
                );
            }
        }
    }

    #[test]
    fn dense_operator_is_symmetric() {
        let m = soft_chain(3, 1);
        let space = FciSpace::new(6, 3).unwrap();
        let op = many_body_operator(&space, &m, 0.2, 1.0).unwrap();
        let h = op.dense().unwrap();
        for a in 0..space.dim() {
            for b in 0..space.dim() {
                assert!((h[(a, b)] - h[(b, a)]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn apply_matches_dense() {
        let m = soft_chain(3, 9);
        let space = FciSpace::new(6, 3).unwrap();
        let op = many_body_operator(&space, &m, 0.15, 0.7).unwrap();
        let h = op.dense().unwrap();
        let psi = CiVector::random_seeded(6, 3, 2).unwrap();
        let fast = op.apply(psi.coefficients());
        for a in 0..space.dim() {
            let mut acc = Complex64::new(0.0, 0.0);
            for b in 0..space.dim() {
                acc += h[(a, b)] * psi.coefficients()[b];
            }
            assert!((fast[a] - acc).norm() < 1e-12);
        }
    }

    #[test]
    fn hubbard_dimer_ground_energy() {
        let u = 1.0;
        let t = 0.5;
        let m = hubbard(2, u, 0);
        let sol = fci_solve(&m, 2, 0.0, 1.0, 3).unwrap();
        let root = (u * u + 16.0 * t * t).sqrt();
        assert!((sol.energies[0] - (2.0 + (u - root) / 2.0)).abs() < 1e-12);
        assert!((sol.energies[0] - 1.3819660112501051).abs() < 1e-12);
        // first excited states: S_z = +-1 pairs sit at exactly 2
        assert!((sol.energies[1] - 2.0).abs() < 1e-12);
        assert!(sol.residuals.iter().all(|&r| r <= 1e-9));
    }

    #[test]
    fn non_interacting_ground_is_orbital_sum() {
        let m = soft_chain(3, 11);
        let eps = 0.2;
        let sol = fci_solve(&m, 3, eps, 0.0, 1).unwrap();
        let (e1, _) = m.one_body_eigen(eps).unwrap();
        let expect = e1[0] + e1[1] + e1[2];
        assert!((sol.energies[0] - expect).abs() < 1e-10);
    }

    #[test]
    fn pair_density_reproduces_exact_energies() {
        // Tr[D H] over the pair basis equals the N-electron eigenvalue when
        // D comes from the corresponding eigenstate
        let m = hubbard(3, 1.3, 4);
        let n = 3;
        let sol = fci_solve(&m, n, 0.12, 1.0, 4).unwrap();
        let gem = geminal_hamiltonian(&m, n, 0.12, 1.0).unwrap();
        let space = FciSpace::new(6, 3).unwrap();
        for (i, e) in sol.energies.iter().enumerate() {
            let psi = sol.to_ci_vector(&space, i).unwrap();
            let d = crate::gdm::gdm_from_ci(&psi).unwrap();
            let val =
                crate::gdm::expectation(&d, &gem, &crate::gdm::tag_site_pairs()).unwrap();
            assert!((val.re - e).abs() < 1e-10, "state {i}: {} vs {e}", val.re);
            assert!(val.im.abs() < 1e-12);
        }
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let m = soft_chain(3, 3);
        let space = FciSpace::new(6, 3).unwrap();
        let op = many_body_operator(&space, &m, 0.25, 1.0).unwrap();
        let h = op.dense().unwrap();
        let (w, _) = eigh_real(&h).unwrap();
        let (lan, vecs) = lanczos_lowest(|x| op.apply(x), space.dim(), 4, 1e-10, 60).unwrap();
        for (i, e) in lan.iter().enumerate() {
            assert!((e - w[i]).abs() < 1e-9, "state {i}: {e} vs {}", w[i]);
            let hv = op.apply(&vecs[i]);
            let r = hv
                .iter()
                .zip(vecs[i].iter())
                .map(|(a, b)| (a - e * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(r <= 1e-9);
        }
    }

    #[test]
    fn space_dimension_is_capped() {
        assert!(matches!(
            FciSpace::new(40, 20),
            Err(CoreError::ResourceLimit(_))
        ));
    }

    #[test]
    fn determinant_of_orbital_columns() {
        let m = soft_chain(3, 21);
        let eps = 0.3;
        let (_, x) = m.one_body_eigen(eps).unwrap();
        let psi = ci_from_orbitals(&x, &[1, 2, 3]).unwrap();
        // a determinant of exact eigenorbitals is the lambda=0 ground state
        let sol = fci_solve(&m, 3, eps, 0.0, 1).unwrap();
        let fci = sol.to_ci_vector(&FciSpace::new(6, 3).unwrap(), 0).unwrap();
        assert!((ci_overlap(&psi, &fci) - 1.0).abs() < 1e-10);
        // Cauchy-Binet keeps the expansion normalized before the constructor
        let raw: f64 = psi.coefficients().iter().map(|z| z.norm_sqr()).sum();
        assert!((raw - 1.0).abs() < 1e-12);
    }

    #[test]
    fn propagation_conserves_norm_and_energy() {
        let m = soft_chain(3, 8);
        let psi0 = CiVector::random_seeded(6, 3, 5).unwrap();
        let traj = fci_propagate(&m, &psi0, |_| (0.2, 1.0), 0.01, 5.0, 100).unwrap();
        for norm in &traj.norms {
            assert!((norm - 1.0).abs() < 1e-10);
        }
        let e0 = traj.energies[0];
        for e in &traj.energies {
            assert!((e - e0).abs() < 1e-9);
        }
        for rho in &traj.densities {
            let total: f64 = rho.iter().sum();
            assert!((total - 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenstate_gains_only_phase() {
        let m = soft_chain(3, 8);
        let sol = fci_solve(&m, 3, 0.2, 1.0, 1).unwrap();
        let space = FciSpace::new(6, 3).unwrap();
        let psi0 = sol.to_ci_vector(&space, 0).unwrap();
        let traj = fci_propagate(&m, &psi0, |_| (0.2, 1.0), 0.02, 3.0, 50).unwrap();
        assert!((ci_overlap(&psi0, &traj.final_state) - 1.0).abs() < 1e-9);
        // and the phase is e^{-i E t}
        let expected = Complex64::from_polar(1.0, -sol.energies[0] * 3.0);
        let raw: Complex64 = psi0
            .coefficients()
            .iter()
            .zip(traj.final_state.coefficients().iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!((raw - expected).norm() < 1e-6, "phase drift {raw}");
    }

    #[test]
    fn slower_ramps_stay_closer_to_the_ground_state() {
        let m = soft_chain(2, 13);
        let eps = 0.2;
        let sol0 = fci_solve(&m, 2, eps, 0.0, 1).unwrap();
        let space = FciSpace::new(4, 2).unwrap();
        let psi0 = sol0.to_ci_vector(&space, 0).unwrap();
        let target = fci_solve(&m, 2, eps, 1.0, 1).unwrap();
        let target_vec = target.to_ci_vector(&space, 0).unwrap();
        let mut losses = Vec::new();
        for t_ramp in [20.0, 40.0] {
            let traj = fci_propagate(
                &m,
                &psi0,
                |t| (eps, (t / t_ramp).min(1.0)),
                0.02,
                t_ramp,
                1_000_000,
            )
            .unwrap();
            losses.push(1.0 - ci_overlap(&target_vec, &traj.final_state).powi(2));
        }
        assert!(
            losses[1] < losses[0],
            "doubling the ramp did not help: {losses:?}"
        );
    }

    #[test]
    fn spectrum_is_simple_under_perturbation() {
        let m = soft_chain(3, 42);
        let sol = fci_solve(&m, 3, 0.15, 1.0, 8).unwrap();
        for w in sol.energies.windows(2) {
            assert!(w[1] - w[0] > 1e-6, "gap {}", w[1] - w[0]);
        }
    }

    #[test]
    fn fidelity_report_is_tight_without_interaction() {
        use crate::dynamics::{Schedule, ScheduleKind};
        let model = hubbard(3, 1.0, 9);
        let psi0 = CiVector::random_seeded(6, 2, 3).unwrap();
        let ramp = |t2: f64| Schedule {
            kind: ScheduleKind::Ramp { t1: 1.0, t2, t3: 10.0 },
            epsilon: 0.2,
            dt: 0.02,
            t_final: 10.0,
        };

        let free = Schedule {
            kind: ScheduleKind::Constant { lambda: 0.0 },
            epsilon: 0.2,
            dt: 0.02,
            t_final: 10.0,
        };
        let report = compare_with_fci(&model, &psi0, &free, 25).unwrap();
        assert!(report.max_density_deviation < 1e-8, "{report:?}");
        assert!(report.max_energy_deviation < 1e-8, "{report:?}");
        assert!(report.n_compared > 10);

        let driven = compare_with_fci(&model, &psi0, &ramp(6.0), 25).unwrap();
        assert!(driven.max_density_deviation.is_finite());
        assert!(driven.max_energy_deviation.is_finite());
        assert!(driven.final_density_deviation <= driven.max_density_deviation);
    }
}
