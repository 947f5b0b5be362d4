//! Pair (geminal) density matrices: construction from CI vectors, necessary
//! occupation-representability rules, expectation values, and basis changes.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::basis::{
    binomial, enumerate_configurations, reduced_configuration, Configuration, GeminalBasis,
};
use crate::error::{CoreError, Result};
use crate::linalg::{self, CMat, CVec};

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const RULE_TOL: f64 = 1e-10;

/// Basis tag for pair functions built from raw site-spin orbitals.
pub fn tag_site_pairs() -> String {
    "site-pairs".to_string()
}

/// Basis tag for pairs of one-body eigenorbitals at a given perturbation.
pub fn tag_orbital_pairs(epsilon: f64) -> String {
    format!("orbital-pairs(eps={epsilon:.12e})")
}

/// Basis tag for eigenstates of the pair Hamiltonian at (eps, lambda).
pub fn tag_eigenbasis(epsilon: f64, lambda: f64) -> String {
    format!("pair-eigenbasis(eps={epsilon:.12e},lam={lambda:.12e})")
}

/// Coefficient matrix of the two-electron reduced density in a pair basis.
#[derive(Clone, Debug)]
pub struct Gdm {
    matrix: CMat,
    n_electrons: usize,
    basis_tag: String,
}

impl Gdm {
    pub fn from_matrix(matrix: CMat, n_electrons: usize, basis_tag: String) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(CoreError::InvalidInput(format!(
                "pair density matrix must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if n_electrons < 2 {
            return Err(CoreError::InvalidInput(format!(
                "pair density needs at least 2 electrons, got {n_electrons}"
            )));
        }
        let dev = linalg::hermitian_deviation(&matrix);
        if dev > HERMITICITY_TOL {
            return Err(CoreError::InvalidInput(format!(
                "matrix deviates from Hermiticity by {dev:.3e} (tol {HERMITICITY_TOL:.0e})"
            )));
        }
        Ok(Self {
            matrix,
            n_electrons,
            basis_tag,
        })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn basis_tag(&self) -> &str {
        &self.basis_tag
    }

    pub fn n_pairs(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of one-particle orbitals K with K(K-1)/2 = n_pairs.
    pub fn n_orbitals(&self) -> Result<usize> {
        let g = self.n_pairs();
        let k = (1.0 + (1.0 + 8.0 * g as f64).sqrt()) / 2.0;
        let k = k.round() as usize;
        if k * (k - 1) / 2 != g {
            return Err(CoreError::InvalidInput(format!(
                "pair dimension {g} is not K(K-1)/2 for any K"
            )));
        }
        Ok(k)
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    /// Tr[D^2] evaluated as the squared Frobenius norm (D Hermitian).
    pub fn trace_squared(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::hermitian_deviation(&self.matrix)
    }

    /// Frobenius norm of D^2 - D.
    pub fn idempotency_deviation(&self) -> f64 {
        let d2 = linalg::matmul(&self.matrix, &self.matrix);
        linalg::frobenius(&(&d2 - &self.matrix))
    }

    /// Occupation density per orbital index x: sum of diagonal weight over
    /// pairs containing x, scaled by 1/(N-1). Sums to N over all x.
    pub fn orbital_density(&self) -> Result<Vec<f64>> {
        let k = self.n_orbitals()?;
        let gb = GeminalBasis::new(k)?;
        let scale = 1.0 / (self.n_electrons as f64 - 1.0);
        let mut rho = vec![0.0; k];
        for (idx, (i, j)) in gb.pairs().enumerate() {
            let w = self.matrix[(idx, idx)].re * scale;
            rho[i - 1] += w;
            rho[j - 1] += w;
        }
        Ok(rho)
    }
}

/// Normalized CI expansion over the full lexicographic configuration list.
#[derive(Clone, Debug)]
pub struct CiVector {
    n_orbitals: usize,
    n_electrons: usize,
    configs: Vec<Configuration>,
    coeffs: CVec,
}

impl CiVector {
    pub fn new(n_orbitals: usize, n_electrons: usize, coeffs: CVec) -> Result<Self> {
        let configs = enumerate_configurations(n_orbitals, n_electrons)?;
        if coeffs.len() != configs.len() {
            return Err(CoreError::InvalidInput(format!(
                "expected {} coefficients for K={n_orbitals}, N={n_electrons}, got {}",
                configs.len(),
                coeffs.len()
            )));
        }
        let norm_sq: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > 1e-12 {
            return Err(CoreError::InvalidInput(format!(
                "CI vector norm^2 = {norm_sq} is not 1 within 1e-12"
            )));
        }
        Ok(Self {
            n_orbitals,
            n_electrons,
            configs,
            coeffs,
        })
    }

    /// Single-determinant state.
    pub fn from_configuration(n_orbitals: usize, config: &Configuration) -> Result<Self> {
        let configs = enumerate_configurations(n_orbitals, config.len())?;
        let mut coeffs = CVec::zeros(configs.len());
        let pos = configs
            .iter()
            .position(|c| c == config)
            .ok_or_else(|| {
                CoreError::InvalidInput(format!(
                    "configuration {:?} does not fit in K={n_orbitals}",
                    config.orbitals()
                ))
            })?;
        coeffs[pos] = Complex64::new(1.0, 0.0);
        Self::new(n_orbitals, config.len(), coeffs)
    }

    /// Uniform-random normalized state, reproducible by seed.
    pub fn random_seeded(n_orbitals: usize, n_electrons: usize, seed: u64) -> Result<Self> {
        use rand::{Rng, SeedableRng};
        let dim = binomial(n_orbitals, n_electrons) as usize;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = CVec::zeros(dim);
        for c in coeffs.iter_mut() {
            *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        coeffs.mapv_inplace(|c| c / norm);
        Self::new(n_orbitals, n_electrons, coeffs)
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

    pub fn coefficients(&self) -> &CVec {
        &self.coeffs
    }
}

/// Builds the pair density matrix of a CI state in the site-pair basis.
///
/// Contributions are grouped by reduced (N-2)-electron configuration; within
/// a group the matrix gains the outer product g g† of signed coefficients,
/// which keeps the result Hermitian and positive semidefinite by construction.
pub fn gdm_from_ci(psi: &CiVector) -> Result<Gdm> {
    let gb = GeminalBasis::new(psi.n_orbitals())?;
    let g = gb.len();
    let mut groups: BTreeMap<u64, Vec<(usize, Complex64)>> = BTreeMap::new();
    for (config, &c) in psi.configs.iter().zip(psi.coeffs.iter()) {
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (i, j) in config.pairs() {
            let (reduced, sign) = reduced_configuration(config, i, j)?;
            let flat = gb.pair_index(i, j)? - 1;
            groups
                .entry(reduced.bitmask())
                .or_default()
                .push((flat, sign * c));
        }
    }
    let mut d = CMat::zeros((g, g));
    for members in groups.values() {
        for &(m, cm) in members {
            for &(n, cn) in members {
                d[(m, n)] += cm * cn.conj();
            }
        }
    }
    Gdm::from_matrix(d, psi.n_electrons(), tag_site_pairs())
}

/// Pair density of a single configuration: ones on the diagonal at the
/// configuration's own pairs.
pub fn slater_gdm(config: &Configuration, n_orbitals: usize, basis_tag: String) -> Result<Gdm> {
    if config.len() < 2 {
        return Err(CoreError::InvalidInput(format!(
            "need at least 2 electrons, got {}",
            config.len()
        )));
    }
    let gb = GeminalBasis::new(n_orbitals)?;
    let mut d = CMat::zeros((gb.len(), gb.len()));
    for (i, j) in config.pairs() {
        let flat = gb.pair_index(i, j)? - 1;
        d[(flat, flat)] = Complex64::new(1.0, 0.0);
    }
    Gdm::from_matrix(d, config.len(), basis_tag)
}

#[derive(Clone, Debug)]
pub struct RuleVerdict {
    pub residual: f64,
    pub passed: bool,
}

/// Checks whether a fully occupied diagonal could come from one configuration.
#[derive(Clone, Debug)]
pub struct GenerabilityReport {
    /// 1-based flat indices with diagonal within RULE_TOL of 1.
    pub flat_ones: Vec<usize>,
    pub orbital_union: Vec<usize>,
    pub generable: bool,
    pub configuration: Option<Configuration>,
}

#[derive(Clone, Debug)]
pub struct NrepReport {
    pub hermiticity: RuleVerdict,
    pub diagonal_range: RuleVerdict,
    pub trace: RuleVerdict,
    pub trace_value: f64,
    pub trace_squared: RuleVerdict,
    pub trace_squared_value: f64,
    pub exclusion: RuleVerdict,
    pub generability: Option<GenerabilityReport>,
    /// Conjunction of the necessary rules (and generability when evaluated).
    /// A pass never certifies full representability.
    pub passes_necessary_rules: bool,
}

pub fn check_nrep(d: &Gdm, with_generability: bool) -> NrepReport {
    check_nrep_matrix(&d.matrix, d.n_electrons, with_generability)
}

pub fn check_nrep_matrix(d: &CMat, n_electrons: usize, with_generability: bool) -> NrepReport {
    let tol = RULE_TOL;
    let g = d.nrows();
    let pair_count = n_electrons as f64 * (n_electrons as f64 - 1.0) / 2.0;

    let herm_res = linalg::hermitian_deviation(d);
    let hermiticity = RuleVerdict {
        residual: herm_res,
        passed: herm_res <= tol,
    };

    let mut diag_res = 0.0_f64;
    for n in 0..g {
        let z = d[(n, n)];
        diag_res = diag_res
            .max(z.im.abs())
            .max(-z.re)
            .max(z.re - 1.0);
    }
    let diag_res = diag_res.max(0.0);
    let diagonal_range = RuleVerdict {
        residual: diag_res,
        passed: diag_res <= tol,
    };

    let trace_value = linalg::trace(d).re;
    let trace_res = (trace_value - pair_count).abs();
    let trace = RuleVerdict {
        residual: trace_res,
        passed: trace_res <= tol,
    };

    let trace_squared_value: f64 = d.iter().map(|z| z.norm_sqr()).sum();
    let tr2_res = (-trace_squared_value).max(trace_squared_value - pair_count);
    let tr2_res = tr2_res.max(0.0);
    let trace_squared = RuleVerdict {
        residual: tr2_res,
        passed: tr2_res <= tol,
    };

    // Saturated diagonal entries force their whole row and column to zero.
    let flat_ones: Vec<usize> = (0..g)
        .filter(|&n| (d[(n, n)].re - 1.0).abs() <= tol && d[(n, n)].im.abs() <= tol)
        .map(|n| n + 1)
        .collect();
    let mut excl_res = 0.0_f64;
    for &one in &flat_ones {
        let n = one - 1;
        for m in 0..g {
            if m != n {
                excl_res = excl_res.max(d[(n, m)].norm()).max(d[(m, n)].norm());
            }
        }
    }
    let exclusion = RuleVerdict {
        residual: excl_res,
        passed: excl_res <= tol,
    };

    let generability = if with_generability && flat_ones.len() == pair_count as usize {
        Some(generability_of_flats(&flat_ones, n_electrons, g))
    } else {
        None
    };

    let passes_necessary_rules = hermiticity.passed
        && diagonal_range.passed
        && trace.passed
        && trace_squared.passed
        && exclusion.passed
        && generability.as_ref().is_none_or(|rep| rep.generable);

    NrepReport {
        hermiticity,
        diagonal_range,
        trace,
        trace_value,
        trace_squared,
        trace_squared_value,
        exclusion,
        generability,
        passes_necessary_rules,
    }
}

/// Whether a set of saturated pair indices is exactly the pair set of one
/// N-orbital configuration.
pub fn generability_of_flats(
    flat_ones: &[usize],
    n_electrons: usize,
    n_pairs_total: usize,
) -> GenerabilityReport {
    let k = ((1.0 + (1.0 + 8.0 * n_pairs_total as f64).sqrt()) / 2.0).round() as usize;
    let gb = GeminalBasis::new(k.max(2)).expect("valid pair basis");
    let mut union: Vec<usize> = Vec::new();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for &flat in flat_ones {
        if let Ok((i, j)) = gb.pair_from_index(flat) {
            union.push(i);
            union.push(j);
            pairs.push((i, j));
        }
    }
    union.sort_unstable();
    union.dedup();

    let expected = n_electrons * (n_electrons - 1) / 2;
    let mut generable = flat_ones.len() == expected && union.len() == n_electrons;
    let mut configuration = None;
    if generable {
        let config = Configuration::new(union.clone()).expect("sorted unique");
        let mut config_pairs = config.pairs();
        config_pairs.sort_unstable();
        pairs.sort_unstable();
        generable = config_pairs == pairs;
        if generable {
            configuration = Some(config);
        }
    }
    GenerabilityReport {
        flat_ones: flat_ones.to_vec(),
        orbital_union: union,
        generable,
        configuration,
    }
}

/// Tr[D A] with a basis-tag guard. Real up to roundoff when A is Hermitian.
pub fn expectation(d: &Gdm, a: &CMat, a_basis_tag: &str) -> Result<Complex64> {
    if a_basis_tag != d.basis_tag {
        return Err(CoreError::BasisMismatch {
            expected: d.basis_tag.clone(),
            found: a_basis_tag.to_string(),
        });
    }
    if a.nrows() != d.n_pairs() || a.ncols() != d.n_pairs() {
        return Err(CoreError::InvalidInput(format!(
            "operator is {}x{}, pair basis has dimension {}",
            a.nrows(),
            a.ncols(),
            d.n_pairs()
        )));
    }
    let g = d.n_pairs();
    let mut tr = Complex64::new(0.0, 0.0);
    for m in 0..g {
        for n in 0..g {
            tr += d.matrix[(m, n)] * a[(n, m)];
        }
    }
    Ok(tr)
}

/// D' = U D U† with a unitarity guard; the result carries `new_tag`.
pub fn change_basis(d: &Gdm, u: &CMat, new_tag: String) -> Result<Gdm> {
    if u.nrows() != d.n_pairs() || u.ncols() != d.n_pairs() {
        return Err(CoreError::InvalidInput(format!(
            "basis change is {}x{}, pair basis has dimension {}",
            u.nrows(),
            u.ncols(),
            d.n_pairs()
        )));
    }
    let dev = linalg::unitary_deviation(u);
    if dev > RULE_TOL {
        return Err(CoreError::NotUnitary {
            deviation: dev,
            tol: RULE_TOL,
        });
    }
    let rotated = linalg::conjugate(u, &d.matrix);
    // symmetrize away the conjugation roundoff before the constructor's guard
    let herm = linalg::adjoint(&rotated);
    let matrix = (&rotated + &herm).mapv(|z| 0.5 * z);
    Gdm::from_matrix(matrix, d.n_electrons, new_tag)
}
