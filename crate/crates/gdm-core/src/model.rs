//! One-dimensional soft-Coulomb / Hubbard chains and their pair-basis Hamiltonians.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{GeminalBasis, SpinOrbitalBasis};
use crate::error::{CoreError, Result};
use crate::linalg::CMat;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Nucleus {
    pub charge: f64,
    pub position: f64,
    #[serde(default)]
    pub mobile: bool,
    #[serde(default = "default_mass")]
    pub mass: f64,
}

fn default_mass() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Interaction {
    SoftCoulomb { strength: f64 },
    Hubbard { strength: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_sites: usize,
    pub spacing: f64,
    pub softening: f64,
    #[serde(default)]
    pub nuclei: Vec<Nucleus>,
    pub interaction: Interaction,
    #[serde(default)]
    pub perturbation_seed: u64,
}

/// A chain model with its frozen random diagonal perturbation.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    basis: SpinOrbitalBasis,
    v_p: Array1<f64>,
}

pub fn build_model(config: ModelConfig) -> Result<Model> {
    if config.n_sites < 2 {
        return Err(CoreError::InvalidInput(format!(
            "n_sites must be >= 2, got {}",
            config.n_sites
        )));
    }
    if !(config.spacing > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "spacing must be positive, got {}",
            config.spacing
        )));
    }
    if !(config.softening > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "softening must be positive, got {}",
            config.softening
        )));
    }
    for (idx, nuc) in config.nuclei.iter().enumerate() {
        if !(nuc.mass > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "nucleus {idx} has non-positive mass {}",
                nuc.mass
            )));
        }
    }
    let basis = SpinOrbitalBasis::new(config.n_sites)?;
    // One independent value per spin-orbital; a per-site perturbation would
    // leave every level exactly spin-degenerate.
    let mut rng = ChaCha8Rng::seed_from_u64(config.perturbation_seed);
    let v_p = Array1::from_iter((0..basis.n_orbitals()).map(|_| rng.gen_range(-1.0..1.0)));
    Ok(Model { config, basis, v_p })
}

impl Model {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn basis(&self) -> &SpinOrbitalBasis {
        &self.basis
    }

    pub fn n_sites(&self) -> usize {
        self.config.n_sites
    }

    pub fn n_orbitals(&self) -> usize {
        self.basis.n_orbitals()
    }

    pub fn spacing(&self) -> f64 {
        self.config.spacing
    }

    pub fn softening(&self) -> f64 {
        self.config.softening
    }

    pub fn nuclei(&self) -> &[Nucleus] {
        &self.config.nuclei
    }

    pub fn perturbation(&self) -> &Array1<f64> {
        &self.v_p
    }

    /// Site coordinate x_i = (i-1) * spacing, 1-based site index.
    pub fn site_position(&self, site: usize) -> f64 {
        (site - 1) as f64 * self.config.spacing
    }

    pub fn nuclear_positions(&self) -> Vec<f64> {
        self.config.nuclei.iter().map(|n| n.position).collect()
    }

    /// One-body matrix h + eps * diag(v_p) with nuclei at their configured
    /// positions.
    pub fn one_body(&self, epsilon: f64) -> Array2<f64> {
        self.one_body_at(epsilon, &self.nuclear_positions())
    }

    /// One-body matrix with nuclei displaced to `nuclear_positions`.
    ///
    /// Kinetic part is the three-point stencil (+1/d^2 diagonal, -1/(2 d^2)
    /// between same-spin neighbor sites); nuclear attraction is softened
    /// Coulomb on the diagonal.
    pub fn one_body_at(&self, epsilon: f64, nuclear_positions: &[f64]) -> Array2<f64> {
        let k = self.n_orbitals();
        let d2 = self.config.spacing * self.config.spacing;
        let mut h = Array2::zeros((k, k));
        for a in 1..=k {
            let site = self.basis.site(a);
            let x = self.site_position(site);
            let mut diag = 1.0 / d2 + epsilon * self.v_p[a - 1];
            for (nuc, &r) in self.config.nuclei.iter().zip(nuclear_positions) {
                diag -= nuc.charge / ((x - r).abs() + self.config.softening);
            }
            h[(a - 1, a - 1)] = diag;
            for b in 1..a {
                let same_spin = self.basis.spin(a) == self.basis.spin(b);
                let adjacent = self.basis.site(a).abs_diff(self.basis.site(b)) == 1;
                if same_spin && adjacent {
                    h[(a - 1, b - 1)] = -0.5 / d2;
                    h[(b - 1, a - 1)] = -0.5 / d2;
                }
            }
        }
        h
    }

    /// Electron-electron interaction between two sites (1-based).
    pub fn site_interaction(&self, site_a: usize, site_b: usize) -> f64 {
        match self.config.interaction {
            Interaction::SoftCoulomb { strength } => {
                let dist = (self.site_position(site_a) - self.site_position(site_b)).abs();
                strength / (dist + self.config.softening)
            }
            Interaction::Hubbard { strength } => {
                if site_a == site_b {
                    strength
                } else {
                    0.0
                }
            }
        }
    }

    /// Interaction energy of pair (i, j) of spin-orbitals.
    pub fn pair_interaction(&self, i: usize, j: usize) -> f64 {
        self.site_interaction(self.basis.site(i), self.basis.site(j))
    }

    /// Ascending eigenvalues and eigenvector columns of h + eps * diag(v_p).
    pub fn one_body_eigen(&self, epsilon: f64) -> Result<(Array1<f64>, Array2<f64>)> {
        crate::linalg::eigh_real(&self.one_body(epsilon))
    }
}

/// Lifts a one-body matrix onto the pair basis, scaled by 1/(N-1).
///
/// Pairs sharing both orbitals get the diagonal sum, pairs sharing exactly
/// one orbital get the transition element with the fermionic position sign,
/// pairs differing in both orbitals are uncoupled.
pub fn pair_lift_one_body(ht: &Array2<f64>, n_electrons: usize) -> Result<Array2<f64>> {
    if n_electrons < 2 {
        return Err(CoreError::InvalidInput(format!(
            "pair basis needs at least 2 electrons, got {n_electrons}"
        )));
    }
    let k = ht.nrows();
    let gb = GeminalBasis::new(k)?;
    let g = gb.len();
    let pairs: Vec<(usize, usize)> = gb.pairs().collect();
    let scale = 1.0 / (n_electrons as f64 - 1.0);
    let mut out = Array2::zeros((g, g));
    for (ai, &(a1, a2)) in pairs.iter().enumerate() {
        for (bi, &(b1, b2)) in pairs.iter().enumerate().take(ai + 1) {
            let value = if ai == bi {
                scale * (ht[(a1 - 1, a1 - 1)] + ht[(a2 - 1, a2 - 1)])
            } else if a1 == b1 || a1 == b2 || a2 == b1 || a2 == b2 {
                // positions of the differing orbitals within each ordered pair
                let (p, pos_a) = if a1 == b1 || a1 == b2 { (a2, 2) } else { (a1, 1) };
                let (q, pos_b) = if b1 == a1 || b1 == a2 { (b2, 2) } else { (b1, 1) };
                let sign = if (pos_a + pos_b) % 2 == 0 { 1.0 } else { -1.0 };
                sign * scale * ht[(p - 1, q - 1)]
            } else {
                0.0
            };
            out[(ai, bi)] = value;
            out[(bi, ai)] = value;
        }
    }
    Ok(out)
}

/// Diagonal of the pair interaction, one entry per flat pair index.
pub fn pair_interaction_diagonal(model: &Model) -> Result<Vec<f64>> {
    let gb = GeminalBasis::new(model.n_orbitals())?;
    Ok(gb.pairs().map(|(i, j)| model.pair_interaction(i, j)).collect())
}

/// H(eps, lambda) in the pair basis with nuclei at their configured positions.
pub fn geminal_hamiltonian(
    model: &Model,
    n_electrons: usize,
    epsilon: f64,
    lambda: f64,
) -> Result<CMat> {
    geminal_hamiltonian_at(
        model,
        n_electrons,
        epsilon,
        lambda,
        &model.nuclear_positions(),
    )
}

/// H(eps, lambda) with nuclei displaced to `nuclear_positions`.
pub fn geminal_hamiltonian_at(
    model: &Model,
    n_electrons: usize,
    epsilon: f64,
    lambda: f64,
    nuclear_positions: &[f64],
) -> Result<CMat> {
    let ht = model.one_body_at(epsilon, nuclear_positions);
    let mut h = pair_lift_one_body(&ht, n_electrons)?;
    let w = pair_interaction_diagonal(model)?;
    for (n, wn) in w.iter().enumerate() {
        h[(n, n)] += lambda * wn;
    }
    Ok(h.mapv(|x| Complex64::new(x, 0.0)))
}

/// Base matrix H(eps, 0) plus the diagonal lambda-coefficients, so a lambda
/// scan costs one lift instead of one per grid point.
pub fn geminal_hamiltonian_parts(
    model: &Model,
    n_electrons: usize,
    epsilon: f64,
) -> Result<(CMat, Vec<f64>)> {
    let base = geminal_hamiltonian(model, n_electrons, epsilon, 0.0)?;
    let w = pair_interaction_diagonal(model)?;
    Ok((base, w))
}

/// Length scale, interaction strength, and energy prefactor that map an
/// N-electron atom of charge Z onto the unit-strength pair Hamiltonian.
pub fn helium_scaling(z: f64, n_electrons: usize) -> Result<(f64, f64, f64)> {
    if n_electrons < 2 {
        return Err(CoreError::InvalidInput(format!(
            "scaling needs at least 2 electrons, got {n_electrons}"
        )));
    }
    if !(z > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "nuclear charge must be positive, got {z}"
        )));
    }
    let a = z / 2.0;
    let lambda = 2.0 * (n_electrons as f64 - 1.0) / z;
    let prefactor = a * a / (n_electrons as f64 - 1.0);
    Ok((a, lambda, prefactor))
}

/// Residual of the scaling identity on one abstract operator triple:
/// (T - Z U)/(N-1) + W must equal pre * (T/a^2 - 2U/a + (lambda/a) W).
pub fn scaling_identity_residual(
    z: f64,
    n_electrons: usize,
    t: &Array2<f64>,
    u: &Array2<f64>,
    w: &Array2<f64>,
) -> Result<f64> {
    let (a, lambda, pre) = helium_scaling(z, n_electrons)?;
    let nm1 = n_electrons as f64 - 1.0;
    let lhs = (t - &(z * u)) / nm1 + w;
    let rhs = (t / (a * a) - &(2.0 / a * u) + (lambda / a) * w) * pre;
    let diff = &lhs - &rhs;
    Ok(diff.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Max residual over seeded random (Z, N, matrix-triple) draws.
pub fn verify_scaling_identity(seed: u64, trials: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let z = rng.gen_range(0.5..12.0);
        let n = rng.gen_range(2..=8usize);
        let dim = rng.gen_range(2..=8usize);
        let draw = |rng: &mut ChaCha8Rng| {
            let mut m = Array2::zeros((dim, dim));
            for i in 0..dim {
                for j in 0..=i {
                    let x: f64 = rng.gen_range(-1.0..1.0);
                    m[(i, j)] = x;
                    m[(j, i)] = x;
                }
            }
            m
        };
        let t = draw(&mut rng);
        let u = draw(&mut rng);
        let w = draw(&mut rng);
        worst = worst.max(scaling_identity_residual(z, n, &t, &u, &w)?);
    }
    Ok(worst)
}
