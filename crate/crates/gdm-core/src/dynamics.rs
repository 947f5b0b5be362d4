//! Time evolution of pair density matrices: midpoint unitary propagation,
//! sudden-switch density statistics, nonadiabatic couplings, degenerate-block
//! transport, and Ehrenfest-coupled nuclei.

use ndarray::Array1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::gdm::{
    change_basis, check_nrep, expectation, tag_eigenbasis, tag_orbital_pairs, tag_site_pairs, Gdm,
};
use crate::linalg::{self, adjoint, eigh, matmul, CMat};
use crate::model::{geminal_hamiltonian_at, pair_lift_one_body, Model};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Fixed (epsilon, lambda) for the whole run.
    Constant { lambda: f64 },
    /// lambda jumps from 0 to 1 at t_switch.
    Sudden { t_switch: f64 },
    /// lambda holds 0 until t1, ramps linearly to 1 on [t1, t2], holds 1
    /// until t3. The linear ramp keeps a nonzero ramp rate at the switch
    /// points, which is what makes the leakage decay as 1/T.
    Ramp { t1: f64, t2: f64, t3: f64 },
    /// Linear lambda ramp over [0, t_ramp], then hold at 1.
    LambdaRamp { t_ramp: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub epsilon: f64,
    pub dt: f64,
    pub t_final: f64,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_final >= 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "t_final must be nonnegative, got {}",
                self.t_final
            )));
        }
        match self.kind {
            ScheduleKind::Ramp { t1, t2, t3 } => {
                if !(0.0 <= t1 && t1 <= t2 && t2 <= t3) {
                    return Err(CoreError::InvalidInput(format!(
                        "ramp times must satisfy 0 <= t1 <= t2 <= t3, got ({t1},{t2},{t3})"
                    )));
                }
            }
            ScheduleKind::LambdaRamp { t_ramp } => {
                if !(t_ramp > 0.0) {
                    return Err(CoreError::InvalidInput(format!(
                        "ramp duration must be positive, got {t_ramp}"
                    )));
                }
            }
            ScheduleKind::Sudden { t_switch } => {
                if !(t_switch >= 0.0) {
                    return Err(CoreError::InvalidInput(format!(
                        "switch time must be nonnegative, got {t_switch}"
                    )));
                }
            }
            ScheduleKind::Constant { .. } => {}
        }
        Ok(())
    }

    pub fn lambda_at(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Constant { lambda } => lambda,
            ScheduleKind::Sudden { t_switch } => {
                if t < t_switch {
                    0.0
                } else {
                    1.0
                }
            }
            ScheduleKind::Ramp { t1, t2, .. } => {
                if t <= t1 {
                    0.0
                } else if t >= t2 {
                    1.0
                } else {
                    (t - t1) / (t2 - t1)
                }
            }
            ScheduleKind::LambdaRamp { t_ramp } => (t / t_ramp).clamp(0.0, 1.0),
        }
    }

    pub fn params_at(&self, t: f64) -> (f64, f64) {
        (self.epsilon, self.lambda_at(t))
    }
}

#[derive(Clone, Debug)]
pub struct GdmSample {
    pub t: f64,
    pub energy: f64,
    pub trace: f64,
    pub trace_squared: f64,
    pub hermiticity: f64,
    pub density: Vec<f64>,
}

#[derive(Debug)]
pub struct GdmTrajectory {
    pub samples: Vec<GdmSample>,
    pub final_gdm: Gdm,
}

/// One midpoint step: D <- U D U† with U = exp(-i (N-1) H dt), sharing the
/// eigendecomposition across steps while (eps, lambda, positions) repeat.
struct StepEngine<'m> {
    model: &'m Model,
    n_electrons: usize,
    key: Option<(f64, f64, Vec<f64>)>,
    eigen: Option<(Array1<f64>, CMat)>,
}

impl<'m> StepEngine<'m> {
    fn new(model: &'m Model, n_electrons: usize) -> Self {
        Self {
            model,
            n_electrons,
            key: None,
            eigen: None,
        }
    }

    fn refresh(&mut self, epsilon: f64, lambda: f64, positions: &[f64]) -> Result<()> {
        let key = (epsilon, lambda, positions.to_vec());
        if self.key.as_ref() == Some(&key) {
            return Ok(());
        }
        let h = geminal_hamiltonian_at(self.model, self.n_electrons, epsilon, lambda, positions)?;
        self.eigen = Some(eigh(&h)?);
        self.key = Some(key);
        Ok(())
    }

    fn step(&mut self, d: &mut CMat, epsilon: f64, lambda: f64, positions: &[f64], dt: f64) -> Result<()> {
        self.refresh(epsilon, lambda, positions)?;
        let (w, v) = self.eigen.as_ref().unwrap();
        let scale = self.n_electrons as f64 - 1.0;
        let u = linalg::unitary_from_eigen(w, v, scale * dt);
        *d = linalg::conjugate(&u, d);
        Ok(())
    }

    fn hamiltonian(&mut self, epsilon: f64, lambda: f64, positions: &[f64]) -> Result<CMat> {
        geminal_hamiltonian_at(self.model, self.n_electrons, epsilon, lambda, positions)
    }
}

fn guard_initial_gdm(d0: &Gdm, model: &Model) -> Result<()> {
    if d0.basis_tag() != tag_site_pairs() {
        return Err(CoreError::BasisMismatch {
            expected: tag_site_pairs(),
            found: d0.basis_tag().to_string(),
        });
    }
    let k = d0.n_orbitals()?;
    if k != model.n_orbitals() {
        return Err(CoreError::InvalidInput(format!(
            "density is over {k} orbitals, model has {}",
            model.n_orbitals()
        )));
    }
    let report = check_nrep(d0, false);
    if !report.passes_necessary_rules {
        return Err(CoreError::InvalidInput(
            "initial density fails the necessary occupation rules".into(),
        ));
    }
    Ok(())
}

/// Midpoint propagation under a schedule; samples every `sample_every` steps
/// (plus the initial and final points).
pub fn propagate_gdm(
    d0: &Gdm,
    model: &Model,
    schedule: &Schedule,
    sample_every: usize,
) -> Result<GdmTrajectory> {
    schedule.validate()?;
    let sched = schedule.clone();
    propagate_gdm_driven(
        d0,
        model,
        &move |t| sched.params_at(t),
        schedule.dt,
        schedule.t_final,
        sample_every,
    )
}

/// Midpoint propagation under arbitrary (epsilon(t), lambda(t)).
pub fn propagate_gdm_driven(
    d0: &Gdm,
    model: &Model,
    params: &dyn Fn(f64) -> (f64, f64),
    dt: f64,
    t_final: f64,
    sample_every: usize,
) -> Result<GdmTrajectory> {
    if !(dt > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "dt must be positive, got {dt}"
        )));
    }
    guard_initial_gdm(d0, model)?;
    let positions = model.nuclear_positions();
    let n = d0.n_electrons();
    let mut engine = StepEngine::new(model, n);
    let n_steps = (t_final / dt).round() as usize;
    let sample_every = sample_every.max(1);

    let mut d = d0.matrix().clone();
    let mut samples = Vec::new();
    let mut record = |t: f64, d: &CMat, engine: &mut StepEngine| -> Result<()> {
        let (eps, lam) = params(t);
        let h = engine.hamiltonian(eps, lam, &positions)?;
        let gdm = snapshot_gdm(d, n)?;
        let energy = expectation(&gdm, &h, &tag_site_pairs())?.re;
        samples.push(GdmSample {
            t,
            energy,
            trace: gdm.trace(),
            trace_squared: gdm.trace_squared(),
            hermiticity: linalg::hermitian_deviation(d),
            density: gdm.orbital_density()?,
        });
        Ok(())
    };

    record(0.0, &d, &mut engine)?;
    for step in 0..n_steps {
        let t_mid = (step as f64 + 0.5) * dt;
        let (eps, lam) = params(t_mid);
        engine.step(&mut d, eps, lam, &positions, dt)?;
        if (step + 1) % sample_every == 0 || step + 1 == n_steps {
            record((step + 1) as f64 * dt, &d, &mut engine)?;
        }
    }

    let final_gdm = snapshot_gdm(&d, n)?;
    Ok(GdmTrajectory {
        samples,
        final_gdm,
    })
}

/// Wraps a propagated matrix back into a checked value, absorbing the
/// accumulated roundoff skew.
fn snapshot_gdm(d: &CMat, n_electrons: usize) -> Result<Gdm> {
    let herm = adjoint(d);
    let sym = (d + &herm).mapv(|z| 0.5 * z);
    Gdm::from_matrix(sym, n_electrons, tag_site_pairs())
}

/// Antisymmetrized pair lift of a one-particle basis change: column (i,j) of
/// the result is the pair function built from orbital columns i and j.
pub fn pair_lift_unitary(x: &ndarray::Array2<f64>) -> Result<CMat> {
    let k = x.nrows();
    if x.ncols() != k {
        return Err(CoreError::InvalidInput(format!(
            "orbital matrix must be square, got {}x{}",
            k,
            x.ncols()
        )));
    }
    let gb = crate::basis::GeminalBasis::new(k)?;
    let g = gb.len();
    let pairs: Vec<(usize, usize)> = gb.pairs().collect();
    let mut p = CMat::zeros((g, g));
    for (row, &(a, b)) in pairs.iter().enumerate() {
        for (col, &(i, j)) in pairs.iter().enumerate() {
            let val = x[(a - 1, i - 1)] * x[(b - 1, j - 1)] - x[(a - 1, j - 1)] * x[(b - 1, i - 1)];
            p[(row, col)] = Complex64::new(val, 0.0);
        }
    }
    Ok(p)
}

#[derive(Debug)]
pub struct SuddenReport {
    pub times: Vec<f64>,
    /// density per orbital at each requested time
    pub density_series: Vec<Vec<f64>>,
    /// closed-form infinite-time average per orbital
    pub mean: Vec<f64>,
    /// closed-form variance of the density fluctuation per orbital
    pub variance: Vec<f64>,
    /// density in the interacting eigenbasis right after the switch
    pub interacting_gdm: Gdm,
    /// distinct nonzero oscillation frequencies
    pub n_frequencies: usize,
}

/// Density dynamics after suddenly switching the interaction on at t = 0.
///
/// The incoming density must be a single configuration over one-body
/// eigenorbitals at the same epsilon. Times are measured from the switch.
///
/// The variance sums |c_w|^2 over distinct nonzero frequency groups with
/// c_w(x) the grouped coefficient; conjugate (+w, -w) groups each contribute
/// |c_w|^2, which reproduces the time variance of 2|c_w| cos(wt + phase).
pub fn sudden_density(
    d_slater: &Gdm,
    model: &Model,
    epsilon: f64,
    t_grid: &[f64],
) -> Result<SuddenReport> {
    let n = d_slater.n_electrons();
    let expected_tag = tag_orbital_pairs(epsilon);
    if d_slater.basis_tag() != expected_tag {
        return Err(CoreError::BasisMismatch {
            expected: expected_tag,
            found: d_slater.basis_tag().to_string(),
        });
    }
    let k = d_slater.n_orbitals()?;
    if k != model.n_orbitals() {
        return Err(CoreError::InvalidInput(format!(
            "density is over {k} orbitals, model has {}",
            model.n_orbitals()
        )));
    }
    // a single configuration means a 0/1 diagonal with the right trace
    let g = d_slater.n_pairs();
    let m0 = d_slater.matrix();
    let mut offdiag: f64 = 0.0;
    let mut diag_ok = true;
    let mut ones = 0usize;
    for i in 0..g {
        for j in 0..g {
            if i != j {
                offdiag = offdiag.max(m0[(i, j)].norm());
            }
        }
        let v = m0[(i, i)].re;
        if (v - 1.0).abs() <= 1e-10 {
            ones += 1;
        } else if v.abs() > 1e-10 {
            diag_ok = false;
        }
    }
    if offdiag > 1e-10 || !diag_ok || ones != n * (n - 1) / 2 {
        return Err(CoreError::InvalidInput(
            "sudden switch needs a single-configuration density (0/1 diagonal)".into(),
        ));
    }

    let (_, x) = model.one_body_eigen(epsilon)?;
    let p = pair_lift_unitary(&x)?;
    let h1 = crate::model::geminal_hamiltonian(model, n, epsilon, 1.0)?;
    let (energies, w) = eigh(&h1)?;
    // orbital pairs -> site pairs -> interacting eigenbasis
    let u = matmul(&adjoint(&w), &p);
    let d_int = change_basis(d_slater, &u, tag_eigenbasis(epsilon, 1.0))?;

    // density contraction in the interacting basis, one matrix per orbital
    let scale = 1.0 / (n as f64 - 1.0);
    let gb = crate::basis::GeminalBasis::new(k)?;
    let pair_list: Vec<(usize, usize)> = gb.pairs().collect();
    let mut r_int: Vec<CMat> = Vec::with_capacity(k);
    for orb in 1..=k {
        let mut r_site = CMat::zeros((g, g));
        for (idx, &(a, b)) in pair_list.iter().enumerate() {
            if a == orb || b == orb {
                r_site[(idx, idx)] = Complex64::new(scale, 0.0);
            }
        }
        r_int.push(linalg::conjugate(&adjoint(&w), &r_site));
    }

    // group the double sum by oscillation frequency (N-1)(E_m - E_n)
    let nm1 = n as f64 - 1.0;
    let spread = (energies[g - 1] - energies[0]).abs().max(1e-300);
    let freq_tol = 1e-8 * nm1 * spread;
    let mut terms: Vec<(f64, usize, usize)> = Vec::with_capacity(g * g);
    for m in 0..g {
        for nn in 0..g {
            terms.push((nm1 * (energies[m] - energies[nn]), m, nn));
        }
    }
    terms.sort_by(|a, b| a.0.total_cmp(&b.0));
    struct Group {
        omega: f64,
        coeff: Vec<Complex64>,
    }
    let mut groups: Vec<Group> = Vec::new();
    let dm = d_int.matrix();
    for (omega, m, nn) in terms {
        let matches = groups
            .last()
            .is_some_and(|gr| (omega - gr.omega).abs() <= freq_tol);
        if !matches {
            groups.push(Group {
                omega,
                coeff: vec![Complex64::new(0.0, 0.0); k],
            });
        }
        let gr = groups.last_mut().unwrap();
        let dmn = dm[(m, nn)];
        if dmn.norm_sqr() > 0.0 {
            for (xi, r) in r_int.iter().enumerate() {
                gr.coeff[xi] += dmn * r[(nn, m)];
            }
        }
    }

    let mut mean = vec![0.0; k];
    let mut variance = vec![0.0; k];
    let mut n_frequencies = 0usize;
    for gr in &groups {
        let weight: f64 = gr.coeff.iter().map(|c| c.norm_sqr()).sum();
        if gr.omega.abs() <= freq_tol {
            for (xi, c) in gr.coeff.iter().enumerate() {
                mean[xi] += c.re;
            }
        } else if weight > 1e-30 {
            n_frequencies += 1;
            for (xi, c) in gr.coeff.iter().enumerate() {
                variance[xi] += c.norm_sqr();
            }
        }
    }

    // evaluate the series on the requested grid, skipping silent groups
    let live: Vec<&Group> = groups
        .iter()
        .filter(|gr| gr.coeff.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-30)
        .collect();
    let mut times = Vec::with_capacity(t_grid.len());
    let mut density_series = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut rho = vec![0.0; k];
        for gr in &live {
            let phase = Complex64::from_polar(1.0, -gr.omega * t);
            for (xi, c) in gr.coeff.iter().enumerate() {
                rho[xi] += (c * phase).re;
            }
        }
        times.push(t);
        density_series.push(rho);
    }

    Ok(SuddenReport {
        times,
        density_series,
        mean,
        variance,
        interacting_gdm: d_int,
        n_frequencies,
    })
}

#[derive(Debug)]
pub struct CouplingReport {
    /// skew-Hermitian coupling per unit ramp rate
    pub matrix: CMat,
    /// Frobenius norm of the discarded symmetric part
    pub symmetric_residual: f64,
    pub matrix_norm: f64,
}

/// Central-difference eigenvector coupling d/d lambda, phase-gauged so each
/// displaced eigenvector overlaps its center partner with a real positive
/// inner product.
pub fn nonadiabatic_coupling(
    model: &Model,
    n_electrons: usize,
    epsilon: f64,
    lambda: f64,
    dlambda: f64,
) -> Result<CouplingReport> {
    if !(dlambda > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "dlambda must be positive, got {dlambda}"
        )));
    }
    let h_at = |lam: f64| crate::model::geminal_hamiltonian(model, n_electrons, epsilon, lam);
    let (wc, vc) = eigh(&h_at(lambda)?)?;
    let g = wc.len();
    let range = (wc[g - 1] - wc[0]).abs().max(1e-300);
    for i in 1..g {
        let gap = wc[i] - wc[i - 1];
        if gap < 1e-8 * range {
            return Err(CoreError::Degenerate {
                gap,
                threshold: 1e-8 * range,
            });
        }
    }
    let (_, vp) = eigh(&h_at(lambda + dlambda)?)?;
    let (_, vm) = eigh(&h_at(lambda - dlambda)?)?;

    let align = |v: &CMat| -> Result<CMat> {
        let mut out = v.clone();
        for j in 0..g {
            let mut o = Complex64::new(0.0, 0.0);
            for i in 0..g {
                o += vc[(i, j)].conj() * v[(i, j)];
            }
            let mag = o.norm();
            if mag < std::f64::consts::FRAC_1_SQRT_2 {
                return Err(CoreError::GridResolution {
                    lambda,
                    overlap: mag,
                    depth: 0,
                });
            }
            let phase = o.conj() / mag;
            for i in 0..g {
                out[(i, j)] *= phase;
            }
        }
        Ok(out)
    };
    let vp = align(&vp)?;
    let vm = align(&vm)?;

    let diff = (&vp - &vm).mapv(|z| z / (2.0 * dlambda));
    let raw = matmul(&adjoint(&vc), &diff);
    let rawh = adjoint(&raw);
    let anti = (&raw - &rawh).mapv(|z| 0.5 * z);
    let sym = (&raw + &rawh).mapv(|z| 0.5 * z);
    Ok(CouplingReport {
        symmetric_residual: linalg::frobenius(&sym),
        matrix_norm: linalg::frobenius(&anti),
        matrix: anti,
    })
}

/// Evolves a block-diagonal density through per-block generators:
/// D_b <- exp(-M_b dt) D_b exp(+M_b dt) with M skew-Hermitian.
pub fn adiabatic_blocks_evolve(
    d0: &Gdm,
    block_sizes: &[usize],
    coupling_at: &dyn Fn(f64) -> Result<CMat>,
    t_grid: &[f64],
) -> Result<Gdm> {
    let g = d0.n_pairs();
    let total: usize = block_sizes.iter().sum();
    if total != g || block_sizes.iter().any(|&s| s == 0) {
        return Err(CoreError::InvalidInput(format!(
            "block sizes {block_sizes:?} do not partition dimension {g}"
        )));
    }
    if t_grid.len() < 2 {
        return Err(CoreError::InvalidInput(
            "time grid needs at least two points".into(),
        ));
    }
    let starts: Vec<usize> = block_sizes
        .iter()
        .scan(0usize, |acc, &s| {
            let v = *acc;
            *acc += s;
            Some(v)
        })
        .collect();

    // declared structure must actually hold
    let m0 = d0.matrix();
    let mut off_weight = 0.0_f64;
    for (&start, &size) in starts.iter().zip(block_sizes) {
        for i in start..start + size {
            for j in 0..g {
                if !(start..start + size).contains(&j) {
                    off_weight += m0[(i, j)].norm_sqr();
                }
            }
        }
    }
    let off_weight = off_weight.sqrt();
    if off_weight > 1e-10 {
        return Err(CoreError::BlockStructure {
            weight: off_weight,
            tol: 1e-10,
        });
    }

    let mut d = m0.clone();
    for win in t_grid.windows(2) {
        let dt = win[1] - win[0];
        if !(dt > 0.0) {
            return Err(CoreError::InvalidInput(
                "time grid must be strictly increasing".into(),
            ));
        }
        let t_mid = 0.5 * (win[0] + win[1]);
        let m = coupling_at(t_mid)?;
        if m.nrows() != g || m.ncols() != g {
            return Err(CoreError::InvalidInput(format!(
                "coupling matrix is {}x{}, expected {g}x{g}",
                m.nrows(),
                m.ncols()
            )));
        }
        let skew_dev = {
            let mh = adjoint(&m);
            linalg::max_abs(&(&m + &mh))
        };
        if skew_dev > 1e-12 {
            return Err(CoreError::InvalidInput(format!(
                "coupling matrix deviates from skew-Hermiticity by {skew_dev:.3e}"
            )));
        }
        for (&start, &size) in starts.iter().zip(block_sizes) {
            if size == 1 {
                continue;
            }
            let mut mb = CMat::zeros((size, size));
            for i in 0..size {
                for j in 0..size {
                    mb[(i, j)] = m[(start + i, start + j)];
                }
            }
            // skew M = -iA with A Hermitian, so exp(-M dt) = exp(+iA dt)
            let a = mb.mapv(|z| Complex64::new(0.0, 1.0) * z);
            let u = linalg::expm_unitary(&a, -dt)?;
            let mut db = CMat::zeros((size, size));
            for i in 0..size {
                for j in 0..size {
                    db[(i, j)] = d[(start + i, start + j)];
                }
            }
            let evolved = linalg::conjugate(&u, &db);
            for i in 0..size {
                for j in 0..size {
                    d[(start + i, start + j)] = evolved[(i, j)];
                }
            }
        }
    }
    let herm = adjoint(&d);
    let sym = (&d + &herm).mapv(|z| 0.5 * z);
    Gdm::from_matrix(sym, d0.n_electrons(), d0.basis_tag().to_string())
}

/// Frobenius norm of the off-diagonal part of D expressed in the eigenbasis
/// whose vectors are the columns of `basis`.
pub fn offdiagonal_weight(d: &Gdm, basis: &CMat) -> Result<f64> {
    if basis.nrows() != d.n_pairs() || basis.ncols() != d.n_pairs() {
        return Err(CoreError::InvalidInput(format!(
            "basis is {}x{}, density has dimension {}",
            basis.nrows(),
            basis.ncols(),
            d.n_pairs()
        )));
    }
    let rotated = linalg::conjugate(&adjoint(basis), d.matrix());
    let mut acc = 0.0_f64;
    for i in 0..rotated.nrows() {
        for j in 0..rotated.ncols() {
            if i != j {
                acc += rotated[(i, j)].norm_sqr();
            }
        }
    }
    Ok(acc.sqrt())
}

/// RMS of the instantaneous-eigenbasis off-diagonal weight along a linear
/// interaction ramp of duration `t_ramp`.
///
/// The linear switch keeps a finite ramp rate at both ends, so the weight
/// scales as 1/T; averaging along the ramp washes out the phase interference
/// between the two end contributions that makes the final-time weight
/// oscillate in T.
pub fn ramp_leakage(
    d0: &Gdm,
    model: &Model,
    epsilon: f64,
    t_ramp: f64,
    dt: f64,
    n_probes: usize,
) -> Result<f64> {
    if !(dt > 0.0) || !(t_ramp > 0.0) || n_probes == 0 {
        return Err(CoreError::InvalidInput(format!(
            "need positive dt, ramp time and probe count, got ({dt}, {t_ramp}, {n_probes})"
        )));
    }
    guard_initial_gdm(d0, model)?;
    let n = d0.n_electrons();
    let positions = model.nuclear_positions();
    let mut engine = StepEngine::new(model, n);
    let n_steps = ((t_ramp / dt).round() as usize).max(1);
    let stride = (n_steps / n_probes).max(1);
    let mut d = d0.matrix().clone();
    let mut acc = 0.0_f64;
    let mut count = 0usize;
    for step in 0..n_steps {
        let t_mid = (step as f64 + 0.5) * dt;
        let lam = (t_mid / t_ramp).clamp(0.0, 1.0);
        engine.step(&mut d, epsilon, lam, &positions, dt)?;
        if (step + 1) % stride == 0 || step + 1 == n_steps {
            let t = (step + 1) as f64 * dt;
            let lam_probe = (t / t_ramp).clamp(0.0, 1.0);
            let h = geminal_hamiltonian_at(model, n, epsilon, lam_probe, &positions)?;
            let (_, v) = eigh(&h)?;
            let gdm = snapshot_gdm(&d, n)?;
            let w = offdiagonal_weight(&gdm, &v)?;
            acc += w * w;
            count += 1;
        }
    }
    Ok((acc / count as f64).sqrt())
}

#[derive(Clone, Debug)]
pub struct NucleiState {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl NucleiState {
    pub fn from_model(model: &Model) -> Self {
        Self {
            positions: model.nuclear_positions(),
            velocities: vec![0.0; model.nuclei().len()],
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoupledSample {
    pub t: f64,
    pub energy_electronic: f64,
    pub kinetic_nuclear: f64,
    pub potential_nn: f64,
    pub total_energy: f64,
    pub trace: f64,
    pub trace_squared: f64,
    pub density: Vec<f64>,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

#[derive(Debug)]
pub struct CoupledTrajectory {
    pub samples: Vec<CoupledSample>,
    pub final_gdm: Gdm,
    pub final_nuclei: NucleiState,
    /// worst disagreement between the two force routes over the run
    pub max_force_mismatch: f64,
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Softened nucleus-nucleus repulsion energy.
pub fn nuclear_repulsion(model: &Model, positions: &[f64]) -> f64 {
    let nuclei = model.nuclei();
    let s = model.softening();
    let mut v = 0.0;
    for k in 0..nuclei.len() {
        for l in k + 1..nuclei.len() {
            v += nuclei[k].charge * nuclei[l].charge
                / ((positions[k] - positions[l]).abs() + s);
        }
    }
    v
}

fn nuclear_repulsion_force(model: &Model, positions: &[f64], k: usize) -> f64 {
    let nuclei = model.nuclei();
    let s = model.softening();
    let mut f = 0.0;
    for l in 0..nuclei.len() {
        if l == k {
            continue;
        }
        let diff = positions[k] - positions[l];
        f += nuclei[k].charge * nuclei[l].charge * sgn(diff) / ((diff.abs() + s) * (diff.abs() + s));
    }
    f
}

/// Force from the gradient of the pair Hamiltonian: -Tr[D dH/dR_k] plus the
/// nuclear repulsion gradient. Only the one-body attraction depends on R, so
/// dH/dR_k is the pair lift of a diagonal one-body matrix.
pub fn force_gradient(model: &Model, d: &Gdm, positions: &[f64]) -> Result<Vec<f64>> {
    let n = d.n_electrons();
    let k_orbitals = model.n_orbitals();
    let s = model.softening();
    let mut out = Vec::with_capacity(model.nuclei().len());
    for (ki, nuc) in model.nuclei().iter().enumerate() {
        let r = positions[ki];
        let mut dh = ndarray::Array2::<f64>::zeros((k_orbitals, k_orbitals));
        for orb in 1..=k_orbitals {
            let x = model.site_position(model.basis().site(orb));
            let dist = (x - r).abs() + s;
            dh[(orb - 1, orb - 1)] = nuc.charge * sgn(r - x) / (dist * dist);
        }
        let lifted = pair_lift_one_body(&dh, n)?.mapv(|v| Complex64::new(v, 0.0));
        let grad = expectation(d, &lifted, d.basis_tag())?.re;
        out.push(-grad + nuclear_repulsion_force(model, positions, ki));
    }
    Ok(out)
}

/// Force from the occupation density: the attraction is diagonal in the
/// sites, so the trace collapses to a density-weighted sum.
pub fn force_density(model: &Model, d: &Gdm, positions: &[f64]) -> Result<Vec<f64>> {
    let rho = d.orbital_density()?;
    let s = model.softening();
    let mut out = Vec::with_capacity(model.nuclei().len());
    for (ki, nuc) in model.nuclei().iter().enumerate() {
        let r = positions[ki];
        let mut f = 0.0;
        for (orb, &density) in rho.iter().enumerate() {
            let x = model.site_position(model.basis().site(orb + 1));
            let dist = (x - r).abs() + s;
            f -= density * nuc.charge * sgn(r - x) / (dist * dist);
        }
        out.push(f + nuclear_repulsion_force(model, positions, ki));
    }
    Ok(out)
}

/// Ehrenfest dynamics: velocity-Verlet nuclei around midpoint density steps.
///
/// Both force routes are evaluated every step and their worst disagreement is
/// reported; the gradient route drives the motion.
pub fn propagate_coupled(
    d0: &Gdm,
    nuclei0: &NucleiState,
    model: &Model,
    epsilon: f64,
    lambda: f64,
    dt: f64,
    n_steps: usize,
    sample_every: usize,
) -> Result<CoupledTrajectory> {
    if !(dt > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "dt must be positive, got {dt}"
        )));
    }
    guard_initial_gdm(d0, model)?;
    let nuclei = model.nuclei();
    if nuclei.is_empty() || !nuclei.iter().any(|n| n.mobile) {
        return Err(CoreError::InvalidInput(
            "coupled propagation needs at least one mobile nucleus".into(),
        ));
    }
    if !matches!(
        model.config().interaction,
        crate::model::Interaction::SoftCoulomb { .. }
    ) {
        return Err(CoreError::InvalidInput(
            "coupled propagation needs the soft-Coulomb interaction".into(),
        ));
    }
    if nuclei0.positions.len() != nuclei.len() || nuclei0.velocities.len() != nuclei.len() {
        return Err(CoreError::InvalidInput(format!(
            "nuclear state covers {} nuclei, model has {}",
            nuclei0.positions.len(),
            nuclei.len()
        )));
    }

    let n = d0.n_electrons();
    let mut engine = StepEngine::new(model, n);
    let sample_every = sample_every.max(1);
    let mut d = d0.matrix().clone();
    let mut pos = nuclei0.positions.clone();
    let mut vel = nuclei0.velocities.clone();
    let mut max_force_mismatch = 0.0_f64;

    let eval_forces = |d: &CMat, pos: &[f64], worst: &mut f64| -> Result<Vec<f64>> {
        let gdm = snapshot_gdm(d, n)?;
        let fa = force_gradient(model, &gdm, pos)?;
        let fb = force_density(model, &gdm, pos)?;
        for (a, b) in fa.iter().zip(fb.iter()) {
            *worst = worst.max((a - b).abs());
        }
        Ok(fa)
    };

    let mut samples = Vec::new();
    let mut record = |t: f64,
                      d: &CMat,
                      pos: &[f64],
                      vel: &[f64],
                      engine: &mut StepEngine|
     -> Result<()> {
        let gdm = snapshot_gdm(d, n)?;
        let h = engine.hamiltonian(epsilon, lambda, pos)?;
        let energy_electronic = expectation(&gdm, &h, &tag_site_pairs())?.re;
        let kinetic_nuclear: f64 = nuclei
            .iter()
            .zip(vel.iter())
            .map(|(nc, &v)| if nc.mass.is_finite() { 0.5 * nc.mass * v * v } else { 0.0 })
            .sum();
        let potential_nn = nuclear_repulsion(model, pos);
        samples.push(CoupledSample {
            t,
            energy_electronic,
            kinetic_nuclear,
            potential_nn,
            total_energy: energy_electronic + kinetic_nuclear + potential_nn,
            trace: gdm.trace(),
            trace_squared: gdm.trace_squared(),
            density: gdm.orbital_density()?,
            positions: pos.to_vec(),
            velocities: vel.to_vec(),
        });
        Ok(())
    };

    record(0.0, &d, &pos, &vel, &mut engine)?;
    let mut force = eval_forces(&d, &pos, &mut max_force_mismatch)?;
    for step in 0..n_steps {
        // half kick and drift on mobile nuclei
        let mut new_pos = pos.clone();
        for (i, nuc) in nuclei.iter().enumerate() {
            if nuc.mobile {
                vel[i] += 0.5 * dt * force[i] / nuc.mass;
                new_pos[i] = pos[i] + dt * vel[i];
            }
        }
        // electronic step at the midpoint geometry
        let mid: Vec<f64> = pos
            .iter()
            .zip(new_pos.iter())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        engine.step(&mut d, epsilon, lambda, &mid, dt)?;
        pos = new_pos;
        // closing half kick from the updated force field
        force = eval_forces(&d, &pos, &mut max_force_mismatch)?;
        for (i, nuc) in nuclei.iter().enumerate() {
            if nuc.mobile {
                vel[i] += 0.5 * dt * force[i] / nuc.mass;
            }
        }
        if (step + 1) % sample_every == 0 || step + 1 == n_steps {
            record((step + 1) as f64 * dt, &d, &pos, &vel, &mut engine)?;
        }
    }

    let final_gdm = snapshot_gdm(&d, n)?;
    Ok(CoupledTrajectory {
        samples,
        final_gdm,
        final_nuclei: NucleiState {
            positions: pos,
            velocities: vel,
        },
        max_force_mismatch,
    })
}
