//! Brute-force pair density matrix built from the dense first-quantized
//! wave function. Exponential in N; keep K <= 12 and N <= 4.

// shared between test binaries, not every binary uses every helper
#![allow(dead_code)]

use gdm_core::basis::{enumerate_configurations, Configuration, GeminalBasis};
use gdm_core::gdm::CiVector;
use gdm_core::linalg::{CMat, CVec};
use num_complex::Complex64;

/// All permutations of 0..n with their parity signs (Heap's algorithm,
/// one transposition per step).
fn permutations_signed(n: usize) -> Vec<(Vec<usize>, f64)> {
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = vec![(a.clone(), 1.0)];
    let mut c = vec![0usize; n];
    let mut sign = 1.0;
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            sign = -sign;
            out.push((a.clone(), sign));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Dense amplitude tensor over ordered spin-orbital tuples. The first
/// coordinate is the most significant digit: index = fold(x_m - 1, base K).
pub fn dense_wavefunction(psi: &CiVector) -> Vec<Complex64> {
    let k = psi.n_orbitals();
    let n = psi.n_electrons();
    let mut dense = vec![Complex64::new(0.0, 0.0); k.pow(n as u32)];
    let norm = ((1..=n).map(|m| m as f64).product::<f64>()).sqrt();
    let perms = permutations_signed(n);
    for (config, &coeff) in psi.configurations().iter().zip(psi.coefficients()) {
        if coeff.norm_sqr() == 0.0 {
            continue;
        }
        let orbs = config.orbitals();
        for (perm, sign) in &perms {
            let mut idx = 0usize;
            for &m in perm {
                idx = idx * k + (orbs[m] - 1);
            }
            dense[idx] += coeff * *sign / norm;
        }
    }
    dense
}

/// Pair matrix obtained by contracting |psi><psi| over the trailing N - 2
/// coordinates and projecting the first two onto antisymmetrized pairs.
/// Row/column = flat pair index - 1, trace = N(N-1)/2.
pub fn brute_force_gdm_matrix(psi: &CiVector) -> CMat {
    let k = psi.n_orbitals();
    let n = psi.n_electrons();
    assert!(n >= 2, "pair matrix needs at least two electrons");
    let dense = dense_wavefunction(psi);
    let gb = GeminalBasis::new(k).unwrap();
    let p = gb.len();
    let n_rest = k.pow((n - 2) as u32);
    let pair_count = (n * (n - 1) / 2) as f64;

    // amp[flat][rest] = <i j rest | psi> * sqrt(2), the signed pair amplitude
    let mut amp = vec![vec![Complex64::new(0.0, 0.0); n_rest]; p];
    for (i, j) in gb.pairs() {
        let flat = gb.pair_index(i, j).unwrap() - 1;
        let base = ((i - 1) * k + (j - 1)) * n_rest;
        for r in 0..n_rest {
            amp[flat][r] = dense[base + r] * std::f64::consts::SQRT_2;
        }
    }
    let mut d = CMat::zeros((p, p));
    for a in 0..p {
        for b in 0..p {
            let mut s = Complex64::new(0.0, 0.0);
            for r in 0..n_rest {
                s += amp[a][r] * amp[b][r].conj();
            }
            d[(a, b)] = s * pair_count;
        }
    }
    d
}

/// Normalized CI state with the given amplitudes, zero elsewhere.
pub fn ci_superposition(k: usize, n: usize, terms: &[(Vec<usize>, Complex64)]) -> CiVector {
    let configs = enumerate_configurations(k, n).unwrap();
    let mut coeffs = CVec::zeros(configs.len());
    for (orbs, c) in terms {
        let target = Configuration::new(orbs.clone()).unwrap();
        let idx = configs
            .iter()
            .position(|x| x == &target)
            .expect("configuration fits the space");
        coeffs[idx] = *c;
    }
    let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    coeffs.mapv_inplace(|c| c / norm);
    CiVector::new(k, n, coeffs).unwrap()
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
