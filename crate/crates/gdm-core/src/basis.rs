//! Spin-orbital labels, N-electron configurations, and the geminal (pair) basis.
//!
//! All physics-facing indices are 1-based: spin-orbitals run 1..=K, sites
//! 1..=n_sites, flat pair indices 1..=K(K-1)/2. Matrix row/column indices are
//! 0-based and appear only at linear-algebra boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

/// Maps spin-orbitals onto a 1-D chain: orbital k sits on site ceil(k/2),
/// odd k is spin up.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpinOrbitalBasis {
    n_sites: usize,
}

impl SpinOrbitalBasis {
    pub fn new(n_sites: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(CoreError::InvalidInput("n_sites must be positive".into()));
        }
        Ok(Self { n_sites })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_orbitals(&self) -> usize {
        2 * self.n_sites
    }

    pub fn site(&self, k: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.n_orbitals());
        k.div_ceil(2)
    }

    pub fn spin(&self, k: usize) -> Spin {
        debug_assert!(k >= 1 && k <= self.n_orbitals());
        if k % 2 == 1 {
            Spin::Up
        } else {
            Spin::Down
        }
    }

    pub fn orbital(&self, site: usize, spin: Spin) -> usize {
        debug_assert!(site >= 1 && site <= self.n_sites);
        match spin {
            Spin::Up => 2 * site - 1,
            Spin::Down => 2 * site,
        }
    }
}

/// Strictly increasing list of occupied spin-orbitals.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    orbitals: Vec<usize>,
}

impl Configuration {
    pub fn new(orbitals: Vec<usize>) -> Result<Self> {
        if orbitals.first().is_some_and(|&k| k == 0) {
            return Err(CoreError::InvalidInput(
                "orbital indices are 1-based; got 0".into(),
            ));
        }
        if orbitals.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CoreError::InvalidInput(format!(
                "configuration must be strictly increasing, got {orbitals:?}"
            )));
        }
        Ok(Self { orbitals })
    }

    pub fn orbitals(&self) -> &[usize] {
        &self.orbitals
    }

    pub fn len(&self) -> usize {
        self.orbitals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbitals.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.orbitals.binary_search(&k).is_ok()
    }

    /// 1-based position of orbital k within the configuration.
    pub fn position(&self, k: usize) -> Option<usize> {
        self.orbitals.binary_search(&k).ok().map(|p| p + 1)
    }

    /// Occupation bitmask with bit (k-1) set for occupied orbital k.
    pub fn bitmask(&self) -> u64 {
        debug_assert!(self.orbitals.last().is_none_or(|&k| k <= 64));
        self.orbitals.iter().fold(0u64, |m, &k| m | 1u64 << (k - 1))
    }

    pub fn from_bitmask(mask: u64) -> Self {
        let orbitals = (0..64).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect();
        Self { orbitals }
    }

    /// All occupied pairs (i, j) with i < j, in flat-index order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.orbitals.len();
        let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        for b in 1..n {
            for a in 0..b {
                out.push((self.orbitals[a], self.orbitals[b]));
            }
        }
        out.sort_by_key(|&(i, j)| (j, i));
        out
    }

    /// Inserts orbitals i < j back into a reduced configuration, returning
    /// the enlarged configuration and the same sign that
    /// [`reduced_configuration`] would report for removing them again.
    pub fn insert_pair(&self, i: usize, j: usize) -> Result<(Configuration, f64)> {
        if i >= j || i == 0 {
            return Err(CoreError::InvalidInput(format!(
                "pair must satisfy 1 <= i < j, got ({i},{j})"
            )));
        }
        if self.contains(i) || self.contains(j) {
            return Err(CoreError::InvalidInput(format!(
                "orbital pair ({i},{j}) collides with configuration {:?}",
                self.orbitals
            )));
        }
        let mut orbitals = self.orbitals.clone();
        orbitals.push(i);
        orbitals.push(j);
        orbitals.sort_unstable();
        let full = Configuration { orbitals };
        let pi = full.position(i).unwrap();
        let pj = full.position(j).unwrap();
        let sign = if (pi + pj - 1) % 2 == 0 { 1.0 } else { -1.0 };
        Ok((full, sign))
    }
}

/// Removes the pair (i, j) from a configuration.
///
/// The sign is (-1)^(p_i + p_j - 1) with 1-based positions p of the removed
/// orbitals, i.e. the fermionic parity of bubbling both to the front.
pub fn reduced_configuration(
    config: &Configuration,
    i: usize,
    j: usize,
) -> Result<(Configuration, f64)> {
    if i >= j {
        return Err(CoreError::InvalidInput(format!(
            "pair must satisfy i < j, got ({i},{j})"
        )));
    }
    let (pi, pj) = match (config.position(i), config.position(j)) {
        (Some(pi), Some(pj)) => (pi, pj),
        _ => {
            return Err(CoreError::PairNotInConfiguration {
                i,
                j,
                config: config.orbitals.clone(),
            })
        }
    };
    let orbitals = config
        .orbitals
        .iter()
        .copied()
        .filter(|&k| k != i && k != j)
        .collect();
    let sign = if (pi + pj - 1) % 2 == 0 { 1.0 } else { -1.0 };
    Ok((Configuration { orbitals }, sign))
}

/// Flat basis of ordered pairs (i, j), i < j <= K, enumerated as
/// (1,2), (1,3), (2,3), (1,4), (2,4), (3,4), ...
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeminalBasis {
    n_orbitals: usize,
}

impl GeminalBasis {
    pub fn new(n_orbitals: usize) -> Result<Self> {
        if n_orbitals < 2 {
            return Err(CoreError::InvalidInput(format!(
                "geminal basis needs at least 2 orbitals, got {n_orbitals}"
            )));
        }
        Ok(Self { n_orbitals })
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    /// G = K(K-1)/2
    pub fn len(&self) -> usize {
        self.n_orbitals * (self.n_orbitals - 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// 1-based flat index of the pair (i, j): (j-1)(j-2)/2 + i.
    pub fn pair_index(&self, i: usize, j: usize) -> Result<usize> {
        if i == 0 || i >= j || j > self.n_orbitals {
            return Err(CoreError::InvalidInput(format!(
                "pair ({i},{j}) outside 1 <= i < j <= {}",
                self.n_orbitals
            )));
        }
        Ok((j - 1) * (j - 2) / 2 + i)
    }

    /// Inverse of [`pair_index`].
    pub fn pair_from_index(&self, n: usize) -> Result<(usize, usize)> {
        if n == 0 || n > self.len() {
            return Err(CoreError::InvalidInput(format!(
                "flat pair index {n} outside 1..={}",
                self.len()
            )));
        }
        let mut j = 2;
        while j * (j - 1) / 2 < n {
            j += 1;
        }
        let i = n - (j - 1) * (j - 2) / 2;
        Ok((i, j))
    }

    /// Pairs in flat-index order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (2..=self.n_orbitals).flat_map(|j| (1..j).map(move |i| (i, j)))
    }
}

pub fn binomial(k: usize, n: usize) -> u128 {
    if n > k {
        return 0;
    }
    let n = n.min(k - n);
    let mut acc: u128 = 1;
    for t in 0..n {
        acc = acc * (k - t) as u128 / (t + 1) as u128;
    }
    acc
}

/// All C(K, N) configurations in lexicographic order.
pub fn enumerate_configurations(n_orbitals: usize, n_electrons: usize) -> Result<Vec<Configuration>> {
    if n_electrons > n_orbitals {
        return Err(CoreError::InvalidInput(format!(
            "cannot place {n_electrons} electrons in {n_orbitals} orbitals"
        )));
    }
    let mut out = Vec::with_capacity(binomial(n_orbitals, n_electrons) as usize);
    if n_electrons == 0 {
        out.push(Configuration { orbitals: vec![] });
        return Ok(out);
    }
    let mut current: Vec<usize> = (1..=n_electrons).collect();
    loop {
        out.push(Configuration {
            orbitals: current.clone(),
        });
        // advance to the lexicographic successor
        let mut idx = n_electrons;
        loop {
            if idx == 0 {
                return Ok(out);
            }
            idx -= 1;
            if current[idx] < n_orbitals - (n_electrons - 1 - idx) {
                break;
            }
        }
        current[idx] += 1;
        for t in idx + 1..n_electrons {
            current[t] = current[t - 1] + 1;
        }
    }
}
