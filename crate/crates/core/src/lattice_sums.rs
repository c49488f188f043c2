//! Absolutely convergent cubic-lattice sums and the Coulombic constants
//! `L4`, `L6`, `L8`, `L10` built from them.
//!
//! A raw sum is
//!
//! ```text
//! e_l^(i1,i2,i3) = sum over R in Z^3, 0 < max|R_i| <= rmax, of R1^i1 R2^i2 R3^i3 / |R|^l
//! ```
//!
//! Only even powers are non-zero, so the loop runs over the closed positive
//! octant and weights each point by the number of sign images it stands for.

use rayon::prelude::*;
use thiserror::Error;

use crate::summation::{tree_sum_vecs, CompensatedSum};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("e_{order}^{powers:?} diverges: order minus total power is below 4")]
    DivergenceGuard { order: u32, powers: [u32; 3] },
    #[error("truncation radius {rmax} is below the minimum {min}")]
    Truncation { rmax: u32, min: u32 },
}

/// One raw sum term: order `l` and powers `(i1, i2, i3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RawSumKey {
    pub order: u32,
    pub powers: [u32; 3],
}

impl RawSumKey {
    pub const fn new(order: u32, powers: [u32; 3]) -> Self {
        Self { order, powers }
    }

    fn check(&self) -> Result<(), LatticeError> {
        let total: u32 = self.powers.iter().sum();
        if self.order < total + 4 {
            return Err(LatticeError::DivergenceGuard {
                order: self.order,
                powers: self.powers,
            });
        }
        Ok(())
    }

    fn has_odd_power(&self) -> bool {
        self.powers.iter().any(|p| p % 2 == 1)
    }

    /// Powers sorted in descending order. The summation domain is symmetric
    /// under axis permutations, so this does not change the value.
    fn canonical(&self) -> Self {
        let mut powers = self.powers;
        powers.sort_unstable_by(|a, b| b.cmp(a));
        Self {
            order: self.order,
            powers,
        }
    }
}

/// A signed integer combination of raw sums with one rational prefactor.
struct Combination {
    scale: f64,
    terms: &'static [(f64, RawSumKey)],
}

const fn key(order: u32, a: u32, b: u32, c: u32) -> RawSumKey {
    RawSumKey::new(order, [a, b, c])
}

const L4_TERMS: Combination = Combination {
    scale: -7.0 / 4.0,
    terms: &[(3.0, key(9, 2, 2, 0)), (-1.0, key(9, 4, 0, 0))],
};

const L6_TERMS: Combination = Combination {
    scale: 3.0 / 8.0,
    terms: &[
        (30.0, key(13, 2, 2, 2)),
        (-15.0, key(13, 4, 2, 0)),
        (1.0, key(13, 6, 0, 0)),
    ],
};

const L8_TERMS: Combination = Combination {
    scale: 99.0 / 64.0,
    terms: &[
        (35.0, key(17, 4, 4, 0)),
        (-28.0, key(17, 6, 2, 0)),
        (1.0, key(17, 8, 0, 0)),
    ],
};

const L10_TERMS: Combination = Combination {
    scale: -65.0 / 128.0,
    terms: &[
        (630.0, key(21, 4, 4, 2)),
        (-504.0, key(21, 6, 2, 2)),
        (-42.0, key(21, 6, 4, 0)),
        (45.0, key(21, 8, 2, 0)),
        (-1.0, key(21, 10, 0, 0)),
    ],
};

/// Six-term form of `L4` before the permutation symmetry is used.
const L4_EXPANDED: Combination = Combination {
    scale: 1.0 / 8.0,
    terms: &[
        (3.0, key(9, 4, 0, 0)),
        (3.0, key(9, 0, 4, 0)),
        (8.0, key(9, 0, 0, 4)),
        (6.0, key(9, 2, 2, 0)),
        (-24.0, key(9, 2, 0, 2)),
        (-24.0, key(9, 0, 2, 2)),
    ],
};

/// Smallest truncation accepted by [`coulombic_table`].
pub const MIN_TABLE_RMAX: u32 = 10;

/// The four Coulombic constants at a given truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSumTable {
    pub l4: f64,
    pub l6: f64,
    pub l8: f64,
    pub l10: f64,
    pub rmax: u32,
}

impl LatticeSumTable {
    pub fn values(&self) -> [f64; 4] {
        [self.l4, self.l6, self.l8, self.l10]
    }
}

/// Evaluates many raw sums in a single pass over the lattice.
///
/// Terms with an odd power are returned as exactly zero without summing.
/// Work is split into slabs of constant `R3`; each slab is accumulated with
/// compensated summation and the slabs are combined in a fixed tree order.
pub fn raw_sums(keys: &[RawSumKey], rmax: u32) -> Result<Vec<f64>, LatticeError> {
    if rmax < 1 {
        return Err(LatticeError::Truncation { rmax, min: 1 });
    }
    for k in keys {
        k.check()?;
    }
    let mut unique: Vec<RawSumKey> = keys
        .iter()
        .filter(|k| !k.has_odd_power())
        .map(RawSumKey::canonical)
        .collect();
    unique.sort_unstable();
    unique.dedup();
    let values = octant_sums(&unique, rmax);
    Ok(keys
        .iter()
        .map(|k| {
            if k.has_odd_power() {
                0.0
            } else {
                let idx = unique.binary_search(&k.canonical()).expect("canonical key present");
                values[idx]
            }
        })
        .collect())
}

/// A single raw sum `e_order^(powers)`.
pub fn raw_sum(order: u32, powers: [u32; 3], rmax: u32) -> Result<f64, LatticeError> {
    Ok(raw_sums(&[RawSumKey::new(order, powers)], rmax)?[0])
}

fn octant_sums(keys: &[RawSumKey], rmax: u32) -> Vec<f64> {
    if keys.is_empty() {
        return Vec::new();
    }
    let max_power = keys.iter().flat_map(|k| k.powers).max().unwrap_or(0) as usize;
    let mut orders: Vec<u32> = keys.iter().map(|k| k.order).collect();
    orders.sort_unstable();
    orders.dedup();
    let order_slot: Vec<usize> = keys.iter().map(|k| orders.binary_search(&k.order).unwrap()).collect();
    let width = keys.len();

    let slabs: Vec<Vec<f64>> = (0..=rmax)
        .into_par_iter()
        .map(|r3| {
            let mut acc = vec![CompensatedSum::new(); width];
            let mut inv_pow = vec![0.0; orders.len()];
            let mut p1 = vec![0.0; max_power + 1];
            let mut p2 = vec![0.0; max_power + 1];
            let mut p3 = vec![0.0; max_power + 1];
            fill_powers(&mut p3, r3 as f64);
            for r2 in 0..=rmax {
                fill_powers(&mut p2, r2 as f64);
                for r1 in 0..=rmax {
                    if r1 == 0 && r2 == 0 && r3 == 0 {
                        continue;
                    }
                    fill_powers(&mut p1, r1 as f64);
                    let nonzero = (r1 != 0) as i32 + (r2 != 0) as i32 + (r3 != 0) as i32;
                    let weight = f64::from(1 << nonzero);
                    let norm2 = (r1 as f64).powi(2) + (r2 as f64).powi(2) + (r3 as f64).powi(2);
                    let inv_norm = norm2.sqrt().recip();
                    for (slot, &order) in inv_pow.iter_mut().zip(&orders) {
                        *slot = inv_norm.powi(order as i32);
                    }
                    for (t, k) in keys.iter().enumerate() {
                        let [a, b, c] = k.powers;
                        let term = p1[a as usize] * p2[b as usize] * p3[c as usize] * inv_pow[order_slot[t]];
                        acc[t].add(weight * term);
                    }
                }
            }
            acc.iter().map(CompensatedSum::value).collect()
        })
        .collect();
    tree_sum_vecs(&slabs, width)
}

fn fill_powers(buf: &mut [f64], v: f64) {
    let mut p = 1.0;
    for slot in buf.iter_mut() {
        *slot = p;
        p *= v;
    }
}

fn combine(c: &Combination, keys: &[RawSumKey], values: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (coeff, k) in c.terms {
        let idx = keys.iter().position(|x| x == k).expect("key requested");
        acc.add(coeff * values[idx]);
    }
    c.scale * acc.value()
}

/// `L4`, `L6`, `L8` and `L10` from one lattice pass.
pub fn coulombic_table(rmax: u32) -> Result<LatticeSumTable, LatticeError> {
    if rmax < MIN_TABLE_RMAX {
        return Err(LatticeError::Truncation {
            rmax,
            min: MIN_TABLE_RMAX,
        });
    }
    let groups = [&L4_TERMS, &L6_TERMS, &L8_TERMS, &L10_TERMS];
    let keys: Vec<RawSumKey> = groups.iter().flat_map(|g| g.terms.iter().map(|t| t.1)).collect();
    let values = raw_sums(&keys, rmax)?;
    let [l4, l6, l8, l10] = groups.map(|g| combine(g, &keys, &values));
    Ok(LatticeSumTable { l4, l6, l8, l10, rmax })
}

/// `L4` from the six raw sums before permutation symmetry is applied.
pub fn l4_expanded(rmax: u32) -> Result<f64, LatticeError> {
    let keys: Vec<RawSumKey> = L4_EXPANDED.terms.iter().map(|t| t.1).collect();
    let values = raw_sums(&keys, rmax)?;
    Ok(combine(&L4_EXPANDED, &keys, &values))
}
