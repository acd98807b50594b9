//! Fock-space reference for Gaussian sampling: expand each squeezed vacuum
//! in photon number, push every input Fock term through the interferometer
//! with permanent amplitudes, and read off output probabilities.

#![allow(dead_code)]

use std::collections::HashMap;

use shallow_bs::fock::{enumerate_outcomes, FockPattern};
use shallow_bs::linalg::{ComplexMatrix, C64};
use shallow_bs::matfn::{permanent_oracle, select_submatrix, SubmatrixSelector};

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Amplitude of `|2k>` in a squeezed vacuum, up to a global phase.
fn smsv_amplitude(r: f64, k: usize) -> f64 {
    (-r.tanh()).powi(k as i32) * factorial(2 * k).sqrt() / (2f64.powi(k as i32) * factorial(k)) / r.cosh().sqrt()
}

/// Pair counts per squeezer summing to `pairs`, each at most `cap`.
fn compositions(parts: usize, pairs: usize, cap: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if pairs == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=pairs.min(cap) {
        for mut rest in compositions(parts - 1, pairs - first, cap) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn multiplicity_factorial(modes: &[usize]) -> f64 {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    modes.iter().for_each(|&m| *counts.entry(m).or_default() += 1);
    counts.values().map(|&c| factorial(c)).product()
}

/// Probabilities of every `2 * pairs`-photon outcome, with each squeezer
/// truncated at `cutoff` photons.
pub fn fock_sector(u: &ComplexMatrix, inputs: &[usize], r: f64, pairs: usize, cutoff: usize) -> Vec<(FockPattern, f64)> {
    let m = u.rows();
    let terms: Vec<(Vec<usize>, f64)> = compositions(inputs.len(), pairs, cutoff / 2)
        .into_iter()
        .map(|ks| {
            let amp: f64 = ks.iter().map(|&k| smsv_amplitude(r, k)).product();
            let cols: Vec<usize> = inputs.iter().zip(&ks).flat_map(|(&t, &k)| std::iter::repeat_n(t, 2 * k)).collect();
            (cols, amp)
        })
        .collect();
    enumerate_outcomes(m, 2 * pairs)
        .map(|s| {
            let amp: C64 = terms
                .iter()
                .map(|(cols, a)| {
                    let sub = select_submatrix(u, &SubmatrixSelector::new(s.modes().to_vec(), cols.clone())).unwrap();
                    let norm = (multiplicity_factorial(s.modes()) * multiplicity_factorial(cols)).sqrt();
                    permanent_oracle(&sub).unwrap() * (*a / norm)
                })
                .sum();
            (s, amp.norm_sqr())
        })
        .collect()
}
