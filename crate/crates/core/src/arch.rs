//! Circuit architectures: geometrically local parallel lattices and the
//! non-local hypercubic structure (NLHS), plus lightcones and the
//! lattice-distance tools used for effective-lightcone truncation.
//!
//! An architecture is only a gate schedule. Randomness enters in
//! [`realize`], which draws one independent two-mode gate per slot.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};

/// One two-mode gate position, `mode_a < mode_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateSlot {
    pub mode_a: usize,
    pub mode_b: usize,
}

impl GateSlot {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidGate(format!("slot on a single mode {a}")));
        }
        Ok(Self { mode_a: a.min(b), mode_b: a.max(b) })
    }
}

/// Gates applied in parallel; one layer is one unit of depth.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Layer {
    pub slots: Vec<GateSlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    LocalParallel { dim: usize, sides: Vec<usize> },
    Nlhs { p: usize, rounds: usize },
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitArchitecture {
    mode_count: usize,
    #[serde(flatten)]
    family: Family,
    layers: Vec<Layer>,
}

impl CircuitArchitecture {
    /// Checks mode bounds and per-layer disjointness.
    pub fn from_layers(mode_count: usize, layers: Vec<Layer>) -> Result<Self> {
        Self::with_family(mode_count, Family::Custom, layers)
    }

    fn with_family(mode_count: usize, family: Family, layers: Vec<Layer>) -> Result<Self> {
        if mode_count == 0 {
            return Err(Error::InvalidDimension("architecture with zero modes".into()));
        }
        let mut seen = vec![usize::MAX; mode_count];
        for (depth, layer) in layers.iter().enumerate() {
            for slot in &layer.slots {
                if slot.mode_a >= slot.mode_b {
                    return Err(Error::InvalidGate(format!("slot ({}, {})", slot.mode_a, slot.mode_b)));
                }
                for m in [slot.mode_a, slot.mode_b] {
                    if m >= mode_count {
                        return Err(Error::Index { index: m, bound: mode_count });
                    }
                    if seen[m] == depth {
                        return Err(Error::InvalidGate(format!("mode {m} used twice in layer {depth}")));
                    }
                    seen[m] = depth;
                }
            }
        }
        Ok(Self { mode_count, family, layers })
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(|l| l.slots.len()).sum()
    }

    /// Lattice coordinates: the lattice itself for local-parallel circuits,
    /// otherwise the modes in a line.
    pub fn geometry(&self) -> LatticeGeometry {
        match &self.family {
            Family::LocalParallel { sides, .. } => LatticeGeometry { sides: sides.clone() },
            _ => LatticeGeometry { sides: vec![self.mode_count] },
        }
    }

    /// The architecture cut after its first `depth` layers.
    pub fn prefix(&self, depth: usize) -> Result<Self> {
        self.check_depth(depth)?;
        Ok(Self {
            mode_count: self.mode_count,
            family: self.family.clone(),
            layers: self.layers[..depth].to_vec(),
        })
    }

    fn check_depth(&self, depth: usize) -> Result<()> {
        if depth > self.layers.len() {
            return Err(Error::Range { depth, layers: self.layers.len() });
        }
        Ok(())
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.mode_count {
            return Err(Error::Index { index: mode, bound: self.mode_count });
        }
        Ok(())
    }
}

/// Mode positions on a rectangular lattice. Dimension 0 varies fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    pub sides: Vec<usize>,
}

impl LatticeGeometry {
    pub fn new(sides: Vec<usize>) -> Result<Self> {
        if sides.is_empty() || sides.contains(&0) {
            return Err(Error::InvalidLattice(format!("sides {sides:?}")));
        }
        Ok(Self { sides })
    }

    pub fn mode_count(&self) -> usize {
        self.sides.iter().product()
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn coords(&self, mut mode: usize) -> Vec<usize> {
        self.sides
            .iter()
            .map(|&s| {
                let c = mode % s;
                mode /= s;
                c
            })
            .collect()
    }

    /// Largest per-dimension separation between two modes.
    pub fn distance(&self, a: usize, b: usize) -> usize {
        let mut a = a;
        let mut b = b;
        let mut best = 0;
        for &s in &self.sides {
            best = best.max((a % s).abs_diff(b % s));
            a /= s;
            b /= s;
        }
        best
    }

    /// Largest possible separation; any `l` at or above it truncates nothing.
    pub fn diameter(&self) -> usize {
        self.sides.iter().map(|s| s - 1).max().unwrap_or(0)
    }
}

/// Brickwork circuit on a `d`-dimensional lattice with open boundaries.
///
/// Each round has `2d` layers: for each dimension in order, an even-offset
/// step pairing coordinates `(2j, 2j+1)` followed by an odd-offset step
/// pairing `(2j+1, 2j+2)`.
pub fn build_local_parallel(d: usize, side_lengths: &[usize], depth: usize) -> Result<CircuitArchitecture> {
    if d == 0 || side_lengths.len() != d {
        return Err(Error::InvalidLattice(format!(
            "dimension {d} needs {d} side lengths, got {side_lengths:?}"
        )));
    }
    if let Some(s) = side_lengths.iter().find(|&&s| s < 2) {
        return Err(Error::InvalidLattice(format!("side length {s} < 2")));
    }
    if depth == 0 {
        return Err(Error::Parameter("local-parallel depth must be at least 1".into()));
    }
    let geom = LatticeGeometry { sides: side_lengths.to_vec() };
    let m = geom.mode_count();
    let mut strides = Vec::with_capacity(d);
    let mut acc = 1;
    for &s in side_lengths {
        strides.push(acc);
        acc *= s;
    }
    let step_layer = |dim: usize, offset: usize| -> Layer {
        let slots = (0..m)
            .filter_map(|mode| {
                let c = (mode / strides[dim]) % side_lengths[dim];
                let pairs_here = c >= offset && (c - offset) % 2 == 0 && c + 1 < side_lengths[dim];
                pairs_here.then(|| GateSlot { mode_a: mode, mode_b: mode + strides[dim] })
            })
            .collect();
        Layer { slots }
    };
    let round: Vec<Layer> = (0..d).flat_map(|dim| [step_layer(dim, 0), step_layer(dim, 1)]).collect();
    let layers = (0..depth).map(|i| round[i % round.len()].clone()).collect();
    CircuitArchitecture::with_family(m, Family::LocalParallel { dim: d, sides: side_lengths.to_vec() }, layers)
}

/// Non-local hypercubic structure on `2^p` modes repeated `rounds` times.
///
/// Layer `D` of a round (1-based) pairs modes whose indices differ only in
/// bit `D - 1`.
pub fn build_nlhs(p: usize, rounds: usize) -> Result<CircuitArchitecture> {
    if p == 0 || p >= usize::BITS as usize {
        return Err(Error::Parameter(format!("nlhs needs 1 <= p < {}, got {p}", usize::BITS)));
    }
    if rounds == 0 {
        return Err(Error::Parameter("nlhs needs at least one round".into()));
    }
    let m = 1usize << p;
    let round: Vec<Layer> = (1..=p)
        .map(|depth| {
            let block = 1usize << depth;
            let half = block >> 1;
            let slots = (0..m / block)
                .flat_map(|j| (0..half).map(move |k| GateSlot { mode_a: block * j + k, mode_b: block * j + k + half }))
                .collect();
            Layer { slots }
        })
        .collect();
    let layers = (0..rounds).flat_map(|_| round.iter().cloned()).collect();
    CircuitArchitecture::with_family(m, Family::Nlhs { p, rounds }, layers)
}

/// NLHS architecture for `m` modes; `m` must be a power of two.
pub fn build_nlhs_for_modes(m: usize, rounds: usize) -> Result<CircuitArchitecture> {
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::Parameter(format!("nlhs requires a power-of-two mode count, got {m}")));
    }
    build_nlhs(m.trailing_zeros() as usize, rounds)
}

/// Ordered product of independent Haar-U(2) gates, later layers on the left.
pub fn realize<R: Rng + ?Sized>(arch: &CircuitArchitecture, rng: &mut R) -> ComplexMatrix {
    realize_with(arch, rng, |r| linalg::haar_u2(r))
}

/// As [`realize`] with a caller-supplied gate sampler.
pub fn realize_with<R, F>(arch: &CircuitArchitecture, rng: &mut R, mut gate: F) -> ComplexMatrix
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> ComplexMatrix,
{
    let mut u = ComplexMatrix::identity(arch.mode_count);
    for layer in &arch.layers {
        for slot in &layer.slots {
            let g = gate(rng);
            u.apply_two_mode_left(&g, slot.mode_a, slot.mode_b);
        }
    }
    u
}

/// Sorted mode set reached through the gate graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lightcone {
    pub modes: Vec<usize>,
}

impl Lightcone {
    fn from_mask(mask: &[bool]) -> Self {
        Self { modes: mask.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect() }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn contains(&self, mode: usize) -> bool {
        self.modes.binary_search(&mode).is_ok()
    }

    pub fn is_subset(&self, other: &Lightcone) -> bool {
        self.modes.iter().all(|&m| other.contains(m))
    }
}

fn spread<'a>(mask: &mut [bool], layers: impl Iterator<Item = &'a Layer>) {
    for layer in layers {
        for slot in &layer.slots {
            if mask[slot.mode_a] || mask[slot.mode_b] {
                mask[slot.mode_a] = true;
                mask[slot.mode_b] = true;
            }
        }
    }
}

/// Output modes connected to `input_mode` through the first `depth` layers.
pub fn forward_lightcone(arch: &CircuitArchitecture, input_mode: usize, depth: usize) -> Result<Lightcone> {
    arch.check_depth(depth)?;
    arch.check_mode(input_mode)?;
    let mut mask = vec![false; arch.mode_count];
    mask[input_mode] = true;
    spread(&mut mask, arch.layers[..depth].iter());
    Ok(Lightcone::from_mask(&mask))
}

/// Input modes connected to `output_mode` at depth `depth`.
pub fn backward_lightcone(arch: &CircuitArchitecture, output_mode: usize, depth: usize) -> Result<Lightcone> {
    arch.check_depth(depth)?;
    arch.check_mode(output_mode)?;
    let mut mask = vec![false; arch.mode_count];
    mask[output_mode] = true;
    spread(&mut mask, arch.layers[..depth].iter().rev());
    Ok(Lightcone::from_mask(&mask))
}

/// Outputs reachable from any input that can reach `mode`: the forward cone
/// of the backward cone, both at `depth`.
pub fn round_trip_lightcone(arch: &CircuitArchitecture, mode: usize, depth: usize) -> Result<Lightcone> {
    let back = backward_lightcone(arch, mode, depth)?;
    let mut mask = vec![false; arch.mode_count];
    for &m in &back.modes {
        mask[m] = true;
    }
    spread(&mut mask, arch.layers[..depth].iter());
    Ok(Lightcone::from_mask(&mask))
}

/// Forward lightcone restricted to modes within lattice distance `radius`.
pub fn effective_forward_lightcone(
    arch: &CircuitArchitecture,
    geometry: &LatticeGeometry,
    input_mode: usize,
    depth: usize,
    radius: usize,
) -> Result<Lightcone> {
    let cone = forward_lightcone(arch, input_mode, depth)?;
    Ok(Lightcone {
        modes: cone.modes.into_iter().filter(|&j| geometry.distance(input_mode, j) <= radius).collect(),
    })
}

/// Number of distinct gate paths from input `i` to output `j`.
///
/// Saturates at `u128::MAX`.
pub fn path_count(arch: &CircuitArchitecture, i: usize, j: usize) -> Result<u128> {
    arch.check_mode(i)?;
    arch.check_mode(j)?;
    let mut counts = vec![0u128; arch.mode_count];
    counts[i] = 1;
    for layer in &arch.layers {
        for slot in &layer.slots {
            let total = counts[slot.mode_a].saturating_add(counts[slot.mode_b]);
            counts[slot.mode_a] = total;
            counts[slot.mode_b] = total;
        }
    }
    Ok(counts[j])
}

/// Smallest integer `l` with `l >= sqrt(2 n^λ D / (β d))`.
pub fn effective_lightcone_radius(n_photons: usize, depth: usize, lambda: f64, beta: f64, d: usize) -> Result<usize> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Parameter(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("lambda must be positive, got {lambda}")));
    }
    if d == 0 {
        return Err(Error::Parameter("lattice dimension must be at least 1".into()));
    }
    let target = 2.0 * (n_photons as f64).powf(lambda) * depth as f64 / (beta * d as f64);
    let mut l = target.sqrt().ceil() as usize;
    // guard against sqrt rounding up past an exact square
    while l > 0 && ((l - 1) * (l - 1)) as f64 >= target {
        l -= 1;
    }
    Ok(l)
}

/// Weight of column `input_mode` of `u` on rows farther than `l` from it.
pub fn leakage_rate(u: &ComplexMatrix, geometry: &LatticeGeometry, input_mode: usize, l: usize) -> Result<f64> {
    check_geometry(u, geometry)?;
    if input_mode >= u.cols() {
        return Err(Error::Index { index: input_mode, bound: u.cols() });
    }
    Ok((0..u.rows())
        .filter(|&j| geometry.distance(j, input_mode) > l)
        .map(|j| u[(j, input_mode)].norm_sqr())
        .sum())
}

/// Copy of `u` with every entry whose row and column modes lie farther
/// than `l` apart set to zero.
pub fn truncate_unitary(u: &ComplexMatrix, geometry: &LatticeGeometry, l: usize) -> Result<ComplexMatrix> {
    check_geometry(u, geometry)?;
    Ok(ComplexMatrix::from_fn(u.rows(), u.cols(), |r, c| {
        if geometry.distance(r, c) > l {
            Default::default()
        } else {
            u[(r, c)]
        }
    }))
}

fn check_geometry(u: &ComplexMatrix, geometry: &LatticeGeometry) -> Result<()> {
    let m = geometry.mode_count();
    if u.rows() != m || u.cols() != m {
        return Err(Error::Shape(format!("{}x{} matrix on a {m}-mode lattice", u.rows(), u.cols())));
    }
    Ok(())
}

/// A source of random `M x M` unitaries: a circuit architecture with Haar
/// U(2) gates, or the global Haar measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Ensemble {
    Circuit(CircuitArchitecture),
    Haar { modes: usize },
}

impl Ensemble {
    pub fn mode_count(&self) -> usize {
        match self {
            Ensemble::Circuit(a) => a.mode_count(),
            Ensemble::Haar { modes } => *modes,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexMatrix {
        match self {
            Ensemble::Circuit(a) => realize(a, rng),
            Ensemble::Haar { modes } => linalg::haar_unitary(*modes, rng).expect("haar ensemble has modes >= 1"),
        }
    }

    /// Short label used in output files.
    pub fn tag(&self) -> String {
        match self {
            Ensemble::Circuit(a) => match a.family() {
                Family::LocalParallel { dim, sides } => format!(
                    "local-d{dim}-{}-D{}",
                    sides.iter().map(usize::to_string).collect::<Vec<_>>().join("x"),
                    a.depth()
                ),
                Family::Nlhs { rounds, .. } => format!("nlhs-C{rounds}"),
                Family::Custom => format!("custom-D{}", a.depth()),
            },
            Ensemble::Haar { .. } => "haar".to_string(),
        }
    }
}
