//! Entropy calculus over partitions of a finite weighted sample space:
//! Shannon entropy, conditional entropy, the Rohlin metric, and atom
//! truncation. Entropies sum masses in sorted order, so algebraically equal
//! quantities (notably the metric's two orientations) agree bit for bit.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("masses sum to {sum:e}, not 1 (tolerance 1e-12)")]
    BadTotalMass { sum: f64 },
    #[error("point {point} carries negative mass {mass:e}")]
    NegativeMass { point: usize, mass: f64 },
    #[error("partition assigns {partition} points but the sample has {sample}")]
    SampleMismatch { partition: usize, sample: usize },
    #[error("the sample needs at least one point")]
    EmptySample,
}

const MASS_TOL: f64 = 1e-12;

/// A finite probability space: point `i` carries `masses[i]`.
#[derive(Debug, Clone)]
pub struct WeightedSample {
    masses: Vec<f64>,
}

impl WeightedSample {
    pub fn from_masses(masses: Vec<f64>) -> Result<Self, PartitionError> {
        if masses.is_empty() {
            return Err(PartitionError::EmptySample);
        }
        for (point, &mass) in masses.iter().enumerate() {
            if mass < 0.0 || !mass.is_finite() {
                return Err(PartitionError::NegativeMass { point, mass });
            }
        }
        let sum: f64 = masses.iter().sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(PartitionError::BadTotalMass { sum });
        }
        Ok(WeightedSample { masses })
    }

    pub fn uniform(n: usize) -> Result<Self, PartitionError> {
        if n == 0 {
            return Err(PartitionError::EmptySample);
        }
        WeightedSample::from_masses(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn mass(&self, point: usize) -> f64 {
        self.masses[point]
    }
}

/// Assignment of each sample point to an atom index. Atom indices may be
/// sparse; only atoms of positive mass enter any entropy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    atom_of: Vec<u32>,
}

impl Partition {
    pub fn new(atom_of: Vec<u32>) -> Self {
        Partition { atom_of }
    }

    /// The one-atom partition.
    pub fn trivial(points: usize) -> Self {
        Partition { atom_of: vec![0; points] }
    }

    /// Every point its own atom.
    pub fn discrete(points: usize) -> Self {
        Partition { atom_of: (0..points as u32).collect() }
    }

    pub fn points(&self) -> usize {
        self.atom_of.len()
    }

    pub fn atom(&self, point: usize) -> u32 {
        self.atom_of[point]
    }
}

fn check_sample(sample: &WeightedSample, p: &Partition) -> Result<(), PartitionError> {
    if p.atom_of.len() != sample.len() {
        return Err(PartitionError::SampleMismatch {
            partition: p.atom_of.len(),
            sample: sample.len(),
        });
    }
    Ok(())
}

/// Positive atom masses in ascending order. The sort pins the float
/// summation order of every entropy to the mass multiset alone, making
/// results independent of atom labeling.
fn atom_masses(sample: &WeightedSample, p: &Partition) -> Result<Vec<f64>, PartitionError> {
    check_sample(sample, p)?;
    let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
    for (point, &atom) in p.atom_of.iter().enumerate() {
        *acc.entry(atom).or_insert(0.0) += sample.mass(point);
    }
    let mut masses: Vec<f64> = acc.into_values().filter(|&m| m > 0.0).collect();
    masses.sort_by(f64::total_cmp);
    Ok(masses)
}

fn entropy_of_masses(masses: &[f64]) -> f64 {
    -masses.iter().map(|&m| m * m.ln()).sum::<f64>()
}

/// `H(P) = -Σ μ(P_i) ln μ(P_i)`, with `0 ln 0 = 0`.
pub fn shannon_entropy(sample: &WeightedSample, p: &Partition) -> Result<f64, PartitionError> {
    Ok(entropy_of_masses(&atom_masses(sample, p)?))
}

/// The common refinement: points share an atom exactly when they share
/// atoms in both arguments.
pub fn join(p: &Partition, q: &Partition) -> Result<Partition, PartitionError> {
    if p.atom_of.len() != q.atom_of.len() {
        return Err(PartitionError::SampleMismatch {
            partition: p.atom_of.len(),
            sample: q.atom_of.len(),
        });
    }
    let mut ids: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    let atom_of = p
        .atom_of
        .iter()
        .zip(&q.atom_of)
        .map(|(&a, &b)| {
            let next = ids.len() as u32;
            *ids.entry((a, b)).or_insert(next)
        })
        .collect();
    Ok(Partition { atom_of })
}

/// `H(P|Q) = H(P∨Q) - H(Q)`, clamped at 0 against rounding.
pub fn conditional_entropy(
    sample: &WeightedSample,
    p: &Partition,
    q: &Partition,
) -> Result<f64, PartitionError> {
    let joint = shannon_entropy(sample, &join(p, q)?)?;
    let hq = shannon_entropy(sample, q)?;
    Ok((joint - hq).max(0.0))
}

/// The Rohlin metric `d(P,Q) = H(P|Q) + H(Q|P)`, evaluated as
/// `2H(P∨Q) - H(P) - H(Q)` so both orientations share every intermediate
/// term: the result is exactly symmetric, not merely up to rounding.
pub fn rohlin_distance(
    sample: &WeightedSample,
    p: &Partition,
    q: &Partition,
) -> Result<f64, PartitionError> {
    let joint = shannon_entropy(sample, &join(p, q)?)?;
    let hp = shannon_entropy(sample, p)?;
    let hq = shannon_entropy(sample, q)?;
    Ok((2.0 * joint - (hp + hq)).max(0.0))
}

/// Keeps atoms with index below `n` and merges everything else into the
/// single atom `n`.
pub fn truncate(p: &Partition, n: u32) -> Partition {
    Partition { atom_of: p.atom_of.iter().map(|&a| a.min(n)).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn entropy_fixtures() {
        let four = WeightedSample::uniform(4).unwrap();
        assert_eq!(shannon_entropy(&four, &Partition::trivial(4)).unwrap(), 0.0);

        let halves = Partition::new(vec![0, 0, 1, 1]);
        assert!((shannon_entropy(&four, &halves).unwrap() - LN2).abs() <= 1e-12);

        let weighted = WeightedSample::from_masses(vec![0.5, 0.25, 0.25]).unwrap();
        let h = shannon_entropy(&weighted, &Partition::discrete(3)).unwrap();
        assert!((h - 1.5 * LN2).abs() <= 1e-12);
    }

    #[test]
    fn conditional_fixtures() {
        let four = WeightedSample::uniform(4).unwrap();
        let p = Partition::new(vec![0, 0, 1, 1]);
        let q = Partition::new(vec![0, 1, 0, 1]);

        assert_eq!(conditional_entropy(&four, &p, &p).unwrap(), 0.0);

        let h_given_trivial = conditional_entropy(&four, &p, &Partition::trivial(4)).unwrap();
        assert_eq!(h_given_trivial, shannon_entropy(&four, &p).unwrap());

        // independent halves: conditioning tells nothing
        let h = conditional_entropy(&four, &p, &q).unwrap();
        assert!((h - LN2).abs() <= 1e-12);
    }

    #[test]
    fn metric_fixtures() {
        let four = WeightedSample::uniform(4).unwrap();
        let p = Partition::new(vec![0, 0, 1, 1]);
        assert_eq!(rohlin_distance(&four, &p, &p).unwrap(), 0.0);

        let d = rohlin_distance(&four, &p, &Partition::trivial(4)).unwrap();
        assert!((d - LN2).abs() <= 1e-12);

        // relabeled atoms describe the same partition
        let relabeled = Partition::new(vec![7, 7, 3, 3]);
        assert_eq!(rohlin_distance(&four, &p, &relabeled).unwrap(), 0.0);

        // mass-zero points cannot separate partitions
        let padded =
            WeightedSample::from_masses(vec![0.25, 0.25, 0.25, 0.25, 0.0]).unwrap();
        let a = Partition::new(vec![0, 0, 1, 1, 0]);
        let b = Partition::new(vec![0, 0, 1, 1, 1]);
        assert_eq!(rohlin_distance(&padded, &a, &b).unwrap(), 0.0);

        assert!(matches!(
            rohlin_distance(&four, &p, &Partition::trivial(5)),
            Err(PartitionError::SampleMismatch { .. })
        ));
    }

    #[test]
    fn validation() {
        assert!(matches!(
            WeightedSample::from_masses(vec![0.5, 0.6]),
            Err(PartitionError::BadTotalMass { .. })
        ));
        assert!(matches!(
            WeightedSample::from_masses(vec![1.5, -0.5]),
            Err(PartitionError::NegativeMass { point: 1, .. })
        ));
        assert!(matches!(
            WeightedSample::from_masses(vec![]),
            Err(PartitionError::EmptySample)
        ));
    }

    /// Geometric masses 2^-1 … 2^-39 plus a final balancing 2^-39: exact
    /// total 1, so the tail after atom n has mass exactly 2^-n.
    fn geometric() -> (WeightedSample, Partition) {
        let mut masses: Vec<f64> = (1..=39).map(|k| (2.0f64).powi(-k)).collect();
        masses.push((2.0f64).powi(-39));
        let n = masses.len();
        (WeightedSample::from_masses(masses).unwrap(), Partition::discrete(n))
    }

    #[test]
    fn truncation_converges_on_the_geometric_fixture() {
        let (sample, p) = geometric();
        let mut prev = f64::INFINITY;
        for n in 1..=38u32 {
            let d = rohlin_distance(&sample, &truncate(&p, n), &p).unwrap();
            assert!(d < prev, "n={n}");
            // closed form: the tail of mass 2^-n contributes 2^{-n}·2 ln 2,
            // minus the fixture's duplicate-last-atom correction 43 ln2/2^39
            if n <= 30 {
                let expected = (2.0f64).powi(-(n as i32)) * 2.0 * LN2;
                assert!((d - expected).abs() <= 1e-9, "n={n}");
            }
            if (2.0f64).powi(-(n as i32)) < 1e-4 {
                assert!(d < 1e-3, "n={n}");
            }
            prev = d;
        }
        // all 40 atoms have index < 40: truncation is the identity there
        let d = rohlin_distance(&sample, &truncate(&p, 40), &p).unwrap();
        assert_eq!(d, 0.0);
    }

    fn random_case(rng: &mut ChaCha8Rng, points: usize) -> (WeightedSample, Vec<Partition>) {
        let raw: Vec<f64> = (0..points).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut masses: Vec<f64> = raw.iter().map(|m| m / total).collect();
        // pin the sum to 1 exactly enough for the tolerance check
        let correction: f64 = 1.0 - masses.iter().sum::<f64>();
        masses[0] += correction;
        let sample = WeightedSample::from_masses(masses).unwrap();
        let parts = (0..3)
            .map(|_| Partition::new((0..points).map(|_| rng.gen_range(0..4u32)).collect()))
            .collect();
        (sample, parts)
    }

    #[test]
    fn metric_and_entropy_laws_on_random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let points = rng.gen_range(1..12);
            let (sample, parts) = random_case(&mut rng, points);
            let (p, q, r) = (&parts[0], &parts[1], &parts[2]);

            let hp = shannon_entropy(&sample, p).unwrap();
            let hq = shannon_entropy(&sample, q).unwrap();
            let hj = shannon_entropy(&sample, &join(p, q).unwrap()).unwrap();
            let dpq = rohlin_distance(&sample, p, q).unwrap();
            let dqr = rohlin_distance(&sample, q, r).unwrap();
            let dpr = rohlin_distance(&sample, p, r).unwrap();

            // exact symmetry, to the bit
            let dqp = rohlin_distance(&sample, q, p).unwrap();
            assert_eq!(dpq.to_bits(), dqp.to_bits());

            assert!(hj <= hp + hq + 1e-12);
            assert!(conditional_entropy(&sample, p, q).unwrap() <= hp + 1e-12);
            assert!((hp - hq).abs() <= dpq + 1e-12);
            assert!(dpr <= dpq + dqr + 1e-12, "triangle inequality");
        }
    }
}
