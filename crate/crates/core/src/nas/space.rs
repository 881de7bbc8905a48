use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ArchKind;

/// Candidate lists larger than this are replaced by a seeded uniform sample
/// of this many distinct configurations.
pub const MAX_CANDIDATES: usize = 4096;

/// One point of the search space: a depth and the width of each hidden layer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub neurons: Vec<usize>,
}

impl Candidate {
    pub fn layers(&self) -> usize {
        self.neurons.len()
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.neurons.iter().map(|n| n.to_string()).collect();
        write!(f, "{}x[{}]", self.layers(), parts.join("-"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Inclusive.
    pub layers_range: (usize, usize),
    /// Inclusive.
    pub neurons_range: (usize, usize),
    /// Choose each hidden layer's width independently rather than one width
    /// shared by all layers.
    pub per_layer_neurons: bool,
}

impl SearchSpace {
    /// The depth range of `kind` with widths in [1, 15] chosen per layer.
    pub fn for_kind(kind: ArchKind) -> Self {
        SearchSpace {
            layers_range: kind.layer_range(),
            neurons_range: (1, 15),
            per_layer_neurons: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (l0, l1) = self.layers_range;
        let (n0, n1) = self.neurons_range;
        if l0 == 0 || l0 > l1 || n0 == 0 || n0 > n1 {
            return Err(Error::InvalidParameter(format!(
                "empty search space: layers {:?}, neurons {:?}",
                self.layers_range, self.neurons_range
            )));
        }
        Ok(())
    }

    pub fn validate_for(&self, kind: ArchKind) -> Result<()> {
        self.validate()?;
        let (lo, hi) = kind.layer_range();
        if self.layers_range.0 < lo || self.layers_range.1 > hi {
            return Err(Error::InvalidParameter(format!(
                "{kind} supports {lo} to {hi} hidden layers, search space asks for {:?}",
                self.layers_range
            )));
        }
        Ok(())
    }

    /// The same space restricted to one depth.
    pub fn at_depth(&self, layers: usize) -> Self {
        SearchSpace {
            layers_range: (layers, layers),
            ..self.clone()
        }
    }

    fn widths(&self) -> usize {
        self.neurons_range.1 - self.neurons_range.0 + 1
    }

    /// Number of distinct configurations, saturating.
    pub fn size(&self) -> usize {
        let w = self.widths();
        (self.layers_range.0..=self.layers_range.1)
            .map(|l| {
                if self.per_layer_neurons {
                    w.saturating_pow(l as u32)
                } else {
                    w
                }
            })
            .fold(0usize, usize::saturating_add)
    }

    /// Every configuration in a fixed order (depth, then widths
    /// lexicographically), or a seeded sample of `MAX_CANDIDATES` of them.
    pub fn candidates(&self, seed: u64) -> Vec<Candidate> {
        if self.size() > MAX_CANDIDATES {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = BTreeSet::new();
            while picked.len() < MAX_CANDIDATES {
                picked.insert(self.sample(&mut rng));
            }
            return picked.into_iter().collect();
        }
        let (n0, n1) = self.neurons_range;
        let mut out = Vec::with_capacity(self.size());
        for layers in self.layers_range.0..=self.layers_range.1 {
            if !self.per_layer_neurons {
                out.extend((n0..=n1).map(|n| Candidate {
                    neurons: vec![n; layers],
                }));
                continue;
            }
            let mut cur = vec![n0; layers];
            loop {
                out.push(Candidate {
                    neurons: cur.clone(),
                });
                let Some(i) = (0..layers).rev().find(|&i| cur[i] < n1) else {
                    break;
                };
                cur[i] += 1;
                cur[i + 1..].iter_mut().for_each(|v| *v = n0);
            }
        }
        out
    }

    /// A uniform draw over the full space.
    fn sample(&self, rng: &mut impl Rng) -> Candidate {
        let w = self.widths() as f64;
        let depths: Vec<usize> = (self.layers_range.0..=self.layers_range.1).collect();
        let weights: Vec<f64> = depths
            .iter()
            .map(|&l| {
                if self.per_layer_neurons {
                    w.powi(l as i32)
                } else {
                    w
                }
            })
            .collect();
        let mut u = rng.gen::<f64>() * weights.iter().sum::<f64>();
        let mut layers = depths[depths.len() - 1];
        for (&l, &wt) in depths.iter().zip(&weights) {
            if u < wt {
                layers = l;
                break;
            }
            u -= wt;
        }
        let (n0, n1) = self.neurons_range;
        if self.per_layer_neurons {
            Candidate {
                neurons: (0..layers).map(|_| rng.gen_range(n0..=n1)).collect(),
            }
        } else {
            Candidate {
                neurons: vec![rng.gen_range(n0..=n1); layers],
            }
        }
    }

    /// Coordinates in [0, 1]: normalized depth, then normalized widths with
    /// unused layers at 0.
    pub fn encode(&self, c: &Candidate) -> Vec<f64> {
        let norm = |v: usize, (lo, hi): (usize, usize)| {
            if hi == lo {
                0.0
            } else {
                (v - lo) as f64 / (hi - lo) as f64
            }
        };
        let mut x = vec![norm(c.layers(), self.layers_range)];
        if self.per_layer_neurons {
            x.extend((0..self.layers_range.1).map(|i| {
                c.neurons
                    .get(i)
                    .map_or(0.0, |&n| norm(n, self.neurons_range))
            }));
        } else {
            x.push(norm(c.neurons[0], self.neurons_range));
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_enumeration() {
        let s = SearchSpace {
            layers_range: (1, 5),
            neurons_range: (1, 15),
            per_layer_neurons: false,
        };
        assert_eq!(s.size(), 75);
        let c = s.candidates(0);
        assert_eq!(c.len(), 75);
        assert_eq!(c.iter().collect::<BTreeSet<_>>().len(), 75);

        let p = SearchSpace {
            layers_range: (1, 3),
            neurons_range: (1, 15),
            per_layer_neurons: true,
        };
        assert_eq!(p.size(), 15 + 225 + 3375);
        let c = p.candidates(0);
        assert_eq!(c.len(), p.size());
        assert_eq!(c.iter().collect::<BTreeSet<_>>().len(), p.size());
        assert_eq!(c[0].neurons, vec![1]);
        assert_eq!(c[15].neurons, vec![1, 1]);
        assert_eq!(c[16].neurons, vec![1, 2]);
    }

    #[test]
    fn huge_spaces_are_sampled() {
        let s = SearchSpace::for_kind(ArchKind::Vanilla);
        assert!(s.size() > MAX_CANDIDATES);
        let c = s.candidates(3);
        assert_eq!(c.len(), MAX_CANDIDATES);
        assert_eq!(c, s.candidates(3));
        assert!(c
            .iter()
            .all(|c| (1..=5).contains(&c.layers())
                && c.neurons.iter().all(|&n| (1..=15).contains(&n))));
    }

    #[test]
    fn validation() {
        assert!(SearchSpace {
            layers_range: (2, 1),
            neurons_range: (1, 15),
            per_layer_neurons: true
        }
        .validate()
        .is_err());
        assert!(SearchSpace::for_kind(ArchKind::Vanilla)
            .validate_for(ArchKind::Gtwnn)
            .is_err());
        assert!(SearchSpace::for_kind(ArchKind::Gtwnn)
            .validate_for(ArchKind::Vanilla)
            .is_ok());
    }

    #[test]
    fn encoding_pads_unused_layers() {
        let s = SearchSpace {
            layers_range: (1, 3),
            neurons_range: (1, 15),
            per_layer_neurons: true,
        };
        assert_eq!(
            s.encode(&Candidate { neurons: vec![15] }),
            vec![0.0, 1.0, 0.0, 0.0]
        );
        assert_eq!(
            s.encode(&Candidate {
                neurons: vec![1, 8, 15]
            }),
            vec![1.0, 0.0, 0.5, 1.0]
        );
    }
}
