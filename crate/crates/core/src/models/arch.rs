use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::LossKind;

/// The eight network wirings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Vanilla,
    Gwann,
    Gtwnn,
    GtwnnLs,
    GtwnnLst,
    Hdgtwnn,
    HdgtwnnLs,
    HdgtwnnLst,
}

/// Shape of the target block a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputShape {
    /// The target cell alone.
    Scalar,
    /// 3x3 neighbourhood at `t`.
    Spatial,
    /// 3x3x3 neighbourhood over `t-1, t, t+1`.
    Spatiotemporal,
}

impl OutputShape {
    pub fn width(self) -> usize {
        match self {
            OutputShape::Scalar => 1,
            OutputShape::Spatial => 9,
            OutputShape::Spatiotemporal => 27,
        }
    }

    pub fn center_index(self) -> usize {
        self.width() / 2
    }
}

impl ArchKind {
    pub const ALL: [ArchKind; 8] = [
        ArchKind::Vanilla,
        ArchKind::Gwann,
        ArchKind::Gtwnn,
        ArchKind::GtwnnLs,
        ArchKind::GtwnnLst,
        ArchKind::Hdgtwnn,
        ArchKind::HdgtwnnLs,
        ArchKind::HdgtwnnLst,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ArchKind::Vanilla => "vanilla",
            ArchKind::Gwann => "gwann",
            ArchKind::Gtwnn => "gtwnn",
            ArchKind::GtwnnLs => "gtwnn_ls",
            ArchKind::GtwnnLst => "gtwnn_lst",
            ArchKind::Hdgtwnn => "hdgtwnn",
            ArchKind::HdgtwnnLs => "hdgtwnn_ls",
            ArchKind::HdgtwnnLst => "hdgtwnn_lst",
        }
    }

    pub fn output_shape(self) -> OutputShape {
        use ArchKind::*;
        match self {
            Vanilla | Gtwnn | Hdgtwnn => OutputShape::Scalar,
            Gwann | GtwnnLs | HdgtwnnLs => OutputShape::Spatial,
            GtwnnLst | HdgtwnnLst => OutputShape::Spatiotemporal,
        }
    }

    /// Number of hidden-layer blocks in the wiring.
    pub fn n_blocks(self) -> usize {
        use ArchKind::*;
        match self {
            Vanilla | Gwann => 1,
            Gtwnn | GtwnnLs | GtwnnLst => 2,
            Hdgtwnn | HdgtwnnLs | HdgtwnnLst => 3,
        }
    }

    /// Whether the model multiplies influence factors with external factors.
    pub fn uses_external_factors(self) -> bool {
        self.n_blocks() > 1
    }

    pub fn is_history_dependent(self) -> bool {
        self.n_blocks() == 3
    }

    /// Permitted range of hidden layers per block.
    pub fn layer_range(self) -> (usize, usize) {
        if self.uses_external_factors() {
            (1, 3)
        } else {
            (1, 5)
        }
    }

    /// The loss this architecture is trained with, given bandwidths.
    pub fn default_loss(self, bandwidth_h: f64, bandwidth_ht: f64) -> LossKind {
        match self.output_shape() {
            OutputShape::Scalar => LossKind::PlainMse,
            OutputShape::Spatial => LossKind::SpatialWeighted { bandwidth_h },
            OutputShape::Spatiotemporal => LossKind::SpatiotemporalWeighted {
                bandwidth_h,
                bandwidth_ht,
            },
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ArchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ArchKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::UnknownArchitecture(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub kind: ArchKind,
    pub hidden_layers_per_block: usize,
    pub neurons_per_layer: Vec<usize>,
    /// Number of external-factor channels (crime types).
    pub n_types: usize,
}

impl ArchitectureSpec {
    pub fn new(kind: ArchKind, neurons_per_layer: Vec<usize>, n_types: usize) -> Self {
        ArchitectureSpec {
            kind,
            hidden_layers_per_block: neurons_per_layer.len(),
            neurons_per_layer,
            n_types,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.kind.layer_range();
        if !(lo..=hi).contains(&self.hidden_layers_per_block) {
            return Err(Error::InvalidParameter(format!(
                "{} takes {lo}..={hi} hidden layers per block, got {}",
                self.kind, self.hidden_layers_per_block
            )));
        }
        if self.neurons_per_layer.len() != self.hidden_layers_per_block {
            return Err(Error::InvalidParameter(
                "neurons_per_layer length must equal hidden_layers_per_block".into(),
            ));
        }
        if self.neurons_per_layer.contains(&0) {
            return Err(Error::InvalidParameter(
                "hidden layers need at least one neuron".into(),
            ));
        }
        if self.kind.uses_external_factors() && self.n_types == 0 {
            return Err(Error::InvalidParameter(format!(
                "{} needs at least one external factor",
                self.kind
            )));
        }
        Ok(())
    }

    /// Width of the influence-factor vector, `beta_0` included.
    pub fn beta_width(&self) -> usize {
        self.n_types + 1
    }

    /// Layer sizes of each block, input first.
    pub fn block_sizes(&self) -> Vec<Vec<usize>> {
        let stack = |input: usize, output: usize| {
            let mut s = vec![input];
            s.extend(&self.neurons_per_layer);
            s.push(output);
            s
        };
        let out = self.kind.output_shape().width();
        let beta = self.beta_width();
        match self.kind.n_blocks() {
            1 => vec![stack(3, out)],
            2 => vec![stack(3, beta), stack(beta, out)],
            _ => vec![stack(3, beta), stack(beta, beta), stack(beta, out)],
        }
    }

    pub fn n_params(&self) -> usize {
        self.block_sizes()
            .iter()
            .flat_map(|s| s.windows(2).map(|w| w[0] * w[1] + w[1]))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip_and_unknown_is_rejected() {
        for k in ArchKind::ALL {
            assert_eq!(k.tag().parse::<ArchKind>().unwrap(), k);
        }
        let err = "gtwnn_x".parse::<ArchKind>().unwrap_err().to_string();
        for k in ArchKind::ALL {
            assert!(err.contains(k.tag()));
        }
    }

    #[test]
    fn gtwnn_beta_block_width() {
        let spec = ArchitectureSpec::new(ArchKind::Gtwnn, vec![4], 2);
        assert_eq!(spec.block_sizes()[0], vec![3, 4, 3]);
    }

    #[test]
    fn gwann_predicts_nine_values() {
        let spec = ArchitectureSpec::new(ArchKind::Gwann, vec![4, 4], 2);
        assert_eq!(*spec.block_sizes()[0].last().unwrap(), 9);
    }

    #[test]
    fn history_module_adds_one_beta_to_beta_block() {
        // Symbolic count: the extra block maps beta (m) through the hidden
        // stack back to m, so it adds m*n1 + n1 + sum(n_i*n_{i+1} + n_{i+1}) + n_k*m + m.
        for (neurons, n_types) in [(vec![5], 2), (vec![3, 7], 4), (vec![2, 2, 9], 1)] {
            let m = n_types + 1;
            let mut extra = 0;
            let mut prev = m;
            for &n in &neurons {
                extra += prev * n + n;
                prev = n;
            }
            extra += prev * m + m;
            let g = ArchitectureSpec::new(ArchKind::Gtwnn, neurons.clone(), n_types);
            let h = ArchitectureSpec::new(ArchKind::Hdgtwnn, neurons, n_types);
            assert_eq!(h.n_params(), g.n_params() + extra);
        }
    }

    #[test]
    fn layer_ranges() {
        assert!(ArchitectureSpec::new(ArchKind::Vanilla, vec![3; 5], 0)
            .validate()
            .is_ok());
        assert!(ArchitectureSpec::new(ArchKind::Gtwnn, vec![3; 4], 2)
            .validate()
            .is_err());
        assert!(ArchitectureSpec::new(ArchKind::Gtwnn, vec![3], 0)
            .validate()
            .is_err());
        assert!(ArchitectureSpec::new(ArchKind::Gwann, vec![], 0)
            .validate()
            .is_err());
        let bad = ArchitectureSpec {
            hidden_layers_per_block: 2,
            ..ArchitectureSpec::new(ArchKind::Gwann, vec![3], 0)
        };
        assert!(bad.validate().is_err());
    }
}
