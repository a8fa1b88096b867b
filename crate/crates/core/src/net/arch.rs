use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One same-padded, stride-1 convolution, optionally followed by ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kernel: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub relu: bool,
}

impl LayerSpec {
    pub fn conv(kernel: usize, in_ch: usize, out_ch: usize, relu: bool) -> Self {
        Self {
            kernel,
            in_ch,
            out_ch,
            relu,
        }
    }

    pub fn weight_count(&self) -> usize {
        self.kernel * self.kernel * self.in_ch * self.out_ch
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_ch
    }

    pub fn fan_in(&self) -> usize {
        self.kernel * self.kernel * self.in_ch
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub layers: Vec<LayerSpec>,
}

impl Architecture {
    /// conv3x3(1 -> 8), ReLU, conv3x3(8 -> 16), ReLU, conv1x1(16 -> classes).
    pub fn default_for(classes: usize) -> Self {
        Self::with_widths(8, 16, classes)
    }

    pub fn with_widths(first: usize, second: usize, classes: usize) -> Self {
        Self {
            layers: vec![
                LayerSpec::conv(3, 1, first, true),
                LayerSpec::conv(3, first, second, true),
                LayerSpec::conv(1, second, classes, false),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .layers
            .first()
            .ok_or_else(|| Error::invalid("architecture has no layers"))?;
        if first.in_ch != 1 {
            return Err(Error::invalid("first layer must take one input channel"));
        }
        for pair in self.layers.windows(2) {
            if pair[0].out_ch != pair[1].in_ch {
                return Err(Error::invalid("consecutive layer channel counts disagree"));
            }
        }
        for l in &self.layers {
            if l.kernel % 2 == 0 || l.kernel == 0 || l.in_ch == 0 || l.out_ch == 0 {
                return Err(Error::invalid(format!("invalid layer {l:?}")));
            }
        }
        if self.classes() < 2 {
            return Err(Error::invalid("classifier needs at least two classes"));
        }
        if self.layers.last().is_some_and(|l| l.relu) {
            return Err(Error::invalid("the logit layer cannot have a ReLU"));
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_ch)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Parameter range of each layer (weights then biases).
    pub fn layer_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.layers
            .iter()
            .map(|l| {
                let r = start..start + l.param_count();
                start = r.end;
                r
            })
            .collect()
    }

    pub(crate) fn weight_ranges(&self) -> Vec<Range<usize>> {
        self.layer_ranges()
            .into_iter()
            .zip(&self.layers)
            .map(|(r, l)| r.start..r.start + l.weight_count())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_param_count() {
        let a = Architecture::default_for(4);
        assert_eq!(a.param_count(), 80 + 1168 + 68);
        assert!(a.validate().is_ok());
        let r = a.layer_ranges();
        assert_eq!(r[2], 1248..1316);
    }

    #[test]
    fn rejects_broken_chain() {
        let mut a = Architecture::default_for(3);
        a.layers[1].in_ch = 4;
        assert!(a.validate().is_err());
    }
}
