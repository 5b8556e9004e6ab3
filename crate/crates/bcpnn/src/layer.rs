//! Modular layers: hypercolumns of competing minicolumns.
//!
//! A layer is a set of hypercolumns (HCs). Each HC represents one discrete
//! random variable and consists of `n_mc` minicolumns (MCs), one per value of
//! the variable. MC activities within a HC form a categorical distribution:
//! they lie in [0, 1] and sum to one.

use crate::error::{Error, Result};

/// Tolerance for the per-hypercolumn sum-to-one invariant.
pub const HC_SUM_TOL: f64 = 1e-9;

/// Shape of a modular layer: `n_hc` hypercolumns with `n_mc` minicolumns each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    n_hc: usize,
    n_mc: usize,
}

impl LayerSpec {
    pub fn new(n_hc: usize, n_mc: usize) -> Result<Self> {
        if n_hc < 1 {
            return Err(Error::invalid("n_hc", "must be >= 1"));
        }
        if n_mc < 2 {
            return Err(Error::invalid("n_mc", "must be >= 2"));
        }
        Ok(LayerSpec { n_hc, n_mc })
    }

    pub fn n_hc(&self) -> usize {
        self.n_hc
    }

    pub fn n_mc(&self) -> usize {
        self.n_mc
    }

    /// Total unit count, `n_hc * n_mc`.
    pub fn units(&self) -> usize {
        self.n_hc * self.n_mc
    }

    /// Flat unit index of minicolumn `mc` inside hypercolumn `hc`.
    pub fn unit(&self, hc: usize, mc: usize) -> usize {
        debug_assert!(hc < self.n_hc && mc < self.n_mc);
        hc * self.n_mc + mc
    }

    /// Flat index range of hypercolumn `hc`.
    pub fn hc_range(&self, hc: usize) -> std::ops::Range<usize> {
        let start = hc * self.n_mc;
        start..start + self.n_mc
    }
}

/// Activities of one modular layer, interpreted as per-HC categorical
/// probabilities: every entry lies in [0, 1] and each HC sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularLayer {
    spec: LayerSpec,
    activities: Vec<f64>,
}

impl ModularLayer {
    /// Layer with the uniform distribution `1/n_mc` in every hypercolumn.
    pub fn uniform(spec: LayerSpec) -> Self {
        ModularLayer {
            spec,
            activities: vec![1.0 / spec.n_mc() as f64; spec.units()],
        }
    }

    /// Builds a layer from raw activities, validating the invariants.
    pub fn from_activities(spec: LayerSpec, activities: Vec<f64>) -> Result<Self> {
        if activities.len() != spec.units() {
            return Err(Error::shape(format!(
                "layer expects {} activities, got {}",
                spec.units(),
                activities.len()
            )));
        }
        let layer = ModularLayer { spec, activities };
        layer.validate()?;
        Ok(layer)
    }

    /// Internal constructor for activities that are valid by construction
    /// (e.g. softmax output). Checked in debug builds.
    pub(crate) fn from_activities_unchecked(spec: LayerSpec, activities: Vec<f64>) -> Self {
        debug_assert_eq!(activities.len(), spec.units());
        let layer = ModularLayer { spec, activities };
        debug_assert!(layer.validate().is_ok());
        layer
    }

    pub fn spec(&self) -> LayerSpec {
        self.spec
    }

    pub fn activities(&self) -> &[f64] {
        &self.activities
    }

    /// Activities of hypercolumn `hc`.
    pub fn hc(&self, hc: usize) -> &[f64] {
        &self.activities[self.spec.hc_range(hc)]
    }

    /// Index of the most active minicolumn in hypercolumn `hc`; ties go to
    /// the lowest index.
    pub fn argmax(&self, hc: usize) -> usize {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (m, &v) in self.hc(hc).iter().enumerate() {
            if v > best_v {
                best_v = v;
                best = m;
            }
        }
        best
    }

    /// Checks the layer invariants: activities in [0, 1] and each HC summing
    /// to one within [`HC_SUM_TOL`].
    pub fn validate(&self) -> Result<()> {
        for (i, &a) in self.activities.iter().enumerate() {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::invalid(
                    "activities",
                    format!("unit {i} has activity {a}, outside [0,1]"),
                ));
            }
        }
        for hc in 0..self.spec.n_hc() {
            let sum: f64 = self.hc(hc).iter().sum();
            if (sum - 1.0).abs() > HC_SUM_TOL {
                return Err(Error::invalid(
                    "activities",
                    format!("hypercolumn {hc} sums to {sum}, expected 1"),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_rejects_degenerate_shapes() {
        assert!(LayerSpec::new(0, 2).is_err());
        assert!(LayerSpec::new(1, 1).is_err());
        let s = LayerSpec::new(3, 4).unwrap();
        assert_eq!(s.units(), 12);
        assert_eq!(s.unit(2, 3), 11);
        assert_eq!(s.hc_range(1), 4..8);
    }

    #[test]
    fn uniform_layer_is_valid() {
        let s = LayerSpec::new(5, 4).unwrap();
        let l = ModularLayer::uniform(s);
        l.validate().unwrap();
        assert!(l.activities().iter().all(|&a| a == 0.25));
    }

    #[test]
    fn from_activities_validates_sums() {
        let s = LayerSpec::new(1, 2).unwrap();
        assert!(ModularLayer::from_activities(s, vec![0.7, 0.3]).is_ok());
        assert!(ModularLayer::from_activities(s, vec![0.7, 0.4]).is_err());
        assert!(ModularLayer::from_activities(s, vec![1.2, -0.2]).is_err());
        assert!(ModularLayer::from_activities(s, vec![0.5]).is_err());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let s = LayerSpec::new(1, 4).unwrap();
        let l = ModularLayer::from_activities(s, vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        assert_eq!(l.argmax(0), 0);
    }
}
