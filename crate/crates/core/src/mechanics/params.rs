use crate::error::{Result, SudsError};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    LinearPassive,
    Pushmepullyou,
    Purcell3,
    Purcell9,
}

/// Spring/damper constants, one entry per passive joint in passive-index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassiveElementSet {
    #[serde(rename = "k")]
    pub stiffness: Vec<f64>,
    pub rest: Vec<f64>,
    #[serde(rename = "d")]
    pub damping: Vec<f64>,
}

impl PassiveElementSet {
    pub fn new(stiffness: Vec<f64>, rest: Vec<f64>, damping: Vec<f64>) -> Self {
        Self {
            stiffness,
            rest,
            damping,
        }
    }

    /// Undamped springs.
    pub fn springs(stiffness: Vec<f64>, rest: Vec<f64>) -> Self {
        let d = vec![0.0; stiffness.len()];
        Self::new(stiffness, rest, d)
    }

    pub fn len(&self) -> usize {
        self.stiffness.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stiffness.is_empty()
    }

    pub fn validate(&self, n_p: usize) -> Result<()> {
        if self.stiffness.len() != n_p || self.rest.len() != n_p || self.damping.len() != n_p {
            return Err(SudsError::Config(format!(
                "passive elements need {n_p} entries each (k: {}, rest: {}, d: {})",
                self.stiffness.len(),
                self.rest.len(),
                self.damping.len()
            )));
        }
        if self
            .stiffness
            .iter()
            .chain(&self.damping)
            .any(|&v| !(v >= 0.0) || !v.is_finite())
        {
            return Err(SudsError::Config("k and d must be finite and ≥ 0".into()));
        }
        if self.rest.iter().any(|v| !v.is_finite()) {
            return Err(SudsError::Config("rest values must be finite".into()));
        }
        Ok(())
    }
}

fn default_drag() -> f64 {
    1.0
}

fn default_ratio() -> f64 {
    2.0
}

/// Physical description of one swimmer. Loadable from TOML:
///
/// ```toml
/// variant = "purcell3"
/// link_length = 1.0
/// drag = 1.0
/// drag_ratio = 2.0
/// actuated = [0]
///
/// [passive]
/// k = [2.0]
/// rest = [0.0]
/// d = [0.0]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwimmerParams {
    pub variant: Variant,
    /// `L`, meters.
    pub link_length: f64,
    /// Payload stem length `l` (linear passive swimmer only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem_length: Option<f64>,
    /// Longitudinal drag `c` per unit length.
    #[serde(default = "default_drag")]
    pub drag: f64,
    /// Lateral-to-longitudinal drag ratio.
    #[serde(default = "default_ratio")]
    pub drag_ratio: f64,
    /// Number of links for chain variants; defaults to 3 / 9.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_links: Option<usize>,
    /// Actuated shape indices; the rest are passive.
    pub actuated: Vec<usize>,
    pub passive: PassiveElementSet,
}

impl SwimmerParams {
    pub fn linear_passive() -> Self {
        Self {
            variant: Variant::LinearPassive,
            link_length: 2.0,
            stem_length: Some(0.5),
            drag: 1.0,
            drag_ratio: 2.0,
            n_links: None,
            actuated: vec![1],
            passive: PassiveElementSet::springs(vec![1.0], vec![1.0]),
        }
    }

    pub fn pushmepullyou() -> Self {
        Self {
            variant: Variant::Pushmepullyou,
            link_length: 1.0,
            stem_length: None,
            drag: 1.0,
            drag_ratio: 2.0,
            n_links: None,
            actuated: vec![1],
            passive: PassiveElementSet::springs(vec![10.0], vec![PI / 2.0]),
        }
    }

    pub fn purcell3() -> Self {
        Self {
            variant: Variant::Purcell3,
            link_length: 1.0,
            stem_length: None,
            drag: 1.0,
            drag_ratio: 2.0,
            n_links: None,
            actuated: vec![0],
            passive: PassiveElementSet::springs(vec![2.0], vec![0.0]),
        }
    }

    pub fn purcell9() -> Self {
        Self {
            variant: Variant::Purcell9,
            link_length: 1.0,
            stem_length: None,
            drag: 1.0,
            drag_ratio: 2.0,
            n_links: None,
            actuated: vec![0, 1, 2, 3],
            passive: PassiveElementSet::springs(vec![20.0, 15.0, 10.0, 5.0], vec![0.0; 4]),
        }
    }

    pub fn preset(variant: Variant) -> Self {
        match variant {
            Variant::LinearPassive => Self::linear_passive(),
            Variant::Pushmepullyou => Self::pushmepullyou(),
            Variant::Purcell3 => Self::purcell3(),
            Variant::Purcell9 => Self::purcell9(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let p: Self = toml::from_str(text).map_err(|e| SudsError::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn link_count(&self) -> usize {
        match self.variant {
            Variant::Purcell3 => self.n_links.unwrap_or(3),
            Variant::Purcell9 => self.n_links.unwrap_or(9),
            _ => 0,
        }
    }

    /// Number of shape coordinates implied by the variant.
    pub fn n_shape(&self) -> usize {
        match self.variant {
            Variant::LinearPassive | Variant::Pushmepullyou => 2,
            Variant::Purcell3 | Variant::Purcell9 => self.link_count().saturating_sub(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.link_length > 0.0) || !self.link_length.is_finite() {
            return Err(SudsError::Config("link length L must be > 0".into()));
        }
        if !(self.drag > 0.0) || !self.drag.is_finite() {
            return Err(SudsError::Config("drag coefficient c must be > 0".into()));
        }
        if !(self.drag_ratio >= 1.0) || !self.drag_ratio.is_finite() {
            return Err(SudsError::Config("drag ratio must be ≥ 1".into()));
        }
        if let Some(l) = self.stem_length {
            if !(l > 0.0) {
                return Err(SudsError::Config("stem length l must be > 0".into()));
            }
        }
        let n = self.n_shape();
        if self.actuated.iter().any(|&i| i >= n) {
            return Err(SudsError::Config(format!(
                "actuated indices {:?} out of range for {n} shape coordinates",
                self.actuated
            )));
        }
        self.passive.validate(n - self.actuated.len().min(n))
    }
}
