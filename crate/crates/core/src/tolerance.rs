use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by every check.
///
/// The defaults are the values the certification reports are calibrated
/// against; problem files may override any subset of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Row satisfaction for LP points and cone membership.
    pub feasibility: f64,
    /// `|g_i(x)| <= activity` marks a constraint (or a box bound) active.
    pub activity: f64,
    /// Two vertices closer than this (max-norm) are the same vertex.
    pub vertex_dedup: f64,
    /// Relative symmetry defect allowed in a bilinear form.
    pub symmetry: f64,
    /// A unit direction with curvature below `-violation` is a violation.
    pub violation: f64,
    /// Slack granted when comparing an estimated coercivity constant.
    pub alpha: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-9,
            activity: 1e-8,
            vertex_dedup: 1e-8,
            symmetry: 1e-12,
            violation: 1e-7,
            alpha: 1e-6,
        }
    }
}
