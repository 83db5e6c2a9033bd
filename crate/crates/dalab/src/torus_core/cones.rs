//! Unstable and center-stable cone families in the adapted metric.

use super::{SplittingFrame, TorusError, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bundle {
    Unstable,
    CenterStable,
}

/// Constant-width cones around E^u and E^s.
#[derive(Clone, Debug)]
pub struct ConeField {
    frame: SplittingFrame,
    kappa_u: f64,
    kappa_cs: f64,
    transversal: Option<f64>,
}

impl ConeField {
    pub fn new(frame: SplittingFrame, kappa_u: f64, kappa_cs: f64) -> Result<Self, TorusError> {
        if !(kappa_u > 0.0 && kappa_cs > 0.0 && kappa_u * kappa_cs < 1.0) {
            return Err(TorusError::BadCones(kappa_u, kappa_cs));
        }
        Ok(ConeField { frame, kappa_u, kappa_cs, transversal: None })
    }

    /// Attach the transversal length constant L.
    pub fn with_transversal_length(mut self, l: f64) -> Self {
        self.transversal = Some(l);
        self
    }

    pub fn frame(&self) -> &SplittingFrame {
        &self.frame
    }

    pub fn kappa_u(&self) -> f64 {
        self.kappa_u
    }

    pub fn kappa_cs(&self) -> f64 {
        self.kappa_cs
    }

    pub fn transversal_length(&self) -> Option<f64> {
        self.transversal
    }

    /// (|Π_u v|, |Π_s v|) in the adapted metric.
    pub fn split_norms(&self, v: &Vec3) -> (f64, f64) {
        let c = self.frame.to_adapted(v);
        (c[0].abs(), (c[1] * c[1] + c[2] * c[2]).sqrt())
    }

    /// Width ratio |Π_s v| / |Π_u v| (infinite for stable vectors).
    pub fn unstable_width(&self, v: &Vec3) -> f64 {
        let (u, s) = self.split_norms(v);
        s / u
    }
}

/// Membership of v in the unstable or center-stable cone, with the signed
/// margin κ·|main part| − |transverse part|.
pub fn cone_membership(cones: &ConeField, bundle: Bundle, v: &Vec3) -> Result<(bool, f64), TorusError> {
    let (u, s) = cones.split_norms(v);
    if u == 0.0 && s == 0.0 {
        return Err(TorusError::ZeroVector);
    }
    let margin = match bundle {
        Bundle::Unstable => cones.kappa_u * u - s,
        Bundle::CenterStable => cones.kappa_cs * s - u,
    };
    Ok((margin >= 0.0, margin))
}
