//! Radial bump profiles ρ: [0,∞) → [0,1].

/// C² quintic smoothstep on [0,1].
fn smoothstep(u: f64) -> (f64, f64) {
    let u = u.clamp(0.0, 1.0);
    let s = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    let ds = 30.0 * u * u * (1.0 - u) * (1.0 - u);
    (s, ds)
}

/// Maximum of S' on [0,1].
const SMOOTHSTEP_SLOPE: f64 = 1.875;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BumpShape {
    /// Transition uniform in log-radius: ρ = 1 − S(ln(w/c)/ln(1/c)).
    LogRadius,
    /// Transition uniform in radius: ρ = 1 − S((w − c)/(1 − c)).
    Linear,
}

impl BumpShape {
    pub fn name(&self) -> &'static str {
        match self {
            BumpShape::LogRadius => "log-radius",
            BumpShape::Linear => "linear",
        }
    }
}

/// ρ ≡ 1 on [0, core], ρ ≡ 0 on [1, ∞), monotone C² transition between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpProfile {
    shape: BumpShape,
    core: f64,
}

impl BumpProfile {
    pub fn new(shape: BumpShape, core: f64) -> Option<Self> {
        if core > 0.0 && core < 1.0 {
            Some(BumpProfile { shape, core })
        } else {
            None
        }
    }

    pub fn shape(&self) -> BumpShape {
        self.shape
    }

    pub fn core(&self) -> f64 {
        self.core
    }

    /// (ρ(w), ρ'(w)).
    pub fn eval(&self, w: f64) -> (f64, f64) {
        if w <= self.core {
            return (1.0, 0.0);
        }
        if w >= 1.0 {
            return (0.0, 0.0);
        }
        match self.shape {
            BumpShape::LogRadius => {
                let span = (1.0 / self.core).ln();
                let (s, ds) = smoothstep((w / self.core).ln() / span);
                (1.0 - s, -ds / (w * span))
            }
            BumpShape::Linear => {
                let span = 1.0 - self.core;
                let (s, ds) = smoothstep((w - self.core) / span);
                (1.0 - s, -ds / span)
            }
        }
    }

    pub fn value(&self, w: f64) -> f64 {
        self.eval(w).0
    }

    /// Upper bound for sup |w·ρ'(w)|.
    pub fn radial_slope_bound(&self) -> f64 {
        match self.shape {
            BumpShape::LogRadius => SMOOTHSTEP_SLOPE / (1.0 / self.core).ln(),
            BumpShape::Linear => SMOOTHSTEP_SLOPE / (1.0 - self.core),
        }
    }

    /// Upper bound for sup |ρ'|.
    pub fn slope_bound(&self) -> f64 {
        match self.shape {
            BumpShape::LogRadius => SMOOTHSTEP_SLOPE / (self.core * (1.0 / self.core).ln()),
            BumpShape::Linear => SMOOTHSTEP_SLOPE / (1.0 - self.core),
        }
    }

    /// Certified upper bound for sup_w w·ρ(w): grid maximum plus the
    /// Lipschitz slack of w ↦ wρ(w), whose derivative ρ + wρ' is bounded by
    /// 1 + sup|wρ'|.
    pub fn max_w_rho(&self) -> f64 {
        let n = 20_000;
        let h = 1.0 / n as f64;
        let mut best: f64 = 0.0;
        for i in 0..=n {
            let w = i as f64 * h;
            best = best.max(w * self.value(w));
        }
        best + 0.5 * h * (1.0 + self.radial_slope_bound())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_monotonicity() {
        for shape in [BumpShape::LogRadius, BumpShape::Linear] {
            let b = BumpProfile::new(shape, 0.01).unwrap();
            assert_eq!(b.value(0.0), 1.0);
            assert_eq!(b.value(0.01), 1.0);
            assert_eq!(b.value(1.0), 0.0);
            assert_eq!(b.value(3.0), 0.0);
            let mut prev = 1.0;
            for i in 0..=1000 {
                let v = b.value(i as f64 / 1000.0);
                assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for shape in [BumpShape::LogRadius, BumpShape::Linear] {
            let b = BumpProfile::new(shape, 0.05).unwrap();
            for i in 1..200 {
                let w = 0.05 + 0.95 * i as f64 / 200.0;
                let h = 1e-7;
                let fd = (b.value(w + h) - b.value(w - h)) / (2.0 * h);
                let (_, d) = b.eval(w);
                assert!((fd - d).abs() < 1e-5 * (1.0 + d.abs()), "{shape:?} w={w} fd={fd} d={d}");
            }
        }
    }

    #[test]
    fn slope_bounds_hold() {
        for shape in [BumpShape::LogRadius, BumpShape::Linear] {
            let b = BumpProfile::new(shape, 0.01).unwrap();
            for i in 0..=10_000 {
                let w = i as f64 / 10_000.0;
                let (_, d) = b.eval(w);
                assert!((w * d).abs() <= b.radial_slope_bound() + 1e-12);
                assert!(d.abs() <= b.slope_bound() + 1e-9);
            }
        }
    }

    #[test]
    fn certified_maximum_dominates_dense_samples() {
        let b = BumpProfile::new(BumpShape::LogRadius, 0.01).unwrap();
        let m = b.max_w_rho();
        for i in 0..=1_000_000 {
            let w = i as f64 / 1_000_000.0;
            assert!(w * b.value(w) <= m);
        }
    }
}
