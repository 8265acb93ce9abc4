//! Polynomial weights `v(z) = (1 + |z|)^s`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyWeight {
    pub s: f64,
}

impl PolyWeight {
    pub fn new(s: f64) -> Self {
        assert!(s >= 0.0 && s.is_finite(), "weight exponent must be >= 0");
        Self { s }
    }

    pub fn unit() -> Self {
        Self { s: 0.0 }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        if self.s == 0.0 {
            return 1.0;
        }
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        (1.0 + r).powf(self.s)
    }

    /// `M_v`: the maximum of `v` over the unit cube `[0,1]^n`.
    pub fn unit_cube_max(&self, n: usize) -> f64 {
        (1.0 + (n as f64).sqrt()).powf(self.s)
    }

    /// Per-axis majorant exponent: `v(z) <= prod_i (1 + |z_i|)^s`.
    pub fn axis_exponent(&self) -> f64 {
        self.s
    }
}
