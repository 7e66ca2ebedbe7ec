use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fixed-point resolution of composed RDP values (2^-60).
///
/// Per-step values are rounded up onto this grid and accumulated as integers,
/// so composition is associative and exactly additive. Sums saturate at
/// `i128::MAX`, which reads back as infinity.
const QUANTUM_BITS: i32 = 60;

fn quantize(v: f64) -> i128 {
    // Float-to-int casts saturate; infinity maps to i128::MAX.
    (v * 2f64.powi(QUANTUM_BITS)).ceil() as i128
}

fn dequantize(units: i128) -> f64 {
    if units == i128::MAX {
        f64::INFINITY
    } else {
        units as f64 / 2f64.powi(QUANTUM_BITS)
    }
}

/// Strictly increasing Rényi orders, each greater than 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid<F> {
    orders: Vec<F>,
}

impl<F: Scalar> AlphaGrid<F> {
    pub fn new(orders: Vec<F>) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::Empty("alpha grid"));
        }
        if orders.iter().any(|&a| !(a > F::one()) || !a.is_finite()) {
            return Err(Error::invalid("alpha", "every order must be finite and exceed 1"));
        }
        if orders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("alpha", "orders must be strictly increasing"));
        }
        Ok(AlphaGrid { orders })
    }

    /// Integers 2..=64 plus 128 and 256.
    pub fn default_orders() -> Self {
        let orders = (2..=64)
            .chain([128, 256])
            .map(F::from_count)
            .collect();
        AlphaGrid { orders }
    }

    pub fn orders(&self) -> &[F] {
        &self.orders
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }
}

/// Cumulative RDP per order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpCurve<F> {
    grid: AlphaGrid<F>,
    units: Vec<i128>,
}

impl<F: Scalar> RdpCurve<F> {
    pub fn zero(grid: AlphaGrid<F>) -> Self {
        let units = vec![0; grid.len()];
        RdpCurve { grid, units }
    }

    pub fn from_values(grid: AlphaGrid<F>, values: Vec<F>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|&v| !(v >= F::zero()) || !v.is_finite()) {
            return Err(Error::invalid("rdp", "values must be finite and nonnegative"));
        }
        let units = values.iter().map(|v| quantize(v.as_f64())).collect();
        Ok(RdpCurve { grid, units })
    }

    pub(crate) fn add_steps(&mut self, order_index: usize, per_step: F, steps: usize) {
        let added = quantize(per_step.as_f64()).saturating_mul(steps as i128);
        self.units[order_index] = self.units[order_index].saturating_add(added);
    }

    pub fn grid(&self) -> &AlphaGrid<F> {
        &self.grid
    }

    pub fn orders(&self) -> &[F] {
        self.grid.orders()
    }

    pub fn values(&self) -> Vec<F> {
        self.units.iter().map(|&u| F::lit(dequantize(u))).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (F, F)> + '_ {
        self.grid
            .orders()
            .iter()
            .zip(&self.units)
            .map(|(&a, &u)| (a, F::lit(dequantize(u))))
    }

    /// Pointwise sum; the grids must match.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::invalid("grid", "cannot compose curves over different orders"));
        }
        let units = self.units.iter().zip(&other.units).map(|(a, b)| a.saturating_add(*b)).collect();
        Ok(RdpCurve {
            grid: self.grid.clone(),
            units,
        })
    }

    /// `alpha,rdp` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,rdp\n");
        for (a, r) in self.iter() {
            out.push_str(&format!("{a},{r}\n"));
        }
        out
    }
}

/// An `(epsilon, delta)` guarantee and the order that achieved it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpend<F> {
    pub epsilon: F,
    pub delta: F,
    pub best_alpha: F,
}
