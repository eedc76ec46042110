//! Linearized measurement matrices for angle-only state estimation.
//!
//! Measurements are all bus injections (dense bus order) followed by the
//! forward and reverse flow of each in-service branch (branch file order).
//! Columns are the non-slack bus angles. With zero resistance and unit voltage
//! magnitudes the flow on branch (i, j) is `sin(θi − θj) / x`, whose gradient
//! at the flat start is the familiar DC row `(+1/x, −1/x)`.

use std::fmt;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::matpower::GridCase;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowLabel {
    Injection { bus: u32 },
    FlowForward { branch: usize, from: u32, to: u32 },
    FlowReverse { branch: usize, from: u32, to: u32 },
}

impl fmt::Display for RowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowLabel::Injection { bus } => write!(f, "inj_{bus}"),
            RowLabel::FlowForward { from, to, .. } => write!(f, "flow_{from}_{to}"),
            RowLabel::FlowReverse { from, to, .. } => write!(f, "flow_{to}_{from}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix<T: Real = f64> {
    pub h: DMatrix<T>,
    pub row_labels: Vec<RowLabel>,
    /// External ids of the buses whose angles form the state vector.
    pub state_labels: Vec<u32>,
}

impl<T: Real> MeasurementMatrix<T> {
    pub fn m(&self) -> usize {
        self.h.nrows()
    }

    pub fn n(&self) -> usize {
        self.h.ncols()
    }

    /// `H Σ Hᵀ`, symmetrized after the product.
    pub fn signal_covariance(&self, sigma_xx: &DMatrix<T>) -> Result<DMatrix<T>> {
        crate::linalg::check_dims(sigma_xx, (self.n(), self.n()), "state covariance")?;
        let s = &self.h * sigma_xx * self.h.transpose();
        Ok(crate::linalg::symmetrize(&s))
    }

    /// Debug dump: one line per measurement, the label followed by n values.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header: Vec<String> = self.state_labels.iter().map(|b| format!("theta_{b}")).collect();
        writeln!(w, "measurement,{}", header.join(","))?;
        for (r, label) in self.row_labels.iter().enumerate() {
            let row: Vec<String> = self.h.row(r).iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{label},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Non-slack bus angles in radians; the slack angle is fixed at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint<T: Real = f64> {
    pub theta: DVector<T>,
}

impl<T: Real> OperatingPoint<T> {
    pub fn new(theta: DVector<T>) -> Result<Self> {
        if theta.iter().any(|v| !v.is_finite_value()) {
            return Err(Error::NonFinite("operating point"));
        }
        Ok(Self { theta })
    }

    /// The flat start, all angles zero.
    pub fn flat(n: usize) -> Self {
        Self {
            theta: DVector::zeros(n),
        }
    }
}

pub fn dc_jacobian<T: Real>(case: &GridCase) -> Result<MeasurementMatrix<T>> {
    assemble(case, None)
}

pub fn ac_jacobian_at<T: Real>(case: &GridCase, point: &OperatingPoint<T>) -> Result<MeasurementMatrix<T>> {
    if point.theta.len() != case.n_states() {
        return Err(Error::DimensionMismatch {
            context: "operating point",
            expected: (case.n_states(), 1),
            found: (point.theta.len(), 1),
        });
    }
    if point.theta.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::NonFinite("operating point"));
    }
    assemble(case, Some(&point.theta))
}

/// Adds an independent `N(0, sigma_delta_sq)` increment to every angle.
pub fn perturb_point<T: Real, R: Rng + ?Sized>(
    point: &OperatingPoint<T>,
    sigma_delta_sq: T,
    rng: &mut R,
) -> Result<OperatingPoint<T>> {
    if !(sigma_delta_sq >= T::zero()) || !sigma_delta_sq.is_finite_value() {
        return Err(Error::InvalidParameter {
            name: "sigma_delta_sq",
            value: sigma_delta_sq.as_f64(),
            reason: "variance must be finite and non-negative",
        });
    }
    if sigma_delta_sq == T::zero() {
        return Ok(point.clone());
    }
    let sd = sigma_delta_sq.sqrt();
    let theta = point.theta.map(|t| t + sd * T::std_normal(rng));
    Ok(OperatingPoint { theta })
}

fn assemble<T: Real>(case: &GridCase, theta: Option<&DVector<T>>) -> Result<MeasurementMatrix<T>> {
    let n_bus = case.n_bus();
    let n = case.n_states();
    let lines: Vec<_> = case.in_service_branches().collect();
    let m = n_bus + 2 * lines.len();

    let angle = |dense: usize| -> T {
        match (theta, case.state_column(dense)) {
            (Some(t), Some(c)) => t[c],
            _ => T::zero(),
        }
    };

    let mut h = DMatrix::zeros(m, n);
    let mut row_labels: Vec<RowLabel> = case.buses().iter().map(|b| RowLabel::Injection { bus: b.id }).collect();

    for (l, (k, br)) in lines.iter().enumerate() {
        if !(br.reactance > 0.0) {
            return Err(Error::NonPositiveReactance {
                branch: *k,
                x: br.reactance,
            });
        }
        let i = case.bus_index(br.from_bus).expect("validated endpoint");
        let j = case.bus_index(br.to_bus).expect("validated endpoint");
        let x = T::lit(br.reactance);
        let g = match theta {
            Some(_) => (angle(i) - angle(j)).cos() / x,
            None => T::one() / x,
        };
        let fwd = n_bus + 2 * l;
        let rev = fwd + 1;
        for (bus, sign) in [(i, T::one()), (j, -T::one())] {
            if let Some(c) = case.state_column(bus) {
                let v = sign * g;
                h[(fwd, c)] += v;
                h[(rev, c)] -= v;
                // injection at i is the forward flow, at j the reverse flow
                h[(i, c)] += v;
                h[(j, c)] -= v;
            }
        }
        row_labels.push(RowLabel::FlowForward {
            branch: *k,
            from: br.from_bus,
            to: br.to_bus,
        });
        row_labels.push(RowLabel::FlowReverse {
            branch: *k,
            from: br.from_bus,
            to: br.to_bus,
        });
    }

    Ok(MeasurementMatrix {
        h,
        row_labels,
        state_labels: case.state_bus_ids(),
    })
}
