//! Central finite-difference check of analytic gradients, with dropout
//! noise frozen by replaying a forward tape.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{ForwardTape, GradientSet, MlpNetwork};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// `(tensor, element)` where the largest error occurred.
    pub worst: (usize, usize),
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub checked: usize,
}

/// `|a − n| / max(|a|, |n|, floor)`. The floor keeps round-off on
/// gradients that are zero in exact arithmetic from reading as large
/// relative errors.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `analytic` with `(L(θ + h e_i) − L(θ − h e_i)) / 2h` for every
/// trainable scalar, where `L(θ) = loss(net_θ, output)` and the output is
/// recomputed with the noise recorded in `tape`.
pub fn check_gradients<T, L>(
    net: &MlpNetwork<T>,
    batch: &Matrix<T>,
    tape: &ForwardTape<T>,
    analytic: &GradientSet<T>,
    h: f64,
    floor: f64,
    loss: L,
) -> Result<GradCheck>
where
    T: Scalar,
    L: Fn(&MlpNetwork<T>, &Matrix<T>) -> T,
{
    let shapes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let given: Vec<usize> = analytic.tensors.iter().map(Vec::len).collect();
    if shapes != given {
        return Err(Error::DimensionMismatch {
            expected: shapes.iter().sum(),
            got: given.iter().sum(),
        });
    }
    let mut probe = net.clone();
    let eval = |probe: &MlpNetwork<T>| -> Result<f64> {
        let (out, _) = probe.forward_replay(batch, tape)?;
        Ok(loss(probe, &out).as_f64())
    };
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        checked: 0,
    };
    for (t, &len) in shapes.iter().enumerate() {
        for i in 0..len {
            let orig = probe.params()[t][i];
            probe.params_mut()[t][i] = orig + T::lit(h);
            let plus = eval(&probe)?;
            probe.params_mut()[t][i] = orig - T::lit(h);
            let minus = eval(&probe)?;
            probe.params_mut()[t][i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.tensors[t][i].as_f64();
            let err = relative_error(a, numeric, floor);
            report.checked += 1;
            if err > report.max_rel_error || report.checked == 1 {
                report = GradCheck {
                    max_rel_error: err,
                    worst: (t, i),
                    analytic_at_worst: a,
                    numeric_at_worst: numeric,
                    checked: report.checked,
                };
            }
        }
    }
    Ok(report)
}
