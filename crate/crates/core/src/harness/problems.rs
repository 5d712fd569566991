use std::sync::Arc;

use crate::bsde::{BsdeProblem, ExactSolution};
use crate::error::{Error, Result};

pub const BUILTIN_PROBLEMS: &[&str] = &["example51", "zero_gen_linear", "zero_gen_square"];

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// `e^u / (e^u + 1)²`, the derivative of the logistic function.
fn logistic_slope(u: f64) -> f64 {
    let s = logistic(u);
    s * (1.0 - s)
}

/// Look up a registered problem by id.
///
/// - `example51`: `f(t, y) = -y³ + 2.5y² - 1.5y`, `φ(x) = e^{x+T}/(e^{x+T}+1)`, `T = 1`,
///   with exact solution `y = e^{x+t}/(e^{x+t}+1)`, `z = e^{x+t}/(e^{x+t}+1)²`.
/// - `zero_gen_linear`: `f ≡ 0`, `φ(x) = x`.
/// - `zero_gen_square`: `f ≡ 0`, `φ(x) = x²`.
pub fn builtin_problem(id: &str) -> Result<BsdeProblem> {
    let horizon = 1.0;
    let zero: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> = Arc::new(|_, _| 0.0);
    match id {
        "example51" => Ok(BsdeProblem {
            name: id.into(),
            f: Arc::new(|_, y| -y * y * y + 2.5 * y * y - 1.5 * y),
            f_y: Arc::new(|_, y| -3.0 * y * y + 5.0 * y - 1.5),
            phi: Arc::new(move |x| logistic(x + horizon)),
            phi_x: Arc::new(move |x| logistic_slope(x + horizon)),
            horizon,
            exact: Some(ExactSolution {
                y: Arc::new(|t, x| logistic(x + t)),
                z: Arc::new(|t, x| logistic_slope(x + t)),
            }),
        }),
        "zero_gen_linear" => Ok(BsdeProblem {
            name: id.into(),
            f: zero.clone(),
            f_y: zero,
            phi: Arc::new(|x| x),
            phi_x: Arc::new(|_| 1.0),
            horizon,
            exact: Some(ExactSolution { y: Arc::new(|_, x| x), z: Arc::new(|_, _| 1.0) }),
        }),
        "zero_gen_square" => Ok(BsdeProblem {
            name: id.into(),
            f: zero.clone(),
            f_y: zero,
            phi: Arc::new(|x| x * x),
            phi_x: Arc::new(|x| 2.0 * x),
            horizon,
            // E[(x + W_T - W_t)²] = x² + (T - t).
            exact: Some(ExactSolution {
                y: Arc::new(move |t, x| x * x + horizon - t),
                z: Arc::new(|_, x| 2.0 * x),
            }),
        }),
        other => Err(Error::UnknownProblem(other.into())),
    }
}
