//! Mappings between the real line and the reference interval (-1, 1).
//!
//! Two one-parameter families are supported, selected by the integer
//! order `r`:
//!
//!   r = 0   h(y) = tanh(beta y)            (logarithmic map)
//!   r = 1   h(y) = beta y / sqrt(1 + beta^2 y^2)   (algebraic map)
//!
//! Both are odd, strictly increasing, and satisfy h(0) = 0. Their
//! derivative has the closed form dxi/dy = beta (1 - xi^2)^{1 + r/2}
//! when expressed in the image variable xi, which is the form the basis
//! evaluation needs.

use crate::error::{CoreError, Result};

fn check_r(r: u8) -> Result<()> {
    if r > 1 {
        return Err(CoreError::Unsupported(format!(
            "mapping order r = {r}, only 0 and 1 are implemented"
        )));
    }
    Ok(())
}

/// Forward map y -> xi in (-1, 1).
pub fn map_forward(beta: f64, r: u8, y: f64) -> Result<f64> {
    check_r(r)?;
    Ok(match r {
        0 => (beta * y).tanh(),
        _ => {
            let t = beta * y;
            t / (1.0 + t * t).sqrt()
        }
    })
}

/// Exact inverse of the forward map.
pub fn map_inverse(beta: f64, r: u8, xi: f64) -> Result<f64> {
    check_r(r)?;
    if xi.abs() >= 1.0 {
        return Err(CoreError::Domain {
            context: "map_inverse",
            message: format!("xi = {xi} outside (-1, 1)"),
        });
    }
    Ok(match r {
        0 => xi.atanh() / beta,
        _ => xi / (beta * (1.0 - xi * xi).sqrt()),
    })
}

/// The map derivative dxi/dy expressed in the image variable:
/// beta (1 - xi^2)^{1 + r/2}.
pub fn map_jacobian(beta: f64, r: u8, xi: f64) -> Result<f64> {
    check_r(r)?;
    if xi.abs() >= 1.0 {
        return Err(CoreError::Domain {
            context: "map_jacobian",
            message: format!("xi = {xi} outside (-1, 1)"),
        });
    }
    let one_m = 1.0 - xi * xi;
    Ok(match r {
        0 => beta * one_m,
        _ => beta * one_m * one_m.sqrt(),
    })
}
