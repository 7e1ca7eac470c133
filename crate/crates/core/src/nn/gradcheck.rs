//! Central finite differences for gradient checks.

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
/// Absolute slack for gradients that are zero up to rounding.
pub const FD_ABS_FLOOR: f64 = 1e-8;

pub fn central_difference<F: FnMut(f64) -> f64>(mut f: F, x0: f64) -> f64 {
    let up = f(x0 + FD_STEP);
    let down = f(x0 - FD_STEP);
    (up - down) / (2.0 * FD_STEP)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

pub fn grads_agree(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= FD_ABS_FLOOR || relative_error(analytic, numeric) <= FD_REL_TOL
}

#[track_caller]
pub fn assert_close_rel(analytic: f64, numeric: f64, what: &str) {
    assert!(
        grads_agree(analytic, numeric),
        "{what}: analytic {analytic} vs numeric {numeric} (rel {})",
        relative_error(analytic, numeric)
    );
}
