//! Small numeric helpers: trig in units of pi (exact at half-turns) and the
//! C2 smooth step used by the trajectory builders.

use std::f64::consts::PI;

/// sin(pi * y), exact zero at integer y.
///
/// Plain `(PI * y).sin()` is off by ~1e-16 at y = 1, 2, ... because pi is not
/// representable; pulse endpoint conditions need the exact zero.
pub fn sin_pi(y: f64) -> f64 {
    if !y.is_finite() {
        return f64::NAN;
    }
    let r = y.rem_euclid(2.0);
    if r == 0.0 || r == 1.0 {
        return 0.0;
    }
    if r < 0.5 {
        (PI * r).sin()
    } else if r < 1.0 {
        (PI * (1.0 - r)).sin()
    } else if r < 1.5 {
        -(PI * (r - 1.0)).sin()
    } else {
        -(PI * (2.0 - r)).sin()
    }
}

/// cos(pi * y), exact +-1 at integer y and exact zero at half-integer y.
pub fn cos_pi(y: f64) -> f64 {
    if !y.is_finite() {
        return f64::NAN;
    }
    let r = y.rem_euclid(2.0);
    if r == 0.0 {
        return 1.0;
    }
    if r == 1.0 {
        return -1.0;
    }
    if r == 0.5 || r == 1.5 {
        return 0.0;
    }
    if r < 0.5 {
        (PI * r).cos()
    } else if r < 1.0 {
        -(PI * (1.0 - r)).cos()
    } else if r < 1.5 {
        -(PI * (r - 1.0)).cos()
    } else {
        (PI * (2.0 - r)).cos()
    }
}

/// S(x) = x - sin(2 pi x) / (2 pi) on [0, 1], without the domain check.
///
/// S(0) = 0 and S(1) = 1 exactly; S' and S'' vanish at both ends.
pub fn smooth_step_unchecked(x: f64) -> f64 {
    x - sin_pi(2.0 * x) / (2.0 * PI)
}

/// S'(x) = 1 - cos(2 pi x).
pub fn smooth_step_deriv(x: f64) -> f64 {
    1.0 - cos_pi(2.0 * x)
}

/// S''(x) = 2 pi sin(2 pi x).
pub fn smooth_step_deriv2(x: f64) -> f64 {
    2.0 * PI * sin_pi(2.0 * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_pi_exact_at_integers() {
        for y in [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 100.0] {
            assert_eq!(sin_pi(y), 0.0, "sin_pi({y})");
        }
        assert_eq!(sin_pi(0.5), 1.0);
        assert_eq!(sin_pi(1.5), -1.0);
        assert!((sin_pi(0.25) - (PI * 0.25).sin()).abs() < 1e-16);
        assert!((sin_pi(-0.25) + (PI * 0.25).sin()).abs() < 1e-16);
    }

    #[test]
    fn cos_pi_exact_at_half_turns() {
        assert_eq!(cos_pi(0.0), 1.0);
        assert_eq!(cos_pi(1.0), -1.0);
        assert_eq!(cos_pi(2.0), 1.0);
        assert_eq!(cos_pi(0.5), 0.0);
        assert_eq!(cos_pi(-0.5), 0.0);
        assert_eq!(cos_pi(-1.0), -1.0);
        assert!((cos_pi(0.3) - (PI * 0.3).cos()).abs() < 1e-16);
    }

    #[test]
    fn sin_cos_pi_match_libm_away_from_special_points() {
        for k in 1..200 {
            let y = -3.0 + 6.0 * (k as f64) / 200.0 + 1e-3;
            assert!((sin_pi(y) - (PI * y).sin()).abs() < 1e-14, "y = {y}");
            assert!((cos_pi(y) - (PI * y).cos()).abs() < 1e-14, "y = {y}");
        }
    }

    #[test]
    fn smooth_step_endpoints_exact() {
        assert_eq!(smooth_step_unchecked(0.0), 0.0);
        assert_eq!(smooth_step_unchecked(1.0), 1.0);
        assert_eq!(smooth_step_unchecked(0.5), 0.5);
        assert_eq!(smooth_step_deriv(0.0), 0.0);
        assert_eq!(smooth_step_deriv(1.0), 0.0);
        assert_eq!(smooth_step_deriv2(0.0), 0.0);
        assert_eq!(smooth_step_deriv2(1.0), 0.0);
    }
}
