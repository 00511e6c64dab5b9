/// Exact entropy solution of a Burgers Riemann problem `u_t + (u^2/2)_x = 0`.
///
/// `left`/`right` are the constant states either side of `diaphragm`.
pub fn burgers_exact(left: f64, right: f64, diaphragm: f64, x: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return if x < diaphragm { left } else { right };
    }
    let xi = (x - diaphragm) / t;
    if left > right {
        let shock = 0.5 * (left + right);
        if xi < shock {
            left
        } else {
            right
        }
    } else if xi <= left {
        left
    } else if xi >= right {
        right
    } else {
        xi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_time_returns_data() {
        assert_eq!(burgers_exact(0.0, 1.0, 0.5, 0.2, 0.0), 0.0);
        assert_eq!(burgers_exact(0.0, 1.0, 0.5, 0.7, 0.0), 1.0);
    }

    #[test]
    fn rarefaction_fan() {
        // x/t = 0.5 with the diaphragm at the origin
        assert_eq!(burgers_exact(0.0, 1.0, 0.0, 0.1, 0.2), 0.5);
        assert_eq!(burgers_exact(0.0, 1.0, 0.0, -0.1, 0.2), 0.0);
        assert_eq!(burgers_exact(0.0, 1.0, 0.0, 0.3, 0.2), 1.0);
    }

    #[test]
    fn shock_moves_at_mean_speed() {
        assert_eq!(burgers_exact(1.0, 0.0, 0.0, 0.4, 1.0), 1.0);
        assert_eq!(burgers_exact(1.0, 0.0, 0.0, 0.6, 1.0), 0.0);
    }
}
