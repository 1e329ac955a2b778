use serde::{Deserialize, Serialize};

use super::QuasimodeError;

/// Fits with a larger maximum log-deviation are flagged unreliable.
pub const RELIABLE_RESIDUAL: f64 = 0.5;
pub const MIN_FIT_POINTS: usize = 4;

/// Least-squares power law `norm ~ C h^s` on a ladder of `h` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted `s`; `+inf` when the data vanish identically or underflow at
    /// the small-`h` end (decay faster than any fitted power).
    #[serde(with = "crate::quasimode::fit::float_or_string")]
    pub exponent: f64,
    /// Max absolute deviation of `log(norm)` from the fitted line.
    pub residual: f64,
    pub reliable: bool,
    pub h: Vec<f64>,
    pub norms: Vec<f64>,
}

impl DecayFit {
    pub fn is_superpolynomial(&self) -> bool {
        self.exponent == f64::INFINITY
    }
}

/// Fits `log(norm)` against `log(h)`.
///
/// Zero norms are allowed: all-zero data and data whose zeros form the
/// small-`h` tail report `exponent = +inf`. Otherwise zeros are skipped and
/// the fit is flagged unreliable.
pub fn fit_decay_exponent(h: &[f64], norms: &[f64]) -> Result<DecayFit, QuasimodeError> {
    if norms.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(QuasimodeError::Fit("norms must be finite and nonnegative".into()));
    }
    let logs: Vec<f64> = norms.iter().map(|x| x.ln()).collect();
    fit_log_decay(h, &logs, norms.to_vec())
}

/// Same fit with `log(norm)` supplied directly (`-inf` for zero), so that
/// values far below the floating-point range can be fitted.
pub fn fit_log_decay(h: &[f64], log_norms: &[f64], norms: Vec<f64>) -> Result<DecayFit, QuasimodeError> {
    if h.len() != log_norms.len() {
        return Err(QuasimodeError::Fit(format!(
            "{} ladder points but {} norms",
            h.len(),
            log_norms.len()
        )));
    }
    if h.len() < MIN_FIT_POINTS {
        return Err(QuasimodeError::Fit(format!(
            "need at least {MIN_FIT_POINTS} ladder points, got {}",
            h.len()
        )));
    }
    if h.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(QuasimodeError::Fit("ladder values must be positive".into()));
    }
    if log_norms.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(QuasimodeError::Fit("invalid norm".into()));
    }
    let finite: Vec<usize> = (0..h.len()).filter(|&i| log_norms[i].is_finite()).collect();
    let superpoly = DecayFit {
        exponent: f64::INFINITY,
        residual: 0.0,
        reliable: true,
        h: h.to_vec(),
        norms: norms.clone(),
    };
    if finite.is_empty() {
        return Ok(superpoly);
    }
    // order by decreasing h; a vanishing tail means decay beyond any power
    let mut order: Vec<usize> = (0..h.len()).collect();
    order.sort_by(|&a, &b| h[b].total_cmp(&h[a]));
    let first_zero = order.iter().position(|&i| !log_norms[i].is_finite());
    let zero_tail = first_zero.is_some_and(|p| order[p..].iter().all(|&i| !log_norms[i].is_finite()));
    if zero_tail {
        return Ok(superpoly);
    }
    if finite.len() < 2 {
        return Ok(DecayFit {
            reliable: false,
            ..superpoly
        });
    }
    let xs: Vec<f64> = finite.iter().map(|&i| h[i].ln()).collect();
    let ys: Vec<f64> = finite.iter().map(|&i| log_norms[i]).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(QuasimodeError::Fit("ladder has a single distinct value".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (my + slope * (x - mx))).abs())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        exponent: slope,
        residual,
        reliable: residual <= RELIABLE_RESIDUAL && finite.len() == h.len(),
        h: h.to_vec(),
        norms,
    })
}

/// `h = 2^-j` for `j` in `first..=last`.
pub fn dyadic_ladder(first: u32, last: u32) -> Vec<f64> {
    (first..=last).map(|j| 2f64.powi(-(j as i32))).collect()
}

/// JSON has no infinities; `+inf` is written as the string `"inf"`.
pub(crate) mod float_or_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else if *x < 0.0 {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            F(f64),
            S(String),
        }
        match Repr::deserialize(d)? {
            Repr::F(x) => Ok(x),
            Repr::S(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(serde::de::Error::custom(format!("bad float {s:?}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let h = dyadic_ladder(4, 12);
        let norms: Vec<f64> = h.iter().map(|x| x * x).collect();
        let f = fit_decay_exponent(&h, &norms).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        assert!(f.reliable);
    }

    #[test]
    fn prefactor_does_not_matter() {
        let h = dyadic_ladder(4, 12);
        let norms: Vec<f64> = h.iter().map(|x| 3.0 * x.powf(2.5)).collect();
        let f = fit_decay_exponent(&h, &norms).unwrap();
        assert!((f.exponent - 2.5).abs() < 1e-9);
    }

    #[test]
    fn perturbed_power_law() {
        // least-squares slope of log(h^2 (1 + h)) on 2^-4..2^-12 is 2.00883 (numpy polyfit)
        let h = dyadic_ladder(4, 12);
        let norms: Vec<f64> = h.iter().map(|x| x * x * (1.0 + x)).collect();
        let f = fit_decay_exponent(&h, &norms).unwrap();
        assert!((2.0..=2.1).contains(&f.exponent), "{}", f.exponent);
        assert!((f.exponent - 2.00883073).abs() < 1e-7);
    }

    #[test]
    fn zeros() {
        let h = dyadic_ladder(4, 9);
        let f = fit_decay_exponent(&h, &[0.0; 6]).unwrap();
        assert!(f.is_superpolynomial());
        let tail = [1e-3, 1e-9, 1e-30, 0.0, 0.0, 0.0];
        assert!(fit_decay_exponent(&h, &tail).unwrap().is_superpolynomial());
        let holes = [1e-3, 0.0, 1e-5, 1e-6, 1e-7, 1e-8];
        let f = fit_decay_exponent(&h, &holes).unwrap();
        assert!(f.exponent.is_finite() && !f.reliable);
    }

    #[test]
    fn too_few_points() {
        assert!(fit_decay_exponent(&[0.5, 0.25, 0.125], &[1.0, 1.0, 1.0]).is_err());
        assert!(fit_decay_exponent(&dyadic_ladder(1, 4), &[1.0, -1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn infinite_exponent_serializes_as_string() {
        let f = fit_decay_exponent(&dyadic_ladder(4, 7), &[0.0; 4]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains(r#""exponent":"inf""#));
        let back: DecayFit = serde_json::from_str(&s).unwrap();
        assert!(back.is_superpolynomial());
    }
}
