//! Thin float helpers over `libm` so the crate stays `no_std`.

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Streaming log-sum-exp accumulator. Every term is stored relative to the
/// running maximum so the sum never overflows.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    shift: f64,
    sum: f64,
}

impl LogSumExp {
    pub(crate) fn new() -> Self {
        Self {
            shift: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    /// Adds `exp(x)` and returns the factor by which previously accumulated
    /// weights were rescaled, so callers can rescale companion sums.
    #[inline]
    pub(crate) fn push(&mut self, x: f64) -> (f64, f64) {
        if x > self.shift {
            let rescale = exp(self.shift - x);
            self.sum = self.sum * rescale + 1.0;
            self.shift = x;
            (rescale, 1.0)
        } else {
            let weight = exp(x - self.shift);
            self.sum += weight;
            (1.0, weight)
        }
    }

    pub(crate) fn sum(&self) -> f64 {
        self.sum
    }

    pub(crate) fn value(&self) -> f64 {
        self.shift + ln(self.sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let xs = [0.3, -1.2, 2.5, 0.0, 2.4];
        let mut acc = LogSumExp::new();
        for &x in &xs {
            acc.push(x);
        }
        let direct: f64 = xs.iter().map(|&x| exp(x)).sum();
        assert!((acc.value() - ln(direct)).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_survives_huge_exponents() {
        let mut acc = LogSumExp::new();
        acc.push(1000.0);
        acc.push(1000.0);
        assert!((acc.value() - (1000.0 + ln(2.0))).abs() < 1e-12);
    }

    #[test]
    fn ln_2pi_constant() {
        assert!((LN_2PI - ln(2.0 * core::f64::consts::PI)).abs() < 1e-15);
    }
}
