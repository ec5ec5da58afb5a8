//! Population mean and standard deviation, shared by image patch
//! normalisation and difference-matrix enhancement so both use the same
//! variance convention.

use crate::Scalar;

/// Mean and population standard deviation of `values`.
///
/// Returns a zero deviation when every value is identical, so callers can
/// rely on `std == 0` to detect flat inputs even when the mean is not
/// exactly representable.
pub fn mean_std<T: Scalar>(values: &[T]) -> (T, T) {
    if values.is_empty() {
        return (T::zero(), T::zero());
    }
    let count = T::of_usize(values.len());
    let mean = values.iter().copied().sum::<T>() / count;
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return (first, T::zero());
    }
    let var = values
        .iter()
        .map(|&v| {
            let d = v - mean;
            d * d
        })
        .sum::<T>()
        / count;
    (mean, var.sqrt())
}

/// Z-score `value` against `(mean, std)`, mapping zero deviation to 0.
pub fn z_score<T: Scalar>(value: T, mean: T, std: T) -> T {
    if std == T::zero() {
        T::zero()
    } else {
        (value - mean) / std
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_convention() {
        let (m, s) = mean_std(&[10.0_f64, 20.0, 10.0, 20.0]);
        assert_eq!(m, 15.0);
        assert_eq!(s, 5.0);
    }

    #[test]
    fn flat_input_has_zero_std() {
        let (_, s) = mean_std(&[0.1_f64; 7]);
        assert_eq!(s, 0.0);
        assert_eq!(z_score(0.1, 0.1, s), 0.0);
    }
}
