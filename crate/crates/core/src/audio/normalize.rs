use std::borrow::Borrow;

use crate::dataset::FoldRole;
use crate::error::{Error, Result};

use super::stft::{Spectrogram, CROP};

/// Element-wise training-set mean of cropped spectrograms.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSpectrogram(Spectrogram);

impl MeanSpectrogram {
    pub fn spectrogram(&self) -> &Spectrogram {
        &self.0
    }

    pub fn from_spectrogram(s: Spectrogram) -> Result<Self> {
        check_shape(&s)?;
        Ok(MeanSpectrogram(s))
    }
}

fn check_shape(s: &Spectrogram) -> Result<()> {
    if s.bins() != CROP || s.frames() != CROP {
        return Err(Error::Shape(format!(
            "expected {CROP}x{CROP} spectrogram, got {}x{}",
            s.bins(),
            s.frames()
        )));
    }
    Ok(())
}

/// Fits the mean over role-tagged spectrograms. Anything not tagged as
/// training data is refused, so validation and test folds can never
/// influence normalization.
pub fn fit_mean<I, S>(items: I) -> Result<MeanSpectrogram>
where
    I: IntoIterator<Item = (FoldRole, S)>,
    S: Borrow<Spectrogram>,
{
    let mut sum = vec![0.0; CROP * CROP];
    let mut count = 0usize;
    for (role, s) in items {
        if role != FoldRole::Train {
            return Err(Error::Leakage(format!(
                "mean fitting received a {role} example"
            )));
        }
        let s = s.borrow();
        check_shape(s)?;
        sum.iter_mut().zip(s.data()).for_each(|(a, &b)| *a += b);
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidArgument("mean of an empty training set".into()));
    }
    let n = count as f64;
    sum.iter_mut().for_each(|v| *v /= n);
    Ok(MeanSpectrogram(Spectrogram::new(sum, CROP, CROP)?))
}

pub fn apply_mean(s: &Spectrogram, mean: &MeanSpectrogram) -> Result<Spectrogram> {
    check_shape(s)?;
    let data = s.data().iter().zip(mean.0.data()).map(|(a, b)| a - b).collect();
    Spectrogram::new(data, CROP, CROP)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(f: impl Fn(usize) -> f64) -> Spectrogram {
        Spectrogram::new((0..CROP * CROP).map(f).collect(), CROP, CROP).unwrap()
    }

    #[test]
    fn single_element_mean_cancels() {
        let a = filled(|i| (i % 17) as f64 - 3.0);
        let m = fit_mean([(FoldRole::Train, &a)]).unwrap();
        assert!(apply_mean(&a, &m).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_element_mean() {
        let a = filled(|i| i as f64);
        let b = filled(|i| 2.0 * i as f64 + 1.0);
        let m = fit_mean([(FoldRole::Train, &a), (FoldRole::Train, &b)]).unwrap();
        for (i, &v) in m.spectrogram().data().iter().enumerate() {
            assert_eq!(v, (i as f64 + 2.0 * i as f64 + 1.0) / 2.0);
        }
    }

    #[test]
    fn validation_and_test_roles_are_refused() {
        let a = filled(|_| 1.0);
        for role in [FoldRole::Validation, FoldRole::Test] {
            let err = fit_mean([(FoldRole::Train, &a), (role, &a)]).unwrap_err();
            assert!(matches!(err, Error::Leakage(_)));
        }
    }

    #[test]
    fn shape_mismatch() {
        let small = Spectrogram::new(vec![0.0; 4], 2, 2).unwrap();
        assert!(fit_mean([(FoldRole::Train, &small)]).is_err());
        let m = fit_mean([(FoldRole::Train, &filled(|_| 0.0))]).unwrap();
        assert!(apply_mean(&small, &m).is_err());
    }
}
