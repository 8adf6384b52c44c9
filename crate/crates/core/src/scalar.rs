//! The floating-point scalar every field and solver is generic over.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};
use rustfft::{Fft, FftNum, FftPlanner};

/// In-place complex FFT along one line of samples (unnormalized).
pub trait LineTransform<T>: Send + Sync {
    fn process(&self, buffer: &mut [Complex<T>]);
}

struct Planned<T: FftNum>(Arc<dyn Fft<T>>);

impl<T: FftNum> LineTransform<T> for Planned<T> {
    fn process(&self, buffer: &mut [Complex<T>]) {
        self.0.process(buffer);
    }
}

fn plan<T: FftNum>(len: usize, inverse: bool) -> Arc<dyn LineTransform<T>> {
    let mut planner = FftPlanner::<T>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    };
    Arc::new(Planned(fft))
}

/// Real scalar type (implemented for `f32` and `f64`).
///
/// `FftNum` is deliberately not a supertrait: it drags in `Signed`, whose
/// `abs`/`signum` would collide with the `Float` methods in generic code.
pub trait Real:
    Float + FloatConst + FromPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Plans a complex FFT of the given length.
    fn line_fft(len: usize, inverse: bool) -> Arc<dyn LineTransform<Self>>;
}

impl Real for f32 {
    fn line_fft(len: usize, inverse: bool) -> Arc<dyn LineTransform<f32>> {
        plan(len, inverse)
    }
}

impl Real for f64 {
    fn line_fft(len: usize, inverse: bool) -> Arc<dyn LineTransform<f64>> {
        plan(len, inverse)
    }
}

/// Converts an `f64` constant into `T`.
#[inline]
pub fn cast<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant representable in target type")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in target type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), carry: T::zero() }
    }

    #[inline]
    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry = self.carry + ((self.sum - t) + v);
        } else {
            self.carry = self.carry + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

/// Compensated sum of an iterator.
pub fn accurate_sum<T: Real>(it: impl IntoIterator<Item = T>) -> T {
    let mut acc = CompensatedSum::new();
    for v in it {
        acc.add(v);
    }
    acc.value()
}
