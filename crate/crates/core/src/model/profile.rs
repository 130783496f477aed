use alloc::sync::Arc;
use core::fmt;

/// A real-valued coefficient profile on `[0, 1]`.
#[derive(Clone)]
pub enum Profile {
    Constant(f64),
    /// `offset + slope * x`
    Affine {
        offset: f64,
        slope: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Profile {
    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Profile::Custom(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Constant(c) => *c,
            Profile::Affine { offset, slope } => offset + slope * x,
            Profile::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant(c) => write!(f, "Constant({c})"),
            Profile::Affine { offset, slope } => write!(f, "Affine({offset} + {slope} x)"),
            Profile::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl From<f64> for Profile {
    fn from(c: f64) -> Self {
        Profile::Constant(c)
    }
}
