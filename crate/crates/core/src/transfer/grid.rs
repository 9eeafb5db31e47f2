use num_complex::Complex;

use super::TransferError;
use crate::scalar::{wrap01, Compensated, Scalar};

/// How a grid function is read off-grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Lookup {
    /// Value of the containing cell.
    Constant,
    /// Periodic linear interpolation between cell midpoints.
    #[default]
    Linear,
}

/// Complex samples at the midpoints of `N` equal cells of the circle, `N` a power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    values: Vec<Complex<T>>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(values: Vec<Complex<T>>) -> Result<Self, TransferError> {
        if !values.len().is_power_of_two() {
            return Err(TransferError::NotPowerOfTwo(values.len()));
        }
        Ok(Self { values })
    }

    pub fn from_real(values: Vec<T>) -> Result<Self, TransferError> {
        Self::new(values.into_iter().map(|v| Complex::new(v, T::zero())).collect())
    }

    pub fn zeros(n: usize) -> Result<Self, TransferError> {
        Self::new(vec![Complex::new(T::zero(), T::zero()); n])
    }

    pub fn constant(n: usize, c: Complex<T>) -> Result<Self, TransferError> {
        Self::new(vec![c; n])
    }

    /// Samples `g` at the cell midpoints.
    pub fn from_fn(n: usize, g: impl Fn(T) -> Complex<T>) -> Result<Self, TransferError> {
        Self::new((0..n).map(|i| g(midpoint(i, n))).collect())
    }

    pub fn from_real_fn(n: usize, g: impl Fn(T) -> T) -> Result<Self, TransferError> {
        Self::from_fn(n, |x| Complex::new(g(x), T::zero()))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn re(&self) -> Vec<T> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn midpoint(&self, i: usize) -> T {
        midpoint(i, self.values.len())
    }

    /// Integral over the circle.
    pub fn integral(&self) -> Complex<T> {
        let (mut re, mut im) = (Compensated::default(), Compensated::default());
        for v in &self.values {
            re.add(v.re);
            im.add(v.im);
        }
        let n = T::from_usize_lossy(self.len());
        Complex::new(re.value() / n, im.value() / n)
    }

    /// `int self * other` (no conjugation).
    pub fn pairing(&self, other: &Self) -> Complex<T> {
        assert_eq!(self.len(), other.len(), "grid sizes differ");
        let (mut re, mut im) = (Compensated::default(), Compensated::default());
        for (a, b) in self.values.iter().zip(&other.values) {
            let p = a * b;
            re.add(p.re);
            im.add(p.im);
        }
        let n = T::from_usize_lossy(self.len());
        Complex::new(re.value() / n, im.value() / n)
    }

    pub fn l1(&self) -> T {
        let mut acc = Compensated::default();
        for v in &self.values {
            acc.add(v.norm());
        }
        acc.value() / T::from_usize_lossy(self.len())
    }

    pub fn sup(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    /// Cyclic total variation of the cell values.
    pub fn variation(&self) -> T {
        let n = self.len();
        let mut acc = Compensated::default();
        for i in 0..n {
            acc.add((self.values[(i + 1) % n] - self.values[i]).norm());
        }
        acc.value()
    }

    pub fn bv_norm(&self) -> T {
        self.variation() + self.l1()
    }

    /// `BV / (1 + |b|) + L1`.
    pub fn b_norm(&self, b: T) -> T {
        self.variation() / (T::one() + b.abs()) + self.l1()
    }

    pub fn map(&self, g: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self { values: self.values.iter().map(|&v| g(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, g: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        assert_eq!(self.len(), other.len(), "grid sizes differ");
        Self { values: self.values.iter().zip(&other.values).map(|(&a, &b)| g(a, b)).collect() }
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        self.map(|v| v * c)
    }

    /// Cell containing `x` and, for linear lookup, the fractional position between midpoints.
    pub fn lookup(&self, x: T, mode: Lookup) -> Complex<T> {
        let n = self.len();
        match mode {
            Lookup::Constant => self.values[cell_of(x, n)],
            Lookup::Linear => {
                let (i0, t) = linear_stencil(x, n);
                let i1 = if i0 + 1 == n { 0 } else { i0 + 1 };
                self.values[i0] * (T::one() - t) + self.values[i1] * t
            }
        }
    }

    /// Averages over consecutive blocks of `block` cells.
    pub fn block_average(&self, block: usize) -> Result<Self, TransferError> {
        let n = self.len();
        if block == 0 || !n.is_multiple_of(block) {
            return Err(TransferError::GridTooCoarse { cells: n, needed: block });
        }
        let mut out = self.values.clone();
        let inv = T::one() / T::from_usize_lossy(block);
        for chunk in out.chunks_mut(block) {
            let (mut re, mut im) = (Compensated::default(), Compensated::default());
            for v in chunk.iter() {
                re.add(v.re);
                im.add(v.im);
            }
            let avg = Complex::new(re.value() * inv, im.value() * inv);
            chunk.iter_mut().for_each(|v| *v = avg);
        }
        Ok(Self { values: out })
    }
}

pub fn midpoint<T: Scalar>(i: usize, n: usize) -> T {
    (T::from_usize_lossy(i) + T::lit(0.5)) / T::from_usize_lossy(n)
}

pub fn cell_of<T: Scalar>(x: T, n: usize) -> usize {
    let k = (wrap01(x) * T::from_usize_lossy(n)).floor().to_usize().unwrap_or(0);
    k.min(n - 1)
}

/// Left midpoint index and weight of the right neighbour for periodic linear interpolation.
pub fn linear_stencil<T: Scalar>(x: T, n: usize) -> (usize, T) {
    let s = wrap01(x) * T::from_usize_lossy(n) - T::lit(0.5);
    let fl = s.floor();
    let t = s - fl;
    let i = fl.to_isize().unwrap_or(0);
    let i0 = i.rem_euclid(n as isize) as usize;
    (i0, t)
}
