//! Central finite differences for fields valued in vectors, matrices, or
//! stacks of matrices.

use crate::tensor::{Mat, Vect};

/// Values that admit linear combinations; what a differentiable field returns.
pub trait Linear: Clone {
    fn zeros_like(&self) -> Self;
    fn scale(&mut self, c: f64);
    /// self += c * other
    fn axpy(&mut self, c: f64, other: &Self);
}

impl Linear for f64 {
    fn zeros_like(&self) -> Self {
        0.0
    }
    fn scale(&mut self, c: f64) {
        *self *= c;
    }
    fn axpy(&mut self, c: f64, other: &Self) {
        *self += c * other;
    }
}

impl Linear for Vect {
    fn zeros_like(&self) -> Self {
        Vect::zeros(self.len())
    }
    fn scale(&mut self, c: f64) {
        *self *= c;
    }
    fn axpy(&mut self, c: f64, other: &Self) {
        *self += other * c;
    }
}

impl Linear for Mat {
    fn zeros_like(&self) -> Self {
        Mat::zeros(self.nrows(), self.ncols())
    }
    fn scale(&mut self, c: f64) {
        *self *= c;
    }
    fn axpy(&mut self, c: f64, other: &Self) {
        *self += other * c;
    }
}

impl<T: Linear> Linear for Vec<T> {
    fn zeros_like(&self) -> Self {
        self.iter().map(|t| t.zeros_like()).collect()
    }
    fn scale(&mut self, c: f64) {
        for t in self.iter_mut() {
            t.scale(c);
        }
    }
    fn axpy(&mut self, c: f64, other: &Self) {
        for (t, o) in self.iter_mut().zip(other.iter()) {
            t.axpy(c, o);
        }
    }
}

/// Stencil order for central differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdOrder {
    Two,
    Four,
}

/// d/dx_i of `f` at `x` by central differences with step `h`.
pub fn partial<T: Linear>(f: &dyn Fn(&Vect) -> T, x: &Vect, i: usize, h: f64, order: FdOrder) -> T {
    let shifted = |s: f64| {
        let mut y = x.clone();
        y[i] += s;
        f(&y)
    };
    match order {
        FdOrder::Two => {
            let mut out = shifted(h);
            out.axpy(-1.0, &shifted(-h));
            out.scale(1.0 / (2.0 * h));
            out
        }
        FdOrder::Four => {
            // (-f(+2h) + 8 f(+h) - 8 f(-h) + f(-2h)) / 12h
            let mut out = shifted(2.0 * h);
            out.scale(-1.0);
            out.axpy(8.0, &shifted(h));
            out.axpy(-8.0, &shifted(-h));
            out.axpy(1.0, &shifted(-2.0 * h));
            out.scale(1.0 / (12.0 * h));
            out
        }
    }
}

/// Directional derivative sum_i v_i d/dx_i f.
pub fn directional<T: Linear>(
    f: &dyn Fn(&Vect) -> T,
    x: &Vect,
    v: &Vect,
    h: f64,
    order: FdOrder,
) -> T {
    let probe = f(x);
    let mut out = probe.zeros_like();
    for i in 0..v.len() {
        if v[i] != 0.0 {
            out.axpy(v[i], &partial(f, x, i, h, order));
        }
    }
    out
}
