//! Unnormalized 2-D FFTs over `ndarray` matrices.
//!
//! The forward transform carries no scaling; the inverse divides by `M·N`.

use std::cell::RefCell;

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform(data: &mut Array2<Complex64>, direction: FftDirection) {
    let (rows, cols) = data.dim();
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        let row_fft = planner.plan_fft(cols, direction);
        let col_fft = planner.plan_fft(rows, direction);
        let mut buf = vec![Complex64::default(); rows.max(cols)];
        for mut row in data.axis_iter_mut(Axis(0)) {
            let line = &mut buf[..cols];
            line.iter_mut().zip(row.iter()).for_each(|(b, v)| *b = *v);
            row_fft.process(line);
            row.iter_mut().zip(line.iter()).for_each(|(v, b)| *v = *b);
        }
        for mut col in data.axis_iter_mut(Axis(1)) {
            let line = &mut buf[..rows];
            line.iter_mut().zip(col.iter()).for_each(|(b, v)| *b = *v);
            col_fft.process(line);
            col.iter_mut().zip(line.iter()).for_each(|(v, b)| *v = *b);
        }
    });
}

pub fn fft2(input: ArrayView2<f64>) -> Array2<Complex64> {
    let mut data = input.mapv(|v| Complex64::new(v, 0.0));
    transform(&mut data, FftDirection::Forward);
    data
}

pub fn fft2_complex(mut data: Array2<Complex64>) -> Array2<Complex64> {
    transform(&mut data, FftDirection::Forward);
    data
}

/// Inverse transform, normalized so that `ifft2(fft2(x)) == x`.
pub fn ifft2(mut data: Array2<Complex64>) -> Array2<Complex64> {
    transform(&mut data, FftDirection::Inverse);
    let scale = 1.0 / data.len() as f64;
    data.mapv_inplace(|v| v * scale);
    data
}
