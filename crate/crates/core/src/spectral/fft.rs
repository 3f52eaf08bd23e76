//! Separable n-dimensional complex FFT over row-major `[n; d]` arrays.
//!
//! Forward transforms are unnormalized; inverse transforms divide by the
//! total number of points, so `inverse(forward(x)) == x` up to rounding.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftDirection, FftPlanner};

// lines gathered per pass for the strided axes
const BATCH: usize = 16;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction))
}

pub(crate) fn forward(data: &mut [C64], n: usize, dim: usize) {
    transform(data, n, dim, FftDirection::Forward);
}

pub(crate) fn inverse(data: &mut [C64], n: usize, dim: usize) {
    transform(data, n, dim, FftDirection::Inverse);
    let scale = 1.0 / data.len() as f64;
    for z in data.iter_mut() {
        *z *= scale;
    }
}

fn transform(data: &mut [C64], n: usize, dim: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), n.pow(dim as u32));
    if n == 1 {
        return;
    }
    let fft = plan(n, direction);
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    // last axis is contiguous
    fft.process_with_scratch(data, &mut scratch);

    let total = data.len();
    let mut buf = vec![C64::new(0.0, 0.0); n * BATCH];
    for axis in (0..dim.saturating_sub(1)).rev() {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = n * stride;
        for base in (0..total).step_by(block) {
            for col0 in (0..stride).step_by(BATCH) {
                let width = BATCH.min(stride - col0);
                for k in 0..n {
                    let row = base + k * stride + col0;
                    for c in 0..width {
                        buf[c * n + k] = data[row + c];
                    }
                }
                fft.process_with_scratch(&mut buf[..width * n], &mut scratch);
                for k in 0..n {
                    let row = base + k * stride + col0;
                    for c in 0..width {
                        data[row + c] = buf[c * n + k];
                    }
                }
            }
        }
    }
}
