//! Unnormalized 2-D FFT over square row-major arrays.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// In-place 2-D transform. `Forward` uses the `e^{-2πi km/n}` kernel,
/// `Inverse` the conjugate one. Neither direction is normalized.
pub(crate) fn fft2_inplace(data: &mut Array2<Complex64>, direction: FftDirection) {
    let (rows, cols) = data.dim();
    let mut planner = FftPlanner::new();

    // Rows are contiguous in standard layout, so rustfft can batch them.
    let row_fft = planner.plan_fft(cols, direction);
    {
        let buf = data
            .as_slice_mut()
            .expect("fft2 requires a standard-layout array");
        row_fft.process(buf);
    }

    let col_fft = planner.plan_fft(rows, direction);
    let mut column = vec![Complex64::default(); rows];
    let mut scratch = vec![Complex64::default(); col_fft.get_inplace_scratch_len()];
    for mut lane in data.columns_mut() {
        for (dst, src) in column.iter_mut().zip(lane.iter()) {
            *dst = *src;
        }
        col_fft.process_with_scratch(&mut column, &mut scratch);
        for (dst, src) in lane.iter_mut().zip(column.iter()) {
            *dst = *src;
        }
    }
}
