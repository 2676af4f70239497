//! Parameter matrix shared between training workers without locks.
//!
//! Entries are `f32` bit patterns in relaxed atomics. Row reads and writes
//! are not atomic as a whole, so concurrent workers may lose each other's
//! updates; with sparse SGD updates this is tolerated. With a single worker
//! every read sees the previous write and training is exactly reproducible.

use std::sync::atomic::{AtomicU32, Ordering};

pub struct SharedMatrix {
    data: Vec<AtomicU32>,
    cols: usize,
}

impl SharedMatrix {
    pub fn from_vec(values: Vec<f32>, cols: usize) -> Self {
        assert!(cols > 0 && values.len() % cols == 0);
        SharedMatrix {
            data: values.into_iter().map(|v| AtomicU32::new(v.to_bits())).collect(),
            cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols
    }

    #[inline]
    pub fn load_row(&self, row: usize, out: &mut [f32]) {
        let src = &self.data[row * self.cols..(row + 1) * self.cols];
        for (o, s) in out.iter_mut().zip(src) {
            *o = f32::from_bits(s.load(Ordering::Relaxed));
        }
    }

    #[inline]
    pub fn store_row(&self, row: usize, values: &[f32]) {
        let dst = &self.data[row * self.cols..(row + 1) * self.cols];
        for (d, &v) in dst.iter().zip(values) {
            d.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    /// Adds `delta` to a row (read-modify-write per entry, not atomic).
    #[inline]
    pub fn add_to_row(&self, row: usize, delta: &[f32]) {
        let dst = &self.data[row * self.cols..(row + 1) * self.cols];
        for (d, &v) in dst.iter().zip(delta) {
            let cur = f32::from_bits(d.load(Ordering::Relaxed));
            d.store((cur + v).to_bits(), Ordering::Relaxed);
        }
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
            .into_iter()
            .map(|a| f32::from_bits(a.into_inner()))
            .collect()
    }
}
