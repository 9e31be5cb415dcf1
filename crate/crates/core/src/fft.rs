//! Thin wrapper around `rustfft` fixing the transform conventions used by
//! the whole pipeline: the forward transform is the unnormalized DFT with
//! kernel exp(-i*2*pi*j*k/N), and no transform applies a 1/N factor. The
//! engine also counts invocations so callers can assert transform budgets.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Scalar;

type PlanCache<T> = HashMap<(usize, bool), Arc<dyn Fft<T>>>;

/// Shared FFT planner with an invocation counter.
///
/// Scratch buffers are pooled and reused across calls: allocating (and
/// first-touching) a fresh multi-megabyte scratch per transform costs more
/// than the transform itself at large sizes.
pub struct FftEngine<T: Scalar> {
    planner: Mutex<FftPlanner<T>>,
    cache: Mutex<PlanCache<T>>,
    scratch_pool: Mutex<Vec<Vec<Complex<T>>>>,
    invocations: AtomicU64,
}

impl<T: Scalar> FftEngine<T> {
    pub fn new() -> Self {
        Self {
            planner: Mutex::new(FftPlanner::new()),
            cache: Mutex::new(HashMap::new()),
            scratch_pool: Mutex::new(Vec::new()),
            invocations: AtomicU64::new(0),
        }
    }

    fn take_scratch(&self, needed: usize) -> Vec<Complex<T>> {
        let recycled = self.scratch_pool.lock().unwrap().pop();
        match recycled {
            Some(mut buf) => {
                buf.resize(needed, Complex::new(T::zero(), T::zero()));
                buf
            }
            None => vec![Complex::new(T::zero(), T::zero()); needed],
        }
    }

    fn return_scratch(&self, buf: Vec<Complex<T>>) {
        let mut pool = self.scratch_pool.lock().unwrap();
        if pool.len() < 8 {
            pool.push(buf);
        }
    }

    fn plan(&self, len: usize, forward: bool) -> Arc<dyn Fft<T>> {
        let mut cache = self.cache.lock().unwrap();
        if let Some(fft) = cache.get(&(len, forward)) {
            return Arc::clone(fft);
        }
        let mut planner = self.planner.lock().unwrap();
        let fft = if forward {
            planner.plan_fft_forward(len)
        } else {
            planner.plan_fft_inverse(len)
        };
        cache.insert((len, forward), Arc::clone(&fft));
        fft
    }

    fn run(&self, buffer: &mut [Complex<T>], forward: bool) {
        let fft = self.plan(buffer.len(), forward);
        let mut scratch = self.take_scratch(fft.get_inplace_scratch_len());
        fft.process_with_scratch(buffer, &mut scratch);
        self.return_scratch(scratch);
        self.invocations.fetch_add(1, Ordering::Relaxed);
    }

    /// In-place unnormalized forward DFT.
    pub fn forward(&self, buffer: &mut [Complex<T>]) {
        self.run(buffer, true);
    }

    /// In-place unnormalized inverse DFT (conjugate kernel, no 1/N factor).
    pub fn inverse(&self, buffer: &mut [Complex<T>]) {
        self.run(buffer, false);
    }

    /// Total transforms executed by this engine since creation.
    pub fn transform_count(&self) -> u64 {
        self.invocations.load(Ordering::Relaxed)
    }
}

impl<T: Scalar> Default for FftEngine<T> {
    fn default() -> Self {
        Self::new()
    }
}
