//! A two-hidden-layer fully connected value network with ReLU activations,
//! explicit backpropagation, and an Adam optimizer. The element type is
//! generic so the same code trains in `f32` and is finite-difference-checked
//! in `f64`.

use ndarray::{Array1, Array2, Axis, LinalgScalar, ScalarOperand};
use num_traits::Float;
use rand::prelude::*;

/// Element types the network can run on.
pub trait Dtype:
    Float
    + LinalgScalar
    + ScalarOperand
    + std::ops::AddAssign
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
{
}
impl Dtype for f32 {}
impl Dtype for f64 {}

fn cast<F: Dtype>(x: f64) -> F {
    F::from(x).expect("f64 fits in the network element type")
}

/// Fully connected network `in -> hidden -> hidden -> out` with ReLU after
/// each hidden layer and a linear head.
#[derive(Clone, Debug)]
pub struct Mlp<F> {
    w1: Array2<F>,
    b1: Array1<F>,
    w2: Array2<F>,
    b2: Array1<F>,
    w3: Array2<F>,
    b3: Array1<F>,
}

/// Intermediate activations kept from a forward pass for backpropagation.
pub struct ForwardCache<F> {
    x: Array2<F>,
    a1: Array2<F>,
    a2: Array2<F>,
    /// Network output, batch rows by output columns.
    pub q: Array2<F>,
}

/// Gradients with the same shapes as [`Mlp`] parameters. Flat indexing
/// follows the parameter order `w1, b1, w2, b2, w3, b3`, each row-major.
#[derive(Clone, Debug)]
pub struct MlpGrads<F> {
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
    pub w3: Array2<F>,
    pub b3: Array1<F>,
}

impl<F: Dtype> Mlp<F> {
    /// Seeded initialization: every weight and bias of a layer with
    /// `fan_in` inputs is drawn uniformly from `±1/sqrt(fan_in)`.
    pub fn init(in_dim: usize, hidden: usize, out_dim: usize, seed: u64) -> Self {
        assert!(in_dim > 0 && hidden > 0 && out_dim > 0);
        let mut rng = StdRng::seed_from_u64(seed);
        let layer = |rows: usize, cols: usize, rng: &mut StdRng| {
            let bound = 1.0 / (cols as f64).sqrt();
            let w = Array2::from_shape_fn((rows, cols), |_| cast(rng.gen_range(-bound..bound)));
            let b = Array1::from_shape_fn(rows, |_| cast(rng.gen_range(-bound..bound)));
            (w, b)
        };
        let (w1, b1) = layer(hidden, in_dim, &mut rng);
        let (w2, b2) = layer(hidden, hidden, &mut rng);
        let (w3, b3) = layer(out_dim, hidden, &mut rng);
        Mlp { w1, b1, w2, b2, w3, b3 }
    }

    pub fn in_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w3.nrows()
    }

    /// Batched forward pass keeping activations for [`Mlp::backward`].
    pub fn forward_cached(&self, x: Array2<F>) -> ForwardCache<F> {
        let zero = F::zero();
        let mut a1 = x.dot(&self.w1.t());
        a1 += &self.b1;
        a1.mapv_inplace(|v| v.max(zero));
        let mut a2 = a1.dot(&self.w2.t());
        a2 += &self.b2;
        a2.mapv_inplace(|v| v.max(zero));
        let mut q = a2.dot(&self.w3.t());
        q += &self.b3;
        ForwardCache { x, a1, a2, q }
    }

    /// Batched forward pass returning only the outputs.
    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        self.forward_cached(x.clone()).q
    }

    /// Backpropagate `dL/dq` through the cached activations and return
    /// parameter gradients.
    pub fn backward(&self, cache: &ForwardCache<F>, dq: &Array2<F>) -> MlpGrads<F> {
        let zero = F::zero();
        let w3 = dq.t().dot(&cache.a2);
        let b3 = dq.sum_axis(Axis(0));
        let mut d2 = dq.dot(&self.w3);
        d2.zip_mut_with(&cache.a2, |d, &a| {
            if a <= zero {
                *d = zero;
            }
        });
        let w2 = d2.t().dot(&cache.a1);
        let b2 = d2.sum_axis(Axis(0));
        let mut d1 = d2.dot(&self.w2);
        d1.zip_mut_with(&cache.a1, |d, &a| {
            if a <= zero {
                *d = zero;
            }
        });
        let w1 = d1.t().dot(&cache.x);
        let b1 = d1.sum_axis(Axis(0));
        MlpGrads { w1, b1, w2, b2, w3, b3 }
    }

    pub fn param_count(&self) -> usize {
        self.w1.len()
            + self.b1.len()
            + self.w2.len()
            + self.b2.len()
            + self.w3.len()
            + self.b3.len()
    }

    fn slices(&self) -> [&[F]; 6] {
        [
            self.w1.as_slice().expect("row-major"),
            self.b1.as_slice().expect("contiguous"),
            self.w2.as_slice().expect("row-major"),
            self.b2.as_slice().expect("contiguous"),
            self.w3.as_slice().expect("row-major"),
            self.b3.as_slice().expect("contiguous"),
        ]
    }

    fn slices_mut(&mut self) -> [&mut [F]; 6] {
        let Mlp { w1, b1, w2, b2, w3, b3 } = self;
        [
            w1.as_slice_mut().expect("row-major"),
            b1.as_slice_mut().expect("contiguous"),
            w2.as_slice_mut().expect("row-major"),
            b2.as_slice_mut().expect("contiguous"),
            w3.as_slice_mut().expect("row-major"),
            b3.as_slice_mut().expect("contiguous"),
        ]
    }

    /// Parameter at flat index `i` (order `w1, b1, w2, b2, w3, b3`).
    pub fn get_param(&self, mut i: usize) -> F {
        for s in self.slices() {
            if i < s.len() {
                return s[i];
            }
            i -= s.len();
        }
        panic!("parameter index out of range");
    }

    /// Overwrite the parameter at flat index `i`.
    pub fn set_param(&mut self, mut i: usize, value: F) {
        for s in self.slices_mut() {
            if i < s.len() {
                s[i] = value;
                return;
            }
            i -= s.len();
        }
        panic!("parameter index out of range");
    }
}

impl<F: Dtype> MlpGrads<F> {
    fn slices(&self) -> [&[F]; 6] {
        [
            self.w1.as_slice().expect("row-major"),
            self.b1.as_slice().expect("contiguous"),
            self.w2.as_slice().expect("row-major"),
            self.b2.as_slice().expect("contiguous"),
            self.w3.as_slice().expect("row-major"),
            self.b3.as_slice().expect("contiguous"),
        ]
    }

    /// Gradient at flat index `i`, mirroring [`Mlp::get_param`].
    pub fn get(&self, mut i: usize) -> F {
        for s in self.slices() {
            if i < s.len() {
                return s[i];
            }
            i -= s.len();
        }
        panic!("gradient index out of range");
    }

    /// Largest absolute entry, for divergence diagnostics.
    pub fn max_abs(&self) -> F {
        let mut m = F::zero();
        for s in self.slices() {
            for &g in s {
                m = m.max(g.abs());
            }
        }
        m
    }
}

/// Adam optimizer over the flat parameter vector of one [`Mlp`].
#[derive(Clone, Debug)]
pub struct Adam<F> {
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
    t: i32,
    m: Vec<F>,
    v: Vec<F>,
}

impl<F: Dtype> Adam<F> {
    pub fn new(lr: f64, betas: (f64, f64), eps: f64, param_count: usize) -> Self {
        Adam {
            lr: cast(lr),
            beta1: cast(betas.0),
            beta2: cast(betas.1),
            eps: cast(eps),
            t: 0,
            m: vec![F::zero(); param_count],
            v: vec![F::zero(); param_count],
        }
    }

    /// One bias-corrected Adam update of `net` along `grads`.
    pub fn step(&mut self, net: &mut Mlp<F>, grads: &MlpGrads<F>) {
        self.t += 1;
        let one = F::one();
        let tiny = F::min_positive_value();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        let mut offset = 0;
        let gs = grads.slices();
        for (idx, p) in net.slices_mut().into_iter().enumerate() {
            let g = gs[idx];
            debug_assert_eq!(p.len(), g.len());
            let ms = &mut self.m[offset..offset + p.len()];
            let vs = &mut self.v[offset..offset + p.len()];
            for (((p_i, &g_i), m_i), v_i) in
                p.iter_mut().zip(g).zip(ms.iter_mut()).zip(vs.iter_mut())
            {
                let mut m = self.beta1 * *m_i + (one - self.beta1) * g_i;
                let mut v = self.beta2 * *v_i + (one - self.beta2) * g_i * g_i;
                // Flush vanishing moments to zero. A parameter that stops
                // receiving gradient otherwise decays through the subnormal
                // range for thousands of steps, where x86 multiplies leave
                // the fast path and throttle the whole update loop; at
                // update scale such moments are indistinguishable from zero.
                if m.abs() < tiny {
                    m = F::zero();
                }
                if v < tiny {
                    v = F::zero();
                }
                *m_i = m;
                *v_i = v;
                let m_hat = m / c1;
                let v_hat = v / c2;
                *p_i = *p_i - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            offset += p.len();
        }
    }
}
