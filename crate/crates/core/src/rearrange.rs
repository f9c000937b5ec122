//! Kernel-smoothed monotone rearrangement and its inversion.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{MonobandError, Result};
use crate::kernels::KernelSpec;
use crate::Scalar;

/// Number of bisection steps used to invert the rearranged distribution.
pub const BISECTION_STEPS: usize = 60;
const DOMAIN_SLACK: f64 = 1e-12;

/// The sorted values of one smooth estimate on the grid `i/N`, ready for inversion.
#[derive(Debug, Clone)]
pub struct Rearrangement<T: Scalar> {
    kernel: KernelSpec,
    hd: T,
    sorted: Vec<T>,
    /// `order[r]` is the grid index (0-based) of the r-th smallest value.
    order: Vec<usize>,
}

impl<T: Scalar> Rearrangement<T> {
    pub fn new(kernel: KernelSpec, mtilde: ArrayView1<'_, T>, hd: T) -> Self {
        let mut order: Vec<usize> = (0..mtilde.len()).collect();
        order.sort_by(|&a, &b| mtilde[a].partial_cmp(&mtilde[b]).expect("finite estimates").then(a.cmp(&b)));
        let sorted = order.iter().map(|&i| mtilde[i]).collect();
        Rearrangement { kernel, hd, sorted, order }
    }

    pub fn hd(&self) -> T {
        self.hd
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn min(&self) -> T {
        self.sorted[0]
    }

    pub fn max(&self) -> T {
        self.sorted[self.sorted.len() - 1]
    }

    pub fn sorted(&self) -> &[T] {
        &self.sorted
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Positions in the sorted values lying strictly within `hd` of `s`.
    pub fn window(&self, s: T) -> std::ops::Range<usize> {
        let lo = self.sorted.partition_point(|&m| m <= s - self.hd);
        let hi = self.sorted.partition_point(|&m| m < s + self.hd);
        lo..hi.max(lo)
    }

    /// `(1/N) sum_i F((s - m(i/N)) / hd)`.
    pub fn inverse(&self, s: T) -> T {
        let w = self.window(s);
        let below = T::of_usize(w.start);
        let inside: T = self.sorted[w].iter().map(|&m| self.kernel.cdf((s - m) / self.hd)).sum();
        (below + inside) / T::of_usize(self.sorted.len())
    }

    /// Solves `inverse(s) = t` by fixed-length bisection, which keeps the map
    /// nondecreasing in `t`.
    pub fn solve(&self, t: T) -> T {
        let mut lo = self.min() - self.hd;
        let mut hi = self.max() + self.hd;
        let half = T::lit(0.5);
        for _ in 0..BISECTION_STEPS {
            let mid = half * (lo + hi);
            if self.inverse(mid) < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        half * (lo + hi)
    }

    /// `T_k`: the image of `[min m, max m]` under the inverse, clipped away from the edges.
    pub fn domain(&self) -> (T, T) {
        let c = clip(self.hd);
        (self.inverse(self.min()).max(c), self.inverse(self.max()).min(T::one() - c))
    }
}

/// Boundary clip `hd * ln(1/hd)`.
pub fn clip<T: Scalar>(hd: T) -> T {
    hd * (T::one() / hd).ln()
}

/// Single-value convenience wrapper around [`Rearrangement::inverse`].
pub fn rearranged_inverse<T: Scalar>(kernel: KernelSpec, mtilde: ArrayView1<'_, T>, hd: T, s: T) -> T {
    Rearrangement::new(kernel, mtilde, hd).inverse(s)
}

/// Intersection of the per-coordinate domains.
pub fn domain_hat_t<T: Scalar>(parts: &[Rearrangement<T>]) -> Result<(T, T)> {
    let (lo, hi) = parts
        .iter()
        .map(Rearrangement::domain)
        .fold((T::zero(), T::one()), |(a, b), (c, d)| (a.max(c), b.min(d)));
    if !(lo < hi) {
        return Err(MonobandError::EmptyDomain { lo: lo.as_f64(), hi: hi.as_f64() });
    }
    Ok((lo, hi))
}

/// Monotone estimates at `targets`, which must lie in the coordinate's domain.
pub fn monotone_eval<T: Scalar>(re: &Rearrangement<T>, targets: &[T]) -> Result<Vec<T>> {
    let (lo, hi) = re.domain();
    let eps = T::lit(DOMAIN_SLACK);
    targets
        .iter()
        .map(|&t| {
            if t < lo - eps || t > hi + eps {
                Err(MonobandError::DomainViolation { t: t.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() })
            } else {
                Ok(re.solve(t))
            }
        })
        .collect()
}

/// `g` equally spaced points covering `[lo, hi]`, endpoints included.
pub fn eval_grid<T: Scalar>(lo: T, hi: T, g: usize) -> Vec<T> {
    match g {
        0 => Vec::new(),
        1 => vec![T::lit(0.5) * (lo + hi)],
        _ => {
            let step = (hi - lo) / T::of_usize(g - 1);
            (0..g).map(|i| if i == g - 1 { hi } else { lo + step * T::of_usize(i) }).collect()
        }
    }
}

/// Monotone fit of every coordinate on a common evaluation grid.
#[derive(Debug, Clone)]
pub struct MonotoneFit<T: Scalar> {
    pub parts: Vec<Rearrangement<T>>,
    pub hd: Vec<T>,
    pub domain: (T, T),
    pub eval_grid: Vec<T>,
    /// `G x K` monotone estimates.
    pub m_i: Array2<T>,
}

impl<T: Scalar> MonotoneFit<T> {
    /// Rearranges each column of `mtilde` (`N x K`), builds the common domain and
    /// evaluates on `g` points.
    pub fn new(kernel: KernelSpec, mtilde: ArrayView2<'_, T>, hd: &[T], g: usize) -> Result<Self> {
        let k = mtilde.ncols();
        if hd.len() != k {
            return Err(MonobandError::InvalidInput(format!("{} rearrangement bandwidths for {k} series", hd.len())));
        }
        if mtilde.nrows() == 0 {
            return Err(MonobandError::InvalidInput("empty estimate grid".into()));
        }
        let parts: Vec<_> = (0..k).into_par_iter().map(|j| Rearrangement::new(kernel, mtilde.column(j), hd[j])).collect();
        let domain = domain_hat_t(&parts)?;
        let eval_grid = eval_grid(domain.0, domain.1, g);
        let cols = parts.par_iter().map(|re| monotone_eval(re, &eval_grid)).collect::<Result<Vec<_>>>()?;
        let mut m_i = Array2::zeros((eval_grid.len(), k));
        for (j, col) in cols.into_iter().enumerate() {
            for (g, v) in col.into_iter().enumerate() {
                m_i[[g, j]] = v;
            }
        }
        Ok(MonotoneFit { parts, hd: hd.to_vec(), domain, eval_grid, m_i })
    }
}
