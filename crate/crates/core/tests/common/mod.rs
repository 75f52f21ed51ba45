//! Brute-force reference solvers for small SVM duals.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random PSD Gram matrix from `m` points in R^d with a Gaussian kernel
/// or a plain inner product.
pub fn random_gram<R: Rng>(rng: &mut R, m: usize, gaussian: bool) -> Vec<f64> {
    let d = 3;
    let pts: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
    let mut k = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            k[i * m + j] = if gaussian {
                let d2: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).powi(2)).sum();
                (-0.7 * d2).exp()
            } else {
                pts[i].iter().zip(&pts[j]).map(|(a, b)| a * b).sum::<f64>() + 1.0
            };
        }
    }
    k
}

fn max_eigenvalue(q: &DMatrix<f64>) -> f64 {
    q.clone().symmetric_eigen().eigenvalues.iter().copied().fold(0.0, f64::max)
}

/// Euclidean projection onto {0 ≤ a ≤ C, yᵀa = 0} by bisection on the
/// multiplier of the equality.
fn project_binary(v: &DVector<f64>, y: &[f64], c: f64) -> DVector<f64> {
    let at = |lam: f64| DVector::from_iterator(v.len(), v.iter().zip(y).map(|(x, yi)| (x + lam * yi).clamp(0.0, c)));
    let h = |lam: f64| at(lam).iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>();
    let bound = v.amax() + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Binary dual `Σa − ½ aᵀQa`, `Q_ij = y_i y_j K_ij`, solved by accelerated
/// projected gradient. Returns the optimal value.
pub fn binary_dual_oracle(k: &[f64], y: &[f64], c: f64) -> f64 {
    let m = y.len();
    let q = DMatrix::from_fn(m, m, |i, j| y[i] * y[j] * k[i * m + j]);
    let objective = |a: &DVector<f64>| a.sum() - 0.5 * a.dot(&(&q * a));
    let step = 1.0 / max_eigenvalue(&q).max(1e-12);
    let mut a = DVector::zeros(m);
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..50_000 {
        let grad = DVector::from_element(m, 1.0) - &q * &z;
        let next = project_binary(&(&z + step * grad), y, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + ((t - 1.0) / t_next) * (&next - &a);
        // Restart when momentum overshoots.
        if objective(&next) < objective(&a) {
            z = next.clone();
            t = 1.0;
        } else {
            t = t_next;
        }
        a = next;
    }
    objective(&a)
}

/// Joint multiclass dual in the form `2Σα − ½ Σ_s β_sᵀ K β_s`,
/// `β_i^s = δ(y_i, s) A_i − α_i^s`, subject to `Σ_i β_i^s = 0` for each
/// class and `0 ≤ α_i^r ≤ C` for `r ≠ y_i`. `labels` are 0-based.
pub struct JointOracle {
    m: usize,
    l: usize,
    k: DMatrix<f64>,
    labels: Vec<usize>,
    c: f64,
    /// (point, class) of each free variable.
    vars: Vec<(usize, usize)>,
    /// Affine constraint `E v = 0` and the projector onto its null space.
    projector: DMatrix<f64>,
}

impl JointOracle {
    pub fn new(k: &[f64], labels: &[usize], l: usize, c: f64) -> Self {
        let m = labels.len();
        let vars: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..l).filter(move |&r| r != labels[i]).map(move |r| (i, r))).collect();
        // Σ_i β_i^s = Σ_{i: y_i = s} A_i − Σ_i α_i^s, linear in v.
        let e = DMatrix::from_fn(l, vars.len(), |s, v| {
            let (i, r) = vars[v];
            (if labels[i] == s { 1.0 } else { 0.0 }) - (if r == s { 1.0 } else { 0.0 })
        });
        let pinv = (&e * e.transpose()).pseudo_inverse(1e-12).unwrap();
        let projector = DMatrix::identity(vars.len(), vars.len()) - e.transpose() * pinv * &e;
        JointOracle {
            m,
            l,
            k: DMatrix::from_row_slice(m, m, k),
            labels: labels.to_vec(),
            c,
            vars,
            projector,
        }
    }

    pub fn alphas(&self, v: &DVector<f64>) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.l]; self.m];
        for (x, &(i, r)) in v.iter().zip(&self.vars) {
            a[i][r] = *x;
        }
        a
    }

    fn betas(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let a = self.alphas(v);
        DMatrix::from_fn(self.m, self.l, |i, s| {
            let total: f64 = a[i].iter().sum();
            (if self.labels[i] == s { total } else { 0.0 }) - a[i][s]
        })
    }

    pub fn objective(&self, v: &DVector<f64>) -> f64 {
        let b = self.betas(v);
        let kb = &self.k * &b;
        2.0 * v.sum() - 0.5 * b.component_mul(&kb).sum()
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        let kb = &self.k * self.betas(v);
        DVector::from_iterator(
            v.len(),
            self.vars.iter().map(|&(i, r)| 2.0 - (kb[(i, self.labels[i])] - kb[(i, r)])),
        )
    }

    /// Dykstra's alternating projection onto box ∩ null space.
    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = x.len();
        let mut y = x.clone();
        let mut p = DVector::zeros(n);
        let mut q = DVector::zeros(n);
        for _ in 0..3000 {
            let z = (&y + &p).map(|t| t.clamp(0.0, self.c));
            p = &y + &p - &z;
            let y_next = &self.projector * (&z + &q);
            q = &z + &q - &y_next;
            let done = (&y_next - &y).amax() < 1e-14;
            y = y_next;
            if done {
                break;
            }
        }
        y.map(|t| t.clamp(0.0, self.c))
    }

    fn lipschitz(&self) -> f64 {
        let n = self.vars.len();
        let mut h = DMatrix::zeros(n, n);
        for a in 0..n {
            let e = DVector::from_fn(n, |i, _| if i == a { 1.0 } else { 0.0 });
            let g0 = self.gradient(&DVector::zeros(n));
            h.set_column(a, &(g0 - self.gradient(&e)));
        }
        max_eigenvalue(&(0.5 * (&h + h.transpose())))
    }

    /// Best objective reached by projected gradient ascent.
    pub fn solve(&self, iterations: usize) -> f64 {
        let step = 1.0 / self.lipschitz().max(1e-12);
        let mut v = DVector::zeros(self.vars.len());
        for _ in 0..iterations {
            let next = self.project(&(&v + step * self.gradient(&v)));
            let moved = (&next - &v).amax();
            v = next;
            if moved < 1e-13 {
                break;
            }
        }
        self.objective(&v)
    }

    /// Random feasible point: a sum of random 2-cycles α_i^{r} = α_j^{y_i}
    /// with `y_j = r`, each kept inside the box.
    pub fn random_feasible<R: Rng>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.l]; self.m];
        for _ in 0..20 {
            let i = rng.random_range(0..self.m);
            let r = rng.random_range(0..self.l);
            if r == self.labels[i] {
                continue;
            }
            let js: Vec<usize> = (0..self.m).filter(|&j| self.labels[j] == r).collect();
            if js.is_empty() {
                continue;
            }
            let j = js[rng.random_range(0..js.len())];
            let room = (self.c - a[i][r]).min(self.c - a[j][self.labels[i]]);
            let t = rng.random_range(0.0..=1.0) * room;
            a[i][r] += t;
            a[j][self.labels[i]] += t;
        }
        a
    }
}
