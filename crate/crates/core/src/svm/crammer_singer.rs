//! Joint multiclass dual with per-class biases.
//!
//! Variables `α_i^s` (one per training point and wrong class) live in
//! `[0, C]` with `α_i^{y_i} = 0`, subject to one balance constraint per
//! class `s′`: `Σ_i α_i^{s′} = Σ_{i: y_i = s′} A_i`, where `A_i = Σ_s α_i^s`.
//!
//! Reading `α_i^s` as flow on the edge `y_i → s` of a graph over classes,
//! the balance constraints say the flow is a circulation. The solver moves
//! along cycles of that graph, which keeps every iterate feasible. Each step
//! picks a 2-cycle (two variables) when one is violating enough, and falls
//! back to a longer cycle found by Bellman-Ford otherwise, then does an
//! exact line search along it.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{check_c, check_labels, Gram, SUPPORT_THRESHOLD};
use crate::error::{ensure_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointParams {
    pub c: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for JointParams {
    fn default() -> Self {
        JointParams {
            c: 1.0,
            tol: 1e-3,
            max_iters: 1_000_000,
        }
    }
}

impl JointParams {
    pub fn with_c(c: f64) -> Self {
        JointParams {
            c,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    /// `alphas[i][s]` for class index `s` (0-based); the true class entry is 0.
    pub alphas: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub c: f64,
    /// Training labels in `1..=l`.
    pub labels: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl JointModel {
    pub fn n_classes(&self) -> usize {
        self.biases.len()
    }

    /// `f_{s′} = Σ_i (δ_{y_i,s′} A_i − α_i^{s′}) k_i + b_{s′}` for every class.
    pub fn decision_values(&self, k_row: &[f64]) -> Result<Vec<f64>> {
        ensure_len(self.labels.len(), k_row.len())?;
        let mut f = self.biases.clone();
        for (i, a) in self.alphas.iter().enumerate() {
            if k_row[i] == 0.0 {
                continue;
            }
            let total: f64 = a.iter().sum();
            if total == 0.0 {
                continue;
            }
            let yi = self.labels[i] - 1;
            f[yi] += total * k_row[i];
            for (s, &v) in a.iter().enumerate() {
                f[s] -= v * k_row[i];
            }
        }
        Ok(f)
    }
}

fn check_alphas(alphas: &[Vec<f64>], labels: &[usize], c: Option<f64>) -> Result<usize> {
    ensure_len(labels.len(), alphas.len())?;
    let l = alphas.first().map_or(0, Vec::len);
    check_labels(labels, l)?;
    for (a, &y) in alphas.iter().zip(labels) {
        ensure_len(l, a.len())?;
        if a[y - 1] != 0.0 {
            return Err(Error::invalid("α_i^{y_i} must be zero"));
        }
        let hi = c.unwrap_or(f64::INFINITY);
        if a.iter().any(|&v| !(v >= -1e-12 && v <= hi + 1e-12)) {
            return Err(Error::invalid("α outside [0, C]"));
        }
    }
    Ok(l)
}

/// Largest violation of `Σ_i α_i^{s′} = Σ_{i: y_i = s′} A_i` over classes.
pub fn feasibility_residual(alphas: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    let l = check_alphas(alphas, labels, None)?;
    let mut inflow = vec![0.0; l];
    let mut outflow = vec![0.0; l];
    for (a, &y) in alphas.iter().zip(labels) {
        for (s, &v) in a.iter().enumerate() {
            inflow[s] += v;
            outflow[y - 1] += v;
        }
    }
    Ok(inflow
        .iter()
        .zip(&outflow)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

fn check_feasible(alphas: &[Vec<f64>], labels: &[usize]) -> Result<()> {
    let r = feasibility_residual(alphas, labels)?;
    if r > 1e-6 {
        return Err(Error::invalid(format!("balance constraints violated by {r:e}")));
    }
    Ok(())
}

/// Simplified dual objective
/// `2Σα + ½[−Σ_ij δ_{y_i,y_j} A_i A_j K_ij + Σ_{s,i,j}(2α_i^s α_j^{y_i} − α_i^s α_j^s) K_ij]`.
///
/// The `A_i A_j` term is summed over point pairs only; summing it once per
/// class as well would count it `l` times and break the equality with
/// [`crammer_singer_objective_expanded`].
pub fn crammer_singer_objective(alphas: &[Vec<f64>], k: Gram<'_>, labels: &[usize]) -> Result<f64> {
    ensure_len(k.len(), labels.len())?;
    check_feasible(alphas, labels)?;
    let m = labels.len();
    let a: Vec<f64> = alphas.iter().map(|r| r.iter().sum()).collect();
    let mut quad = 0.0;
    for i in 0..m {
        let yi = labels[i] - 1;
        for j in 0..m {
            let kij = k.get(i, j);
            if kij == 0.0 {
                continue;
            }
            let mut t = 0.0;
            if labels[j] == labels[i] {
                t -= a[i] * a[j];
            }
            for (s, &v) in alphas[i].iter().enumerate() {
                t += 2.0 * v * alphas[j][yi] - v * alphas[j][s];
            }
            quad += t * kij;
        }
    }
    Ok(2.0 * a.iter().sum::<f64>() + 0.5 * quad)
}

/// The same dual before the `Σ_s δ_{i,s} δ_{j,s} = δ_{y_i,y_j}` simplification:
/// `2Σα + ½ Σ_{s,i,j}[δ_{i,s}A_i δ_{j,s}A_j − 2α_i^s δ_{j,y_i}A_j + 2α_i^s α_j^{y_i} − α_i^s α_j^s] K_ij`.
pub fn crammer_singer_objective_expanded(
    alphas: &[Vec<f64>],
    k: Gram<'_>,
    labels: &[usize],
) -> Result<f64> {
    ensure_len(k.len(), labels.len())?;
    check_feasible(alphas, labels)?;
    let m = labels.len();
    let l = alphas[0].len();
    let a: Vec<f64> = alphas.iter().map(|r| r.iter().sum()).collect();
    let delta = |i: usize, s: usize| if labels[i] - 1 == s { 1.0 } else { 0.0 };
    let mut quad = 0.0;
    for s in 0..l {
        for i in 0..m {
            for j in 0..m {
                let yi = labels[i] - 1;
                let t = delta(i, s) * a[i] * delta(j, s) * a[j]
                    - 2.0 * alphas[i][s] * delta(j, yi) * a[j]
                    + 2.0 * alphas[i][s] * alphas[j][yi]
                    - alphas[i][s] * alphas[j][s];
                quad += t * k.get(i, j);
            }
        }
    }
    Ok(2.0 * a.iter().sum::<f64>() + 0.5 * quad)
}

/// A variable move along one edge of the class graph.
#[derive(Debug, Clone, Copy)]
struct Hop {
    gain: f64,
    point: usize,
    class: usize,
    /// +1 raises α, −1 lowers it.
    sign: f64,
}

impl Hop {
    fn same_var(&self, other: &Hop) -> bool {
        self.point == other.point && self.class == other.class
    }
}

/// Best two hops per ordered class pair.
struct HopTable {
    l: usize,
    best: Vec<[Option<Hop>; 2]>,
}

impl HopTable {
    fn new(l: usize) -> Self {
        HopTable {
            l,
            best: vec![[None, None]; l * l],
        }
    }

    fn offer(&mut self, from: usize, to: usize, hop: Hop) {
        let slot = &mut self.best[from * self.l + to];
        match slot {
            [None, _] => slot[0] = Some(hop),
            [Some(a), _] if hop.gain > a.gain => {
                slot[1] = slot[0];
                slot[0] = Some(hop);
            }
            [_, None] => slot[1] = Some(hop),
            [_, Some(b)] if hop.gain > b.gain => slot[1] = Some(hop),
            _ => {}
        }
    }

    fn get(&self, from: usize, to: usize) -> &[Option<Hop>; 2] {
        &self.best[from * self.l + to]
    }
}

struct Solver<'a> {
    k: Gram<'a>,
    y: Vec<usize>,
    l: usize,
    c: f64,
    alpha: Vec<f64>,
    /// `f[j*l + s] = Σ_i (δ_{y_i,s} A_i − α_i^s) K_ij`.
    f: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn grad(&self, i: usize, s: usize) -> f64 {
        let l = self.l;
        2.0 - (self.f[i * l + self.y[i]] - self.f[i * l + s])
    }

    fn hops(&self) -> HopTable {
        let mut table = HopTable::new(self.l);
        for i in 0..self.y.len() {
            let a = self.y[i];
            for s in 0..self.l {
                if s == a {
                    continue;
                }
                let v = self.alpha[i * self.l + s];
                let g = self.grad(i, s);
                if v < self.c {
                    table.offer(a, s, Hop { gain: g, point: i, class: s, sign: 1.0 });
                }
                if v > 0.0 {
                    table.offer(s, a, Hop { gain: -g, point: i, class: s, sign: -1.0 });
                }
            }
        }
        table
    }

    fn best_two_cycle(&self, table: &HopTable) -> Option<(f64, Vec<Hop>)> {
        let mut best: Option<(f64, Vec<Hop>)> = None;
        for a in 0..self.l {
            for b in a + 1..self.l {
                for h1 in table.get(a, b).iter().flatten() {
                    for h2 in table.get(b, a).iter().flatten() {
                        if h1.same_var(h2) {
                            continue;
                        }
                        let g = h1.gain + h2.gain;
                        if best.as_ref().is_none_or(|(bg, _)| g > *bg) {
                            best = Some((g, vec![*h1, *h2]));
                        }
                    }
                }
            }
        }
        best
    }

    /// A cycle whose mean gain per edge exceeds `threshold`, via negative
    /// cycle detection with edge cost `threshold − gain`.
    fn long_cycle(&self, table: &HopTable, threshold: f64) -> Option<Vec<Hop>> {
        let l = self.l;
        let edges: Vec<(usize, usize, Hop)> = (0..l)
            .flat_map(|a| (0..l).map(move |b| (a, b)))
            .filter_map(|(a, b)| table.get(a, b)[0].map(|h| (a, b, h)))
            .collect();
        let mut dist = vec![0.0f64; l];
        let mut pred: Vec<Option<(usize, Hop)>> = vec![None; l];
        let mut last = None;
        for _ in 0..l {
            last = None;
            for &(a, b, h) in &edges {
                let d = dist[a] + (threshold - h.gain);
                if d < dist[b] - 1e-15 {
                    dist[b] = d;
                    pred[b] = Some((a, h));
                    last = Some(b);
                }
            }
            last?;
        }
        let mut v = last?;
        for _ in 0..l {
            v = pred[v]?.0;
        }
        let start = v;
        let mut cycle = Vec::new();
        loop {
            let (u, h) = pred[v]?;
            cycle.push(h);
            v = u;
            if v == start {
                break;
            }
        }
        let total: f64 = cycle.iter().map(|h| h.gain).sum();
        (total > threshold * cycle.len() as f64).then_some(cycle)
    }

    /// Exact line search along the cycle; returns the objective increase.
    fn step(&mut self, cycle: &[Hop]) -> f64 {
        let l = self.l;
        let g: f64 = cycle.iter().map(|h| h.gain).sum();
        // Changes to the θ coefficients per unit step: (class, point, coef).
        let mut coef: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * cycle.len());
        let mut limit = f64::INFINITY;
        for h in cycle {
            coef.push((self.y[h.point], h.point, h.sign));
            coef.push((h.class, h.point, -h.sign));
            let v = self.alpha[h.point * l + h.class];
            limit = limit.min(if h.sign > 0.0 { self.c - v } else { v });
        }
        let mut curv = 0.0;
        for &(s1, i, c1) in &coef {
            for &(s2, j, c2) in &coef {
                if s1 == s2 {
                    curv += c1 * c2 * self.k.get(i, j);
                }
            }
        }
        let t = if curv > 1e-15 { (g / curv).min(limit) } else { limit };
        if !(t > 0.0) {
            return 0.0;
        }
        for h in cycle {
            let v = &mut self.alpha[h.point * l + h.class];
            *v = (*v + h.sign * t).clamp(0.0, self.c);
            if h.sign > 0.0 && (self.c - *v) < 1e-14 * self.c {
                *v = self.c;
            }
            if h.sign < 0.0 && *v < 1e-14 * self.c {
                *v = 0.0;
            }
        }
        let m = self.y.len();
        for &(s, i, cf) in &coef {
            let row = self.k.row(i);
            for j in 0..m {
                self.f[j * l + s] += t * cf * row[j];
            }
        }
        t * g - 0.5 * t * t * curv
    }

    fn recompute_f(&mut self) {
        let (m, l) = (self.y.len(), self.l);
        self.f.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            let a: f64 = self.alpha[i * l..(i + 1) * l].iter().sum();
            if a == 0.0 {
                continue;
            }
            let row = self.k.row(i);
            for s in 0..l {
                let cf = if s == self.y[i] { a } else { -self.alpha[i * l + s] };
                if cf != 0.0 {
                    for j in 0..m {
                        self.f[j * l + s] += cf * row[j];
                    }
                }
            }
        }
    }

    /// 2Σα − ½ Σ_s ‖θ_s‖².
    fn objective(&self) -> f64 {
        let (m, l) = (self.y.len(), self.l);
        let mut lin = 0.0;
        let mut quad = 0.0;
        for i in 0..m {
            let a: f64 = self.alpha[i * l..(i + 1) * l].iter().sum();
            lin += 2.0 * a;
            for s in 0..l {
                let cf = if s == self.y[i] { a } else { -self.alpha[i * l + s] };
                quad += cf * self.f[i * l + s];
            }
        }
        lin - 0.5 * quad
    }

    /// Minimum-norm least-squares solution of `b_{y_i} − b_s = g_i^s` over
    /// free variables; zero when there are none.
    fn biases(&self) -> Vec<f64> {
        let l = self.l;
        let mut ata = nalgebra::DMatrix::<f64>::zeros(l, l);
        let mut atg = nalgebra::DVector::<f64>::zeros(l);
        let mut n_free = 0;
        for i in 0..self.y.len() {
            let a = self.y[i];
            for s in 0..l {
                let v = self.alpha[i * l + s];
                if s == a || v <= SUPPORT_THRESHOLD || v >= self.c - SUPPORT_THRESHOLD {
                    continue;
                }
                n_free += 1;
                let g = self.grad(i, s);
                ata[(a, a)] += 1.0;
                ata[(s, s)] += 1.0;
                ata[(a, s)] -= 1.0;
                ata[(s, a)] -= 1.0;
                atg[a] += g;
                atg[s] -= g;
            }
        }
        if n_free == 0 {
            return vec![0.0; l];
        }
        let svd = ata.svd(true, true);
        match svd.solve(&atg, 1e-10) {
            Ok(b) => b.iter().copied().collect(),
            Err(_) => vec![0.0; l],
        }
    }
}

/// Train the joint multiclass dual. Stops when no cycle of the class graph
/// improves the first-order objective by more than `tol` (2-cycles) or
/// `tol/2` per edge (longer cycles). Hitting `max_iters` returns the best
/// iterate with `converged = false` and a warning.
pub fn crammer_singer_train(
    k: Gram<'_>,
    labels: &[usize],
    n_classes: usize,
    params: &JointParams,
) -> Result<JointModel> {
    let m = k.len();
    ensure_len(m, labels.len())?;
    check_labels(labels, n_classes)?;
    check_c(params.c)?;
    if !(params.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let l = n_classes;
    let mut solver = Solver {
        k,
        y: labels.iter().map(|&v| v - 1).collect(),
        l,
        c: params.c,
        alpha: vec![0.0; m * l],
        f: vec![0.0; m * l],
    };
    let mut objective = 0.0f64;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iters {
        let table = solver.hops();
        let cycle = match solver.best_two_cycle(&table) {
            Some((g, c)) if g > params.tol => c,
            _ => match solver.long_cycle(&table, params.tol / 2.0) {
                Some(c) => c,
                None => {
                    converged = true;
                    break;
                }
            },
        };
        let gain = solver.step(&cycle);
        if gain < -1e-12 * (1.0 + objective.abs()) {
            return Err(Error::Numerical(format!(
                "joint dual step decreased the objective by {}",
                -gain
            )));
        }
        objective += gain;
        iterations += 1;
        if iterations % 10_000 == 0 {
            solver.recompute_f();
        }
    }
    if !converged {
        warn!(
            "joint dual solver stopped after {iterations} iterations without reaching tolerance {}",
            params.tol
        );
    }
    solver.recompute_f();
    let biases = solver.biases();
    let objective = solver.objective();
    let alphas = solver.alpha.chunks(l).map(<[f64]>::to_vec).collect();
    Ok(JointModel {
        alphas,
        biases,
        c: params.c,
        labels: labels.to_vec(),
        objective,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_feasible(m: usize, l: usize, c: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..m).map(|i| i % l + 1).collect();
        let mut alphas = vec![vec![0.0; l]; m];
        // Push small flows around random 2- and 3-cycles of the class graph.
        for _ in 0..20 {
            let len = if l >= 3 && rng.random_bool(0.5) { 3 } else { 2 };
            let mut classes: Vec<usize> = (0..l).collect();
            for i in (1..l).rev() {
                classes.swap(i, rng.random_range(0..=i));
            }
            let cyc = &classes[..len];
            let t = rng.random_range(0.0..c / 10.0);
            for e in 0..len {
                let (a, b) = (cyc[e], cyc[(e + 1) % len]);
                let pts: Vec<usize> = (0..m).filter(|&i| labels[i] - 1 == a).collect();
                let i = pts[rng.random_range(0..pts.len())];
                alphas[i][b] += t;
            }
        }
        (alphas, labels)
    }

    fn random_gram(m: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<[f64; 2]> = (0..m).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        (0..m * m)
            .map(|t| {
                let (a, b) = (x[t / m], x[t % m]);
                (-((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))).exp()
            })
            .collect()
    }

    #[test]
    fn zero_alphas_give_zero_objective() {
        let k = random_gram(4, 1);
        let g = Gram::new(4, &k).unwrap();
        let labels = [1, 2, 1, 2];
        let a = vec![vec![0.0; 2]; 4];
        assert_eq!(crammer_singer_objective(&a, g, &labels).unwrap(), 0.0);
    }

    #[test]
    fn hand_expanded_two_by_two() {
        // m = 2, l = 2, y = (1, 2), α_1^2 = u, α_2^1 = u (balanced), K = [[1, k], [k, 1]].
        // θ_1 = u φ_1 − u φ_2, θ_2 = −u φ_1 + u φ_2 so Σ‖θ‖² = 4u²(1 − k),
        // and the objective is 4u − 2u²(1 − k).
        let (u, kk): (f64, f64) = (0.3, 0.25);
        let k = [1.0, kk, kk, 1.0];
        let g = Gram::new(2, &k).unwrap();
        let a = vec![vec![0.0, u], vec![u, 0.0]];
        let want = 4.0 * u - 2.0 * u * u * (1.0 - kk);
        assert!((crammer_singer_objective(&a, g, &[1, 2]).unwrap() - want).abs() < 1e-15);
        assert!((crammer_singer_objective_expanded(&a, g, &[1, 2]).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn simplified_and_expanded_forms_agree() {
        for seed in 0..50 {
            let (m, l) = (6, 3);
            let (a, labels) = random_feasible(m, l, 1.0, seed);
            let k = random_gram(m, seed + 100);
            let g = Gram::new(m, &k).unwrap();
            let e35 = crammer_singer_objective(&a, g, &labels).unwrap();
            let e34 = crammer_singer_objective_expanded(&a, g, &labels).unwrap();
            assert!((e35 - e34).abs() < 1e-10, "{e35} vs {e34}");
        }
    }

    #[test]
    fn infeasible_points_are_rejected() {
        let k = random_gram(2, 3);
        let g = Gram::new(2, &k).unwrap();
        let unbalanced = vec![vec![0.0, 0.5], vec![0.0, 0.0]];
        assert!(crammer_singer_objective(&unbalanced, g, &[1, 2]).is_err());
        let own_class = vec![vec![0.1, 0.0], vec![0.1, 0.0]];
        assert!(crammer_singer_objective(&own_class, g, &[1, 2]).is_err());
    }

    #[test]
    fn solver_is_feasible_and_matches_internal_objective() {
        for seed in 0..20 {
            let (m, l) = (12, 3);
            let k = random_gram(m, seed);
            let g = Gram::new(m, &k).unwrap();
            let labels: Vec<usize> = (0..m).map(|i| i % l + 1).collect();
            let model = crammer_singer_train(g, &labels, l, &JointParams::with_c(1.0)).unwrap();
            assert!(model.converged);
            assert!(feasibility_residual(&model.alphas, &labels).unwrap() <= 1e-6);
            let obj = crammer_singer_objective(&model.alphas, g, &labels).unwrap();
            assert!((obj - model.objective).abs() < 1e-9);
            for (i, a) in model.alphas.iter().enumerate() {
                assert_eq!(a[labels[i] - 1], 0.0);
                assert!(a.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }

    #[test]
    fn separable_clusters_are_learned() {
        let centers = [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]];
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (c, ctr) in centers.iter().enumerate() {
            for d in [[0.3, 0.1], [-0.2, 0.25]] {
                pts.push([ctr[0] + d[0], ctr[1] + d[1]]);
                labels.push(c + 1);
            }
        }
        let m = pts.len();
        let k: Vec<f64> = (0..m * m)
            .map(|t| pts[t / m][0] * pts[t % m][0] + pts[t / m][1] * pts[t % m][1])
            .collect();
        let g = Gram::new(m, &k).unwrap();
        let model = crammer_singer_train(g, &labels, 3, &JointParams::with_c(100.0)).unwrap();
        for i in 0..m {
            let f = model.decision_values(g.row(i)).unwrap();
            let best = (0..3).max_by(|&a, &b| f[a].total_cmp(&f[b])).unwrap();
            assert_eq!(best + 1, labels[i]);
        }
    }
}
