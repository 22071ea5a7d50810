//! Vector logarithmic-potential equilibrium for the tridiagonal interaction matrix.
//!
//! Each set E_j is split into uniform panels carrying piecewise-constant density. Panel-pair
//! interactions use the closed form of the double integral of log|x - y| over a rectangle.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Interval;

pub type C64 = Complex<f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionMatrix {
    pub m1: usize,
    pub m2: usize,
    /// P_j for j = -m2..=m1.
    pub big_p: Vec<f64>,
    /// Dense entries, row and column j stored at j + m2.
    pub entries: Vec<Vec<f64>>,
}

fn check_probability(p: &[f64], name: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidProbability(format!("{name} is empty")));
    }
    if p.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
        return Err(Error::InvalidProbability(format!(
            "{name} has entries outside (0, 1]"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidProbability(format!("{name} sums to {s}")));
    }
    if p.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidProbability(format!(
            "{name} is not non-increasing"
        )));
    }
    Ok(())
}

pub fn build_interaction_matrix(p1: &[f64], p2: &[f64]) -> Result<InteractionMatrix> {
    check_probability(p1, "p1")?;
    check_probability(p2, "p2")?;
    let (m1, m2) = (p1.len() - 1, p2.len() - 1);
    let order = m1 + m2 + 1;
    let mut big_p = vec![0.0; order];
    for j in 0..=m1 {
        big_p[j + m2] = p1[j..].iter().sum();
    }
    for j in 1..=m2 {
        big_p[m2 - j] = p2[j..].iter().sum();
    }
    let mut entries = vec![vec![0.0; order]; order];
    for i in 0..order {
        entries[i][i] = big_p[i] * big_p[i];
        if i + 1 < order {
            let off = -big_p[i] * big_p[i + 1] / 2.0;
            entries[i][i + 1] = off;
            entries[i + 1][i] = off;
        }
    }
    let c = InteractionMatrix {
        m1,
        m2,
        big_p,
        entries,
    };
    c.cholesky()?;
    Ok(c)
}

impl InteractionMatrix {
    pub fn order(&self) -> usize {
        self.m1 + self.m2 + 1
    }

    fn slot(&self, j: i32) -> Option<usize> {
        let s = j + self.m2 as i32;
        (s >= 0 && (s as usize) < self.order()).then_some(s as usize)
    }

    /// c_{j,k} with j, k in -m2..=m1.
    pub fn c(&self, j: i32, k: i32) -> f64 {
        match (self.slot(j), self.slot(k)) {
            (Some(a), Some(b)) => self.entries[a][b],
            _ => 0.0,
        }
    }

    /// P_j, zero outside -m2..=m1.
    pub fn p(&self, j: i32) -> f64 {
        self.slot(j).map_or(0.0, |s| self.big_p[s])
    }

    pub fn as_dmatrix(&self) -> DMatrix<f64> {
        let n = self.order();
        DMatrix::from_fn(n, n, |i, k| self.entries[i][k])
    }

    pub fn cholesky(&self) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        self.as_dmatrix().cholesky().ok_or(Error::IndefiniteMatrix)
    }

    pub fn leading_minors(&self) -> Vec<f64> {
        let m = self.as_dmatrix();
        (1..=self.order())
            .map(|r| m.view((0, 0), (r, r)).into_owned().determinant())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOptions {
    pub panels_per_set: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Random initial simplex; `None` starts from uniform masses.
    pub seed: Option<u64>,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            panels_per_set: 256,
            tol: 1e-4,
            max_iter: 50_000,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumComponent {
    pub j: i32,
    pub set: Interval,
    pub midpoints: Vec<f64>,
    pub masses: Vec<f64>,
    /// Panel averages of the combined potential W_j.
    pub combined: Vec<f64>,
    /// Matrix-form constant: min over E_j of W_j.
    pub omega_prime: f64,
}

impl EquilibriumComponent {
    pub fn panel_width(&self) -> f64 {
        self.set.length() / self.masses.len() as f64
    }

    pub fn panel(&self, a: usize) -> (f64, f64) {
        let h = self.panel_width();
        (self.set.a + a as f64 * h, self.set.a + (a + 1) as f64 * h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub matrix: InteractionMatrix,
    pub components: Vec<EquilibriumComponent>,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub energy_history: Vec<f64>,
}

// G'' = log|u|
fn big_g(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * u * u.abs().ln() / 2.0 - 0.75 * u * u
    }
}

/// Mean of log(1/|x - y|) over [a, b] x [c, d].
pub fn panel_pair_kernel(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let ll = big_g(b - c) - big_g(a - c) - big_g(b - d) + big_g(a - d);
    -ll / ((b - a) * (d - c))
}

const GL3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Mean of log(1/|z - t|) over t in [x0, x1].
pub fn panel_potential(x0: f64, x1: f64, z: C64) -> f64 {
    let h = x1 - x0;
    let mid = 0.5 * (x0 + x1);
    if (z - C64::new(mid, 0.0)).norm() > 8.0 * h {
        return -GL3
            .iter()
            .map(|&(t, w)| 0.5 * w * (z - C64::new(mid + 0.5 * h * t, 0.0)).norm().ln())
            .sum::<f64>();
    }
    let (u, v) = (z.re, z.im);
    let f = |s: f64| {
        if v == 0.0 {
            if s == 0.0 {
                0.0
            } else {
                s * s.abs().ln() - s
            }
        } else {
            0.5 * s * (s * s + v * v).ln() - s + v * (s / v).atan()
        }
    };
    -(f(x1 - u) - f(x0 - u)) / h
}

/// Potential sum_i w_i log(1/|z - x_i|) of finitely many point masses.
pub fn point_potential(xs: &[f64], ws: &[f64], z: C64) -> Result<f64> {
    let mut s = 0.0;
    for (&x, &w) in xs.iter().zip(ws) {
        let d = (z - C64::new(x, 0.0)).norm();
        if d == 0.0 {
            return Err(Error::ExcludedPoint(format!(
                "{z} coincides with a mass point"
            )));
        }
        s -= w * d.ln();
    }
    Ok(s)
}

fn project_simplex(v: &mut [f64]) {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

struct Problem {
    a: DMatrix<f64>,
    blocks: Vec<std::ops::Range<usize>>,
    active_floor: f64,
}

impl Problem {
    fn energy(&self, w: &DVector<f64>) -> f64 {
        w.dot(&(&self.a * w))
    }

    fn project(&self, w: &mut DVector<f64>) {
        for r in &self.blocks {
            project_simplex(&mut w.as_mut_slice()[r.clone()]);
        }
    }

    fn residual(&self, w: &DVector<f64>, aw: &DVector<f64>) -> f64 {
        self.blocks
            .iter()
            .map(|r| {
                let om = aw.as_slice()[r.clone()]
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                r.clone()
                    .filter(|&i| w[i] > self.active_floor)
                    .map(|i| aw[i] - om)
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Minimizes the energy on the face {w_i = 0 off `free`}, moving from `w` toward the face
    /// minimizer and dropping coordinates that hit zero on the way.
    fn face_solve(&self, w: &mut DVector<f64>) {
        loop {
            let free: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
            let nb = self.blocks.len();
            let nf = free.len();
            let block_of = |i: usize| self.blocks.iter().position(|r| r.contains(&i)).unwrap();
            let mut m = DMatrix::zeros(nf + nb, nf + nb);
            let mut rhs = DVector::zeros(nf + nb);
            for (p, &i) in free.iter().enumerate() {
                for (q, &k) in free.iter().enumerate() {
                    m[(p, q)] = 2.0 * self.a[(i, k)];
                }
                let b = block_of(i);
                m[(p, nf + b)] = 1.0;
                m[(nf + b, p)] = 1.0;
            }
            for b in 0..nb {
                rhs[nf + b] = 1.0;
            }
            let Some(x) = m.lu().solve(&rhs) else { return };
            let mut t = 1.0f64;
            let mut hit = None;
            for (p, &i) in free.iter().enumerate() {
                if x[p] < 0.0 {
                    let s = w[i] / (w[i] - x[p]);
                    if s < t {
                        t = s;
                        hit = Some(i);
                    }
                }
            }
            for (p, &i) in free.iter().enumerate() {
                w[i] += t * (x[p] - w[i]);
                if w[i] < 1e-300 {
                    w[i] = 0.0;
                }
            }
            match hit {
                None => return,
                Some(i) => w[i] = 0.0,
            }
        }
    }
}

fn initial_masses(blocks: &[std::ops::Range<usize>], n: usize, seed: Option<u64>) -> DVector<f64> {
    let mut w = DVector::zeros(n);
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    for r in blocks {
        let len = r.len() as f64;
        for i in r.clone() {
            // exponential draws normalized per block give a uniform point of the simplex
            w[i] = match rng.as_mut() {
                Some(g) => -(1.0 - g.random::<f64>()).ln(),
                None => 1.0 / len,
            };
        }
        let s: f64 = r.clone().map(|i| w[i]).sum();
        for i in r.clone() {
            w[i] /= s;
        }
    }
    w
}

/// Minimizes sum c_{j,k} w_j^T K_{j,k} w_k over a product of probability simplices.
///
/// `sets[i]` is E_j for j = i - m2. Projected-gradient steps with Armijo backtracking identify
/// the support; each step is followed by an exact minimization on the current face.
pub fn solve_equilibrium(
    c: &InteractionMatrix,
    sets: &[Interval],
    opts: &EquilibriumOptions,
) -> Result<EquilibriumSolution> {
    c.cholesky()?;
    if sets.len() != c.order() {
        return Err(Error::InvalidInput(format!(
            "expected {} sets, got {}",
            c.order(),
            sets.len()
        )));
    }
    for (i, s) in sets.iter().enumerate() {
        Interval::new(s.a, s.b)?;
        if i + 1 < sets.len() && !s.disjoint(&sets[i + 1]) {
            return Err(Error::OverlappingSupports(i, i + 1));
        }
    }
    if opts.panels_per_set == 0 {
        return Err(Error::NoNodes);
    }
    let np = opts.panels_per_set;
    let nb = sets.len();
    let n = np * nb;
    let blocks: Vec<_> = (0..nb).map(|b| b * np..(b + 1) * np).collect();
    let panels: Vec<(f64, f64)> = sets
        .iter()
        .flat_map(|s| {
            let h = s.length() / np as f64;
            (0..np).map(move |a| (s.a + a as f64 * h, s.a + (a + 1) as f64 * h))
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let bi = i / np;
            (0..n)
                .map(|k| {
                    let cik = c.entries[bi][k / np];
                    if cik == 0.0 {
                        0.0
                    } else {
                        let (p, q) = (panels[i], panels[k]);
                        cik * panel_pair_kernel(p.0, p.1, q.0, q.1)
                    }
                })
                .collect()
        })
        .collect();
    let a = DMatrix::from_fn(n, n, |i, k| rows[i][k]);
    let prob = Problem {
        a,
        blocks,
        active_floor: 1e-3 / np as f64,
    };

    let mut w = initial_masses(&prob.blocks, n, opts.seed);
    let mut energy = prob.energy(&w);
    let mut history = vec![energy];
    let mut step = 1.0 / prob.a.diagonal().amax().max(1e-12);
    let mut iterations = 0;
    let mut residual;
    loop {
        let aw = &prob.a * &w;
        residual = prob.residual(&w, &aw);
        if residual <= opts.tol {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                residual,
                iterations,
            });
        }
        iterations += 1;
        let grad = &aw * 2.0;
        let mut trial;
        loop {
            trial = &w - &grad * step;
            prob.project(&mut trial);
            let d = &trial - &w;
            let e = prob.energy(&trial);
            if e <= energy + 1e-4 * grad.dot(&d) || step < 1e-20 {
                break;
            }
            step /= 2.0;
        }
        step *= 2.0;
        prob.face_solve(&mut trial);
        let e = prob.energy(&trial);
        // the face minimizer can only lower the energy; guard against round-off
        if e <= energy + 1e-14 * energy.abs().max(1.0) {
            w = trial;
            energy = e.min(energy);
        }
        history.push(energy);
    }

    let aw = &prob.a * &w;
    let components = sets
        .iter()
        .enumerate()
        .map(|(b, s)| {
            let r = prob.blocks[b].clone();
            let combined: Vec<f64> = aw.as_slice()[r.clone()].to_vec();
            let omega_prime = combined.iter().cloned().fold(f64::INFINITY, f64::min);
            EquilibriumComponent {
                j: b as i32 - c.m2 as i32,
                set: *s,
                midpoints: r
                    .clone()
                    .map(|i| 0.5 * (panels[i].0 + panels[i].1))
                    .collect(),
                masses: w.as_slice()[r].to_vec(),
                combined,
                omega_prime,
            }
        })
        .collect();
    Ok(EquilibriumSolution {
        matrix: c.clone(),
        components,
        energy,
        residual,
        iterations,
        energy_history: history,
    })
}

impl EquilibriumSolution {
    pub fn m1(&self) -> usize {
        self.matrix.m1
    }

    pub fn m2(&self) -> usize {
        self.matrix.m2
    }

    pub fn component(&self, j: i32) -> Option<&EquilibriumComponent> {
        let s = j + self.m2() as i32;
        (s >= 0).then(|| self.components.get(s as usize)).flatten()
    }

    /// V^{μ_j}(z), zero for j outside -m2..=m1.
    pub fn potential(&self, j: i32, z: C64) -> f64 {
        let Some(comp) = self.component(j) else {
            return 0.0;
        };
        comp.masses
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(a, &m)| {
                let (x0, x1) = comp.panel(a);
                m * panel_potential(x0, x1, z)
            })
            .sum()
    }

    /// W_j(z) = sum_k c_{j,k} V^{μ_k}(z).
    pub fn combined_potential(&self, j: i32, z: C64) -> f64 {
        (j - 1..=j + 1)
            .map(|k| self.matrix.c(j, k))
            .zip(j - 1..=j + 1)
            .filter(|(c, _)| *c != 0.0)
            .map(|(c, k)| c * self.potential(k, z))
            .sum()
    }

    pub fn omega_prime(&self, j: i32) -> f64 {
        self.component(j).map_or(0.0, |c| c.omega_prime)
    }

    /// Normalized constants ω_j, from ω'_j = P_j² ω_j - P_j P_{j+1} ω_{j+1} solved downward.
    pub fn omega(&self, j: i32) -> f64 {
        let m1 = self.m1() as i32;
        let mut w = 0.0;
        let mut k = m1;
        while k >= j {
            let p = self.matrix.p(k);
            w = self.omega_prime(k) / (p * p) + self.matrix.p(k + 1) / p * w;
            k -= 1;
        }
        w
    }

    /// 2 sum_{k>j} ω'_k / P_k, which equals 2 P_{j+1} ω_{j+1}.
    fn tail_constant(&self, j: i32) -> f64 {
        (j + 1..=self.m1() as i32)
            .map(|k| 2.0 * self.omega_prime(k) / self.matrix.p(k))
            .sum()
    }

    fn check_range(&self, j: i32) -> Result<()> {
        if j < -(self.m2() as i32) - 1 || j > self.m1() as i32 {
            return Err(Error::IndexOutOfRange(format!("form index {j}")));
        }
        Ok(())
    }

    fn on_set(&self, j: i32, z: C64) -> bool {
        z.im == 0.0 && self.component(j).is_some_and(|c| c.set.contains(z.re))
    }

    /// U_j(z), so that G_j = exp(-U_j).
    pub fn u(&self, j: i32, z: C64) -> Result<f64> {
        self.check_range(j)?;
        let p = &self.matrix;
        Ok(
            p.p(j) * self.potential(j, z) - p.p(j + 1) * self.potential(j + 1, z)
                + self.tail_constant(j),
        )
    }

    /// Limit G_j(z) of |A_{n,j}(z)|^{1/|n1|}, for z off E_j and E_{j+1}.
    pub fn g(&self, j: i32, z: C64) -> Result<f64> {
        self.check_range(j)?;
        if self.on_set(j, z) || self.on_set(j + 1, z) {
            return Err(Error::ExcludedPoint(format!(
                "{z} lies on E_{j} or E_{}",
                j + 1
            )));
        }
        Ok((-self.u(j, z)?).exp())
    }

    /// ζ_j = min over k = j..=m1 of U_k, for j >= 0.
    pub fn zeta(&self, j: usize, z: C64) -> Result<f64> {
        (j as i32..=self.m1() as i32)
            .map(|k| self.u(k, z))
            .try_fold(f64::INFINITY, |m, u| Ok(m.min(u?)))
    }

    /// χ_j = min over k = -1..=-j-1 of U_k, for j in 0..=m2.
    pub fn chi(&self, j: usize, z: C64) -> Result<f64> {
        (-(j as i32) - 1..=-1)
            .map(|k| self.u(k, z))
            .try_fold(f64::INFINITY, |m, u| Ok(m.min(u?)))
    }

    /// The k in `ks` with the smallest U_k(z), or `None` when the two smallest are within `margin`.
    pub fn dominant<I: IntoIterator<Item = i32>>(
        &self,
        ks: I,
        z: C64,
        margin: f64,
    ) -> Result<Option<i32>> {
        let mut vals: Vec<(f64, i32)> = ks
            .into_iter()
            .map(|k| self.u(k, z).map(|u| (u, k)))
            .collect::<Result<_>>()?;
        vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(match vals.as_slice() {
            [] => None,
            [only] => Some(only.1),
            [a, b, ..] => (b.0 - a.0 > margin).then_some(a.1),
        })
    }
}
