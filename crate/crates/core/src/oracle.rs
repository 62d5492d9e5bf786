//! Brute-force reference computations: dense evaluation of the level-set
//! function, grid-based pseudospectral abscissa, the `alpha_f^N` profile,
//! and level-set contours for plotting.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::discretization::{self, Discretization};
use crate::error::{PsaError, Result};
use crate::model::{self, ComplexPoint, PerturbationSpec, TimeDelaySystem};
use crate::numerics;

pub const DEFAULT_REFINE_ITERS: usize = 3;

/// Rectangle `[re_min, re_max] x [im_min, im_max]` sampled with
/// `n_re x n_im` nodes, edges included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRegion {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl GridRegion {
    pub fn new(
        re_min: f64,
        re_max: f64,
        im_min: f64,
        im_max: f64,
        n_re: usize,
        n_im: usize,
    ) -> Result<Self> {
        let r = Self {
            re_min,
            re_max,
            im_min,
            im_max,
            n_re,
            n_im,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|x| x.is_finite());
        if !finite || self.re_min >= self.re_max || self.im_min >= self.im_max {
            return Err(PsaError::InvalidRegion(format!(
                "[{}, {}] x [{}, {}] is empty",
                self.re_min, self.re_max, self.im_min, self.im_max
            )));
        }
        if self.n_re < 2 || self.n_im < 2 {
            return Err(PsaError::InvalidRegion(format!(
                "need at least 2x2 nodes, got {}x{}",
                self.n_re, self.n_im
            )));
        }
        Ok(())
    }

    pub fn re_step(&self) -> f64 {
        (self.re_max - self.re_min) / (self.n_re - 1) as f64
    }

    pub fn im_step(&self) -> f64 {
        (self.im_max - self.im_min) / (self.n_im - 1) as f64
    }

    pub fn re_at(&self, i: usize) -> f64 {
        if i + 1 == self.n_re {
            self.re_max
        } else {
            self.re_min + i as f64 * self.re_step()
        }
    }

    pub fn im_at(&self, j: usize) -> f64 {
        if j + 1 == self.n_im {
            self.im_max
        } else {
            self.im_min + j as f64 * self.im_step()
        }
    }

    pub fn node(&self, i: usize, j: usize) -> ComplexPoint {
        Complex64::new(self.re_at(i), self.im_at(j))
    }

    /// A region with upper half-plane imaginary range `[0, R]` and right
    /// edge `re_max` chosen so the whole pseudospectrum right of `re_min`
    /// fits: `sigma_min(F(lambda)) >= |lambda| - sum ||A_i|| e^{-sigma tau_i}`
    /// bounds `|lambda|` by `sum (||A_i|| + epsilon / w_i) e^{-re_min tau_i}`.
    pub fn enclosing(
        sys: &TimeDelaySystem,
        pert: &PerturbationSpec,
        re_min: f64,
        n_re: usize,
        n_im: usize,
    ) -> Result<Self> {
        let bound: f64 = sys
            .matrices()
            .iter()
            .zip(sys.delays())
            .zip(pert.weights())
            .map(|((a, &tau), w)| {
                (a.norm() + pert.epsilon() * w.reciprocal()) * (-re_min * tau).exp()
            })
            .sum();
        let r = 1.05 * bound + 0.1;
        Self::new(re_min, r.max(re_min + 0.5), 0.0, r, n_re, n_im)
    }
}

/// Values on a region, stored row by row in the imaginary direction:
/// `values[j * n_re + i]` is the node `(re_at(i), im_at(j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub region: GridRegion,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.region.n_re + i]
    }
}

/// `f(lambda)` at every node; `+inf` at characteristic roots.
pub fn grid_f(sys: &TimeDelaySystem, pert: &PerturbationSpec, region: &GridRegion) -> Result<Grid> {
    region.validate()?;
    pert.check_against(sys)?;
    Ok(sample(region, |z| model::eval_level(sys, pert, z)))
}

fn sample<F: Fn(ComplexPoint) -> f64 + Sync>(region: &GridRegion, f: F) -> Grid {
    let values = (0..region.n_re * region.n_im)
        .into_par_iter()
        .map(|idx| f(region.node(idx % region.n_re, idx / region.n_re)))
        .collect();
    Grid {
        region: *region,
        values,
    }
}

/// Outcome of the brute-force abscissa search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPsa {
    pub alpha: f64,
    /// Imaginary part of the maximizing node.
    pub omega: f64,
    /// Real cell width of the finest grid.
    pub resolution: f64,
}

/// Largest real part over nodes with `f >= 1/epsilon`, followed by
/// `refine_iters` rounds of 10x local refinement around the best nodes.
pub fn grid_psa(
    sys: &TimeDelaySystem,
    pert: &PerturbationSpec,
    region: &GridRegion,
    refine_iters: usize,
) -> Result<GridPsa> {
    let level = 1.0 / pert.epsilon();
    let grid = grid_f(sys, pert, region)?;
    let edge_max = (0..region.n_im)
        .map(|j| grid.at(region.n_re - 1, j))
        .fold(0.0, f64::max);
    if edge_max >= level {
        return Err(PsaError::RegionTooSmall {
            max_edge_value: edge_max,
        });
    }
    let mut candidates = rightmost_candidates(&grid, level);
    if candidates.is_empty() {
        return Err(PsaError::EmptyPseudospectrum);
    }
    let mut best = candidates[0];
    let (mut h_re, mut h_im) = (region.re_step(), region.im_step());
    for _ in 0..refine_iters {
        let mut next = Vec::new();
        for c in &candidates {
            let im_min = c.im_lo - h_im;
            let im_max = c.im_hi + h_im;
            let n_im = (((im_max - im_min) / (0.1 * h_im)).ceil() as usize + 1).clamp(41, 2001);
            let sub = GridRegion {
                re_min: c.re - h_re,
                re_max: c.re + 2.0 * h_re,
                im_min,
                im_max,
                n_re: 31,
                n_im,
            };
            let g = sample(&sub, |z| model::eval_level(sys, pert, z));
            next.extend(rightmost_candidates(&g, level));
        }
        h_re /= 10.0;
        h_im /= 10.0;
        if next.is_empty() {
            break;
        }
        next.sort_by(|a, b| b.re.total_cmp(&a.re));
        let top = next[0].re;
        next.retain(|c| c.re >= top - 0.5 * h_re);
        next.truncate(8);
        best = next[0];
        candidates = next;
    }
    Ok(GridPsa {
        alpha: best.re,
        omega: best.im().abs(),
        resolution: h_re,
    })
}

/// A run of consecutive grid rows whose rightmost superlevel node sits in
/// the rightmost column reached.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    re: f64,
    im_lo: f64,
    im_hi: f64,
}

impl Candidate {
    fn im(&self) -> f64 {
        0.5 * (self.im_lo + self.im_hi)
    }
}

fn rightmost_candidates(grid: &Grid, level: f64) -> Vec<Candidate> {
    let r = &grid.region;
    let row_max: Vec<Option<usize>> = (0..r.n_im)
        .map(|j| (0..r.n_re).rev().find(|&i| grid.at(i, j) >= level))
        .collect();
    let Some(col) = row_max.iter().flatten().copied().max() else {
        return vec![];
    };
    let mut out = Vec::new();
    let mut j = 0;
    while j < r.n_im {
        if row_max[j] == Some(col) {
            let start = j;
            while j < r.n_im && row_max[j] == Some(col) {
                j += 1;
            }
            out.push(Candidate {
                re: r.re_at(col),
                im_lo: r.im_at(start),
                im_hi: r.im_at(j - 1),
            });
        } else {
            j += 1;
        }
    }
    out.truncate(8);
    out
}

/// `f_N(lambda) = w(Re lambda) / sigma_min(F_N(lambda))` through the
/// rational approximation; `+inf` at poles of `F_N^{-1}`.
pub fn eval_level_fn(disc: &Discretization, pert: &PerturbationSpec, lambda: ComplexPoint) -> f64 {
    let w = model::eval_weight(pert, &disc.system, lambda.re);
    match discretization::eval_fn(disc, lambda) {
        Ok(f) => {
            let smin = numerics::singular_values(&f).last().copied().unwrap_or(0.0);
            if smin == 0.0 {
                f64::INFINITY
            } else {
                w / smin
            }
        }
        Err(_) => 0.0,
    }
}

/// `alpha_f^N(sigma) = sup_omega f_N(sigma + j omega)` for each sample:
/// an `omega` grid on `[0, omega_max]` (augmented with the imaginary parts
/// of the roots of `F_N`) followed by golden-section refinement.
pub fn alpha_fn_profile(
    disc: &Discretization,
    pert: &PerturbationSpec,
    sigma_samples: &[f64],
    omega_max: f64,
    n_omega: usize,
) -> Result<Vec<f64>> {
    let poles: Vec<f64> = discretization::roots_fn(disc)?
        .iter()
        .map(|z| z.im.abs())
        .collect();
    let n_omega = n_omega.max(2);
    let step = omega_max / (n_omega - 1) as f64;
    let mut nodes: Vec<f64> = (0..n_omega).map(|k| k as f64 * step).collect();
    nodes.extend(poles.iter().copied().filter(|&w| w <= omega_max));
    nodes.sort_by(f64::total_cmp);
    Ok(sigma_samples
        .par_iter()
        .map(|&sigma| {
            let f = |w: f64| eval_level_fn(disc, pert, Complex64::new(sigma, w));
            let (best_idx, best_val) = nodes
                .iter()
                .enumerate()
                .map(|(k, &w)| (k, f(w)))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            let lo = if best_idx == 0 {
                0.0
            } else {
                nodes[best_idx - 1]
            };
            let hi = nodes.get(best_idx + 1).copied().unwrap_or(nodes[best_idx]);
            golden_max(f, lo, hi, 60).max(best_val)
        })
        .collect())
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// Polylines of the level set `f = level`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourSet {
    pub level: f64,
    /// Closed polylines repeat their first vertex at the end.
    pub polylines: Vec<Vec<ComplexPoint>>,
}

impl ContourSet {
    pub fn rightmost(&self) -> Option<ComplexPoint> {
        self.polylines
            .iter()
            .flatten()
            .copied()
            .max_by(|a, b| a.re.total_cmp(&b.re))
    }
}

/// Marching squares for `f = 1/epsilon`. Interpolation runs on `1/f`,
/// which stays finite and smooth through characteristic roots.
pub fn contours(
    sys: &TimeDelaySystem,
    pert: &PerturbationSpec,
    region: &GridRegion,
) -> Result<ContourSet> {
    let grid = grid_f(sys, pert, region)?;
    let level = 1.0 / pert.epsilon();
    let inv = Grid {
        region: *region,
        values: grid.values.iter().map(|&f| 1.0 / f).collect(),
    };
    Ok(ContourSet {
        level,
        polylines: marching_squares(&inv, pert.epsilon()),
    })
}

/// Cell-edge identifier: horizontal edge `(i, j)-(i+1, j)` or vertical
/// edge `(i, j)-(i, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Level set `g = level` of a sampled field, where "inside" is `g < level`.
pub fn marching_squares(g: &Grid, level: f64) -> Vec<Vec<ComplexPoint>> {
    let r = &g.region;
    let inside = |i: usize, j: usize| g.at(i, j) < level;
    let point = |e: Edge| -> ComplexPoint {
        let ((i0, j0), (i1, j1)) = match e {
            Edge::H(i, j) => ((i, j), (i + 1, j)),
            Edge::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (a, b) = (g.at(i0, j0), g.at(i1, j1));
        let t = if a == b {
            0.5
        } else {
            ((level - a) / (b - a)).clamp(0.0, 1.0)
        };
        r.node(i0, j0) + (r.node(i1, j1) - r.node(i0, j0)) * t
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..r.n_im - 1 {
        for i in 0..r.n_re - 1 {
            // Corners counter-clockwise from bottom-left.
            let bl = inside(i, j);
            let br = inside(i + 1, j);
            let tr = inside(i + 1, j + 1);
            let tl = inside(i, j + 1);
            let (bottom, right, top, left) = (
                Edge::H(i, j),
                Edge::V(i + 1, j),
                Edge::H(i, j + 1),
                Edge::V(i, j),
            );
            let case = (bl as u8) | (br as u8) << 1 | (tr as u8) << 2 | (tl as u8) << 3;
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((left, top)),
                5 | 10 => {
                    let center =
                        0.25 * (g.at(i, j) + g.at(i + 1, j) + g.at(i + 1, j + 1) + g.at(i, j + 1));
                    let center_inside = center < level;
                    // case 5: bl and tr inside.
                    if (case == 5) == center_inside {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    chain(segments)
        .into_iter()
        .map(|edges| edges.into_iter().map(point).collect())
        .collect()
}

fn chain(segments: Vec<(Edge, Edge)>) -> Vec<Vec<Edge>> {
    let mut adjacency: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        adjacency.entry(*a).or_default().push(k);
        adjacency.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let extend = |line: &mut Vec<Edge>, used: &mut Vec<bool>| loop {
        let tail = *line.last().unwrap();
        let Some(&k) = adjacency[&tail].iter().find(|&&k| !used[k]) else {
            break;
        };
        used[k] = true;
        let (a, b) = segments[k];
        line.push(if a == tail { b } else { a });
    };
    // Open lines start at edges touched by a single segment (region border).
    let mut starts: Vec<usize> = (0..segments.len())
        .filter(|&k| adjacency[&segments[k].0].len() == 1 || adjacency[&segments[k].1].len() == 1)
        .collect();
    starts.extend(0..segments.len());
    for k in starts {
        if used[k] {
            continue;
        }
        used[k] = true;
        let (a, b) = segments[k];
        let mut line = if adjacency[&b].len() == 1 {
            vec![b, a]
        } else {
            vec![a, b]
        };
        extend(&mut line, &mut used);
        lines.push(line);
    }
    lines
}
