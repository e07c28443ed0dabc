//! Conjugacy `h = id + u` with `g o h = h o f` between a linear Anosov map
//! `f = L` and a perturbation `g = L o S`.
//!
//! `u` is solved for on the `N x N` lattice, which `L` permutes, so the
//! lattice values are the exact fixed point of the functional equation
//! (up to rounding). Off-lattice values come from periodic bilinear
//! interpolation; the audit residual measures that representation error.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{BaseMap, MapKind};
use crate::classify::{holder_pairs, holder_seminorm, seminorm_over};
use crate::cocycle::{Cocycle, TransportDirection};
use crate::error::{Error, Result};
use crate::mat2::{IntMat2, Mat2};
use crate::product::ProductWalker;
use crate::rng;
use crate::torus::{wrap_unit, TorusPoint};

pub const MIN_RESOLUTION: usize = 64;
pub const MAX_SWEEPS: usize = 10_000;
/// The displacement must stay below this in sup norm.
pub const MAX_DISPLACEMENT: f64 = 0.25;
/// Audit lattice refinement relative to the solution grid.
pub const AUDIT_REFINEMENT: usize = 4;
/// Per-point tolerance of the inverse.
pub const INVERSE_TOL: f64 = 1e-12;
const INVERSE_MAX_ITER: usize = 100;
const STALL_SWEEPS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugacyMap {
    resolution: usize,
    /// Row-major `i * N + j`, node `(i/N, j/N)`.
    du: Vec<f64>,
    dv: Vec<f64>,
    residual: f64,
}

/// Diagnostics of a conjugacy solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub sweeps: usize,
    /// Residual at the lattice nodes themselves.
    pub lattice_residual: f64,
    /// Residual on the refined audit lattice (the declared residual).
    pub audit_residual: f64,
    pub sup_displacement: f64,
    pub lipschitz: f64,
    pub min_jacobian_det: f64,
}

impl ConjugacyMap {
    pub fn identity(resolution: usize) -> Self {
        let n = resolution.max(1);
        ConjugacyMap {
            resolution: n,
            du: vec![0.0; n * n],
            dv: vec![0.0; n * n],
            residual: 0.0,
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn is_identity(&self) -> bool {
        self.du.iter().chain(&self.dv).all(|&x| x == 0.0)
    }

    pub fn node_displacement(&self, i: usize, j: usize) -> [f64; 2] {
        let k = i * self.resolution + j;
        [self.du[k], self.dv[k]]
    }

    /// Interpolated displacement `u(p)`.
    pub fn displacement(&self, p: TorusPoint) -> [f64; 2] {
        self.displacement_with_jacobian(p).0
    }

    /// `u(p)` and its derivative inside the interpolation cell.
    fn displacement_with_jacobian(&self, p: TorusPoint) -> ([f64; 2], Mat2) {
        let n = self.resolution;
        let nf = n as f64;
        let x = p.u() * nf;
        let y = p.v() * nf;
        let (xf, yf) = (x.floor(), y.floor());
        let (s, t) = (x - xf, y - yf);
        let i0 = (xf as usize) % n;
        let j0 = (yf as usize) % n;
        let i1 = (i0 + 1) % n;
        let j1 = (j0 + 1) % n;
        let (k00, k01, k10, k11) = (i0 * n + j0, i0 * n + j1, i1 * n + j0, i1 * n + j1);
        let field = |c: &[f64]| {
            let (f00, f01, f10, f11) = (c[k00], c[k01], c[k10], c[k11]);
            let val = (1.0 - s) * (1.0 - t) * f00 + (1.0 - s) * t * f01 + s * (1.0 - t) * f10 + s * t * f11;
            let ds = ((1.0 - t) * (f10 - f00) + t * (f11 - f01)) * nf;
            let dt = ((1.0 - s) * (f01 - f00) + s * (f11 - f10)) * nf;
            (val, ds, dt)
        };
        let (a, au, av) = field(&self.du);
        let (b, bu, bv) = field(&self.dv);
        ([a, b], Mat2::new(au, av, bu, bv))
    }

    /// `h(p) = p + u(p)`.
    pub fn apply(&self, p: TorusPoint) -> TorusPoint {
        let d = self.displacement(p);
        p.translate(d[0], d[1])
    }

    /// `h^{-1}(q)`: damped Newton iteration on `x + u(x) = q`, starting at
    /// `x = q` and halving the step until the residual decreases.
    pub fn try_inverse(&self, q: TorusPoint) -> Result<TorusPoint> {
        if self.is_identity() {
            return Ok(q);
        }
        let mut x = q;
        let mut err = self.apply(x).distance(&q);
        for _ in 0..INVERSE_MAX_ITER {
            if err <= INVERSE_TOL {
                return Ok(x);
            }
            let (d, du) = self.displacement_with_jacobian(x);
            let r = q.delta(&x.translate(d[0], d[1]));
            let step = (Mat2::IDENTITY + du).inverse().map(|j| j.apply(r)).unwrap_or(r);
            let mut omega = 1.0;
            loop {
                let cand = x.translate(omega * step[0], omega * step[1]);
                let cerr = self.apply(cand).distance(&q);
                if cerr < err {
                    x = cand;
                    err = cerr;
                    break;
                }
                omega *= 0.5;
                if omega < 1e-9 {
                    return Err(Error::InversionFailed { u: q.u(), v: q.v() });
                }
            }
        }
        if err <= INVERSE_TOL {
            Ok(x)
        } else {
            Err(Error::InversionFailed { u: q.u(), v: q.v() })
        }
    }

    /// Infallible inverse used during cocycle evaluation; best iterate on
    /// failure.
    pub fn inverse(&self, q: TorusPoint) -> TorusPoint {
        match self.try_inverse(q) {
            Ok(x) => x,
            Err(_) => {
                let d = self.displacement(q);
                q.translate(-d[0], -d[1])
            }
        }
    }

    pub fn sup_displacement(&self) -> f64 {
        self.du.iter().zip(&self.dv).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
    }

    /// Smallest `det(I + Du)` over the cells, `Du` from forward differences.
    pub fn min_jacobian_det(&self) -> f64 {
        let n = self.resolution;
        let nf = n as f64;
        let mut worst = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                let ku = ((i + 1) % n) * n + j;
                let kv = i * n + (j + 1) % n;
                let j11 = 1.0 + (self.du[ku] - self.du[k]) * nf;
                let j21 = (self.dv[ku] - self.dv[k]) * nf;
                let j12 = (self.du[kv] - self.du[k]) * nf;
                let j22 = 1.0 + (self.dv[kv] - self.dv[k]) * nf;
                worst = worst.min(j11 * j22 - j12 * j21);
            }
        }
        worst
    }

    /// Bound on the Lipschitz constant of the interpolated `u`
    /// (`sup |du/du| + sup |du/dv|`).
    pub fn lipschitz(&self) -> f64 {
        let n = self.resolution;
        let mut gu: f64 = 0.0;
        let mut gv: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                let ku = ((i + 1) % n) * n + j;
                let kv = i * n + (j + 1) % n;
                gu = gu.max((self.du[ku] - self.du[k]).hypot(self.dv[ku] - self.dv[k]));
                gv = gv.max((self.du[kv] - self.du[k]).hypot(self.dv[kv] - self.dv[k]));
            }
        }
        (gu + gv) * n as f64
    }

    pub fn to_text(&self) -> String {
        let n = self.resolution;
        let mut s = String::with_capacity(n * n * 48 + 64);
        writeln!(s, "conjugacy v1 resolution={} residual={:e}", n, self.residual).unwrap();
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                writeln!(s, "{} {} {:e} {:e}", i, j, self.du[k], self.dv[k]).unwrap();
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty conjugacy file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (n, residual) = match fields.as_slice() {
            ["conjugacy", "v1", res, resid] => {
                let n = res
                    .strip_prefix("resolution=")
                    .and_then(|x| x.parse::<usize>().ok())
                    .filter(|&n| n > 0)
                    .ok_or_else(|| Error::Parse(format!("line 1: bad resolution field `{res}`")))?;
                let r = resid
                    .strip_prefix("residual=")
                    .and_then(|x| x.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse(format!("line 1: bad residual field `{resid}`")))?;
                (n, r)
            }
            _ => return Err(Error::Parse(format!("line 1: bad header `{header}`"))),
        };
        let mut du = vec![f64::NAN; n * n];
        let mut dv = vec![f64::NAN; n * n];
        let mut seen = vec![false; n * n];
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Parse(format!("line {}: expected `i j du dv`", ln + 1));
            let mut it = line.split_whitespace();
            let i: usize = it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            let j: usize = it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            let a: f64 = it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            let b: f64 = it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            if it.next().is_some() || i >= n || j >= n {
                return Err(bad());
            }
            let k = i * n + j;
            if seen[k] {
                return Err(Error::Parse(format!("line {}: duplicate node ({i}, {j})", ln + 1)));
            }
            seen[k] = true;
            du[k] = a;
            dv[k] = b;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::Parse(format!("missing node ({}, {})", k / n, k % n)));
        }
        Ok(ConjugacyMap { resolution: n, du, dv, residual })
    }
}

struct Splitting {
    lam_u: f64,
    lam_s: f64,
    e_u: [f64; 2],
    e_s: [f64; 2],
    /// Dual basis: `l_u . e_u = 1`, `l_u . e_s = 0`, etc.
    l_u: [f64; 2],
    l_s: [f64; 2],
}

fn splitting(l: IntMat2) -> Splitting {
    let m = l.to_f64();
    let (big, small) = m.real_eigenvalues().expect("hyperbolic matrix has real eigenvalues");
    let e_u = m.eigenvector(big);
    let e_s = m.eigenvector(small);
    let p = Mat2::new(e_u[0], e_s[0], e_u[1], e_s[1]);
    let pi = p.inverse().expect("eigenvectors are independent");
    Splitting {
        lam_u: big,
        lam_s: small,
        e_u,
        e_s,
        l_u: [pi.a, pi.b],
        l_s: [pi.c, pi.d],
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn check_pair(f: &BaseMap, g: &BaseMap) -> Result<IntMat2> {
    let l = match *f.kind() {
        MapKind::LinearToral { l } => l,
        _ => return Err(Error::Precondition("conjugacy source must be a linear toral map".into())),
    };
    match *g.kind() {
        MapKind::PerturbedToral { l: lg, .. } if lg == l => {}
        MapKind::PerturbedToral { .. } => {
            return Err(Error::Precondition("perturbation's linear part differs from the source map".into()))
        }
        _ => return Err(Error::Precondition("conjugacy target must be a perturbed toral map".into())),
    }
    if l.trace().abs() <= 2 {
        return Err(Error::BaseNotHyperbolic);
    }
    Ok(l)
}

/// Sup over `points` of `d(g(h(x)), h(f(x)))`.
fn residual_over<I>(h: &ConjugacyMap, f: &BaseMap, g: &BaseMap, points: I) -> f64
where
    I: IndexedParallelIterator<Item = TorusPoint>,
{
    points
        .map(|x| g.apply(h.apply(x)).distance(&h.apply(f.apply(x))))
        .reduce(|| 0.0, f64::max)
}

/// Residual on the `m x m` lattice.
pub fn audit_residual(h: &ConjugacyMap, f: &BaseMap, g: &BaseMap, m: usize) -> f64 {
    let inv = 1.0 / m as f64;
    residual_over(
        h,
        f,
        g,
        (0..m * m).into_par_iter().map(move |k| TorusPoint::new((k / m) as f64 * inv, (k % m) as f64 * inv)),
    )
}

/// Residual at `samples` seeded uniform points, independent of any lattice.
pub fn sampled_residual(h: &ConjugacyMap, f: &BaseMap, g: &BaseMap, samples: usize, seed: u64) -> f64 {
    let mut r = rng::substream(seed, 0);
    let pts: Vec<TorusPoint> = (0..samples).map(|_| rng::uniform_point(&mut r)).collect();
    residual_over(h, f, g, pts.into_par_iter())
}

/// Solves for `h` and reports diagnostics. Fails with `NoConjugacy` when the
/// audit residual stays above `tol`.
pub fn solve_conjugacy(f: &BaseMap, g: &BaseMap, resolution: usize, tol: f64) -> Result<(ConjugacyMap, SolveStats)> {
    let l = check_pair(f, g)?;
    if resolution < MIN_RESOLUTION {
        return Err(Error::Precondition(format!(
            "conjugacy resolution must be >= {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let n = resolution;
    let nn = n * n;
    let sp = splitting(l);
    let li = l.unimodular_inverse().expect("validated unimodular");
    let ni = n as i64;
    let index_of = |m: IntMat2, k: usize| {
        let (i, j) = ((k / n) as i64, (k % n) as i64);
        let a = (m.a * i + m.b * j).rem_euclid(ni) as usize;
        let b = (m.c * i + m.d * j).rem_euclid(ni) as usize;
        a * n + b
    };
    let fwd: Vec<usize> = (0..nn).map(|k| index_of(l, k)).collect();
    let bwd: Vec<usize> = (0..nn).map(|k| index_of(li, k)).collect();
    let node = |k: usize| [(k / n) as f64 / n as f64, (k % n) as f64 / n as f64];
    // phi(y) = g(y) - L y on lifts; periodic in y.
    let phi = |y: [f64; 2]| {
        let gy = g.lift_apply(y).expect("toral");
        let ly = l.apply(y);
        [gy[0] - ly[0], gy[1] - ly[1]]
    };

    let mut a = vec![0.0; nn];
    let mut b = vec![0.0; nn];
    let mut sweeps = 0;
    // Once rounding dominates, the increment stops reaching new lows.
    let mut best_change = f64::INFINITY;
    let mut since_best = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let ph: Vec<[f64; 2]> = (0..nn)
            .into_par_iter()
            .map(|k| {
                let x = node(k);
                phi([
                    x[0] + a[k] * sp.e_u[0] + b[k] * sp.e_s[0],
                    x[1] + a[k] * sp.e_u[1] + b[k] * sp.e_s[1],
                ])
            })
            .collect();
        let next: Vec<(f64, f64)> = (0..nn)
            .into_par_iter()
            .map(|k| {
                let an = (a[fwd[k]] - dot(sp.l_u, ph[k])) / sp.lam_u;
                let kb = bwd[k];
                let bn = sp.lam_s * b[kb] + dot(sp.l_s, ph[kb]);
                (an, bn)
            })
            .collect();
        let mut change: f64 = 0.0;
        for (k, (an, bn)) in next.into_iter().enumerate() {
            change = change.max((an - a[k]).abs() + (bn - b[k]).abs());
            a[k] = an;
            b[k] = bn;
        }
        if !change.is_finite() || change == 0.0 {
            break;
        }
        if change < best_change {
            best_change = change;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STALL_SWEEPS {
                break;
            }
        }
    }

    let mut du = vec![0.0; nn];
    let mut dv = vec![0.0; nn];
    for k in 0..nn {
        du[k] = a[k] * sp.e_u[0] + b[k] * sp.e_s[0];
        dv[k] = a[k] * sp.e_u[1] + b[k] * sp.e_s[1];
    }
    let mut h = ConjugacyMap {
        resolution: n,
        du,
        dv,
        residual: 0.0,
    };
    let sup = h.sup_displacement();
    if !(sup <= MAX_DISPLACEMENT) {
        return Err(Error::NoConjugacy {
            resolution: n,
            residual: f64::INFINITY,
            sweeps,
        });
    }
    let lattice_residual = residual_over(&h, f, g, (0..nn).into_par_iter().map(|k| {
        let x = node(k);
        TorusPoint::new(x[0], x[1])
    }));
    let audit = audit_residual(&h, f, g, AUDIT_REFINEMENT * n);
    h.residual = audit;
    let stats = SolveStats {
        sweeps,
        lattice_residual,
        audit_residual: audit,
        sup_displacement: sup,
        lipschitz: h.lipschitz(),
        min_jacobian_det: h.min_jacobian_det(),
    };
    if audit > tol {
        return Err(Error::NoConjugacy {
            resolution: n,
            residual: audit,
            sweeps,
        });
    }
    Ok((h, stats))
}

pub fn compute_conjugacy(f: &BaseMap, g: &BaseMap, resolution: usize, tol: f64) -> Result<ConjugacyMap> {
    solve_conjugacy(f, g, resolution, tol).map(|(h, _)| h)
}

/// `B o h` or `B o h^{-1}`; requires `I + Du` nonsingular on every cell.
pub fn transport_cocycle(b: &Cocycle, h: &Arc<ConjugacyMap>, direction: TransportDirection) -> Result<Cocycle> {
    let det = h.min_jacobian_det();
    if !(det > 0.0) {
        return Err(Error::Precondition(format!(
            "conjugacy not invertible on its grid: min det(I + Du) = {det}"
        )));
    }
    if h.sup_displacement() > MAX_DISPLACEMENT {
        return Err(Error::Precondition("conjugacy displacement exceeds 0.25".into()));
    }
    Ok(Cocycle::Transported {
        base: Box::new(b.clone()),
        conjugacy: Arc::clone(h),
        direction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportIdentityReport {
    /// Max over `k <= n` of the relative defect between the two products.
    pub max_defect: f64,
    pub n: u64,
    pub residual: f64,
    /// Sampled Lipschitz seminorm of `B`, when `B` is a continuous family.
    pub seminorm: Option<f64>,
    /// `max_defect / (n * residual * seminorm)` when the denominator is positive.
    pub constant: Option<f64>,
    /// Max over `k <= n` of `d(g^k(p), h(f^k(h^{-1} p)))`.
    pub orbit_divergence: f64,
}

/// Compares `B~^n(p)` for `B~ = B o h^{-1}` over `g` against `B^n(h^{-1} p)`
/// over `f`.
pub fn verify_transport_identity(
    b: &Cocycle,
    f: &BaseMap,
    g: &BaseMap,
    h: &Arc<ConjugacyMap>,
    p: TorusPoint,
    n: u64,
) -> Result<TransportIdentityReport> {
    if n == 0 {
        return Err(Error::Precondition("n must be >= 1".into()));
    }
    let tilde = Cocycle::Transported {
        base: Box::new(b.clone()),
        conjugacy: Arc::clone(h),
        direction: TransportDirection::Inverse,
    };
    let start = h.inverse(p);
    let mut wt = ProductWalker::new(&tilde, g, p);
    let mut wo = ProductWalker::new(b, f, start);
    let mut max_defect: f64 = 0.0;
    let mut divergence: f64 = 0.0;
    for _ in 0..n {
        wt.step();
        wo.step();
        max_defect = max_defect.max(wt.product().relative_defect(wo.product()));
        divergence = divergence.max(wt.point().distance(&h.apply(wo.point())));
    }
    let seminorm = if b.is_continuous_family() {
        Some(holder_seminorm(b, 1.0, 1000, 0)?.value)
    } else {
        None
    };
    let denom = seminorm.map(|s| n as f64 * h.residual() * s);
    let constant = denom.filter(|&d| d > 0.0).map(|d| max_defect / d);
    Ok(TransportIdentityReport {
        max_defect,
        n,
        residual: h.residual(),
        seminorm,
        constant,
        orbit_divergence: divergence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderExponentEstimate {
    pub gamma_hat: f64,
    pub r2: f64,
    /// Set when every sampled displacement difference is below `1e-12`.
    pub identity_degenerate: bool,
}

const EXPONENT_K: std::ops::RangeInclusive<i32> = 2..=10;

/// Fits `log max |u(x) - u(y)|` against `log d(x, y)` over dyadic
/// separations.
pub fn holder_exponent_estimate(h: &ConjugacyMap, pairs: usize, seed: u64) -> Result<HolderExponentEstimate> {
    if pairs < 1000 {
        return Err(Error::Precondition(format!("holder_exponent_estimate needs >= 1000 pairs, got {pairs}")));
    }
    let bins = EXPONENT_K.count();
    let per_bin = pairs.div_ceil(bins);
    let mut r = rng::substream(seed, 1);
    let mut xs = Vec::with_capacity(bins);
    let mut ys = Vec::with_capacity(bins);
    let mut largest: f64 = 0.0;
    for k in EXPONENT_K {
        let s = 2f64.powi(-k);
        let mut best: f64 = 0.0;
        for _ in 0..per_bin {
            let x = rng::uniform_point(&mut r);
            let t: f64 = r.gen::<f64>() * std::f64::consts::TAU;
            let y = x.translate(s * t.cos(), s * t.sin());
            let (a, b) = (h.displacement(x), h.displacement(y));
            best = best.max((a[0] - b[0]).hypot(a[1] - b[1]));
        }
        largest = largest.max(best);
        if best > 0.0 {
            xs.push(s.ln());
            ys.push(best.ln());
        }
    }
    if largest < 1e-12 || xs.len() < 2 {
        return Ok(HolderExponentEstimate {
            gamma_hat: 1.0,
            r2: 1.0,
            identity_degenerate: true,
        });
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(HolderExponentEstimate {
        gamma_hat: slope.clamp(f64::MIN_POSITIVE, 1.0),
        r2,
        identity_degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportedSeminorm {
    /// Sampled `|B o h - A|_nu`.
    pub seminorm: f64,
    /// `s_diff * h_holder + s_shift`.
    pub bound: f64,
    /// Sampled `|B - A|_nu` over the image pairs `(h x, h y)`.
    pub s_diff: f64,
    /// Sampled `max (d(hx, hy) / d(x, y))^nu`.
    pub h_holder: f64,
    /// Sampled `|A o h - A|_nu`.
    pub s_shift: f64,
}

/// Splits `B o h - A = (B - A) o h + (A o h - A)` and bounds each piece on
/// the same pair set, so `seminorm <= bound` holds pair by pair.
pub fn transported_seminorm_check(
    a: &Cocycle,
    b: &Cocycle,
    h: &ConjugacyMap,
    nu: f64,
    pairs: usize,
    seed: u64,
) -> Result<TransportedSeminorm> {
    // Validates nu, pair count and continuity of both families.
    holder_seminorm(a, nu, pairs.max(100), seed)?;
    holder_seminorm(b, nu, pairs.max(100), seed)?;
    let set = holder_pairs(pairs.max(100), seed);
    let image: Vec<(TorusPoint, TorusPoint)> = set.par_iter().map(|(x, y)| (h.apply(*x), h.apply(*y))).collect();
    let seminorm = seminorm_over(&set, nu, |p| b.eval(h.apply(p)) - a.eval(p));
    let s_diff = seminorm_over(&image, nu, |p| b.eval(p) - a.eval(p));
    let s_shift = seminorm_over(&set, nu, |p| a.eval(h.apply(p)) - a.eval(p));
    let h_holder = set
        .par_iter()
        .zip(image.par_iter())
        .map(|((x, y), (hx, hy))| {
            let d = x.distance(y);
            if d == 0.0 {
                0.0
            } else {
                (hx.distance(hy) / d).powf(nu)
            }
        })
        .reduce(|| 0.0, f64::max);
    Ok(TransportedSeminorm {
        seminorm,
        bound: s_diff * h_holder + s_shift,
        s_diff,
        h_holder,
        s_shift,
    })
}

/// Fixed point of `g` nearest `guess` by Newton's method on the lift.
pub fn newton_fixed_point(g: &BaseMap, guess: TorusPoint) -> Option<TorusPoint> {
    let mut x = guess.coords();
    for _ in 0..50 {
        let gx = g.lift_apply(x)?;
        // Residual g(x) - x reduced to the nearest lattice translate.
        let r = [gx[0] - x[0] - (gx[0] - x[0]).round(), gx[1] - x[1] - (gx[1] - x[1]).round()];
        if r[0].abs() + r[1].abs() < 1e-15 {
            break;
        }
        let j = g.jacobian(TorusPoint::new(x[0], x[1])) - Mat2::IDENTITY;
        let step = j.inverse()?.apply(r);
        x = [x[0] - step[0], x[1] - step[1]];
    }
    Some(TorusPoint::new(wrap_unit(x[0]), wrap_unit(x[1])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::PerturbationMode;
    use crate::cocycle::Potential;
    use std::sync::OnceLock;

    fn cat_l() -> IntMat2 {
        IntMat2::new(2, 1, 1, 1)
    }

    fn perturbed(eps: f64) -> BaseMap {
        BaseMap::perturbed_toral(cat_l(), eps, PerturbationMode::ShearPair).unwrap()
    }

    fn h_small() -> Arc<ConjugacyMap> {
        static H: OnceLock<Arc<ConjugacyMap>> = OnceLock::new();
        H.get_or_init(|| Arc::new(compute_conjugacy(&BaseMap::cat_map(), &perturbed(0.01), 64, 1e-2).unwrap()))
            .clone()
    }

    #[test]
    fn zero_perturbation_gives_identity() {
        let (h, stats) = solve_conjugacy(&BaseMap::cat_map(), &perturbed(0.0), 64, 1e-12).unwrap();
        assert!(h.is_identity());
        assert_eq!(h.residual(), 0.0);
        assert_eq!(stats.lattice_residual, 0.0);
    }

    #[test]
    fn lattice_values_solve_the_equation() {
        let (_, stats) = solve_conjugacy(&BaseMap::cat_map(), &perturbed(0.01), 64, 1.0).unwrap();
        assert!(stats.lattice_residual < 1e-13, "{stats:?}");
        assert!(stats.sup_displacement < MAX_DISPLACEMENT);
        assert!(stats.sweeps < 200);
    }

    #[test]
    fn preconditions() {
        let f = BaseMap::cat_map();
        assert!(compute_conjugacy(&f, &perturbed(0.01), 32, 1.0).is_err());
        assert!(compute_conjugacy(&perturbed(0.01), &perturbed(0.01), 64, 1.0).is_err());
        let other = BaseMap::perturbed_toral(IntMat2::new(3, 2, 1, 1), 0.01, PerturbationMode::ShearPair).unwrap();
        assert!(compute_conjugacy(&f, &other, 64, 1.0).is_err());
        assert!(matches!(
            compute_conjugacy(&f, &perturbed(0.01), 64, 1e-14),
            Err(Error::NoConjugacy { .. })
        ));
    }

    #[test]
    fn fixed_point_correspondence() {
        let g = perturbed(0.01);
        let h = h_small();
        let h0 = h.apply(TorusPoint::ORIGIN);
        let oracle = newton_fixed_point(&g, TorusPoint::ORIGIN).unwrap();
        assert!(h0.distance(&oracle) < 1e-12, "{h0:?} vs {oracle:?}");
        assert!(g.apply(h0).distance(&h0) < 1e-12);
    }

    #[test]
    fn declared_residual_reproduces_off_lattice() {
        let h = h_small();
        let f = BaseMap::cat_map();
        let g = perturbed(0.01);
        let independent = sampled_residual(&h, &f, &g, 20_000, 5);
        assert!(independent <= 2.0 * h.residual(), "{independent} vs {}", h.residual());
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let h = h_small();
        let back = ConjugacyMap::from_text(&h.to_text()).unwrap();
        assert_eq!(*h, back);
        for (x, y) in h.du.iter().zip(&back.du) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert!(ConjugacyMap::from_text("conjugacy v2 resolution=2 residual=0").is_err());
        assert!(ConjugacyMap::from_text("conjugacy v1 resolution=1 residual=0\n").is_err());
        assert!(ConjugacyMap::from_text("conjugacy v1 resolution=1 residual=0\n0 0 0 0\n0 0 0 0").is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let h = h_small();
        let m = 4 * h.resolution();
        for k in (0..m * m).step_by(7) {
            let x = TorusPoint::new((k / m) as f64 / m as f64, (k % m) as f64 / m as f64);
            let back = h.try_inverse(h.apply(x)).unwrap();
            assert!(back.distance(&x) <= 1e-9);
        }
    }

    #[test]
    fn transport_examples() {
        let id = Arc::new(ConjugacyMap::identity(64));
        let s = Cocycle::schrodinger(1.0, Potential::Cosine { amp: 1.0 });
        let t = transport_cocycle(&s, &id, TransportDirection::Inverse).unwrap();
        for p in crate::torus::lattice(16) {
            assert_eq!(t.eval(p), s.eval(p));
        }
        let h = h_small();
        let c = Cocycle::Constant(Mat2::diag(2.0, 0.5));
        let tc = transport_cocycle(&c, &h, TransportDirection::Forward).unwrap();
        assert_eq!(tc.eval(TorusPoint::new(0.3, 0.1)), Mat2::diag(2.0, 0.5));
        let ts = transport_cocycle(&s, &h, TransportDirection::Inverse).unwrap();
        let q = TorusPoint::new(0.25, 0.5);
        let pre = h.try_inverse(q).unwrap();
        assert_eq!(ts.eval(q), s.eval(pre));
        assert!(h.apply(pre).distance(&q) <= 1e-9);
    }

    #[test]
    fn transport_identity_exact_cases() {
        let f = BaseMap::cat_map();
        let id = Arc::new(ConjugacyMap::identity(64));
        let s = Cocycle::schrodinger(0.5, Potential::Cosine { amp: 1.5 });
        let r = verify_transport_identity(&s, &f, &f, &id, TorusPoint::new(0.2, 0.7), 50).unwrap();
        assert!(r.max_defect <= 1e-12);
        let c = Cocycle::Constant(Mat2::new(2.0, 1.0, 1.0, 1.0));
        let r = verify_transport_identity(&c, &f, &perturbed(0.01), &h_small(), TorusPoint::new(0.2, 0.7), 50).unwrap();
        assert!(r.max_defect <= 1e-12);
    }

    #[test]
    fn exponent_estimates() {
        let id = ConjugacyMap::identity(64);
        let e = holder_exponent_estimate(&id, 1000, 1).unwrap();
        assert!(e.identity_degenerate && e.gamma_hat == 1.0);
        let h0 = compute_conjugacy(&BaseMap::cat_map(), &perturbed(0.0), 64, 1.0).unwrap();
        assert!(holder_exponent_estimate(&h0, 1000, 1).unwrap().identity_degenerate);
        let h = compute_conjugacy(&BaseMap::cat_map(), &perturbed(0.05), 128, 1.0).unwrap();
        let e = holder_exponent_estimate(&h, 2000, 3).unwrap();
        assert!(!e.identity_degenerate);
        assert!(e.gamma_hat > 0.0 && e.gamma_hat <= 1.0);
        assert!(holder_exponent_estimate(&h, 10, 3).is_err());
    }

    #[test]
    fn transported_seminorm_examples() {
        let a = Cocycle::schrodinger(0.7, Potential::Cosine { amp: 1.0 });
        let id = ConjugacyMap::identity(64);
        let r = transported_seminorm_check(&a, &a, &id, 1.0, 200, 1).unwrap();
        assert_eq!((r.seminorm, r.bound), (0.0, 0.0));
        let h = h_small();
        let r = transported_seminorm_check(&a, &a, &h, 0.5, 200, 1).unwrap();
        assert!(r.seminorm > 0.0 && r.bound >= r.seminorm);
        let c1 = Cocycle::Constant(Mat2::diag(2.0, 0.5));
        let c2 = Cocycle::Constant(Mat2::new(1.0, 1.0, 0.0, 1.0));
        let r = transported_seminorm_check(&c1, &c2, &h, 1.0, 200, 1).unwrap();
        assert_eq!(r.seminorm, 0.0);
        assert!(r.bound >= 0.0);
        let pw = Cocycle::piecewise(c1, crate::cocycle::RotationGrid::zeros(4));
        assert!(transported_seminorm_check(&pw, &c2, &h, 1.0, 200, 1).is_err());
    }
}
