//! Cocycle families `A: T^2 -> SL(2,R)`.

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::base::{BaseMap, MapKind};
use crate::conjugacy::ConjugacyMap;
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::torus::{lattice, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Potential {
    Zero,
    /// `V(u, v) = amp * cos(2 pi u)`.
    Cosine { amp: f64 },
}

impl Potential {
    #[inline]
    pub fn value(&self, p: TorusPoint) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Cosine { amp } => amp * (TAU * p.u()).cos(),
        }
    }
}

/// `theta(u, v) = constant + amplitude * sin(2 pi (ku u + kv v) + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleField {
    pub constant: f64,
    pub amplitude: f64,
    pub ku: i32,
    pub kv: i32,
    pub phase: f64,
}

impl AngleField {
    pub fn constant(angle: f64) -> Self {
        AngleField {
            constant: angle,
            amplitude: 0.0,
            ku: 0,
            kv: 0,
            phase: 0.0,
        }
    }

    #[inline]
    pub fn angle(&self, p: TorusPoint) -> f64 {
        if self.amplitude == 0.0 {
            return self.constant;
        }
        let arg = TAU * (self.ku as f64 * p.u() + self.kv as f64 * p.v()) + self.phase;
        self.constant + self.amplitude * arg.sin()
    }
}

#[inline]
fn cell_index(grid: usize, p: TorusPoint) -> usize {
    let g = grid as f64;
    let i = ((p.u() * g) as usize).min(grid - 1);
    let j = ((p.v() * g) as usize).min(grid - 1);
    i * grid + j
}

/// Piecewise-constant SL(2,R) field on a `grid x grid` partition of the torus.
/// Cell `(i, j)` covers `[i/g, (i+1)/g) x [j/g, (j+1)/g)`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellField {
    grid: usize,
    mats: Vec<Mat2>,
}

impl CellField {
    pub fn new(grid: usize, mats: Vec<Mat2>) -> Result<Self> {
        if grid == 0 || mats.len() != grid * grid {
            return Err(Error::InvalidCocycle(format!(
                "cell field needs grid >= 1 and grid^2 matrices, got grid {grid} and {}",
                mats.len()
            )));
        }
        for m in &mats {
            Mat2::sl2(m.a, m.b, m.c, m.d)?;
        }
        Ok(CellField { grid, mats })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn mats(&self) -> &[Mat2] {
        &self.mats
    }

    #[inline]
    pub fn at(&self, p: TorusPoint) -> Mat2 {
        self.mats[cell_index(self.grid, p)]
    }
}

/// Per-cell rotation angles on a `grid x grid` partition, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationGrid {
    grid: usize,
    angles: Vec<f64>,
}

impl RotationGrid {
    pub fn new(grid: usize, angles: Vec<f64>) -> Result<Self> {
        if grid == 0 || angles.len() != grid * grid {
            return Err(Error::InvalidCocycle(format!(
                "rotation grid needs grid >= 1 and grid^2 angles, got grid {grid} and {}",
                angles.len()
            )));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidCocycle("rotation angles must be finite".into()));
        }
        Ok(RotationGrid { grid, angles })
    }

    pub fn zeros(grid: usize) -> Self {
        RotationGrid {
            grid: grid.max(1),
            angles: vec![0.0; grid.max(1) * grid.max(1)],
        }
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Largest `|angle|`.
    pub fn max_abs_angle(&self) -> f64 {
        self.angles.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    #[inline]
    pub fn angle_at(&self, p: TorusPoint) -> f64 {
        self.angles[cell_index(self.grid, p)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransportDirection {
    /// `B o h`.
    Forward,
    /// `B o h^{-1}`.
    Inverse,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cocycle {
    Constant(Mat2),
    /// Transfer matrix `[[E - V(x), -1], [1, 0]]`.
    Schrodinger {
        energy: f64,
        potential: Potential,
    },
    /// The Jacobian `Df` of an area-preserving base map.
    Derivative(BaseMap),
    /// Piecewise-constant matrix field.
    Cells(CellField),
    /// `R(angle of cell(x)) * base(x)`.
    Piecewise {
        base: Box<Cocycle>,
        rotations: RotationGrid,
    },
    /// `R(theta(x)) * base(x)`.
    Rotated {
        base: Box<Cocycle>,
        field: AngleField,
    },
    /// `diag(1 + t, 1 / (1 + t)) * base(x)`.
    Boosted {
        base: Box<Cocycle>,
        t: f64,
    },
    /// `base o h` or `base o h^{-1}` for a computed conjugacy `h`.
    Transported {
        base: Box<Cocycle>,
        conjugacy: Arc<ConjugacyMap>,
        direction: TransportDirection,
    },
}

/// Grid-sampled `L^inf` distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupDistance {
    pub value: f64,
    pub grid: usize,
    /// Always true: the value is a maximum over the lattice, hence a lower bound.
    pub grid_based: bool,
}

impl Cocycle {
    pub fn identity() -> Self {
        Cocycle::Constant(Mat2::IDENTITY)
    }

    pub fn constant(m: Mat2) -> Result<Self> {
        Mat2::sl2(m.a, m.b, m.c, m.d).map(Cocycle::Constant)
    }

    pub fn schrodinger(energy: f64, potential: Potential) -> Self {
        Cocycle::Schrodinger { energy, potential }
    }

    /// Constant rotation by `angle`.
    pub fn pure_rotation(angle: f64) -> Self {
        Cocycle::Rotated {
            base: Box::new(Cocycle::identity()),
            field: AngleField::constant(angle),
        }
    }

    pub fn piecewise(base: Cocycle, rotations: RotationGrid) -> Self {
        Cocycle::Piecewise {
            base: Box::new(base),
            rotations,
        }
    }

    pub fn rotated(base: Cocycle, field: AngleField) -> Self {
        Cocycle::Rotated {
            base: Box::new(base),
            field,
        }
    }

    pub fn boosted(base: Cocycle, t: f64) -> Result<Self> {
        if !(t > -1.0 && t.is_finite()) {
            return Err(Error::InvalidCocycle(format!("boost t = {t} must exceed -1")));
        }
        Ok(Cocycle::Boosted {
            base: Box::new(base),
            t,
        })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Cocycle::Constant(_) => "constant",
            Cocycle::Schrodinger { .. } => "schrodinger",
            Cocycle::Derivative(_) => "derivative",
            Cocycle::Cells(_) => "cells",
            Cocycle::Piecewise { .. } => "piecewise",
            Cocycle::Rotated { .. } => "rotated",
            Cocycle::Boosted { .. } => "boosted",
            Cocycle::Transported { .. } => "transported",
        }
    }

    #[inline]
    pub fn eval(&self, p: TorusPoint) -> Mat2 {
        match self {
            Cocycle::Constant(m) => *m,
            Cocycle::Schrodinger { energy, potential } => {
                Mat2::new(energy - potential.value(p), -1.0, 1.0, 0.0)
            }
            Cocycle::Derivative(f) => f.jacobian(p),
            Cocycle::Cells(field) => field.at(p),
            Cocycle::Piecewise { base, rotations } => {
                Mat2::rotation(rotations.angle_at(p)) * base.eval(p)
            }
            Cocycle::Rotated { base, field } => Mat2::rotation(field.angle(p)) * base.eval(p),
            Cocycle::Boosted { base, t } => Mat2::diag(1.0 + t, 1.0 / (1.0 + t)) * base.eval(p),
            Cocycle::Transported {
                base,
                conjugacy,
                direction,
            } => {
                let q = match direction {
                    TransportDirection::Forward => conjugacy.apply(p),
                    TransportDirection::Inverse => conjugacy.inverse(p),
                };
                base.eval(q)
            }
        }
    }

    /// `A(x)^{-1}`.
    #[inline]
    pub fn eval_inverse(&self, p: TorusPoint) -> Mat2 {
        self.eval(p).sl2_inverse()
    }

    /// Nominal Hölder exponent; `None` for discontinuous families and for
    /// transported cocycles, whose regularity depends on the conjugacy.
    pub fn nominal_nu(&self) -> Option<f64> {
        match self {
            Cocycle::Constant(_) | Cocycle::Schrodinger { .. } | Cocycle::Derivative(_) => Some(1.0),
            Cocycle::Cells(_) | Cocycle::Piecewise { .. } | Cocycle::Transported { .. } => None,
            Cocycle::Rotated { base, .. } | Cocycle::Boosted { base, .. } => base.nominal_nu(),
        }
    }

    /// False when the family contains a piecewise-constant component anywhere.
    pub fn is_continuous_family(&self) -> bool {
        match self {
            Cocycle::Cells(_) | Cocycle::Piecewise { .. } => false,
            Cocycle::Rotated { base, .. }
            | Cocycle::Boosted { base, .. }
            | Cocycle::Transported { base, .. } => base.is_continuous_family(),
            _ => true,
        }
    }

    /// True when `eval` does not depend on the point.
    pub fn is_constant(&self) -> bool {
        match self {
            Cocycle::Constant(_) => true,
            Cocycle::Schrodinger { potential, .. } => matches!(potential, Potential::Zero),
            Cocycle::Derivative(f) => matches!(f.kind(), MapKind::LinearToral { .. } | MapKind::Rotation { .. }),
            Cocycle::Cells(field) => field.mats().windows(2).all(|w| w[0] == w[1]),
            Cocycle::Piecewise { base, rotations } => {
                base.is_constant() && rotations.angles().windows(2).all(|w| w[0] == w[1])
            }
            Cocycle::Rotated { base, field } => base.is_constant() && field.amplitude == 0.0,
            Cocycle::Boosted { base, .. } | Cocycle::Transported { base, .. } => base.is_constant(),
        }
    }

    /// Largest operator norm over the `grid x grid` lattice.
    pub fn max_norm_on_grid(&self, grid: usize) -> f64 {
        lattice(grid.max(1)).map(|p| self.eval(p).norm()).fold(0.0, f64::max)
    }
}

/// The dynamical cocycle `Df`; linear maps give a constant cocycle.
pub fn derivative_cocycle(f: &BaseMap) -> Cocycle {
    match *f.kind() {
        MapKind::LinearToral { l } => Cocycle::Constant(l.to_f64()),
        MapKind::PerturbedToral { l, eps: 0.0, .. } => Cocycle::Constant(l.to_f64()),
        MapKind::Rotation { .. } => Cocycle::identity(),
        _ => Cocycle::Derivative(*f),
    }
}

/// `max_x |A(x) - B(x)| + |A(x)^{-1} - B(x)^{-1}|` over a lattice.
pub fn sup_distance(a: &Cocycle, b: &Cocycle, grid: usize) -> Result<SupDistance> {
    if grid < 2 {
        return Err(Error::Precondition(format!("sup_distance grid must be >= 2, got {grid}")));
    }
    let value = lattice(grid)
        .map(|p| {
            let ma = a.eval(p);
            let mb = b.eval(p);
            (ma - mb).norm() + (ma.sl2_inverse() - mb.sl2_inverse()).norm()
        })
        .fold(0.0, f64::max);
    Ok(SupDistance {
        value,
        grid,
        grid_based: true,
    })
}
