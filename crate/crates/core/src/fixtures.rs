//! Named fixtures shared by the suite and the command line.

use num_complex::Complex64;

use crate::herglotz::{ConstantHerglotz, Herglotz, HerglotzRep};
use crate::measure::{AcPiece, Atom, CantorComponent, Density, MeasureSpec};
use crate::rankone::FiniteModel;
use crate::sl2::LieElement;

pub const PARABOLIC: LieElement = LieElement::new(0.0, 0.0, 1.0);
pub const ROTATION: LieElement = LieElement::new(-1.0, 0.0, 1.0);
pub const HYPERBOLIC: LieElement = LieElement::new(1.0, 0.0, 1.0);

/// M(z) = -1/z.
pub fn delta0() -> HerglotzRep {
    atoms(&[(0.0, 1.0)])
}

pub fn atoms(list: &[(f64, f64)]) -> HerglotzRep {
    let mu = MeasureSpec { atoms: list.iter().map(|&(pos, w)| Atom { pos, w }).collect(), ..Default::default() };
    HerglotzRep::new(0.0, 0.0, mu).expect("atom fixture")
}

pub fn uniform() -> HerglotzRep {
    let mu = MeasureSpec {
        ac: vec![AcPiece { lo: 0.0, hi: 1.0, density: Density::Constant { c: 1.0 } }],
        ..Default::default()
    };
    HerglotzRep::new(0.0, 0.0, mu).expect("uniform fixture")
}

pub fn cantor() -> HerglotzRep {
    let mu = MeasureSpec { cantor: vec![CantorComponent::standard()], ..Default::default() };
    HerglotzRep::new(0.0, 0.0, mu).expect("cantor fixture")
}

/// The two-level model's spectral measure as a representation.
pub fn two_level_rep() -> HerglotzRep {
    atoms(&[(-1.0, 0.5), (1.0, 0.5)])
}

pub fn two_level() -> FiniteModel {
    FiniteModel::two_level()
}

pub const CONSTANT_I: ConstantHerglotz = ConstantHerglotz { re: 0.0, im: 1.0 };

/// M(z) = z.
#[derive(Debug, Clone, Copy)]
pub struct Identity;

impl Herglotz for Identity {
    fn eval(&self, z: Complex64) -> Complex64 {
        z
    }
}
