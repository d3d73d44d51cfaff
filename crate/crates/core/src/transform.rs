//! Reversible spatial transforms: horizontal/vertical flips and exact
//! quarter-turn rotations. Every transform is a pixel permutation, so
//! round trips are bit-exact and no interpolation ever happens.

use crate::error::{CoreError, Result};
use crate::grid::GridTensor;
use crate::scalar::Scalar;

/// Exact quarter-turn rotations; 360 is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rotation {
    R90,
    R180,
    R270,
    R360,
}

impl Rotation {
    pub fn degrees(self) -> u16 {
        match self {
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
            Rotation::R360 => 360,
        }
    }

    /// Number of counterclockwise quarter turns.
    fn quarter_turns(self) -> u8 {
        match self {
            Rotation::R90 => 1,
            Rotation::R180 => 2,
            Rotation::R270 => 3,
            Rotation::R360 => 0,
        }
    }

    fn from_quarter_turns(k: u8) -> Self {
        match k % 4 {
            1 => Rotation::R90,
            2 => Rotation::R180,
            3 => Rotation::R270,
            _ => Rotation::R360,
        }
    }
}

/// A spatial transform: horizontal flip, then vertical flip, then rotation.
///
/// The 16 raw (flip_h, flip_v, rotation) combinations cover the 8 elements of
/// the square's symmetry group twice over; `canonicalize` reduces to the 8
/// canonical representatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransformSpec {
    pub flip_h: bool,
    pub flip_v: bool,
    pub rotation: Rotation,
}

/// Internal dihedral-group form: mirror horizontally first (when `mirror`),
/// then rotate counterclockwise by `rot` quarter turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dihedral {
    rot: u8,
    mirror: bool,
}

impl Dihedral {
    fn inverse(self) -> Self {
        if self.mirror {
            // reflections are involutions
            self
        } else {
            Dihedral {
                rot: (4 - self.rot) % 4,
                mirror: false,
            }
        }
    }

    /// `self` applied after `first`.
    fn compose_after(self, first: Dihedral) -> Self {
        if self.mirror {
            Dihedral {
                rot: (self.rot + 4 - first.rot) % 4,
                mirror: !first.mirror,
            }
        } else {
            Dihedral {
                rot: (self.rot + first.rot) % 4,
                mirror: first.mirror,
            }
        }
    }
}

impl TransformSpec {
    pub const IDENTITY: TransformSpec = TransformSpec {
        flip_h: false,
        flip_v: false,
        rotation: Rotation::R360,
    };

    pub fn new(flip_h: bool, flip_v: bool, rotation: Rotation) -> Self {
        Self {
            flip_h,
            flip_v,
            rotation,
        }
    }

    pub fn is_identity(self) -> bool {
        self.canonicalize() == Self::IDENTITY
    }

    fn to_dihedral(self) -> Dihedral {
        // flip_h is the mirror; flip_v equals mirror + half turn
        let mut rot = self.rotation.quarter_turns();
        let mut mirror = false;
        if self.flip_h {
            mirror = !mirror;
        }
        if self.flip_v {
            mirror = !mirror;
            rot = (rot + 2) % 4;
        }
        Dihedral { rot, mirror }
    }

    fn from_dihedral(d: Dihedral) -> Self {
        if d.mirror {
            match d.rot {
                0 => TransformSpec::new(true, false, Rotation::R360),
                1 => TransformSpec::new(false, true, Rotation::R270),
                2 => TransformSpec::new(false, true, Rotation::R360),
                _ => TransformSpec::new(false, true, Rotation::R90),
            }
        } else {
            TransformSpec::new(false, false, Rotation::from_quarter_turns(d.rot))
        }
    }

    /// Canonical representative of the group element this spec denotes.
    pub fn canonicalize(self) -> Self {
        Self::from_dihedral(self.to_dihedral())
    }

    /// The group inverse, in canonical form.
    pub fn inverse(self) -> Self {
        Self::from_dihedral(self.to_dihedral().inverse())
    }

    /// `self` composed after `first` (i.e. apply `first`, then `self`).
    pub fn compose_after(self, first: Self) -> Self {
        Self::from_dihedral(self.to_dihedral().compose_after(first.to_dihedral()))
    }

    /// Whether applying this transform needs a square tensor.
    pub fn needs_square(self) -> bool {
        matches!(
            self.canonicalize().rotation,
            Rotation::R90 | Rotation::R270
        )
    }
}

/// The 8 canonical group elements in enumeration order: identity, h-flip,
/// v-flip, the three rotations, then v-flip with quarter turns.
pub fn canonical_transforms() -> [TransformSpec; 8] {
    [
        TransformSpec::IDENTITY,
        TransformSpec::new(true, false, Rotation::R360),
        TransformSpec::new(false, true, Rotation::R360),
        TransformSpec::new(false, false, Rotation::R90),
        TransformSpec::new(false, false, Rotation::R180),
        TransformSpec::new(false, false, Rotation::R270),
        TransformSpec::new(false, true, Rotation::R90),
        TransformSpec::new(false, true, Rotation::R270),
    ]
}

fn flip_h_tensor<F: Scalar>(t: &GridTensor<F>) -> GridTensor<F> {
    let (h, w, c) = t.shape();
    let mut out = GridTensor::zeros(h, w, c);
    for i in 0..h {
        for j in 0..w {
            for k in 0..c {
                out.set(i, j, k, t.get(i, w - 1 - j, k));
            }
        }
    }
    out
}

fn flip_v_tensor<F: Scalar>(t: &GridTensor<F>) -> GridTensor<F> {
    let (h, w, c) = t.shape();
    let mut out = GridTensor::zeros(h, w, c);
    for i in 0..h {
        for j in 0..w {
            for k in 0..c {
                out.set(i, j, k, t.get(h - 1 - i, j, k));
            }
        }
    }
    out
}

/// One counterclockwise quarter turn; output shape is (w, h, c).
fn rot90_tensor<F: Scalar>(t: &GridTensor<F>) -> GridTensor<F> {
    let (h, w, c) = t.shape();
    let mut out = GridTensor::zeros(w, h, c);
    for i in 0..w {
        for j in 0..h {
            for k in 0..c {
                out.set(i, j, k, t.get(j, w - 1 - i, k));
            }
        }
    }
    out
}

/// Applies `spec` spatially. Channel order is never permuted. Quarter-turn
/// rotations require a square tensor; pad first otherwise.
pub fn apply_transform<F: Scalar>(t: &GridTensor<F>, spec: TransformSpec) -> Result<GridTensor<F>> {
    let (h, w, _) = t.shape();
    if spec.needs_square() && h != w {
        return Err(CoreError::NonSquareRotation {
            height: h,
            width: w,
        });
    }
    let mut cur = t.clone();
    if spec.flip_h {
        cur = flip_h_tensor(&cur);
    }
    if spec.flip_v {
        cur = flip_v_tensor(&cur);
    }
    for _ in 0..spec.rotation.quarter_turns() {
        cur = rot90_tensor(&cur);
    }
    Ok(cur)
}

/// Undoes `apply_transform(x, spec)` bit-exactly.
pub fn invert_transform<F: Scalar>(
    t: &GridTensor<F>,
    spec: TransformSpec,
) -> Result<GridTensor<F>> {
    apply_transform(t, spec.inverse())
}

/// Zero-pads to `target` x `target`, original content anchored top-left.
pub fn pad_to_square<F: Scalar>(t: &GridTensor<F>, target: usize) -> Result<GridTensor<F>> {
    let (h, w, c) = t.shape();
    if target < h || target < w {
        return Err(CoreError::PadTargetTooSmall {
            target,
            height: h,
            width: w,
        });
    }
    if h == target && w == target {
        return Ok(t.clone());
    }
    let mut out = GridTensor::zeros(target, target, c);
    for i in 0..h {
        for j in 0..w {
            for k in 0..c {
                out.set(i, j, k, t.get(i, j, k));
            }
        }
    }
    Ok(out)
}

/// Crops the top-left block; the exact inverse of `pad_to_square`.
pub fn unpad<F: Scalar>(t: &GridTensor<F>, height: usize, width: usize) -> Result<GridTensor<F>> {
    let (h, w, c) = t.shape();
    if height > h || width > w {
        return Err(CoreError::ShapeMismatch(format!(
            "cannot unpad {h}x{w} to larger {height}x{width}"
        )));
    }
    if height == h && width == w {
        return Ok(t.clone());
    }
    let mut out = GridTensor::zeros(height, width, c);
    for i in 0..height {
        for j in 0..width {
            for k in 0..c {
                out.set(i, j, k, t.get(i, j, k));
            }
        }
    }
    Ok(out)
}
