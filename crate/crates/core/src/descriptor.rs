//! QUEST and LBP code maps.
//!
//! Both encoders look at the 8-neighbourhood of every interior pixel, with
//! neighbours indexed counter-clockwise starting east of the centre:
//!
//! ```text
//!   I3 I2 I1
//!   I4 Ic I0
//!   I5 I6 I7
//! ```
//!
//! QUEST forms six "trine" relations: each bit averages two neighbours taken
//! from one of two quadrilaterals and thresholds the average against the
//! centre. Bits 0..=3 average a pair (divisor 2); bits 4 and 5 use divisor 4.
//! The one-pixel border is skipped, so a `W x H` image yields a
//! `(W-2) x (H-2)` code map.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::imageio::GrayImage;
use crate::{Error, Result};

/// Neighbourhood size. The encoder is only defined for the 8-ring.
pub const NEIGHBORS: usize = 8;

/// Number of bits in a QUEST code.
pub const QUEST_BITS: usize = 6;

/// `(dx, dy)` of neighbour `I_k`, image coordinates (y grows downward).
pub const NEIGHBOR_OFFSETS: [(isize, isize); NEIGHBORS] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Quest,
    Lbp,
}

impl DescriptorKind {
    /// Number of distinct codes the descriptor can emit.
    pub fn code_range(self) -> usize {
        match self {
            DescriptorKind::Quest => 1 << QUEST_BITS,
            DescriptorKind::Lbp => 1 << NEIGHBORS,
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            DescriptorKind::Quest => "QUEST",
            DescriptorKind::Lbp => "LBP",
        }
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DescriptorKind::Quest => "quest",
            DescriptorKind::Lbp => "lbp",
        })
    }
}

impl FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quest" => Ok(DescriptorKind::Quest),
            "lbp" => Ok(DescriptorKind::Lbp),
            other => Err(Error::Config(format!("unknown descriptor '{other}'"))),
        }
    }
}

/// Rule deciding which quadrilateral (0 or 1) bit `v` draws from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuadAssignment {
    /// `floor(v / 3)`: bits 0-2 from quad 0, bits 3-5 from quad 1.
    #[default]
    #[serde(rename = "v3")]
    ByThree,
    /// `floor(v / 4)`: bits 0-3 from quad 0, bits 4-5 from quad 1.
    #[serde(rename = "v4")]
    ByFour,
    /// `v mod 2`: quads alternate.
    #[serde(rename = "alt")]
    Alternating,
}

impl QuadAssignment {
    pub fn omega(self, v: usize) -> usize {
        match self {
            QuadAssignment::ByThree => v / 3,
            QuadAssignment::ByFour => v / 4,
            QuadAssignment::Alternating => v % 2,
        }
    }
}

impl fmt::Display for QuadAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuadAssignment::ByThree => "v3",
            QuadAssignment::ByFour => "v4",
            QuadAssignment::Alternating => "alt",
        })
    }
}

impl FromStr for QuadAssignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v3" => Ok(QuadAssignment::ByThree),
            "v4" => Ok(QuadAssignment::ByFour),
            "alt" => Ok(QuadAssignment::Alternating),
            other => Err(Error::Config(format!(
                "unknown quad assignment '{other}' (expected v3, v4 or alt)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestConfig {
    pub quad_assignment: QuadAssignment,
}

impl QuestConfig {
    pub fn new(quad_assignment: QuadAssignment) -> Self {
        QuestConfig { quad_assignment }
    }
}

/// Index offset `floor(eta / 4) * (p - 2)`.
#[inline]
pub fn psi(eta: usize, p: usize) -> usize {
    (eta / 4) * (p - 2)
}

/// The two neighbour indices and the divisor used by bit `v` of quad `omega`.
#[inline]
pub fn quad_terms(v: usize, omega: usize) -> (usize, usize, u32) {
    let p = NEIGHBORS;
    let shift = psi(v, p);
    // 2v - omega + psi(v) goes negative at v = 0, omega = 1; add p before reducing.
    let first = (2 * v + shift + p - omega) % p;
    let second = (2 * (v + 1) + p - 2 * omega) % p;
    (first, second, (shift / 3 + 2) as u32)
}

/// Averaged neighbour pair for bit `v` of quadrilateral `omega`.
pub fn quad_sample(neighbors: &[u8; NEIGHBORS], v: usize, omega: usize) -> f64 {
    let (a, b, div) = quad_terms(v, omega);
    (neighbors[a] as f64 + neighbors[b] as f64) / div as f64
}

/// Neighbours `I_0..I_7` of the centre of a 3x3 patch (`patch[row][col]`).
pub fn patch_neighbors(patch: &[[u8; 3]; 3]) -> [u8; NEIGHBORS] {
    NEIGHBOR_OFFSETS.map(|(dx, dy)| patch[(1 + dy) as usize][(1 + dx) as usize])
}

/// QUEST code of the centre pixel of a 3x3 patch.
pub fn quest_encode_pixel(patch: &[[u8; 3]; 3], cfg: &QuestConfig) -> u8 {
    let neighbors = patch_neighbors(patch);
    let center = patch[1][1] as f64;
    (0..QUEST_BITS).fold(0u8, |code, v| {
        let q = quad_sample(&neighbors, v, cfg.quad_assignment.omega(v));
        code | (u8::from(q - center >= 0.0) << v)
    })
}

/// LBP code of the centre pixel of a 3x3 patch.
pub fn lbp_encode_pixel(patch: &[[u8; 3]; 3]) -> u8 {
    let center = patch[1][1];
    patch_neighbors(patch)
        .iter()
        .enumerate()
        .fold(0u8, |code, (k, &n)| code | (u8::from(n >= center) << k))
}

/// Per-pixel descriptor codes for the interior of an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMap {
    width: usize,
    height: usize,
    codes: Vec<u8>,
    descriptor: DescriptorKind,
}

impl CodeMap {
    pub fn new(width: usize, height: usize, codes: Vec<u8>, descriptor: DescriptorKind) -> Result<Self> {
        if codes.len() != width * height {
            return Err(Error::Shape {
                expected: width * height,
                actual: codes.len(),
            });
        }
        if let Some(&bad) = codes.iter().find(|&&c| c as usize >= descriptor.code_range()) {
            return Err(Error::Argument(format!(
                "code {bad} out of range for {}",
                descriptor.display_name()
            )));
        }
        Ok(CodeMap {
            width,
            height,
            codes,
            descriptor,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn descriptor(&self) -> DescriptorKind {
        self.descriptor
    }

    pub fn code_range(&self) -> usize {
        self.descriptor.code_range()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.codes[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.codes[y * self.width..(y + 1) * self.width]
    }

    /// Render as an 8-bit image. With `visualize`, QUEST codes are scaled by 4
    /// to span the full intensity range; LBP codes already do.
    pub fn to_image(&self, visualize: bool) -> GrayImage {
        let scale = if visualize && self.descriptor == DescriptorKind::Quest {
            4
        } else {
            1
        };
        let data = self.codes.iter().map(|&c| c * scale).collect();
        GrayImage::new(self.width, self.height, data).expect("code map has positive size")
    }
}

fn check_encodable(img: &GrayImage) -> Result<()> {
    if img.width() < 3 || img.height() < 3 {
        return Err(Error::ImageSize {
            width: img.width(),
            height: img.height(),
            min_width: 3,
            min_height: 3,
        });
    }
    Ok(())
}

/// Runs `code_of(neighbours, centre)` over every interior pixel.
fn encode_interior(
    img: &GrayImage,
    descriptor: DescriptorKind,
    code_of: impl Fn(&[u8; NEIGHBORS], u8) -> u8,
) -> Result<CodeMap> {
    check_encodable(img)?;
    let (w, h) = (img.width() - 2, img.height() - 2);
    let mut codes = Vec::with_capacity(w * h);
    for y in 1..=h {
        let (up, mid, down) = (img.row(y - 1), img.row(y), img.row(y + 1));
        for x in 1..=w {
            let n = [
                mid[x + 1],
                up[x + 1],
                up[x],
                up[x - 1],
                mid[x - 1],
                down[x - 1],
                down[x],
                down[x + 1],
            ];
            codes.push(code_of(&n, mid[x]));
        }
    }
    Ok(CodeMap {
        width: w,
        height: h,
        codes,
        descriptor,
    })
}

/// QUEST code map of an image.
pub fn quest_encode_map(img: &GrayImage, cfg: &QuestConfig) -> Result<CodeMap> {
    // Q - Ic >= 0 with Q = (a + b) / d is evaluated exactly as a + b >= d * Ic.
    let terms: [(usize, usize, u32); QUEST_BITS] =
        std::array::from_fn(|v| quad_terms(v, cfg.quad_assignment.omega(v)));
    encode_interior(img, DescriptorKind::Quest, |n, c| {
        let c = c as u32;
        terms
            .iter()
            .enumerate()
            .fold(0u8, |code, (v, &(a, b, div))| {
                code | (u8::from(n[a] as u32 + n[b] as u32 >= div * c) << v)
            })
    })
}

/// Classic 8-neighbour LBP code map.
pub fn lbp_encode_map(img: &GrayImage) -> Result<CodeMap> {
    encode_interior(img, DescriptorKind::Lbp, |n, c| {
        n.iter()
            .enumerate()
            .fold(0u8, |code, (k, &v)| code | (u8::from(v >= c) << k))
    })
}

/// Encode with whichever descriptor is requested.
pub fn encode_map(img: &GrayImage, descriptor: DescriptorKind, cfg: &QuestConfig) -> Result<CodeMap> {
    match descriptor {
        DescriptorKind::Quest => quest_encode_map(img, cfg),
        DescriptorKind::Lbp => lbp_encode_map(img),
    }
}
