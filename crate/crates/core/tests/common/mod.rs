//! Reference encoders written directly from the defining formulas, kept
//! deliberately naive and free of any code shared with the library.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_4;

/// Neighbour k sits at angle k * 45 degrees, counter-clockwise from east
/// (image rows grow downward, hence the minus sign on the sine).
fn neighbor(pixels: &[Vec<u8>], x: usize, y: usize, k: usize) -> f64 {
    let a = k as f64 * FRAC_PI_4;
    let dx = a.cos().round() as i64;
    let dy = -(a.sin().round() as i64);
    pixels[(y as i64 + dy) as usize][(x as i64 + dx) as usize] as f64
}

fn step(x: f64) -> u32 {
    if x >= 0.0 {
        1
    } else {
        0
    }
}

/// Quadrilateral index of bit v: "v3" = v/3, "v4" = v/4, "alt" = v%2.
pub fn omega(rule: &str, v: i64) -> i64 {
    match rule {
        "v3" => v / 3,
        "v4" => v / 4,
        "alt" => v % 2,
        _ => panic!("unknown rule {rule}"),
    }
}

pub fn naive_quest(pixels: &[Vec<u8>], rule: &str) -> Vec<Vec<u32>> {
    let p: i64 = 8;
    let h = pixels.len();
    let w = pixels[0].len();
    let mut out = vec![vec![0u32; w - 2]; h - 2];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let ic = pixels[y][x] as f64;
            let mut code = 0u32;
            for v in 0..=(p - 3) {
                let om = omega(rule, v);
                let psi = (v / 4) * (p - 2);
                let i1 = (2 * v - om + psi).rem_euclid(p) as usize;
                let i2 = (2 * (v - om + 1)).rem_euclid(p) as usize;
                let q = (neighbor(pixels, x, y, i1) + neighbor(pixels, x, y, i2))
                    / (psi as f64 / 3.0 + 2.0);
                code += step(q - ic) * 2u32.pow(v as u32);
            }
            out[y - 1][x - 1] = code;
        }
    }
    out
}

pub fn naive_lbp(pixels: &[Vec<u8>]) -> Vec<Vec<u32>> {
    let h = pixels.len();
    let w = pixels[0].len();
    let mut out = vec![vec![0u32; w - 2]; h - 2];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let ic = pixels[y][x] as f64;
            out[y - 1][x - 1] = (0..8)
                .map(|k| step(neighbor(pixels, x, y, k) - ic) * 2u32.pow(k as u32))
                .sum();
        }
    }
    out
}

/// Small LCG so fixtures do not depend on the library's generator.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 33
    }

    pub fn image(&mut self, w: usize, h: usize, max: u8) -> Vec<Vec<u8>> {
        (0..h)
            .map(|_| (0..w).map(|_| (self.next() % (max as u64 + 1)) as u8).collect())
            .collect()
    }
}

pub fn flatten(pixels: &[Vec<u8>]) -> Vec<u8> {
    pixels.iter().flatten().copied().collect()
}

/// Brute-force the best accuracy any line `w.x + b >= 0` achieves on labelled
/// 2-D points, sweeping directions and offsets on a fine grid.
pub fn best_linear_accuracy(points: &[([f64; 2], i8)]) -> f64 {
    let mut best = 0usize;
    for a in 0..720 {
        let t = a as f64 * std::f64::consts::PI / 360.0;
        let (wx, wy) = (t.cos(), t.sin());
        for bi in -300..=300 {
            let b = bi as f64 / 100.0;
            let correct = points
                .iter()
                .filter(|(p, y)| {
                    let s = if wx * p[0] + wy * p[1] + b >= 0.0 { 1 } else { -1 };
                    s == *y
                })
                .count();
            best = best.max(correct);
        }
    }
    best as f64 / points.len() as f64
}
