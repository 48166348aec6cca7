use std::f64::consts::PI;

use super::{replicate_channels, Perturbation};
use crate::domain::Shape;
use crate::error::{Error, Result};

/// Reference gradient-noise permutation (Perlin, 2002).
#[rustfmt::skip]
pub const PERMUTATION: [u8; 256] = [
    151,160,137,91,90,15,131,13,201,95,96,53,194,233,7,225,140,36,103,30,69,142,
    8,99,37,240,21,10,23,190,6,148,247,120,234,75,0,26,197,62,94,252,219,203,117,
    35,11,32,57,177,33,88,237,149,56,87,174,20,125,136,171,168,68,175,74,165,71,
    134,139,48,27,166,77,146,158,231,83,111,229,122,60,211,133,230,220,105,92,41,
    55,46,245,40,244,102,143,54,65,25,63,161,1,216,80,73,209,76,132,187,208,89,
    18,169,200,196,135,130,116,188,159,86,164,100,109,198,173,186,3,64,52,217,226,
    250,124,123,5,202,38,147,118,126,255,82,85,212,207,206,59,227,47,16,58,17,182,
    189,28,42,223,183,170,213,119,248,152,2,44,154,163,70,221,153,101,155,167,43,
    172,9,129,22,39,253,19,98,108,110,79,113,224,232,178,185,112,104,218,246,97,
    228,251,34,242,193,238,210,144,12,191,179,162,241,81,51,145,235,249,14,239,
    107,49,192,214,31,181,199,106,157,184,84,204,176,115,121,50,45,127,4,150,254,
    138,236,205,93,222,114,67,29,24,72,243,141,128,195,78,66,215,61,156,180,
];

#[inline]
fn perm(i: usize) -> usize {
    PERMUTATION[i & 255] as usize
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

// one of the four diagonal gradients
#[inline]
fn grad(hash: usize, x: f64, y: f64) -> f64 {
    match hash & 3 {
        0 => x + y,
        1 => -x + y,
        2 => x - y,
        _ => -x - y,
    }
}

/// 2-D gradient lattice noise. Zero at every integer lattice point.
pub fn lattice_noise(x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (xi, yi) = ((x0 as i64 & 255) as usize, (y0 as i64 & 255) as usize);
    let (xf, yf) = (x - x0, y - y0);
    let (u, v) = (fade(xf), fade(yf));

    let a = perm(xi) + yi;
    let b = perm(xi + 1) + yi;
    let (aa, ab) = (perm(a), perm(a + 1));
    let (ba, bb) = (perm(b), perm(b + 1));

    let lower = lerp(grad(aa, xf, yf), grad(ba, xf - 1.0, yf), u);
    let upper = lerp(grad(ab, xf, yf - 1.0), grad(bb, xf - 1.0, yf - 1.0), u);
    lerp(lower, upper, v)
}

/// Perlin noise with wavelengths `wavelength_x`, `wavelength_y` (pixels),
/// passed through the color map `sin(2π·φ·n)` and replicated over channels.
pub fn perlin(wavelength_x: f64, wavelength_y: f64, sine_freq: f64, shape: Shape) -> Result<Perturbation> {
    for (name, v, lo, hi) in [
        ("wavelength_x", wavelength_x, 2.0, 180.0),
        ("wavelength_y", wavelength_y, 2.0, 180.0),
        ("sine frequency", sine_freq, 4.0, 32.0),
    ] {
        if !(lo..=hi).contains(&v) {
            return Err(Error::InvalidParams(format!("{name} {v} outside [{lo}, {hi}]")));
        }
    }
    let mut plane = Vec::with_capacity(shape.height * shape.width);
    for y in 0..shape.height {
        for x in 0..shape.width {
            let n = lattice_noise(x as f64 / wavelength_x, y as f64 / wavelength_y);
            plane.push((2.0 * PI * sine_freq * n).sin().clamp(-1.0, 1.0));
        }
    }
    Ok(Perturbation::new(replicate_channels(plane, shape), shape))
}
