//! Flat block-fading channel with complex AWGN and coherent equalization.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingModel {
    Awgn,
    Rayleigh,
}

impl fmt::Display for FadingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FadingModel::Awgn => "awgn",
            FadingModel::Rayleigh => "rayleigh",
        })
    }
}

impl FromStr for FadingModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "awgn" => Ok(FadingModel::Awgn),
            "rayleigh" => Ok(FadingModel::Rayleigh),
            other => Err(Error::Parse(format!("unknown channel model {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelState {
    pub h: Complex64,
    pub n0: f64,
    /// Average SNR `(log2 M)(k/n)(Eb/N0)`.
    pub gamma: f64,
}

impl ChannelState {
    pub fn new(h: Complex64, n0: f64, gamma: f64) -> Result<Self> {
        if !(n0 > 0.0) {
            return Err(Error::InvalidNoise(n0));
        }
        Ok(ChannelState { h, n0, gamma })
    }

    pub fn instantaneous_snr(&self) -> f64 {
        self.h.norm_sqr() * self.gamma
    }
}

/// One fading draw per block: `h = 1` on AWGN, `CN(0, 1)` on Rayleigh.
pub fn sample_fading<R: Rng + ?Sized>(model: FadingModel, rng: &mut R) -> Complex64 {
    match model {
        FadingModel::Awgn => Complex64::new(1.0, 0.0),
        FadingModel::Rayleigh => {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
        }
    }
}

/// `r_i = h s_i + z_i` with `z_i ~ CN(0, n0)`. `n0 = 0` gives a noiseless pass.
pub fn transmit<R: Rng + ?Sized>(
    s: &[Complex64],
    h: Complex64,
    n0: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let sigma = (n0 / 2.0).sqrt();
    s.iter()
        .map(|&si| {
            if sigma == 0.0 {
                h * si
            } else {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                h * si + Complex64::new(re, im) * sigma
            }
        })
        .collect()
}

/// Multiply every sample by `h* / |h|^2`.
pub fn equalize(r: &[Complex64], h: Complex64) -> Result<Vec<Complex64>> {
    let power = h.norm_sqr();
    if power == 0.0 {
        return Err(Error::ZeroFading);
    }
    let inv = h.conj() / power;
    Ok(r.iter().map(|&ri| ri * inv).collect())
}
