//! Ground-truth scenarios and synthesis of the oversampled received signal.
//!
//! With symbol period `Ts` and oversampling factor `P`, the `m`-th polyphase
//! sample (`m = 1..=P`) of symbol interval `i` is
//!
//! ```text
//! y_m(i) = sum_k a_{m,k} s_k(i) e^{j 2 pi f_k i P} + w_m(i)
//! a_{m,k} = a_k e^{j 2 pi m f_k} p(m Ts / P - tau_k)
//! ```
//!
//! so `y(i) = A s~(i) + w(i)` with a time-invariant `P x K` matrix `A`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::CMatrix;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// 4QAM points ordered by angle in `[0, 2pi)`.
const QAM4: [Complex64; 4] = [
    Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

/// Unit-power symbol alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Constellation {
    #[default]
    Qam4,
}

impl Constellation {
    /// Alphabet points, ordered by angle in `[0, 2pi)`.
    pub fn points(self) -> &'static [Complex64] {
        match self {
            Constellation::Qam4 => &QAM4,
        }
    }

    /// Order of the rotational symmetry group (the PLL lock ambiguity).
    pub fn symmetry(self) -> usize {
        match self {
            Constellation::Qam4 => 4,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Qam4 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Constellation::Qam4 => "qam4",
        }
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qam4" | "4qam" | "qpsk" => Ok(Constellation::Qam4),
            _ => Err(Error::UnsupportedConstellation(s.to_string())),
        }
    }
}

impl TryFrom<String> for Constellation {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Constellation> for String {
    fn from(c: Constellation) -> String {
        c.name().to_string()
    }
}

/// Ground-truth scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Number of users.
    pub k: usize,
    /// Oversampling factor.
    pub p: usize,
    /// Symbol period in seconds.
    pub ts: f64,
    /// Normalized CFOs in cycles per oversampled sample.
    pub f: Vec<f64>,
    /// Delays in seconds, each in `[0, Ts/P)`.
    pub tau: Vec<f64>,
    /// Complex fading gains (phase offset included).
    pub a: Vec<Complex64>,
    /// Noise variance per complex sample.
    pub sigma2_w: f64,
    /// Packet length in symbols.
    pub n: usize,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.k == 0 {
            return bad("K must be >= 1".into());
        }
        if self.p < self.k {
            return bad(format!("oversampling factor P = {} must be >= K = {}", self.p, self.k));
        }
        if !(self.ts > 0.0) {
            return bad(format!("Ts = {} must be positive", self.ts));
        }
        if self.f.len() != self.k || self.tau.len() != self.k || self.a.len() != self.k {
            return bad(format!(
                "per-user vectors must have length K = {} (f: {}, tau: {}, a: {})",
                self.k,
                self.f.len(),
                self.tau.len(),
                self.a.len()
            ));
        }
        if let Some(f) = self.f.iter().find(|f| !(f.abs() <= 0.5)) {
            return bad(format!("|f_k| must be <= 0.5, got {f}"));
        }
        let limit = self.ts / self.p as f64;
        for (user, &tau) in self.tau.iter().enumerate() {
            if !(tau >= 0.0) {
                return bad(format!("tau_{user} = {tau} must be >= 0"));
            }
            if tau >= limit {
                return Err(Error::PulseOverlap { user, tau, limit });
            }
        }
        if !(self.sigma2_w >= 0.0) {
            return bad(format!("sigma2_w = {} must be >= 0", self.sigma2_w));
        }
        if self.n == 0 {
            return bad("N must be >= 1".into());
        }
        Ok(())
    }
}

/// `K x N` matrix of transmitted symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub s: CMatrix,
    pub constellation: Constellation,
}

impl SymbolFrame {
    pub fn users(&self) -> usize {
        self.s.nrows()
    }

    pub fn len(&self) -> usize {
        self.s.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.s.ncols() == 0
    }
}

/// The `P x K` virtual MIMO channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(pub CMatrix);

impl ChannelMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn users(&self) -> usize {
        self.0.ncols()
    }
}

/// `P x N` matrix of polyphase received samples; column `i` is `y(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFrame {
    pub y: CMatrix,
}

impl SampleFrame {
    pub fn rows(&self) -> usize {
        self.y.nrows()
    }

    pub fn len(&self) -> usize {
        self.y.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.y.ncols() == 0
    }
}

/// Draws `K x N` i.i.d. uniform symbols from the constellation.
pub fn generate_symbols(
    k: usize,
    n: usize,
    constellation: Constellation,
    seed: u64,
) -> Result<SymbolFrame> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidParams(format!("need K >= 1 and N >= 1, got K = {k}, N = {n}")));
    }
    let points = constellation.points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Column-major fill keeps symbol i of all users adjacent in the stream.
    let mut s = CMatrix::zeros(k, n);
    for i in 0..n {
        for user in 0..k {
            s[(user, i)] = points[rng.random_range(0..points.len())];
        }
    }
    Ok(SymbolFrame { s, constellation })
}

/// Hamming pulse supported on `[0, Ts]`.
pub fn pulse_value(t: f64, ts: f64) -> f64 {
    if (0.0..=ts).contains(&t) {
        0.54 - 0.46 * (2.0 * PI * t / ts).cos()
    } else {
        0.0
    }
}

/// Derivative of [`pulse_value`] on the closed support (one-sided at the ends).
pub fn pulse_derivative(t: f64, ts: f64) -> f64 {
    if (0.0..=ts).contains(&t) {
        (2.0 * PI * 0.46 / ts) * (2.0 * PI * t / ts).sin()
    } else {
        0.0
    }
}

/// `e^{j 2 pi x}` with the argument reduced modulo 1 first.
pub(crate) fn cis_cycles(x: f64) -> Complex64 {
    Complex64::cis(2.0 * PI * x.rem_euclid(1.0))
}

/// Column `k` of the virtual channel: `a_k e^{j 2 pi m f_k} p(m Ts/P - tau_k)`.
pub(crate) fn channel_entry(params: &SystemParams, m: usize, k: usize) -> Complex64 {
    let t = m as f64 / params.p as f64 * params.ts - params.tau[k];
    params.a[k] * cis_cycles(m as f64 * params.f[k]) * pulse_value(t, params.ts)
}

pub fn build_virtual_channel(params: &SystemParams) -> Result<ChannelMatrix> {
    params.validate()?;
    Ok(ChannelMatrix(CMatrix::from_fn(params.p, params.k, |r, k| {
        channel_entry(params, r + 1, k)
    })))
}

/// Rotated inputs `s~_k(i) = s_k(i) e^{j 2 pi f_k i P}`.
pub fn rotate_symbols(params: &SystemParams, symbols: &SymbolFrame) -> Result<CMatrix> {
    check_symbols(params, symbols)?;
    let p = params.p as f64;
    Ok(CMatrix::from_fn(params.k, params.n, |k, i| {
        symbols.s[(k, i)] * cis_cycles(params.f[k] * (i as f64 * p))
    }))
}

fn check_symbols(params: &SystemParams, symbols: &SymbolFrame) -> Result<()> {
    if symbols.s.shape() != (params.k, params.n) {
        return Err(mismatch(
            "symbol frame",
            format!("{}x{}", params.k, params.n),
            format!("{}x{}", symbols.s.nrows(), symbols.s.ncols()),
        ));
    }
    Ok(())
}

/// `y(i) = A s~(i) + w(i)`, with circular Gaussian noise of variance `sigma2_w`.
pub fn synthesize_received(
    params: &SystemParams,
    symbols: &SymbolFrame,
    seed: u64,
) -> Result<SampleFrame> {
    let a = build_virtual_channel(params)?;
    let rotated = rotate_symbols(params, symbols)?;
    let mut y = a.0 * rotated;
    if params.sigma2_w > 0.0 {
        let std = (params.sigma2_w / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for z in y.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += Complex64::new(re, im) * std;
        }
    }
    Ok(SampleFrame { y })
}

/// Noise variance giving `snr_db = E||A s~||^2 / (P sigma2_w)`; infinite SNR maps to 0.
pub fn noise_variance_for_snr(channel: &ChannelMatrix, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    let signal = channel.0.norm_squared() / channel.rows() as f64;
    signal / 10f64.powf(snr_db / 10.0)
}

/// How per-user CFOs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CfoRange {
    /// `F_k Ts` uniform on `[-1/2, 1/2)`, i.e. `f_k` on `[-1/(2P), 1/(2P))`.
    #[default]
    Paper,
    /// `f_k` uniform on `(-bound, bound)`, `bound <= 0.5`.
    Full { bound: f64 },
}

/// Random scenario: `a_k ~ CN(0, 1)`, `tau_k ~ U[0, Ts/P)`, CFOs per `range`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioDraw {
    pub k: usize,
    pub p: usize,
    pub ts: f64,
    pub n: usize,
    pub range: CfoRange,
}

impl ScenarioDraw {
    /// Draws a noiseless scenario; set `sigma2_w` afterwards (see [`noise_variance_for_snr`]).
    pub fn draw(&self, seed: u64) -> Result<SystemParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.k;
        let a = (0..k)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * FRAC_1_SQRT_2
            })
            .collect();
        let limit = self.ts / self.p as f64;
        let tau = (0..k).map(|_| rng.random_range(0.0..limit)).collect();
        let f = (0..k)
            .map(|_| match self.range {
                CfoRange::Paper => {
                    let half = 0.5 / self.p as f64;
                    rng.random_range(-half..half)
                }
                CfoRange::Full { bound } => {
                    // Open interval: redraw the (measure-zero) lower endpoint.
                    loop {
                        let f = rng.random_range(-bound..bound);
                        if f != -bound {
                            break f;
                        }
                    }
                }
            })
            .collect();
        let params = SystemParams {
            k,
            p: self.p,
            ts: self.ts,
            f,
            tau,
            a,
            sigma2_w: 0.0,
            n: self.n,
        };
        params.validate()?;
        Ok(params)
    }
}
