//! Choice generation: the ordered `d` candidate bins for each ball.
//!
//! Five schemes are supported. `random_wr` and `random_distinct` draw the
//! bins directly (with and without replacement). `double` derives all `d`
//! bins from an offset/stride pair as `(offset + k * stride) mod n` with the
//! stride coprime to `n`, which forces the probe positions to be distinct.
//! The `dleft_*` schemes split the table into `d` subtables laid out left to
//! right and make one choice per subtable; `dleft_double` applies the
//! offset/stride recurrence within a subtable of size `n / d`.

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::util::{gcd, is_power_of_two, is_prime};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use std::fmt;
use std::str::FromStr;

/// Choice scheme. The serialized tags are stable and appear in config files
/// and CSV columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// `d` independent uniform bins (duplicates possible).
    #[serde(rename = "random_wr")]
    RandomWithReplacement,
    /// `d` uniform bins drawn without replacement.
    #[serde(rename = "random_distinct")]
    RandomDistinct,
    /// Offset/stride double hashing over the whole table.
    #[serde(rename = "double")]
    DoubleHash,
    /// One uniform choice in each of `d` subtables.
    #[serde(rename = "dleft_random")]
    DleftRandom,
    /// Offset/stride double hashing within subtables.
    #[serde(rename = "dleft_double")]
    DleftDoubleHash,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::RandomWithReplacement,
        Scheme::RandomDistinct,
        Scheme::DoubleHash,
        Scheme::DleftRandom,
        Scheme::DleftDoubleHash,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::RandomWithReplacement => "random_wr",
            Scheme::RandomDistinct => "random_distinct",
            Scheme::DoubleHash => "double",
            Scheme::DleftRandom => "dleft_random",
            Scheme::DleftDoubleHash => "dleft_double",
        }
    }

    pub fn is_dleft(self) -> bool {
        matches!(self, Scheme::DleftRandom | Scheme::DleftDoubleHash)
    }

    /// Whether the scheme guarantees all `d` bins distinct.
    pub fn yields_distinct(self) -> bool {
        !matches!(self, Scheme::RandomWithReplacement)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.tag() == s)
            .ok_or_else(|| {
                Error::domain(format!(
                    "unknown scheme `{s}` (expected one of: random_wr, random_distinct, double, \
                     dleft_random, dleft_double)"
                ))
            })
    }
}

/// Arithmetic class of the table size, which determines how strides are
/// sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NClass {
    Prime,
    PowerOfTwo,
    General,
}

impl NClass {
    pub fn classify(n: u64) -> NClass {
        if is_power_of_two(n) {
            NClass::PowerOfTwo
        } else if is_prime(n) {
            NClass::Prime
        } else {
            NClass::General
        }
    }
}

/// Validated chooser configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChooserConfig {
    pub scheme: Scheme,
    pub n: u64,
    pub d: usize,
    pub n_class: NClass,
}

impl ChooserConfig {
    pub fn new(scheme: Scheme, n: u64, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("number of choices d must be >= 1"));
        }
        if n == 0 {
            return Err(Error::domain("number of bins n must be >= 1"));
        }
        if scheme.yields_distinct() && (d as u64) > n {
            return Err(Error::domain(format!(
                "scheme {scheme} needs d <= n for distinct choices (d = {d}, n = {n})"
            )));
        }
        if scheme.is_dleft() && n % d as u64 != 0 {
            return Err(Error::domain(format!(
                "d-left schemes need d to divide n (d = {d}, n = {n})"
            )));
        }
        Ok(ChooserConfig {
            scheme,
            n,
            d,
            n_class: NClass::classify(n),
        })
    }

    /// Subtable size for d-left schemes.
    pub fn subtable_size(&self) -> u64 {
        self.n / self.d as u64
    }
}

/// The ordered bin choices produced for one ball.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceSet {
    pub bins: SmallVec<[u32; 8]>,
    pub scheme: Scheme,
}

impl ChoiceSet {
    pub fn d(&self) -> usize {
        self.bins.len()
    }
}

/// Probe positions `(offset + k * stride) mod n` for `k = 0 .. d-1`.
///
/// The stride must be coprime to `n`; together with `d <= n` that makes all
/// positions distinct.
pub fn double_hash_choices(offset: u64, stride: u64, d: usize, n: u64) -> Result<ChoiceSet> {
    if n == 0 || offset >= n {
        return Err(Error::domain(format!(
            "offset must lie in [0, n - 1] (offset = {offset}, n = {n})"
        )));
    }
    if stride == 0 || stride >= n {
        return Err(Error::domain(format!(
            "stride must lie in [1, n - 1] (stride = {stride}, n = {n})"
        )));
    }
    if gcd(stride, n) != 1 {
        return Err(Error::domain(format!(
            "stride {stride} shares a factor with n = {n}; probe positions would repeat"
        )));
    }
    if d as u64 > n {
        return Err(Error::domain(format!("d = {d} exceeds n = {n}")));
    }
    let mut bins: SmallVec<[u32; 8]> = SmallVec::with_capacity(d);
    let mut pos = offset;
    for _ in 0..d {
        bins.push(pos as u32);
        pos += stride;
        if pos >= n {
            pos -= n;
        }
    }
    Ok(ChoiceSet {
        bins,
        scheme: Scheme::DoubleHash,
    })
}

/// Draw one ball's choices under the configured scheme.
pub fn draw_choices(stream: &mut RandomStream, cfg: &ChooserConfig) -> Result<ChoiceSet> {
    let n = cfg.n;
    let d = cfg.d;
    let mut bins: SmallVec<[u32; 8]> = SmallVec::with_capacity(d);
    match cfg.scheme {
        Scheme::RandomWithReplacement => {
            for _ in 0..d {
                bins.push(stream.bounded(n) as u32);
            }
        }
        Scheme::RandomDistinct => {
            let sample = stream.sample_distinct(n, d)?;
            bins.extend(sample.iter().map(|&b| b as u32));
        }
        Scheme::DoubleHash => {
            if n == 1 {
                bins.push(0);
            } else {
                let offset = stream.bounded(n);
                let stride = stream.sample_stride(n)?;
                let mut pos = offset;
                for _ in 0..d {
                    bins.push(pos as u32);
                    pos += stride;
                    if pos >= n {
                        pos -= n;
                    }
                }
            }
        }
        Scheme::DleftRandom => {
            let s = cfg.subtable_size();
            for k in 0..d as u64 {
                bins.push((k * s + stream.bounded(s)) as u32);
            }
        }
        Scheme::DleftDoubleHash => {
            let s = cfg.subtable_size();
            if s == 1 {
                // One bin per subtable: the choices are forced.
                bins.extend(0..d as u32);
            } else {
                let offset = stream.bounded(s);
                let stride = stream.sample_stride(s)?;
                let mut pos = offset;
                for k in 0..d as u64 {
                    bins.push((k * s + pos) as u32);
                    pos += stride;
                    if pos >= s {
                        pos -= s;
                    }
                }
            }
        }
    }
    Ok(ChoiceSet {
        bins,
        scheme: cfg.scheme,
    })
}
