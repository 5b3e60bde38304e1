//! Initial-distribution presets, registered by name.
//!
//! Every preset is a product of compactly supported polynomial bumps
//! `(1 - r^2)^6`, which are `C^5` across the support edge. New presets are
//! added by registering a [`ProfileFactory`] in a [`ProfileRegistry`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Exponent of the polynomial bump kernel.
pub const BUMP_POWER: i32 = 6;

/// `(1 - r^2)^6` on `|r| < 1`, zero elsewhere.
#[inline]
pub fn bump(r: f64) -> f64 {
    let q = 1.0 - r * r;
    if q > 0.0 {
        q.powi(BUMP_POWER)
    } else {
        0.0
    }
}

/// `∫_{-1}^{1} (1 - r^2)^6 dr = 2^13 (6!)^2 / 13!`.
pub fn bump_integral() -> f64 {
    let fact = |n: u64| (1..=n).product::<u64>() as f64;
    2f64.powi(2 * BUMP_POWER + 1) * fact(BUMP_POWER as u64).powi(2) / fact(2 * BUMP_POWER as u64 + 1)
}

/// Closed box outside which a profile vanishes identically.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportBox {
    pub x: (f64, f64),
    pub v1: (f64, f64),
    pub v2: (f64, f64),
}

impl SupportBox {
    pub const EMPTY: SupportBox = SupportBox {
        x: (0.0, 0.0),
        v1: (0.0, 0.0),
        v2: (0.0, 0.0),
    };

    pub fn max_abs_v1(&self) -> f64 {
        self.v1.0.abs().max(self.v1.1.abs())
    }
}

/// An initial distribution `f0(x, v1, v2)` with known compact support.
pub trait Profile: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn eval(&self, x: f64, v1: f64, v2: f64) -> f64;

    fn support(&self) -> SupportBox;

    /// Whether `f0(x, v1, -v2) == f0(x, v1, v2)` holds by construction.
    fn is_v2_even(&self) -> bool;

    fn is_zero(&self) -> bool {
        false
    }
}

/// Named numeric parameters of a preset; missing keys fall back to defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProfileParams(pub BTreeMap<String, f64>);

impl ProfileParams {
    pub fn get(&self, key: &str, default: f64) -> f64 {
        self.0.get(key).copied().unwrap_or(default)
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }
}

pub type ProfileFactory = fn(&ProfileParams) -> Result<Box<dyn Profile>>;

/// Lookup table from preset name to constructor.
pub struct ProfileRegistry {
    entries: BTreeMap<&'static str, ProfileFactory>,
}

impl ProfileRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Registry holding the built-in presets.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register("zero", |_| Ok(Box::new(Zero)));
        reg.register("even-bump", |p| Ok(Box::new(EvenBump::from_params(p)?)));
        reg.register("two-stream", |p| Ok(Box::new(TwoStream::from_params(p)?)));
        reg.register("asymmetric-bump", |p| Ok(Box::new(AsymmetricBump::from_params(p)?)));
        reg
    }

    pub fn register(&mut self, name: &'static str, factory: ProfileFactory) {
        self.entries.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn build(&self, name: &str, params: &ProfileParams) -> Result<Box<dyn Profile>> {
        let factory = self
            .entries
            .get(name)
            .ok_or_else(|| Error::UnknownProfile(name.to_string()))?;
        factory(params)
    }
}

fn positive(name: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Config(format!(
            "profile parameter `{name}` must be positive, got {value}"
        )))
    }
}

fn nonnegative(name: &str, value: f64) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Config(format!(
            "profile parameter `{name}` must be nonnegative, got {value}"
        )))
    }
}

/// Spatial envelope shared by the non-trivial presets:
/// `bump((x - c) / w) * (1 + eps * cos(k (x - c)))`.
#[derive(Clone, Copy, Debug)]
struct Envelope {
    center: f64,
    half_width: f64,
    perturbation: f64,
    wavenumber: f64,
}

impl Envelope {
    fn from_params(p: &ProfileParams, default_eps: f64) -> Result<Self> {
        let half_width = positive("x_width", p.get("x_width", 2.0))?;
        let perturbation = p.get("perturbation", default_eps);
        if perturbation.abs() > 1.0 {
            return Err(Error::Config("`perturbation` must lie in [-1, 1]".into()));
        }
        Ok(Self {
            center: p.get("x_center", 0.0),
            half_width,
            perturbation,
            wavenumber: p.get("wavenumber", PI / half_width),
        })
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let b = bump((x - self.center) / self.half_width);
        if b == 0.0 {
            return 0.0;
        }
        b * (1.0 + self.perturbation * (self.wavenumber * (x - self.center)).cos())
    }

    fn range(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

#[derive(Debug)]
pub struct Zero;

impl Profile for Zero {
    fn name(&self) -> &str {
        "zero"
    }
    fn eval(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn support(&self) -> SupportBox {
        SupportBox::EMPTY
    }
    fn is_v2_even(&self) -> bool {
        true
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// Product bump, even in `v2` by construction.
#[derive(Debug)]
pub struct EvenBump {
    amplitude: f64,
    envelope: Envelope,
    v1_center: f64,
    v1_width: f64,
    v2_width: f64,
}

impl EvenBump {
    pub fn from_params(p: &ProfileParams) -> Result<Self> {
        Ok(Self {
            amplitude: nonnegative("amplitude", p.get("amplitude", 1.0))?,
            envelope: Envelope::from_params(p, 0.3)?,
            v1_center: p.get("v1_center", 0.0),
            v1_width: positive("v1_width", p.get("v1_width", 0.5))?,
            v2_width: positive("v2_width", p.get("v2_width", 0.5))?,
        })
    }
}

impl Profile for EvenBump {
    fn name(&self) -> &str {
        "even-bump"
    }

    fn eval(&self, x: f64, v1: f64, v2: f64) -> f64 {
        self.amplitude * self.envelope.eval(x) * bump((v1 - self.v1_center) / self.v1_width) * bump(v2 / self.v2_width)
    }

    fn support(&self) -> SupportBox {
        SupportBox {
            x: self.envelope.range(),
            v1: (self.v1_center - self.v1_width, self.v1_center + self.v1_width),
            v2: (-self.v2_width, self.v2_width),
        }
    }

    fn is_v2_even(&self) -> bool {
        true
    }
}

/// Counter-streaming beams at `v1 = ±beam_speed` with a modulated spatial
/// envelope; `v2_drift` shifts the `v2` bump and drives a transverse current.
#[derive(Debug)]
pub struct TwoStream {
    amplitude: f64,
    envelope: Envelope,
    beam_speed: f64,
    v1_width: f64,
    v2_width: f64,
    v2_drift: f64,
}

impl TwoStream {
    pub fn from_params(p: &ProfileParams) -> Result<Self> {
        Ok(Self {
            amplitude: nonnegative("amplitude", p.get("amplitude", 1.0))?,
            envelope: Envelope::from_params(p, 0.2)?,
            beam_speed: nonnegative("beam_speed", p.get("beam_speed", 0.5))?,
            v1_width: positive("v1_width", p.get("v1_width", 0.35))?,
            v2_width: positive("v2_width", p.get("v2_width", 0.4))?,
            v2_drift: p.get("v2_drift", 0.2),
        })
    }
}

impl Profile for TwoStream {
    fn name(&self) -> &str {
        "two-stream"
    }

    fn eval(&self, x: f64, v1: f64, v2: f64) -> f64 {
        let beams = 0.5 * (bump((v1 - self.beam_speed) / self.v1_width) + bump((v1 + self.beam_speed) / self.v1_width));
        self.amplitude * self.envelope.eval(x) * beams * bump((v2 - self.v2_drift) / self.v2_width)
    }

    fn support(&self) -> SupportBox {
        let reach = self.beam_speed + self.v1_width;
        SupportBox {
            x: self.envelope.range(),
            v1: (-reach, reach),
            v2: (self.v2_drift - self.v2_width, self.v2_drift + self.v2_width),
        }
    }

    fn is_v2_even(&self) -> bool {
        self.v2_drift == 0.0
    }
}

/// Product bump centered off the `v2 = 0` plane.
#[derive(Debug)]
pub struct AsymmetricBump {
    amplitude: f64,
    envelope: Envelope,
    v1_center: f64,
    v1_width: f64,
    v2_center: f64,
    v2_width: f64,
}

impl AsymmetricBump {
    pub fn from_params(p: &ProfileParams) -> Result<Self> {
        Ok(Self {
            amplitude: nonnegative("amplitude", p.get("amplitude", 1.0))?,
            envelope: Envelope::from_params(p, 0.0)?,
            v1_center: p.get("v1_center", 0.1),
            v1_width: positive("v1_width", p.get("v1_width", 0.5))?,
            v2_center: p.get("v2_center", 0.3),
            v2_width: positive("v2_width", p.get("v2_width", 0.5))?,
        })
    }
}

impl Profile for AsymmetricBump {
    fn name(&self) -> &str {
        "asymmetric-bump"
    }

    fn eval(&self, x: f64, v1: f64, v2: f64) -> f64 {
        self.amplitude
            * self.envelope.eval(x)
            * bump((v1 - self.v1_center) / self.v1_width)
            * bump((v2 - self.v2_center) / self.v2_width)
    }

    fn support(&self) -> SupportBox {
        SupportBox {
            x: self.envelope.range(),
            v1: (self.v1_center - self.v1_width, self.v1_center + self.v1_width),
            v2: (self.v2_center - self.v2_width, self.v2_center + self.v2_width),
        }
    }

    fn is_v2_even(&self) -> bool {
        self.v2_center == 0.0
    }
}
