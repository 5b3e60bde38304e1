//! Run configuration: TOML with sections, plus `key=value` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::background::BackgroundSpec;
use crate::distribution::NegativityPolicy;
use crate::error::{Error, Result};
use crate::fields::FieldBump;
use crate::grid::{make_grid, PhaseGrid};
use crate::profile::{Profile, ProfileParams, ProfileRegistry};
use crate::solver::{velocity_map, E1Closure, SolverConfig, BOUNDARY_RATIO, SUPPORT_RATIO};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub x: [f64; 2],
    pub v1: [f64; 2],
    pub v2: [f64; 2],
    /// Cell counts `[n_x, n_v1, n_v2]`.
    pub cells: [usize; 3],
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x: [-8.0, 8.0],
            v1: [-2.0, 2.0],
            v2: [-2.0, 2.0],
            cells: [128, 64, 64],
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<PhaseGrid> {
        make_grid(
            [
                (self.x[0], self.x[1]),
                (self.v1[0], self.v1[1]),
                (self.v2[0], self.v2[1]),
            ],
            (self.cells[0], self.cells[1], self.cells[2]),
        )
    }

    /// The same box with every cell count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let mut g = self.clone();
        for c in &mut g.cells {
            *c *= factor;
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self {
            name: "even-bump".into(),
            params: BTreeMap::new(),
        }
    }
}

impl ProfileSpec {
    pub fn build(&self, registry: &ProfileRegistry) -> Result<Box<dyn Profile>> {
        registry.build(&self.name, &ProfileParams(self.params.clone()))
    }
}

/// Initial transverse fields; absent entries are zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialFields {
    pub e2: Option<FieldBump>,
    pub b: Option<FieldBump>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative level below which negative values are clamped.
    pub negativity_clamp: f64,
    /// Relative level below which a negative value aborts the run.
    pub negativity_abort: f64,
    pub conserve_clamped_mass: bool,
    /// Relative level that counts as "f != 0".
    pub support_ratio: f64,
    /// Relative level on the outer node layer that aborts the run.
    pub boundary_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let n = NegativityPolicy::default();
        Self {
            negativity_clamp: n.clamp,
            negativity_abort: n.abort,
            conserve_clamped_mass: n.conserve_mass,
            support_ratio: SUPPORT_RATIO,
            boundary_ratio: BOUNDARY_RATIO,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitSpec {
    /// Lattice points per axis over the initial support.
    pub lattice: usize,
    /// Number of orbits written out as CSV.
    pub dump: usize,
}

impl Default for OrbitSpec {
    fn default() -> Self {
        Self { lattice: 5, dump: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSpec {
    /// Number of resolutions, each doubling every cell count.
    pub levels: usize,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self { levels: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: String,
    pub t_final: f64,
    /// Snapshot cadence in steps.
    pub output_stride: usize,
    /// Snapshots are written only when enabled.
    pub snapshots: bool,
    pub epsilons: Vec<f64>,
    pub relativistic: bool,
    pub neutralize: bool,
    pub output_dir: PathBuf,
    pub cfl_limit: f64,
    pub e1_closure: E1Closure,
    pub grid: GridSpec,
    pub profile: ProfileSpec,
    pub background: BackgroundSpec,
    pub fields: InitialFields,
    pub tolerances: Tolerances,
    pub orbit: OrbitSpec,
    pub convergence: ConvergenceSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: "full".into(),
            t_final: 5.0,
            output_stride: 10,
            snapshots: false,
            epsilons: vec![0.1, 0.3, 0.5],
            relativistic: false,
            neutralize: true,
            output_dir: PathBuf::from("run"),
            cfl_limit: 1.0,
            e1_closure: E1Closure::Ampere,
            grid: GridSpec::default(),
            profile: ProfileSpec::default(),
            background: BackgroundSpec::default(),
            fields: InitialFields::default(),
            tolerances: Tolerances::default(),
            orbit: OrbitSpec::default(),
            convergence: ConvergenceSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parses `text` after applying `key=value` overrides with dotted keys
    /// (`grid.cells=[64,32,32]`, `profile.params.perturbation=0.1`).
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        let cfg: RunConfig =
            RunConfig::deserialize(toml::Value::Table(table)).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks everything that can be checked without running: value
    /// ranges, the grid, the profile, and the free-streaming envelope.
    pub fn validate(&self, registry: &ProfileRegistry) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.output_stride == 0 {
            return Err(Error::Config("output_stride must be at least 1".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::Config(format!("epsilon {e} outside (0, 1)")));
        }
        if !(self.cfl_limit > 0.0 && self.cfl_limit <= 1.0) {
            return Err(Error::Config(format!("cfl_limit {} outside (0, 1]", self.cfl_limit)));
        }
        let t = &self.tolerances;
        if !(t.negativity_clamp >= 0.0 && t.negativity_abort >= t.negativity_clamp) {
            return Err(Error::Config("need 0 <= negativity_clamp <= negativity_abort".into()));
        }
        if !(t.support_ratio >= 0.0 && t.boundary_ratio >= 0.0) {
            return Err(Error::Config("support and boundary ratios must be nonnegative".into()));
        }
        if self.orbit.lattice == 0 || self.convergence.levels < 2 {
            return Err(Error::Config(
                "orbit.lattice >= 1 and convergence.levels >= 2 required".into(),
            ));
        }
        let grid = self.grid.build()?;
        let profile = self.profile.build(registry)?;
        self.check_envelope(&grid, profile.as_ref())
    }

    /// The support swept by free streaming over `[0, t_final]` must fit
    /// strictly inside the box.
    pub fn check_envelope(&self, grid: &PhaseGrid, profile: &dyn Profile) -> Result<()> {
        if profile.is_zero() {
            return Ok(());
        }
        let s = profile.support();
        let inside = |(lo, hi): (f64, f64), min: f64, max: f64| lo > min && hi < max;
        if !inside(s.v1, grid.v1.min, grid.v1.max) || !inside(s.v2, grid.v2.min, grid.v2.max) {
            return Err(Error::Config(format!(
                "profile velocity support {:?} x {:?} does not fit inside the velocity box",
                s.v1, s.v2
            )));
        }
        let vmax = s.max_abs_v1();
        let speed = velocity_map((vmax, 0.0), self.relativistic).0;
        let reach = (s.x.0 - speed * self.t_final, s.x.1 + speed * self.t_final);
        if !inside(reach, grid.x.min, grid.x.max) {
            return Err(Error::Config(format!(
                "free-streaming envelope [{}, {}] up to t = {} exceeds the x box [{}, {}]",
                reach.0, reach.1, self.t_final, grid.x.min, grid.x.max
            )));
        }
        Ok(())
    }

    pub fn solver_config(&self, grid: &PhaseGrid, reference_max: f64) -> SolverConfig {
        let mut c = SolverConfig::for_grid(grid, reference_max);
        c.relativistic = self.relativistic;
        c.cfl_limit = self.cfl_limit;
        c.e1_closure = self.e1_closure;
        c.negativity = NegativityPolicy {
            clamp: self.tolerances.negativity_clamp,
            abort: self.tolerances.negativity_abort,
            conserve_mass: self.tolerances.conserve_clamped_mass,
        };
        c.support_ratio = self.tolerances.support_ratio;
        c.boundary_ratio = self.tolerances.boundary_ratio;
        c
    }

    /// Number of steps of length `dt` covering `t_final`.
    pub fn steps(&self, dt: f64) -> usize {
        (self.t_final / dt - 1e-9).ceil().max(1.0) as usize
    }
}

fn apply_override(table: &mut toml::Table, ov: &str) -> Result<()> {
    let (key, raw) = ov
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{ov}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = parse_value(raw);
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key `{key}`: `{p}` is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// A TOML literal if `raw` parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
mode = "full"
t_final = 2.0
output_stride = 4
epsilons = [0.1, 0.5]

[grid]
x = [-8.0, 8.0]
v1 = [-2.0, 2.0]
v2 = [-2.0, 2.0]
cells = [64, 32, 32]

[profile]
name = "two-stream"
params = { perturbation = 0.1 }

[background]
kind = "bump"
center = 0.0
half_width = 3.0

[fields.b]
amplitude = 0.01
center = 0.0
half_width = 2.0
"#;

    #[test]
    fn parses_sections() {
        let c = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.grid.cells, [64, 32, 32]);
        assert_eq!(c.profile.params["perturbation"], 0.1);
        assert!(c.fields.e2.is_none());
        assert_eq!(c.fields.b.as_ref().unwrap().amplitude, 0.01);
        assert_eq!(c.tolerances, Tolerances::default());
        c.validate(&ProfileRegistry::builtin()).unwrap();
    }

    #[test]
    fn overrides_use_dotted_keys() {
        let ov = vec![
            "grid.cells=[32, 16, 16]".to_string(),
            "profile.params.beam_speed=0.4".to_string(),
            "mode=vp1d".to_string(),
            "tolerances.boundary_ratio = 1e-8".to_string(),
        ];
        let c = RunConfig::from_toml_with_overrides(SAMPLE, &ov).unwrap();
        assert_eq!(c.grid.cells, [32, 16, 16]);
        assert_eq!(c.profile.params["beam_speed"], 0.4);
        assert_eq!(c.mode, "vp1d");
        assert_eq!(c.tolerances.boundary_ratio, 1e-8);
    }

    #[test]
    fn roundtrips_through_toml() {
        let c = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(RunConfig::from_toml_str(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        let reg = ProfileRegistry::builtin();
        for ov in [
            "t_final=0",
            "output_stride=0",
            "epsilons=[1.5]",
            "cfl_limit=2.0",
            "grid.cells=[2,8,8]",
        ] {
            let c = RunConfig::from_toml_with_overrides(SAMPLE, &[ov.to_string()]).unwrap();
            assert!(c.validate(&reg).is_err(), "{ov}");
        }
        assert!(RunConfig::from_toml_str("t_finale = 1.0").is_err());
        assert!(RunConfig::from_toml_str("t_final = ").is_err());
        assert!(RunConfig::from_toml_with_overrides(SAMPLE, &["novalue".into()]).is_err());
        let c = RunConfig::from_toml_with_overrides(SAMPLE, &["profile.name=\"nope\"".into()]).unwrap();
        assert!(matches!(c.validate(&reg), Err(Error::UnknownProfile(_))));
    }

    #[test]
    fn envelope_dry_run() {
        let reg = ProfileRegistry::builtin();
        // two-stream reaches |v1| = 0.85; from |x| <= 2 that is 2 + 0.85 * 8 > 8
        let c = RunConfig::from_toml_with_overrides(SAMPLE, &["t_final=8".into()]).unwrap();
        let err = c.validate(&reg).unwrap_err();
        assert!(err.to_string().contains("free-streaming envelope"), "{err}");
        let c = RunConfig::from_toml_with_overrides(SAMPLE, &["t_final=8".into(), "relativistic=true".into()]).unwrap();
        assert!(c.validate(&reg).is_ok());
    }

    #[test]
    fn step_count_covers_t_final() {
        let c = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.steps(0.25), 8);
        assert_eq!(c.steps(0.3), 7);
    }
}
