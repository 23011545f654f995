//! Run configuration: defaults, config-file loading, flag overrides, validation.
//!
//! A resolved `RunConfig` is fully explicit, so writing it back to TOML and
//! loading that file reproduces it exactly.

use std::fmt;
use std::path::{Path, PathBuf};

use p2atlas::airy::Lambda;
use p2atlas::num::C64;
use p2atlas::taufun::Precision;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

/// Largest n accepted on the command line (tau capacity is 20 and the bridge needs n + 1).
pub const N_LIMIT: usize = 16;
pub const RESOLUTION_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Poles,
    Phase,
    Trajectories,
    Bridge,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Poles => "poles",
            Command::Phase => "phase",
            Command::Trajectories => "trajectories",
            Command::Bridge => "bridge",
            Command::Verify => "verify",
        }
    }

    /// Which of csv, json, svg the command writes.
    fn formats(self) -> [bool; 3] {
        match self {
            Command::Poles | Command::Phase | Command::Trajectories => [true, true, true],
            Command::Bridge => [true, true, false],
            Command::Verify => [false, true, false],
        }
    }

    fn default_window(self) -> [f64; 4] {
        match self {
            Command::Poles => [-8.0, -8.0, 8.0, 8.0],
            Command::Bridge => [-1.0, -1.0, 1.0, 1.0],
            _ => [-4.0, -4.0, 4.0, 4.0],
        }
    }

    fn default_resolution(self) -> usize {
        match self {
            Command::Bridge => 5,
            _ => 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionMode {
    #[default]
    Double,
    Extended,
}

impl From<PrecisionMode> for Precision {
    fn from(p: PrecisionMode) -> Self {
        match p {
            PrecisionMode::Double => Precision::Double,
            PrecisionMode::Extended => Precision::Extended,
        }
    }
}

/// lambda as written in configs: `"inf"` or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaValue(pub Lambda);

impl LambdaValue {
    pub fn parse(words: &[String]) -> Result<Self, String> {
        match words {
            [w] if w.eq_ignore_ascii_case("inf") => Ok(LambdaValue(Lambda::Infinity)),
            [re] => Ok(LambdaValue(Lambda::Finite(C64::new(real(re)?, 0.0)))),
            [re, im] => Ok(LambdaValue(Lambda::Finite(C64::new(real(re)?, real(im)?)))),
            _ => Err("lambda takes two reals or the token inf".into()),
        }
    }
}

fn real(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("not a number: {s:?}"))
}

impl fmt::Display for LambdaValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Serialize for LambdaValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Lambda::Infinity => s.serialize_str("inf"),
            Lambda::Finite(z) => {
                let mut seq = s.serialize_seq(Some(2))?;
                seq.serialize_element(&z.re)?;
                seq.serialize_element(&z.im)?;
                seq.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for LambdaValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = LambdaValue;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"inf\" or [re, im]")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<LambdaValue, E> {
                if v.eq_ignore_ascii_case("inf") {
                    Ok(LambdaValue(Lambda::Infinity))
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut a: A) -> Result<LambdaValue, A::Error> {
                let re: f64 = a.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let im: f64 = a.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if a.next_element::<f64>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(LambdaValue(Lambda::Finite(C64::new(re, im))))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
    /// written only on a numerical failure
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    pub lambda: LambdaValue,
    #[serde(rename = "bigN")]
    pub big_n: f64,
    pub t: [f64; 2],
    /// [re_lo, im_lo, re_hi, im_hi]
    pub window: [f64; 4],
    /// grid points per side (phase, bridge)
    pub resolution: usize,
    pub precision: PrecisionMode,
    pub outputs: Outputs,
    pub seed: u64,
    /// verify only: criteria to run, empty for all
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<usize>,
}

/// The same keys with everything optional: a config file, or the flags.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub command: Option<Command>,
    pub n: Option<usize>,
    pub lambda: Option<LambdaValue>,
    #[serde(rename = "bigN")]
    pub big_n: Option<f64>,
    pub t: Option<[f64; 2]>,
    pub window: Option<[f64; 4]>,
    pub resolution: Option<usize>,
    pub precision: Option<PrecisionMode>,
    pub outputs: Option<Outputs>,
    pub seed: Option<u64>,
    pub criteria: Option<Vec<usize>>,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl PartialConfig {
    pub fn from_toml(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let s = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml(&s)
    }

    /// Keys set in `over` win; output paths merge field by field.
    pub fn overlay(mut self, over: PartialConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(command, n, lambda, big_n, t, window, resolution, precision, seed, criteria);
        if let Some(o) = over.outputs {
            let mut base = self.outputs.unwrap_or_default();
            base.csv = o.csv.or(base.csv);
            base.json = o.json.or(base.json);
            base.svg = o.svg.or(base.svg);
            base.diagnostic = o.diagnostic.or(base.diagnostic);
            self.outputs = Some(base);
        }
        self
    }

    /// Fill defaults and validate. Output files the command writes and the user
    /// did not name go to `out_dir/<command>.<ext>`.
    pub fn resolve(self, out_dir: Option<&Path>) -> Result<RunConfig, ConfigError> {
        let command = self.command.ok_or_else(|| ConfigError("no command given".into()))?;
        let given = self.outputs.unwrap_or_default();
        let anything_named = given.csv.is_some() || given.json.is_some() || given.svg.is_some();
        let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        let default_path = |ext: &str| Some(dir.join(format!("{}.{ext}", command.name())));
        let [csv, json, svg] = command.formats();
        let outputs = if anything_named && out_dir.is_none() {
            Outputs { diagnostic: given.diagnostic.or_else(|| Some(dir.join("p2atlas-diagnostic.json"))), ..given }
        } else {
            Outputs {
                csv: given.csv.or_else(|| if csv { default_path("csv") } else { None }),
                json: given.json.or_else(|| if json { default_path("json") } else { None }),
                svg: given.svg.or_else(|| if svg { default_path("svg") } else { None }),
                diagnostic: given.diagnostic.or_else(|| Some(dir.join("p2atlas-diagnostic.json"))),
            }
        };
        let cfg = RunConfig {
            command,
            n: self.n.unwrap_or(3),
            lambda: self.lambda.unwrap_or(LambdaValue(Lambda::real(1.0))),
            big_n: self.big_n.unwrap_or(1.0),
            t: self.t.unwrap_or([0.0, 0.0]),
            window: self.window.unwrap_or(command.default_window()),
            resolution: self.resolution.unwrap_or(command.default_resolution()),
            precision: self.precision.unwrap_or_default(),
            outputs,
            seed: self.seed.unwrap_or(0),
            criteria: self.criteria.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError(m));
        if !(1..=N_LIMIT).contains(&self.n) {
            return bad(format!("n = {} outside 1..={N_LIMIT}", self.n));
        }
        if let Lambda::Finite(z) = self.lambda.0 {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return bad("lambda must be finite or inf".into());
            }
        }
        if !(self.big_n.is_finite() && self.big_n > 0.0) {
            return bad(format!("bigN = {} must be positive", self.big_n));
        }
        if !self.t.iter().all(|x| x.is_finite()) {
            return bad("t must be finite".into());
        }
        let [a, b, c, d] = self.window;
        if !(self.window.iter().all(|x| x.is_finite()) && c > a && d > b) {
            return bad(format!("window {:?} needs re_lo < re_hi and im_lo < im_hi", self.window));
        }
        if !(2..=RESOLUTION_LIMIT).contains(&self.resolution) {
            return bad(format!("resolution {} outside 2..={RESOLUTION_LIMIT}", self.resolution));
        }
        // TOML integers are signed 64-bit
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed {} does not fit a TOML integer", self.seed));
        }
        if let Some(k) = self.criteria.iter().find(|k| !(1..=14).contains(*k)) {
            return bad(format!("criterion {k} outside 1..=14"));
        }
        if !self.criteria.is_empty() && self.command != Command::Verify {
            return bad("criteria only applies to verify".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn lambda(&self) -> Lambda {
        self.lambda.0
    }

    pub fn t(&self) -> C64 {
        C64::new(self.t[0], self.t[1])
    }

    pub fn window_corners(&self) -> (C64, C64) {
        (C64::new(self.window[0], self.window[1]), C64::new(self.window[2], self.window[3]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(cmd: Command) -> RunConfig {
        PartialConfig { command: Some(cmd), ..Default::default() }.resolve(Some(Path::new("out"))).unwrap()
    }

    #[test]
    fn defaults_round_trip() {
        for cmd in [Command::Poles, Command::Phase, Command::Trajectories, Command::Bridge, Command::Verify] {
            let c = full(cmd);
            let back = PartialConfig::from_toml(&c.to_toml()).unwrap().resolve(None).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_toml(), c.to_toml());
        }
    }

    #[test]
    fn lambda_forms() {
        let p = PartialConfig::from_toml("lambda = \"inf\"").unwrap();
        assert_eq!(p.lambda, Some(LambdaValue(Lambda::Infinity)));
        let p = PartialConfig::from_toml("lambda = [1.0, -0.5]").unwrap();
        assert_eq!(p.lambda, Some(LambdaValue(Lambda::Finite(C64::new(1.0, -0.5)))));
        assert!(PartialConfig::from_toml("lambda = \"oo\"").is_err());
        assert!(PartialConfig::from_toml("lambda = [1.0, 2.0, 3.0]").is_err());
        assert_eq!(LambdaValue::parse(&["INF".into()]).unwrap().0, Lambda::Infinity);
        assert!(LambdaValue::parse(&["x".into()]).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let base = PartialConfig { command: Some(Command::Phase), ..Default::default() };
        for p in [
            PartialConfig { n: Some(0), ..base.clone() },
            PartialConfig { window: Some([1.0, 0.0, -1.0, 1.0]), ..base.clone() },
            PartialConfig { big_n: Some(-1.0), ..base.clone() },
            PartialConfig { resolution: Some(1), ..base.clone() },
            PartialConfig { criteria: Some(vec![3]), ..base.clone() },
            PartialConfig { command: None, ..base.clone() },
        ] {
            assert!(p.resolve(None).is_err());
        }
        assert!(PartialConfig::from_toml("colour = 3").is_err());
    }

    #[test]
    fn overlay_prefers_flags() {
        let file = PartialConfig::from_toml("n = 4\nseed = 9\n[outputs]\ncsv = \"a.csv\"\n").unwrap();
        let flags = PartialConfig {
            command: Some(Command::Poles),
            n: Some(2),
            outputs: Some(Outputs { svg: Some("b.svg".into()), ..Default::default() }),
            ..Default::default()
        };
        let c = file.overlay(flags).resolve(None).unwrap();
        assert_eq!((c.n, c.seed), (2, 9));
        assert_eq!(c.outputs.csv.as_deref(), Some(Path::new("a.csv")));
        assert_eq!(c.outputs.svg.as_deref(), Some(Path::new("b.svg")));
        assert_eq!(c.outputs.json, None);
    }
}
