//! Experiment configuration: flat `key = value` text files, bundled presets
//! named after the tables they reproduce, and command-line overrides.

use crate::CliError;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use twochoice::prelude::*;

/// What the experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Discrete trials for one scheme.
    Balls,
    /// Discrete trials for two schemes plus a comparison report.
    Compare,
    /// Continuous-time queueing trials.
    Queue,
    /// Fluid-limit integration only.
    Fluid,
    /// Coupled majorization runs.
    Coupled,
    /// Ancestry-list size measurement.
    Ancestry,
}

impl Kind {
    pub fn tag(self) -> &'static str {
        match self {
            Kind::Balls => "balls",
            Kind::Compare => "compare",
            Kind::Queue => "queue",
            Kind::Fluid => "fluid",
            Kind::Coupled => "coupled",
            Kind::Ancestry => "ancestry",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Kind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "balls" => Ok(Kind::Balls),
            "compare" => Ok(Kind::Compare),
            "queue" => Ok(Kind::Queue),
            "fluid" => Ok(Kind::Fluid),
            "coupled" => Ok(Kind::Coupled),
            "ancestry" => Ok(Kind::Ancestry),
            _ => Err(CliError::config(format!(
                "field `kind`: unknown kind `{s}` (expected balls, compare, queue, fluid, \
                 coupled or ancestry)"
            ))),
        }
    }
}

/// Quantity an expectation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// Mean fraction of bins with load exactly `index`.
    Fraction,
    /// Mean fraction of bins with load at least `index`.
    Tail,
    /// Fraction of trials whose max load equals `index`.
    MaxLoadFraction,
    /// Mean sojourn time across seeds.
    MeanSojourn,
    /// Fluid-limit tail fraction at level `index`.
    FluidTail,
}

impl Quantity {
    fn parse(s: &str) -> Option<Quantity> {
        match s {
            "fraction" => Some(Quantity::Fraction),
            "tail" => Some(Quantity::Tail),
            "max_load_frac" => Some(Quantity::MaxLoadFraction),
            "mean_sojourn" => Some(Quantity::MeanSojourn),
            "fluid_tail" => Some(Quantity::FluidTail),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Quantity::Fraction => "fraction",
            Quantity::Tail => "tail",
            Quantity::MaxLoadFraction => "max_load_frac",
            Quantity::MeanSojourn => "mean_sojourn",
            Quantity::FluidTail => "fluid_tail",
        }
    }
}

/// One `expect.*` line: a value the run should reproduce within a
/// tolerance (desk scale, and optionally a tighter paper-scale one).
#[derive(Debug, Clone)]
pub struct Expectation {
    pub quantity: Quantity,
    pub scheme: Option<Scheme>,
    pub index: Option<u32>,
    pub value: f64,
    pub desk_tolerance: f64,
    pub paper_tolerance: f64,
}

impl Expectation {
    pub fn name(&self) -> String {
        let mut name = self.quantity.tag().to_string();
        if let Some(s) = self.scheme {
            name.push('.');
            name.push_str(s.tag());
        }
        if let Some(i) = self.index {
            name.push('.');
            name.push_str(&i.to_string());
        }
        name
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub schemes: Vec<Scheme>,
    pub n: u64,
    /// Bin counts for ancestry sweeps; `[n]` otherwise.
    pub n_list: Vec<u64>,
    pub m: u64,
    pub d: usize,
    pub trials: u64,
    pub master_seed: u64,
    pub tie_break: TieBreak,
    pub lambda: Option<f64>,
    pub horizon: f64,
    pub burn_in: f64,
    pub t_end: f64,
    pub truncation: usize,
    pub step: f64,
    pub include_fluid: bool,
    pub output: String,
    pub preset: Option<String>,
    pub description: Option<String>,
    pub expectations: Vec<Expectation>,
    /// The raw resolved key/value map, echoed into report headers.
    pub raw: BTreeMap<String, String>,
}

const PRESETS: &[(&str, &str)] = &[
    ("table1a", include_str!("../presets/table1a.conf")),
    ("table1b", include_str!("../presets/table1b.conf")),
    ("table2a", include_str!("../presets/table2a.conf")),
    ("table2b", include_str!("../presets/table2b.conf")),
    ("table3", include_str!("../presets/table3.conf")),
    ("table4", include_str!("../presets/table4.conf")),
    ("table5", include_str!("../presets/table5.conf")),
    ("table6", include_str!("../presets/table6.conf")),
];

/// Names of the bundled presets, in listing order.
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|&(name, _)| name).collect()
}

pub fn preset_source(name: &str) -> Result<&'static str, CliError> {
    PRESETS
        .iter()
        .find(|&&(n, _)| n == name)
        .map(|&(_, text)| text)
        .ok_or_else(|| {
            CliError::config(format!(
                "unknown preset `{name}` (run `list-presets` for the available names)"
            ))
        })
}

/// One-line description of a preset, for `list-presets`.
pub fn preset_description(name: &str) -> Result<String, CliError> {
    let pairs = parse_pairs(preset_source(name)?)?;
    Ok(pairs
        .get("description")
        .cloned()
        .unwrap_or_else(|| "(no description)".to_string()))
}

/// Parse `key = value` lines; `#` starts a comment, blank lines ignored.
/// Later occurrences of a key override earlier ones, except `expect.*`
/// keys, which accumulate.
fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(idx) => &raw_line[..idx],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::config(format!(
                "line {}: expected `key = value`, got `{raw_line}`",
                lineno + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_field<T: FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|e| CliError::config(format!("field `{key}`: {e} (value `{v}`)"))),
    }
}

fn parse_opt_field<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|e| CliError::config(format!("field `{key}`: {e} (value `{v}`)"))),
    }
}

fn parse_expectation(key: &str, value: &str) -> Result<Expectation, CliError> {
    let err = |msg: &str| CliError::config(format!("field `{key}`: {msg} (value `{value}`)"));
    let mut parts = key.splitn(2, '.');
    let _ = parts.next(); // the literal "expect"
    let rest = parts.next().ok_or_else(|| err("missing quantity"))?;
    let mut segs = rest.split('.');
    let quantity = Quantity::parse(segs.next().unwrap_or(""))
        .ok_or_else(|| err("unknown quantity (fraction, tail, max_load_frac, mean_sojourn, fluid_tail)"))?;
    let mut scheme = None;
    let mut index = None;
    for seg in segs {
        if let Ok(s) = seg.parse::<Scheme>() {
            scheme = Some(s);
        } else if let Ok(i) = seg.parse::<u32>() {
            index = Some(i);
        } else {
            return Err(err(&format!("unrecognized segment `{seg}`")));
        }
    }
    let nums: Vec<&str> = value.split_whitespace().collect();
    if nums.len() < 2 || nums.len() > 3 {
        return Err(err("expected `<value> <tolerance> [<paper tolerance>]`"));
    }
    let parse_num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| err(&format!("bad number `{s}`: {e}")))
    };
    let value_f = parse_num(nums[0])?;
    let desk = parse_num(nums[1])?;
    let paper = if nums.len() == 3 { parse_num(nums[2])? } else { desk };
    Ok(Expectation {
        quantity,
        scheme,
        index,
        value: value_f,
        desk_tolerance: desk,
        paper_tolerance: paper,
    })
}

impl ExperimentConfig {
    /// Resolve a config from an optional preset, an optional file, and
    /// override pairs (applied in that order).
    pub fn resolve(
        preset: Option<&str>,
        config_path: Option<&Path>,
        overrides: &[(String, String)],
        paper_scale: bool,
    ) -> Result<ExperimentConfig, CliError> {
        let mut map = BTreeMap::new();
        if let Some(name) = preset {
            map = parse_pairs(preset_source(name)?)?;
            map.insert("preset".to_string(), name.to_string());
        }
        if let Some(path) = config_path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("cannot read config `{}`: {e}", path.display()))
            })?;
            for (k, v) in parse_pairs(&text)? {
                map.insert(k, v);
            }
        }
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        if paper_scale {
            let trials: u64 = parse_field(&map, "trials", 1000u64)?;
            let paper_trials: u64 = parse_field(&map, "paper_trials", trials.saturating_mul(10))?;
            map.insert("trials".to_string(), paper_trials.to_string());
            map.insert("paper_scale".to_string(), "true".to_string());
        }
        ExperimentConfig::from_map(map)
    }

    fn from_map(map: BTreeMap<String, String>) -> Result<ExperimentConfig, CliError> {
        let kind: Kind = map
            .get("kind")
            .ok_or_else(|| CliError::config("field `kind`: missing (set kind = balls|compare|queue|fluid|coupled|ancestry)"))?
            .parse()?;

        let schemes: Vec<Scheme> = match map.get("schemes").or_else(|| map.get("scheme")) {
            None => vec![],
            Some(list) => list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<Scheme>()
                        .map_err(|e| CliError::config(format!("field `schemes`: {e}")))
                })
                .collect::<Result<_, _>>()?,
        };

        let n: u64 = parse_field(&map, "n", 0u64)?;
        let n_list: Vec<u64> = match map.get("n_list") {
            None => vec![n],
            Some(list) => list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<u64>()
                        .map_err(|e| CliError::config(format!("field `n_list`: {e} (value `{s}`)")))
                })
                .collect::<Result<_, _>>()?,
        };
        let t_end: f64 = parse_field(&map, "t_end", 1.0f64)?;
        let m: u64 = match parse_opt_field::<u64>(&map, "m")? {
            Some(m) => m,
            None => (t_end * n as f64).round() as u64,
        };

        let d: usize = parse_field(&map, "d", 2usize)?;
        let trials: u64 = parse_field(&map, "trials", 1000u64)?;
        let master_seed: u64 = parse_field(&map, "master_seed", 1u64)?;
        let tie_break = match map.get("tie_break") {
            None => schemes
                .first()
                .map(|&s| TieBreak::default_for(s))
                .unwrap_or(TieBreak::Random),
            Some(v) => TieBreak::from_tag(v)
                .map_err(|e| CliError::config(format!("field `tie_break`: {e}")))?,
        };
        let lambda: Option<f64> = parse_opt_field(&map, "lambda")?;
        let horizon: f64 = parse_field(&map, "horizon", 10_000.0f64)?;
        let burn_in: f64 = parse_field(&map, "burn_in", 1_000.0f64)?;
        let truncation: usize = parse_field(&map, "truncation", 16usize)?;
        let step: f64 = parse_field(&map, "step", 1e-3f64)?;
        let include_fluid: bool = parse_field(&map, "include_fluid", false)?;
        let preset = map.get("preset").cloned();
        let description = map.get("description").cloned();
        let output = map
            .get("output")
            .cloned()
            .unwrap_or_else(|| match &preset {
                Some(p) => format!("reports/{p}"),
                None => format!("reports/{}", kind.tag()),
            });

        let mut expectations = Vec::new();
        for (key, value) in &map {
            if key.starts_with("expect.") {
                expectations.push(parse_expectation(key, value)?);
            }
        }

        let cfg = ExperimentConfig {
            kind,
            schemes,
            n,
            n_list,
            m,
            d,
            trials,
            master_seed,
            tie_break,
            lambda,
            horizon,
            burn_in,
            t_end,
            truncation,
            step,
            include_fluid,
            output,
            preset,
            description,
            expectations,
            raw: map,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let needs_bins = !matches!(self.kind, Kind::Fluid | Kind::Ancestry);
        if needs_bins && self.n == 0 {
            return Err(CliError::config("field `n`: must be >= 1"));
        }
        if self.d == 0 {
            return Err(CliError::config("field `d`: must be >= 1"));
        }
        match self.kind {
            Kind::Balls => {
                if self.schemes.len() != 1 {
                    return Err(CliError::config(
                        "field `schemes`: kind balls takes exactly one scheme",
                    ));
                }
            }
            Kind::Compare => {
                if self.schemes.len() != 2 {
                    return Err(CliError::config(
                        "field `schemes`: kind compare takes exactly two schemes",
                    ));
                }
            }
            Kind::Queue => {
                if self.schemes.is_empty() {
                    return Err(CliError::config(
                        "field `schemes`: kind queue needs at least one scheme",
                    ));
                }
                let lambda = self.lambda.ok_or_else(|| {
                    CliError::config("field `lambda`: required for kind queue")
                })?;
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(CliError::config(format!(
                        "field `lambda`: must lie in (0, 1), got {lambda}"
                    )));
                }
                if !(self.horizon > 0.0) {
                    return Err(CliError::config("field `horizon`: must be positive"));
                }
                if !(0.0..self.horizon).contains(&self.burn_in) {
                    return Err(CliError::config(format!(
                        "field `burn_in`: must lie in [0, horizon), got {} with horizon {}",
                        self.burn_in, self.horizon
                    )));
                }
            }
            Kind::Fluid => {
                if !(self.t_end > 0.0) {
                    return Err(CliError::config("field `t_end`: must be positive"));
                }
                if let Some(lambda) = self.lambda {
                    if !(lambda > 0.0 && lambda < 1.0) {
                        return Err(CliError::config(format!(
                            "field `lambda`: must lie in (0, 1), got {lambda}"
                        )));
                    }
                }
            }
            Kind::Coupled => {
                if self.d < 2 {
                    return Err(CliError::config("field `d`: coupled runs need d >= 2"));
                }
            }
            Kind::Ancestry => {
                if self.schemes.len() > 1 {
                    return Err(CliError::config(
                        "field `schemes`: kind ancestry takes at most one scheme",
                    ));
                }
                if self.n_list.is_empty() || self.n_list.contains(&0) {
                    return Err(CliError::config(
                        "field `n_list`: entries must be >= 1 (set n or n_list)",
                    ));
                }
            }
        }
        if self.trials == 0 && !matches!(self.kind, Kind::Fluid) {
            return Err(CliError::config("field `trials`: must be >= 1"));
        }
        // Schemes must be constructible for the bin counts they will run at.
        if matches!(self.kind, Kind::Balls | Kind::Compare | Kind::Queue) {
            for &scheme in &self.schemes {
                ChooserConfig::new(scheme, self.n, self.d)
                    .map_err(|e| CliError::config(format!("field `schemes`: {e}")))?;
                if scheme.is_dleft() && self.tie_break != TieBreak::Leftmost {
                    return Err(CliError::config(
                        "field `tie_break`: d-left schemes require leftmost",
                    ));
                }
            }
        }
        if matches!(self.kind, Kind::Ancestry) {
            let scheme = self.ancestry_scheme();
            for &n in &self.n_list {
                ChooserConfig::new(scheme, n, self.d)
                    .map_err(|e| CliError::config(format!("field `n_list`: {e}")))?;
            }
        }
        Ok(())
    }

    /// Scheme used by ancestry runs (defaults to double hashing, the variant
    /// whose history the diagnostic is about).
    pub fn ancestry_scheme(&self) -> Scheme {
        self.schemes.first().copied().unwrap_or(Scheme::DoubleHash)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_all_resolve() {
        for name in preset_names() {
            let cfg = ExperimentConfig::resolve(Some(name), None, &[], false)
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.preset.as_deref(), Some(name));
            assert!(cfg.description.is_some(), "{name} lacks a description");
        }
    }

    #[test]
    fn overrides_win_over_presets() {
        let overrides = vec![
            ("trials".to_string(), "100".to_string()),
            ("master_seed".to_string(), "7".to_string()),
        ];
        let cfg = ExperimentConfig::resolve(Some("table6"), None, &overrides, false).unwrap();
        assert_eq!(cfg.trials, 100);
        assert_eq!(cfg.master_seed, 7);
        assert_eq!(cfg.n, 16384);
    }

    #[test]
    fn paper_scale_bumps_trials() {
        let cfg = ExperimentConfig::resolve(Some("table1a"), None, &[], true).unwrap();
        assert_eq!(cfg.trials, 10_000);
    }

    #[test]
    fn missing_kind_is_a_field_error() {
        let err = ExperimentConfig::resolve(None, None, &[], false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("kind"), "{msg}");
    }

    #[test]
    fn invalid_lambda_is_a_field_error() {
        let overrides = vec![
            ("kind".to_string(), "queue".to_string()),
            ("schemes".to_string(), "double".to_string()),
            ("n".to_string(), "64".to_string()),
            ("lambda".to_string(), "1.5".to_string()),
        ];
        let err = ExperimentConfig::resolve(None, None, &overrides, false).unwrap_err();
        assert!(err.to_string().contains("lambda"));
    }

    #[test]
    fn expectation_lines_parse() {
        let e = parse_expectation("expect.fraction.double.0", "0.17691 0.002 0.0005").unwrap();
        assert_eq!(e.quantity, Quantity::Fraction);
        assert_eq!(e.scheme, Some(Scheme::DoubleHash));
        assert_eq!(e.index, Some(0));
        assert_eq!(e.value, 0.17691);
        assert_eq!(e.desk_tolerance, 0.002);
        assert_eq!(e.paper_tolerance, 0.0005);
        assert_eq!(e.name(), "fraction.double.0");

        let e = parse_expectation("expect.fluid_tail.1", "0.8231 0.0001").unwrap();
        assert_eq!(e.scheme, None);
        assert_eq!(e.paper_tolerance, 0.0001);

        assert!(parse_expectation("expect.bogus.1", "0.5 0.1").is_err());
        assert!(parse_expectation("expect.fraction.double.0", "0.5").is_err());
    }

    #[test]
    fn dleft_with_random_ties_is_rejected() {
        let overrides = vec![
            ("kind".to_string(), "balls".to_string()),
            ("schemes".to_string(), "dleft_random".to_string()),
            ("n".to_string(), "12".to_string()),
            ("d".to_string(), "3".to_string()),
            ("tie_break".to_string(), "random".to_string()),
        ];
        let err = ExperimentConfig::resolve(None, None, &overrides, false).unwrap_err();
        assert!(err.to_string().contains("leftmost"));
    }
}
