//! Scenario configuration: strict TOML schema with exhaustive validation.
//!
//! `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//!
//! Validation never stops at the first problem; it walks the whole file
//! and returns every violation (unknown keys, missing keys, type errors,
//! range errors) in one list.

use crate::catalog;
use crate::scenarios;
use toml::{Table, Value};

/// Driver specification (validated, catalog-resolved).
#[derive(Debug, Clone)]
pub struct DriverSpec {
    pub kind: String,
    pub horizon: f64,
    pub grid_log2: u32,
    pub hurst: Option<f64>,
    pub rate: Option<f64>,
    pub profile: Option<String>,
}

#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub dim: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub half_width: f64,
    pub spacing: f64,
}

/// Fully validated scenario configuration.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub paths: usize,
    pub seed: u64,
    pub drivers: Vec<DriverSpec>,
    pub operator: Option<OperatorSpec>,
    pub grid: Option<GridSpec>,
    pub level: u32,
    pub tolerance: f64,
    pub times: Vec<f64>,
    pub trials: usize,
    pub forcing: String,
    pub initial: String,
    pub test_function: String,
    pub output_dir: Option<String>,
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_usize(v: &Value) -> Option<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Some(*i as usize),
        _ => None,
    }
}

struct Walker<'a> {
    errors: &'a mut Vec<String>,
}

impl Walker<'_> {
    fn unknown_keys(&mut self, table: &Table, section: &str, allowed: &[&str]) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                self.errors
                    .push(format!("unknown key `{key}` in {section}"));
            }
        }
    }

    fn f64_field(
        &mut self,
        table: &Table,
        section: &str,
        key: &str,
        default: Option<f64>,
    ) -> Option<f64> {
        match table.get(key) {
            Some(v) => match as_f64(v) {
                Some(x) => Some(x),
                None => {
                    self.errors
                        .push(format!("{section}.{key} must be a number"));
                    None
                }
            },
            None => {
                if default.is_none() {
                    self.errors
                        .push(format!("missing required key {section}.{key}"));
                }
                default
            }
        }
    }

    fn usize_field(
        &mut self,
        table: &Table,
        section: &str,
        key: &str,
        default: Option<usize>,
    ) -> Option<usize> {
        match table.get(key) {
            Some(v) => match as_usize(v) {
                Some(x) => Some(x),
                None => {
                    self.errors
                        .push(format!("{section}.{key} must be a nonnegative integer"));
                    None
                }
            },
            None => {
                if default.is_none() {
                    self.errors
                        .push(format!("missing required key {section}.{key}"));
                }
                default
            }
        }
    }

    fn string_field(
        &mut self,
        table: &Table,
        section: &str,
        key: &str,
        default: Option<&str>,
    ) -> Option<String> {
        match table.get(key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.errors
                    .push(format!("{section}.{key} must be a string"));
                None
            }
            None => {
                if default.is_none() {
                    self.errors
                        .push(format!("missing required key {section}.{key}"));
                }
                default.map(str::to_string)
            }
        }
    }

    fn f64_array(&mut self, table: &Table, section: &str, key: &str) -> Option<Vec<f64>> {
        match table.get(key) {
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    match as_f64(item) {
                        Some(x) => out.push(x),
                        None => {
                            self.errors
                                .push(format!("{section}.{key}[{i}] must be a number"));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Some(_) => {
                self.errors
                    .push(format!("{section}.{key} must be an array of numbers"));
                None
            }
            None => None,
        }
    }
}

fn validate_driver(table: &Table, section: &str, errors: &mut Vec<String>) -> Option<DriverSpec> {
    let mut w = Walker { errors };
    w.unknown_keys(
        table,
        section,
        &["kind", "horizon", "grid_log2", "hurst", "rate", "profile"],
    );
    let kind = w.string_field(table, section, "kind", None);
    let horizon = w.f64_field(table, section, "horizon", Some(1.0));
    let grid_log2 = w.usize_field(table, section, "grid_log2", Some(10));
    let hurst = w.f64_field(table, section, "hurst", Some(f64::NAN));
    let rate = w.f64_field(table, section, "rate", Some(f64::NAN));
    let profile = w.string_field(table, section, "profile", Some(""));

    let kind = kind?;
    match kind.as_str() {
        "wiener" => {}
        "fbm" => {
            let h = hurst.unwrap_or(f64::NAN);
            if h.is_nan() {
                errors.push(format!("{section}: fbm requires `hurst`"));
            } else if !(h > 0.5 && h < 1.0) {
                errors.push(format!("{section}.hurst: H out of (1/2,1): {h}"));
            }
        }
        "compensated_poisson" => {
            let r = rate.unwrap_or(f64::NAN);
            if r.is_nan() {
                errors.push(format!("{section}: compensated_poisson requires `rate`"));
            } else if !(r > 0.0) {
                errors.push(format!("{section}.rate must be positive, got {r}"));
            }
        }
        "deterministic" => {
            let p = profile.clone().unwrap_or_default();
            if p.is_empty() {
                errors.push(format!("{section}: deterministic requires `profile`"));
            } else if catalog::rate(&p).is_none() {
                errors.push(format!(
                    "{section}.profile `{p}` not in catalog {:?}",
                    catalog::names(catalog::RATES)
                ));
            }
        }
        other => errors.push(format!(
            "{section}.kind `{other}` is not one of wiener|fbm|compensated_poisson|deterministic"
        )),
    }
    if let Some(h) = horizon {
        if !(h > 0.0) {
            errors.push(format!("{section}.horizon must be positive, got {h}"));
        }
    }
    if let Some(g) = grid_log2 {
        if !(1..=14).contains(&g) {
            errors.push(format!("{section}.grid_log2 must be in 1..=14, got {g}"));
        }
    }
    Some(DriverSpec {
        kind,
        horizon: horizon?,
        grid_log2: grid_log2? as u32,
        hurst: hurst.filter(|h| !h.is_nan()),
        rate: rate.filter(|r| !r.is_nan()),
        profile: profile.filter(|p| !p.is_empty()),
    })
}

/// Parses and validates a configuration, returning either the resolved
/// config or the complete list of violations.
pub fn validate_config(text: &str) -> Result<ScenarioConfig, Vec<String>> {
    let table: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => return Err(vec![format!("not valid TOML: {e}")]),
    };
    let mut errors = Vec::new();

    {
        let mut w = Walker {
            errors: &mut errors,
        };
        w.unknown_keys(
            &table,
            "the top level",
            &["scenario", "prob_space", "driver", "operator", "grid", "run"],
        );
    }

    let scenario = match table.get("scenario") {
        Some(Value::String(s)) => {
            if scenarios::lookup(s).is_none() {
                errors.push(format!(
                    "unknown scenario `{s}`; known: {}",
                    scenarios::all_ids().join(", ")
                ));
            }
            s.clone()
        }
        Some(_) => {
            errors.push("`scenario` must be a string".into());
            String::new()
        }
        None => {
            errors.push("missing required key `scenario`".into());
            String::new()
        }
    };

    let (mut paths, mut seed) = (0usize, 0u64);
    match table.get("prob_space") {
        Some(Value::Table(ps)) => {
            let mut w = Walker {
                errors: &mut errors,
            };
            w.unknown_keys(ps, "[prob_space]", &["paths", "seed"]);
            if let Some(p) = w.usize_field(ps, "prob_space", "paths", None) {
                paths = p;
            }
            if let Some(s) = w.usize_field(ps, "prob_space", "seed", Some(0)) {
                seed = s as u64;
            }
        }
        Some(_) => errors.push("[prob_space] must be a table".into()),
        None => errors.push("missing required section [prob_space]".into()),
    }

    let mut drivers = Vec::new();
    match table.get("driver") {
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                match item {
                    Value::Table(t) => {
                        if let Some(d) = validate_driver(t, &format!("[[driver]][{i}]"), &mut errors)
                        {
                            drivers.push(d);
                        }
                    }
                    _ => errors.push(format!("[[driver]][{i}] must be a table")),
                }
            }
        }
        Some(Value::Table(t)) => {
            if let Some(d) = validate_driver(t, "[driver]", &mut errors) {
                drivers.push(d);
            }
        }
        Some(_) => errors.push("[driver] must be a table or array of tables".into()),
        None => {}
    }

    let operator = match table.get("operator") {
        Some(Value::Table(t)) => {
            let mut w = Walker {
                errors: &mut errors,
            };
            w.unknown_keys(t, "[operator]", &["dim", "a", "b", "c"]);
            let dim = w.usize_field(t, "operator", "dim", Some(1)).unwrap_or(1);
            let a = w.f64_array(t, "operator", "a");
            let b = w.f64_array(t, "operator", "b");
            let c = w.f64_field(t, "operator", "c", Some(0.0)).unwrap_or(0.0);
            let a = a.unwrap_or_else(|| {
                let mut eye = vec![0.0; dim * dim];
                for i in 0..dim {
                    eye[i * dim + i] = 1.0;
                }
                eye
            });
            let b = b.unwrap_or_else(|| vec![0.0; dim]);
            // surface coefficient problems now, with full context
            if let Err(e) = smcalc_core::EllipticOperator::new(dim, a.clone(), b.clone(), c) {
                errors.push(format!("[operator]: {e}"));
            }
            Some(OperatorSpec { dim, a, b, c })
        }
        Some(_) => {
            errors.push("[operator] must be a table".into());
            None
        }
        None => None,
    };

    let grid = match table.get("grid") {
        Some(Value::Table(t)) => {
            let mut w = Walker {
                errors: &mut errors,
            };
            w.unknown_keys(t, "[grid]", &["half_width", "spacing"]);
            let half_width = w.f64_field(t, "grid", "half_width", None);
            let spacing = w.f64_field(t, "grid", "spacing", None);
            for (name, v) in [("half_width", half_width), ("spacing", spacing)] {
                if let Some(x) = v {
                    if !(x > 0.0) {
                        errors.push(format!("grid.{name} must be positive, got {x}"));
                    }
                }
            }
            match (half_width, spacing) {
                (Some(hw), Some(sp)) => Some(GridSpec {
                    half_width: hw,
                    spacing: sp,
                }),
                _ => None,
            }
        }
        Some(_) => {
            errors.push("[grid] must be a table".into());
            None
        }
        None => None,
    };

    let mut level = 8u32;
    let mut tolerance = smcalc_core::DEFAULT_KY_FAN_TOL;
    let mut times = vec![0.5];
    let mut trials = 100usize;
    let mut forcing = "gauss_x".to_string();
    let mut initial = "gauss_half".to_string();
    let mut test_function = "gauss".to_string();
    let mut output_dir = None;
    match table.get("run") {
        Some(Value::Table(t)) => {
            let mut w = Walker {
                errors: &mut errors,
            };
            w.unknown_keys(
                t,
                "[run]",
                &[
                    "level",
                    "tolerance",
                    "times",
                    "trials",
                    "forcing",
                    "initial",
                    "test_function",
                    "output_dir",
                ],
            );
            if let Some(l) = w.usize_field(t, "run", "level", Some(8)) {
                if !(2..=12).contains(&l) {
                    w.errors.push(format!("run.level must be in 2..=12, got {l}"));
                } else {
                    level = l as u32;
                }
            }
            if let Some(tol) = w.f64_field(t, "run", "tolerance", Some(tolerance)) {
                if !(tol > 0.0) {
                    w.errors.push(format!("run.tolerance must be positive, got {tol}"));
                } else {
                    tolerance = tol;
                }
            }
            if let Some(ts) = w.f64_array(t, "run", "times") {
                if ts.is_empty() || ts.windows(2).any(|w| w[1] <= w[0]) {
                    w.errors.push("run.times must be nonempty and strictly increasing".into());
                } else {
                    times = ts;
                }
            }
            if let Some(n) = w.usize_field(t, "run", "trials", Some(100)) {
                if n == 0 {
                    w.errors.push("run.trials must be positive".into());
                } else {
                    trials = n;
                }
            }
            if let Some(f) = w.string_field(t, "run", "forcing", Some(&forcing)) {
                if catalog::forcing(&f).is_none() {
                    w.errors.push(format!(
                        "run.forcing `{f}` not in catalog {:?}",
                        catalog::names(catalog::FORCINGS)
                    ));
                } else {
                    forcing = f;
                }
            }
            if let Some(f) = w.string_field(t, "run", "initial", Some(&initial)) {
                if catalog::initial(&f).is_none() {
                    w.errors.push(format!(
                        "run.initial `{f}` not in catalog {:?}",
                        catalog::names(catalog::INITIALS)
                    ));
                } else {
                    initial = f;
                }
            }
            if let Some(f) = w.string_field(t, "run", "test_function", Some(&test_function)) {
                if catalog::test_function(&f, 1).is_none() {
                    w.errors.push(format!(
                        "run.test_function `{f}` not in catalog {:?}",
                        catalog::TEST_FUNCTIONS
                    ));
                } else {
                    test_function = f;
                }
            }
            output_dir = w.string_field(t, "run", "output_dir", Some("")).filter(|s| !s.is_empty());
        }
        Some(_) => errors.push("[run] must be a table".into()),
        None => {}
    }

    // scenario-level requirements
    if let Some(spec) = scenarios::lookup(&scenario) {
        if paths < 2 {
            errors.push("prob_space.paths must be at least 2".into());
        } else if spec.uses_ky_fan && paths < 100 {
            errors.push(format!(
                "prob_space.paths = {paths}: M below statistical floor (min 100) for Ky Fan checks"
            ));
        }
        if spec.needs_driver && drivers.is_empty() {
            errors.push(format!(
                "scenario `{scenario}` requires at least one [driver] section"
            ));
        }
        for t in &times {
            if *t < 0.0 {
                errors.push(format!("run.times contains a negative time {t}"));
            }
        }
    }

    if errors.is_empty() {
        Ok(ScenarioConfig {
            scenario,
            paths,
            seed,
            drivers,
            operator,
            grid,
            level,
            tolerance,
            times,
            trials,
            forcing,
            initial,
            test_function,
            output_dir,
        })
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
scenario = "quasi_norm"

[prob_space]
paths = 1000
seed = 7
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = validate_config(MINIMAL).unwrap();
        assert_eq!(cfg.scenario, "quasi_norm");
        assert_eq!(cfg.paths, 1000);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.level, 8);
    }

    #[test]
    fn bad_hurst_reported() {
        let text = r#"
scenario = "fubini"

[prob_space]
paths = 1000

[driver]
kind = "fbm"
hurst = 0.4
"#;
        let errs = validate_config(text).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("H out of (1/2,1)")), "{errs:?}");
    }

    #[test]
    fn low_path_count_reported() {
        let text = r#"
scenario = "quasi_norm"

[prob_space]
paths = 10
"#;
        let errs = validate_config(text).unwrap_err();
        assert!(
            errs.iter().any(|e| e.contains("below statistical floor")),
            "{errs:?}"
        );
    }

    #[test]
    fn all_errors_collected_not_first_only() {
        let text = r#"
scenario = "nonexistent"
bogus = 1

[prob_space]
paths = 10
mystery = 2

[driver]
kind = "fbm"
hurst = 1.5

[run]
level = 99
tolerance = -1.0
"#;
        let errs = validate_config(text).unwrap_err();
        for needle in [
            "unknown scenario",
            "unknown key `bogus`",
            "unknown key `mystery`",
            "H out of (1/2,1)",
            "run.level",
            "run.tolerance",
        ] {
            assert!(
                errs.iter().any(|e| e.contains(needle)),
                "missing `{needle}` in {errs:?}"
            );
        }
        assert!(errs.len() >= 6);
    }

    #[test]
    fn unknown_catalog_names_reported() {
        let text = r#"
scenario = "spde_baseline"

[prob_space]
paths = 500

[driver]
kind = "wiener"

[run]
forcing = "mystery_fn"
initial = "nope"
test_function = "nada"
"#;
        let errs = validate_config(text).unwrap_err();
        assert_eq!(
            errs.iter().filter(|e| e.contains("not in catalog")).count(),
            3,
            "{errs:?}"
        );
    }
}
